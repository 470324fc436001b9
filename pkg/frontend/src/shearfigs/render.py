"""Deterministic figure rendering from shearlab outputs.

Every number displayed comes from the input files; this layer does no
numerics beyond axis transforms. SVG output is byte-stable: the embedded
date is suppressed and the hash salt pinned.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_series_csv, require_columns, read_json  # noqa: E402
from .spec import FigureSpec, SpecError  # noqa: E402

plt.rcParams["svg.hashsalt"] = "shearfigs"

_CLASS_GLYPHS = {"stable": "S", "transient": "T", "unstable": "U"}


def _save(fig, path):
    fig.savefig(path, metadata={"Date": None} if path.endswith(".svg") else None)
    plt.close(fig)


def render_decay(spec: FigureSpec):
    data = read_series_csv(spec.csv)
    require_columns(data, ["t"] + list(spec.columns), spec.csv)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    t = data["t"]
    for col in spec.columns:
        vals = data[col]
        pos = vals > 0
        ax.plot(t[pos], vals[pos], label=col, lw=1.2)
    meta = {}
    if spec.summary:
        summary = read_json(spec.summary)
        slope = summary["envelope_slope"]   # -delta0 nu^(1/3), copied verbatim
        amp = summary.get("envelopes", {}).get("C3", 1.0) \
            * summary["eps0"] * summary["nu"] ** (1.0 / 3.0)
        ax.plot(t, amp * np.exp(slope * t), "k--", lw=1.0,
                label=f"envelope slope {slope:.3e}")
        meta["overlay_slope"] = slope
        meta["overlay_prefactor"] = amp
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(spec.title or "decay")
    ax.legend(fontsize=8)
    _save(fig, spec.output)
    return meta


def render_envelope(spec: FigureSpec):
    if not spec.summaries:
        raise SpecError("envelope figure needs 'summaries', a list of JSON paths")
    nus, consts = [], {"C1": [], "C2": [], "C3": []}
    for path in spec.summaries:
        s = read_json(path)
        if "envelopes" not in s:
            raise SpecError(f"{path}: summary carries no envelope constants")
        nus.append(s["nu"])
        for k in consts:
            consts[k].append(s["envelopes"][k])
    order = np.argsort(nus)
    nus = np.array(nus)[order]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for k, vals in consts.items():
        ax.plot(nus, np.array(vals)[order], "o-", label=k)
    ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel("nu")
    ax.set_ylabel("envelope constant")
    ax.set_title(spec.title or "decay-envelope constants")
    ax.legend(fontsize=8)
    _save(fig, spec.output)
    return {"n_runs": len(spec.summaries)}


def render_heatmap(spec: FigureSpec):
    data = read_series_csv(spec.csv)
    require_columns(data, ["nu", "amp_scale", "amplification_omega",
                           "classification"], spec.csv)
    nus = np.unique(data["nu"])
    amps = np.unique(data["amp_scale"])
    mat = np.full((amps.size, nus.size), np.nan)
    glyph = np.empty((amps.size, nus.size), dtype=object)
    for i in range(data["nu"].size):
        r = np.searchsorted(amps, data["amp_scale"][i])
        c = np.searchsorted(nus, data["nu"][i])
        mat[r, c] = np.log10(max(data["amplification_omega"][i], 1e-300))
        glyph[r, c] = _CLASS_GLYPHS.get(str(data["classification"][i]), "?")
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    im = ax.imshow(mat, origin="lower", aspect="auto", cmap="viridis")
    for r in range(amps.size):
        for c in range(nus.size):
            if glyph[r, c]:
                ax.text(c, r, glyph[r, c], ha="center", va="center",
                        color="white", fontsize=9)
    ax.set_xticks(range(nus.size), [f"{v:g}" for v in nus])
    ax.set_yticks(range(amps.size), [f"{v:g}" for v in amps])
    ax.set_xlabel("nu")
    ax.set_ylabel("amplitude scale")
    fig.colorbar(im, ax=ax, label="log10 amplification")
    ax.set_title(spec.title or "amplification / classification")
    _save(fig, spec.output)
    return {"cells": int(np.isfinite(mat).sum())}


def render_regression(spec: FigureSpec):
    blob = read_json(spec.scan or spec.summary)
    if "boundaries" not in blob or "exponent_fit" not in blob:
        raise SpecError("scan JSON carries no boundary regression "
                        "(need >= 3 bracketed viscosities)")
    b = np.array(blob["boundaries"], dtype=float)
    fit = blob["exponent_fit"]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(b[:, 0], b[:, 1], "o", label="boundary amplitude")
    x = np.array([b[:, 0].min(), b[:, 0].max()])
    ax.loglog(x, np.exp(fit["intercept"]) * x ** fit["slope"], "k--",
              label=f"slope {fit['slope']:.3f} +/- {fit['stderr']:.3f}")
    ax.set_xlabel("nu")
    ax.set_ylabel("amplitude")
    ax.set_title(spec.title or "stability-threshold exponent")
    ax.legend(fontsize=8)
    _save(fig, spec.output)
    return {"slope": fit["slope"]}


def render_slack(spec: FigureSpec):
    rep = read_json(spec.report or spec.summary)
    if "slack_log10_hist" not in rep:
        raise SpecError("report carries no slack histogram")
    hist = rep["slack_log10_hist"]
    edges = np.array(hist["edges"], dtype=float)
    counts = np.array(hist["counts"], dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(0.5 * (edges[:-1] + edges[1:]), counts,
           width=0.9 * np.diff(edges), color="tab:blue")
    ax.set_xlabel("log10 slack")
    ax.set_ylabel("samples")
    ax.set_title(spec.title
                 or f"dissipation slack (min {rep.get('min_slack', 0):.2e})")
    _save(fig, spec.output)
    return {"total": float(counts.sum()), "min_slack": rep.get("min_slack")}


_RENDERERS = {
    "decay": render_decay,
    "envelope": render_envelope,
    "heatmap": render_heatmap,
    "regression": render_regression,
    "slack": render_slack,
}


def render(spec: FigureSpec):
    """Render one figure; returns a small metadata dict about what was drawn."""
    spec.validate()
    return _RENDERERS[spec.kind](spec)
