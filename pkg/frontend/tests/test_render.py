import json
import subprocess
import sys

import pytest

from shearfigs.spec import loads_spec, SpecError, FigureSpec
from shearfigs.render import render
from shearfigs.cli import main


PRIMARY_CONFIG = """
mode = "simulate"
grid_nx = 32
grid_ny = 32
ly = 6.283185307179586
nu = 0.01
m = 6
seed = 3
horizon = 6.0
output_every = 1.0
output_name = "ref"
"""


@pytest.fixture(scope="session")
def primary_outputs(tmp_path_factory):
    """Reference decay CSV + JSON summary produced through the primary CLI."""
    out = tmp_path_factory.mktemp("primary")
    cfg = out / "run.toml"
    cfg.write_text(PRIMARY_CONFIG)
    proc = subprocess.run(
        [sys.executable, "-m", "shearlab.cli", "simulate", "--config", str(cfg),
         "--output-dir", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return {"csv": out / "ref.csv", "summary": out / "ref_summary.json"}


class TestSpec:
    def test_parse_and_validate(self):
        spec = loads_spec('kind = "decay"\ncsv = "a.csv"\noutput = "f.svg"\n')
        assert spec.kind == "decay" and spec.csv == "a.csv"

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown key"):
            loads_spec('kind = "decay"\nwat = 1\n')

    def test_unknown_kind(self):
        with pytest.raises(SpecError, match="unknown figure kind"):
            loads_spec('kind = "pie"\n')

    def test_output_extension(self):
        with pytest.raises(SpecError, match="image"):
            loads_spec('kind = "decay"\noutput = "f.txt"\n')


class TestDecay:
    def test_byte_identical_rerender(self, primary_outputs, tmp_path):
        """[SECONDARY] determinism: same inputs give byte-identical SVG."""
        outs = []
        for name in ("a.svg", "b.svg"):
            spec = FigureSpec(kind="decay", csv=str(primary_outputs["csv"]),
                              summary=str(primary_outputs["summary"]),
                              output=str(tmp_path / name))
            render(spec)
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]

    def test_overlay_slope_exact(self, primary_outputs, tmp_path):
        """[SECONDARY] overlay slope equals the summary's -delta0 nu^(1/3) exactly."""
        spec = FigureSpec(kind="decay", csv=str(primary_outputs["csv"]),
                          summary=str(primary_outputs["summary"]),
                          output=str(tmp_path / "c.svg"))
        meta = render(spec)
        summary = json.loads(primary_outputs["summary"].read_text())
        assert meta["overlay_slope"] == summary["envelope_slope"]
        assert meta["overlay_slope"] == -summary["delta0"] * summary["nu"] ** (1.0 / 3.0)

    def test_missing_column(self, primary_outputs, tmp_path):
        spec = FigureSpec(kind="decay", csv=str(primary_outputs["csv"]),
                          columns=["no_such_column"],
                          output=str(tmp_path / "d.svg"))
        with pytest.raises(SpecError, match="missing columns"):
            render(spec)

    def test_empty_csv_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("# manifest: none\nt,omega_neq_l2\n")
        spec = FigureSpec(kind="decay", csv=str(empty),
                          output=str(tmp_path / "e.svg"))
        with pytest.raises(SpecError, match="no rows"):
            render(spec)
        assert not (tmp_path / "e.svg").exists()


class TestOtherKinds:
    def test_heatmap_glyphs(self, tmp_path):
        csv = tmp_path / "cells.csv"
        rows = ["# manifest: m.json",
                "nu,amp_scale,seed,amp_omega,amp_theta,amplification_omega,"
                "amplification_theta,final_over_initial_neq,classification"]
        for nu in (0.01, 0.003, 0.001):
            for a, cls in ((0.05, "stable"), (0.5, "transient"), (5.0, "unstable")):
                rows.append(f"{nu},{a},0,{a},{a},{1 + 10 * a},1.0,0.5,{cls}")
        csv.write_text("\n".join(rows) + "\n")
        spec = FigureSpec(kind="heatmap", csv=str(csv),
                          output=str(tmp_path / "h.svg"))
        meta = render(spec)
        assert meta["cells"] == 9
        assert (tmp_path / "h.svg").exists()

    def test_regression_slope_passthrough(self, tmp_path):
        blob = {"boundaries": [[0.01, 0.2154], [0.003, 0.1442], [0.001, 0.1]],
                "exponent_fit": {"slope": 0.3333, "stderr": 0.004,
                                 "intercept": 0.5}}
        path = tmp_path / "scan.json"
        path.write_text(json.dumps(blob))
        spec = FigureSpec(kind="regression", scan=str(path),
                          output=str(tmp_path / "r.svg"))
        meta = render(spec)
        assert meta["slope"] == 0.3333

    def test_regression_requires_fit(self, tmp_path):
        path = tmp_path / "scan.json"
        path.write_text(json.dumps({"cells": []}))
        spec = FigureSpec(kind="regression", scan=str(path),
                          output=str(tmp_path / "r.svg"))
        with pytest.raises(SpecError, match="boundary regression"):
            render(spec)

    def test_slack_histogram(self, tmp_path):
        rep = {"min_slack": 1.2e-3,
               "slack_log10_hist": {"edges": [-3, -2, -1, 0],
                                    "counts": [5, 10, 3]}}
        path = tmp_path / "rep.json"
        path.write_text(json.dumps(rep))
        spec = FigureSpec(kind="slack", report=str(path),
                          output=str(tmp_path / "s.svg"))
        meta = render(spec)
        assert meta["total"] == 18.0

    def test_envelope_multi_run(self, tmp_path):
        paths = []
        for i, nu in enumerate((0.01, 0.003, 0.001)):
            s = {"nu": nu, "eps0": 0.05, "delta0": 5e-3,
                 "envelope_slope": -5e-3 * nu ** (1 / 3),
                 "envelopes": {"C1": 0.1, "C2": 0.2 + 0.01 * i, "C3": 0.3}}
            p = tmp_path / f"s{i}.json"
            p.write_text(json.dumps(s))
            paths.append(str(p))
        spec = FigureSpec(kind="envelope", summaries=paths, logy=False,
                          output=str(tmp_path / "env.svg"))
        meta = render(spec)
        assert meta["n_runs"] == 3


class TestCli:
    def test_render_via_cli(self, primary_outputs, tmp_path, capsys):
        spec_file = tmp_path / "fig.toml"
        spec_file.write_text("\n".join([
            'kind = "decay"',
            f'csv = "{primary_outputs["csv"]}"',
            f'summary = "{primary_outputs["summary"]}"',
            f'output = "{tmp_path / "cli.svg"}"',
        ]) + "\n")
        assert main(["render", "--spec", str(spec_file)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["output"].endswith("cli.svg")

    def test_bad_spec_exit(self, tmp_path):
        spec_file = tmp_path / "bad.toml"
        spec_file.write_text('kind = "pie"\n')
        assert main(["render", "--spec", str(spec_file)]) == 2
