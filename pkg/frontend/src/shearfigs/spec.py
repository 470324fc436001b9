"""Figure specs: `key = value` files with JSON-style scalars, strictly parsed."""

import json
from dataclasses import dataclass, field as _field


class SpecError(ValueError):
    pass


_KINDS = ("decay", "envelope", "heatmap", "regression", "slack")


@dataclass
class FigureSpec:
    kind: str = "decay"
    csv: str = ""                    # time-series or scan-cells input
    summary: str = ""                # JSON summary (delta0, fits, envelopes)
    summaries: list = _field(default_factory=list)   # envelope figure inputs
    report: str = ""                 # multiplier report JSON (slack figure)
    scan: str = ""                   # scan JSON (regression figure)
    columns: list = _field(default_factory=lambda: ["omega_neq_l2"])
    logy: bool = True
    logx: bool = False
    title: str = ""
    output: str = "figure.svg"

    def validate(self):
        if self.kind not in _KINDS:
            raise SpecError(f"unknown figure kind {self.kind!r}; expected {_KINDS}")
        if not self.output.endswith((".svg", ".pdf", ".png")):
            raise SpecError(f"output {self.output!r} is not an image file")
        return self


_TYPES = {f: t for f, t in FigureSpec.__annotations__.items()}


def loads_spec(text) -> FigureSpec:
    spec = FigureSpec()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SpecError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _TYPES:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            val = json.loads(raw.strip())
        except json.JSONDecodeError:
            raise SpecError(f"line {lineno}: cannot parse value for {key!r}")
        want = _TYPES[key]
        if want is bool and not isinstance(val, bool):
            raise SpecError(f"line {lineno}: {key} expects a boolean")
        if want is str and not isinstance(val, str):
            raise SpecError(f"line {lineno}: {key} expects a string")
        if want is list and not isinstance(val, list):
            raise SpecError(f"line {lineno}: {key} expects a list")
        setattr(spec, key, val)
    return spec.validate()


def load_spec(path) -> FigureSpec:
    with open(path) as f:
        return loads_spec(f.read())
