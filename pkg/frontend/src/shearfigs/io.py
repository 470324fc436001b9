"""Readers for the primary tool's documented CSV/JSON formats."""

import json

import numpy as np

from .spec import SpecError


def read_series_csv(path):
    """Comment-aware CSV: '#' lines skipped, first row is the header."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise SpecError(f"{path}: empty CSV")
    header = lines[0].split(",")
    if len(lines) == 1:
        raise SpecError(f"{path}: CSV has a header but no rows")
    rows = [ln.split(",") for ln in lines[1:]]
    data = {}
    for i, name in enumerate(header):
        try:
            data[name] = np.array([float(r[i]) for r in rows])
        except ValueError:
            data[name] = np.array([r[i] for r in rows])
    return data


def require_columns(data, columns, path=""):
    missing = [c for c in columns if c not in data]
    if missing:
        raise SpecError(f"{path}: missing columns {missing}; "
                        f"available: {sorted(data)}")


def read_json(path):
    with open(path) as f:
        return json.load(f)
