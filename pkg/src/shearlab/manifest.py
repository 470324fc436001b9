"""Run manifests and atomic output writing.

A manifest records everything needed to reproduce a run bit-exactly on the
same platform: the full resolved config, package version, and the content
hash of every output. Wall-clock timing lives only in the manifest, never in
the outputs, so replays compare equal by hash.
"""

import hashlib
import json
import os
import time

from . import __version__
from .config import RunConfig, config_dict


def atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def atomic_write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, name, cfg: RunConfig, outputs, elapsed_s):
    """Write manifest_<name>.json next to the outputs it describes."""
    manifest = {
        "name": name,
        "tool": "shearlab",
        "version": __version__,
        "config": config_dict(cfg),
        "outputs": [{"file": os.path.basename(p), "sha256": sha256_file(p),
                     "bytes": os.path.getsize(p)} for p in outputs],
        "elapsed_s": elapsed_s,
        "created_unix": time.time(),
    }
    path = os.path.join(out_dir, f"manifest_{name}.json")
    atomic_write_json(path, manifest)
    return path


def load_manifest(path):
    with open(path) as f:
        return json.load(f)


def manifest_config(manifest) -> RunConfig:
    cfg = RunConfig(**manifest["config"])
    return cfg.validate()
