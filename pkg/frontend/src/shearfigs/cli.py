"""CLI: shearfigs render --spec fig.toml"""

import argparse
import json
import sys

from .spec import load_spec, SpecError
from .render import render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="shearfigs")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("render")
    r.add_argument("--spec", required=True)
    args = p.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        meta = render(spec)
    except (SpecError, FileNotFoundError, KeyError) as e:
        print(f"render error: {e}", file=sys.stderr)
        return 2
    print(json.dumps({"output": spec.output, **{k: v for k, v in meta.items()}}))
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
