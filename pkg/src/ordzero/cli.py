"""Command line: ``ordzero <subcommand> --config <path> [--out <dir>]``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import load_config
from .errors import ConfigError, OrdZeroError
from .pipeline import RUNNERS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ordzero",
        description="Construct and verify order-zero maps of C^2 with prescribed "
                    "primitive periodic points.")
    ap.add_argument("subcommand", choices=sorted(RUNNERS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    return ap


def _record_timing(out: Path, name: str, seconds: float):
    # wall-clock times live apart from the reports so those stay byte-stable
    path = out / "timings.json"
    data = {}
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError:
            data = {}
    data[name] = round(seconds, 3)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        rep = RUNNERS[args.subcommand](cfg, out)
    except OrdZeroError as exc:
        print(f"{args.subcommand} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _record_timing(out, args.subcommand, time.perf_counter() - t0)
    ok = bool(rep.get("ok", False))
    print(f"{args.subcommand}: {'ok' if ok else 'FAILED'} -> {out}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
