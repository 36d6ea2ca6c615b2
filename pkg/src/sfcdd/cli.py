"""Command line entry point: ``sfcdd run|sweep|verify|export``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import SfcddError
from .harness import (
    emit_results,
    load_config,
    resolve_point,
    run_experiment,
)

log = logging.getLogger("sfcdd")


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.seed is not None:
        out["seed"] = str(args.seed)
    if args.force:
        out["force"] = "true"
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="flat key = value config file")
    p.add_argument("--seed", type=int, default=None, help="base seed (overrides the file)")
    p.add_argument("--out-dir", default="results", help="output directory (default: results)")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="summary format")
    p.add_argument("--force", action="store_true", help="allow N > 1e7 or P > 1024")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfcdd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run a single config point"))
    _common(sub.add_parser("sweep", help="run every point of a config"))
    p = sub.add_parser("export", help="write the partition (JSON) and matrix (Matrix Market) of one point")
    _common(p)
    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--only", default=None, help="comma separated criterion numbers")
    return parser


def _print_table(table) -> None:
    cols = ("point", "N", "P", "gamma", "q", "p_fault", "runs", "discarded", "mean_K", "mean_rho_ave", "mean_rho_asy")
    print("  ".join(f"{c:>12}" for c in cols))
    for s in table.summary():
        print("  ".join(f"{s[c]:>12.4g}" if isinstance(s[c], float) else f"{s[c]!s:>12}" for c in cols))
    for r in table.rows:
        if r.message:
            print(f"{r.run_id}: {r.status}: {r.message}")


def cmd_experiment(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return 0
    keys = cfg.point_keys()
    if args.command == "run" and len(keys) != 1:
        print(f"run expects exactly one config point, the config expands to {len(keys)}; use sweep", file=sys.stderr)
        return 2

    def progress(index, rows):
        log.info("point %d: %s", index, ", ".join(f"{r.status} K={r.K}" for r in rows))

    table = run_experiment(cfg, progress=progress)
    written = emit_results(table, args.out_dir, args.format)
    _print_table(table)
    print(f"wrote {len(written)} files to {Path(args.out_dir).resolve()}")
    return 0


def cmd_export(args) -> int:
    from .grid import discretize, export_matrix_market
    from .partition import build_partition

    cfg = load_config(args.config, _overrides(args))
    if args.print_config:
        sys.stdout.write(cfg.to_text())
        return 0
    pt = resolve_point(cfg, 0, cfg.point_keys()[0])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    disc = discretize(pt.grid)
    export_matrix_market(disc.A, out / "matrix.mtx")
    (out / "partition.json").write_text(build_partition(pt.N, pt.P, pt.gamma).to_json())
    print(f"wrote matrix.mtx and partition.json to {out.resolve()}")
    return 0


def cmd_verify(args) -> int:
    from .acceptance import run_all

    only = None
    if args.only:
        only = {int(t) for t in args.only.split(",")}
    results = run_all(only=only, echo=True)
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "export":
            return cmd_export(args)
        return cmd_experiment(args)
    except SfcddError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
