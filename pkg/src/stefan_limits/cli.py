"""Command-line driver: ``python -m stefan_limits.cli <study> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from .config import ConfigError, StudyConfig, load_config

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
SUBCOMMANDS = ("uniformity", "limit", "sector", "validate", "cross-check")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stefan-limits", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="study", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="JSON configuration file")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        if name == "limit":
            sp.add_argument("--limit-type", type=int, choices=range(1, 6),
                            help="override limit.limit_type")
    return parser


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return str(o)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def _run(study: str, cfg: StudyConfig, out: Path, args) -> bool:
    """Run one study and write its artifacts; returns True when any row FAILs."""
    if study == "uniformity":
        res = ex.run_uniformity_study(cfg)
        ex.write_csv(out / "uniformity.csv", "uniformity", ex.UNIFORMITY_COLUMNS, res.rows)
        _write_json(out / "uniformity_summary.json", res.summary)
        return res.failed
    if study == "limit":
        if args.limit_type is not None:
            from dataclasses import replace
            cfg = replace(cfg, limit=replace(cfg.limit, limit_type=args.limit_type))
        res = ex.run_singular_limit(cfg)
        name = f"limit_{cfg.limit.limit_type}"
        ex.write_csv(out / f"{name}.csv", name, ex.LIMIT_COLUMNS, res.rows)
        _write_json(out / f"{name}_summary.json", res.summary)
        return res.failed
    if study == "sector":
        res = ex.run_sector_report(cfg)
        ex.write_csv(out / "sector.csv", "sector", ex.SECTOR_COLUMNS, res.rows)
        _write_json(out / "sector_summary.json",
                    {"base": res.report, "refined": res.refined, "kappa_search": res.kappa_search})
        return res.failed
    if study == "validate":
        res = ex.run_validation(cfg)
        rows = [{"check": k, **v} for k, v in res.items()]
        ex.write_csv(out / "validate.csv", "validate", ("check", "value", "tol", "status"), rows)
        return any(r["status"] == "FAIL" for r in rows)
    rows = ex.run_cross_check(cfg)
    ex.write_csv(out / "cross_check.csv", "cross-check",
                 ("delta", "sigma", "rel_rho", "rel_v", "status"), rows)
    return any(r["status"] == "FAIL" for r in rows)


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failed = _run(args.study, cfg, args.out, args)
    return EXIT_FAIL if failed else EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
