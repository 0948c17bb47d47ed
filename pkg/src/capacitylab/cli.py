"""``capacitylab run | verify | game``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError
from .runner import clean, run


def _load(path):
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        for issue in exc.errors:
            print(f"{path}: {issue}", file=sys.stderr)
        return None
    except OSError as exc:
        print(f"{path}: {exc.strerror}", file=sys.stderr)
        return None
    for w in cfg.warnings:
        print(f"{path}: warning: {w}", file=sys.stderr)
    return cfg


def _summary(report) -> str:
    lines = []
    for t in report.data["tasks"]:
        extra = f"  {t['error']}" if t.get("error") else ""
        if t.get("failures"):
            extra = f"  {len(t['failures'])} failure(s)"
        lines.append(f"{t['id']:<24} {t['kind']:<10} {t['status']}{extra}")
    s = report.data["summary"]
    lines.append(f"{s['tasks']} task(s), {s['errors']} error(s), {s['failed']} failed")
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    report = run(cfg, args.out, parallel=args.parallel, seed=args.seed)
    print(_summary(report))
    if args.out:
        print(f"wrote {args.out}/report.json")
    return report.exit_code


def cmd_verify(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    report = run(cfg, args.out, parallel=args.parallel, seed=args.seed, kinds=("verify",))
    for t in report.data["tasks"]:
        print(f"== {t['id']} ({t['output'].get('handle', '')})")
        if t["status"] == "error":
            print(f"error: {t['error']}")
            continue
        print("\n".join(t["output"]["table"]))
    print(_summary(report))
    return report.exit_code


def cmd_game(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    report = run(cfg, args.out, parallel=args.parallel, seed=args.seed, kinds=("game",))
    print(json.dumps(clean(report.data["tasks"]), indent=2))
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capacitylab", description="Finite capacity experiments from a config file.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("run", cmd_run, "run every task in the config"),
        ("verify", cmd_verify, "run only the verify tasks and print their tables"),
        ("game", cmd_game, "run only the game tasks and print outcomes as JSON"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
        p.add_argument("--out", default=None if name != "run" else "capacitylab-out",
                       help="output directory for report.json and CSV files")
        p.add_argument("--parallel", action="store_true", help="run tasks concurrently (CAPACITYLAB_THREADS caps workers)")
        p.add_argument("--seed", type=int, default=None, help="override the config's global seed")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
