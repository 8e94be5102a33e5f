"""Command line entry point: ``run``, ``sweep``, ``check`` and ``plot``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

from . import harness, theory


def parse_sizes(text: str) -> list[int]:
    """``"5:100:5"`` (inclusive range) or ``"10,20,40"``."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        if len(parts) == 2:
            parts.append(1)
        start, stop, stride = parts
        if stride <= 0:
            raise argparse.ArgumentTypeError("stride must be positive")
        return list(range(start, stop + 1, stride))
    return [int(x) for x in text.split(",") if x]


def parse_option(text: str) -> tuple[str, Any]:
    """``key=value`` with the value parsed as JSON when possible."""
    key, sep, raw = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise SystemExit(f"{path}: config must be a JSON object")
    return cfg


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--env", choices=["tree", "tree-tied", "chain"])
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--max-episodes", type=int, dest="max_episodes")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--solve-window", type=int, dest="solve_window")
    p.add_argument("--no-preset", action="store_false", dest="use_preset", default=None,
                   help="ignore the published hyperparameter presets")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="successor-uncertainties", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one agent on one environment")
    _common_flags(p)
    p.add_argument("--size", type=int)
    p.add_argument("--agent")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--option", type=parse_option, action="append", default=[],
                   help="agent option override, e.g. -o theta=100")

    p = sub.add_parser("sweep", help="run a grid of sizes, agents and seeds")
    _common_flags(p)
    p.add_argument("--sizes", type=parse_sizes)
    p.add_argument("--agents")
    p.add_argument("--seeds", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true", help="also render SVG plots (needs matplotlib)")

    p = sub.add_parser("check", help="run the theory oracles and print a JSON report")
    p.add_argument("--oracle", action="append", help="name prefix; repeatable")
    p.add_argument("--n-samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="also write the report to this file")

    p = sub.add_parser("plot", help="render SVG plots from a sweep directory")
    p.add_argument("--in", dest="in_dir", required=True)
    return parser


def _overrides(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    cfg.update(_overrides(args, ["env", "size", "agent", "seed", "max_episodes", "master_seed", "solve_window", "use_preset"]))
    if args.option:
        cfg["agent_options"] = {**cfg.get("agent_options", {}), **dict(args.option)}
    run_cfg = harness.RunConfig.from_dict(cfg)
    record = harness.run_single(run_cfg)
    out = record.row() | {"first_success": record.first_success, "error": record.error,
                          "config": run_cfg.to_dict()}
    print(json.dumps(out, indent=2))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    cfg.update(_overrides(args, ["env", "max_episodes", "master_seed", "solve_window", "use_preset"]))
    sizes = args.sizes or cfg.pop("sizes", None)
    agents = args.agents.split(",") if args.agents else cfg.pop("agents", None)
    seeds = args.seeds or cfg.pop("seeds", 5)
    cfg.pop("sizes", None), cfg.pop("agents", None), cfg.pop("seeds", None)
    if not sizes or not agents:
        raise SystemExit("sweep needs --sizes and --agents (or the same keys in --config)")
    env = cfg.pop("env", "tree")
    summary = harness.run_sweep(env, sizes, agents, seeds, workers=args.workers, **cfg)
    paths = harness.emit_outputs(summary, args.out, svg=args.svg)
    for c in summary.cells:
        med = "CENSORED" if math.isinf(c.median) else f"{c.median:g}"
        print(f"{c.env:10s} L={c.size:<4d} {c.agent:14s} median={med:>9s} solved={c.n_solved}/{c.n_seeds} [{c.classification}]")
    for f in summary.fits:
        print(f"fit {f.env}/{f.agent}: log10 T = {f.slope:.3f} log10 L + {f.intercept:.3f}")
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    reports = theory.run_all_oracles(seed=args.seed, n_samples=args.n_samples, names=args.oracle)
    text = json.dumps([r.to_dict() for r in reports], indent=2, default=float)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0 if all(r.passed for r in reports) else 1


def cmd_plot(args: argparse.Namespace) -> int:
    runs = Path(args.in_dir) / "runs.csv"
    summary = harness.summarize(harness.load_runs(runs))
    for p in harness.plot_summary(summary, args.in_dir):
        print(f"wrote {p}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check, "plot": cmd_plot}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
