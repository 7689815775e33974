"""Command-line entry point: ``nashbandit {solve,run,check,chung}``."""

from __future__ import annotations

import argparse
import json
import sys

from .checks import SUITES, run_suites
from .dynamics import PRESETS, chung_recursion
from .equilibrium import solve
from .errors import NashBanditError
from .experiment import ExperimentConfig, run_experiment


def _config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    return config.with_overrides(
        out=getattr(args, "out", None),
        seeds=getattr(args, "seeds", None),
        threads=getattr(args, "threads", None),
        preset=getattr(args, "preset", None),
    )


def cmd_solve(args) -> int:
    game, _, _ = _config(args).build()
    sol = solve(game)
    print(json.dumps({"x": sol.x.tolist(), "method": sol.method, "residual": sol.residual,
                      "iterations": sol.iterations}))
    return 0


def cmd_run(args) -> int:
    config = _config(args)
    if config.out is None:
        raise NashBanditError("an output directory is needed (--out or 'out' in the config)")
    result = run_experiment(config)
    s = result.summary
    slope = "null" if s["slope"] is None else f"{s['slope']:.4f}"
    print(f"seeds={len(config.seeds)} horizon={config.horizon} slope={slope} out={result.out}")
    return 0


def cmd_check(args) -> int:
    names = SUITES if args.suite == "all" else (args.suite,)
    results = run_suites(names, args.samples, args.seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_chung(args) -> int:
    res = chung_recursion(args.P, args.Q, args.p, args.q, args.a1, args.horizon)
    print(json.dumps({"limit": res.limit, "final_scaled": res.final_scaled, "relative_error": res.relative_error}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nashbandit", description="Mirror-descent learning in concave games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the reference Nash equilibrium of the configured game")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="run a multi-seed experiment and write CSV/JSON outputs")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    p.add_argument("--threads", type=int, help="worker processes (default: available cores)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named step-size schedule")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="run randomized invariant suites")
    p.add_argument("--suite", choices=("all",) + SUITES, default="all")
    p.add_argument("--samples", type=int, help="samples per check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("chung", help="iterate a_{n+1} = a_n (1 - P/n^p) + Q/n^(p+q)")
    p.add_argument("--P", type=float, default=1.0)
    p.add_argument("--Q", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1 / 3)
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.set_defaults(func=cmd_chung)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NashBanditError, ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
