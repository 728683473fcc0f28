"""Command-line entry point ``hbf-sim``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import bound_ceiling, expected_interference
from .config import ScenarioConfig
from .errors import ConfigError
from .harness import FIGURES, figure_preset, run_scenario, write_csv

EXIT_CONFIG = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hbf-sim", description="Hybrid beamforming Monte-Carlo simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario file")
    run.add_argument("--scenario", required=True, type=Path, help="JSON scenario file")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--threads", type=int)
    run.add_argument("--out", required=True, type=Path, help="output directory")

    fig = sub.add_parser("figure", help="simulate a figure preset")
    fig.add_argument("name", choices=FIGURES)
    fig.add_argument("--seed", type=int, default=2024)
    fig.add_argument("--trials", type=int, default=1000)
    fig.add_argument("--threads", type=int)
    fig.add_argument("--out", required=True, type=Path)

    b = sub.add_parser("bounds", help="print closed-form interference and ceiling values")
    b.add_argument("--sigma-delta", type=float, required=True)
    b.add_argument("--sigma-alpha", type=float, required=True)
    b.add_argument("--nbs", type=int, required=True)
    b.add_argument("--nue", type=int, required=True)
    b.add_argument("--ki", type=int, required=True)
    return p


def _run(args) -> int:
    cfg = ScenarioConfig.from_json(args.scenario)
    overrides = {k: getattr(args, k) for k in ("seed", "trials") if getattr(args, k) is not None}
    if overrides:
        cfg = cfg.with_(**overrides)
    rows = run_scenario(cfg, args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_csv(rows, args.out / f"{cfg.name}.csv")
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _figure(args) -> int:
    configs = figure_preset(args.name, trials=args.trials, seed=args.seed)
    rows = []
    for cfg in configs:
        rows.extend(run_scenario(cfg, args.threads))
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_csv(rows, args.out / f"{args.name}.csv")
    print(f"wrote {len(rows)} rows from {len(configs)} scenarios to {path}")
    return 0


def _bounds(args) -> int:
    for name in ("nbs", "nue", "ki"):
        if getattr(args, name) < 1:
            raise ConfigError(f"--{name} must be >= 1")
    if args.sigma_delta < 0 or args.sigma_alpha < 0:
        raise ConfigError("error standard deviations must be >= 0")
    sd, sa, nbs, nue, ki = args.sigma_delta, args.sigma_alpha, args.nbs, args.nue, args.ki
    simple = expected_interference(sd, sa, nbs, nue, ki, "simplified")
    exact = expected_interference(sd, sa, nbs, nue, ki, "exact")
    print(f"interference_simplified {simple:.6g}")
    print(f"interference_exact {exact:.6g}")
    if simple > 0:
        print(f"ceiling_bits_per_hz {bound_ceiling({ki: 1.0}, sd, sa, nbs, nue):.6g}")
    else:
        print("ceiling_bits_per_hz inf")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _run, "figure": _figure, "bounds": _bounds}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
