"""Command-line harness: run | sweep | oracle | game | reduce | verify-conditions."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .adversary import (
    DsfhcLearner,
    GameShell,
    GreedyLearner,
    ObliviousAdversary,
    RandomWalk,
    RsfhcBLearner,
    SfhcLearner,
    generate_oblivious_instance,
    grid_quantizer,
    play_semi_adaptive,
    spike_adversary,
    transcript_to_spec,
)
from .families import StronglyConvex, estimate_condition_constants, instance_from_spec
from .harness import ExperimentConfig, rows_to_csv, rows_to_json, run_suite, sweep_and_report
from .model import movement_cost
from .oracle import offline_optimal, offline_optimal_grid, offline_optimal_quadratic
from .reductions import (
    cbc_from_spec,
    cbc_to_spec,
    duplicate_cbc_instance,
    epigraph_reduce,
)
from .windows import Grid, default_grid


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seeds"] = {"master": args.seed, "count": len(raw.get("seeds", [1]))
                        if isinstance(raw.get("seeds"), list) else
                        raw.get("seeds", {}).get("count", 1)}
    config = ExperimentConfig.from_dict(raw)
    rows, summary = run_suite(config)
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows)
    _emit(text, args.out)
    sys.stderr.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if summary["all_within_bounds"] else 1


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_dict(_load_json(args.config))
    _, summary = sweep_and_report(config, args.out, fmt=args.format)
    sys.stderr.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if summary["all_within_bounds"] else 1


def _grid_from_args(args, instance):
    if args.grid_lo is not None:
        return Grid.make(args.grid_lo, args.grid_hi, args.grid_n, dim=instance.dim)
    return default_grid(instance) if instance.dim <= 2 else None


def _cmd_oracle(args) -> int:
    instance = instance_from_spec(_load_json(args.instance))
    if args.method == "exact_quadratic":
        res = offline_optimal_quadratic(instance)
    elif args.method == "grid":
        res = offline_optimal_grid(instance, _grid_from_args(args, instance))
    else:
        res = offline_optimal(instance, _grid_from_args(args, instance))
    payload = {"cost": res.cost, "trajectory": res.trajectory.points.tolist(),
               "method": res.method}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


_LEARNERS = {
    "greedy": lambda args: GreedyLearner(),
    "sfhc": lambda args: SfhcLearner(args.phase),
    "dsfhc": lambda args: DsfhcLearner(),
    "rsfhc-b": lambda args: RsfhcBLearner(),
}


def _cmd_game(args) -> int:
    m = args.m
    shell = GameShell(1, args.T, np.zeros(1), movement_cost("sq_l2_half"),
                      lam=m / 2.0, family_tag="strongly_convex", params={"m": m})
    psi_grid = Grid.make(-12.0, 12.0, 241, dim=1)
    psi = grid_quantizer(psi_grid)
    learner_costs, adversary_costs, transcripts = [], [], []
    for i in range(args.seeds):
        rng = np.random.default_rng(args.seed + i)
        if args.adversary == "spike":
            adversary = spike_adversary(args.bins, args.inflation)
        else:
            inst = generate_oblivious_instance(StronglyConvex(m), RandomWalk(0.3),
                                               args.T, 1, rng)
            adversary = ObliviousAdversary(inst)
        learner = _LEARNERS[args.learner](args)
        transcript = play_semi_adaptive(learner, adversary, shell, args.w, psi, rng)
        learner_costs.append(transcript.learner_cost)
        adversary_costs.append(transcript.adversary_cost)
        if args.transcripts:
            transcripts.append(transcript_to_spec(transcript))
    if args.transcripts:
        with open(args.transcripts, "w") as fh:
            json.dump(transcripts, fh, indent=2)
    payload = {
        "games": args.seeds, "w": args.w, "learner": args.learner,
        "adversary": args.adversary,
        "mean_learner_cost": float(np.mean(learner_costs)),
        "mean_adversary_cost": float(np.mean(adversary_costs)),
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _cmd_reduce(args) -> int:
    if args.mode == "duplicate":
        instance = cbc_from_spec(_load_json(args.instance))
        reduced = duplicate_cbc_instance(instance, args.w)
    else:
        instance = instance_from_spec(_load_json(args.instance))
        reduced = epigraph_reduce(instance)
    _emit(json.dumps(cbc_to_spec(reduced), indent=2) + "\n", args.out)
    return 0


def _cmd_verify_conditions(args) -> int:
    instance = instance_from_spec(_load_json(args.instance))
    rng = np.random.default_rng(args.seed)
    lam_hat, eta_hat = estimate_condition_constants(instance, args.radius,
                                                    args.samples, rng)
    declared_lam, declared_eta = instance.lam, instance.movement.eta
    ok = (declared_lam is None or lam_hat >= declared_lam - 1e-6) \
        and eta_hat <= declared_eta + 1e-6
    print(f"lam_hat={lam_hat:.9g} (declared {declared_lam})")
    print(f"eta_hat={eta_hat:.9g} (declared {declared_eta})")
    print("consistent" if ok else "INCONSISTENT")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soco-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config and emit result rows")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep", help="run a config, write rows + JSON summary")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("oracle", help="offline optimum of an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=("auto", "grid", "exact_quadratic"),
                   default="auto")
    p.add_argument("--grid-lo", type=float, default=None)
    p.add_argument("--grid-hi", type=float, default=None)
    p.add_argument("--grid-n", type=int, default=201)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("game", help="commit-reveal games, quadratic shell")
    p.add_argument("--adversary", choices=("spike", "oblivious"), default="spike")
    p.add_argument("--learner", choices=tuple(_LEARNERS), default="rsfhc-b")
    p.add_argument("--w", type=int, default=6)
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--T", type=int, default=60)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--samples", type=int, default=0,
                   help="reserved for Monte Carlo subsampling inside policies")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=241)
    p.add_argument("--inflation", type=float, default=3.0)
    p.add_argument("--transcripts", default=None,
                   help="write per-game replay transcripts to this JSON file")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_game)

    p = sub.add_parser("reduce", help="duplicate a chasing instance or lift costs")
    p.add_argument("--mode", choices=("duplicate", "epigraph"), required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--w", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_reduce)

    p = sub.add_parser("verify-conditions", help="estimate growth/triangle constants")
    p.add_argument("--instance", required=True)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_verify_conditions)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
