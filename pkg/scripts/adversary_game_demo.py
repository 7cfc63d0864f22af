#!/usr/bin/env python3
"""Play the commit-reveal game: randomized-anchor learner vs spike policy.

Prints mean learner/adversary costs and the margin against the
semi-adaptive bound 1 + (2/(w-2)) max(eta/lam, 2(eta-1)).

Usage: python3 scripts/adversary_game_demo.py [--w 6] [--games 200]
"""

import argparse

import numpy as np

from soco_lab import (
    GameShell,
    Grid,
    RsfhcBLearner,
    grid_quantizer,
    movement_cost,
    play_semi_adaptive,
    spike_adversary,
)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--w", type=int, default=6)
    parser.add_argument("--T", type=int, default=60)
    parser.add_argument("--m", type=float, default=2.0)
    parser.add_argument("--games", type=int, default=200)
    parser.add_argument("--inflation", type=float, default=3.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    shell = GameShell(1, args.T, np.zeros(1), movement_cost("sq_l2_half"),
                      lam=args.m / 2.0, family_tag="strongly_convex",
                      params={"m": args.m})
    psi = grid_quantizer(Grid.make(-12.0, 12.0, 241, dim=1))
    bound = 1 + (2 / (args.w - 2)) * max(2.0 / (args.m / 2.0), 2.0)

    learner_costs, adversary_costs = [], []
    for i in range(args.games):
        transcript = play_semi_adaptive(
            RsfhcBLearner(), spike_adversary(241, args.inflation),
            shell, args.w, psi, np.random.default_rng(args.seed + i))
        learner_costs.append(transcript.learner_cost)
        adversary_costs.append(transcript.adversary_cost)

    learner = float(np.mean(learner_costs))
    adversary = float(np.mean(adversary_costs))
    margin = np.array(learner_costs) - bound * np.array(adversary_costs)
    stderr = margin.std(ddof=1) / np.sqrt(len(margin))
    print(f"games={args.games} w={args.w} inflation={args.inflation}")
    print(f"mean learner cost    {learner:.4f}")
    print(f"mean adversary cost  {adversary:.4f}")
    print(f"bound factor         {bound:.4f}")
    print(f"margin mean {margin.mean():.4f} vs 3*stderr {3 * stderr:.4f}")
    return 0 if margin.mean() <= 3 * stderr else 1


if __name__ == "__main__":
    raise SystemExit(main())
