"""Exact and brute-force offline optima used as ground truth.

Three routes: a closed-form tridiagonal solve for the quadratic family, a
full-horizon lattice dynamic program with backpointers for anything in
d <= 2, and an anchor-constrained optimum computed either segment by
segment (anchors decouple the horizon) or as a monolithic constrained
lattice program.  Reported costs always re-evaluate the reported
trajectory, so they are attained, not just claimed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, Trajectory, evaluate_total_cost
from .windows import (
    Grid,
    WindowSolver,
    _GridEval,
    build_window,
    default_grid,
    solve_quadratic_chain,
    solver_for,
)


@dataclass(frozen=True, eq=False)
class OracleResult:
    cost: float
    trajectory: Trajectory
    method: str
    resolution: float | None = None


def offline_optimal_quadratic(instance: Instance) -> OracleResult:
    """Closed-form optimum for the quadratic family over the full horizon."""
    if instance.family_tag != "strongly_convex" or instance.movement.kind != "sq_l2_half":
        raise ValueError("exact quadratic oracle needs the strongly_convex family")
    problem = build_window(instance, 0, instance.horizon + 1)
    sol = solve_quadratic_chain(problem)
    traj = evaluate_total_cost(instance, sol.free_points)
    return OracleResult(traj.total, traj, "exact_quadratic")


def offline_optimal_grid(instance: Instance, grid: Grid | None = None,
                         anchors=None) -> OracleResult:
    """Exact minimum over the lattice by forward DP with backpointers.

    With ``anchors`` (sorted 1-based timesteps), the state at each anchor t
    is pinned to the snapped minimizer v_t and the output trajectory carries
    the exact v_t there; this is the monolithic constrained program.
    """
    if instance.dim > 2:
        raise ValueError("grid oracle supports d <= 2")
    grid = grid or default_grid(instance)
    if grid.size > 10 ** 6:
        raise ValueError(
            f"grid has {grid.size} points (> 1e6); reduce n per dimension "
            f"(currently {grid.n})")
    anchor_steps = set()
    if anchors is not None:
        anchor_steps = {int(t) for t in anchors if 1 <= int(t) <= instance.horizon}

    pts = grid.points()
    cache = _GridEval()
    start_snap, _ = grid.snap(instance.start)

    def pin(values: np.ndarray, t: int) -> np.ndarray:
        if t not in anchor_steps:
            return values
        snapped, _ = grid.snap(instance.hitting[t - 1].minimizer)
        mask = np.full(grid.size, np.inf)
        j = int(np.argmin(((pts - snapped) ** 2).sum(axis=1)))
        mask[j] = 0.0
        return values + mask

    T = instance.horizon
    value = instance.movement.pairwise(pts, start_snap[None, :])[:, 0]
    value = pin(value + cache.cost_table(instance.hitting[0], grid), 1)
    back = np.empty((T, grid.size), dtype=np.int64)
    back[0] = -1
    for t in range(2, T + 1):
        stage, back[t - 1] = cache.minplus(value, instance.movement, grid)
        value = pin(stage + cache.cost_table(instance.hitting[t - 1], grid), t)

    last = int(np.argmin(value))
    idx = [last]
    for t in range(T - 1, 0, -1):
        idx.append(int(back[t, idx[-1]]))
    idx.reverse()
    points = pts[idx].copy()
    for t in anchor_steps:
        points[t - 1] = instance.hitting[t - 1].minimizer
    traj = evaluate_total_cost(instance, points)
    return OracleResult(traj.total, traj, "grid_dp",
                        resolution=float(grid.spacing().max()))


def offline_optimal(instance: Instance, grid: Grid | None = None) -> OracleResult:
    """Exact quadratic oracle when applicable, lattice DP otherwise."""
    if instance.family_tag == "strongly_convex":
        return offline_optimal_quadratic(instance)
    return offline_optimal_grid(instance, grid)


def _anchor_list(anchors) -> list[int]:
    members = getattr(anchors, "members", anchors)
    times = sorted({int(t) for t in members})
    if not times or times[0] != 0:
        times = [0] + [t for t in times if t > 0]
    if any(b - a < 1 for a, b in zip(times, times[1:])):
        raise ValueError("anchor gaps must be >= 1")
    return times


def constrained_offline(instance: Instance, anchors, solver: WindowSolver | None = None,
                        method: str = "segments") -> OracleResult:
    """Optimum of the total cost subject to x_t = v_t at every anchor t >= 1.

    ``method="segments"`` solves each inter-anchor window independently
    (anchors decouple them); ``method="monolithic"`` runs the constrained
    lattice program as a cross-check.  Anchor gaps of 1 are permitted.
    """
    times = _anchor_list(anchors)
    T = instance.horizon
    if times[-1] > T:
        raise ValueError("anchors beyond the horizon")
    if method == "monolithic":
        res = offline_optimal_grid(instance, solver.grid if solver else None,
                                   anchors=times)
        return OracleResult(res.cost, res.trajectory, "grid_dp", res.resolution)
    if method != "segments":
        raise ValueError(f"unknown method {method!r}")

    solver = solver or solver_for(instance)
    points = np.empty((T, instance.dim))
    tags = set()
    snap = 0.0
    segments = list(zip(times, times[1:]))
    if times[-1] < T:
        segments.append((times[-1], T + 1))
    for a, b in segments:
        problem = build_window(instance, a, b)
        sol = solver(problem)
        tags.add(sol.solver_tag)
        snap = max(snap, sol.snap_distance)
        for i, t in enumerate(problem.free_times()):
            points[t - 1] = sol.free_points[i]
        if b <= T:
            points[b - 1] = instance.hitting[b - 1].minimizer
    traj = evaluate_total_cost(instance, points)
    method_tag = tags.pop() if len(tags) == 1 else "mixed"
    resolution = float(solver.grid.spacing().max()) if (
        solver.grid is not None and "grid_dp" in (method_tag, "mixed")) else None
    return OracleResult(traj.total, traj, method_tag, resolution)
