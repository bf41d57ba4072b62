# taylor/services/lagrange.py
# The Lagrange function xi(x) of the first-order Taylor remainder
#     y(x) = y(x0) + y'(x0)(x - x0) + y''(xi(x)) (x - x0)^2 / 2
# integrated as an ODE, one trajectory per initial root, and spliced across branches.

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from taylor.exceptions import MismatchedGridError, SegmentUncoveredError, SingularityError
from taylor.services.function_model import DerivativeBundle, evaluate
from taylor.services.ode_rk7 import RK7_FEHLBERG, ButcherTableau, GridSolution, integrate
from taylor.services.rootfind import xi_z_residual

logger = logging.getLogger(__name__)

THIRD_DERIVATIVE_FLOOR = 1e-300
SEED_RESIDUAL_TOLERANCE = 1e-12


def make_rhs(bundle: DerivativeBundle, x0: float):
    """
    xi'(x) = 2 (y'(x) - y'(x0) - y''(xi)(x - x0)) / (y'''(xi)(x - x0)^2)

    Raises SingularityError at x = x0 and where y'''(xi) vanishes.
    """
    if bundle.max_order < 3:
        raise ValueError("the Lagrange ODE needs derivatives through order 3")
    d1, d2, d3 = (bundle.expression(k) for k in (1, 2, 3))
    yp0 = evaluate(d1, x0)

    def rhs(x: float, xi: float) -> float:
        u = x - x0
        if u == 0:
            raise SingularityError("Lagrange ODE undefined at x = x0", x, xi)
        third = evaluate(d3, xi)
        if abs(third) < THIRD_DERIVATIVE_FLOOR:
            raise SingularityError("y''' vanishes at xi", x, xi)
        return 2.0 * (evaluate(d1, x) - yp0 - evaluate(d2, xi) * u) / (third * u * u)

    return rhs


@dataclass(frozen=True)
class LagrangeTrajectory:
    x0: float
    seed: tuple[float, float]
    label: str
    nodes: np.ndarray
    values: np.ndarray
    step: float
    constraint_ok: np.ndarray
    crossings: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def x_z(self) -> float:
        return self.seed[0]

    @property
    def xi_z(self) -> float:
        return self.seed[1]

    @property
    def all_constraint_ok(self) -> bool:
        return bool(self.constraint_ok.all())

    def restrict(self, n_steps: int) -> "LagrangeTrajectory":
        """The first n_steps + 1 nodes, flags and crossings recomputed."""
        if not 1 <= n_steps < len(self.nodes):
            raise ValueError(f"cannot restrict a trajectory of {len(self.nodes)} nodes to {n_steps} steps")
        return build_trajectory(self.x0, self.seed, self.label, self.nodes[:n_steps + 1],
                                self.values[:n_steps + 1], self.step)


def constraint_flags(x0: float, nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """x0 < xi(x) < x at every node (strict)."""
    return (values > x0) & (values < nodes)


def _crossings(x0: float, nodes: np.ndarray, values: np.ndarray, flags: np.ndarray) -> tuple[float, ...]:
    # where xi meets x0 or the diagonal, interpolated linearly between the two straddling nodes
    out = []
    for i in np.flatnonzero(flags[1:] != flags[:-1]):
        x_a, x_b = nodes[i], nodes[i + 1]
        crossed = []
        for g_a, g_b in ((values[i] - x0, values[i + 1] - x0),
                         (nodes[i] - values[i], nodes[i + 1] - values[i + 1])):
            if g_a == 0:
                crossed.append(x_a)
            elif g_a * g_b < 0 or g_b == 0:
                crossed.append(x_a + (x_b - x_a) * g_a / (g_a - g_b))
        out.append(float(min(crossed)) if crossed else float(x_b))
    return tuple(out)


def build_trajectory(x0, seed, label, nodes, values, step) -> LagrangeTrajectory:
    nodes = np.array(nodes, dtype=float)
    values = np.array(values, dtype=float)
    flags = constraint_flags(x0, nodes, values)
    for arr in (nodes, values, flags):
        arr.setflags(write=False)
    return LagrangeTrajectory(x0, (float(seed[0]), float(seed[1])), label, nodes, values,
                              float(step), flags, _crossings(x0, nodes, values, flags))


def solve_lagrange(bundle: DerivativeBundle, x0: float, seed: tuple[float, float], x_end: float,
                   n_steps: int, label: str | None = None,
                   tableau: ButcherTableau = RK7_FEHLBERG) -> LagrangeTrajectory:
    x_z, xi_z = seed
    if not x0 < x_z < x_end:
        raise ValueError(f"need x0 < x_z < x_end, got {x0}, {x_z}, {x_end}")
    residual = xi_z_residual(bundle, x0, x_z, xi_z)
    if abs(residual) > SEED_RESIDUAL_TOLERANCE:
        raise ValueError(f"xi_z={xi_z!r} does not solve the remainder equation (residual {residual:.3g})")
    label = label or f"xi_z={xi_z:.6g}"
    solution: GridSolution = integrate(make_rhs(bundle, x0), x_z, xi_z, x_end, n_steps, tableau=tableau)
    trajectory = build_trajectory(x0, seed, label, solution.nodes, solution.values, solution.step)
    logger.info("%s: %d nodes, constraint holds at %d, crossings %s", label, len(trajectory),
                int(trajectory.constraint_ok.sum()), trajectory.crossings)
    return trajectory


@dataclass(frozen=True)
class RemainderSamples:
    nodes: np.ndarray
    r_xi: np.ndarray
    r_act: np.ndarray
    delta_r: np.ndarray

    @property
    def max_abs_delta_r(self) -> float:
        return float(np.max(np.abs(self.delta_r)))


def remainder_samples(trajectory: LagrangeTrajectory, bundle: DerivativeBundle) -> RemainderSamples:
    """Remainder from xi, actual remainder y - T1 and their difference at every node."""
    x0 = trajectory.x0
    nodes = trajectory.nodes
    u = nodes - x0
    r_xi = bundle.values(2, trajectory.values) / 2 * u ** 2
    r_act = bundle.values(0, nodes) - bundle.value(0, x0) - bundle.value(1, x0) * u
    return RemainderSamples(nodes, r_xi, r_act, r_act - r_xi)


# ------------------------------- Splicing -------------------------------

def _check_common_grid(trajectories):
    if not trajectories:
        raise SegmentUncoveredError("no trajectories to splice")
    first = trajectories[0]
    for t in trajectories[1:]:
        if t.x0 != first.x0 or t.nodes.shape != first.nodes.shape or not np.array_equal(t.nodes, first.nodes):
            raise MismatchedGridError(f"{t.label} does not share the grid of {first.label}")


def splice(trajectories, switch_points) -> LagrangeTrajectory:
    """
    Composite trajectory: nodes x <= s_1 from the first trajectory, s_1 < x <= s_2 from the
    second, and so on. Values are copied, never recomputed.
    """
    trajectories = list(trajectories)
    switch_points = [float(s) for s in switch_points]
    if len(trajectories) != len(switch_points) + 1:
        raise SegmentUncoveredError(
            f"{len(trajectories)} trajectories need {len(trajectories) - 1} switch points, got {len(switch_points)}")
    _check_common_grid(trajectories)
    first = trajectories[0]
    if len(trajectories) == 1:
        return first

    nodes = first.nodes
    points = np.asarray(switch_points)
    if np.any(np.diff(points) <= 0):
        raise SegmentUncoveredError("switch points must be strictly increasing")
    if points[0] <= nodes[0] or points[-1] >= nodes[-1]:
        raise SegmentUncoveredError(f"switch points must lie inside ({nodes[0]}, {nodes[-1]})")
    segment = np.searchsorted(points, nodes, side="left")
    counts = np.bincount(segment, minlength=len(trajectories))
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise SegmentUncoveredError(f"no grid node falls in segment {empty + 1}")

    stacked = np.vstack([t.values for t in trajectories])
    values = stacked[segment, np.arange(len(nodes))]
    return build_trajectory(first.x0, (nodes[0], values[0]), "spliced", nodes, values, first.step)


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    # maximal [start, end] index runs where flags hold
    padded = np.concatenate(([False], flags, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def plan_splice(trajectories) -> tuple[list[LagrangeTrajectory], list[float]]:
    """
    Pick branches and switch points so that the composite satisfies x0 < xi < x everywhere.
    Greedy interval cover over the runs where each branch satisfies the constraint; each switch
    point is the middle node of the overlap of consecutive runs.
    """
    trajectories = list(trajectories)
    _check_common_grid(trajectories)
    nodes = trajectories[0].nodes
    last = len(nodes) - 1
    runs = [(t, start, end) for t in trajectories for start, end in _runs(np.asarray(t.constraint_ok))]

    current = max((r for r in runs if r[1] == 0), key=lambda r: r[2], default=None)
    if current is None:
        raise SegmentUncoveredError("no branch satisfies x0 < xi < x at x_z")
    chosen, points = [current[0]], []
    while current[2] < last:
        nxt = max((r for r in runs if r[1] <= current[2] and r[2] > current[2]),
                  key=lambda r: r[2], default=None)
        if nxt is None:
            raise SegmentUncoveredError(
                f"no branch continues the constraint past x={nodes[current[2]]:.6g}")
        mid = max((max(nxt[1], current[1]) + current[2]) // 2, 1)
        points.append(float(nodes[mid]))
        chosen.append(nxt[0])
        current = nxt
    logger.info("splice plan: %s at %s", [t.label for t in chosen], points)
    return chosen, points


def auto_switch_points(trajectories) -> list[float]:
    chosen, points = plan_splice(trajectories)
    if [t.label for t in chosen] != [t.label for t in trajectories]:
        raise SegmentUncoveredError(
            "the given branches cannot be spliced in order; plan_splice picks a different sequence")
    return points
