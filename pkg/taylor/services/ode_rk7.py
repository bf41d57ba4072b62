# taylor/services/ode_rk7.py
# Fixed-step explicit Runge-Kutta of order 7 (Fehlberg weights) for scalar ODEs,
# plus an exact order-condition checker over rooted trees.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from taylor.exceptions import NonFiniteStateError, TableauError

logger = logging.getLogger(__name__)


def _q(values) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


@dataclass(frozen=True)
class ButcherTableau:
    """Explicit tableau stored as exact fractions; structure checked on construction."""
    name: str
    c: tuple[Fraction, ...]
    a: tuple[tuple[Fraction, ...], ...]
    b: tuple[Fraction, ...]
    order: int

    def __post_init__(self):
        stages = len(self.b)
        if len(self.c) != stages or len(self.a) != stages:
            raise TableauError(f"{self.name}: c, a and b disagree on the stage count")
        for i, row in enumerate(self.a):
            if len(row) != i:
                raise TableauError(f"{self.name}: row {i} of a must hold {i} entries for an explicit method")
            if sum(row, Fraction(0)) != self.c[i]:
                raise TableauError(f"{self.name}: row {i} of a does not sum to c[{i}]")
        if sum(self.b, Fraction(0)) != 1:
            raise TableauError(f"{self.name}: weights b do not sum to 1")

    @property
    def stages(self) -> int:
        return len(self.b)

    def coefficients(self, number: Callable = float):
        """(c, sparse a rows, sparse b) converted to `number` (float or mpmath.mpf)."""
        def conv(q: Fraction):
            return number(q.numerator) / number(q.denominator)

        c = [conv(v) for v in self.c]
        a = [[(j, conv(v)) for j, v in enumerate(row) if v] for row in self.a]
        b = [(i, conv(v)) for i, v in enumerate(self.b) if v]
        return c, a, b


RK7_FEHLBERG = ButcherTableau(
    name="fehlberg-7",
    c=_q(["0", "2/27", "1/9", "1/6", "5/12", "1/2", "5/6", "1/6", "2/3", "1/3", "1"]),
    a=(
        (),
        _q(["2/27"]),
        _q(["1/36", "1/12"]),
        _q(["1/24", "0", "1/8"]),
        _q(["5/12", "0", "-25/16", "25/16"]),
        _q(["1/20", "0", "0", "1/4", "1/5"]),
        _q(["-25/108", "0", "0", "125/108", "-65/27", "125/54"]),
        _q(["31/300", "0", "0", "0", "61/225", "-2/9", "13/900"]),
        _q(["2", "0", "0", "-53/6", "704/45", "-107/9", "67/90", "3"]),
        _q(["-91/108", "0", "0", "23/108", "-976/135", "311/54", "-19/60", "17/6", "-1/12"]),
        _q(["2383/4100", "0", "0", "-341/164", "4496/1025", "-301/82", "2133/4100",
            "45/82", "45/164", "18/41"]),
    ),
    b=_q(["41/840", "0", "0", "0", "0", "34/105", "9/35", "9/35", "9/280", "9/280", "41/840"]),
    order=7,
)


# ------------------------------- Order conditions -------------------------------
# A rooted tree is the sorted tuple of its children's trees; () is the single node.

@lru_cache(maxsize=None)
def rooted_trees(order: int) -> tuple[tuple, ...]:
    """All unlabelled rooted trees with `order` nodes, in canonical form."""
    if order < 1:
        return ()
    if order == 1:
        return ((),)
    found = set()
    for tree in rooted_trees(order - 1):
        found.update(_grow(tree))
    return tuple(sorted(found))


def _grow(tree: tuple):
    # every tree obtained by attaching one leaf somewhere in `tree`
    yield tuple(sorted(tree + ((),)))
    for i, child in enumerate(tree):
        for grown in _grow(child):
            yield tuple(sorted(tree[:i] + (grown,) + tree[i + 1:]))


def tree_order(tree: tuple) -> int:
    return 1 + sum(tree_order(child) for child in tree)


def tree_density(tree: tuple) -> int:
    """gamma(t) = |t| * product of the children's densities."""
    return tree_order(tree) * math.prod(tree_density(child) for child in tree)


def _stage_vector(tableau: ButcherTableau, tree: tuple) -> list[Fraction]:
    u = [Fraction(1)] * tableau.stages
    for child in tree:
        inner = _stage_vector(tableau, child)
        au = [sum((a_ij * inner[j] for j, a_ij in enumerate(row)), Fraction(0)) for row in tableau.a]
        u = [ui * v for ui, v in zip(u, au)]
    return u


def elementary_weight(tableau: ButcherTableau, tree: tuple) -> Fraction:
    u = _stage_vector(tableau, tree)
    return sum((bi * ui for bi, ui in zip(tableau.b, u)), Fraction(0))


def order_condition_residuals(tableau: ButcherTableau, max_order: int | None = None) -> list[tuple[tuple, Fraction]]:
    """(tree, Phi(t) - 1/gamma(t)) for every rooted tree up to max_order, exact."""
    max_order = tableau.order if max_order is None else max_order
    out = []
    for n in range(1, max_order + 1):
        for tree in rooted_trees(n):
            out.append((tree, elementary_weight(tableau, tree) - Fraction(1, tree_density(tree))))
    return out


def verify_order(tableau: ButcherTableau) -> None:
    failed = [t for t, r in order_condition_residuals(tableau) if r != 0]
    if failed:
        raise TableauError(f"{tableau.name}: {len(failed)} order conditions fail up to order {tableau.order}, "
                           f"first at a tree with {tree_order(failed[0])} nodes")


# ------------------------------- Integration -------------------------------

@dataclass(frozen=True)
class GridSolution:
    nodes: np.ndarray
    values: np.ndarray
    step: float

    def __post_init__(self):
        for arr in (self.nodes, self.values):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.nodes)


def _finite(v) -> bool:
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError, OverflowError):
        return False


def integrate(rhs: Callable, x_start, xi_start, x_end, n_steps: int,
              tableau: ButcherTableau = RK7_FEHLBERG, number: Callable = float) -> GridSolution:
    """
    Integrate xi' = rhs(x, xi) from (x_start, xi_start) to x_end in n_steps equal steps.
    Node i is x_start + i*h. `number` selects the scalar type (float or mpmath.mpf);
    with mpf the arrays are object arrays of mpf.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    x_start, xi_start, x_end = number(x_start), number(xi_start), number(x_end)
    if not x_end > x_start:
        raise ValueError("x_end must lie to the right of x_start")
    c, a, b = tableau.coefficients(number)
    h = (x_end - x_start) / n_steps
    stages = tableau.stages

    nodes = [x_start + i * h for i in range(n_steps + 1)]
    values = [xi_start]
    xi = xi_start
    k = [None] * stages
    for i in range(n_steps):
        x = nodes[i]
        for s in range(stages):
            arg = xi + h * sum(coef * k[j] for j, coef in a[s]) if a[s] else xi
            ks = rhs(x + c[s] * h, arg)
            if not _finite(ks):
                raise NonFiniteStateError(float(x), s)
            k[s] = ks
        xi = xi + h * sum(coef * k[s] for s, coef in b)
        if not _finite(xi):
            raise NonFiniteStateError(float(nodes[i + 1]))
        values.append(xi)

    dtype = float if number is float else object
    logger.debug("%s: %d steps of h=%.6g from x=%s", tableau.name, n_steps, float(h), x_start)
    return GridSolution(np.array(nodes, dtype=dtype), np.array(values, dtype=dtype), float(h))


@dataclass(frozen=True)
class EmpiricalOrder:
    problem: str
    step_counts: tuple[int, ...]
    errors: tuple[float, ...]
    slope: float


# name -> (rhs, exact value at x = 1), all started from xi(0) = 1
ORDER_PROBLEMS = {
    "growth": (lambda x, xi: xi, lambda: mpmath.e),
    "riccati": (lambda x, xi: -xi * xi, lambda: mpmath.mpf(1) / 2),
}


def estimate_order(tableau: ButcherTableau = RK7_FEHLBERG, problem: str = "growth",
                   step_counts=(32, 64, 128, 256), precision: int = 40) -> EmpiricalOrder:
    """
    Observed convergence order over [0, 1]: `growth` is xi' = xi, `riccati` is xi' = -xi^2.
    Runs in mpmath: order-7 errors at these step counts sit below double rounding.
    `growth` only probes the linear stability polynomial; `riccati` also hits the branched trees.
    """
    if problem not in ORDER_PROBLEMS:
        raise ValueError(f"problem must be one of {sorted(ORDER_PROBLEMS)}")
    rhs, exact = ORDER_PROBLEMS[problem]
    errors = []
    with mpmath.workdps(precision):
        target = exact()
        for n in step_counts:
            sol = integrate(rhs, 0, 1, 1, n, tableau=tableau, number=mpmath.mpf)
            errors.append(float(abs(sol.values[-1] - target)))
    slope = -np.polyfit(np.log2(step_counts), np.log2(errors), 1)[0]
    logger.info("%s on %s: observed order %.3f", tableau.name, problem, slope)
    return EmpiricalOrder(problem, tuple(step_counts), tuple(errors), float(slope))
