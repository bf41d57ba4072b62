# taylor/services/spline.py
# Natural cubic spline through (x_i, v_i) and the a-priori error bound for spline
# approximation of a function with bounded sixth derivative.

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from taylor.exceptions import (DomainError, NonIncreasingKnotsError, NonUniformGridError,
                               OutOfRangeError, TooFewPointsError)
from taylor.services.function_model import DerivativeBundle

logger = logging.getLogger(__name__)

# 3 M (1 + M)^2 at mesh ratio M = 1, then the factors of the integration chain
BOUND_CHAIN = (12, 3, 2, 1)
BOUND_CONSTANT = 72


def solve_tridiagonal(lower, diag, upper, rhs) -> np.ndarray:
    """Thomas algorithm without pivoting; lower/upper have one entry fewer than diag."""
    diag = np.array(diag, dtype=float)
    rhs = np.array(rhs, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n = len(diag)
    if len(rhs) != n or len(lower) != n - 1 or len(upper) != n - 1:
        raise ValueError("tridiagonal bands do not match the system size")
    # forward elimination
    for i in range(1, n):
        m = lower[i - 1] / diag[i - 1]
        diag[i] -= m * upper[i - 1]
        rhs[i] -= m * rhs[i - 1]
    # back substitution
    out = np.empty(n)
    out[-1] = rhs[-1] / diag[-1]
    for i in range(n - 2, -1, -1):
        out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i]
    return out


@dataclass(frozen=True)
class SplineModel:
    """Piecewise cubic S(x) = a + b t + c t^2 + d t^3 with t = x - knots[i] on [knots[i], knots[i+1]]."""
    knots: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    second_derivatives: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    def _locate(self, xs: np.ndarray) -> np.ndarray:
        if np.any(xs < self.knots[0]) or np.any(xs > self.knots[-1]):
            bad = xs[(xs < self.knots[0]) | (xs > self.knots[-1])][0]
            raise OutOfRangeError(f"x={bad!r} outside the spline range [{self.lo}, {self.hi}]")
        idx = np.searchsorted(self.knots, xs, side="right") - 1
        return np.clip(idx, 0, len(self.knots) - 2)

    def evaluate_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        i = self._locate(xs)
        t = xs - self.knots[i]
        return self.a[i] + t * (self.b[i] + t * (self.c[i] + t * self.d[i]))

    def evaluate(self, x: float) -> float:
        return float(self.evaluate_array(np.array([x]))[0])

    def derivative_array(self, xs, order: int = 1) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        i = self._locate(xs)
        t = xs - self.knots[i]
        if order == 1:
            return self.b[i] + t * (2 * self.c[i] + 3 * t * self.d[i])
        if order == 2:
            return 2 * self.c[i] + 6 * t * self.d[i]
        if order == 3:
            return 6 * self.d[i]
        raise ValueError("spline derivatives are available for orders 1 to 3")

    def derivative(self, x: float, order: int = 1) -> float:
        return float(self.derivative_array(np.array([x]), order)[0])

    def uniform_step(self, rtol: float = 1e-9) -> float:
        steps = np.diff(self.knots)
        h = float(steps.mean())
        if np.ptp(steps) > rtol * h:
            raise NonUniformGridError(f"knot spacing varies by {np.ptp(steps):.3g} around h={h:.6g}")
        return h


def build_natural_spline(xs, values) -> SplineModel:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValueError("knots and values must be one-dimensional and of equal length")
    if len(xs) < 3:
        raise TooFewPointsError(f"a natural spline needs at least 3 knots, got {len(xs)}")
    h = np.diff(xs)
    if np.any(h <= 0):
        i = int(np.flatnonzero(h <= 0)[0])
        raise NonIncreasingKnotsError(f"knots not strictly increasing at index {i + 1}")

    slopes = np.diff(ys) / h
    inner = solve_tridiagonal(h[1:-1], 2 * (h[:-1] + h[1:]), h[1:-1], 6 * np.diff(slopes))
    m = np.concatenate(([0.0], inner, [0.0]))

    coeffs = dict(
        a=ys[:-1].copy(),
        b=slopes - h * (2 * m[:-1] + m[1:]) / 6,
        c=m[:-1] / 2,
        d=np.diff(m) / (6 * h),
    )
    model = SplineModel(knots=xs.copy(), second_derivatives=m, **coeffs)
    for arr in (model.knots, model.a, model.b, model.c, model.d, model.second_derivatives):
        arr.setflags(write=False)
    logger.debug("natural spline on %d knots over [%g, %g]", len(xs), xs[0], xs[-1])
    return model


def eval_spline(model: SplineModel, x: float) -> float:
    return model.evaluate(x)


# ------------------------------- Error bound -------------------------------

@dataclass(frozen=True)
class BoundReport:
    h: float
    max_y6: float
    argmax: float
    b_u: float
    measured_error: float | None = None

    def with_measured(self, error: float) -> "BoundReport":
        return replace(self, measured_error=float(error))

    @property
    def holds(self) -> bool | None:
        if self.measured_error is None:
            return None
        return self.measured_error <= self.b_u


def max_abs_sixth(bundle: DerivativeBundle, interval: tuple[float, float],
                  probe_points: int = 10001) -> tuple[float, float]:
    """(max |y^(6)|, argmax) over the interval: grid scan, then golden-section refinement."""
    if probe_points < 1000:
        raise ValueError("probe_points must be at least 1000")
    lo, hi = interval
    grid = np.linspace(lo, hi, probe_points)
    y6 = np.abs(bundle.values(6, grid))
    i = int(np.argmax(y6))
    best_x, best = float(grid[i]), float(y6[i])
    if 0 < i < probe_points - 1 and best > 0:
        try:
            res = minimize_scalar(lambda x: -abs(bundle.value(6, x)), method="golden",
                                  bracket=(grid[i - 1], grid[i], grid[i + 1]), options={"xtol": 1e-12})
        except (ValueError, DomainError) as exc:
            logger.debug("golden refinement skipped: %s", exc)
        else:
            if lo <= res.x <= hi and -res.fun > best:
                best_x, best = float(res.x), float(-res.fun)
    return best, best_x


def bound_bu(bundle: DerivativeBundle, interval: tuple[float, float], h: float,
             probe_points: int = 10001) -> BoundReport:
    """B_U = 72 h^4 max|y^(6)| for a uniform knot spacing h."""
    if h <= 0:
        raise ValueError("h must be positive")
    max_y6, argmax = max_abs_sixth(bundle, interval, probe_points)
    b_u = BOUND_CONSTANT * h ** 4 * max_y6
    logger.info("B_U=%.4g (h=%.6g, max|y6|=%.6g at x=%.6g)", b_u, h, max_y6, argmax)
    return BoundReport(h=float(h), max_y6=max_y6, argmax=argmax, b_u=b_u)


def bound_for_spline(bundle: DerivativeBundle, interval: tuple[float, float], model: SplineModel,
                     probe_points: int = 10001) -> BoundReport:
    return bound_bu(bundle, interval, model.uniform_step(), probe_points)


@dataclass(frozen=True)
class BoundChain:
    """Successive bounds on the error of the 5th down to the 2nd derivative of the spline."""
    e5: float
    e4: float
    e3: float
    e2: float


def leading_constant(mesh_ratio: float = 1.0) -> float:
    return 3 * mesh_ratio * (1 + mesh_ratio) ** 2


def recursion_bounds(max_y6: float, h: float, mesh_ratio: float = 1.0) -> BoundChain:
    e5 = leading_constant(mesh_ratio) * max_y6 * h
    e4 = BOUND_CHAIN[1] * e5 * h
    e3 = BOUND_CHAIN[2] * e4 * h
    e2 = BOUND_CHAIN[3] * e3 * h
    return BoundChain(e5, e4, e3, e2)
