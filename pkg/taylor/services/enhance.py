# taylor/services/enhance.py
# Taylor polynomials, the enhanced approximant T1 + P_R and the comparison metrics.

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from taylor.exceptions import OutOfRangeError
from taylor.services.function_model import DerivativeBundle
from taylor.services.lagrange import LagrangeTrajectory
from taylor.services.spline import BoundReport, SplineModel, bound_for_spline, build_natural_spline

logger = logging.getLogger(__name__)

MODES = ("factored", "direct")


@dataclass(frozen=True)
class TaylorPolynomial:
    x0: float
    coefficients: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate_array(self, xs) -> np.ndarray:
        t = np.asarray(xs, dtype=float) - self.x0
        acc = np.full_like(t, self.coefficients[-1])
        for c in reversed(self.coefficients[:-1]):
            acc = acc * t + c
        return acc

    def evaluate(self, x: float) -> float:
        t = x - self.x0
        acc = self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * t + c
        return acc

    def derivative_at_x0(self, order: int) -> float:
        if order > self.degree:
            return 0.0
        return self.coefficients[order] * math.factorial(order)


def taylor_poly(bundle: DerivativeBundle, x0: float, degree: int) -> TaylorPolynomial:
    if not 0 <= degree <= min(6, bundle.max_order):
        raise ValueError(f"degree must lie in 0..{min(6, bundle.max_order)}")
    return TaylorPolynomial(float(x0), tuple(bundle.value(k, x0) / math.factorial(k)
                                             for k in range(degree + 1)))


@dataclass(frozen=True)
class EnhancedApproximant:
    """
    T1(x) + P_R(x). Factored mode: P_R = S(x) (x - x0)^2 with S the spline of y''(xi)/2.
    Direct mode: P_R = S(x) with S the spline of R_xi itself.
    Between x0 and the first knot the factored mode holds S at its first-knot value and the
    direct mode blends linearly from 0 at x0.
    """
    t1: TaylorPolynomial
    spline: SplineModel
    mode: str
    x0: float
    valid_hi: float

    @property
    def first_knot(self) -> float:
        return self.spline.lo

    def remainder_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if np.any(xs < self.x0) or np.any(xs > self.valid_hi):
            raise OutOfRangeError(f"enhanced approximant is valid on [{self.x0}, {self.valid_hi}]")
        near = xs < self.first_knot
        inside = xs[~near]
        out = np.empty_like(xs)
        first = self.spline.a[0]
        if self.mode == "factored":
            out[~near] = self.spline.evaluate_array(inside) * (inside - self.x0) ** 2
            out[near] = first * (xs[near] - self.x0) ** 2
        else:
            out[~near] = self.spline.evaluate_array(inside)
            out[near] = first * (xs[near] - self.x0) / (self.first_knot - self.x0)
        return out

    def values(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return self.t1.evaluate_array(xs) + self.remainder_array(xs)

    def value(self, x: float) -> float:
        return float(self.values(np.array([x]))[0])


def build_enhanced(t1: TaylorPolynomial, trajectory: LagrangeTrajectory, bundle: DerivativeBundle,
                   mode: str = "factored", valid_hi: float | None = None) -> EnhancedApproximant:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if t1.degree != 1 or t1.x0 != trajectory.x0:
        raise ValueError("enhancement needs T1 about the trajectory's x0")
    nodes = trajectory.nodes
    s = bundle.values(2, trajectory.values) / 2
    data = s if mode == "factored" else s * (nodes - trajectory.x0) ** 2
    spline = build_natural_spline(nodes, data)
    valid_hi = spline.hi if valid_hi is None else min(float(valid_hi), spline.hi)
    return EnhancedApproximant(t1, spline, mode, trajectory.x0, valid_hi)


@dataclass(frozen=True)
class MetricsRow:
    label: str
    interval: tuple[float, float]
    delta_t: float
    delta_cs: float
    b_u: float
    delta_cs_near: float
    bound: BoundReport

    def to_dict(self) -> dict:
        return asdict(self)


def metrics(bundle: DerivativeBundle, enhanced: EnhancedApproximant, t5: TaylorPolynomial,
            interval: tuple[float, float], probe_points: int = 100001, label: str = "",
            include_near: bool = False, bound_probe_points: int = 10001) -> MetricsRow:
    """
    Delta_T = max |y - T5| over the interval, Delta_CS = max |y - (T1 + P_R)| over [x_z, hi]
    (or [x0, hi] with include_near), both on uniform probe grids; B_U from the spline spacing.
    """
    lo, hi = interval
    if probe_points < 2:
        raise ValueError("probe_points must be at least 2")
    probes = np.linspace(lo, hi, probe_points)
    delta_t = float(np.max(np.abs(bundle.values(0, probes) - t5.evaluate_array(probes))))

    cs_lo = max(lo, enhanced.x0) if include_near else enhanced.first_knot
    probes = np.linspace(cs_lo, min(hi, enhanced.valid_hi), probe_points)
    delta_cs = float(np.max(np.abs(bundle.values(0, probes) - enhanced.values(probes))))

    near = 0.0
    if enhanced.first_knot > enhanced.x0:
        probes = np.linspace(enhanced.x0, enhanced.first_knot, 101)[:-1]
        near = float(np.max(np.abs(bundle.values(0, probes) - enhanced.values(probes))))

    bound = bound_for_spline(bundle, (lo, hi), enhanced.spline, bound_probe_points).with_measured(delta_cs)
    row = MetricsRow(label, (float(lo), float(hi)), delta_t, delta_cs, bound.b_u, near, bound)
    logger.info("%s on [%g, %g]: delta_T=%.3g delta_CS=%.3g B_U=%.3g (near x0 %.3g)",
                label or "metrics", lo, hi, delta_t, delta_cs, bound.b_u, near)
    return row
