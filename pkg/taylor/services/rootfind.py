# taylor/services/rootfind.py
# Initial Lagrange values xi_z near x0: roots of
#     y(x_z) - y(x0) - y'(x0)(x_z - x0) - y''(xi)(x_z - x0)^2 / 2 = 0

from __future__ import annotations

import logging
from contextlib import nullcontext
from dataclasses import dataclass

import mpmath
import numpy as np

from taylor.exceptions import NoRootFoundError
from taylor.services.function_model import DerivativeBundle

logger = logging.getLogger(__name__)

DEFAULT_SCAN_POINTS = 20001
BRACKET_TOLERANCE = 1e-14
# |residual slope| across a scan bracket below this is treated as rounding noise
NOISE_SLOPE = 1e-13
MAX_BISECTIONS = 400


@dataclass(frozen=True)
class InitialValueProblemSeed:
    x0: float
    x_z: float
    roots: tuple[float, ...]
    residual_tolerance: float


def xi_z_residual(bundle: DerivativeBundle, x0: float, x_z: float, xi: float) -> float:
    h = x_z - x0
    return (bundle.value(0, x_z) - bundle.value(0, x0) - bundle.value(1, x0) * h
            - bundle.value(2, xi) * h * h / 2)


class _Residual:
    """Residual as a function of xi alone, in doubles or in mpmath precision."""

    def __init__(self, bundle: DerivativeBundle, x0: float, x_z: float, extended: bool):
        self.bundle = bundle
        self.extended = extended
        if extended:
            h = mpmath.mpf(x_z) - mpmath.mpf(x0)
            self.base = bundle.mp_value(0, x_z) - bundle.mp_value(0, x0) - bundle.mp_value(1, x0) * h
        else:
            h = x_z - x0
            self.base = bundle.value(0, x_z) - bundle.value(0, x0) - bundle.value(1, x0) * h
        self.half_h2 = h * h / 2

    def __call__(self, xi):
        if self.extended:
            return self.base - self.bundle.mp_value(2, xi) * self.half_h2
        return self.base - self.bundle.value(2, xi) * self.half_h2

    def on_grid(self, grid: np.ndarray) -> np.ndarray:
        if self.extended:
            return np.array([self(mpmath.mpf(float(g))) for g in grid], dtype=object)
        return self.base - self.bundle.values(2, grid) * self.half_h2


def _sign(value) -> int:
    return int(value > 0) - int(value < 0)


def _bisect(f, lo, hi, f_lo):
    """Bisect a sign-change bracket down to BRACKET_TOLERANCE * max(1, |xi|)."""
    for _ in range(MAX_BISECTIONS):
        mid = (lo + hi) / 2
        if hi - lo <= BRACKET_TOLERANCE * max(1, abs(mid)) or mid in (lo, hi):
            break
        f_mid = f(mid)
        if f_mid == 0:
            return mid
        if _sign(f_mid) == _sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return (lo + hi) / 2


def find_xi_z(bundle: DerivativeBundle, x0: float, x_z: float, search_lo: float, search_hi: float,
              scan_points: int = DEFAULT_SCAN_POINTS, precision: int | None = None) -> list[float]:
    """
    All sign-change roots of the residual on a uniform scan grid over [search_lo, search_hi],
    each refined by bisection; sorted ascending. With `precision` (decimal digits) the residual
    is evaluated with mpmath, needed when x_z - x0 is so small that the double-precision residual
    is rounding noise.
    """
    if not search_lo < search_hi:
        raise ValueError("search_lo must be below search_hi")
    if scan_points < 100:
        raise ValueError("scan_points must be at least 100")

    ctx = mpmath.workdps(precision) if precision else nullcontext()
    with ctx:
        f = _Residual(bundle, x0, x_z, extended=bool(precision))
        grid = np.linspace(search_lo, search_hi, scan_points)
        values = f.on_grid(grid)
        signs = [_sign(v) for v in values]
        convert = mpmath.mpf if precision else float

        roots = []
        for i in range(scan_points):
            if signs[i] == 0:
                roots.append(float(grid[i]))
                continue
            if i + 1 == scan_points or signs[i] * signs[i + 1] >= 0:
                continue
            lo, hi = convert(float(grid[i])), convert(float(grid[i + 1]))
            slope = abs(values[i + 1] - values[i]) / (hi - lo)
            if slope < NOISE_SLOPE:
                logger.debug("rejecting noise bracket [%r, %r], slope %.3g", grid[i], grid[i + 1], float(slope))
                continue
            roots.append(float(_bisect(f, lo, hi, values[i])))

    roots.sort()
    distinct = []
    for r in roots:
        if distinct and r - distinct[-1] <= 10 * BRACKET_TOLERANCE * max(1.0, abs(r)):
            continue
        distinct.append(r)
    if not distinct:
        raise NoRootFoundError(
            f"no sign change of the xi_z residual on [{search_lo}, {search_hi}] "
            f"with {scan_points} scan points (x0={x0}, x_z={x_z})")
    logger.info("xi_z roots for x0=%s, x_z=%s: %s", x0, x_z, distinct)
    return distinct


def seed_problem(bundle: DerivativeBundle, x0: float, x_z: float, search_lo: float, search_hi: float,
                 scan_points: int = DEFAULT_SCAN_POINTS, residual_tolerance: float = 1e-12,
                 roots: list[float] | None = None) -> InitialValueProblemSeed:
    """
    Root set for the initial-value problem. Explicit `roots` skip the scan; every root must pass
    the residual tolerance, failing ones are dropped with a warning.
    """
    if roots is None:
        roots = find_xi_z(bundle, x0, x_z, search_lo, search_hi, scan_points)
    accepted = []
    for r in sorted(roots):
        residual = xi_z_residual(bundle, x0, x_z, r)
        if abs(residual) <= residual_tolerance:
            accepted.append(r)
        else:
            logger.warning("xi_z=%r rejected: residual %.3g exceeds %.3g", r, residual, residual_tolerance)
    if not accepted:
        raise NoRootFoundError(f"no xi_z passes the residual tolerance {residual_tolerance:g}")
    return InitialValueProblemSeed(x0, x_z, tuple(accepted), residual_tolerance)
