# taylor/services/selfcheck.py
# Analytic-oracle checks of the numerical core. Failures are reported, never raised.

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from taylor.services.function_model import make_bundle, parse
from taylor.services.lagrange import solve_lagrange
from taylor.services.ode_rk7 import RK7_FEHLBERG, estimate_order, order_condition_residuals
from taylor.services.rootfind import find_xi_z
from taylor.services.spline import build_natural_spline

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float | None
    target: str
    detail: str = ""


def _check_cubic() -> CheckResult:
    # y = x^3 about 0: xi(x) = x/3 exactly
    bundle = make_bundle(parse("x^3"))
    x_z = 0.0005
    t = solve_lagrange(bundle, 0.0, (x_z, x_z / 3), 9.0, 10000)
    err = float(np.max(np.abs(t.values - t.nodes / 3)))
    return CheckResult("cubic oracle", err <= 1e-10, err, "max |xi - x/3| <= 1e-10")


def exp_lagrange_closed_form(x):
    """xi(x) for y = e^x about 0."""
    x = np.asarray(x, dtype=float)
    return np.log(2 * (np.expm1(x) - x) / x ** 2)


def _check_exp() -> CheckResult:
    bundle = make_bundle(parse("exp(x)"))
    x_z = 0.0005
    xi_z = float(exp_lagrange_closed_form(x_z))
    t = solve_lagrange(bundle, 0.0, (x_z, xi_z), 5.0, 10000)
    err = float(np.max(np.abs(t.values - exp_lagrange_closed_form(t.nodes))))
    return CheckResult("exp oracle", err <= 1e-9, err, "max |xi - ln(2(e^x - 1 - x)/x^2)| <= 1e-9")


def _check_order() -> CheckResult:
    est = estimate_order()
    return CheckResult("rk7 convergence", abs(est.slope - 7) <= 0.3, est.slope, "fitted slope 7 +/- 0.3",
                       "errors " + ", ".join(f"{e:.2e}" for e in est.errors))


def _check_tableau() -> CheckResult:
    residuals = order_condition_residuals(RK7_FEHLBERG)
    failed = sum(1 for _, r in residuals if r != 0)
    return CheckResult("order conditions", failed == 0, float(failed), "0 of 85 trees failing",
                       f"{len(residuals)} trees checked")


def _check_spline_linear() -> CheckResult:
    xs = np.linspace(0.0, 4.0, 5)
    model = build_natural_spline(xs, 2 * xs + 1)
    probes = np.random.default_rng(7).uniform(0.0, 4.0, 50)
    err = float(np.max(np.abs(model.evaluate_array(probes) - (2 * probes + 1))))
    ends = max(abs(model.derivative(0.0, 2)), abs(model.derivative(4.0, 2)))
    return CheckResult("spline linear reproduction", err <= 1e-13 and ends <= 1e-9, err,
                       "off-knot error <= 1e-13, end S'' = 0")


def _check_limit_ratio() -> CheckResult:
    worst = 0.0
    for text, x0 in (("exp(x/5)*sin(x)", 1.0), ("ln(1+x)", 0.0)):
        bundle = make_bundle(parse(text))
        x_z = x0 + 1e-5
        root = find_xi_z(bundle, x0, x_z, x0, x_z, scan_points=101, precision=30)[0]
        worst = max(worst, abs((root - x0) / (x_z - x0) * 3 - 1))
    return CheckResult("xi_z limit ratio", worst <= 0.01, worst, "(xi_z - x0)/(x_z - x0) within 1% of 1/3")


CHECKS = (_check_cubic, _check_exp, _check_order, _check_tableau, _check_spline_linear, _check_limit_ratio)


def run_selfcheck() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            result = check()
        except Exception as exc:  # reported as a failed check
            name = check.__name__.removeprefix("_check_").replace("_", " ")
            result = CheckResult(name, False, None, "", f"raised {type(exc).__name__}: {exc}")
        logger.info("selfcheck %s: %s (%s)", result.name, "pass" if result.passed else "FAIL", result.value)
        results.append(result)
    return results


def all_passed(results) -> bool:
    return all(r.passed for r in results) and not any(
        r.value is not None and math.isnan(r.value) for r in results)
