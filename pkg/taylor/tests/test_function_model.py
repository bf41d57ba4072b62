import math

import mpmath
import numpy as np
import sympy as sp
from django.test import SimpleTestCase

from taylor.exceptions import DomainError, ExpressionSyntaxError, UnknownIdentifierError
from taylor.services.function_model import (ONE, ZERO, Const, differentiate, evaluate, evaluate_array,
                                            evaluate_mp, make_bundle, parse)

SX = sp.Symbol("x")


class ParseTests(SimpleTestCase):
    def test_parses_example_functions(self):
        e = parse("exp(x/5)*sin(x)")
        self.assertEqual(evaluate(e, 2.0), math.exp(2.0 / 5) * math.sin(2.0))
        self.assertAlmostEqual(evaluate(parse("ln(1+x)"), 1.0), math.log(2.0), places=15)

    def test_precedence_and_unary_minus(self):
        self.assertEqual(evaluate(parse("-x^2"), 3.0), -9.0)
        self.assertEqual(evaluate(parse("2*x+3*x^2/6"), 2.0), 6.0)
        self.assertEqual(evaluate(parse("(x-1)*(x+1)"), 3.0), 8.0)

    def test_dangling_operator_reports_position(self):
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse("x^")
        self.assertEqual(ctx.exception.position, 2)
        self.assertIn("position 2", str(ctx.exception))

    def test_unknown_identifier(self):
        with self.assertRaises(UnknownIdentifierError) as ctx:
            parse("3 + foo(x)")
        self.assertEqual(ctx.exception.name, "foo")
        self.assertEqual(ctx.exception.position, 4)

    def test_implicit_multiplication_is_rejected(self):
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse("2x")
        self.assertEqual(ctx.exception.position, 1)

    def test_non_constant_exponent_is_rejected(self):
        with self.assertRaises(ExpressionSyntaxError):
            parse("x^x")

    def test_text_round_trip(self):
        for text in ("exp(x/5)*sin(x)", "ln(1+x)", "sqrt(x)*cos(2*x) - x^3/7"):
            e = make_bundle(parse(text)).expression(4)
            again = parse(e.to_text())
            for x in (0.3, 1.7, 4.2):
                self.assertAlmostEqual(evaluate(again, x), evaluate(e, x), delta=1e-12 * max(1, abs(evaluate(e, x))))


class DifferentiateTests(SimpleTestCase):
    def test_simplifies_trivial_derivatives(self):
        self.assertEqual(differentiate(parse("3")), ZERO)
        self.assertEqual(differentiate(parse("x")), ONE)
        self.assertEqual(differentiate(parse("x^2")), parse("2*x"))
        self.assertEqual(differentiate(parse("2*x")), Const(2.0))

    def test_matches_symbolic_oracle_through_sixth_order(self):
        rng = np.random.default_rng(20240501)
        cases = (
            ("exp(x/5)*sin(x)", sp.exp(SX / 5) * sp.sin(SX), (1.0, 10.0)),
            ("ln(1+x)", sp.log(1 + SX), (0.0, 10.0)),
            ("sqrt(x)*cos(x)", sp.sqrt(SX) * sp.cos(SX), (0.5, 4.0)),
            ("x^3 - 2/x", SX ** 3 - 2 / SX, (0.5, 3.0)),
        )
        for text, oracle, (lo, hi) in cases:
            bundle = make_bundle(parse(text))
            points = rng.uniform(lo, hi, 5)
            for order in range(1, 7):
                d = sp.diff(oracle, SX, order)
                for p in points:
                    expected = float(d.subs(SX, float(p)).evalf(30))
                    got = bundle.value(order, float(p))
                    with self.subTest(text=text, order=order, x=p):
                        self.assertAlmostEqual(got, expected, delta=1e-10 * max(1.0, abs(expected)))

    def test_unsimplified_derivative_has_same_values(self):
        e = parse("exp(x/5)*sin(x)")
        raw, folded = differentiate(e, simplified=False), differentiate(e)
        for x in (1.0, 2.5, 9.0):
            self.assertAlmostEqual(evaluate(raw, x), evaluate(folded, x), places=13)


class EvaluateTests(SimpleTestCase):
    def test_domain_errors(self):
        with self.assertRaises(DomainError):
            evaluate(parse("ln(x)"), -1.0)
        with self.assertRaises(DomainError):
            evaluate(parse("1/x"), 0.0)
        with self.assertRaises(DomainError):
            evaluate(parse("sqrt(x)"), -4.0)
        with self.assertRaises(DomainError):
            evaluate_array(parse("ln(x)"), np.array([1.0, 0.0]))

    def test_array_backend_agrees_with_scalar(self):
        e = make_bundle(parse("exp(x/5)*sin(x)")).expression(6)
        xs = np.linspace(1.0, 10.0, 257)
        scalar = np.array([evaluate(e, x) for x in xs])
        np.testing.assert_allclose(evaluate_array(e, xs), scalar, rtol=1e-13, atol=1e-13)

    def test_constant_expression_broadcasts(self):
        values = evaluate_array(parse("2+3"), np.zeros(4))
        self.assertEqual(values.shape, (4,))
        self.assertTrue(np.all(values == 5.0))

    def test_extended_precision_backend(self):
        with mpmath.workdps(30):
            value = evaluate_mp(parse("ln(1+x)"), "1")
            self.assertLess(abs(value - mpmath.log(2)), mpmath.mpf("1e-28"))


class BundleTests(SimpleTestCase):
    def test_requires_six_orders(self):
        with self.assertRaises(ValueError):
            make_bundle(parse("x^2"), max_order=5)

    def test_order_access(self):
        bundle = make_bundle(parse("x^3"))
        self.assertEqual(bundle.max_order, 6)
        self.assertEqual(bundle.value(3, 2.0), 6.0)
        self.assertEqual(bundle.value(4, 2.0), 0.0)
        with self.assertRaises(ValueError):
            bundle.expression(7)

    def test_domain_probe_rejects_undefined_orders(self):
        with self.assertRaises(DomainError):
            make_bundle(parse("ln(x)"), domain=(0.0, 1.0))
        make_bundle(parse("ln(1+x)"), domain=(0.0, 10.0))
