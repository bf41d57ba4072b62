import math
from fractions import Fraction

from django.test import SimpleTestCase

from taylor.exceptions import NonFiniteStateError, TableauError
from taylor.services.ode_rk7 import (RK7_FEHLBERG, ButcherTableau, estimate_order, integrate,
                                     order_condition_residuals, rooted_trees, tree_density, verify_order)


class RootedTreeTests(SimpleTestCase):
    def test_tree_counts_through_order_seven(self):
        self.assertEqual([len(rooted_trees(n)) for n in range(1, 8)], [1, 1, 2, 4, 9, 20, 48])

    def test_densities(self):
        self.assertEqual(tree_density(()), 1)
        self.assertEqual(tree_density(((),)), 2)
        self.assertEqual(tree_density(((),())), 3)
        self.assertEqual(tree_density((((),),)), 6)


class TableauTests(SimpleTestCase):
    def test_fehlberg_satisfies_all_order_seven_conditions(self):
        residuals = order_condition_residuals(RK7_FEHLBERG)
        self.assertEqual(len(residuals), 85)
        self.assertEqual([t for t, r in residuals if r != 0], [])
        verify_order(RK7_FEHLBERG)

    def test_fehlberg_is_not_order_eight(self):
        residuals = order_condition_residuals(RK7_FEHLBERG, max_order=8)
        self.assertTrue(any(r != 0 for _, r in residuals))

    def test_structure_checks(self):
        with self.assertRaises(TableauError):
            ButcherTableau("bad-row", c=(Fraction(0), Fraction(1, 2)), a=((), (Fraction(1, 3),)),
                           b=(Fraction(0), Fraction(1)), order=2)
        with self.assertRaises(TableauError):
            ButcherTableau("bad-weights", c=(Fraction(0), Fraction(1, 2)), a=((), (Fraction(1, 2),)),
                           b=(Fraction(1, 2), Fraction(1, 3)), order=2)
        with self.assertRaises(TableauError):
            ButcherTableau("implicit", c=(Fraction(0), Fraction(1)), a=((Fraction(0),), (Fraction(1),)),
                           b=(Fraction(1, 2), Fraction(1, 2)), order=2)

    def test_lower_order_tableau_fails_verification(self):
        midpoint = ButcherTableau("midpoint", c=(Fraction(0), Fraction(1, 2)), a=((), (Fraction(1, 2),)),
                                  b=(Fraction(0), Fraction(1)), order=3)
        with self.assertRaises(TableauError):
            verify_order(midpoint)


class IntegrateTests(SimpleTestCase):
    def test_exponential_growth(self):
        sol = integrate(lambda x, y: y, 0.0, 1.0, 1.0, 100)
        self.assertLess(abs(sol.values[-1] - math.e), 1e-13)

    def test_constant_slope_is_exact(self):
        sol = integrate(lambda x, y: 1 / 3, 0.0005, 0.0005 / 3, 9.0, 10)
        for x, xi in zip(sol.nodes, sol.values):
            self.assertAlmostEqual(xi, x / 3, delta=1e-14)

    def test_cosine_integrates_to_sine(self):
        sol = integrate(lambda x, y: math.cos(x), 0.0, 0.0, math.pi / 2, 100)
        self.assertAlmostEqual(sol.values[-1], 1.0, delta=1e-12)

    def test_doubling_a_linear_rhs_doubles_the_increment(self):
        def rhs(x, y):
            return 1.0 + 3.0 * x

        once = integrate(rhs, 0.25, 2.0, 3.0, 40)
        twice = integrate(lambda x, y: 2 * rhs(x, y), 0.25, 2.0, 3.0, 40)
        for a, b in zip(once.values[1:], twice.values[1:]):
            self.assertAlmostEqual(b - 2.0, 2 * (a - 2.0), delta=1e-12 * abs(2 * (a - 2.0)))

    def test_nodes_are_uniform_and_read_only(self):
        sol = integrate(lambda x, y: -y, 0.5, 1.0, 2.5, 8)
        self.assertEqual(len(sol), 9)
        self.assertEqual(sol.step, 0.25)
        for i, x in enumerate(sol.nodes):
            self.assertEqual(x, 0.5 + i * 0.25)
        with self.assertRaises(ValueError):
            sol.values[0] = 3.0

    def test_non_finite_state(self):
        with self.assertRaises(NonFiniteStateError) as ctx:
            integrate(lambda x, y: float("inf") if x > 0.5 else y, 0.0, 1.0, 1.0, 10)
        self.assertGreater(ctx.exception.x, 0.4)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(ValueError):
            integrate(lambda x, y: y, 0.0, 1.0, 1.0, 0)
        with self.assertRaises(ValueError):
            integrate(lambda x, y: y, 1.0, 1.0, 0.0, 10)

    def test_observed_order_is_seven(self):
        for problem in ("growth", "riccati"):
            est = estimate_order(problem=problem)
            with self.subTest(problem=problem):
                self.assertEqual(est.step_counts, (32, 64, 128, 256))
                self.assertAlmostEqual(est.slope, 7.0, delta=0.3)
                self.assertEqual(list(est.errors), sorted(est.errors, reverse=True))

    def test_unknown_order_problem(self):
        with self.assertRaises(ValueError):
            estimate_order(problem="stiff")
