import csv
import tempfile
from dataclasses import replace
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from taylor.exceptions import ConfigError, StageError
from taylor.services import experiment
from taylor.tests.helpers import bundled_result

SMALL_CONFIG = """# y = e^x on [0, 1]
label = exp(x)
function = exp(x)
lo = 0
hi = 1
x0 = 0
n_steps = 2000
search_lo = 0
search_hi = 1
output_dir = {out}
"""


def _cached_run(config):
    """Reuse the shared in-memory runs of the bundled examples, keeping the caller's config."""
    for name in experiment.BUNDLED_EXAMPLES:
        result = bundled_result(name)
        if result.config.function == config.function:
            return replace(result, config=config)
    raise AssertionError(f"no bundled run for {config.function}")


class ConfigTests(SimpleTestCase):
    def test_bundled_config(self):
        config = experiment.load_config("example1.cfg")
        self.assertEqual(config.function, "exp(x/5)*sin(x)")
        self.assertAlmostEqual(config.x_z, 1.0005, places=15)
        self.assertEqual(config.switch_points, (4.0,))
        self.assertEqual(config.search_window, (1.0, 5.0))
        self.assertEqual(config.published["published_roots"], (1.000167, 3.157781))

    def test_overrides_win_over_file(self):
        config = experiment.load_config("example2.cfg", {"n_steps": 500, "mode": "direct", "output_dir": None})
        self.assertEqual(config.n_steps, 500)
        self.assertEqual(config.mode, "direct")
        self.assertEqual(config.search_window, (0.0, 10.0))

    def test_defaults_for_missing_keys(self):
        config = experiment.config_from_mapping({"function": "x^3", "lo": "0", "hi": "1", "x0": "0"})
        self.assertEqual(config.n_steps, 10000)
        self.assertEqual(config.mode, "factored")
        self.assertEqual(config.switch_points, ())
        self.assertEqual(config.search_window, (0.0, 1.0))
        self.assertEqual(config.label, "x^3")

    def test_auto_switch_points(self):
        config = experiment.config_from_mapping(
            {"function": "x^3", "lo": "0", "hi": "1", "x0": "0", "switch_points": "auto"})
        self.assertEqual(config.switch_points, "auto")

    def test_invalid_configs(self):
        base = {"function": "x^3", "lo": "0", "hi": "1", "x0": "0"}
        with self.assertRaises(ConfigError) as ctx:
            experiment.config_from_mapping({**base, "colour": "red"})
        self.assertIn("colour", ctx.exception.errors)
        for bad in ({"hi": "0"}, {"n_steps": "5"}, {"mode": "sideways"}, {"function": "ln(x"},
                    {"xz_offset": "-1"}, {"search_lo": "1", "search_hi": "0"}, {"seeds": "1, two"}):
            with self.subTest(bad=bad), self.assertRaises(ConfigError):
                experiment.config_from_mapping({**base, **bad})

    def test_default_offset_must_stay_below_hi(self):
        with self.assertRaises(ConfigError) as ctx:
            experiment.config_from_mapping({"function": "x^3", "lo": "0", "hi": "0.0004", "x0": "0"})
        self.assertIn("xz_offset", ctx.exception.errors)
        config = experiment.config_from_mapping({"function": "x^3", "lo": "0", "hi": "0.0004", "x0": "0",
                                                 "xz_offset": "0.0001"})
        self.assertAlmostEqual(config.x_z, 0.0001, places=15)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            experiment.load_config("/nonexistent/nothing-here.cfg")


class CommandExitCodeTests(SimpleTestCase):
    def test_bad_config_exits_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.cfg"
            path.write_text("function = ln(x\nlo = 0\nhi = 1\nx0 = 0\n", encoding="utf-8")
            with self.assertRaises(CommandError) as ctx:
                call_command("run", str(path), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_figure_exits_with_two(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("figure", "7", stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_numerical_failure_exits_with_one(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "log.cfg"
            path.write_text(f"function = ln(x)\nlo = 0\nhi = 1\nx0 = 0\noutput_dir = {tmp}\n", encoding="utf-8")
            with self.assertRaises(CommandError) as ctx:
                call_command("run", str(path), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_stage_is_named(self):
        config = experiment.config_from_mapping({"function": "ln(x)", "lo": "0", "hi": "1", "x0": "0"})
        with self.assertRaises(StageError) as ctx:
            experiment.run_experiment(config)
        self.assertEqual(ctx.exception.stage, "bundle")

    def test_unexpected_exception_is_wrapped_with_its_stage(self):
        config = experiment.config_from_mapping({"function": "exp(x)", "lo": "0", "hi": "1", "x0": "0",
                                                 "n_steps": "200"})
        with mock.patch.object(experiment, "seed_problem", side_effect=TypeError("unsupported operand")):
            with self.assertRaises(StageError) as ctx:
                experiment.run_experiment(config)
        self.assertEqual(ctx.exception.stage, "rootfind")
        self.assertIsInstance(ctx.exception.cause, TypeError)

    def test_unexpected_exception_exits_with_one(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "exp.cfg"
            path.write_text(SMALL_CONFIG.format(out=tmp), encoding="utf-8")
            with mock.patch.object(experiment, "seed_problem", side_effect=TypeError("unsupported operand")):
                with self.assertRaises(CommandError) as ctx:
                    call_command("run", str(path), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn("rootfind", str(ctx.exception))

    def test_inner_stage_error_passes_through(self):
        config = experiment.config_from_mapping({"function": "exp(x)", "lo": "0", "hi": "1", "x0": "0",
                                                 "n_steps": "200"})
        inner = StageError("inner", ValueError("boom"))
        with mock.patch.object(experiment, "seed_problem", side_effect=inner):
            with self.assertRaises(StageError) as ctx:
                experiment.run_experiment(config)
        self.assertIs(ctx.exception, inner)

    def test_guard_range_outside_domain_is_a_config_error(self):
        config = experiment.config_from_mapping(
            {"function": "ln(1.05-x)", "lo": "0", "hi": "1", "x0": "0", "n_steps": "100"})
        with self.assertRaises(ConfigError) as ctx:
            experiment.run_experiment(config)
        self.assertIn("spline_guard_steps", ctx.exception.errors)

    def test_guard_range_outside_domain_exits_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "near-pole.cfg"
            path.write_text(f"function = ln(1.05-x)\nlo = 0\nhi = 1\nx0 = 0\nn_steps = 100\n"
                            f"output_dir = {tmp}\n", encoding="utf-8")
            with self.assertRaises(CommandError) as ctx:
                call_command("run", str(path), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)


class RunCommandTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        cls.out = Path(cls.tmp.name) / "out"
        cls.config_path = Path(cls.tmp.name) / "exp.cfg"
        cls.config_path.write_text(SMALL_CONFIG.format(out=cls.out), encoding="utf-8")
        cls.stdout = StringIO()
        call_command("run", str(cls.config_path), stdout=cls.stdout)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def test_outputs_exist(self):
        names = sorted(p.name for p in self.out.iterdir() if not p.name.startswith("."))
        self.assertEqual(names, ["delta_r.svg", "lagrange.svg", "remainder.svg", "report.json",
                                 "trajectory_branch1.csv"])
        self.assertIn("Outputs written to", self.stdout.getvalue())

    def test_trajectory_csv(self):
        with open(self.out / "trajectory_branch1.csv", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0], ["x", "xi", "r_xi", "r_act", "delta_r", "constraint_ok"])
        self.assertEqual(len(rows), 2002)
        self.assertEqual(float(rows[1][0]), 0.0005)
        self.assertTrue(all(r[5] == "1" for r in rows[1:]))

    def test_svg_is_rendered(self):
        text = (self.out / "lagrange.svg").read_text(encoding="utf-8")
        self.assertTrue(text.lstrip().startswith("<svg"))
        self.assertIn("polyline", text)

    def test_report_round_trip(self):
        report = experiment.load_report(self.out / "report.json")
        self.assertEqual(len(report.roots), 1)
        self.assertIsNone(report.spliced)
        self.assertFalse(any("leaves" in w or "published" in w for w in report.warnings))
        self.assertLessEqual(report.metrics["delta_cs"], 1e-9)
        self.assertIn("duration_seconds", report.metadata)
        rerun = experiment.run_experiment(experiment.load_config(self.config_path))
        self.assertEqual(report.data_dict(), rerun.report.data_dict())

    def test_rerun_is_byte_identical(self):
        before = (self.out / "trajectory_branch1.csv").read_bytes()
        call_command("run", str(self.config_path), stdout=StringIO())
        self.assertEqual((self.out / "trajectory_branch1.csv").read_bytes(), before)


@mock.patch.object(experiment, "run_experiment", side_effect=_cached_run)
class BundledReproductionTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        # the class-level patch only covers test methods, so the cache fills with real runs
        for name in experiment.BUNDLED_EXAMPLES:
            bundled_result(name)

    def test_figure_one(self, _run):
        with tempfile.TemporaryDirectory() as tmp:
            stdout = StringIO()
            call_command("figure", "1", output_dir=tmp, stdout=stdout)
            self.assertTrue((Path(tmp) / "figure1.svg").read_text(encoding="utf-8").lstrip().startswith("<svg"))
            with open(Path(tmp) / "figure1.csv", encoding="utf-8", newline="") as fh:
                header = next(csv.reader(fh))
        self.assertEqual(header, ["x", "xi_branch1", "xi_branch2", "x0_line", "identity_line"])
        self.assertIn("figure 1", stdout.getvalue())

    def test_figure_series_kinds(self, _run):
        result = bundled_result("example2.cfg")
        self.assertEqual(list(experiment.figure_series(result, "remainder")), ["x", "r_xi_branch1", "r_act"])
        self.assertEqual(list(experiment.figure_series(result, "delta_r")), ["x", "delta_r_branch1"])
        with self.assertRaises(ValueError):
            experiment.figure_series(result, "phase")

    def test_table(self, _run):
        with tempfile.TemporaryDirectory() as tmp:
            call_command("table1", output_dir=tmp, stdout=StringIO())
            with open(Path(tmp) / "table1.csv", encoding="utf-8", newline="") as fh:
                rows = list(csv.DictReader(fh))
            self.assertTrue((Path(tmp) / "example1" / "trajectory_spliced.csv").exists())
            self.assertTrue((Path(tmp) / "example2" / "report.json").exists())
        self.assertEqual([r["function"] for r in rows], ["exp(x/5)*sin(x)", "ln(1+x)"])
        self.assertEqual([r["delta_t_ok"] for r in rows], ["1", "1"])
        self.assertEqual([r["delta_cs_ok"] for r in rows], ["1", "1"])
        self.assertEqual(rows[1]["b_u_ok"], "1")

    def test_published_mismatch_warnings(self, _run):
        warnings = bundled_result("example2.cfg").report.warnings
        self.assertTrue(any("published x_z" in w for w in warnings))
        self.assertFalse(any("published root" in w for w in warnings))


class SelfCheckCommandTests(SimpleTestCase):
    def test_all_checks_pass(self):
        stdout = StringIO()
        call_command("selfcheck", stdout=stdout)
        self.assertIn("All 6 checks passed", stdout.getvalue())
