import io
import tempfile
import unittest
from contextlib import redirect_stdout
from pathlib import Path

import pandas as pd

from iqsync.cli import (
    EXIT_DATA,
    EXIT_NO_SOLUTION,
    EXIT_OK,
    EXIT_USAGE,
    main,
    parse_di_grid,
    parse_float_grid,
    parse_int_grid,
)
from iqsync.domain.exceptions import ConfigurationError
from iqsync.domain.models import CellSummary, TrialRecord
from iqsync.domain import analytics
from iqsync.tests.fixtures import INTERLEAVED_DETECTIONS


def run(*argv):
    out = io.StringIO()
    with redirect_stdout(out):
        code = main(list(argv))
    return code, out.getvalue()


def report(text: str) -> dict:
    return dict(line.split("=", 1) for line in text.strip().splitlines() if "=" in line)


class GridParsingTest(unittest.TestCase):
    def test_int_grids(self):
        self.assertEqual(parse_int_grid("12"), [12])
        self.assertEqual(parse_int_grid("8:11"), [8, 9, 10, 11])
        self.assertEqual(parse_int_grid("8,10, 12"), [8, 10, 12])
        self.assertEqual(parse_int_grid(7), [7])

    def test_di_grid(self):
        self.assertEqual(parse_di_grid("1,max"), [1, "max"])
        self.assertEqual(parse_di_grid("1:3"), [1, 2, 3])

    def test_float_grid(self):
        self.assertEqual(parse_float_grid("0.1,0.01"), [0.1, 0.01])
        self.assertEqual(parse_float_grid("60:62"), [60.0, 61.0, 62.0])
        self.assertEqual(parse_float_grid("60:61:0.5"), [60.0, 60.5, 61.0])

    def test_bad_grids(self):
        for text in ("", "a", "5:3", "1:x"):
            with self.subTest(text=text), self.assertRaises(ConfigurationError):
                parse_int_grid(text)
        with self.assertRaises(ConfigurationError):
            parse_float_grid("1:2:3:4")


class CommandTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_pattern_printed_and_written(self):
        code, out = run("pattern", "--lmax", "1", "--di", "1")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out.strip(), "00000101")
        code, out = run("pattern", "--lmax", "2", "--di", "1")
        self.assertEqual(out.strip(), "000000000101010100110011")

        first, second = self.dir / "a.pat", self.dir / "b.pat"
        run("pattern", "--lmax", "6", "--di", "3", "--seed", "4", "--out", str(first))
        code, out = run("pattern", "--lmax", "6", "--di", "3", "--seed", "4", "--out", str(second))
        self.assertEqual(report(out)["symbols"], str(3 * 128))
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_recover_worked_example(self):
        path = self.dir / "bob.txt"
        path.write_text("\n".join(str(d) for d in INTERLEAVED_DETECTIONS) + "\n")
        code, out = run("recover", "--lmax", "3", "--di", "2", str(path))
        self.assertEqual(code, EXIT_OK)
        values = report(out)
        self.assertEqual(values["delta_timebins"], "6")
        self.assertEqual(values["delta_symbols"], "3")
        self.assertEqual(values["level_counters"], "4,-4,6,-2")

    def test_recover_empty_file(self):
        path = self.dir / "empty.txt"
        path.write_text("")
        code, out = run("recover", "--lmax", "5", "--di", "1", str(path))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(report(out)["delta_timebins"], "0")
        self.assertEqual(report(out)["no_data"], "true")

    def test_simulate_then_recover(self):
        path = self.dir / "bob.bin"
        code, out = run(
            "simulate", "--lmax", "6", "--di", "1", "--psig", "1", "--offset-tb", "-40", "--out", str(path)
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("detections", report(out))
        self.assertEqual(float(report(out)["expected"]), 7 * 128)
        code, out = run("recover", "--lmax", "6", "--di", "1", str(path))
        self.assertEqual(report(out)["delta_timebins"], "-40")

    def test_simulate_with_attenuation_and_jitter(self):
        path = self.dir / "bob.txt"
        code, out = run(
            "simulate", "--lmax", "8", "--di", "1", "--eta-db", "1", "--offset-tb", "21",
            "--frac-offset", "0.2", "--jitter", "0.02", "--seed", "3", "--out", str(path),
        )
        self.assertEqual(code, EXIT_OK)
        self.assertIn("alignment_shift_ps", report(out))
        self.assertAlmostEqual(float(report(out)["eta_db"]), 1.0)
        code, out = run("recover", "--lmax", "8", "--di", "1", str(path))
        self.assertEqual(report(out)["delta_timebins"], "21")

    def test_model_tables(self):
        out_path = self.dir / "durations.csv"
        code, _ = run("model", "durations", "--lmax", "1:30", "--out", str(out_path))
        self.assertEqual(code, EXIT_OK)
        df = pd.read_csv(out_path)
        self.assertEqual(len(df), 30)
        self.assertEqual(df["n_symbols_d1"].iloc[-1], 31 * 2**31)

        code, out = run("model", "success", "--lmax", "10", "--di", "1", "--psig", "0.01", "--pnoise", "1e-4")
        self.assertEqual(code, EXIT_OK)
        df = pd.read_csv(io.StringIO(out))
        self.assertEqual(len(df), 1)
        self.assertIn("normal_approx_valid", df.columns)

        code, out = run("model", "qber", "--psig", "0.001", "--pnoise-ratio", "0.22")
        self.assertAlmostEqual(pd.read_csv(io.StringIO(out))["qber"].iloc[0], 0.11)

        code, out = run("model", "loops", "--lmax", "3", "--di", "1", "--psig", "0.001")
        self.assertAlmostEqual(pd.read_csv(io.StringIO(out))["n_loop"].iloc[0], 0.064)

    def test_attenuation_without_solution_exits_3(self):
        out_path = self.dir / "eta.csv"
        code, _ = run(
            "model", "attenuation", "--lmax", "2,10", "--di", "max", "--pnoise", "0.9", "--target", "0.99",
            "--out", str(out_path),
        )
        self.assertEqual(code, EXIT_NO_SOLUTION)
        df = pd.read_csv(out_path)
        self.assertEqual(len(df), 2)
        self.assertFalse(df["solved"].all())

    def test_complexity_then_fit(self):
        curve = self.dir / "curve.csv"
        code, _ = run("model", "complexity", "--lmax", "5:20", "--di", "1", "--out", str(curve))
        self.assertEqual(code, EXIT_OK)
        code, out = run("fit", str(curve))
        self.assertEqual(code, EXIT_OK)
        expected = analytics.polylog_fit(
            [(p.delta_max, p.n_loop) for p in analytics.complexity_curve(range(5, 21), 1, 0.0)]
        )
        values = report(out)
        self.assertAlmostEqual(float(values["a"]), expected.a, delta=1e-5 * expected.a)
        self.assertAlmostEqual(float(values["b"]), expected.b, delta=1e-5 * expected.b)
        self.assertEqual(values["n_points"], "16")

    def test_sweep_writes_trials_and_summary(self):
        out_path = self.dir / "sweep.csv"
        code, _ = run(
            "sweep", "--lmax", "6", "--di", "1,max", "--psig", "1", "--trials", "5", "--seed", "1",
            "--out", str(out_path),
        )
        self.assertEqual(code, EXIT_OK)
        trials = pd.read_csv(out_path)
        summary = pd.read_csv(self.dir / "sweep_summary.csv")
        self.assertEqual(len(trials), 10)
        self.assertEqual(list(summary["d_i"]), [1, 7])
        self.assertEqual(list(summary["trials"]), [5, 5])
        # lossless recovery is exact without interleaving; with it, it depends on the level draws
        self.assertEqual(summary.loc[summary["d_i"] == 1, "failures"].item(), 0)
        self.assertTrue(trials.loc[trials["d_i"] == 1, "success"].all())
        self.assertEqual(list(trials.columns), list(TrialRecord.model_fields))
        self.assertEqual(list(summary.columns), list(CellSummary.model_fields))

    def test_sweep_output_path_from_config_file(self):
        out_path = self.dir / "from_config.csv"
        config = self.dir / "sweep.env"
        config.write_text(f"LMAX=5\nDI=1\nPSIG=1.0\nTRIALS=3\nOUT={out_path}\n")
        code, out = run("sweep", "--config", str(config))
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(out, "")
        self.assertEqual(len(pd.read_csv(out_path)), 3)
        self.assertTrue((self.dir / "from_config_summary.csv").is_file())

    def test_config_file_and_flag_precedence(self):
        config = self.dir / "run.env"
        config.write_text("LMAX=1\nDI=1\n")
        code, out = run("pattern", "--config", str(config))
        self.assertEqual(out.strip(), "00000101")
        code, out = run("pattern", "--config", str(config), "--lmax", "2")
        self.assertEqual(len(out.strip()), 24)

    def test_usage_errors(self):
        self.assertEqual(run("pattern", "--bogus")[0], EXIT_USAGE)
        self.assertEqual(run("simulate", "--lmax", "4", "--psig", "0.1", "--eta-db", "10")[0], EXIT_USAGE)
        self.assertEqual(run("simulate", "--lmax", "4", "--psig", "1.5")[0], EXIT_USAGE)
        self.assertEqual(run("pattern", "--lmax", "40")[0], EXIT_USAGE)
        self.assertEqual(run("pattern", "--lmax", "4", "--di", "9")[0], EXIT_USAGE)
        self.assertEqual(run("pattern", "--config", str(self.dir / "missing.env"))[0], EXIT_USAGE)
        self.assertEqual(run()[0], EXIT_USAGE)

    def test_data_errors(self):
        unsorted = self.dir / "unsorted.txt"
        unsorted.write_text("9\n4\n")
        self.assertEqual(run("recover", "--lmax", "3", str(unsorted))[0], EXIT_DATA)
        self.assertEqual(run("recover", "--lmax", "3", str(self.dir / "missing.txt"))[0], EXIT_DATA)
        short = self.dir / "short.csv"
        short.write_text("delta_max,n_loop\n16,10\n32,12\n")
        self.assertEqual(run("fit", str(short))[0], EXIT_DATA)
        self.assertEqual(run("model", "success", "--lmax", "4", "--psig", "0")[0], EXIT_DATA)


if __name__ == "__main__":
    unittest.main()
