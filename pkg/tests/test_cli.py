import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd

from VoBAL.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from VoBAL.CFI import FisherReport
from VoBAL.misc import sha256_file

FAST_PURE = ["--quad-radial", "64", "--quad-azimuthal", "8", "--quiet"]


def _never_settles(state, zeta, n_radial, n_azimuthal, cfg, breaks):
    return np.full(3, float(n_radial))


class CLITestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def run_cli(self, *argv):
        """Run the command line, returning (exit code, stdout, stderr)."""
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def run_json(self, *argv):
        out = self.path("out.json")
        code, _, err = self.run_cli(*argv, "--out", out)
        self.assertEqual(code, EXIT_OK, msg=err)
        with open(out, encoding="utf-8") as f:
            return json.load(f)


class TestQFICommand(CLITestCase):

    def test_gaussian(self):
        report = self.run_json("qfi", "--mode", "p0l0")
        self.assertEqual(report["oracle"], 1.0)
        self.assertEqual(report["pure"], 1.0)
        self.assertEqual(report["printed_source"], "closed_form_pure")

    def test_superposition(self):
        report = self.run_json("qfi", "--superpose", "p0l2,p0l0")
        self.assertAlmostEqual(report["oracle"], 3.0, places=12)
        self.assertEqual(report["printed"], 12.0)
        self.assertAlmostEqual(report["ratio"], 4.0, places=12)
        self.assertNotIn("pure", report)

    def test_stdout(self):
        code, out, _ = self.run_cli("qfi", "--mode", "p1l1")
        self.assertEqual(code, EXIT_OK)
        self.assertAlmostEqual(json.loads(out)["oracle"], 8.0, places=12)
        self.assertTrue(out.endswith("}\n"))

    def test_sphere_azimuth_does_not_matter(self):
        values = [self.run_json("qfi", "--mode", "p1l1", "--hl-theta", "0.7", "--hl-phi", phi)["oracle"]
                  for phi in ("0", "2.0", "5.5")]
        np.testing.assert_allclose(values, values[0], rtol=1e-12)
        report = self.run_json("qfi", "--mode", "p0l0", "--hl-theta", "1.0471")
        self.assertAlmostEqual(report["oracle"], 1.0, places=12)

    def test_physical_units(self):
        report = self.run_json("qfi", "--mode", "p0l0", "--w0", "1", "--wavelength", "0.5")
        self.assertAlmostEqual(report["z_R"], 2 * np.pi)
        self.assertAlmostEqual(report["oracle_physical"], 1 / (4 * np.pi ** 2))
        self.assertEqual(report["oracle"], 1.0)

    def test_parse_error(self):
        code, _, err = self.run_cli("qfi", "--superpose", "p0l2,,p0l0")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("position 5", err)
        self.assertIn("^", err)

    def test_usage_errors(self):
        for argv in (["qfi", "--mode", "p0l2,p0l0"], ["qfi", "--mode", "p0l0", "--w0", "1"],
                     ["qfi", "--mode", "p0l0", "--superpose", "p0l1"], ["qfi"], ["nonsense"]):
            self.assertEqual(self.run_cli(*argv)[0], EXIT_USAGE, msg=str(argv))

    def test_version(self):
        code, out, _ = self.run_cli("--version")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("vobal", out)


class TestScanCommand(CLITestCase):

    def test_gaussian_scan(self):
        out = self.path("scan.csv")
        code, _, err = self.run_cli("scan", "--mode", "p0l0", "--z-min", "0.5", "--z-max", "1.5", "--resolution",
                                    "11", "--out", out, *FAST_PURE)
        self.assertEqual(code, EXIT_OK, msg=err)
        with open(out, "rb") as f:
            raw = f.read()
        self.assertTrue(raw.startswith(",".join(FisherReport.columns).encode() + b"\n"))
        self.assertNotIn(b"\r\n", raw)
        df = pd.read_csv(out)
        self.assertEqual(len(df), 11)
        peak = df.loc[df["ratio_oracle"].idxmax()]
        self.assertAlmostEqual(peak["z_over_zR"], 1.0)
        self.assertAlmostEqual(peak["ratio_oracle"], 1.0, delta=1e-4)
        self.assertTrue(df["converged"].all())

    def test_physical_columns(self):
        out = self.path("scan.csv")
        self.run_cli("scan", "--mode", "p0l1", "--resolution", "3", "--w0", "2", "--wavelength", "1", "--out", out,
                     *FAST_PURE)
        df = pd.read_csv(out)
        z_R = np.pi * 4
        np.testing.assert_allclose(df["z"], df["z_over_zR"] * z_R)
        np.testing.assert_allclose(df["f_total_physical"], df["f_total"] / z_R ** 2)

    def test_bad_resolution(self):
        self.assertEqual(self.run_cli("scan", "--mode", "p0l0", "--resolution", "0", "--quiet")[0], EXIT_USAGE)
        self.assertEqual(self.run_cli("scan", "--mode", "p0l0", "--z-min", "2", "--z-max", "1", "--quiet")[0],
                         EXIT_USAGE)

    def test_manifest(self):
        out, manifest = self.path("scan.csv"), self.path("manifest.json")
        self.run_cli("scan", "--mode", "p0l0", "--resolution", "3", "--out", out, "--manifest", manifest,
                     *FAST_PURE)
        with open(manifest, encoding="utf-8") as f:
            record = json.load(f)
        self.assertEqual(record["command"], "scan")
        self.assertEqual(record["checksums"], {out: sha256_file(out)})
        self.assertEqual(record["parameters"]["resolution"], 3)
        self.assertEqual(record["parameters"]["mode"], "p0l0")
        self.assertIn("version", record)
        self.assertIn("timestamp", record)

    def test_total_failure(self):
        with mock.patch("VoBAL.CFI._components_on_grid", side_effect=_never_settles):
            code, _, err = self.run_cli("scan", "--superpose", "p0l2,p0l0", "--resolution", "2", "--quiet")
        self.assertEqual(code, EXIT_NUMERICAL, msg=err)
        self.assertIn("4096x4096", err)

    def test_superposition_at_default_settings(self):
        out = self.path("scan.csv")
        code, _, err = self.run_cli("scan", "--superpose", "p0l2,p0l0", "--resolution", "4", "--out", out, "--quiet")
        self.assertEqual(code, EXIT_OK, msg=err)
        df = pd.read_csv(out)
        self.assertTrue(df["converged"].all())
        self.assertTrue(np.all(df["f_total"] <= df["q_oracle"] * (1 + 2e-6)))


class TestOptimalPlaneCommand(CLITestCase):

    def test_pure_mode(self):
        report = self.run_json("optimal-plane", "--mode", "p0l3", "--n-coarse", "16", *FAST_PURE)
        self.assertTrue({"z_opt", "f_max", "q", "ratio"} <= set(report))
        self.assertAlmostEqual(report["z_opt"], 1.0, delta=1e-3)
        self.assertAlmostEqual(report["f_max"], 4.0, places=5)
        self.assertAlmostEqual(report["ratio"], 1.0, places=5)
        self.assertAlmostEqual(report["ratio_printed"], 1.0, places=5)

    def test_bad_range(self):
        self.assertEqual(self.run_cli("optimal-plane", "--mode", "p0l0", "--z-min", "0", "--quiet")[0], EXIT_USAGE)

    def test_numerical_failure(self):
        with mock.patch("VoBAL.CFI._components_on_grid", side_effect=_never_settles):
            code, _, err = self.run_cli("optimal-plane", "--superpose", "p0l2,p0l0", "--n-coarse", "4", "--quiet")
        self.assertEqual(code, EXIT_NUMERICAL)
        self.assertIn("numerical failure", err)
        self.assertIn("radial", err)

    def test_superposition_at_default_settings(self):
        report = self.run_json("optimal-plane", "--superpose", "p0l2,p0l0", "--quiet")
        self.assertGreater(report["f_max"], 0)
        self.assertLess(report["ratio"], 1)
        self.assertAlmostEqual(report["ratio_printed"], report["ratio"] / 4, places=12)
        self.assertTrue(0.02 <= report["z_opt"] <= 5)


class TestCRBCommand(CLITestCase):
    args = ("crb-sim", "--mode", "p0l0", "--photons", "500", "--trials", "8", "--n-coarse", "16", "--seed", "42",
            "--quiet")

    def read_bytes(self, *extra):
        out = self.path("crb.json")
        code, _, err = self.run_cli(*self.args, *extra, "--out", out)
        self.assertEqual(code, EXIT_OK, msg=err)
        with open(out, "rb") as f:
            return f.read()

    def test_byte_identical(self):
        first = self.read_bytes()
        self.assertEqual(first, self.read_bytes())
        self.assertEqual(first, self.read_bytes("--jobs", "2"))

    def test_schema(self):
        report = json.loads(self.read_bytes("--estimates"))
        for key in ("empirical_variance", "crb_classical", "crb_quantum", "efficiency", "n_boundary_flags",
                    "unreliable", "state"):
            self.assertIn(key, report)
        self.assertEqual(len(report["estimates"]), 8)
        self.assertAlmostEqual(report["crb_quantum"], 1 / 500)

    def test_few_photons(self):
        report = self.run_json("crb-sim", "--mode", "p0l0", "--photons", "10", "--trials", "20", "--n-coarse", "16",
                               "--quiet")
        self.assertIsNotNone(report["empirical_variance"])
        self.assertGreater(report["empirical_variance"], report["crb_classical"] * 0.5)

    def test_superposition(self):
        report = self.run_json("crb-sim", "--superpose", "p0l2,p0l0", "--z-true", "0.5", "--photons", "1000",
                               "--trials", "8", "--n-coarse", "16", "--quiet")
        self.assertEqual(report["state"], "p0l2*0.7071067811865475+0.0i,p0l0*0.7071067811865475+0.0i")
        self.assertLess(report["crb_quantum"], report["crb_classical"])

    def test_z_true_outside_range(self):
        self.assertEqual(self.run_cli("crb-sim", "--mode", "p0l0", "--z-true", "5", "--quiet")[0], EXIT_USAGE)


if __name__ == '__main__':
    unittest.main()
