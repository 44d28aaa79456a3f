"""End-to-end checks of the trafficctl command line.

Usage: cli_test.py <trafficctl> <fixtures dir>
"""

import csv
import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

TOOL = None
FIXTURES = None


def run(*args, cwd=None):
    return subprocess.run([TOOL, *map(str, args)], capture_output=True, text=True, cwd=cwd, timeout=600)


class CliTest(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory(prefix="trafficctl-")
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def ok(self, *args):
        r = run(*args, cwd=self.tmp)
        self.assertEqual(r.returncode, 0, f"{args}\nstdout:\n{r.stdout}\nstderr:\n{r.stderr}")
        return r

    def manifest(self, out):
        return json.loads((self.tmp / out / "run_manifest.json").read_text())

    def test_stats_matches_fixture_histogram(self):
        r = self.ok("stats", FIXTURES / "dataset10", "--out", "o", "--csv", "o/hist.csv")
        counts = {}
        for line in r.stdout.splitlines():
            cells = [c.strip() for c in line.split("|")]
            if len(cells) == 2 and cells[1].isdigit():
                counts[cells[0]] = int(cells[1])
        self.assertEqual(counts, {"Empty": 3, "Low": 2, "Medium": 2, "High": 2, "TrafficJam": 1})
        with open(self.tmp / "o/hist.csv") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([int(r["count"]) for r in rows], [3, 2, 2, 2, 1])
        m = self.manifest("o")
        self.assertEqual(m["command"], "stats")
        self.assertEqual(m["histogram"]["Empty"], 3)
        for key in ("config", "seeds", "artifacts", "duration_seconds"):
            self.assertIn(key, m)

    def test_exit_codes(self):
        self.assertEqual(run("stats", FIXTURES / "dataset10", "--no-such-flag").returncode, 1)
        self.assertEqual(run("frobnicate").returncode, 1)
        self.assertEqual(run().returncode, 1)
        r = run("stats", self.tmp / "missing", "--out", self.tmp / "o")
        self.assertEqual(r.returncode, 2)
        self.assertIn("labels.csv", r.stderr)
        # bad combination caught after parsing is still a usage error
        self.assertEqual(run("ingest", "--out", self.tmp / "ds").returncode, 1)

    def test_every_subcommand_has_help(self):
        for cmd in ("ingest", "stats", "train", "train-head", "eval", "tune", "infer", "mask-preview", "simulate",
                    "compare", "preprocess", "synth", "synth-features"):
            r = run(cmd, "--help")
            self.assertEqual(r.returncode, 0, cmd)
            self.assertIn("Usage", r.stdout, cmd)

    def test_ingest_fixture_is_idempotent(self):
        feed = FIXTURES / "feed"
        args = ["ingest", "--out", "ds", "--fixture", f"{feed}/payload_a.json,{feed}/payload_b.json",
                "--fixture-images", feed / "images", "--ticks", "2", "--interval", "0"]
        r = self.ok(*args)
        self.assertIn("fetched 6", r.stdout)
        rows = (self.tmp / "ds/labels.csv").read_text().splitlines()
        self.assertEqual(len(rows), 2 + 6)
        r = self.ok(*args)
        self.assertIn("fetched 0", r.stdout)
        self.assertEqual((self.tmp / "ds/labels.csv").read_text().splitlines(), rows)

    def test_synth_train_infer_eval(self):
        self.ok("synth", "--out", "ds", "--count", "60", "--size", "32", "--seed", "4")
        self.ok("train", "--data", "ds", "--size", "32", "--epochs", "2", "--batch", "8", "--seed", "1", "--out", "a")
        self.ok("train", "--data", "ds", "--size", "32", "--epochs", "2", "--batch", "8", "--seed", "1", "--out", "b")
        for name in ("model.ckpt", "history.csv", "metrics.json", "run_manifest.json"):
            self.assertTrue((self.tmp / "a" / name).exists(), name)
        # same seed, same bytes
        self.assertEqual((self.tmp / "a/model.ckpt").read_bytes(), (self.tmp / "b/model.ckpt").read_bytes())

        image = next((self.tmp / "ds/images").rglob("*.png"))
        r = self.ok("infer", image, "--model", "a/model.ckpt", "--out", "inf")
        self.assertIn("latency", r.stdout)
        pred = self.manifest("inf")["prediction"]
        self.assertAlmostEqual(sum(pred["probabilities"].values()), 1.0, places=9)
        self.assertIn(pred["class"], pred["probabilities"])
        self.assertGreater(pred["predict_ms"], 0.0)

        self.ok("eval", "--model", "a/model.ckpt", "--data", "ds", "--seed", "1", "--out", "ev", "--csv", "ev.csv")
        trained = json.loads((self.tmp / "a/metrics.json").read_text())
        scored = json.loads((self.tmp / "ev/metrics.json").read_text())
        self.assertEqual(trained, scored)  # eval re-derives the held-out split from the seed

    def test_head_training_and_tuning(self):
        self.ok("synth-features", "--per-class", "40", "--dim", "16", "--seed", "2", "--out", "f")
        r = self.ok("train-head", "--features", "f/features.csv", "--epochs", "5", "--seed", "3", "--out", "h")
        self.assertIn("validation", r.stdout)
        self.ok("eval", "--model", "h/head.ckpt", "--features", "f/features.csv", "--all", "--out", "ev")
        self.ok("tune", "--features", "f/features.csv", "--lr", "0,0.05", "--batch", "8,16", "--epochs", "3",
                "--seeds", "2", "--out", "t")
        with open(self.tmp / "t/grid.csv") as f:
            lines = f.read().splitlines()
        self.assertGreaterEqual(len(lines), 1 + 4)
        r = run("tune", "--features", self.tmp / "f/features.csv", "--lr", "0.1,0.2", "--batch", "1,2", "--cap", "3",
                "--out", self.tmp / "t2")
        self.assertEqual(r.returncode, 2)
        self.assertIn("cap", r.stderr)

    def test_simulate_replays_from_manifest(self):
        self.ok("simulate", "--controller", "density", "--seeds", "2", "--seed", "7", "--out", "s1", "--csv", "s1.csv")
        self.ok("simulate", "--config", "s1/run_manifest.json", "--out", "s2", "--csv", "s2.csv")
        self.assertEqual((self.tmp / "s1.csv").read_bytes(), (self.tmp / "s2.csv").read_bytes())
        # flags beat the config file
        self.ok("simulate", "--config", "s1/run_manifest.json", "--seed", "8", "--out", "s3", "--csv", "s3.csv")
        self.assertNotEqual((self.tmp / "s1.csv").read_bytes(), (self.tmp / "s3.csv").read_bytes())
        self.assertEqual(self.manifest("s3")["seeds"], [8, 9])

    def test_compare_lists_every_controller(self):
        r = self.ok("compare", "--scenario", "asymmetric", "--seeds", "2", "--q-episodes", "20", "--max-red", "60",
                    "--out", "c", "--csv", "c.csv")
        with open(self.tmp / "c.csv") as f:
            names = [row["controller"] for row in csv.DictReader(f)]
        self.assertEqual(names, ["FixedTime", "LQF", "DensityAdaptive", "GA", "QLearning"])
        self.assertIn("vs_fixed_%", r.stdout)

    def test_scenario_file(self):
        scn = Path(__file__).resolve().parent.parent / "data" / "ref_scenario.json"
        self.ok("simulate", "--scenario", scn, "--controller", "lqf", "--out", "o")
        self.assertEqual(run("simulate", "--scenario", self.tmp / "nope.json", "--out", self.tmp / "o").returncode, 2)

    def test_image_tools_write_only_under_out(self):
        image = FIXTURES / "dataset10/images/1001/2024-03-01T08-00-00.png"
        self.ok("preprocess", image, "--size", "16", "--out", "p")
        self.ok("mask-preview", image, "--masks", FIXTURES / "dataset10/masks.json", "--camera", "1001", "--out", "m")
        self.ok("mask-preview", image, "--polygon", "0,0;8,0;8,8", "--out", "m2")
        written = sorted(str(p.relative_to(self.tmp)) for p in self.tmp.rglob("*") if p.is_file())
        self.assertEqual(written, ["m/masked.png", "m/run_manifest.json", "m2/masked.png", "m2/run_manifest.json",
                                   "p/preprocessed.png", "p/run_manifest.json"])


if __name__ == "__main__":
    TOOL = os.path.abspath(sys.argv.pop(1))
    FIXTURES = Path(sys.argv.pop(1)).resolve()
    unittest.main(verbosity=2)
