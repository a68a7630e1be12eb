import json
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from tailcore.cli import build_parser, compare_golden, main
from tailcore.datasets import worked_example, worked_example_golden
from tailcore.explainers import make_explainer

FAST = ["--nmax", "128", "--samples", "16"]


class CliTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, doc):
        path = self.dir / name
        path.write_text(json.dumps(doc))
        return str(path)

    def test_parser(self):
        args = build_parser().parse_args(["verify", "cp", "--count", "3", "--text"])
        self.assertEqual(args.suite, "cp")
        self.assertEqual(args.count, 3)
        self.assertEqual(args.fmt, "text")
        self.assertEqual(args.tol, 1e-9)

    def test_analyze_example(self):
        out = self.dir / "report.json"
        csv = self.dir / "decay.csv"
        code = main(["analyze", "worked_example", "--out", str(out), "--decay-csv", str(csv)]
                    + FAST)
        self.assertEqual(code, 0)
        report = json.loads(out.read_text())
        self.assertEqual(report["asymptotics"]["M_inf"]["dim"], 2)
        self.assertEqual(report["core"]["core"]["dim"], 1)
        self.assertEqual(report["asymptotics"]["automorphism"]["period"], 2)
        self.assertFalse(report["verdicts"]["m_inf_equals_core"])
        decay = pd.read_csv(csv)
        self.assertEqual(list(decay.columns), ["functional", "n", "trace_norm"])

    def test_analyze_file_is_deterministic(self):
        path = self._write("lambda.json", {
            "version": "tailcore/1", "shape": [2], "seed": 4,
            "map": {"mode": "kraus", "data": [{"source": 0, "target": 0, "ops": [
                [[0.8660254037844386, 0], [0, 0.8660254037844386]],
                [[0.5, 0], [0, -0.5]]]}]}})
        first, second = self.dir / "a.json", self.dir / "b.json"
        self.assertEqual(main(["analyze", path, "--out", str(first)] + FAST), 0)
        self.assertEqual(main(["analyze", path, "--out", str(second)] + FAST), 0)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        report = json.loads(first.read_text())
        self.assertEqual(report["seed"], 4)
        self.assertTrue(report["verdicts"]["m_inf_equals_core"])
        self.assertTrue(report["verdicts"]["faithful_invariant_state"])

    def test_analyze_text(self):
        out = self.dir / "report.md"
        self.assertEqual(main(["analyze", "identity_3", "--text", "--out", str(out)] + FAST), 0)
        self.assertIn("## Verdicts", out.read_text())

    def test_input_errors(self):
        bad_unital = self._write("bad.json", {"version": "tailcore/1", "shape": [1, 1],
                                              "map": {"mode": "stochastic",
                                                      "data": [[0.5, 0.4], [0, 1]]}})
        self.assertEqual(main(["analyze", bad_unital]), 2)
        not_json = self.dir / "broken.json"
        not_json.write_text("{")
        self.assertEqual(main(["analyze", str(not_json)]), 2)
        self.assertEqual(main(["analyze", "no_such_input"]), 2)

    def test_numerical_error(self):
        # eigenvalue 1 - 1e-7 inside the ambiguity band of eps_per = 2e-8
        r = 1 - 5e-8
        path = self._write("gap.json", {"version": "tailcore/1", "shape": [1, 1],
                                        "map": {"mode": "stochastic",
                                                "data": [[r, 1 - r], [1 - r, r]]}})
        self.assertEqual(main(["analyze", path, "--eps-per", "2e-8"]), 3)

    def test_paper_example(self):
        out = self.dir / "golden.json"
        self.assertEqual(main(["paper-example", "--out", str(out)] + FAST), 0)
        self.assertIn("verdicts", json.loads(out.read_text()))

    def test_golden_mismatch(self):
        ex = make_explainer(worked_example(), n_max=128)
        self.assertEqual(compare_golden(ex), [])
        golden = worked_example_golden()
        golden["invariant_state"] = np.array([1 / 3, 1 / 3, 1 / 3])
        golden["restricted_period"] = 3
        diffs = compare_golden(ex, golden)
        self.assertEqual([d[0] for d in diffs], ["invariant_state", "restricted_period"])

    def test_verify(self):
        out = self.dir / "verify.json"
        code = main(["verify", "commutative", "--count", "2", "--seed", "3", "--max-dim", "4",
                     "--out", str(out)] + FAST)
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out.read_text())["passed"])

    def test_verify_bad_count(self):
        self.assertEqual(main(["verify", "cp", "--count", "0"]), 2)
