import json
import unittest

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

from tailcore.algebra import AlgebraShape, span_coords
from tailcore.datasets import (lambda_map, three_cycle, transpose_map, worked_example,
                               worked_example_golden)
from tailcore.errors import InputError
from tailcore.explainers import CommutativeExplainer, Tolerances, UPMapExplainer, make_explainer
from tailcore.upmap import identity_map, power


class WorkedExampleExplainerTests(unittest.TestCase):
    def setUp(self):
        self.explainer = make_explainer(worked_example(), n_max=128, name="worked")
        self.golden = worked_example_golden()

    def test_commutative(self):
        self.assertIsInstance(self.explainer, CommutativeExplainer)
        self.assertEqual(self.explainer.tolerances.n_max, 128)

    def test_idempotent(self):
        assert_allclose(self.explainer.idempotent.sa_matrix, self.golden["E"], atol=1e-9)

    def test_tail_and_core(self):
        shape = self.explainer.shape
        self.assertTrue(self.explainer.tail.equals(span_coords(shape, self.golden["M_inf"]), 1e-9))
        self.assertTrue(self.explainer.core.equals(span_coords(shape, self.golden["core"]), 1e-9))
        self.assertEqual(self.explainer.dims()["M_inf"], 2)
        self.assertEqual(self.explainer.dims()["core"], 1)

    def test_invariant_state(self):
        assert_allclose(self.explainer.invariant_state.coords, self.golden["invariant_state"],
                        atol=1e-9)

    def test_verdicts(self):
        verdicts = self.explainer.verdicts
        self.assertFalse(verdicts["m_inf_equals_core"])
        self.assertFalse(verdicts["m_inf_jordan_closed"])
        self.assertFalse(verdicts["decay_condition"])
        self.assertFalse(verdicts["faithful_invariant_state"])
        self.assertTrue(verdicts["faithful_map"])
        self.assertTrue(verdicts["positivity_verified"])
        self.assertEqual(self.explainer.restricted.period, self.golden["restricted_period"])

    def test_powers_closed_form(self):
        phi = self.explainer.phi
        for n in range(1, 9):
            even, odd = power(phi, 2 * n).sa_matrix, power(phi, 2 * n + 1).sa_matrix
            assert_allclose(even[0], [9.0 ** -n, 0.5 - 0.5 * 9.0 ** -n, 0.5 - 0.5 * 9.0 ** -n],
                            atol=1e-14)
            assert_allclose(odd[0], [9.0 ** -n / 3, 0.5 - 9.0 ** -n / 6, 0.5 - 9.0 ** -n / 6],
                            atol=1e-14)
            assert_allclose(even[1:], [[0, 1, 0], [0, 0, 1]])
            assert_allclose(odd[1:], [[0, 0, 1], [0, 1, 0]])

    def test_projections(self):
        projections = self.explainer.projections_in_tail()
        assert_allclose(sorted(map(tuple, projections)), [(0, 0, 0), (1, 1, 1)])
        self.assertTrue(self.explainer.projection_span().equals(self.explainer.core))

    def test_properties(self):
        df = self.explainer.properties
        self.assertIsInstance(df, pd.DataFrame)
        self.assertEqual(list(df.columns), ['property', 'passed', 'residual'])
        self.assertTrue(df.passed.all(), df[~df.passed])

    def test_dataframes(self):
        self.assertEqual(len(self.explainer.spectrum_df()), 3)
        self.assertEqual(len(self.explainer.verdicts_df()), 6)
        self.assertEqual(len(self.explainer.dims_df()), 7)
        self.assertEqual(set(self.explainer.decay_df().functional),
                         {"core_perp_0", "core_perp_1"})

    def test_markdown(self):
        md = self.explainer.verdicts_markdown()
        self.assertIsInstance(md, str)
        self.assertTrue(md.startswith("# Asymptotic profile: worked"))
        self.assertIn("period 2", md)

    def test_json_deterministic(self):
        first = self.explainer.to_json()
        again = make_explainer(worked_example(), n_max=128, name="worked").to_json()
        self.assertEqual(first, again)
        report = json.loads(first)
        self.assertEqual(list(report)[:4], ["tool", "version", "name", "seed"])
        self.assertEqual(report["input"]["map"]["mode"], "stochastic")

    def test_calculate_properties(self):
        self.explainer.calculate_properties(include_properties=False)
        self.assertTrue(hasattr(self.explainer, '_state_report'))
        self.assertFalse(hasattr(self.explainer, '_properties'))


class KnownMapExplainerTests(unittest.TestCase):
    def test_identity(self):
        explainer = make_explainer(identity_map(AlgebraShape((3,))), n_max=16)
        self.assertIsInstance(explainer, UPMapExplainer)
        self.assertNotIsInstance(explainer, CommutativeExplainer)
        dims = explainer.dims()
        self.assertEqual(dims["M_inf"], 9)
        self.assertEqual(dims["core"], 9)
        self.assertEqual(dims["definite_set"], 9)
        self.assertTrue(all(explainer.verdicts.values()))

    def test_lambda(self):
        explainer = make_explainer(lambda_map(0.5), n_max=128)
        self.assertEqual(explainer.tail.dim, 2)
        self.assertTrue(explainer.verdicts["m_inf_equals_core"])
        self.assertTrue(explainer.verdicts["faithful_invariant_state"])
        self.assertTrue(explainer.state_report.complement_vanishes)
        self.assertTrue(explainer.properties.passed.all())

    def test_three_cycle(self):
        explainer = make_explainer(three_cycle(), n_max=16)
        self.assertEqual(explainer.restricted.period, 3)
        self.assertTrue(explainer.verdicts["m_inf_equals_core"])
        self.assertEqual(len(explainer.projections_in_tail()), 8)

    def test_transpose(self):
        explainer = make_explainer(transpose_map(2), n_max=16)
        self.assertEqual(explainer.restricted.period, 2)
        self.assertTrue(explainer.verdicts["m_inf_jordan_closed"])
        self.assertTrue(explainer.embedding.all_hold)
        self.assertTrue(explainer.properties.passed.all())


class TolerancesTests(unittest.TestCase):
    def test_defaults(self):
        t = Tolerances()
        self.assertEqual(t.to_json(), dict(tol=1e-9, eps_per=1e-8, n_max=512, check_tol=1e-6,
                                           samples=64, cone_samples=256))

    def test_overrides(self):
        explainer = UPMapExplainer(lambda_map(), Tolerances(samples=8), n_max=32)
        self.assertEqual(explainer.tolerances.samples, 8)
        self.assertEqual(explainer.tolerances.n_max, 32)
        with self.assertRaises(InputError):
            UPMapExplainer(lambda_map(), nmax=32)

    def test_commutative_needs_scalars(self):
        with self.assertRaises(InputError):
            CommutativeExplainer(lambda_map())
