import unittest

import numpy as np
from numpy.testing import assert_allclose

from tailcore.datasets import (SUITES, example_names, generate_instance, instance_seed,
                               lambda_map, load_example, random_cp_map, random_positive_mix,
                               random_shape, random_stochastic, worked_example,
                               worked_example_golden)
from tailcore.errors import InputError
from tailcore.upmap import Cert, validate_up


class BundledExampleTests(unittest.TestCase):
    def test_names(self):
        self.assertEqual(example_names(), ['identity_3', 'lambda_half', 'three_cycle',
                                           'transpose_2', 'worked_example'])

    def test_load(self):
        for name in example_names():
            phi, seed = load_example(name)
            self.assertIsNone(seed)
            self.assertAlmostEqual(phi.unital_residual, 0)

    def test_worked_example_file(self):
        phi, _ = load_example('worked_example')
        assert_allclose(phi.sa_matrix, worked_example().sa_matrix, atol=1e-15)

    def test_lambda_file(self):
        phi, _ = load_example('lambda_half')
        assert_allclose(phi.sa_matrix, lambda_map(0.5).sa_matrix, atol=1e-12)

    def test_unknown(self):
        with self.assertRaises(InputError):
            load_example('nonexistent')
        with self.assertRaises(InputError):
            lambda_map(2)

    def test_golden(self):
        golden = worked_example_golden()
        assert_allclose(golden["E"] @ golden["E"], golden["E"])
        self.assertEqual(golden["M_inf"].shape, (3, 2))


class GeneratorTests(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_instance_seed(self):
        self.assertEqual(instance_seed(7, 3), instance_seed(7, 3))
        self.assertNotEqual(instance_seed(7, 3), instance_seed(7, 4))

    def test_shape(self):
        for _ in range(20):
            shape = random_shape(self.rng, 5)
            self.assertLessEqual(shape.n, 5)
            self.assertGreaterEqual(shape.n, 2)

    def test_stochastic(self):
        for _ in range(20):
            phi = random_stochastic(self.rng, 6)
            self.assertIs(phi.cert, Cert.STOCHASTIC)
            self.assertGreaterEqual(phi.sa_matrix.min(), 0)
            assert_allclose(phi.sa_matrix.sum(axis=1), 1)

    def test_cp_maps_are_valid(self):
        for _ in range(10):
            phi = random_cp_map(self.rng, 4)
            self.assertIs(phi.cert, Cert.CP_KRAUS)
            self.assertTrue(validate_up(phi, samples=8).passed)

    def test_positive_mix(self):
        for _ in range(10):
            phi = random_positive_mix(self.rng, 4)
            self.assertIn(phi.cert, (Cert.CP_COMPOSED_TRANSPOSE, Cert.CONVEX_MIX))
            self.assertTrue(validate_up(phi, samples=8).passed)

    def test_generate_instance_deterministic(self):
        for suite in SUITES:
            a = generate_instance(suite, 123)
            b = generate_instance(suite, 123)
            assert_allclose(a.sa_matrix, b.sa_matrix)
        with self.assertRaises(InputError):
            generate_instance('unknown', 0)


class PeripheralPhaseTests(unittest.TestCase):
    """generated CP instances have peripheral eigenvalues that are roots of
    unity of order <= 64, the periods the power oracle searches"""
    seeds = [49018332, 3025039489, 4045558824, 1596810411] + [instance_seed(1, i)
                                                              for i in range(12)]

    def assert_rational_phases(self, phi):
        eigs = np.linalg.eigvals(phi.sa_matrix)
        for z in eigs[np.abs(eigs) >= 1 - 1e-8]:
            orders = np.abs(z ** np.arange(1, 65) - 1)
            self.assertLess(orders.min(), 1e-6, f"eigenvalue {z} is not a root of unity")

    def test_cp(self):
        for seed in self.seeds:
            with self.subTest(seed=seed):
                self.assert_rational_phases(generate_instance('cp', seed))
