import unittest
import warnings

import numpy as np
from numpy.testing import assert_allclose

from tailcore.algebra import AlgebraShape, Element, SaSubspace, is_psd, span_coords
from tailcore.asymptotics import peripheral_idempotent, tail_system
from tailcore.corestruct import (b_phi, core_report, definite_gram, definite_set,
                                 is_jordan_closed, jordan_generated,
                                 jordan_multiplicativity_residual, largest_jordan_subalgebra,
                                 multiplicative_core, schwarz_defect)
from tailcore.datasets import lambda_map, three_cycle, transpose_map, worked_example
from tailcore.errors import InputError, NumericalToleranceError, UnverifiedPositivityWarning
from tailcore.upmap import asserted_map, identity_map, mix_maps, random_sa, stochastic_map


class WorkedExampleCoreTests(unittest.TestCase):
    def setUp(self):
        self.phi = worked_example()
        self.E = peripheral_idempotent(self.phi)
        self.M_inf = tail_system(self.phi, E=self.E)
        self.unit = span_coords(self.phi.shape, self.phi.shape.unit_coords)

    def test_definite_set(self):
        # the first row mixes all states, so only constants are definite
        self.assertTrue(definite_set(self.phi).equals(self.unit))

    def test_core(self):
        B = b_phi(self.phi)
        self.assertTrue(B.equals(self.unit))
        self.assertTrue(multiplicative_core(self.phi, B).equals(self.unit))

    def test_tail_not_jordan_closed(self):
        self.assertFalse(is_jordan_closed(self.M_inf))
        self.assertEqual(jordan_generated(self.M_inf).dim, 3)

    def test_largest_jordan_subalgebra(self):
        largest = largest_jordan_subalgebra(self.M_inf, self.E)
        self.assertTrue(largest.equals(self.unit))

    def test_report(self):
        report = core_report(self.phi, self.M_inf, self.E)
        self.assertFalse(report.core_equals_tail)
        self.assertFalse(report.m_inf_jordan_closed)
        self.assertEqual(report.to_json()["core"]["dim"], 1)


class KnownCoreTests(unittest.TestCase):
    def test_identity(self):
        phi = identity_map(AlgebraShape((2, 1)))
        self.assertEqual(multiplicative_core(phi).dim, 5)

    def test_lambda(self):
        phi = lambda_map(0.5)
        diagonals = span_coords(phi.shape, np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0]]).T)
        self.assertTrue(definite_set(phi).equals(diagonals))
        self.assertTrue(multiplicative_core(phi).equals(diagonals))
        self.assertTrue(multiplicative_core(phi).equals(tail_system(phi)))

    def test_transpose_is_jordan_multiplicative(self):
        phi = transpose_map(3)
        self.assertEqual(definite_set(phi).dim, 9)
        self.assertLess(jordan_multiplicativity_residual(phi, SaSubspace.full(phi.shape)), 1e-12)

    def test_permutation(self):
        phi = three_cycle()
        self.assertEqual(multiplicative_core(phi).dim, 3)

    def test_b_phi_differs_from_definite_set(self):
        # x_0 = x_1 is definite, but its image also needs x_1 = x_2
        phi = stochastic_map([[0.5, 0.5, 0, 0], [0, 0, 1, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
        M_phi = definite_set(phi)
        B = b_phi(phi, M_phi)
        self.assertEqual(M_phi.dim, 3)
        self.assertEqual(B.dim, 2)
        self.assertTrue(B.is_subspace_of(M_phi))


class GramTests(unittest.TestCase):
    def setUp(self):
        self.phi = mix_maps([0.3, 0.7], [lambda_map(0.2), transpose_map(2)])

    def test_gram_psd(self):
        G = definite_gram(self.phi)
        assert_allclose(G, G.T, atol=1e-12)
        self.assertGreaterEqual(np.linalg.eigvalsh(G).min(), -1e-10)

    def test_gram_is_schwarz_trace(self):
        rng = np.random.default_rng(1)
        x = random_sa(self.phi.shape, rng)
        c = x.sa_coords()
        trace = sum(np.trace(b).real for b in schwarz_defect(self.phi, x).blocks)
        self.assertAlmostEqual(c @ definite_gram(self.phi) @ c, trace)

    def test_schwarz_defect_psd(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            self.assertTrue(is_psd(schwarz_defect(self.phi, random_sa(self.phi.shape, rng)), 1e-9))

    def test_not_positive(self):
        shape = AlgebraShape((2,))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnverifiedPositivityWarning)
            phi = asserted_map(shape, np.diag([1.0, 3.0, 3.0, 1.0]))
        with self.assertRaises(NumericalToleranceError) as cm:
            definite_set(phi)
        self.assertEqual(cm.exception.code, "GRAM_NOT_PSD")


class JordanClosureTests(unittest.TestCase):
    def setUp(self):
        self.shape = AlgebraShape((2,))

    def test_closed(self):
        self.assertTrue(is_jordan_closed(SaSubspace.full(self.shape)))
        self.assertTrue(is_jordan_closed(SaSubspace.zero(self.shape)))

    def test_generated(self):
        # sigma_x squares to the identity
        sx = span_coords(self.shape, np.array([[0, 1.0, 0, 0]]).T)
        generated = jordan_generated(sx)
        self.assertEqual(generated.dim, 2)
        self.assertTrue(generated.contains(Element.unit(self.shape)))

    def test_close_values(self):
        # powers of x are nearly dependent, its spectral projections are not
        shape = AlgebraShape((1, 1, 1, 1))
        x = span_coords(shape, np.array([[1.0, 1 + 1e-4, 1 + 2e-4, 1 + 3e-4]]).T)
        generated = jordan_generated(x)
        self.assertEqual(generated.dim, 4)
        self.assertTrue(generated.equals(SaSubspace.full(shape)))

    def test_zero_eigenvalue_gives_no_unit(self):
        shape = AlgebraShape((1, 1, 1))
        x = span_coords(shape, np.array([[0.0, 1.0, 1.0 + 1e-4]]).T)
        generated = jordan_generated(x)
        self.assertEqual(generated.dim, 2)
        self.assertFalse(generated.contains(Element.unit(shape)))

    def test_shape_mismatch(self):
        phi = lambda_map(0.5)
        with self.assertRaises(InputError):
            largest_jordan_subalgebra(SaSubspace.full(AlgebraShape((1,))),
                                      peripheral_idempotent(phi))
