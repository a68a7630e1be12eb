import unittest
import warnings

import numpy as np
from numpy.testing import assert_allclose

from tailcore.algebra import AlgebraShape, Element, hs_inner, is_psd, norm
from tailcore.datasets import lambda_map, transpose_map, worked_example
from tailcore.errors import InputError, UnverifiedPositivityWarning
from tailcore.upmap import (Cert, SaFunctional, UPMap, adjoint, apply, asserted_map, build_map,
                            identity_map, is_faithful_map, kraus_map, map_from_document,
                            map_to_document, mix_maps, power, random_psd, random_sa,
                            stochastic_map, transpose_signs, validate_up)


class StochasticMapTests(unittest.TestCase):
    def setUp(self):
        self.phi = worked_example()

    def test_cert(self):
        self.assertIs(self.phi.cert, Cert.STOCHASTIC)
        self.assertTrue(self.phi.certified_positive)
        self.assertTrue(self.phi.shape.is_commutative)
        self.assertAlmostEqual(self.phi.unital_residual, 0)

    def test_apply(self):
        x = Element.diagonal(self.phi.shape, [3, 0, 6])
        assert_allclose([b[0, 0].real for b in apply(self.phi, x).blocks], [3, 6, 0])
        self.assertTrue(self.phi(x).allclose(apply(self.phi, x)))

    def test_negative_entry(self):
        with self.assertRaises(InputError) as cm:
            stochastic_map([[1.5, -0.5], [0, 1]])
        self.assertEqual(cm.exception.code, "NEGATIVE_ENTRY")
        self.assertEqual(cm.exception.pointer, "/map/data/0/1")

    def test_not_unital(self):
        with self.assertRaises(InputError) as cm:
            stochastic_map([[0.5, 0.4], [0, 1]])
        self.assertEqual(cm.exception.code, "NOT_UNITAL")

    def test_not_square(self):
        with self.assertRaises(InputError):
            stochastic_map([[1, 0, 0], [0, 1, 0]])


class KrausMapTests(unittest.TestCase):
    def setUp(self):
        self.shape = AlgebraShape((2,))
        self.phi = lambda_map(0.5)

    def test_lambda_action(self):
        x = Element(self.shape, [np.array([[1, 2j], [-2j, 3]])])
        expected = Element(self.shape, [np.array([[1, 1j], [-1j, 3]])])
        self.assertTrue(apply(self.phi, x).allclose(expected))

    def test_non_self_adjoint_action(self):
        z = Element(self.shape, [np.array([[0, 1], [0, 0]])])
        self.assertTrue(apply(self.phi, z).allclose(z * 0.5))

    def test_kraus_not_unital(self):
        with self.assertRaises(InputError) as cm:
            kraus_map(self.shape, [(0, 0, [0.5 * np.eye(2)])])
        self.assertEqual(cm.exception.code, "KRAUS_NOT_UNITAL")

    def test_block_mismatch(self):
        with self.assertRaises(InputError) as cm:
            kraus_map(self.shape, [(0, 1, [np.eye(2)])])
        self.assertEqual(cm.exception.code, "BLOCK_MISMATCH")
        with self.assertRaises(InputError) as cm:
            kraus_map(AlgebraShape((2, 1)), [(0, 0, [np.eye(2)]), (0, 1, [np.eye(2)])])
        self.assertEqual(cm.exception.code, "BLOCK_MISMATCH")

    def test_block_routing(self):
        shape = AlgebraShape((1, 2))
        # the 2x2 block receives the scalar block times the identity
        phi = kraus_map(shape, [(0, 0, [np.eye(1)]), (0, 1, [np.eye(2)[:, :1], np.eye(2)[:, 1:]])])
        x = Element(shape, [np.array([[2.0]]), np.diag([5.0, 7.0])])
        out = apply(phi, x)
        assert_allclose(out.blocks[1], 2 * np.eye(2))

    def test_transpose(self):
        phi = transpose_map(2)
        self.assertIs(phi.cert, Cert.CP_COMPOSED_TRANSPOSE)
        x = Element(self.shape, [np.array([[1, 2 + 1j], [2 - 1j, 0]])])
        self.assertTrue(apply(phi, x).allclose(Element(self.shape, [x.blocks[0].T])))
        assert_allclose(transpose_signs(self.shape), [1, 1, -1, 1])

    def test_identity(self):
        phi = identity_map(AlgebraShape((2, 1)))
        assert_allclose(phi.sa_matrix, np.eye(5), atol=1e-12)


class MixAndAssertedTests(unittest.TestCase):
    def setUp(self):
        self.shape = AlgebraShape((2,))

    def test_mix(self):
        phi = mix_maps([0.25, 0.75], [lambda_map(0.5), transpose_map(2)])
        self.assertIs(phi.cert, Cert.CONVEX_MIX)
        self.assertTrue(phi.certified_positive)
        assert_allclose(phi.sa_matrix,
                        0.25 * lambda_map(0.5).sa_matrix + 0.75 * transpose_map(2).sa_matrix)

    def test_mix_weights(self):
        with self.assertRaises(InputError) as cm:
            mix_maps([0.5, 0.6], [lambda_map(), lambda_map()])
        self.assertEqual(cm.exception.code, "NOT_UNITAL")
        with self.assertRaises(InputError):
            mix_maps([1.5, -0.5], [lambda_map(), lambda_map()])

    def test_asserted_warns(self):
        with self.assertWarns(UnverifiedPositivityWarning):
            phi = asserted_map(self.shape, np.eye(4))
        self.assertFalse(phi.certified_positive)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnverifiedPositivityWarning)
            mixed = mix_maps([0.5, 0.5], [phi, lambda_map()])
        self.assertIs(mixed.cert, Cert.ASSERTED)

    def test_asserted_not_unital(self):
        with self.assertRaises(InputError) as cm:
            asserted_map(self.shape, 0.5 * np.eye(4))
        self.assertEqual(cm.exception.code, "NOT_UNITAL")


class DocumentTests(unittest.TestCase):
    def test_kraus_document(self):
        doc = {"version": "tailcore/1", "shape": [2],
               "map": {"mode": "kraus",
                       "data": [{"source": 0, "target": 0, "ops": [[[1, 0], [0, 1]]]}]},
               "seed": 3}
        phi, seed = map_from_document(doc)
        self.assertEqual(seed, 3)
        self.assertIs(phi.cert, Cert.CP_KRAUS)
        assert_allclose(phi.sa_matrix, np.eye(4), atol=1e-12)

    def test_complex_entries(self):
        payload = {"mode": "kraus", "data": [{"source": 0, "target": 0,
                                           "ops": [[[[0, 1], 0], [0, [0, -1]]]]}]}
        phi = build_map(AlgebraShape((2,)), payload)
        x = Element(phi.shape, [np.array([[0, 1], [1, 0]])])
        self.assertTrue(apply(phi, x).allclose(-x))

    def test_document_roundtrip(self):
        for phi in [worked_example(), lambda_map(0.3), transpose_map(2),
                    mix_maps([0.5, 0.5], [lambda_map(0.1), transpose_map(2)])]:
            again, seed = map_from_document(map_to_document(phi))
            self.assertIsNone(seed)
            self.assertIs(again.cert, phi.cert)
            assert_allclose(again.sa_matrix, phi.sa_matrix, atol=1e-12)

    def test_schema_errors(self):
        good_map = {"mode": "stochastic", "data": [[1]]}
        cases = [
            ([], ""),
            ({"version": "tailcore/2", "shape": [1], "map": good_map}, "/version"),
            ({"shape": [1]}, "/map"),
            ({"shape": [1], "map": {"mode": "unknown", "data": 0}}, "/map/mode"),
            ({"shape": [1], "map": good_map, "seed": -1}, "/seed"),
            ({"shape": [1], "map": {"mode": "kraus", "data": [{"source": 0}]}}, "/map/data/0"),
        ]
        for doc, pointer in cases:
            with self.assertRaises(InputError) as cm:
                map_from_document(doc)
            self.assertEqual(cm.exception.pointer, pointer)

    def test_stochastic_needs_commutative(self):
        with self.assertRaises(InputError) as cm:
            build_map(AlgebraShape((2,)), {"mode": "stochastic", "data": [[1, 0], [0, 1]]})
        self.assertEqual(cm.exception.code, "BLOCK_MISMATCH")


class OperationTests(unittest.TestCase):
    def setUp(self):
        self.phi = mix_maps([0.5, 0.5], [lambda_map(0.5), transpose_map(2)])
        self.rng = np.random.default_rng(0)

    def test_power(self):
        x = random_sa(self.phi.shape, self.rng)
        y = apply(self.phi, apply(self.phi, apply(self.phi, x)))
        self.assertTrue(apply(power(self.phi, 3), x).allclose(y))
        assert_allclose(power(self.phi, 0).sa_matrix, np.eye(4))
        self.assertIsInstance(power(self.phi, 2), UPMap)
        with self.assertRaises(InputError):
            power(self.phi, -1)

    def test_adjoint(self):
        R, x = random_sa(self.phi.shape, self.rng), random_sa(self.phi.shape, self.rng)
        self.assertAlmostEqual(hs_inner(apply(adjoint(self.phi), R), x),
                               hs_inner(R, apply(self.phi, x)))

    def test_positivity(self):
        for _ in range(20):
            y = random_psd(self.phi.shape, self.rng)
            self.assertAlmostEqual(norm(y), 1)
            self.assertTrue(is_psd(apply(self.phi, y), 1e-9))

    def test_faithful(self):
        self.assertTrue(is_faithful_map(self.phi))
        self.assertFalse(is_faithful_map(stochastic_map([[1, 0], [1, 0]])))

    def test_functional(self):
        rho = SaFunctional.from_coords(AlgebraShape((1, 1)), [0.25, 0.75])
        self.assertTrue(rho.is_state())
        self.assertAlmostEqual(rho.trace, 1)
        self.assertAlmostEqual(rho(Element.unit(rho.shape)).real, 1)
        with self.assertRaises(InputError):
            SaFunctional(rho.shape, Element.unit(AlgebraShape((2,))))


class ValidationTests(unittest.TestCase):
    def test_certified(self):
        report = validate_up(lambda_map(0.5), samples=16)
        self.assertTrue(report.passed)
        self.assertIsNone(report.positivity_min_eigenvalue)
        self.assertEqual(len(report.to_dataframe()), 4)
        self.assertTrue(report.to_json()["passed"])

    def test_asserted_non_positive(self):
        # tripling the off-diagonal part is unital but not positive
        shape = AlgebraShape((2,))
        M = np.diag([1.0, 3.0, 3.0, 1.0])
        with self.assertWarns(UnverifiedPositivityWarning):
            phi = asserted_map(shape, M)
        report = validate_up(phi, samples=32)
        self.assertFalse(report.positivity_sampled_ok)
        self.assertFalse(report.passed)
