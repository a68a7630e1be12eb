import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from tailcore.algebra import AlgebraShape, Element, jordan_product
from tailcore.datasets import random_cp_map
from tailcore.errors import NumericalToleranceError
from tailcore.explainers import make_explainer
from tailcore.upmap import apply, stochastic_map

MAX_STATES = 5


@st.composite
def stochastic_matrices(draw):
    n = draw(st.integers(min_value=2, max_value=MAX_STATES))
    weights = draw(arrays(np.float64, (n, n), elements=st.sampled_from([0.0, 0.25, 0.5, 1.0])))
    for i in range(n):
        if weights[i].sum() == 0:
            weights[i, i] = 1.0
    return weights / weights.sum(axis=1, keepdims=True)


def _analyse(phi):
    ex = make_explainer(phi, n_max=256, samples=8, cone_samples=16)
    try:
        ex.calculate_properties(include_properties=False)
    except NumericalToleranceError:
        return None
    return ex


@settings(max_examples=25, deadline=None)
@given(P=stochastic_matrices())
def test_stochastic_tail_structure(P):
    ex = _analyse(stochastic_map(P))
    if ex is None:
        return
    E = ex.idempotent.sa_matrix
    assert_allclose(E @ E, E, atol=1e-8)
    assert_allclose(E @ P, P @ E, atol=1e-8)
    # E is again a stochastic matrix
    assert E.min() >= -1e-8
    assert_allclose(E.sum(axis=1), 1, atol=1e-8)
    assert ex.core.is_subspace_of(ex.tail, 1e-6)
    assert ex.b_phi.is_subspace_of(ex.definite, 1e-6)
    if ex.verdicts["m_inf_jordan_closed"]:
        assert ex.verdicts["m_inf_equals_core"]
    if ex.verdicts["faithful_invariant_state"]:
        assert ex.verdicts["decay_condition"]
    if ex.verdicts["decay_condition"]:
        assert ex.verdicts["m_inf_equals_core"]


@settings(max_examples=25, deadline=None)
@given(P=stochastic_matrices())
def test_invariant_state_is_stationary(P):
    ex = _analyse(stochastic_map(P))
    if ex is None:
        return
    pi = ex.invariant_state.coords
    assert pi.min() >= -1e-9
    assert abs(pi.sum() - 1) <= 1e-9
    assert_allclose(pi @ P, pi, atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_cp_core_is_jordan_multiplicative(seed):
    phi = random_cp_map(np.random.default_rng(seed), 3)
    ex = _analyse(phi)
    if ex is None:
        return
    rng = np.random.default_rng(seed)
    for _ in range(4):
        x, y = ex.core.random_element(rng), ex.core.random_element(rng)
        lhs = apply(phi, jordan_product(x, y))
        rhs = jordan_product(apply(phi, x), apply(phi, y))
        assert lhs.allclose(rhs, atol=1e-7 * (1 + float(np.abs(x.to_vector()).max()
                                                         * np.abs(y.to_vector()).max())))


@given(values=arrays(np.float64, 3, elements=st.floats(-10, 10)))
def test_diagonal_coords_are_values(values):
    x = Element.diagonal(AlgebraShape((1, 1, 1)), values)
    assert_allclose(x.sa_coords(), values)
