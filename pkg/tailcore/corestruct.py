"""
Jordan structure attached to a UP map: the definite set M_phi, the algebra
B_phi, the multiplicative core C_phi and the largest Jordan subalgebra of M_inf.

The definite set is cut out by a quadratic condition, but by the
Kadison-Schwarz inequality q(x) = trace(phi(x o x) - phi(x) o phi(x)) is a
positive semidefinite form whose zeros are exactly the definite elements. So
M_phi^sa is the nullspace of the Gram matrix of q on the canonical basis.
"""
__all__ = ['CoreReport',
           'definite_set',
           'definite_gram',
           'b_phi',
           'multiplicative_core',
           'is_jordan_closed',
           'jordan_generated',
           'largest_jordan_subalgebra',
           'schwarz_defect',
           'jordan_multiplicativity_residual',
           'core_report',
           ]

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .algebra import (RANK_TOL, SaSubspace, jordan_gram, jordan_product, norm, nullspace,
                      span_coords, spectral_projections, structure_constants,
                      subspace_intersect, subspace_preimage)
from .errors import InputError, NumericalToleranceError
from .upmap import apply

log = logging.getLogger(__name__)

GRAM_PSD_TOL = 1e-8
ZERO_EIGENVALUE_TOL = 1e-8


def _psd_nullspace(G, tol, what):
    """nullspace of a Gram matrix that should be positive semidefinite"""
    G = (G + G.T) / 2
    eigs = la.eigvalsh(G) if G.size else np.zeros(0)
    scale = max(1.0, float(np.abs(eigs).max(initial=0.0)))
    if eigs.size and eigs[0] < -GRAM_PSD_TOL * scale:
        raise NumericalToleranceError(
            f"{what}: Gram matrix has eigenvalue {eigs[0]:.3e} < 0, "
            f"the map is not positive", code="GRAM_NOT_PSD")
    return nullspace(G, tol, scale=scale, what=what)


def definite_gram(phi):
    """G[i,j] = trace(phi(e_i o e_j)) - trace(phi(e_i) o phi(e_j))"""
    M = phi.sa_matrix
    d = M.T @ phi.shape.unit_coords
    return jordan_gram(phi.shape, d) - M.T @ M


def definite_set(phi, tol=RANK_TOL):
    """M_phi^sa = {x : phi(x o x) = phi(x) o phi(x)}

    Raises:
        NumericalToleranceError: GRAM_NOT_PSD when the Kadison-Schwarz form has a
            negative direction, i.e. phi is not positive
    """
    log.info("Calculating definite set...")
    return SaSubspace(phi.shape, _psd_nullspace(definite_gram(phi), tol, "definite_set"))


def _stabilize(step, start, D, what):
    V = start
    for _ in range(D + 1):
        V_next = step(V)
        if V_next.dim == V.dim:
            return V_next
        V = V_next
    raise NumericalToleranceError(f"{what} did not stabilize within {D + 1} steps",
                                  code="ITERATION_OVERFLOW")


def b_phi(phi, M_phi=None, tol=RANK_TOL):
    """B_phi = {x : phi^n(x) in M_phi for all n >= 0}

    Iterates V <- M_phi n phi^-1(V) from V = M_phi until the dimension stops
    dropping; the result is phi-invariant.
    """
    log.info("Calculating B_phi...")
    if M_phi is None:
        M_phi = definite_set(phi, tol)
    return _stabilize(lambda V: subspace_intersect(M_phi, subspace_preimage(phi, V, tol), tol),
                      M_phi, phi.D, "b_phi")


def multiplicative_core(phi, B=None, tol=RANK_TOL):
    """C_phi = n_n phi^n(B_phi), the stabilized image chain of B_phi"""
    log.info("Calculating multiplicative core...")
    if B is None:
        B = b_phi(phi, tol=tol)
    M = phi.sa_matrix
    return _stabilize(lambda W: span_coords(phi.shape, M @ W.coords, tol),
                      B, phi.D, "multiplicative_core")


def _basis_products(S):
    """(dim, dim, D) array of the Jordan products of the basis of S"""
    Q = S.coords
    return np.einsum('ijk,ia,jb->abk', structure_constants(S.shape), Q, Q)


def is_jordan_closed(S, tol=1e-8):
    """True iff b_i o b_j lies in S (within tol) for every pair of basis elements"""
    products = _basis_products(S)
    return all(S.contains_coords(products[a, b], tol)
               for a in range(S.dim) for b in range(a, S.dim))


def _spectral_pieces(V):
    """spectral projections of the basis elements of V for their nonzero eigenvalues"""
    pieces = [np.zeros((V.shape.D, 0))]
    for x in V.basis:
        cut = ZERO_EIGENVALUE_TOL * max(1.0, norm(x))
        pieces.extend(p.sa_coords()[:, None] for value, p in spectral_projections(x)
                      if abs(value) > cut)
    return np.hstack(pieces)


def jordan_generated(S, tol=RANK_TOL):
    """Smallest Jordan-closed subspace containing S.

    Each step adds the nonzero spectral projections of the basis elements
    (polynomials in them without constant term) before closing under products.
    """
    def step(V):
        W = span_coords(V.shape, np.hstack([V.coords, _spectral_pieces(V)]), tol, scale=1.0)
        products = _basis_products(W).reshape(-1, W.shape.D).T
        residual = products - W.projector @ products
        return span_coords(W.shape, np.hstack([W.coords, residual]), tol, scale=1.0)
    return _stabilize(step, S, S.shape.D, "jordan_generated")


def largest_jordan_subalgebra(M_inf, E, tol=RANK_TOL):
    """Largest ambient Jordan subalgebra inside M_inf = range(E).

    This is the definite set of the inclusion of (M_inf, E-product) into M:
    the nullspace in M_inf of q(x) = trace(E(x o x) - x o x), which is PSD by
    Kadison-Schwarz. It is spanned by the projections lying in M_inf.
    """
    log.info("Calculating largest Jordan subalgebra of M_inf...")
    if M_inf.shape != E.shape:
        raise InputError(f"shapes differ: {M_inf.shape} vs {E.shape}", code="BLOCK_MISMATCH")
    Q = M_inf.coords
    d = E.sa_matrix.T @ M_inf.shape.unit_coords
    G = Q.T @ jordan_gram(M_inf.shape, d) @ Q - np.eye(M_inf.dim)
    N = _psd_nullspace(G, tol, "largest_jordan_subalgebra")
    return SaSubspace(M_inf.shape, Q @ N)


def schwarz_defect(phi, x):
    """phi(x o x) - phi(x) o phi(x), PSD for positive phi and self-adjoint x"""
    y = apply(phi, x)
    return apply(phi, jordan_product(x, x)) - jordan_product(y, y)


def jordan_multiplicativity_residual(phi, S, samples=16, rng=None):
    """max ||phi(x o y) - phi(x) o phi(y)|| / (||x|| ||y||) over random x, y in S"""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    if S.dim == 0:
        return worst
    for _ in range(samples):
        x, y = S.random_element(rng), S.random_element(rng)
        defect = apply(phi, jordan_product(x, y)) - jordan_product(apply(phi, x), apply(phi, y))
        worst = max(worst, norm(defect) / (norm(x) * norm(y)))
    return float(worst)


@dataclass
class CoreReport:
    definite_set: SaSubspace
    b_phi: SaSubspace
    core: SaSubspace
    m_inf_jordan_closed: bool
    largest_jordan_in_tail: SaSubspace
    core_equals_tail: bool

    def to_json(self):
        return {
            "definite_set": {"dim": self.definite_set.dim, "basis": self.definite_set.to_json()},
            "b_phi": {"dim": self.b_phi.dim, "basis": self.b_phi.to_json()},
            "core": {"dim": self.core.dim, "basis": self.core.to_json()},
            "m_inf_jordan_closed": self.m_inf_jordan_closed,
            "largest_jordan_in_tail": {"dim": self.largest_jordan_in_tail.dim,
                                       "basis": self.largest_jordan_in_tail.to_json()},
            "core_equals_tail": self.core_equals_tail,
        }


def core_report(phi, M_inf, E, tol=RANK_TOL, check_tol=1e-6):
    M_phi = definite_set(phi, tol)
    B = b_phi(phi, M_phi, tol)
    C = multiplicative_core(phi, B, tol)
    return CoreReport(
        definite_set=M_phi,
        b_phi=B,
        core=C,
        m_inf_jordan_closed=is_jordan_closed(M_inf, check_tol),
        largest_jordan_in_tail=largest_jordan_subalgebra(M_inf, E, tol),
        core_equals_tail=C.equals(M_inf, check_tol),
    )
