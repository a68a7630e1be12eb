"""
Invariant states, faithfulness, functional norms and trace-norm decay of
rho o phi^n.

Functionals are represented by their density R (rho(x) = <R, x>), so
rho o phi^n has density phi^dagger^n(R) and the norm of rho over the
self-adjoint unit ball is the trace norm of R.
"""
__all__ = ['DecayRecord',
           'StateReport',
           'unit_eigenprojection',
           'invariant_state',
           'exists_faithful_invariant_state',
           'support_projection',
           'exists_invariant_state_faithful_on',
           'restriction_is_faithful',
           'sa_functional_norm',
           'norm_convergence_report',
           'complement_decay_records',
           'core_tail_criterion',
           'state_report',
           ]

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
import scipy.linalg as la

from .algebra import RANK_TOL, Element, min_eigenvalue, norm, nullspace, trace_norms
from .asymptotics import CLUSTER_TOL, peripheral_idempotent, spectral_projection
from .corestruct import is_jordan_closed, jordan_multiplicativity_residual
from .errors import InputError, NumericalToleranceError
from .upmap import LinearMap, SaFunctional

log = logging.getLogger(__name__)


def unit_eigenprojection(phi):
    """P_1: the spectral projection of phi^dagger onto the eigenvalue 1, acting
    on densities. P_1(R) is the Cesaro limit of phi^dagger^k(R)."""
    P, k = spectral_projection(phi.sa_matrix.T, lambda z: abs(z - 1) <= CLUSTER_TOL)
    if k == 0:
        raise NumericalToleranceError("phi^dagger has no eigenvalue 1, phi is not unital",
                                      code="NO_UNIT_EIGENVALUE")
    return LinearMap(phi.shape, P, certified_positive=phi.certified_positive)


def invariant_state(phi):
    """Invariant state of maximal support, with density P_1(1/n).

    Any invariant density R satisfies R = P_1(R) <= n ||R|| P_1(1/n), so its
    support lies inside the support of the returned state.
    """
    log.info("Calculating invariant state...")
    shape = phi.shape
    P1 = unit_eigenprojection(phi)
    density = Element.from_coords(shape, P1.sa_matrix @ shape.unit_coords / shape.n)
    trace = sum(np.trace(b).real for b in density.blocks)
    if abs(trace - 1) > 1e-6:
        log.warning(f"invariant density has trace {trace:.9f}, renormalizing")
    return SaFunctional(shape, density * (1 / trace))


def _density(R):
    return R.density if isinstance(R, SaFunctional) else R


def exists_faithful_invariant_state(phi, tol=1e-9, rho=None):
    """True iff the maximal-support invariant density is positive definite"""
    R = _density(rho if rho is not None else invariant_state(phi))
    return min_eigenvalue(R) > tol * max(1.0, norm(R))


def support_projection(R, tol=1e-9):
    """projection onto the eigenvectors of R with eigenvalue > tol * max(1, ||R||)"""
    R = _density(R)
    cut = tol * max(1.0, norm(R))
    blocks = []
    for b in R.blocks:
        vals, vecs = la.eigh((b + b.conj().T) / 2)
        keep = vecs[:, vals > cut]
        blocks.append(keep @ keep.conj().T)
    return Element(R.shape, blocks)


def exists_invariant_state_faithful_on(phi, N, tol=1e-9, rho=None, check_tol=1e-6):
    """True iff some invariant state is faithful on the Jordan-closed subspace N.

    With P the support projection of the maximal invariant density, this is
    K = {x in N : Px = 0} being {0}: a nonzero self-adjoint x in K gives the
    nonzero positive x o x in K, which every invariant state kills.

    Raises:
        InputError: NOT_JORDAN_CLOSED
    """
    if not is_jordan_closed(N, check_tol):
        raise InputError("N is not Jordan closed", code="NOT_JORDAN_CLOSED")
    if N.dim == 0:
        return True
    R = rho if rho is not None else invariant_state(phi)
    P = support_projection(R, tol)
    cols = [(P @ q).to_vector() for q in N.basis]
    A = np.vstack([np.column_stack(cols).real, np.column_stack(cols).imag])
    return nullspace(A, RANK_TOL, scale=1.0, what="faithful_on").shape[1] == 0


def restriction_is_faithful(phi, N, tol=RANK_TOL):
    """phi|N kills no nonzero positive element of N.

    For N on which phi is Jordan multiplicative (such as the multiplicative
    core) a self-adjoint kernel element x gives the positive kernel element
    x o x, so this is injectivity of phi on N.
    """
    if N.dim == 0:
        return True
    A = phi.sa_matrix @ N.coords
    return nullspace(A, tol, scale=max(1.0, la.norm(phi.sa_matrix, 2)),
                     what="restriction_is_faithful").shape[1] == 0


def sa_functional_norm(R):
    """norm of x -> <R, x> over the self-adjoint unit ball, i.e. the trace norm of R"""
    R = _density(R)
    if not R.is_self_adjoint():
        raise InputError("density is not self-adjoint", code="NOT_SELF_ADJOINT")
    return norm(R, "trace")


@dataclass
class DecayRecord:
    """trace norms a_n = ||phi^dagger^n(R)||_1 for n = 0..n_max"""
    label: str
    density: np.ndarray
    sequence: np.ndarray
    converged_to: float
    remainder: float
    tol: float

    @property
    def vanishes(self):
        return self.converged_to <= self.tol

    @property
    def remainder_decays(self):
        return self.remainder <= self.tol

    @property
    def n_converged(self):
        close = np.flatnonzero(np.abs(self.sequence - self.converged_to) <= self.tol)
        return int(close[0]) if close.size else None

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.sequence) <= 1e-10 * max(1.0, self.sequence[0])))

    def to_dataframe(self):
        return pd.DataFrame(dict(functional=self.label,
                                 n=np.arange(len(self.sequence)),
                                 trace_norm=self.sequence))

    def to_json(self):
        return {"functional": self.label,
                "density": self.density.tolist(),
                "converged_to": self.converged_to,
                "vanishes": self.vanishes,
                "n_converged": self.n_converged,
                "remainder": self.remainder,
                "remainder_decays": self.remainder_decays,
                "monotone": self.monotone,
                "final": float(self.sequence[-1])}


def norm_convergence_report(phi, R, n_max=512, tol=1e-6, E=None, label="R"):
    """Decay of ||rho o phi^n|| towards ||rho o E||.

    Also reports the remainder ||(phi^n - phi^n o E)^dagger(R)||_1 at n_max, which
    tends to zero because phi^n vanishes on ker E.

    Args:
        phi(UPMap): the map
        R(SaFunctional): the functional rho
        n_max(int): length of the sequence
        tol(float): convergence tolerance
        E(LinearMap): idempotent limit of phi, computed if not given
        label(str): name of the functional in tables

    Returns:
        DecayRecord

    Raises:
        NumericalToleranceError: NOT_CONVERGED if a_{n_max} is further than tol
            from the limit
    """
    if E is None:
        E = peripheral_idempotent(phi)
    shape = phi.shape
    r = _density(R).sa_coords()
    MT = phi.sa_matrix.T
    iterates = np.empty((n_max + 1, shape.D))
    iterates[0] = r
    for n in range(n_max):
        iterates[n + 1] = MT @ iterates[n]
    ET = E.sa_matrix.T
    current = iterates[-1]
    seq = trace_norms(shape, iterates)
    limit, remainder = trace_norms(shape, [ET @ r, current - ET @ current])
    if abs(seq[-1] - limit) > tol:
        raise NumericalToleranceError(
            f"{label}: ||rho o phi^{n_max}|| = {seq[-1]:.9f} is not within {tol:.1e} of "
            f"the limit {limit:.9f}, increase n_max", code="NOT_CONVERGED")
    return DecayRecord(label, r, seq, float(limit), float(remainder), tol)


def complement_decay_records(phi, core, E, n_max=512, tol=1e-6):
    """decay records of the basis functionals orthogonal to the multiplicative core"""
    records = []
    for k, q in enumerate(core.complement().coords.T):
        R = SaFunctional.from_coords(phi.shape, q)
        records.append(norm_convergence_report(phi, R, n_max, tol, E=E, label=f"core_perp_{k}"))
    return records


def core_tail_criterion(phi, core, M_inf, records, tol=1e-6, samples=16, seed=0):
    """If phi|C_phi is faithful and every functional orthogonal to C_phi decays
    to zero along phi^n, then C_phi = M_inf and phi|C_phi is a Jordan
    automorphism.

    Returns:
        dict with the hypotheses, the conclusions and whether the implication holds
    """
    faithful = restriction_is_faithful(phi, core)
    vanish = all(r.vanishes for r in records)
    equal = core.equals(M_inf, tol)
    residual = jordan_multiplicativity_residual(phi, core, samples, np.random.default_rng(seed))
    automorphism = faithful and residual <= tol
    hypotheses = faithful and vanish
    return {"restriction_faithful": faithful,
            "complement_vanishes": vanish,
            "core_equals_tail": equal,
            "jordan_automorphism": automorphism,
            "multiplicativity_residual": residual,
            "holds": (not hypotheses) or (equal and automorphism)}


@dataclass
class StateReport:
    invariant_state: SaFunctional
    maximal_support: Element
    faithful_exists: bool
    decay_records: List[DecayRecord] = field(default_factory=list)
    faithful_on_jordan_generated: Optional[bool] = None

    @property
    def complement_vanishes(self):
        return all(r.vanishes for r in self.decay_records)

    def decay_df(self):
        if not self.decay_records:
            return pd.DataFrame(columns=['functional', 'n', 'trace_norm'])
        return pd.concat([r.to_dataframe() for r in self.decay_records], ignore_index=True)

    def to_json(self):
        return {"invariant_state": self.invariant_state.to_json(),
                "maximal_support": self.maximal_support.to_json(),
                "faithful_exists": self.faithful_exists,
                "faithful_on_jordan_generated": self.faithful_on_jordan_generated,
                "complement_vanishes": self.complement_vanishes,
                "decay_records": [r.to_json() for r in self.decay_records]}


def state_report(phi, E, core, N=None, n_max=512, tol=1e-9, check_tol=1e-6):
    """invariant state, faithfulness verdicts and decay of the functionals
    orthogonal to the core. N is the Jordan algebra generated by M_inf."""
    rho = invariant_state(phi)
    records = complement_decay_records(phi, core, E, n_max, check_tol)
    return StateReport(
        invariant_state=rho,
        maximal_support=support_projection(rho, tol),
        faithful_exists=exists_faithful_invariant_state(phi, tol, rho),
        decay_records=records,
        faithful_on_jordan_generated=(None if N is None else
                                      exists_invariant_state_faithful_on(phi, N, tol, rho,
                                                                         check_tol)),
    )
