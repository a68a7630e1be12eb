"""
Asymptotics of the power semigroup phi^n: the idempotent limit E, the tail
system M_inf = range(E), the reversible part phi|M_inf and the decay condition.

E is constructed as the spectral projection of phi onto its peripheral
spectrum (eigenvalues with |z| >= 1 - eps_per), using an ordered complex Schur
form and a Sylvester equation to split off the decaying part. For a power
bounded map the peripheral eigenvalues are semisimple, so this projection is
the unique idempotent accumulation point of the powers.
"""
__all__ = ['SpectrumEntry',
           'RestrictedAutomorphism',
           'EmbeddingDiagnostics',
           'OracleResult',
           'AsymptoticProfile',
           'superop_spectrum',
           'peripheral_idempotent',
           'tail_system',
           'restricted_automorphism',
           'intrinsic_jordan',
           'check_decay_condition',
           'power_limit_oracle',
           'embedding_diagnostics',
           'fixed_point_space',
           'decay_radius',
           'decay_horizon',
           'asymptotic_profile',
           'spectral_projection',
           'CLUSTER_TOL',
           ]

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
import scipy.linalg as la

from .algebra import (RANK_TOL, Element, SaSubspace, jordan_product, min_eigenvalue,
                      norm, nullspace, span_coords)
from .errors import InputError, NumericalToleranceError
from .upmap import UPMap, LinearMap, apply, adjoint, is_faithful_map, random_psd

log = logging.getLogger(__name__)

CLUSTER_TOL = 1e-6
PERIOD_MAX = 64


@dataclass(frozen=True)
class SpectrumEntry:
    eigenvalue: complex
    algebraic: int
    geometric: int

    @property
    def modulus(self):
        return abs(self.eigenvalue)

    @property
    def semisimple(self):
        return self.algebraic == self.geometric

    def to_json(self):
        return {"eigenvalue": [float(self.eigenvalue.real), float(self.eigenvalue.imag)],
                "algebraic": self.algebraic,
                "geometric": self.geometric}


def _snap(z):
    """drop imaginary (and real) parts that are pure rounding noise"""
    z = complex(z)
    re, im = z.real, z.imag
    if abs(im) <= 1e-12 * max(1.0, abs(z)):
        im = 0.0
    if abs(re) <= 1e-12 * max(1.0, abs(z)):
        re = 0.0
    return complex(re, im)


def _order_key(z):
    return (-round(abs(z), 9), round(float(np.angle(z)) % (2 * np.pi), 9))


def _cluster(values, tol=CLUSTER_TOL):
    """group complex values closer than tol, returns list of (center, members)"""
    clusters = []
    for z in sorted(values, key=_order_key):
        for c in clusters:
            if abs(z - c[0]) <= tol:
                c[1].append(z)
                c[0] = complex(np.mean(c[1]))
                break
        else:
            clusters.append([z, [z]])
    return [(_snap(c), members) for c, members in clusters]


def _cluster_block(M, center, tol=CLUSTER_TOL):
    """upper triangular Schur block of M belonging to the eigenvalues near center"""
    T, _, sdim = la.schur(M.astype(complex), output='complex',
                          sort=lambda z: abs(z - center) <= tol)
    return T[:sdim, :sdim]


def _geometric_multiplicity(block, center, scale):
    m = block.shape[0]
    svals = la.svdvals(block - center * np.eye(m))
    return int(np.sum(svals <= 10 * CLUSTER_TOL * scale))


def superop_spectrum(phi):
    """Eigenvalues of phi (complexified sa_matrix) with multiplicities.

    Eigenvalues closer than 1e-6 are clustered into one entry. Entries are
    sorted by decreasing modulus, then by argument in [0, 2 pi).

    Returns:
        list of SpectrumEntry
    """
    M = phi.sa_matrix
    scale = max(1.0, la.norm(M, 2))
    out = []
    for center, members in _cluster(la.eigvals(M)):
        block = _cluster_block(M, center, 2 * CLUSTER_TOL)
        m = len(members)
        geometric = _geometric_multiplicity(block, center, scale) if block.shape[0] == m else m
        out.append(SpectrumEntry(center, m, min(geometric, m)))
    return sorted(out, key=lambda e: _order_key(e.eigenvalue))


def spectral_projection(M, select):
    """Riesz projection of the real matrix M onto its eigenvalues z with select(z).

    With the ordered Schur form M = Z [[A, C], [0, B]] Z^* (A selected), and
    R solving A R - R B = -C, the projection is Z [[I, -R], [0, 0]] Z^*.

    Returns:
        (real D x D projection, number of selected eigenvalues)
    """
    D = M.shape[0]
    T, Z, k = la.schur(M.astype(complex), output='complex', sort=select)
    P = np.zeros((D, D), dtype=complex)
    P[:k, :k] = np.eye(k)
    if 0 < k < D:
        A, B, C = T[:k, :k], T[k:, k:], T[:k, k:]
        P[:k, k:] = -la.solve_sylvester(A, -B, -C)
    proj = Z @ P @ Z.conj().T
    if np.abs(proj.imag).max(initial=0.0) > 1e-6:
        log.warning(f"spectral projection has imaginary part {np.abs(proj.imag).max():.2e}")
    return proj.real, k


def peripheral_idempotent(phi, eps_per=1e-8):
    """Spectral projection E of phi onto the eigenvalues with |z| >= 1 - eps_per.

    Peripheral eigenvalues of a power bounded map are semisimple; a defective
    one means phi was not positive after all.

    Args:
        phi(UPMap): unital positive map
        eps_per(float): width of the peripheral band

    Returns:
        UPMap: the idempotent E, carrying the certification mode of phi

    Raises:
        NumericalToleranceError: SPECTRAL_GAP_AMBIGUOUS, PERIPHERAL_DEFECTIVE
    """
    log.info("Calculating peripheral idempotent...")
    M = phi.sa_matrix
    scale = max(1.0, la.norm(M, 2))
    eigs = la.eigvals(M)
    moduli = np.abs(eigs)

    ambiguous = moduli[(moduli > 1 - 10 * eps_per) & (moduli < 1 - eps_per)]
    if ambiguous.size:
        raise NumericalToleranceError(
            f"eigenvalue of modulus {ambiguous[0]:.12f} lies in the ambiguity band "
            f"(1 - {10 * eps_per:.1e}, 1 - {eps_per:.1e})", code="SPECTRAL_GAP_AMBIGUOUS")
    if moduli.max() > 1 + CLUSTER_TOL:
        raise NumericalToleranceError(
            f"eigenvalue of modulus {moduli.max():.9f} > 1: powers are unbounded, "
            f"the map is not positive", code="PERIPHERAL_DEFECTIVE")

    for center, _ in _cluster(eigs[moduli >= 1 - eps_per]):
        block = _cluster_block(M, center, 2 * CLUSTER_TOL)
        defect = la.norm(np.triu(block, 1))
        if defect > CLUSTER_TOL * scale:
            raise NumericalToleranceError(
                f"peripheral eigenvalue {center:.6f} is defective (Jordan coupling "
                f"{defect:.3e}), the powers are unbounded", code="PERIPHERAL_DEFECTIVE")

    E, k = spectral_projection(M, lambda z: abs(z) >= 1 - eps_per)
    if k == 0:
        raise NumericalToleranceError("no peripheral eigenvalue found, phi(1) = 1 fails",
                                      code="NO_UNIT_EIGENVALUE")
    cert = phi.cert if isinstance(phi, UPMap) else None
    if cert is None:
        return LinearMap(phi.shape, E, certified_positive=phi.certified_positive)
    return UPMap(phi.shape, E, cert=cert)


def decay_radius(phi, eps_per=1e-8):
    """spectral radius of phi on ker E (0.0 if phi has no decaying part)"""
    moduli = np.abs(la.eigvals(phi.sa_matrix))
    inner = moduli[moduli < 1 - eps_per]
    return float(inner.max()) if inner.size else 0.0


def decay_horizon(radius, target=1e-9, dim=0):
    """first n with radius^n <= target, plus dim steps for the nilpotent part

    A Jordan block of size k for eigenvalue 0 only vanishes at the k-th power,
    so with dim = D the horizon also covers a decaying part of spectral radius 0.
    """
    if radius <= 0:
        return max(1, dim)
    return max(1, int(np.ceil(np.log(target) / np.log(radius)))) + dim


def tail_system(phi, eps_per=1e-8, tol=RANK_TOL, E=None):
    """M_inf as the range of E on self-adjoint coordinates"""
    log.info("Calculating tail system M_inf...")
    if E is None:
        E = peripheral_idempotent(phi, eps_per)
    return span_coords(phi.shape, E.sa_matrix, tol)


def fixed_point_space(phi, tol=RANK_TOL):
    """self-adjoint fixed points {x : phi(x) = x}"""
    M = phi.sa_matrix
    Q = nullspace(M - np.eye(phi.D), tol, scale=max(1.0, la.norm(M, 2)),
                  what="fixed_point_space")
    return SaSubspace(phi.shape, Q)


@dataclass
class RestrictedAutomorphism:
    """phi restricted to M_inf, as a matrix in the orthonormal M_inf basis"""
    matrix: np.ndarray
    smallest_singular_value: float
    invariance_residual: float
    period: Optional[int]
    isometry_residual: float
    cone_min_eigenvalue: float
    inverse_cone_min_eigenvalue: float
    cone_samples: int

    @property
    def dim(self):
        return self.matrix.shape[0]

    def order_automorphism(self, tol=1e-6):
        return self.cone_min_eigenvalue >= -tol and self.inverse_cone_min_eigenvalue >= -tol

    def to_json(self):
        return {
            "matrix": self.matrix.tolist(),
            "smallest_singular_value": self.smallest_singular_value,
            "invariance_residual": self.invariance_residual,
            "period": self.period,
            "isometry_residual": self.isometry_residual,
            "cone_min_eigenvalue": self.cone_min_eigenvalue,
            "inverse_cone_min_eigenvalue": self.inverse_cone_min_eigenvalue,
            "cone_samples": self.cone_samples,
        }


def _period(R, tol, max_period=PERIOD_MAX):
    Rp = np.eye(R.shape[0])
    for p in range(1, max_period + 1):
        Rp = Rp @ R
        if la.norm(Rp - np.eye(R.shape[0]), 2) <= tol:
            return p
    return None


def restricted_automorphism(phi, M_inf, E=None, tol=RANK_TOL, check_tol=1e-6,
                            samples=64, cone_samples=256, seed=0):
    """Matrix of phi|M_inf plus order-automorphism diagnostics.

    PSD elements of M_inf are sampled as E(y) for random PSD y; both phi and
    its inverse on M_inf should map them to PSD elements. The isometry of
    phi on M_inf^sa is sampled on random self-adjoint x in M_inf.

    Raises:
        NumericalToleranceError: NOT_INVERTIBLE
    """
    log.info("Calculating restricted automorphism...")
    if M_inf.shape != phi.shape:
        raise InputError(f"shapes differ: {M_inf.shape} vs {phi.shape}", code="BLOCK_MISMATCH")
    Q = M_inf.coords
    M = phi.sa_matrix
    R = Q.T @ M @ Q
    invariance = float(la.norm(M @ Q - Q @ R)) if Q.size else 0.0
    svals = la.svdvals(R) if R.size else np.array([1.0])
    s_min = float(svals.min())
    if s_min <= max(tol * svals.max(), 1e-12):
        raise NumericalToleranceError(
            f"restriction of phi to M_inf is singular (smallest singular value {s_min:.3e})",
            code="NOT_INVERTIBLE")
    R_inv = la.inv(R) if R.size else R
    shape = phi.shape
    rng = np.random.default_rng(seed)

    iso = 0.0
    for _ in range(samples if M_inf.dim else 0):
        x = M_inf.random_element(rng)
        x_norm = norm(x)
        iso = max(iso, abs(norm(apply(phi, x)) - x_norm) / x_norm)

    cone, inv_cone = 0.0, 0.0
    if E is not None and M_inf.dim:
        for k in range(cone_samples):
            c = Q.T @ E.sa_matrix @ random_psd(shape, rng, rank=1 + k % 2).sa_coords()
            y = Element.from_coords(shape, Q @ c)
            y_norm = max(norm(y), 1e-300)
            cone = min(cone, min_eigenvalue(Element.from_coords(shape, Q @ (R @ c))) / y_norm)
            inv_cone = min(inv_cone,
                           min_eigenvalue(Element.from_coords(shape, Q @ (R_inv @ c))) / y_norm)

    return RestrictedAutomorphism(
        matrix=R,
        smallest_singular_value=s_min,
        invariance_residual=invariance,
        period=_period(R, check_tol) if R.size else 1,
        isometry_residual=float(iso),
        cone_min_eigenvalue=float(cone),
        inverse_cone_min_eigenvalue=float(inv_cone),
        cone_samples=cone_samples if E is not None else 0,
    )


def _check_in_tail(M_inf, x, tol, name):
    for part in x.hermitian_parts():
        if not M_inf.contains(part, tol):
            raise InputError(f"{name} is not in M_inf", code="NOT_IN_TAIL")


def intrinsic_jordan(E, x, y, M_inf=None, tol=1e-6):
    """The Jordan product E((xy + yx)/2) that makes M_inf a Jordan algebra.

    :param E: idempotent limit of phi
    :param x: Element of M_inf
    :param y: Element of M_inf
    :param M_inf: range of E, computed from E when not given
    :param tol: membership tolerance
    :return: Element of M_inf
    """
    if M_inf is None:
        M_inf = span_coords(E.shape, E.sa_matrix)
    _check_in_tail(M_inf, x, tol, "x")
    _check_in_tail(M_inf, y, tol, "y")
    return apply(E, jordan_product(x, y))


def check_decay_condition(phi, tol=1e-9, E=None, eps_per=1e-8):
    """True iff lim ||phi^n(x)|| = 0 forces x = 0.

    For positive x the norms ||phi^n(x)|| decrease to ||E(x)||, so this holds
    exactly when E is faithful.
    """
    if E is None:
        E = peripheral_idempotent(phi, eps_per)
    return is_faithful_map(E, tol)


@dataclass
class OracleResult:
    E: LinearMap
    n: int
    squarings: int
    residual: float


def power_limit_oracle(phi, n_search=64, max_squarings=40):
    """Idempotent limit of the powers, computed without any eigen-solver.

    Picks the n <= n_search minimizing ||phi^2n - phi^n|| (so the peripheral
    part of phi^n is close to the identity) and squares phi^n until it stops
    improving as an idempotent.
    """
    M = phi.sa_matrix
    best_n, best_gap = 1, np.inf
    A = np.eye(phi.D)
    for n in range(1, n_search + 1):
        A = A @ M
        gap = la.norm(A @ A - A)
        if gap < best_gap - 1e-14:
            best_n, best_gap = n, gap

    A = np.linalg.matrix_power(M, best_n)
    residual = la.norm(A @ A - A)
    squarings = 0
    while squarings < max_squarings and residual > 1e-12:
        A2 = A @ A
        r2 = la.norm(A2 @ A2 - A2)
        if r2 >= residual and squarings > 2:
            break
        A, residual = A2, r2
        squarings += 1
    log.info(f"power oracle: n={best_n}, {squarings} squarings, residual {residual:.2e}")
    return OracleResult(LinearMap(phi.shape, A, certified_positive=phi.certified_positive),
                        best_n, squarings, float(residual))


@dataclass
class EmbeddingDiagnostics:
    """The three equivalent embeddability conditions, checked numerically:
    phi|M_inf is an sa-isometry, it is an order automorphism, and the dual
    norm identity ||rho|M_inf|| = lim ||rho o phi^n|| holds."""
    isometry_residual: float
    cone_min_eigenvalue: float
    dual_norm_residual: float
    tol: float
    n_used: int

    @property
    def isometry(self):
        return self.isometry_residual <= self.tol

    @property
    def order_automorphism(self):
        return self.cone_min_eigenvalue >= -self.tol

    @property
    def dual_norm_identity(self):
        return self.dual_norm_residual <= self.tol

    @property
    def all_hold(self):
        return self.isometry and self.order_automorphism and self.dual_norm_identity

    @property
    def consistent(self):
        """the conditions are equivalent, so they hold or fail together"""
        return self.isometry == self.order_automorphism == self.dual_norm_identity

    def to_json(self):
        return {"isometry": self.isometry,
                "isometry_residual": self.isometry_residual,
                "order_automorphism": self.order_automorphism,
                "cone_min_eigenvalue": self.cone_min_eigenvalue,
                "dual_norm_identity": self.dual_norm_identity,
                "dual_norm_residual": self.dual_norm_residual,
                "n_used": self.n_used}


def embedding_diagnostics(phi, E=None, M_inf=None, restricted=None, eps_per=1e-8,
                          check_tol=1e-6, samples=64, cone_samples=256, n_max=512, seed=0):
    """check the three equivalent embeddability conditions of (M_inf, phi|M_inf)"""
    log.info("Calculating embedding diagnostics...")
    if E is None:
        E = peripheral_idempotent(phi, eps_per)
    if M_inf is None:
        M_inf = tail_system(phi, E=E)
    if restricted is None:
        restricted = restricted_automorphism(phi, M_inf, E=E, check_tol=check_tol,
                                             samples=samples, cone_samples=cone_samples,
                                             seed=seed)
    rng = np.random.default_rng(seed + 1)
    n = min(decay_horizon(decay_radius(phi, eps_per), dim=phi.D), n_max)
    Mn_T = np.linalg.matrix_power(phi.sa_matrix.T, n)
    shape = phi.shape
    dual = 0.0
    for _ in range(max(1, samples // 8)):
        r = rng.standard_normal(shape.D)
        limit = norm(Element.from_coords(shape, E.sa_matrix.T @ r), "trace")
        at_n = norm(Element.from_coords(shape, Mn_T @ r), "trace")
        dual = max(dual, abs(at_n - limit) / max(1.0, np.linalg.norm(r)))
    return EmbeddingDiagnostics(
        isometry_residual=restricted.isometry_residual,
        cone_min_eigenvalue=min(restricted.cone_min_eigenvalue,
                                restricted.inverse_cone_min_eigenvalue),
        dual_norm_residual=float(dual),
        tol=check_tol,
        n_used=n,
    )


@dataclass
class AsymptoticProfile:
    E: LinearMap
    M_inf: SaSubspace
    restricted: np.ndarray
    peripheral_eigenvalues: List[complex]
    decay_radius: float
    spectrum: List[SpectrumEntry] = field(default_factory=list)
    automorphism: Optional[RestrictedAutomorphism] = None

    def spectrum_df(self):
        return pd.DataFrame([
            dict(re=e.eigenvalue.real, im=e.eigenvalue.imag, modulus=e.modulus,
                 algebraic=e.algebraic, geometric=e.geometric,
                 peripheral=any(abs(e.eigenvalue - z) <= CLUSTER_TOL
                                for z in self.peripheral_eigenvalues))
            for e in self.spectrum],
            columns=['re', 'im', 'modulus', 'algebraic', 'geometric', 'peripheral'])

    def to_json(self):
        out = {
            "E": self.E.sa_matrix.tolist(),
            "M_inf": {"dim": self.M_inf.dim, "basis": self.M_inf.to_json()},
            "restricted": self.restricted.tolist(),
            "peripheral_eigenvalues": [[float(z.real), float(z.imag)]
                                       for z in self.peripheral_eigenvalues],
            "decay_radius": self.decay_radius,
            "spectrum": [e.to_json() for e in self.spectrum],
        }
        if self.automorphism is not None:
            out["automorphism"] = self.automorphism.to_json()
        return out


def asymptotic_profile(phi, eps_per=1e-8, tol=RANK_TOL, check_tol=1e-6,
                       samples=64, cone_samples=256, seed=0):
    """E, M_inf, phi|M_inf and the spectral data in one record"""
    spectrum = superop_spectrum(phi)
    E = peripheral_idempotent(phi, eps_per)
    M_inf = tail_system(phi, eps_per, tol, E=E)
    automorphism = restricted_automorphism(phi, M_inf, E=E, tol=tol, check_tol=check_tol,
                                           samples=samples, cone_samples=cone_samples,
                                           seed=seed)
    return AsymptoticProfile(
        E=E,
        M_inf=M_inf,
        restricted=automorphism.matrix,
        peripheral_eigenvalues=[e.eigenvalue for e in spectrum
                                if e.modulus >= 1 - eps_per],
        decay_radius=decay_radius(phi, eps_per),
        spectrum=spectrum,
        automorphism=automorphism,
    )
