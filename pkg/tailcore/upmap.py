"""
Unital positive maps on a finite-dimensional *-algebra.

A map is stored as a real D x D matrix acting on self-adjoint coordinates
(see tailcore.algebra). Positivity cannot be decided efficiently in general, so
every UPMap carries a certification mode and a witness:

- stochastic: a row-stochastic matrix on a commutative algebra
- kraus: Kraus families per (source block, target block) pair
- kraus_transpose: a Kraus map followed by the blockwise transpose
- mix: a convex combination of certified maps
- asserted: any unital matrix; positivity is taken on faith and flagged
"""
__all__ = ['Cert',
           'LinearMap',
           'UPMap',
           'SaFunctional',
           'ValidationReport',
           'build_map',
           'stochastic_map',
           'kraus_map',
           'mix_maps',
           'asserted_map',
           'identity_map',
           'map_from_document',
           'map_to_document',
           'apply',
           'power',
           'validate_up',
           'adjoint',
           'is_faithful_map',
           'transpose_signs',
           'random_psd',
           'random_sa',
           'SCHEMA_VERSION',
           ]

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional

import numpy as np
import pandas as pd
import scipy.linalg as la

from .algebra import (AlgebraShape, Element, parse_matrix,
                      matrix_to_json, min_eigenvalue, norm)
from .errors import InputError, UnverifiedPositivityWarning

log = logging.getLogger(__name__)

SCHEMA_VERSION = "tailcore/1"
UNITAL_TOL = 1e-10


class Cert(Enum):
    STOCHASTIC = "stochastic"
    CP_KRAUS = "kraus"
    CP_COMPOSED_TRANSPOSE = "kraus_transpose"
    CONVEX_MIX = "mix"
    ASSERTED = "asserted"


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A linear map of the algebra into itself, given on self-adjoint coordinates.

    Hermiticity preservation is built in: the real matrix acts on the
    self-adjoint and skew parts of an element separately.
    """
    shape: AlgebraShape
    sa_matrix: np.ndarray
    certified_positive: bool = True

    def __post_init__(self):
        M = np.array(self.sa_matrix, dtype=float)
        if M.shape != (self.shape.D, self.shape.D):
            raise InputError(f"expected a {self.shape.D}x{self.shape.D} matrix for {self.shape}, "
                             f"got {M.shape}", code="BLOCK_MISMATCH")
        M.setflags(write=False)
        object.__setattr__(self, 'sa_matrix', M)

    @property
    def D(self):
        return self.shape.D

    def __call__(self, x):
        return apply(self, x)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.shape}, D={self.D})"


@dataclass(frozen=True, eq=False)
class UPMap(LinearMap):
    """unital positive map plus its certification mode and witness"""
    cert: Cert = Cert.ASSERTED
    cert_data: Any = None

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, 'certified_positive', self.cert is not Cert.ASSERTED)

    @property
    def unital_residual(self):
        u = self.shape.unit_coords
        return float(np.linalg.norm(self.sa_matrix @ u - u))

    def to_json(self):
        """the {"mode", "data"} payload this map can be rebuilt from"""
        if self.cert is Cert.STOCHASTIC and self.cert_data is not None:
            return {"mode": self.cert.value, "data": np.asarray(self.cert_data).tolist()}
        if self.cert in (Cert.CP_KRAUS, Cert.CP_COMPOSED_TRANSPOSE) and self.cert_data is not None:
            return {"mode": self.cert.value,
                    "data": [{"source": s, "target": t, "ops": [matrix_to_json(A) for A in ops]}
                             for s, t, ops in self.cert_data]}
        if self.cert is Cert.CONVEX_MIX and self.cert_data is not None:
            weights, maps = self.cert_data
            return {"mode": self.cert.value,
                    "data": {"weights": [float(w) for w in weights],
                             "maps": [m.to_json() for m in maps]}}
        return {"mode": Cert.ASSERTED.value, "data": self.sa_matrix.tolist()}


@dataclass(frozen=True, eq=False)
class SaFunctional:
    """The functional x -> hs_inner(density, x) for a self-adjoint density.

    In finite dimension every functional is normal, so this covers all of M_*
    restricted to self-adjoint densities.
    """
    shape: AlgebraShape
    density: Element

    def __post_init__(self):
        if self.density.shape != self.shape:
            raise InputError(f"density has shape {self.density.shape}, expected {self.shape}",
                             code="BLOCK_MISMATCH")
        if not self.density.is_self_adjoint():
            raise InputError("density is not self-adjoint", code="NOT_SELF_ADJOINT")

    @classmethod
    def from_coords(cls, shape, coords):
        return cls(shape, Element.from_coords(shape, np.asarray(coords, dtype=float)))

    @classmethod
    def from_json(cls, shape, data, pointer=""):
        return cls(shape, Element.from_json(shape, data, pointer))

    @property
    def coords(self):
        return self.density.coords().real

    @property
    def trace(self):
        return float(sum(np.trace(b).real for b in self.density.blocks))

    def is_state(self, tol=1e-9):
        return (abs(self.trace - 1) <= tol
                and min_eigenvalue(self.density) >= -tol * max(1.0, norm(self.density)))

    def __call__(self, x):
        return complex(np.vdot(self.density.to_vector(), x.to_vector()))

    def to_json(self):
        return self.density.to_json()


def transpose_signs(shape):
    """diagonal of the blockwise transpose on sa coordinates: symmetric basis
    elements are fixed, antisymmetric ones change sign"""
    signs = []
    for n in shape.block_dims:
        signs.extend(1.0 if i <= j else -1.0 for i in range(n) for j in range(n))
    return np.array(signs)


def _sa_matrix_from_action(shape, action):
    """sa matrix of a linear, hermiticity preserving action Element -> Element"""
    D = shape.D
    M = np.zeros((D, D))
    eye = np.eye(D)
    for k in range(D):
        M[:, k] = action(Element.from_coords(shape, eye[k])).coords().real
    return M


def _check_unital(shape, M, what="map"):
    u = shape.unit_coords
    residual = float(np.linalg.norm(M @ u - u))
    if residual > UNITAL_TOL * max(1.0, np.linalg.norm(M)):
        raise InputError(f"{what} is not unital: ||phi(1) - 1|| = {residual:.3e}",
                         code="NOT_UNITAL")


def stochastic_map(matrix, pointer="/map/data"):
    """UP map on C^n given by a row-stochastic matrix acting on column vectors

    Args:
        matrix(array-like): n x n row-stochastic matrix

    Returns:
        UPMap with cert STOCHASTIC
    """
    P = np.array(matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InputError(f"stochastic matrix should be square, got shape {P.shape}",
                         pointer=pointer)
    if not np.isfinite(P).all():
        raise InputError("stochastic matrix has non-finite entries", pointer=pointer)
    negative = np.argwhere(P < 0)
    if len(negative):
        i, j = negative[0]
        raise InputError(f"negative entry {P[i, j]}", code="NEGATIVE_ENTRY",
                         pointer=f"{pointer}/{i}/{j}")
    rows = P.sum(axis=1)
    bad = np.flatnonzero(np.abs(rows - 1) > UNITAL_TOL)
    if bad.size:
        raise InputError(f"row {bad[0]} sums to {rows[bad[0]]!r}, not 1", code="NOT_UNITAL",
                         pointer=f"{pointer}/{bad[0]}")
    shape = AlgebraShape((1,) * P.shape[0])
    # for 1x1 blocks the sa coordinates are the function values themselves
    return UPMap(shape, P, cert=Cert.STOCHASTIC, cert_data=P)


def _kraus_action(shape, families):
    def action(x):
        out = [np.zeros((n, n), dtype=complex) for n in shape.block_dims]
        for s, t, ops in families:
            for A in ops:
                out[t] = out[t] + A @ x.blocks[s] @ A.conj().T
        return Element(shape, out)
    return action


def kraus_map(shape, families, transpose=False):
    """Completely positive unital map x_t -> sum_s sum_A A x_s A^*.

    :param shape: AlgebraShape
    :param families: list of (source block, target block, list of n_t x n_s matrices)
    :param transpose: apply the blockwise transpose after the CP map
    :return: UPMap with cert CP_KRAUS or CP_COMPOSED_TRANSPOSE
    """
    parsed = []
    for idx, (s, t, ops) in enumerate(families):
        if not (0 <= s < shape.n_blocks and 0 <= t < shape.n_blocks):
            raise InputError(f"block pair ({s}, {t}) out of range for {shape}",
                             code="BLOCK_MISMATCH", pointer=f"/map/data/{idx}")
        ops = [np.array(A, dtype=complex) for A in ops]
        for k, A in enumerate(ops):
            if A.shape != (shape.block_dims[t], shape.block_dims[s]):
                raise InputError(f"Kraus operator should be {shape.block_dims[t]}x"
                                 f"{shape.block_dims[s]}, got {A.shape}",
                                 code="BLOCK_MISMATCH", pointer=f"/map/data/{idx}/ops/{k}")
        parsed.append((int(s), int(t), ops))

    for t, n in enumerate(shape.block_dims):
        total = sum((A @ A.conj().T for s_, t_, ops in parsed if t_ == t for A in ops),
                    np.zeros((n, n), dtype=complex))
        residual = float(np.linalg.norm(total - np.eye(n)))
        if residual > UNITAL_TOL * max(1.0, np.linalg.norm(total)):
            raise InputError(f"sum of A A^* into block {t} differs from the identity "
                             f"by {residual:.3e}", code="KRAUS_NOT_UNITAL")

    M = _sa_matrix_from_action(shape, _kraus_action(shape, parsed))
    cert = Cert.CP_KRAUS
    if transpose:
        M = transpose_signs(shape)[:, None] * M
        cert = Cert.CP_COMPOSED_TRANSPOSE
    return UPMap(shape, M, cert=cert, cert_data=parsed)


def identity_map(shape):
    return kraus_map(shape, [(b, b, [np.eye(n)]) for b, n in enumerate(shape.block_dims)])


def mix_maps(weights, maps):
    """convex combination sum_k w_k phi_k of UP maps on one shape"""
    weights = np.array(weights, dtype=float)
    maps = list(maps)
    if len(weights) != len(maps) or not maps:
        raise InputError("mix needs one weight per map and at least one map",
                         pointer="/map/data")
    if (weights < 0).any():
        raise InputError("mix weights should be nonnegative", code="NEGATIVE_ENTRY",
                         pointer="/map/data/weights")
    if abs(weights.sum() - 1) > UNITAL_TOL:
        raise InputError(f"mix weights sum to {weights.sum()!r}, not 1", code="NOT_UNITAL",
                         pointer="/map/data/weights")
    shape = maps[0].shape
    for phi in maps:
        if phi.shape != shape:
            raise InputError(f"mixed maps have shapes {shape} and {phi.shape}",
                             code="BLOCK_MISMATCH")
    M = sum(w * phi.sa_matrix for w, phi in zip(weights, maps))
    cert = Cert.CONVEX_MIX
    if not all(phi.certified_positive for phi in maps):
        cert = Cert.ASSERTED
    return UPMap(shape, M, cert=cert, cert_data=(weights, maps))


def asserted_map(shape, sa_matrix):
    """Unital map whose positivity is asserted by the caller.

    Emits an UnverifiedPositivityWarning: downstream results are only as good
    as the assertion.
    """
    M = np.array(sa_matrix, dtype=float)
    if M.shape != (shape.D, shape.D):
        raise InputError(f"expected a {shape.D}x{shape.D} matrix, got {M.shape}",
                         code="BLOCK_MISMATCH", pointer="/map/data")
    _check_unital(shape, M)
    warnings.warn("positivity of an asserted map is not verified", UnverifiedPositivityWarning)
    return UPMap(shape, M, cert=Cert.ASSERTED)


def _parse_kraus_data(shape, data, pointer):
    if not isinstance(data, list) or not data:
        raise InputError("kraus data should be a non-empty list of "
                         '{"source", "target", "ops"}', pointer=pointer)
    families = []
    for idx, item in enumerate(data):
        p = f"{pointer}/{idx}"
        if not isinstance(item, dict) or not {"source", "target", "ops"} <= set(item):
            raise InputError('expected {"source", "target", "ops"}', pointer=p)
        s, t = item["source"], item["target"]
        for key, b in (("source", s), ("target", t)):
            if isinstance(b, bool) or not isinstance(b, int) or not 0 <= b < shape.n_blocks:
                raise InputError(f"{key} should be a block index below {shape.n_blocks}",
                                 code="BLOCK_MISMATCH", pointer=f"{p}/{key}")
        if not isinstance(item["ops"], list):
            raise InputError("ops should be a list of matrices", pointer=f"{p}/ops")
        ops = [parse_matrix(A, shape.block_dims[t], shape.block_dims[s], f"{p}/ops/{k}")
               for k, A in enumerate(item["ops"])]
        families.append((s, t, ops))
    return families


def build_map(shape, payload, pointer="/map"):
    """Build a certified UP map from a {"mode", "data"} payload.

    Args:
        shape(AlgebraShape): algebra the map acts on
        payload(dict): {"mode": "stochastic"|"kraus"|"kraus_transpose"|"mix"|"asserted",
            "data": ...}
        pointer(str): JSON pointer of payload, used in error messages

    Returns:
        UPMap

    Raises:
        InputError: NOT_UNITAL, NEGATIVE_ENTRY, KRAUS_NOT_UNITAL, BLOCK_MISMATCH, SCHEMA
    """
    if not isinstance(payload, dict) or "mode" not in payload or "data" not in payload:
        raise InputError('map should look like {"mode": ..., "data": ...}', pointer=pointer)
    modes = [c.value for c in Cert]
    if payload["mode"] not in modes:
        raise InputError(f"mode should be one of {modes}, got {payload['mode']!r}",
                         pointer=f"{pointer}/mode")
    mode, data = Cert(payload["mode"]), payload["data"]
    dp = f"{pointer}/data"

    if mode is Cert.STOCHASTIC:
        if not shape.is_commutative:
            raise InputError(f"stochastic mode needs 1x1 blocks, got {shape}",
                             code="BLOCK_MISMATCH", pointer=dp)
        P = parse_matrix(data, shape.D, shape.D, dp)
        if np.abs(P.imag).max(initial=0) > 0:
            raise InputError("stochastic matrix should be real", pointer=dp)
        return stochastic_map(P.real, pointer=dp)
    if mode in (Cert.CP_KRAUS, Cert.CP_COMPOSED_TRANSPOSE):
        families = _parse_kraus_data(shape, data, dp)
        return kraus_map(shape, families, transpose=mode is Cert.CP_COMPOSED_TRANSPOSE)
    if mode is Cert.CONVEX_MIX:
        if not isinstance(data, dict) or not {"weights", "maps"} <= set(data):
            raise InputError('mix data should look like {"weights": [...], "maps": [...]}',
                             pointer=dp)
        weights, payloads = data["weights"], data["maps"]
        if (not isinstance(weights, list) or not isinstance(payloads, list)
                or not all(isinstance(w, (int, float)) and not isinstance(w, bool)
                           for w in weights)):
            raise InputError("weights should be a list of numbers and maps a list",
                             pointer=dp)
        maps = [build_map(shape, s, pointer=f"{dp}/maps/{k}") for k, s in enumerate(payloads)]
        return mix_maps(weights, maps)
    P = parse_matrix(data, shape.D, shape.D, dp)
    if np.abs(P.imag).max(initial=0) > 0:
        raise InputError("asserted sa_matrix should be real", pointer=dp)
    return asserted_map(shape, P.real)


def map_from_document(doc):
    """Parse an input document {"version", "shape", "map", "seed"?}.

    Returns:
        (UPMap, seed or None)
    """
    if not isinstance(doc, dict):
        raise InputError("input should be a json object", pointer="")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InputError(f"unsupported version {version!r}, expected {SCHEMA_VERSION!r}",
                         pointer="/version")
    for key in ("shape", "map"):
        if key not in doc:
            raise InputError(f"missing required key {key!r}", pointer=f"/{key}")
    shape = AlgebraShape.from_json(doc["shape"])
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise InputError("seed should be a nonnegative int", pointer="/seed")
    return build_map(shape, doc["map"]), seed


def map_to_document(phi, seed=None):
    doc = {"version": SCHEMA_VERSION, "shape": phi.shape.to_json(), "map": phi.to_json()}
    if seed is not None:
        doc["seed"] = int(seed)
    return doc


def apply(phi, x):
    """phi(x), acting on the self-adjoint and skew parts separately"""
    if x.shape != phi.shape:
        raise InputError(f"map acts on {phi.shape}, element has shape {x.shape}",
                         code="BLOCK_MISMATCH")
    c = x.coords()
    M = phi.sa_matrix
    return Element.from_coords(phi.shape, M @ c.real + 1j * (M @ c.imag))


def power(phi, n):
    """phi^n (phi^0 is the identity)"""
    if n < 0:
        raise InputError(f"power should be nonnegative, got {n}")
    M = np.linalg.matrix_power(phi.sa_matrix, int(n))
    if isinstance(phi, UPMap):
        return UPMap(phi.shape, M, cert=phi.cert)
    return LinearMap(phi.shape, M, certified_positive=phi.certified_positive)


def adjoint(phi):
    """Hilbert-Schmidt adjoint: <adjoint(phi)(R), x> = <R, phi(x)>.

    The canonical basis is orthonormal, so this is the transpose of sa_matrix.
    """
    return LinearMap(phi.shape, phi.sa_matrix.T, certified_positive=phi.certified_positive)


def is_faithful_map(L, tol=1e-9):
    """True iff L kills no nonzero positive element.

    trace o L is a positive functional with density L^dagger(1); since the trace
    is faithful and L positive, L is faithful iff that density is positive
    definite.
    """
    if not L.certified_positive:
        warnings.warn("faithfulness test relies on asserted positivity",
                      UnverifiedPositivityWarning)
    d = Element.from_coords(L.shape, L.sa_matrix.T @ L.shape.unit_coords)
    return min_eigenvalue(d) > tol * max(1.0, norm(d))


def random_psd(shape, rng, rank=None):
    """random positive element with operator norm 1 (Wishart-type per block)"""
    blocks = []
    for n in shape.block_dims:
        k = n if rank is None else min(rank, n)
        G = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        blocks.append(G @ G.conj().T)
    x = Element(shape, blocks)
    return x * (1 / norm(x))


def random_sa(shape, rng):
    return Element.from_coords(shape, rng.standard_normal(shape.D))


@dataclass
class ValidationReport:
    """diagnostics of validate_up; never raises, only reports"""
    cert: str
    certified_positive: bool
    unital_residual: float
    certificate_passed: bool
    certificate_residual: float
    positivity_min_eigenvalue: Optional[float]
    contraction_max_ratio: float
    samples: int
    tol: float
    notes: List[str] = field(default_factory=list)

    @property
    def unital(self):
        return self.unital_residual <= self.tol

    @property
    def positivity_sampled_ok(self):
        if self.positivity_min_eigenvalue is None:
            return True
        return self.positivity_min_eigenvalue >= -self.tol

    @property
    def contraction_ok(self):
        return self.contraction_max_ratio <= 1 + self.tol

    @property
    def passed(self):
        return (self.unital and self.certificate_passed
                and self.positivity_sampled_ok and self.contraction_ok)

    def to_dataframe(self):
        return pd.DataFrame([
            ("unital", self.unital, self.unital_residual),
            (f"certificate ({self.cert})", self.certificate_passed, self.certificate_residual),
            ("positivity sampling", self.positivity_sampled_ok,
             np.nan if self.positivity_min_eigenvalue is None else self.positivity_min_eigenvalue),
            ("sa contraction", self.contraction_ok, self.contraction_max_ratio),
        ], columns=['check', 'passed', 'value'])

    def to_json(self):
        return {
            "cert": self.cert,
            "certified_positive": self.certified_positive,
            "unital_residual": self.unital_residual,
            "certificate_passed": self.certificate_passed,
            "certificate_residual": self.certificate_residual,
            "positivity_min_eigenvalue": self.positivity_min_eigenvalue,
            "contraction_max_ratio": self.contraction_max_ratio,
            "samples": self.samples,
            "passed": self.passed,
            "notes": list(self.notes),
        }


def _certificate_residual(phi):
    """how far the witness is from certifying phi (0.0 is a perfect witness)"""
    if phi.cert is Cert.STOCHASTIC:
        P = np.asarray(phi.cert_data if phi.cert_data is not None else phi.sa_matrix)
        return float(max(-P.min(initial=0.0), np.abs(P.sum(axis=1) - 1).max(initial=0.0),
                         np.abs(P - phi.sa_matrix).max(initial=0.0)))
    if phi.cert in (Cert.CP_KRAUS, Cert.CP_COMPOSED_TRANSPOSE):
        if phi.cert_data is None:
            return 0.0
        worst = 0.0
        for s, t, ops in phi.cert_data:
            if not ops:
                continue
            vecs = np.column_stack([A.reshape(-1) for A in ops])
            choi = vecs @ vecs.conj().T
            worst = max(worst, -float(la.eigvalsh(choi)[0]))
        return worst
    if phi.cert is Cert.CONVEX_MIX and phi.cert_data is not None:
        weights, maps = phi.cert_data
        return float(max([abs(np.sum(weights) - 1), -np.min(weights, initial=0.0)]
                         + [_certificate_residual(m) for m in maps]))
    return 0.0


def validate_up(phi, samples=64, tol=1e-6, seed=0):
    """Diagnostics for a UP map: unitality, the certificate, sampled positivity
    (asserted maps only) and the sa-contraction ||phi(x)|| <= ||x||.

    Args:
        phi(UPMap): map to check
        samples(int): number of random elements per sampled check
        tol(float): residual tolerance
        seed(int): seed of the sampling rng

    Returns:
        ValidationReport
    """
    log.info("Calculating validation diagnostics...")
    rng = np.random.default_rng(seed)
    shape = phi.shape
    notes = []
    cert_residual = _certificate_residual(phi)

    min_eig = None
    if not phi.certified_positive:
        notes.append("positivity asserted, checked by sampling only")
        min_eig = min(min_eigenvalue(apply(phi, random_psd(shape, rng, rank=1 + k % 2)))
                      for k in range(samples))

    ratio = 0.0
    for _ in range(samples):
        x = random_sa(shape, rng)
        ratio = max(ratio, norm(apply(phi, x)) / norm(x))

    return ValidationReport(
        cert=phi.cert.value if isinstance(phi, UPMap) else "linear",
        certified_positive=phi.certified_positive,
        unital_residual=phi.unital_residual if isinstance(phi, UPMap) else float("nan"),
        certificate_passed=cert_residual <= tol,
        certificate_residual=cert_residual,
        positivity_min_eigenvalue=min_eig,
        contraction_max_ratio=float(ratio),
        samples=samples,
        tol=tol,
        notes=notes,
    )
