"""
Finite-dimensional *-algebras as direct sums of full matrix blocks.

An algebra M = M_{n_1} + ... + M_{n_B} is described by an AlgebraShape. Elements
carry one complex matrix per block. All subspace calculus happens on the real
vector space of self-adjoint elements, coordinatized by a canonical orthonormal
basis (per block: diagonal matrix units, then symmetric/antisymmetric
off-diagonal pairs scaled to Hilbert-Schmidt norm 1, in row-major order). Under
the Hilbert-Schmidt inner product these coordinates are real and orthonormal,
so a self-adjoint subspace is just an orthonormal set of real column vectors.
"""
__all__ = ['AlgebraShape',
           'Element',
           'SaSubspace',
           'jordan_product',
           'hs_inner',
           'norm',
           'eigenvalues',
           'min_eigenvalue',
           'spectral_projections',
           'is_psd',
           'subspace_span',
           'span_coords',
           'subspace_intersect',
           'subspace_preimage',
           'subspace_contains',
           'subspace_sum',
           'structure_constants',
           'jordan_coords',
           'jordan_gram',
           'nullspace',
           'trace_norms',
           'RANK_TOL',
           'RANK_ATOL',
           ]

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from .errors import InputError, NumericalToleranceError

log = logging.getLogger(__name__)

RANK_TOL = 1e-9
RANK_ATOL = 1e-12


@dataclass(frozen=True)
class AlgebraShape:
    """block sizes [n_1, ..., n_B] of a finite-dimensional *-algebra"""
    block_dims: tuple

    def __post_init__(self):
        dims = self.block_dims
        if isinstance(dims, (int, np.integer)):
            dims = (dims,)
        try:
            dims = tuple(dims)
        except TypeError:
            raise InputError(f"block_dims should be a list of ints, got {dims!r}")
        if len(dims) == 0:
            raise InputError("an algebra needs at least one block")
        for n in dims:
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
                raise InputError(f"block sizes should be positive ints, got {dims!r}")
        object.__setattr__(self, 'block_dims', tuple(int(n) for n in dims))

    @property
    def D(self):
        """complex dimension of the algebra (= real dimension of its sa part)"""
        return sum(n * n for n in self.block_dims)

    @property
    def n(self):
        """size of the ambient matrix algebra the blocks sit in"""
        return sum(self.block_dims)

    @property
    def n_blocks(self):
        return len(self.block_dims)

    @property
    def is_commutative(self):
        return all(n == 1 for n in self.block_dims)

    @property
    def slices(self):
        """slice of every block in the flat (row-major, block by block) vector"""
        out, start = [], 0
        for n in self.block_dims:
            out.append(slice(start, start + n * n))
            start += n * n
        return out

    @property
    def unit_coords(self):
        """sa coordinates of the unit"""
        return Element.unit(self).sa_coords()

    def to_json(self):
        return list(self.block_dims)

    @classmethod
    def from_json(cls, data, pointer="/shape"):
        if not isinstance(data, list):
            raise InputError("shape should be a list of positive ints", pointer=pointer)
        for i, n in enumerate(data):
            if isinstance(n, bool) or not isinstance(n, int) or n < 1:
                raise InputError(f"block size should be a positive int, got {n!r}",
                                 pointer=f"{pointer}/{i}")
        return cls(tuple(data))

    def __repr__(self):
        return f"AlgebraShape({list(self.block_dims)})"


@lru_cache(maxsize=None)
def _block_basis(n):
    """(n*n, n, n) stack of the canonical self-adjoint basis of M_n"""
    basis = np.zeros((n * n, n, n), dtype=complex)
    s = 1 / np.sqrt(2)
    k = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                basis[k, i, i] = 1.0
            elif i < j:
                basis[k, i, j] = basis[k, j, i] = s
            else:
                # antisymmetric partner of the pair (j, i)
                basis[k, j, i] = -1j * s
                basis[k, i, j] = 1j * s
            k += 1
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=None)
def _basis_matrix(block_dims):
    """unitary D x D matrix whose columns are the flattened basis elements"""
    shape = AlgebraShape(block_dims)
    U = np.zeros((shape.D, shape.D), dtype=complex)
    for n, sl in zip(block_dims, shape.slices):
        U[sl, sl] = _block_basis(n).reshape(n * n, n * n).T
    U.setflags(write=False)
    return U


@lru_cache(maxsize=None)
def _structure_constants(block_dims):
    shape = AlgebraShape(block_dims)
    D = shape.D
    gamma = np.zeros((D, D, D))
    for n, sl in zip(block_dims, shape.slices):
        b = _block_basis(n)
        prod = np.einsum('inm,jmp->ijnp', b, b)
        jordan = (prod + prod.transpose(1, 0, 2, 3)) / 2
        gamma[sl, sl, sl] = np.einsum('knp,ijnp->ijk', b.conj(), jordan).real
    gamma.setflags(write=False)
    return gamma


def structure_constants(shape):
    """Jordan structure constants G[i,j,k] with e_i o e_j = sum_k G[i,j,k] e_k
    on the canonical self-adjoint basis."""
    return _structure_constants(shape.block_dims)


def jordan_coords(shape, a, b):
    """Jordan product in sa coordinates"""
    return np.einsum('ijk,i,j->k', structure_constants(shape), a, b)


def jordan_gram(shape, d):
    """real symmetric matrix J with J[i,j] = <d, e_i o e_j> for self-adjoint d
    given in sa coordinates"""
    return np.einsum('ijk,k->ij', structure_constants(shape), d)


def _parse_complex(value, pointer):
    if isinstance(value, bool):
        raise InputError(f"expected a number or [re, im], got {value!r}", pointer=pointer)
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return complex(value[0], value[1])
    raise InputError(f"expected a number or [re, im], got {value!r}", pointer=pointer)


def parse_matrix(data, rows, cols, pointer):
    """parse a json matrix with real or [re, im] entries"""
    if not isinstance(data, list) or len(data) != rows:
        raise InputError(f"expected a {rows}x{cols} matrix", pointer=pointer)
    out = np.zeros((rows, cols), dtype=complex)
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != cols:
            raise InputError(f"expected a row of length {cols}", pointer=f"{pointer}/{i}")
        for j, value in enumerate(row):
            out[i, j] = _parse_complex(value, f"{pointer}/{i}/{j}")
    return out


def matrix_to_json(matrix):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(matrix)]


class Element:
    """An element of the algebra: one complex n_i x n_i matrix per block.

    Elements are immutable values; arithmetic returns new elements.
    """
    __slots__ = ('shape', 'blocks')

    def __init__(self, shape, blocks):
        blocks = list(blocks)
        if len(blocks) != shape.n_blocks:
            raise InputError(f"{shape} needs {shape.n_blocks} blocks, got {len(blocks)}",
                             code="BLOCK_MISMATCH")
        frozen = []
        for n, block in zip(shape.block_dims, blocks):
            block = np.array(block, dtype=complex)
            if block.shape != (n, n):
                raise InputError(f"expected a {n}x{n} block, got {block.shape}",
                                 code="BLOCK_MISMATCH")
            block.setflags(write=False)
            frozen.append(block)
        object.__setattr__(self, 'shape', shape)
        object.__setattr__(self, 'blocks', tuple(frozen))

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    @classmethod
    def unit(cls, shape):
        return cls(shape, [np.eye(n) for n in shape.block_dims])

    @classmethod
    def zero(cls, shape):
        return cls(shape, [np.zeros((n, n)) for n in shape.block_dims])

    @classmethod
    def diagonal(cls, shape, values):
        """element with the given values on the diagonal, running through the
        blocks in order (so for a commutative shape: the function (v_1, ..., v_n))"""
        values = np.asarray(values, dtype=complex)
        if values.shape != (shape.n,):
            raise InputError(f"expected {shape.n} diagonal values, got {values.shape}",
                             code="BLOCK_MISMATCH")
        blocks, start = [], 0
        for n in shape.block_dims:
            blocks.append(np.diag(values[start:start + n]))
            start += n
        return cls(shape, blocks)

    @classmethod
    def from_vector(cls, shape, vector):
        vector = np.asarray(vector, dtype=complex)
        return cls(shape, [vector[sl].reshape(n, n)
                           for n, sl in zip(shape.block_dims, shape.slices)])

    @classmethod
    def from_coords(cls, shape, coords):
        """element with (real or complex) coordinates on the canonical sa basis"""
        coords = np.asarray(coords)
        if coords.shape != (shape.D,):
            raise InputError(f"expected {shape.D} coordinates, got {coords.shape}",
                             code="BLOCK_MISMATCH")
        return cls.from_vector(shape, _basis_matrix(shape.block_dims) @ coords)

    @classmethod
    def from_json(cls, shape, data, pointer=""):
        if not isinstance(data, dict) or 'blocks' not in data:
            raise InputError('an element should look like {"blocks": [...]}', pointer=pointer)
        blocks = data['blocks']
        if not isinstance(blocks, list) or len(blocks) != shape.n_blocks:
            raise InputError(f"expected {shape.n_blocks} blocks", code="BLOCK_MISMATCH",
                             pointer=f"{pointer}/blocks")
        return cls(shape, [parse_matrix(b, n, n, f"{pointer}/blocks/{i}")
                           for i, (n, b) in enumerate(zip(shape.block_dims, blocks))])

    def to_json(self):
        return {"blocks": [matrix_to_json(b) for b in self.blocks]}

    def to_vector(self):
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    def coords(self):
        """complex coordinates on the canonical sa basis"""
        return _basis_matrix(self.shape.block_dims).conj().T @ self.to_vector()

    def sa_coords(self, tol=RANK_TOL):
        """real coordinates of a self-adjoint element"""
        if not self.is_self_adjoint(tol):
            raise InputError("element is not self-adjoint", code="NOT_SELF_ADJOINT")
        return self.coords().real

    def adjoint(self):
        return Element(self.shape, [b.conj().T for b in self.blocks])

    def hermitian_parts(self):
        """(h, k), both self-adjoint, with x = h + i k"""
        adj = self.adjoint()
        return (self + adj) * 0.5, (self - adj) * (-0.5j)

    def is_self_adjoint(self, tol=RANK_TOL):
        defect = np.linalg.norm((self - self.adjoint()).to_vector())
        return defect <= tol * (1 + np.linalg.norm(self.to_vector()))

    def allclose(self, other, atol=1e-9):
        _check_same_shape(self, other)
        return bool(np.allclose(self.to_vector(), other.to_vector(), rtol=0, atol=atol))

    def __add__(self, other):
        _check_same_shape(self, other)
        return Element(self.shape, [a + b for a, b in zip(self.blocks, other.blocks)])

    def __sub__(self, other):
        _check_same_shape(self, other)
        return Element(self.shape, [a - b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return Element(self.shape, [-a for a in self.blocks])

    def __mul__(self, scalar):
        return Element(self.shape, [scalar * a for a in self.blocks])

    __rmul__ = __mul__

    def __matmul__(self, other):
        _check_same_shape(self, other)
        return Element(self.shape, [a @ b for a, b in zip(self.blocks, other.blocks)])

    def __repr__(self):
        if self.shape.is_commutative:
            return f"Element({np.round([b[0, 0] for b in self.blocks], 6).tolist()})"
        return f"Element({self.shape}, blocks={[np.round(b, 6).tolist() for b in self.blocks]})"


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise InputError(f"shapes differ: {x.shape} vs {y.shape}", code="BLOCK_MISMATCH")


def jordan_product(x, y):
    """(xy + yx)/2, blockwise"""
    _check_same_shape(x, y)
    return Element(x.shape, [(a @ b + b @ a) / 2 for a, b in zip(x.blocks, y.blocks)])


def hs_inner(x, y):
    """Hilbert-Schmidt inner product sum_b trace(x_b^* y_b)"""
    _check_same_shape(x, y)
    return complex(np.vdot(x.to_vector(), y.to_vector()))


def norm(x, kind="operator"):
    """operator norm (largest singular value over all blocks) or trace norm
    (sum of all singular values)"""
    if kind not in ("operator", "trace"):
        raise InputError(f"norm kind should be 'operator' or 'trace', got {kind!r}")
    svals = [la.svdvals(b) for b in x.blocks]
    if kind == "operator":
        return float(max(s.max() if s.size else 0.0 for s in svals))
    return float(sum(s.sum() for s in svals))


def eigenvalues(x, tol=RANK_TOL):
    """ascending eigenvalues of a self-adjoint element, all blocks together"""
    if not x.is_self_adjoint(tol):
        raise InputError("element is not self-adjoint", code="NOT_SELF_ADJOINT")
    return np.sort(np.concatenate([la.eigvalsh((b + b.conj().T) / 2) for b in x.blocks]))


def min_eigenvalue(x, tol=RANK_TOL):
    return float(eigenvalues(x, tol)[0])


def spectral_projections(x, tol=RANK_TOL):
    """Spectral decomposition x = sum_k lambda_k p_k of a self-adjoint element.

    Eigenvalues closer than tol * max(1, ||x||) are clustered together.

    Returns:
        list of (eigenvalue, projection) with eigenvalues in descending order
    """
    if not x.is_self_adjoint(tol):
        raise InputError("element is not self-adjoint", code="NOT_SELF_ADJOINT")
    pairs = []
    for b_idx, block in enumerate(x.blocks):
        vals, vecs = la.eigh((block + block.conj().T) / 2)
        pairs.extend((float(v), b_idx, vecs[:, i]) for i, v in enumerate(vals))
    pairs.sort(key=lambda p: -p[0])
    gap = tol * max(1.0, norm(x))

    clusters = []
    for pair in pairs:
        if clusters and clusters[-1][-1][0] - pair[0] <= gap:
            clusters[-1].append(pair)
        else:
            clusters.append([pair])

    out = []
    for cluster in clusters:
        blocks = [np.zeros((n, n), dtype=complex) for n in x.shape.block_dims]
        for _, b_idx, v in cluster:
            blocks[b_idx] = blocks[b_idx] + np.outer(v, v.conj())
        out.append((float(np.mean([p[0] for p in cluster])), Element(x.shape, blocks)))
    return out


def is_psd(x, tol=RANK_TOL):
    """self-adjoint within tol with all eigenvalues >= -tol * (1 + ||x||)"""
    if not x.is_self_adjoint(tol):
        return False
    return min_eigenvalue(x, tol) >= -tol * (1 + norm(x))


def _rank(values, threshold, what):
    values = np.asarray(values)
    ambiguous = values[(values > 0.1 * threshold) & (values < 10 * threshold)]
    if ambiguous.size:
        raise NumericalToleranceError(
            f"{what}: singular value {ambiguous[0]:.3e} too close to the rank "
            f"threshold {threshold:.3e}, instance is ill-conditioned",
            code="RANK_TOL_AMBIGUOUS")
    return int(np.sum(values >= threshold))


def _canonical_columns(Q):
    """flip column signs so the first significant entry of every column is positive"""
    Q = np.array(Q, dtype=float)
    for j in range(Q.shape[1]):
        col = Q[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-9 * np.abs(col).max())
        if big.size and col[big[0]] < 0:
            Q[:, j] = -col
    return Q


def nullspace(A, tol=RANK_TOL, scale=None, what="nullspace"):
    """orthonormal basis (columns) of the real nullspace of A

    Singular values count as zero below max(tol * scale, RANK_ATOL), with scale
    defaulting to the largest singular value of A.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n)
    _, s, vh = la.svd(A, full_matrices=True)
    if scale is None:
        scale = s[0] if s.size else 0.0
    rank = _rank(s, max(tol * scale, RANK_ATOL), what)
    return _canonical_columns(vh[rank:].T)


def _orthonormal_range(A, tol=RANK_TOL, scale=None, what="span"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    u, s, _ = la.svd(A, full_matrices=False)
    if scale is None:
        scale = s[0] if s.size else 0.0
    rank = _rank(s, max(tol * scale, RANK_ATOL), what)
    return _canonical_columns(u[:, :rank])


@dataclass(frozen=True, eq=False)
class SaSubspace:
    """Real subspace of the self-adjoint part, stored as orthonormal columns of
    sa coordinates. Every subspace of interest is *-closed, so this also
    determines the complex subspace S^sa + i S^sa."""
    shape: AlgebraShape
    coords: np.ndarray

    def __post_init__(self):
        Q = np.array(self.coords, dtype=float).reshape(self.shape.D, -1)
        if not np.allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-8):
            raise InputError("subspace basis is not orthonormal")
        Q.setflags(write=False)
        object.__setattr__(self, 'coords', Q)

    @classmethod
    def full(cls, shape):
        return cls(shape, np.eye(shape.D))

    @classmethod
    def zero(cls, shape):
        return cls(shape, np.zeros((shape.D, 0)))

    @property
    def dim(self):
        return self.coords.shape[1]

    @property
    def basis(self):
        return [Element.from_coords(self.shape, q) for q in self.coords.T]

    @property
    def projector(self):
        return self.coords @ self.coords.T

    def complement(self):
        """Hilbert-Schmidt orthogonal complement inside the sa part"""
        return SaSubspace(self.shape, nullspace(self.coords.T, scale=1.0))

    def residual(self, c):
        """distance of sa coordinate vector c to the subspace"""
        c = np.asarray(c, dtype=float)
        return float(np.linalg.norm(c - self.coords @ (self.coords.T @ c)))

    def contains_coords(self, c, tol=RANK_TOL):
        return self.residual(c) <= tol * (1 + np.linalg.norm(c))

    def contains(self, x, tol=RANK_TOL):
        return subspace_contains(self, x, tol)

    def is_subspace_of(self, other, tol=RANK_TOL):
        return all(other.contains_coords(q, tol) for q in self.coords.T)

    def equals(self, other, tol=RANK_TOL):
        return self.dim == other.dim and self.is_subspace_of(other, tol)

    def random_element(self, rng):
        """random self-adjoint element of the subspace (Gaussian coefficients)"""
        return Element.from_coords(self.shape, self.coords @ rng.standard_normal(self.dim))

    def to_json(self):
        return [x.to_json() for x in self.basis]

    def __repr__(self):
        return f"SaSubspace({self.shape}, dim={self.dim})"


def span_coords(shape, vectors, tol=RANK_TOL, scale=None):
    """SaSubspace spanned by the columns of a D x m real coordinate matrix"""
    vectors = np.asarray(vectors, dtype=float).reshape(shape.D, -1)
    return SaSubspace(shape, _orthonormal_range(vectors, tol, scale, what="subspace_span"))


def subspace_span(spanners, tol=RANK_TOL, shape=None):
    """Real span of a list of elements.

    Non-self-adjoint spanners contribute both their self-adjoint parts. The
    rank is decided by singular values >= tol * (largest singular value).

    Args:
        spanners(list): list of Element
        tol(float): relative rank tolerance, defaults to 1e-9
        shape(AlgebraShape): needed when spanners is empty

    Returns:
        SaSubspace
    """
    spanners = list(spanners)
    if not spanners:
        if shape is None:
            raise InputError("shape is needed to span an empty list")
        return SaSubspace.zero(shape)
    shape = spanners[0].shape
    cols = []
    for x in spanners:
        _check_same_shape(spanners[0], x)
        c = x.coords()
        cols.append(c.real)
        cols.append(c.imag)
    return span_coords(shape, np.column_stack(cols), tol)


def subspace_sum(S, T, tol=RANK_TOL):
    if S.shape != T.shape:
        raise InputError(f"shapes differ: {S.shape} vs {T.shape}", code="BLOCK_MISMATCH")
    return span_coords(S.shape, np.hstack([S.coords, T.coords]), tol, scale=1.0)


def subspace_intersect(S, T, tol=RANK_TOL):
    """S n T as the nullspace of the stacked complement projectors"""
    if S.shape != T.shape:
        raise InputError(f"shapes differ: {S.shape} vs {T.shape}", code="BLOCK_MISMATCH")
    eye = np.eye(S.shape.D)
    A = np.vstack([eye - S.projector, eye - T.projector])
    return SaSubspace(S.shape, nullspace(A, tol, scale=1.0, what="subspace_intersect"))


def subspace_preimage(L, S, tol=RANK_TOL):
    """{x self-adjoint: L(x) in S} for a linear map L given on sa coordinates"""
    if L.shape != S.shape:
        raise InputError(f"shapes differ: {L.shape} vs {S.shape}", code="BLOCK_MISMATCH")
    A = (np.eye(S.shape.D) - S.projector) @ L.sa_matrix
    scale = max(1.0, la.norm(L.sa_matrix, 2))
    return SaSubspace(S.shape, nullspace(A, tol, scale=scale, what="subspace_preimage"))


def subspace_contains(S, x, tol=RANK_TOL):
    """True iff the residual of x after projecting onto S has HS-norm
    <= tol * (1 + ||x||_HS)"""
    if not x.is_self_adjoint(tol):
        raise InputError("element is not self-adjoint", code="NOT_SELF_ADJOINT")
    _check_same_shape(Element.zero(S.shape), x)
    return S.contains_coords(x.coords().real, tol)


def trace_norms(shape, coords):
    """trace norms of many self-adjoint elements given as rows of sa coordinates"""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    flat = coords @ _basis_matrix(shape.block_dims).T
    total = np.zeros(coords.shape[0])
    for n, sl in zip(shape.block_dims, shape.slices):
        blocks = flat[:, sl].reshape(-1, n, n)
        total += np.abs(np.linalg.eigvalsh((blocks + blocks.conj().transpose(0, 2, 1)) / 2)).sum(axis=1)
    return total
