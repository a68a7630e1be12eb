__all__ = ['example_names',
           'load_example',
           'worked_example',
           'worked_example_golden',
           'lambda_map',
           'three_cycle',
           'transpose_map',
           'instance_seed',
           'random_shape',
           'random_stochastic',
           'random_unital_cp',
           'random_cp_map',
           'random_positive_mix',
           'generate_instance',
           'SUITES',
           ]

import json
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .algebra import AlgebraShape
from .errors import InputError
from .upmap import kraus_map, map_from_document, mix_maps, stochastic_map

DATASETS = Path(__file__).resolve().parent / 'datasets'

SUITES = ['commutative', 'cp', 'positive_mix']


def example_names():
    return sorted(p.stem for p in DATASETS.glob('*.json'))


def load_example(name):
    """bundled example input by name, returns (phi, seed or None)"""
    path = DATASETS / f'{name}.json'
    if not path.exists():
        raise InputError(f"no bundled example {name!r}, choose from {example_names()}")
    return map_from_document(json.loads(path.read_text()))


def worked_example():
    """stochastic map on C^3 with a transient state feeding a 2-cycle"""
    return stochastic_map([[1 / 3, 1 / 3, 1 / 3],
                           [0, 0, 1],
                           [0, 1, 0]])


def worked_example_golden():
    """known asymptotic data of worked_example(), in commutative coordinates"""
    return {
        "E": np.array([[0, 1 / 2, 1 / 2],
                       [0, 1, 0],
                       [0, 0, 1]]),
        "M_inf": np.array([[1 / 2, 1, 0],
                           [1 / 2, 0, 1]]).T,
        "core": np.array([[1.0, 1.0, 1.0]]).T,
        "invariant_state": np.array([0, 1 / 2, 1 / 2]),
        "m_inf_jordan_closed": False,
        "faithful_invariant_state": False,
        "restricted_period": 2,
    }


def lambda_map(lam=0.5):
    """x -> [[a, lam b], [lam c, d]] on M_2, certified by two Kraus operators"""
    if not -1 <= lam <= 1:
        raise InputError(f"lambda should lie in [-1, 1], got {lam}")
    ops = [np.sqrt((1 + lam) / 2) * np.eye(2),
           np.sqrt((1 - lam) / 2) * np.diag([1.0, -1.0])]
    return kraus_map(AlgebraShape((2,)), [(0, 0, ops)])


def three_cycle():
    return stochastic_map(np.roll(np.eye(3), 1, axis=1))


def transpose_map(n=2):
    """transpose on M_n: positive, not completely positive"""
    return kraus_map(AlgebraShape((n,)), [(0, 0, [np.eye(n)])], transpose=True)


def instance_seed(seed, i):
    """seed of the i-th generated instance of a suite run"""
    return int(np.random.SeedSequence([seed, i]).generate_state(1)[0])


def random_shape(rng, max_dim):
    """random block sizes with sum between 2 and max_dim"""
    total = int(rng.integers(2, max(2, max_dim) + 1))
    dims = []
    while total > 0:
        n = int(rng.integers(1, total + 1))
        dims.append(n)
        total -= n
    return AlgebraShape(tuple(dims))


def random_stochastic(rng, max_dim=8):
    """Random row-stochastic matrix on 2..max_dim states.

    Sparse masks produce transient states, several closed classes and
    (through a permutation backbone) periodic classes.
    """
    n = int(rng.integers(2, max(2, max_dim) + 1))
    if rng.random() < 1 / 3:
        # permutation backbone on a random subset, random rows elsewhere
        P = np.eye(n)[rng.permutation(n)]
        rows = rng.random(n) < 0.4
        mask = rng.random((n, n)) < 0.5
        P[rows] = mask[rows] * rng.uniform(0.2, 1, (rows.sum(), n))
    else:
        density = rng.uniform(0.2, 0.7)
        P = (rng.random((n, n)) < density) * rng.uniform(0.2, 1, (n, n))
    for i in np.flatnonzero(P.sum(axis=1) == 0):
        P[i, rng.integers(n)] = 1.0
    return stochastic_map(P / P.sum(axis=1, keepdims=True))


def _generic_family(rng, shape, t, sources, n_ops=2):
    """Kraus operators into block t from the given source blocks with
    sum A A^* = 1, via B = S^(-1/2) A"""
    n_t = shape.block_dims[t]
    # S needs full rank
    n_ops = max(n_ops, -(-n_t // sum(shape.block_dims[s] for s in sources)))
    raw = [(s, rng.standard_normal((n_t, shape.block_dims[s]))
            + 1j * rng.standard_normal((n_t, shape.block_dims[s])))
           for s in sources for _ in range(n_ops)]
    S = sum(A @ A.conj().T for _, A in raw)
    w, V = la.eigh(S)
    S_inv_sqrt = V @ np.diag(w ** -0.5) @ V.conj().T
    return [(s, t, [S_inv_sqrt @ A]) for s, A in raw]


def _monomial_unitary(rng, n, q):
    """permutation matrix times phases exp(2 pi i k / q)"""
    phases = np.exp(2j * np.pi * rng.integers(q, size=n) / q)
    return np.eye(n)[rng.permutation(n)] * phases


def random_unital_cp(rng, shape):
    """generic unital CP map, every target fed from a random set of sources"""
    families = []
    for t in range(shape.n_blocks):
        sources = [s for s in range(shape.n_blocks) if rng.random() < 0.6] or [t]
        families.extend(_generic_family(rng, shape, t, sources))
    return kraus_map(shape, families)


def _routed_families(rng, shape, routed_prob=0.6):
    """Some target blocks receive a single monomial unitary from a source block
    of the same size (permuted within each size class); the others receive a
    generic channel with at least two Kraus operators per source. Phases are
    4th roots of unity at most, so every peripheral eigenvalue is a root of
    unity of small order and the powers have a small period."""
    q = int(rng.choice([1, 2, 4]))
    sizes = np.array(shape.block_dims)
    routing = np.arange(shape.n_blocks)
    for n in set(shape.block_dims):
        idx = np.flatnonzero(sizes == n)
        routing[idx] = rng.permutation(idx)
    families = []
    for t in range(shape.n_blocks):
        if rng.random() < routed_prob:
            s = int(routing[t])
            families.append((s, t, [_monomial_unitary(rng, shape.block_dims[t], q)]))
        else:
            sources = [s for s in range(shape.n_blocks) if rng.random() < 0.5] or [t]
            families.extend(_generic_family(rng, shape, t, sources))
    return families


def random_cp_map(rng, max_dim=4):
    """random unital CP map: generic or with routed unitary blocks"""
    shape = random_shape(rng, max_dim)
    if rng.random() < 0.3:
        return random_unital_cp(rng, shape)
    return kraus_map(shape, _routed_families(rng, shape))


def random_positive_mix(rng, max_dim=4):
    """positive, generally not CP: a CP map followed by the transpose, possibly
    mixed with a CP map"""
    shape = random_shape(rng, max_dim)
    transposed = kraus_map(shape, _routed_families(rng, shape), transpose=True)
    if rng.random() < 0.3:
        return transposed
    w = float(rng.uniform(0.2, 0.8))
    return mix_maps([w, 1 - w], [transposed, kraus_map(shape, _routed_families(rng, shape))])


def generate_instance(suite, seed, max_dim=None):
    """the map of one suite instance, fully determined by (suite, seed, max_dim)"""
    rng = np.random.default_rng(seed)
    if suite == 'commutative':
        return random_stochastic(rng, 8 if max_dim is None else max_dim)
    if suite == 'cp':
        return random_cp_map(rng, 4 if max_dim is None else max_dim)
    if suite == 'positive_mix':
        return random_positive_mix(rng, 4 if max_dim is None else max_dim)
    raise InputError(f"unknown suite {suite!r}, choose from {SUITES}")
