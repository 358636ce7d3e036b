"""Operator algebra on the N-spin Hilbert space.

Local operators carry an explicit support region; embedding into the full
tensor product follows the lattice's row-major site ordering (site 0 is the
most significant tensor factor). Global operators are dense complex matrices
with support metadata, feasible up to N ~ 12.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .lattice import Lattice, Region

# single-site constants (spin-1/2)
ID2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = {"I": ID2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# uniform single-site norm bound for spin operators S^a = sigma^a / 2
LOCAL_NORM_BOUND = 0.5


@dataclass
class LocalOperator:
    """Operator on the tensor factors of `support` (ordered as listed)."""

    support: Region
    matrix: np.ndarray
    q: int = 2

    def __post_init__(self):
        if len(self.support) == 0:
            raise ValueError("local operator needs a nonempty support")
        dim = self.q ** len(self.support)
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (dim, dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match support size "
                f"{len(self.support)} (expected {dim}x{dim})")
        self.matrix = m

    def dagger(self) -> "LocalOperator":
        return LocalOperator(self.support, self.matrix.conj().T, self.q)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


@dataclass
class GlobalOperator:
    """Dense operator on the full 2^N-dimensional space.

    `support` is an over-approximation of the region where the operator acts
    nontrivially; `acts_trivially_outside` verifies it.
    """

    lattice: Lattice
    matrix: np.ndarray
    support: Region = None

    def __post_init__(self):
        dim = 2**self.lattice.n_sites
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape}, expected {dim}x{dim}")
        self.matrix = m
        if self.support is None:
            self.support = self.lattice.full_region()

    def dagger(self) -> "GlobalOperator":
        return GlobalOperator(self.lattice, self.matrix.conj().T, self.support)

    def __add__(self, other):
        _check_same_space(self, other)
        return GlobalOperator(self.lattice, self.matrix + other.matrix,
                              self.support.union(other.support))

    def __sub__(self, other):
        _check_same_space(self, other)
        return GlobalOperator(self.lattice, self.matrix - other.matrix,
                              self.support.union(other.support))

    def __mul__(self, scalar):
        return GlobalOperator(self.lattice, self.matrix * scalar, self.support)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __matmul__(self, other):
        _check_same_space(self, other)
        return GlobalOperator(self.lattice, self.matrix @ other.matrix,
                              self.support.union(other.support))

    def is_diagonal(self, tol: float = 0.0) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return np.abs(off).max() <= tol


def _check_same_space(a: GlobalOperator, b: GlobalOperator):
    if a.lattice != b.lattice:
        raise ValueError("operators live on different lattices")


def embed_matrix(matrix: np.ndarray, sites, n_sites: int) -> np.ndarray:
    """Tensor a k-site matrix (factor order = `sites`) with identity on the
    remaining sites and permute factors into global site order."""
    k = len(sites)
    m = np.asarray(matrix, dtype=complex)
    if k == n_sites and tuple(sites) == tuple(range(n_sites)):
        return m.copy()
    rest = [s for s in range(n_sites) if s not in sites]
    big = np.kron(m, np.eye(2 ** (n_sites - k), dtype=complex))
    t = big.reshape((2,) * (2 * n_sites))
    order = list(sites) + rest
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n_sites + i for i in inv])
    return np.ascontiguousarray(t.reshape(2**n_sites, 2**n_sites))


def embed(op: LocalOperator, lattice: Lattice) -> GlobalOperator:
    if op.support.lattice != lattice:
        raise ValueError("operator support belongs to a different lattice")
    full = embed_matrix(op.matrix, list(op.support.sites), lattice.n_sites)
    return GlobalOperator(lattice, full, op.support)


def single_site(lattice: Lattice, site: int, matrix: np.ndarray) -> GlobalOperator:
    """Embed a 2x2 matrix at one site."""
    return embed(LocalOperator(Region(lattice, [site]), matrix), lattice)


def extensive_observable(template, region: Region) -> GlobalOperator:
    """Sum of embedded local operators, one per site of the region.

    `template` maps a site index to a LocalOperator supported near that site.
    """
    lattice = region.lattice
    dim = 2**lattice.n_sites
    total = np.zeros((dim, dim), dtype=complex)
    sup = Region(lattice, [])
    for x in region:
        op = template(x)
        total += embed(op, lattice).matrix
        sup = sup.union(op.support)
    return GlobalOperator(lattice, total, sup)


def total_spin(lattice: Lattice, axis: str) -> GlobalOperator:
    """Extensive spin component: sum over sites of sigma^axis / 2."""
    pauli = PAULI[axis.upper()]

    def template(x):
        return LocalOperator(Region(lattice, [x]), pauli / 2)

    return extensive_observable(template, lattice.full_region())


def commutator(a: GlobalOperator, b: GlobalOperator) -> GlobalOperator:
    _check_same_space(a, b)
    return GlobalOperator(a.lattice, a.matrix @ b.matrix - b.matrix @ a.matrix,
                          a.support.union(b.support))


def adjoint(a: GlobalOperator) -> GlobalOperator:
    return a.dagger()


def hs_inner(a: GlobalOperator, b: GlobalOperator) -> complex:
    """Hilbert-Schmidt inner product trace(A† B)."""
    _check_same_space(a, b)
    return complex(np.vdot(a.matrix, b.matrix))


def op_norm(a) -> float:
    """Spectral norm (largest singular value).

    Accepts a GlobalOperator or a plain matrix. Uses a full SVD for small
    dimensions and an iterative largest-singular-value solve above that.
    """
    m = a.matrix if isinstance(a, GlobalOperator) else np.asarray(a)
    if m.shape[0] <= 1024:
        return float(np.linalg.norm(m, 2))
    scale = float(np.abs(m).max())
    if scale == 0.0:
        return 0.0
    # ARPACK is unreliable on nearly zero matrices; the Frobenius norm
    # bounds the spectral norm from above, so tiny inputs are settled
    # without an iterative solve.
    fro = float(np.linalg.norm(m))
    if fro < 1e-13:
        return fro
    s = scipy.sparse.linalg.svds(m, k=1, return_singular_vectors=False,
                                 maxiter=5000)
    return float(s[0])


def acts_trivially_outside(op: GlobalOperator, region: Region,
                           tol: float = 1e-12) -> bool:
    """Check that op = (something on region) tensor identity.

    Implemented by comparing op against the embedding of its conditional
    expectation onto the region.
    """
    restricted = conditional_expectation(op, region)
    back = embed_matrix(restricted, list(region.sites), op.lattice.n_sites)
    return np.abs(back - op.matrix).max() <= tol


def conditional_expectation(op: GlobalOperator, region: Region) -> np.ndarray:
    """Normalized partial trace over the complement of the region.

    This is the best approximation (in several senses) of op by an operator
    supported on the region; it is a contraction in operator norm.
    """
    n = op.lattice.n_sites
    sites = list(region.sites)
    rest = [s for s in range(n) if s not in sites]
    k = len(sites)
    t = op.matrix.reshape((2,) * (2 * n))
    perm = sites + rest + [n + s for s in sites] + [n + s for s in rest]
    t = t.transpose(perm).reshape(2**k, 2 ** (n - k), 2**k, 2 ** (n - k))
    return np.einsum("aibi->ab", t) / 2 ** (n - k)


def effective_support(op: GlobalOperator, tol: float = 1e-12) -> Region:
    """Smallest region outside which the operator acts trivially.

    Greedy per-site test; cost is one partial trace per site.
    """
    lattice = op.lattice
    keep = []
    for x in lattice.sites():
        others = Region(lattice, [s for s in lattice.sites() if s != x])
        if not acts_trivially_outside(op, others, tol):
            keep.append(x)
    if not keep:
        # proportional to the identity; report a minimal one-site support
        keep = [0]
    return Region(lattice, keep)


def identity(lattice: Lattice) -> GlobalOperator:
    return GlobalOperator(lattice, np.eye(2**lattice.n_sites, dtype=complex),
                          Region(lattice, [0]))


def pauli_string(lattice: Lattice, labels: dict) -> GlobalOperator:
    """Product of single-site Paulis, e.g. labels={0: 'X', 3: 'Z'}."""
    sites = sorted(labels)
    m = np.array([[1.0]], dtype=complex)
    for s in sites:
        m = np.kron(m, PAULI[labels[s].upper()])
    if not sites:
        return identity(lattice)
    op = LocalOperator(Region(lattice, sites), m)
    return embed(op, lattice)
