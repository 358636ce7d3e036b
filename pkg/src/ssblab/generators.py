"""Local Liouvillians in the Heisenberg picture.

The generator convention is

    L_x[A] = i [H_x, A] + sum_i ( L_i A L_i^dag - (1/2) {L_i L_i^dag, A} )

which is the Heisenberg dual of a Schrodinger-picture master equation whose
jump operators are the adjoints L_i^dag. Every dissipator of this form is
unital (it annihilates the identity) regardless of the jumps.

Provided generators:
  * heat_bath_ising  -- strictly local (radius 1) classical-spin heat bath,
    reversible with respect to the Ising Gibbs state at the same temperature.
  * davies_generator -- weak-coupling-type generator from the Bohr-frequency
    decomposition of coupling operators; reversible w.r.t. Gibbs(H, beta).
  * pair_singlet_generator -- strictly local SU(2)-symmetric generator whose
    jumps project neighboring pairs onto their singlet state; it is reversible
    w.r.t. the fully symmetric (maximal total spin) multiplet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lattice import Lattice, Region
from .algebra import (GlobalOperator, LocalOperator, ID2, PAULI_X, PAULI_Y,
                      PAULI_Z, embed_matrix, embed, identity, op_norm,
                      effective_support, conditional_expectation)


# ---------------------------------------------------------------------------
# rate functions

def glauber_rate(delta_e: float, beta: float) -> float:
    """Heat-bath acceptance rate 1 / (1 + exp(beta * dE)).

    beta = inf is taken as the limit: 1 for dE < 0, 1/2 at dE = 0, 0 above.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if math.isinf(beta):
        if delta_e < 0:
            return 1.0
        return 0.5 if delta_e == 0 else 0.0
    x = beta * delta_e
    if x > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(x))


def kms_rate(omega: float, beta: float) -> float:
    """Bohr-frequency rate 1 / (1 + exp(-beta * omega)).

    Satisfies the KMS condition gamma(-w) = exp(-beta w) gamma(w).
    """
    return glauber_rate(-omega, beta)


def kms_defect(rate_fn, beta: float, omegas=(0.25, 0.5, 1.0, 2.0)) -> float:
    if math.isinf(beta):
        return max(abs(rate_fn(-w, beta)) for w in omegas)
    return max(abs(rate_fn(-w, beta) - math.exp(-beta * w) * rate_fn(w, beta))
               for w in omegas)


# ---------------------------------------------------------------------------
# model Hamiltonians

def ising_hamiltonian(lattice: Lattice, J: float = 1.0) -> GlobalOperator:
    """H = -J sum_<xy> sigma^z_x sigma^z_y (one bond per axis direction)."""
    n = lattice.n_sites
    diag = np.zeros(2**n)
    for x, y in lattice_edges(lattice):
        diag -= J * _sz_diag(x, n) * _sz_diag(y, n)
    return GlobalOperator(lattice, np.diag(diag).astype(complex))


def heisenberg_hamiltonian(lattice: Lattice, J: float = 1.0,
                           delta_z: float = 1.0) -> GlobalOperator:
    """Ferromagnetic exchange -J sum_<xy> (SxSx + SySy + delta_z SzSz)."""
    n = lattice.n_sites
    dim = 2**n
    H = np.zeros((dim, dim), dtype=complex)
    for x, y in lattice_edges(lattice):
        for pauli, w in ((PAULI_X, 1.0), (PAULI_Y, 1.0), (PAULI_Z, delta_z)):
            bond = np.kron(pauli / 2, pauli / 2)
            H -= J * w * embed_matrix(bond, [x, y], n)
    return GlobalOperator(lattice, H)


def lattice_edges(lattice: Lattice):
    """Nearest-neighbor bonds, one per site and axis (+1 direction)."""
    edges = []
    for x in lattice.sites():
        cx = lattice.coord(x)
        for axis in range(lattice.d):
            c = list(cx)
            c[axis] = (c[axis] + 1) % lattice.L
            edges.append((x, lattice.site(c)))
    return edges


def _sz_diag(site: int, n: int) -> np.ndarray:
    """Diagonal of sigma^z at a site (site 0 = most significant bit)."""
    idx = np.arange(2**n)
    bit = (idx >> (n - 1 - site)) & 1
    return 1.0 - 2.0 * bit


# ---------------------------------------------------------------------------
# Liouvillian terms

@dataclass
class LocalLindbladTerm:
    """One local term, stored on its support's tensor factors."""

    center: int
    support: Region
    hamiltonian: LocalOperator = None
    jumps: list = field(default_factory=list)
    _superop: np.ndarray = field(default=None, repr=False)

    def local_dim(self) -> int:
        return 2 ** len(self.support)

    def superop_matrix(self) -> np.ndarray:
        """Local Heisenberg superoperator in row-major vec convention,
        vec(B A C) = (B kron C^T) vec(A)."""
        if self._superop is None:
            dim = self.local_dim()
            eye = np.eye(dim, dtype=complex)
            S = np.zeros((dim * dim, dim * dim), dtype=complex)
            if self.hamiltonian is not None:
                h = self._on_support(self.hamiltonian)
                S += 1j * (np.kron(h, eye) - np.kron(eye, h.T))
            K = np.zeros((dim, dim), dtype=complex)
            for L in self.jumps:
                l = self._on_support(L)
                S += np.kron(l, l.conj())
                K += l @ l.conj().T
            S -= 0.5 * (np.kron(K, eye) + np.kron(eye, K.T))
            self._superop = S
        return self._superop

    def _on_support(self, op: LocalOperator) -> np.ndarray:
        if op.support.sites == self.support.sites:
            return op.matrix
        if not op.support.issubset(self.support):
            raise ValueError("term operator leaves the term support")
        pos = [list(self.support.sites).index(s) for s in op.support.sites]
        return embed_matrix(op.matrix, pos, len(self.support))

    def unitality_defect(self) -> float:
        dim = self.local_dim()
        v = self.superop_matrix() @ np.eye(dim, dtype=complex).reshape(-1)
        return float(np.abs(v).max())

    def apply_into(self, tensor: np.ndarray, out: np.ndarray, n: int):
        """Add this term's action to `out`; both arrays are (2^n, 2^n)."""
        sites = list(self.support.sites)
        k = len(sites)
        t = tensor.reshape((2,) * (2 * n))
        axes = sites + [n + s for s in sites]
        t = np.moveaxis(t, axes, range(2 * k))
        shape = t.shape
        r = self.superop_matrix() @ t.reshape(4**k, -1)
        r = np.moveaxis(r.reshape(shape), range(2 * k), axes)
        out += r.reshape(2**n, 2**n)

    def apply_schrodinger_into(self, tensor, out, n: int):
        sites = list(self.support.sites)
        k = len(sites)
        t = tensor.reshape((2,) * (2 * n))
        axes = sites + [n + s for s in sites]
        t = np.moveaxis(t, axes, range(2 * k))
        shape = t.shape
        r = self.superop_matrix().conj().T @ t.reshape(4**k, -1)
        r = np.moveaxis(r.reshape(shape), range(2 * k), axes)
        out += r.reshape(2**n, 2**n)


@dataclass
class SpectralBasis:
    """Shared eigendecomposition H = V diag(energies) V^dag."""

    energies: np.ndarray
    vectors: np.ndarray


@dataclass
class SpectralLindbladTerm:
    """Dissipative term stored in the Hamiltonian eigenbasis.

    Jump operators are sparse there (one per Bohr frequency), which keeps
    weak-coupling generators tractable: in the site basis they are dense
    and numerous. `jumps` holds (J, J^dag) sparse pairs; `kh` caches
    sum_J J J^dag.
    """

    center: int
    support: Region
    basis: SpectralBasis
    jumps: list = field(default_factory=list)
    kh: np.ndarray = None

    def __post_init__(self):
        if self.kh is None:
            dim = self.basis.vectors.shape[0]
            K = np.zeros((dim, dim), dtype=complex)
            for J, Jd in self.jumps:
                K += (J @ Jd).toarray()
            self.kh = K

    def apply_in_basis(self, X: np.ndarray) -> np.ndarray:
        out = -0.5 * (self.kh @ X + X @ self.kh)
        for J, Jd in self.jumps:
            out += (J @ X) @ Jd
        return out

    def apply_schrodinger_in_basis(self, X: np.ndarray) -> np.ndarray:
        out = -0.5 * (self.kh @ X + X @ self.kh)
        for J, Jd in self.jumps:
            out += (Jd @ X) @ J
        return out

    def apply_into(self, tensor, out, n: int):
        V = self.basis.vectors
        Xb = V.conj().T @ tensor @ V
        out += V @ self.apply_in_basis(Xb) @ V.conj().T

    def apply_schrodinger_into(self, tensor, out, n: int):
        V = self.basis.vectors
        Xb = V.conj().T @ tensor @ V
        out += V @ self.apply_schrodinger_in_basis(Xb) @ V.conj().T

    def unitality_defect(self) -> float:
        dim = self.basis.vectors.shape[0]
        return float(np.abs(self.apply_in_basis(
            np.eye(dim, dtype=complex))).max())

    def dense_jumps(self) -> list:
        """Materialize jump operators in the site basis (small systems)."""
        V = self.basis.vectors
        return [V @ J.toarray() @ V.conj().T for J, _ in self.jumps]


@dataclass
class Liouvillian:
    """Sum of local terms; applied matrix-free (the full superoperator is
    never materialized)."""

    lattice: Lattice
    terms: list
    range_: int
    preserves_diagonal: bool = False
    _rate_tables: np.ndarray = field(default=None, repr=False)
    _flip_rates: list = field(default=None, repr=False)

    def apply_matrix(self, A: np.ndarray) -> np.ndarray:
        n = self.lattice.n_sites
        if self._rate_tables is not None and A.shape == (2**n, 2**n):
            return self._classical_apply_matrix(A)
        out = np.zeros_like(A, dtype=complex)
        grouped = _group_spectral(self.terms)
        for term in self.terms:
            if isinstance(term, SpectralLindbladTerm):
                continue
            term.apply_into(A, out, n)
        for basis, terms in grouped:
            V = basis.vectors
            Xb = V.conj().T @ A @ V
            acc = np.zeros_like(Xb)
            for term in terms:
                acc += term.apply_in_basis(Xb)
            out += V @ acc @ V.conj().T
        return out

    def apply_schrodinger_matrix(self, rho: np.ndarray) -> np.ndarray:
        n = self.lattice.n_sites
        out = np.zeros_like(rho, dtype=complex)
        grouped = _group_spectral(self.terms)
        for term in self.terms:
            if isinstance(term, SpectralLindbladTerm):
                continue
            term.apply_schrodinger_into(rho, out, n)
        for basis, terms in grouped:
            V = basis.vectors
            Xb = V.conj().T @ rho @ V
            acc = np.zeros_like(Xb)
            for term in terms:
                acc += term.apply_schrodinger_in_basis(Xb)
            out += V @ acc @ V.conj().T
        return out

    def apply(self, A: GlobalOperator) -> GlobalOperator:
        sup = A.support.enlarge(self.range_)
        return GlobalOperator(self.lattice, self.apply_matrix(A.matrix), sup)

    # -- classical (diagonal) fast path --------------------------------

    def rate_tables(self) -> np.ndarray:
        """Per-site flip rates over all 2^N classical configurations.

        Only meaningful for diagonal-preserving generators built by
        heat_bath_ising; shape (N, 2^N). The tables double as a fast-apply
        cache, so code that mutates `terms` directly must reset
        `_rate_tables` to None."""
        if self._rate_tables is None:
            raise ValueError("generator has no classical rate tables")
        return self._rate_tables

    def _classical_apply_matrix(self, A: np.ndarray) -> np.ndarray:
        """Elementwise form of the heat-bath action on a full matrix.

        Each projected flip carries a patch projector on both sides of A, so
        the matrix element (s, s') only receives weight from the flipped
        element (s^x, s'^x) when s and s' agree on the whole patch around x
        (where they then share the rate); the anticommutator damps every
        element by the mean escape rate of its row and column configurations.
        This is O(N 4^N) instead of dense matrix products.
        """
        rates = self.rate_tables()
        n = self.lattice.n_sites
        diag = np.diagonal(A)
        if not np.any(A - np.diag(diag)):
            return np.diag(self.apply_diagonal(diag.astype(complex)))
        idx = np.arange(2**n)
        out = np.zeros_like(A, dtype=complex)
        escape = rates.sum(axis=0)
        for x in range(n):
            patch_mask = 0
            for y in self.lattice.ball(x, 1).sites:
                patch_mask |= 1 << (n - 1 - y)
            key = idx & patch_mask
            perm = idx ^ (1 << (n - 1 - x))
            B = A[np.ix_(perm, perm)]
            out += np.where(key[:, None] == key[None, :],
                            rates[x][:, None], 0.0) * B
        out -= 0.5 * (escape[:, None] + escape[None, :]) * A
        return out

    def apply_diagonal(self, d: np.ndarray) -> np.ndarray:
        """Heisenberg action on a diagonal observable, as a 2^N vector."""
        rates = self.rate_tables()
        n = self.lattice.n_sites
        out = np.zeros_like(d, dtype=d.dtype)
        for x in range(n):
            flipped = d.reshape(-1)[np.arange(2**n) ^ (1 << (n - 1 - x))]
            out += rates[x] * (flipped - d)
        return out

    def apply_flip_sector(self, site: int, d: np.ndarray) -> np.ndarray:
        """Heisenberg action on A = sum_s d(s) |s><s^site|, the sector of
        operators that are off-diagonal at one site and diagonal elsewhere.

        Heat-bath jumps keep this sector invariant: a projected flip at a
        site whose patch contains `site` annihilates such a matrix element,
        so only distant jumps move weight, while the anticommutator damps
        every element by the mean escape rate of its two configurations.
        """
        rates = self.rate_tables()
        n = self.lattice.n_sites
        idx = np.arange(2**n)
        bit_j = 1 << (n - 1 - site)
        out = np.zeros_like(d, dtype=d.dtype)
        escape = np.zeros(2**n)
        for x in range(n):
            escape += rates[x]
            if self.lattice.distance(x, site) > self.range_:
                bit_x = 1 << (n - 1 - x)
                out += rates[x] * d.reshape(-1)[idx ^ bit_x]
        out -= 0.5 * (escape + escape[idx ^ bit_j]) * d
        return out

    def classical_generator(self) -> np.ndarray:
        """Transition-rate matrix Q over configurations: Q[s', s] is the
        jump rate s -> s', columns summing to zero."""
        rates = self.rate_tables()
        n = self.lattice.n_sites
        dim = 2**n
        Q = np.zeros((dim, dim))
        idx = np.arange(dim)
        for x in range(n):
            Q[idx ^ (1 << (n - 1 - x)), idx] += rates[x]
        Q[idx, idx] -= Q.sum(axis=0)
        return Q

    def unitality_defect(self) -> float:
        return max(t.unitality_defect() for t in self.terms)

    def strength(self, seed: int = 0, n_probes: int = 20) -> float:
        """Empirical per-term bound b with ||L_x[A]|| <= b ||A|| on a
        seeded random-operator probe set."""
        rng = np.random.default_rng(seed)
        n = self.lattice.n_sites
        best = 0.0
        for term in self.terms:
            for _ in range(n_probes):
                if isinstance(term, SpectralLindbladTerm):
                    dim = 2**n
                    m = rng.normal(size=(dim, dim)) \
                        + 1j * rng.normal(size=(dim, dim))
                    A = m + m.conj().T
                    out = np.zeros_like(A)
                    term.apply_into(A, out, n)
                else:
                    k = len(term.support)
                    m = rng.normal(size=(2**k, 2**k)) \
                        + 1j * rng.normal(size=(2**k, 2**k))
                    A = m + m.conj().T
                    out = (term.superop_matrix() @ A.reshape(-1)).reshape(A.shape)
                best = max(best, op_norm(out) / op_norm(A))
        return best


def _group_spectral(terms):
    groups = {}
    for t in terms:
        if isinstance(t, SpectralLindbladTerm):
            groups.setdefault(id(t.basis), (t.basis, []))[1].append(t)
    return list(groups.values())


def apply_heisenberg(liouv: Liouvillian, A: GlobalOperator) -> GlobalOperator:
    return liouv.apply(A)


# ---------------------------------------------------------------------------
# heat-bath Ising generator

def heat_bath_ising(lattice: Lattice, beta: float, J: float = 1.0,
                    rate_fn=glauber_rate) -> Liouvillian:
    """Single-spin-flip heat bath for the classical Ising energy.

    For each site x and each configuration p of the radius-1 patch around x
    there is one jump operator sqrt(rate(dE_p)) * P_p * X_x (the adjoint of
    the Schrodinger-picture "project, then flip" jump), where dE_p is the
    Ising energy change of flipping x out of configuration p.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    n = lattice.n_sites
    edges = lattice_edges(lattice)
    nbrs = {x: [] for x in lattice.sites()}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)

    terms = []
    for x in lattice.sites():
        support = lattice.ball(x, 1)
        sites = list(support.sites)
        k = len(sites)
        pos_x = sites.index(x)
        pos_nbrs = [sites.index(y) for y in nbrs[x]]
        jumps = []
        for p in range(2**k):
            bits = [(p >> (k - 1 - i)) & 1 for i in range(k)]
            spins = [1 - 2 * b for b in bits]
            de = 2.0 * J * spins[pos_x] * sum(spins[i] for i in pos_nbrs)
            rate = rate_fn(de, beta)
            if rate == 0.0:
                continue
            flipped = p ^ (1 << (k - 1 - pos_x))
            L = np.zeros((2**k, 2**k), dtype=complex)
            L[p, flipped] = math.sqrt(rate)   # P_p X_x in the patch space
            jumps.append(LocalOperator(support, L))
        terms.append(LocalLindbladTerm(center=x, support=support, jumps=jumps))

    liouv = Liouvillian(lattice, terms, range_=1, preserves_diagonal=True)
    liouv._rate_tables = _classical_rate_tables(lattice, beta, J, rate_fn, nbrs)
    return liouv


def _classical_rate_tables(lattice, beta, J, rate_fn, nbrs):
    n = lattice.n_sites
    idx = np.arange(2**n)
    spins = 1.0 - 2.0 * ((idx[:, None] >> (n - 1 - np.arange(n))) & 1)
    tables = np.zeros((n, 2**n))
    for x in lattice.sites():
        de = 2.0 * J * spins[:, x] * sum(spins[:, y] for y in nbrs[x])
        tables[x] = np.array([rate_fn(v, beta) for v in de])
    return tables


# ---------------------------------------------------------------------------
# Davies-type generator

def davies_generator(H: GlobalOperator, couplings: list, beta: float,
                     rate_fn=kms_rate, freq_decimals: int = 8,
                     kms_tol: float = 1e-10) -> Liouvillian:
    """Generator from the Bohr-frequency decomposition of each coupling.

    Reversible with respect to Gibbs(H, beta) by construction (up to the
    rounding used to merge nearly equal Bohr frequencies). Jumps are kept
    sparse in the eigenbasis of H; terms may act on the whole lattice, and
    the support is only narrowed when the jump list is small enough to
    inspect cheaply.
    """
    lattice = H.lattice
    if op_norm(H - H.dagger()) > 1e-10:
        raise ValueError("Hamiltonian must be self-adjoint")
    if kms_defect(rate_fn, beta) > kms_tol:
        raise ValueError("rate function violates the KMS condition")

    energies, V = np.linalg.eigh(H.matrix)
    basis = SpectralBasis(energies, V)
    terms = []
    for A in couplings:
        Ab = V.conj().T @ A.matrix @ V
        r, c = np.nonzero(np.abs(Ab) > 1e-12)
        w = np.round(energies[c] - energies[r], freq_decimals)
        vals = Ab[r, c]
        order = np.argsort(w, kind="stable")
        r, c, w, vals = r[order], c[order], w[order], vals[order]
        cuts = np.nonzero(np.diff(w))[0] + 1
        jumps = []
        for rs, cs, ws, vs in zip(np.split(r, cuts), np.split(c, cuts),
                                  np.split(w, cuts), np.split(vals, cuts)):
            g = rate_fn(float(ws[0]), beta)
            if g == 0.0:
                continue
            # Heisenberg-picture jump = adjoint of sqrt(g) A_w
            J = sp.csr_matrix((np.sqrt(g) * vs.conj(), (cs, rs)),
                              shape=Ab.shape)
            jumps.append((J, J.conj().T.tocsr()))
        center = min(A.support.sites) if len(A.support) else 0
        terms.append(SpectralLindbladTerm(center=center,
                                          support=lattice.full_region(),
                                          basis=basis, jumps=jumps))

    liouv = Liouvillian(lattice, terms, range_=lattice.L)
    _narrow_davies_supports(liouv)
    return liouv


def _narrow_davies_supports(liouv: Liouvillian, max_jumps: int = 80):
    """Replace the full-lattice support metadata by the actual joint support
    of the jumps, when that is cheap to determine."""
    if liouv.lattice.n_sites > 6:
        return
    max_range = 0
    for term in liouv.terms:
        if len(term.jumps) > max_jumps:
            return
    for term in liouv.terms:
        sup = Region(liouv.lattice, [])
        for L in term.dense_jumps():
            g = GlobalOperator(liouv.lattice, L)
            sup = sup.union(effective_support(g, tol=1e-10))
        term.support = sup
        dists = [liouv.lattice.distance(term.center, s) for s in sup.sites]
        if dists:
            max_range = max(max_range, max(dists))
    liouv.range_ = max_range


# ---------------------------------------------------------------------------
# strictly local symmetric generator (pair-singlet projectors)

SINGLET_PROJECTOR = np.array(
    [[0.0, 0.0, 0.0, 0.0],
     [0.0, 0.5, -0.5, 0.0],
     [0.0, -0.5, 0.5, 0.0],
     [0.0, 0.0, 0.0, 0.0]], dtype=complex)


def pair_singlet_generator(lattice: Lattice, gamma: float = 1.0) -> Liouvillian:
    """One Hermitian jump per bond: sqrt(gamma) * (singlet projector).

    Commutes with global spin rotations and is reversible w.r.t. the
    maximal-spin multiplet state (singlet projectors annihilate it on both
    sides), making it a strictly local testbed for continuous symmetry
    breaking.
    """
    terms = []
    for x, y in lattice_edges(lattice):
        support = Region(lattice, sorted((x, y)))
        # the singlet projector is symmetric under swapping the pair, so the
        # site order within the support does not matter
        jump = LocalOperator(support, math.sqrt(gamma) * SINGLET_PROJECTOR)
        terms.append(LocalLindbladTerm(center=min(x, y), support=support,
                                       jumps=[jump]))
    return Liouvillian(lattice, terms, range_=1)


# ---------------------------------------------------------------------------
# certifiers

def _expect(omega, lattice, matrix) -> complex:
    if hasattr(omega, "expect_matrix"):
        return omega.expect_matrix(matrix)
    rho = omega.matrix if isinstance(omega, GlobalOperator) else np.asarray(omega)
    return complex(np.trace(rho @ matrix))


def pauli_basis_matrices(n: int):
    """All 4^n Pauli strings (dense); only sensible for n <= 5."""
    singles = [ID2, PAULI_X, PAULI_Y, PAULI_Z]
    mats = [np.array([[1.0]], dtype=complex)]
    for _ in range(n):
        mats = [np.kron(m, s) for m in mats for s in singles]
    return mats


def random_local_probes(lattice: Lattice, n_probes: int, seed: int,
                        radius: int = 1) -> list:
    """Seeded Haar-ish random Hermitian operators on random radius-<=1 balls,
    normalized to unit spectral norm."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_probes):
        center = int(rng.integers(lattice.n_sites))
        support = lattice.ball(center, radius)
        k = len(support)
        m = rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k))
        m = m + m.conj().T
        m /= np.linalg.norm(m, 2)
        out.append(embed(LocalOperator(support, m), lattice))
    return out


def _default_probe_pairs(lattice: Lattice, seed: int = 1234):
    n = lattice.n_sites
    if n <= 5:
        mats = pauli_basis_matrices(n)
        return ("basis", mats)
    ops = random_local_probes(lattice, 2 * 200, seed)
    return ("pairs", [(ops[2 * i], ops[2 * i + 1]) for i in range(200)])


def detailed_balance_defect(liouv: Liouvillian, omega, probes=None,
                            seed: int = 1234) -> float:
    """max over probe pairs of |w(A L[B]) - w(L[A] B)| / (||A|| ||B||).

    Default probes: the full Pauli string basis for N <= 5 (all pairs,
    evaluated via two moment matrices), otherwise 200 seeded random local
    Hermitian pairs.
    """
    lattice = liouv.lattice
    rho = _state_matrix(omega, lattice)
    if probes is None:
        kind, data = _default_probe_pairs(lattice, seed)
    else:
        kind, data = "pairs", probes

    if kind == "basis":
        mats = data
        applied = [liouv.apply_matrix(P) for P in mats]
        # T[a,b] = tr(rho P_a L[P_b]),  S[a,b] = tr(rho L[P_a] P_b)
        rp = [rho @ P for P in mats]
        T = np.einsum("aij,bji->ab", np.array(rp), np.array(applied))
        rl = [rho @ G for G in applied]
        S = np.einsum("aij,bji->ab", np.array(rl), np.array(mats))
        norms = np.array([np.linalg.norm(P, 2) for P in mats])
        return float((np.abs(T - S) / np.outer(norms, norms)).max())

    worst = 0.0
    for A, B in data:
        la = liouv.apply_matrix(A.matrix)
        lb = liouv.apply_matrix(B.matrix)
        lhs = _expect(omega, lattice, A.matrix @ lb)
        rhs = _expect(omega, lattice, la @ B.matrix)
        worst = max(worst, abs(lhs - rhs) / (op_norm(A) * op_norm(B)))
    return worst


def _state_matrix(omega, lattice) -> np.ndarray:
    if hasattr(omega, "density_matrix"):
        return omega.density_matrix()
    if isinstance(omega, GlobalOperator):
        return omega.matrix
    return np.asarray(omega, dtype=complex)


def symmetry_defect(liouv: Liouvillian, C: GlobalOperator, probes=None,
                    seed: int = 1234) -> float:
    """max over probes of || L[[C, A]] - [C, L[A]] || / ||A||."""
    if op_norm(C - C.dagger()) > 1e-10:
        raise ValueError("charge must be self-adjoint")
    if probes is None:
        probes = random_local_probes(liouv.lattice, 20, seed)
    worst = 0.0
    c = C.matrix
    for A in probes:
        a = A.matrix
        inner = liouv.apply_matrix(c @ a - a @ c)
        la = liouv.apply_matrix(a)
        outer = c @ la - la @ c
        worst = max(worst, op_norm(inner - outer) / op_norm(A))
    return worst


# ---------------------------------------------------------------------------
# truncation and restriction

@dataclass
class TruncationReport:
    radius: int
    per_term_bounds: list
    remainder_strength: float


def truncate(liouv: Liouvillian, l: int):
    """Replace each term by its conditional expectation onto the radius-l
    ball around its center; returns the truncated generator and a certified
    per-term error report.

    The per-jump bound 2 (||L|| + ||L~||) ||L - L~|| and the Hamiltonian
    bound 2 ||H - H~|| dominate the superoperator-norm difference.
    """
    if l < 0:
        raise ValueError("radius must be >= 0")
    lattice = liouv.lattice
    new_terms = []
    bounds = []
    for term in liouv.terms:
        if isinstance(term, SpectralLindbladTerm):
            term = _densify_spectral(term, lattice)
        target = lattice.ball(term.center, l)
        keep = Region(lattice, [s for s in term.support.sites if s in target])
        if len(keep) == 0:
            keep = Region(lattice, [term.center])
        err = 0.0
        new_h = None
        if term.hamiltonian is not None:
            h_old = term._on_support(term.hamiltonian)
            h_new = _local_cond_exp(h_old, term.support, keep)
            err += 2.0 * _norm_diff(h_old, h_new, term.support, keep)
            new_h = LocalOperator(keep, h_new)
        new_jumps = []
        for L in term.jumps:
            l_old = term._on_support(L)
            l_new = _local_cond_exp(l_old, term.support, keep)
            d = _norm_diff(l_old, l_new, term.support, keep)
            err += 2.0 * (np.linalg.norm(l_old, 2)
                          + np.linalg.norm(l_new, 2)) * d
            new_jumps.append(LocalOperator(keep, l_new))
        new_terms.append(LocalLindbladTerm(center=term.center, support=keep,
                                           hamiltonian=new_h, jumps=new_jumps))
        bounds.append(err)
    report = TruncationReport(radius=l, per_term_bounds=bounds,
                              remainder_strength=float(sum(bounds)))
    return (Liouvillian(lattice, new_terms, range_=min(liouv.range_, l),
                        preserves_diagonal=liouv.preserves_diagonal,
                        _rate_tables=None), report)


def _densify_spectral(term: SpectralLindbladTerm, lattice) -> LocalLindbladTerm:
    full = lattice.full_region()
    jumps = [LocalOperator(full, L) for L in term.dense_jumps()]
    return LocalLindbladTerm(center=term.center, support=full, jumps=jumps)


def _local_cond_exp(matrix, support: Region, keep: Region) -> np.ndarray:
    """Conditional expectation within the term's local space."""
    sites = list(support.sites)
    pos = [sites.index(s) for s in keep.sites]
    k, kk = len(sites), len(pos)
    rest = [i for i in range(k) if i not in pos]
    t = matrix.reshape((2,) * (2 * k))
    perm = pos + rest + [k + i for i in pos] + [k + i for i in rest]
    t = t.transpose(perm).reshape(2**kk, 2 ** (k - kk), 2**kk, 2 ** (k - kk))
    return np.einsum("aibi->ab", t) / 2 ** (k - kk)


def _norm_diff(old, new, support: Region, keep: Region) -> float:
    sites = list(support.sites)
    pos = [sites.index(s) for s in keep.sites]
    back = embed_matrix(new, pos, len(sites))
    return float(np.linalg.norm(old - back, 2))


def restrict(liouv: Liouvillian, region: Region) -> Liouvillian:
    """Sub-generator keeping the terms whose support meets the region.

    These are exactly the terms that can act nontrivially on operators
    supported in the region, so L[A'] = restrict(L, A)[A'] for every A'
    supported there; all kept terms live within enlarge(region, range).
    """
    kept = [t for t in liouv.terms if t.support.intersects(region)]
    sub = Liouvillian(liouv.lattice, kept, range_=liouv.range_,
                      preserves_diagonal=liouv.preserves_diagonal)
    if liouv.preserves_diagonal and liouv._rate_tables is not None:
        tables = liouv._rate_tables.copy()
        centers = {t.center for t in kept}
        for x in liouv.lattice.sites():
            if x not in centers:
                tables[x] = 0.0
        sub._rate_tables = tables
    return sub
