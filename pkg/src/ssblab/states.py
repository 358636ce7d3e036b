"""State families: Gibbs states, tilted symmetry-breaking pairs, dressed
charge functionals and their averages, and twisted (spin-wave) states.

States are linear functionals A -> w(A). Most are honest density matrices;
the dressed-functional averages are stored as an effective trace matrix that
need not be positive at finite size (negativity is reported as a diagnostic,
not treated as an error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, Region
from .algebra import (GlobalOperator, LocalOperator, PAULI_X, PAULI_Y,
                      PAULI_Z, commutator, embed, embed_matrix, op_norm,
                      total_spin)


@dataclass
class StateFunctional:
    """Evaluates w(A) = tr(D A) for an effective matrix D.

    `is_density` marks states known to be genuine density matrices; for
    those, positivity and unit trace are validated on construction. Diagonal
    density matrices may be stored as a weight vector to save memory.
    """

    lattice: Lattice
    matrix: np.ndarray = None
    diagonal: np.ndarray = None
    is_density: bool = True

    def __post_init__(self):
        dim = 2**self.lattice.n_sites
        if (self.matrix is None) == (self.diagonal is None):
            raise ValueError("provide exactly one of matrix, diagonal")
        if self.diagonal is not None:
            d = np.asarray(self.diagonal)
            if d.shape != (dim,):
                raise ValueError("diagonal weight vector has wrong length")
            self.diagonal = d
            if self.is_density:
                if abs(d.sum() - 1.0) > 1e-10 or d.real.min() < -1e-12 \
                        or np.abs(d.imag).max() > 1e-12:
                    raise ValueError("invalid diagonal density weights")
        else:
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (dim, dim):
                raise ValueError("state matrix has wrong shape")
            self.matrix = m
            if self.is_density:
                if abs(np.trace(m).real - 1.0) > 1e-10:
                    raise ValueError("density matrix must have unit trace")
                if np.abs(m - m.conj().T).max() > 1e-10:
                    raise ValueError("density matrix must be self-adjoint")
                if np.linalg.eigvalsh(m).min() < -1e-12:
                    raise ValueError("density matrix must be positive")

    def expect_matrix(self, A: np.ndarray) -> complex:
        if self.diagonal is not None:
            return complex(np.sum(self.diagonal * np.diag(A)))
        return complex(np.trace(self.matrix @ A))

    def expect(self, A: GlobalOperator) -> complex:
        return self.expect_matrix(A.matrix)

    def density_matrix(self) -> np.ndarray:
        if self.diagonal is not None:
            return np.diag(self.diagonal.astype(complex))
        return self.matrix

    def negativity(self) -> float:
        """Most negative eigenvalue of the effective matrix (diagnostic for
        dressed-functional states, which are only asymptotically positive)."""
        if self.diagonal is not None:
            return float(min(self.diagonal.real.min(), 0.0))
        ev = np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)
        return float(min(ev.min(), 0.0))


def gibbs(H: GlobalOperator, beta: float) -> StateFunctional:
    """exp(-beta H)/Z; beta = inf gives the normalized ground-space projector.

    Diagonal Hamiltonians take a diagonal-weights path so that the state
    stays cheap at larger N.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    lattice = H.lattice
    if H.is_diagonal(tol=0.0):
        e = np.diag(H.matrix).real
        if math.isinf(beta):
            w = (e <= e.min() + 1e-12).astype(float)
        else:
            w = np.exp(-beta * (e - e.min()))
        return StateFunctional(lattice, diagonal=w / w.sum())
    energies, V = np.linalg.eigh(H.matrix)
    if math.isinf(beta):
        w = (energies <= energies[0] + 1e-9).astype(float)
    else:
        w = np.exp(-beta * (energies - energies[0]))
    w /= w.sum()
    rho = (V * w) @ V.conj().T
    return StateFunctional(lattice, matrix=rho)


def fluctuation_ratio(omega: StateFunctional, O: GlobalOperator,
                      o: float = 0.5) -> float:
    """mu = sqrt(w(O^2)) / (o N): extensive-fluctuation magnitude of an
    order parameter, normalized so that mu <= 1 for perfectly ordered
    states."""
    if o <= 0:
        raise ValueError("local norm bound must be positive")
    val = omega.expect(O @ O)
    if val.real < -1e-10:
        raise ValueError("w(O^2) is negative; invalid state")
    n = omega.lattice.n_sites
    return math.sqrt(max(val.real, 0.0)) / (o * n)


def tilted_pair(omega: StateFunctional, O: GlobalOperator,
                tol: float = 1e-12):
    """Symmetry-breaking candidates w_pm(A) = w(T_pm A T_pm) with
    T_pm = (1 pm O / sqrt(w(O^2))) / sqrt(2)."""
    o2 = omega.expect(O @ O).real
    if o2 <= tol:
        raise ValueError("order parameter has no fluctuations in this state")
    lattice = omega.lattice
    scaled = O.matrix / math.sqrt(o2)
    eye = np.eye(scaled.shape[0], dtype=complex)
    rho = omega.density_matrix()
    out = []
    for sign in (+1.0, -1.0):
        T = (eye + sign * scaled) / math.sqrt(2.0)
        m = T @ rho @ T
        if np.abs(m - np.diag(np.diag(m))).max() <= 1e-14 \
                and np.abs(np.diag(m).imag).max() <= 1e-14:
            out.append(StateFunctional(lattice, diagonal=np.diag(m).real))
        else:
            out.append(StateFunctional(lattice, matrix=m))
    return tuple(out)


@dataclass
class OrderParameterPair:
    """Two order-parameter components rotated into each other by a charge:
    [C, O1] = i O2 and [C, O2] = -i O1."""

    O1: GlobalOperator
    O2: GlobalOperator
    C: GlobalOperator
    o: float = 0.5

    def commutation_defect(self) -> float:
        d1 = commutator(self.C, self.O1) - 1j * self.O2
        d2 = commutator(self.C, self.O2) + 1j * self.O1
        return max(op_norm(d1), op_norm(d2))

    def validate(self, tol: float = 1e-10):
        d = self.commutation_defect()
        if d > tol:
            raise ValueError(f"commutation relations violated: defect {d:.2e}")


def spin_order_parameters(lattice: Lattice) -> OrderParameterPair:
    """Default continuous-symmetry testbed: O1 = Sx, O2 = Sy, C = Sz."""
    return OrderParameterPair(O1=total_spin(lattice, "x"),
                              O2=total_spin(lattice, "y"),
                              C=total_spin(lattice, "z"), o=0.5)


def raising_operator(pair: OrderParameterPair,
                     tol: float = 1e-10) -> GlobalOperator:
    """O+ = O1 + i O2; checked against [C, O+] = +O+."""
    pair.validate(tol)
    Op = pair.O1 + 1j * pair.O2
    defect = op_norm(commutator(pair.C, Op) - Op)
    if defect > tol:
        raise ValueError(f"[C, O+] = O+ fails with defect {defect:.2e}")
    return Op


def _charge_powers(Oplus: GlobalOperator, M: int):
    """(O+)^k for k = -M..M, with (O+)^k = (O-)^(-k) for negative k."""
    dim = Oplus.matrix.shape[0]
    plus = {0: np.eye(dim, dtype=complex)}
    minus = {0: plus[0]}
    Om = Oplus.matrix.conj().T
    for k in range(1, M + 1):
        plus[k] = Oplus.matrix @ plus[k - 1]
        minus[k] = Om @ minus[k - 1]
    return {k: (plus[k] if k >= 0 else minus[-k]) for k in range(-M, M + 1)}


@dataclass
class DressedFunctional:
    """chi(A) = w((O-)^m' A (O+)^m) / (Z(m) Z(m')), stored as the effective
    matrix D with chi(A) = tr(D A)."""

    lattice: Lattice
    m: int
    m_prime: int
    effective: np.ndarray

    def expect_matrix(self, A: np.ndarray) -> complex:
        return complex(np.trace(self.effective @ A))

    def expect(self, A: GlobalOperator) -> complex:
        return self.expect_matrix(A.matrix)


def charge_sector_norms(omega: StateFunctional, Oplus: GlobalOperator,
                        M: int) -> dict:
    """Z(k) = w((O+)^k dag (O+)^k)^(1/2) for k = -M..M."""
    powers = _charge_powers(Oplus, M)
    rho = omega.density_matrix()
    return {k: math.sqrt(max(np.trace(powers[k].conj().T @ powers[k]
                                      @ rho).real, 0.0))
            for k in powers}


def kt_functional(omega: StateFunctional, Oplus: GlobalOperator, m: int,
                  m_prime: int, tol: float = 1e-12) -> DressedFunctional:
    M = max(abs(m), abs(m_prime))
    powers = _charge_powers(Oplus, M)
    Z = charge_sector_norms(omega, Oplus, M)
    if Z[m] <= tol or Z[m_prime] <= tol:
        raise ValueError(
            f"normalization vanishes (Z({m})={Z[m]:.2e}, "
            f"Z({m_prime})={Z[m_prime]:.2e}); the state lacks the required "
            "charge content")
    rho = omega.density_matrix()
    D = powers[m] @ rho @ powers[m_prime].conj().T / (Z[m] * Z[m_prime])
    return DressedFunctional(omega.lattice, m, m_prime, D)


def kt_state(omega: StateFunctional, Oplus: GlobalOperator,
             M: int) -> StateFunctional:
    """Average of the dressed functionals over -M..M in both indices.

    Returned as a functional-record state (not necessarily positive at
    finite size); w^(M)(1) = 1 whenever the reference state commutes with
    the charge.
    """
    dim = Oplus.matrix.shape[0]
    D = np.zeros((dim, dim), dtype=complex)
    for m in range(-M, M + 1):
        for mp in range(-M, M + 1):
            D += kt_functional(omega, Oplus, m, mp).effective
    D /= (2 * M + 1)
    return StateFunctional(omega.lattice, matrix=D, is_density=False)


def goldstone_twist(lattice: Lattice, charge_site=None) -> GlobalOperator:
    """U = exp( (2 pi i / L) sum_x sum_j x_j C_x ), a position-dependent
    charge rotation winding once across each axis.

    `charge_site` maps a site to its 2x2 charge density; default sigma^z/2.
    """
    n = lattice.n_sites
    if charge_site is None:
        def charge_site(x):
            return PAULI_Z / 2
    dim = 2**n
    gen = np.zeros((dim, dim), dtype=complex)
    for x in lattice.sites():
        coeff = sum(lattice.coord(x))
        c = np.asarray(charge_site(x), dtype=complex)
        if np.abs(c - c.conj().T).max() > 1e-12:
            raise ValueError("per-site charge must be self-adjoint")
        gen += coeff * embed_matrix(c, [x], n)
    if np.abs(gen - np.diag(np.diag(gen))).max() < 1e-14:
        U = np.diag(np.exp(2j * np.pi / lattice.L * np.diag(gen)))
    else:
        ev, V = np.linalg.eigh(gen)
        U = (V * np.exp(2j * np.pi / lattice.L * ev)) @ V.conj().T
    return GlobalOperator(lattice, U)


def twisted_state(omega, U: GlobalOperator) -> StateFunctional:
    """sigma(A) = w(U^dag A U)."""
    D = omega.density_matrix() if hasattr(omega, "density_matrix") else None
    if D is None:
        raise ValueError("state does not expose an effective matrix")
    m = U.matrix @ D @ U.matrix.conj().T
    is_density = getattr(omega, "is_density", True)
    return StateFunctional(omega.lattice, matrix=m, is_density=is_density)


def rotated_state(omega, C: GlobalOperator, theta: float) -> StateFunctional:
    """w_theta(A) = w(e^{i theta C} A e^{-i theta C})."""
    ev, V = np.linalg.eigh(C.matrix)
    U = (V * np.exp(-1j * theta * ev)) @ V.conj().T
    D = omega.density_matrix()
    m = U @ D @ U.conj().T
    return StateFunctional(omega.lattice, matrix=m,
                           is_density=getattr(omega, "is_density", True))


def spin_flip_unitary(lattice: Lattice) -> GlobalOperator:
    """Global spin flip (product of sigma^x), conjugating Sz -> -Sz."""
    m = np.array([[1.0]], dtype=complex)
    for _ in range(lattice.n_sites):
        m = np.kron(m, PAULI_X)
    return GlobalOperator(lattice, m)
