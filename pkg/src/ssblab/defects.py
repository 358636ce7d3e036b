"""Defect functionals: failure of the Leibniz rule, of stationarity
(metastability) and of reversibility, dressed-functional reversibility,
charge-fluctuation lemma checks, and decay-exponent extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Region
from .algebra import GlobalOperator, op_norm
from .generators import Liouvillian, restrict
from .states import StateFunctional, kt_functional, charge_sector_norms, \
    _charge_powers


def leibniz_defect(liouv: Liouvillian, X: GlobalOperator,
                   Y: GlobalOperator) -> GlobalOperator:
    """Gamma(X, Y) = L[XY] - L[X] Y - X L[Y]; vanishes for derivations
    (purely Hamiltonian generators) and for dissipators whose jumps commute
    with either factor."""
    lxy = liouv.apply_matrix(_matmul(X.matrix, Y.matrix))
    lx = liouv.apply_matrix(X.matrix)
    ly = liouv.apply_matrix(Y.matrix)
    m = lxy - _matmul(lx, Y.matrix) - _matmul(X.matrix, ly)
    return GlobalOperator(liouv.lattice, m)


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product that scales rows/columns instead of running a dense product
    when one factor is diagonal (common: squared order parameters)."""
    da = np.diagonal(a)
    if not np.any(a - np.diag(da)):
        return da[:, None] * b
    db = np.diagonal(b)
    if not np.any(b - np.diag(db)):
        return a * db[None, :]
    return a @ b


def metastability_defect(omega, liouv: Liouvillian, A: GlobalOperator,
                         normalize: bool = True) -> float:
    """|w(L[A])|, optionally divided by ||A||."""
    val = abs(omega.expect_matrix(liouv.apply_matrix(A.matrix)))
    return val / op_norm(A) if normalize else val


def reversibility_defect(omega, liouv: Liouvillian, A: GlobalOperator,
                         B: GlobalOperator, normalize: bool = True) -> float:
    """|w(L[A] B) - w(A L[B])|, normalized by ||A|| ||B||."""
    la = liouv.apply_matrix(A.matrix)
    lb = liouv.apply_matrix(B.matrix)
    val = abs(omega.expect_matrix(la @ B.matrix)
              - omega.expect_matrix(A.matrix @ lb))
    return val / (op_norm(A) * op_norm(B)) if normalize else val


def kt_reversibility_defect(omega: StateFunctional, liouv: Liouvillian,
                            Oplus: GlobalOperator, m: int, m_prime: int,
                            A: GlobalOperator, B: GlobalOperator,
                            normalize: bool = True) -> float:
    """|chi^(m,m')(B L[A]) - chi^(m,m')(L[B] A)|: reversibility failure of
    the dressed functionals."""
    chi = kt_functional(omega, Oplus, m, m_prime)
    la = liouv.apply_matrix(A.matrix)
    lb = liouv.apply_matrix(B.matrix)
    val = abs(chi.expect_matrix(B.matrix @ la)
              - chi.expect_matrix(lb @ A.matrix))
    return val / (op_norm(A) * op_norm(B)) if normalize else val


# ---------------------------------------------------------------------------
# charge-fluctuation lemma (out-of-region moments)

@dataclass
class KomaLemmaReport:
    """Numerical check of the out-of-region charge-moment inequalities.

    a_m = tr(Q^m rho Q^dag^m) for Q = O+ minus its part on the region.
    hypotheses: N >= 16|A|^2/mu^2 and M/N <= mu^2/(16|A|). The inequalities
    are proven only under the hypotheses; outside them the observed status
    is reported, not asserted.
    """

    region_size: int
    M: int
    mu: float
    o: float
    n_sites: int
    hypothesis_size_ok: bool
    hypothesis_m_ok: bool
    a_values: list
    ratio_checks: list          # (m, k, lhs a_{m-k}/a_m, rhs (mu o N)^{-2k}, ok)
    r_ratio: float
    r_bound: float
    r_ok: bool
    remainder_value: float      # |chi^{(M,M)} commutator remainder| observed
    remainder_bound: float
    remainder_ok: bool

    def all_inequalities_hold(self) -> bool:
        return all(ok for *_, ok in self.ratio_checks) and self.r_ok \
            and self.remainder_ok

    def hypotheses_hold(self) -> bool:
        return self.hypothesis_size_ok and self.hypothesis_m_ok


def koma_lemma_check(omega: StateFunctional, Oplus: GlobalOperator,
                     region: Region, M: int, mu: float, o: float,
                     probe: GlobalOperator = None) -> KomaLemmaReport:
    """Verify the charge-moment inequalities for Q = O+ - R_A.

    probe: local observable used for the commutator-remainder bound check;
    defaults to O+ restricted to the region acting as R_A + adjoint (any
    observable supported on the region works).
    """
    lattice = omega.lattice
    n = lattice.n_sites
    rho = omega.density_matrix()

    # split O+ into in-region and out-of-region extensive parts
    R = _region_part(Oplus, region)
    Q = Oplus.matrix - R
    Qd = Q.conj().T

    size_ok = n >= 16 * len(region) ** 2 / mu**2
    m_ok = M / n <= mu**2 / (16 * len(region))

    a = [1.0]
    Qm = np.eye(Q.shape[0], dtype=complex)
    for m in range(1, M + 1):
        Qm = Q @ Qm
        a.append(float(np.trace(Qm @ rho @ Qm.conj().T).real))

    ratio_checks = []
    scale = (mu * o * n) ** 2
    for m in range(1, M + 1):
        for k in range(0, m):
            if a[m] <= 0:
                ratio_checks.append((m, k, math.inf, scale**-k, False))
                continue
            lhs = a[m - k] / a[m]
            rhs = scale ** -k
            ratio_checks.append((m, k, lhs, rhs, lhs <= rhs * (1 + 1e-9)))

    powers = _charge_powers(Oplus, M)
    num = abs(np.trace(powers[M] @ rho @ powers[M].conj().T))
    r_ratio = num / a[M] if a[M] > 0 else math.inf
    r_bound = 2.0 - math.exp(mu / 8.0)
    r_ok = r_ratio >= r_bound - 1e-9

    # commutator remainder of the local-observable lemma, at (m, m') = (M, M)
    if probe is None:
        probe = GlobalOperator(lattice, R + R.conj().T, region)
    Z = charge_sector_norms(omega, Oplus, M)
    pm = powers[M]
    comm = probe.matrix @ pm - pm @ probe.matrix
    remainder = abs(np.trace(rho @ pm.conj().T @ comm)) / (Z[M] * Z[M]) \
        if Z[M] > 0 else math.inf
    const = 2.0 * op_norm(probe) * (16 * len(region) / mu**2) \
        * math.exp(mu / 16.0) * (math.exp(mu / 16.0) - 1.0)
    rem_bound = const * M / n
    rem_ok = remainder <= rem_bound * (1 + 1e-9)

    return KomaLemmaReport(
        region_size=len(region), M=M, mu=mu, o=o, n_sites=n,
        hypothesis_size_ok=bool(size_ok), hypothesis_m_ok=bool(m_ok),
        a_values=a, ratio_checks=ratio_checks,
        r_ratio=float(r_ratio), r_bound=float(r_bound), r_ok=bool(r_ok),
        remainder_value=float(remainder), remainder_bound=float(rem_bound),
        remainder_ok=bool(rem_ok))


def _region_part(O: GlobalOperator, region: Region) -> np.ndarray:
    """Part of an extensive single-site-sum operator supported on the region
    (conditional expectation of the complement-supported rest removed)."""
    from .algebra import conditional_expectation, embed_matrix
    sites = list(region.sites)
    # out-of-region site terms are traceless, so they average away exactly
    local = conditional_expectation(O, region)
    return embed_matrix(local, sites, O.lattice.n_sites)


# ---------------------------------------------------------------------------
# decay-exponent extraction

@dataclass
class DefectSeries:
    """(volume, defect) sequence with a log-log decay fit."""

    label: str
    entries: list = field(default_factory=list)  # (L, N, value, metadata)

    def add(self, L: int, N: int, value: float, metadata=None):
        if value < 0:
            raise ValueError("defect values must be >= 0")
        self.entries.append((L, N, float(value), metadata))

    def positive_entries(self):
        return [(L, N, v, m) for (L, N, v, m) in self.entries if v > 0]


def fit_exponent(series: DefectSeries):
    """Least-squares slope of log(defect) against log(N).

    Returns (slope, stderr, residual_rms). Nonpositive entries are excluded;
    fewer than three positive entries is an error.
    """
    pts = series.positive_entries()
    if len(pts) < 3:
        raise ValueError(
            f"need >= 3 positive defect entries to fit, got {len(pts)}")
    x = np.log([n for (_, n, _, _) in pts])
    y = np.log([v for (_, _, v, _) in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    fitted = A @ coef
    resid = y - fitted
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = max(len(pts) - 2, 1)
    var = float(resid @ resid) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(var / sxx) if sxx > 0 else math.inf
    return slope, stderr, rms
