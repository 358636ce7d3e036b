"""Classical heat-bath (Glauber) Monte Carlo on periodic tori.

This realizes the diagonal restriction of the quantum heat-bath generator:
random sequential single-spin flips accepted with probability
1/(1 + exp(beta dE)). One sweep = N attempted flips, used as the time unit.
Kernels are numba-compiled; identical seeds give bit-exact trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import Lattice


@dataclass
class SpinConfig:
    """Spins (+-1) on an L^d torus with cached energy and magnetization."""

    lattice: Lattice
    spins: np.ndarray
    energy: float = None
    magnetization: int = None
    J: float = 1.0

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8).reshape(-1)
        if self.spins.size != self.lattice.n_sites:
            raise ValueError("spin array does not match the lattice")
        if not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be +-1")
        if self.energy is None:
            self.energy = self.compute_energy()
        if self.magnetization is None:
            self.magnetization = int(self.spins.sum())

    def compute_energy(self) -> float:
        from .generators import lattice_edges
        e = 0.0
        for x, y in lattice_edges(self.lattice):
            e -= self.J * self.spins[x] * self.spins[y]
        return e

    def cache_consistent(self) -> bool:
        return (abs(self.energy - self.compute_energy()) < 1e-9
                and self.magnetization == int(self.spins.sum()))

    @classmethod
    def all_up(cls, lattice: Lattice, J: float = 1.0) -> "SpinConfig":
        return cls(lattice, np.ones(lattice.n_sites, dtype=np.int8), J=J)


def _neighbor_table(lattice: Lattice) -> np.ndarray:
    from .generators import lattice_edges
    nbrs = [[] for _ in lattice.sites()]
    for x, y in lattice_edges(lattice):
        nbrs[x].append(y)
        nbrs[y].append(x)
    return np.array(nbrs, dtype=np.int64)


def _rate_table(beta: float, J: float, max_nbrs: int) -> np.ndarray:
    """Flip rate indexed by s_x * sum(neighbors) + max_nbrs (dE = 2 J k)."""
    table = np.zeros(2 * max_nbrs + 1)
    for k in range(-max_nbrs, max_nbrs + 1):
        de = 2.0 * J * k
        if math.isinf(beta):
            table[k + max_nbrs] = 1.0 if de < 0 else (0.5 if de == 0 else 0.0)
        else:
            x = beta * de
            table[k + max_nbrs] = 0.0 if x > 700 else 1.0 / (1.0 + math.exp(x))
    return table


@njit(cache=True)
def _run_until(spins, nbrs, rates, max_nbrs, m_stop, sweep_cap, seed):
    """Random sequential updates until magnetization <= m_stop; returns
    the sweep count (fractional) or -1.0 if the cap is hit."""
    np.random.seed(seed)
    n = spins.shape[0]
    m = 0
    for i in range(n):
        m += spins[i]
    if m <= m_stop:
        return 0.0
    steps = 0
    max_steps = sweep_cap * n
    while steps < max_steps:
        x = np.random.randint(n)
        k = 0
        for j in range(nbrs.shape[1]):
            k += spins[nbrs[x, j]]
        k *= spins[x]
        if np.random.random() < rates[k + max_nbrs]:
            spins[x] = -spins[x]
            m += 2 * spins[x]
            if m <= m_stop:
                return (steps + 1) / n
        steps += 1
    return -1.0


@njit(cache=True)
def _sweep_kernel(spins, nbrs, rates, max_nbrs, n_steps, seed):
    np.random.seed(seed)
    n = spins.shape[0]
    for _ in range(n_steps):
        x = np.random.randint(n)
        k = 0
        for j in range(nbrs.shape[1]):
            k += spins[nbrs[x, j]]
        k *= spins[x]
        if np.random.random() < rates[k + max_nbrs]:
            spins[x] = -spins[x]


def heat_bath_step(config: SpinConfig, beta: float, J: float,
                   rng: np.random.Generator) -> SpinConfig:
    """One attempted flip at a random site (python-level reference path)."""
    out = SpinConfig(config.lattice, config.spins.copy(),
                     energy=config.energy,
                     magnetization=config.magnetization, J=config.J)
    x = int(rng.integers(out.lattice.n_sites))
    nbrs = _neighbor_table(out.lattice)[x]
    de = 2.0 * J * out.spins[x] * out.spins[nbrs].sum()
    if math.isinf(beta):
        p = 1.0 if de < 0 else (0.5 if de == 0 else 0.0)
    else:
        p = 1.0 / (1.0 + math.exp(min(beta * de, 700.0)))
    if rng.random() < p:
        out.spins[x] = -out.spins[x]
        out.energy += de
        out.magnetization += int(2 * out.spins[x])
    return out


def run_sweeps(config: SpinConfig, beta: float, n_steps: int, seed: int):
    """Numba path: n_steps attempted flips starting from config's spins.

    The input config is left untouched; a new SpinConfig with refreshed
    energy/magnetization caches is returned.
    """
    nbrs = _neighbor_table(config.lattice)
    rates = _rate_table(beta, config.J, nbrs.shape[1])
    spins = config.spins.copy()
    _sweep_kernel(spins, nbrs, rates, nbrs.shape[1], n_steps, seed)
    return SpinConfig(config.lattice, spins, J=config.J)


@dataclass
class SurvivalStats:
    d: int
    L: int
    beta: float
    delta_m: float
    sweep_cap: int
    seed: int
    sweeps: list = field(default_factory=list)   # per trial; inf = censored
    n_censored: int = 0

    def _filled(self):
        """Censored trials enter order statistics at the cap (the true value
        is at least that)."""
        return sorted(min(s, self.sweep_cap) for s in self.sweeps)

    def median(self) -> float:
        return float(np.median(self._filled()))

    def quartiles(self):
        f = self._filled()
        return (float(np.percentile(f, 25)), float(np.percentile(f, 75)))


def mc_survival_time(d: int, L: int, beta: float, delta_m: float,
                     trials: int, seed: int,
                     sweep_cap: int = 50_000, J: float = 1.0) -> SurvivalStats:
    """Per trial: start all-up, run until the magnetization density drops
    below 1 - delta_m; reports sweep counts with censoring at sweep_cap."""
    if trials < 1:
        raise ValueError("need at least one trial")
    lattice = Lattice(d, L)
    nbrs = _neighbor_table(lattice)
    rates = _rate_table(beta, J, nbrs.shape[1])
    n = lattice.n_sites
    m_stop = math.floor((1.0 - delta_m) * n)
    stats = SurvivalStats(d, L, beta, delta_m, sweep_cap, seed)
    root = np.random.SeedSequence(seed)
    trial_seeds = [int(s.generate_state(1)[0] & 0x7FFFFFFF)
                   for s in root.spawn(trials)]
    for ts in trial_seeds:
        spins = np.ones(n, dtype=np.int8)
        out = _run_until(spins, nbrs, rates, nbrs.shape[1], m_stop,
                         sweep_cap, ts)
        if out < 0:
            stats.sweeps.append(math.inf)
            stats.n_censored += 1
        else:
            stats.sweeps.append(float(out))
    return stats


def magnetization_samples(d: int, L: int, beta: float, n_samples: int,
                          sweeps_between: int, burn_in: int, seed: int,
                          J: float = 1.0) -> np.ndarray:
    """Equilibrium magnetization-density samples from a long single chain."""
    lattice = Lattice(d, L)
    config = SpinConfig.all_up(lattice, J=J)
    nbrs = _neighbor_table(lattice)
    rates = _rate_table(beta, J, nbrs.shape[1])
    n = lattice.n_sites
    rng = np.random.SeedSequence(seed)
    seeds = iter(int(s.generate_state(1)[0] & 0x7FFFFFFF)
                 for s in rng.spawn(n_samples + 1))
    _sweep_kernel(config.spins, nbrs, rates, nbrs.shape[1], burn_in * n,
                  next(seeds))
    out = np.empty(n_samples)
    for i in range(n_samples):
        _sweep_kernel(config.spins, nbrs, rates, nbrs.shape[1],
                      sweeps_between * n, next(seeds))
        out[i] = config.spins.sum() / n
    return out
