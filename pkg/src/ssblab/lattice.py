"""Periodic cubic lattice geometry: sites, torus distances, balls, regions.

Sites are indexed row-major by coordinates, which also fixes the global
tensor-factor ordering of the spin Hilbert space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Lattice:
    """Periodic cubic lattice with ``L**d`` sites.

    Parameters
    ----------
    d : int
        Spatial dimension (>= 1).
    L : int
        Linear size (>= 2). Boundary conditions are always periodic.
    """

    d: int
    L: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.L < 2:
            raise ValueError(f"side length must be >= 2, got {self.L}")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    def coord(self, site: int) -> tuple:
        """Row-major coordinates of a site index."""
        self._check_site(site)
        c = []
        for _ in range(self.d):
            c.append(site % self.L)
            site //= self.L
        return tuple(reversed(c))

    def site(self, coord) -> int:
        """Site index of a coordinate tuple (entries taken mod L)."""
        if len(coord) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(coord)}")
        s = 0
        for x in coord:
            s = s * self.L + (x % self.L)
        return s

    def sites(self):
        return range(self.n_sites)

    def _check_site(self, x: int):
        if not 0 <= x < self.n_sites:
            raise ValueError(f"invalid site index {x} for {self.n_sites} sites")

    def distance(self, x: int, y: int) -> int:
        """L1 torus distance: per-axis min(|dx|, L-|dx|), summed."""
        cx, cy = self.coord(x), self.coord(y)
        return sum(min(abs(a - b), self.L - abs(a - b)) for a, b in zip(cx, cy))

    def neighbors(self, x: int) -> list:
        """The 2d nearest neighbors of a site (with multiplicity removed
        only by set semantics of the caller; for L=2 both directions along
        an axis coincide)."""
        cx = self.coord(x)
        out = []
        for axis in range(self.d):
            for step in (+1, -1):
                c = list(cx)
                c[axis] = (c[axis] + step) % self.L
                out.append(self.site(c))
        return out

    def ball(self, x: int, r: int) -> "Region":
        """All sites within torus distance r of x."""
        if r < 0:
            raise ValueError("radius must be >= 0")
        self._check_site(x)
        cx = self.coord(x)
        hits = []
        for delta in itertools.product(range(-min(r, self.L // 2), min(r, self.L // 2) + 1),
                                       repeat=self.d):
            c = tuple((a + dd) % self.L for a, dd in zip(cx, delta))
            s = self.site(c)
            if self.distance(x, s) <= r:
                hits.append(s)
        return Region(self, sorted(set(hits)))

    def full_region(self) -> "Region":
        return Region(self, list(self.sites()))


@dataclass(frozen=True)
class Region:
    """Ordered duplicate-free set of sites of a lattice."""

    lattice: Lattice
    sites: tuple = field(default=())

    def __init__(self, lattice: Lattice, sites):
        sites = tuple(dict.fromkeys(sites))
        for s in sites:
            lattice._check_site(s)
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "sites", sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, x):
        return x in set(self.sites)

    def union(self, other: "Region") -> "Region":
        return Region(self.lattice, tuple(self.sites) + tuple(other.sites))

    def intersects(self, other: "Region") -> bool:
        return bool(set(self.sites) & set(other.sites))

    def issubset(self, other: "Region") -> bool:
        return set(self.sites) <= set(other.sites)

    def enlarge(self, r: int) -> "Region":
        """Union of balls of radius r around every site of the region."""
        if r < 0:
            raise ValueError("radius must be >= 0")
        out = []
        for x in self.sites:
            out.extend(self.lattice.ball(x, r).sites)
        return Region(self.lattice, sorted(set(out)))


def torus_distance(lattice: Lattice, x: int, y: int) -> int:
    return lattice.distance(x, y)


def ball(lattice: Lattice, x: int, r: int) -> Region:
    return lattice.ball(x, r)


def enlarge(region: Region, r: int) -> Region:
    return region.enlarge(r)
