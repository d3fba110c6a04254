"""Finite Borel measures on the real line: atoms plus a piecewise-linear density."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class MeasureError(ValueError):
    pass


def _as_1d(a) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class BoundaryMeasure:
    """``sum_k m_k delta_{xi_k} + rho(xi) dxi`` on ``R``.

    The density is the piecewise-linear interpolant of ``density`` on the
    increasing ``grid`` and vanishes outside it.  Its quadrature weights are
    the trapezoid weights of the grid, which integrate the interpolant exactly.
    """

    atom_locations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        loc, mass = _as_1d(self.atom_locations), _as_1d(self.atom_masses)
        grid, dens = _as_1d(self.grid), _as_1d(self.density)
        if loc.shape != mass.shape:
            raise MeasureError("atom locations and masses differ in length")
        if grid.shape != dens.shape:
            raise MeasureError("grid and density differ in length")
        if grid.size == 1:
            raise MeasureError("a density needs at least two grid nodes")
        if grid.size and np.any(np.diff(grid) <= 0):
            raise MeasureError("density grid must be strictly increasing")
        if np.any(mass < 0) or np.any(dens < 0):
            raise MeasureError("measure must be nonnegative")
        if not (np.all(np.isfinite(loc)) and np.all(np.isfinite(mass))
                and np.all(np.isfinite(grid)) and np.all(np.isfinite(dens))):
            raise MeasureError("measure data must be finite")
        for name, arr in (("atom_locations", loc), ("atom_masses", mass),
                          ("grid", grid), ("density", dens)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- constructors -----------------------------------------------------------

    @classmethod
    def zero(cls) -> "BoundaryMeasure":
        return cls()

    @classmethod
    def dirac(cls, xi: float, mass: float = 1.0) -> "BoundaryMeasure":
        return cls([xi], [mass])

    @classmethod
    def atoms(cls, locations, masses) -> "BoundaryMeasure":
        return cls(locations, masses)

    @classmethod
    def from_density(cls, grid, density) -> "BoundaryMeasure":
        return cls(grid=grid, density=density)

    @classmethod
    def from_function(cls, func, a: float, b: float, n: int = 401) -> "BoundaryMeasure":
        grid = np.linspace(a, b, n)
        return cls(grid=grid, density=np.asarray(func(grid), dtype=float))

    # -- basic quantities -------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights of the density grid."""
        g = self.grid
        if g.size == 0:
            return np.zeros(0)
        h = np.diff(g)
        w = np.zeros_like(g)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @property
    def total_mass(self) -> float:
        return float(self.atom_masses.sum() + self.weights @ self.density)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.atom_masses) and not np.any(self.density)

    def support_bound(self) -> float:
        """``sup |xi|`` over the support (0 for the zero measure)."""
        vals = [0.0]
        if np.any(self.atom_masses > 0):
            vals.append(float(np.max(np.abs(self.atom_locations[self.atom_masses > 0]))))
        if np.any(self.density > 0):
            nz = np.nonzero(self.density)[0]
            lo, hi = max(nz[0] - 1, 0), min(nz[-1] + 1, self.grid.size - 1)
            vals.append(float(max(abs(self.grid[lo]), abs(self.grid[hi]))))
        return max(vals)

    def scaled(self, c: float) -> "BoundaryMeasure":
        return BoundaryMeasure(self.atom_locations, c * self.atom_masses,
                               self.grid, c * self.density)

    def shifted(self, t: float) -> "BoundaryMeasure":
        return BoundaryMeasure(self.atom_locations + t, self.atom_masses,
                               self.grid + t if self.grid.size else self.grid, self.density)

    def density_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grid.size == 0:
            return np.zeros_like(x)
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)

    def mass_of_interval(self, a: float, b: float) -> float:
        """``mu((a, b)) + (mu{a} + mu{b}) / 2``."""
        loc, m = self.atom_locations, self.atom_masses
        inner = m[(loc > a) & (loc < b)].sum()
        ends = 0.5 * (m[loc == a].sum() + m[loc == b].sum())
        dens = 0.0
        if self.grid.size:
            lo, hi = max(a, self.grid[0]), min(b, self.grid[-1])
            if hi > lo:
                nodes = np.concatenate([[lo], self.grid[(self.grid > lo) & (self.grid < hi)], [hi]])
                dens = np.trapezoid(self.density_at(nodes), nodes)
        return float(inner + ends + dens)

    # -- transforms ---------------------------------------------------------------

    def cauchy_transform(self, z) -> np.ndarray:
        """``int mu(dxi) / (z - xi)`` for ``Im z >= 0`` off the support.

        Exact for the piecewise-linear density: on a panel ``[a, b]`` the
        integral equals ``rho_lin(z) log((z-a)/(z-b)) - (rho_b - rho_a)``.
        """
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        if self.atom_masses.size:
            out += np.sum(self.atom_masses / (z[..., None] - self.atom_locations), axis=-1)
        if self.grid.size and np.any(self.density):
            a, b = self.grid[:-1], self.grid[1:]
            ra, rb = self.density[:-1], self.density[1:]
            keep = (ra != 0) | (rb != 0)
            a, b, ra, rb = a[keep], b[keep], ra[keep], rb[keep]
            zz = z[..., None]
            slope = (rb - ra) / (b - a)
            log_ratio = np.log((zz - a) / (zz - b))
            out += np.sum((ra + slope * (zz - a)) * log_ratio - (rb - ra), axis=-1)
        return out

    def integrate(self, f) -> complex:
        """``int f dmu`` with atoms exact and the density by its trapezoid weights."""
        val = 0.0
        if self.atom_masses.size:
            val = val + np.sum(self.atom_masses * f(self.atom_locations))
        if self.grid.size:
            val = val + np.sum(self.weights * self.density * f(self.grid))
        return val

    # -- serialisation --------------------------------------------------------------

    def to_dict(self) -> dict:
        return {"atoms": [[float(x), float(m)] for x, m in zip(self.atom_locations, self.atom_masses)],
                "grid": self.grid.tolist(), "density": self.density.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundaryMeasure":
        atoms = np.asarray(d.get("atoms", []), dtype=float).reshape(-1, 2)
        return cls(atoms[:, 0], atoms[:, 1], d.get("grid", []), d.get("density", []))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BoundaryMeasure":
        return cls.from_dict(json.loads(text))

    def __add__(self, other: "BoundaryMeasure") -> "BoundaryMeasure":
        if self.grid.size and other.grid.size:
            grid = np.union1d(self.grid, other.grid)
            dens = self.density_at(grid) + other.density_at(grid)
        elif self.grid.size:
            grid, dens = self.grid, self.density
        else:
            grid, dens = other.grid, other.density
        return BoundaryMeasure(np.concatenate([self.atom_locations, other.atom_locations]),
                               np.concatenate([self.atom_masses, other.atom_masses]), grid, dens)
