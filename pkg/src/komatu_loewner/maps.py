"""Hydrodynamically normalised maps given by the integral representation

    f(z) = z + pi int Psi_D(z, xi) mu(dxi),

their angular residues, recovery of ``mu`` from boundary values of ``Im f``
and the Stieltjes-type inversion of the BMD Poisson kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BASE, SlitConfig, as_sheet_point
from .kernel import NonConvergent, PoissonKernelModel, kernel_solver, richardson
from .measures import BoundaryMeasure


@dataclass
class IntegralRepMap:
    """``f(z) = z + pi Psi_D[mu](z)`` on ``D(s)`` and its reflected sheets."""

    s: SlitConfig
    mu: BoundaryMeasure
    degree: int = 24

    def __post_init__(self):
        self.model: PoissonKernelModel = kernel_solver(self.s, self.degree).model(self.mu)

    def __call__(self, z, edge=None) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return z + np.pi * self.model.psi(z, edge)

    def at(self, p) -> complex:
        """Value at a sheet point; reflected sheets use the Schwarz reflection rule."""
        p = as_sheet_point(p)
        if p.sheet == BASE:
            return complex(self(p.z, p.edge))
        return p.z + np.pi * self.model.eval_psi(p)

    @property
    def residual(self) -> float:
        return self.model.residual


def apply_integral_rep(s: SlitConfig, mu: BoundaryMeasure, p, kernel_cache: dict | None = None,
                       degree: int = 24) -> complex:
    """Evaluate ``f(p) = p + pi int Psi_D(p, xi) mu(dxi)`` at a sheet point.

    ``kernel_cache`` (a plain dict) keeps fitted maps keyed by configuration
    and measure so repeated evaluations skip the solve.
    """
    key = (s.key(), mu.to_json(), degree)
    if kernel_cache is not None and key in kernel_cache:
        f = kernel_cache[key]
    else:
        f = IntegralRepMap(s, mu, degree)
        if kernel_cache is not None:
            kernel_cache[key] = f
    return f.at(p)


@dataclass
class ResidueEstimate:
    value: complex
    error: float
    ray_spread: float

    def __complex__(self):
        return complex(self.value)


def angular_residue(f, theta: float = np.pi / 4, radius_ladder=(100.0, 200.0, 400.0),
                    contraction: float = 1.0001) -> ResidueEstimate:
    """``c = -lim z (f(z) - z)`` as ``z -> inf`` inside ``theta < arg z < pi - theta``.

    The limit is extrapolated along the imaginary axis (Richardson in
    ``1/|z|``); the spread between the rays ``arg z = theta`` and
    ``pi - theta`` at the largest radius is reported as a sector check.
    """
    r = np.asarray(sorted(radius_ladder), dtype=float)
    z = 1j * r
    vals = -z * (np.asarray(f(z), dtype=complex) - z)
    d = np.abs(np.diff(vals))
    if d.size >= 2 and np.any(d[1:] > contraction * d[:-1] + 1e-13):
        raise NonConvergent(f"residue ladder does not contract: {vals}")
    est, err = richardson(list(vals), 1.0 / r, order=1.0)
    zr = r[-1] * np.exp(1j * np.array([theta, np.pi - theta]))
    side = -zr * (np.asarray(f(zr), dtype=complex) - zr)
    spread = float(np.max(np.abs(side - vals[-1])))
    return ResidueEstimate(complex(est), float(err), spread)


@dataclass
class RecoveryDiagnostics:
    grid: np.ndarray
    density: np.ndarray
    error: np.ndarray
    converged: np.ndarray
    eps_ladder: tuple


def recover_measure(f, s: SlitConfig | None, grid, eps_ladder=(1e-2, 5e-3, 2.5e-3),
                    return_diagnostics: bool = False, flag_tol: float = 1e-2):
    """Density ``Im f(xi + i0) / pi`` on ``grid`` by Richardson in ``eps``.

    Nodes whose ladder does not contract, or whose extrapolation moves by
    more than ``flag_tol`` times the local scale, are flagged (reported in
    the diagnostics) rather than failing the call.  Negative extrapolated
    values are clipped to zero.
    """
    grid = np.asarray(grid, dtype=float)
    eps = np.asarray(sorted(eps_ladder, reverse=True), dtype=float)
    vals = [np.asarray(f(grid + 1j * e), dtype=complex).imag / np.pi for e in eps]
    est, err = richardson(vals, eps, order=1.0)
    est = np.asarray(est, dtype=float)
    d1 = np.abs(vals[1] - vals[0]) if len(vals) > 1 else np.zeros_like(est)
    d2 = np.abs(vals[2] - vals[1]) if len(vals) > 2 else d1 / 2
    scale = np.maximum(np.abs(est), np.max(np.abs(est)) * 1e-3 + 1e-15)
    converged = (d2 <= d1 * 1.0001 + 1e-14) & (np.asarray(err) <= flag_tol * scale + 1e-12)
    dens = np.clip(est, 0.0, None)
    mu = BoundaryMeasure(grid=grid, density=dens)
    if return_diagnostics:
        return mu, RecoveryDiagnostics(grid, est, np.asarray(err), converged, tuple(eps))
    return mu


def _graded_panels(a: float, b: float, breakpoints, y: float, n_outer: int = 8):
    """Panel edges on ``[a, b]`` refined geometrically toward breakpoints down to ``y/8``."""
    edges = {a, b}
    for p in breakpoints:
        if not (a - 10 * y <= p <= b + 10 * y):
            continue
        w = y / 8
        while w < (b - a):
            for q in (p - w, p + w):
                if a < q < b:
                    edges.add(q)
            w *= 2
        if a < p < b:
            edges.add(p)
    e = np.array(sorted(edges))
    fill = np.linspace(a, b, n_outer + 1)
    return np.union1d(e, fill)


def stieltjes_inversion(s: SlitConfig, mu: BoundaryMeasure, a: float, b: float,
                        y_ladder=(0.02, 0.01, 0.005), degree: int = 24, gauss_nodes: int = 16,
                        return_error: bool = False):
    """``lim_{y->0} int_a^b Im Psi_D[mu](x + iy) dx``, which equals
    ``mu((a, b)) + (mu{a} + mu{b}) / 2``.
    """
    if not a < b:
        raise ValueError("need a < b")
    model = kernel_solver(s, degree).model(mu)
    gx, gw = np.polynomial.legendre.leggauss(gauss_nodes)
    brk = [a, b] + list(mu.atom_locations[mu.atom_masses > 0]) + (
        [mu.grid[0], mu.grid[-1]] if mu.grid.size else [])
    ys = np.asarray(sorted(y_ladder, reverse=True), dtype=float)
    vals = []
    for y in ys:
        e = _graded_panels(a, b, brk, y)
        mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * np.diff(e)
        x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
        vals.append(float(w @ model.psi(x + 1j * y).imag))
    d = np.abs(np.diff(vals))
    if d.size >= 2 and d[1] > 1.0001 * d[0] + 1e-13:
        raise NonConvergent(f"y ladder does not contract: {vals}")
    est, err = richardson(vals, ys, order=1.0)
    return (float(est), float(err)) if return_error else float(est)


def hcap(f, **kw) -> float:
    """Half-plane capacity of a normalised map: the real part of its angular residue."""
    return float(angular_residue(f, **kw).value.real)


def compose(g, f):
    """``g o f`` as a map evaluator."""
    return lambda z: g(f(z))


__all__ = ["IntegralRepMap", "apply_integral_rep", "angular_residue", "ResidueEstimate",
           "recover_measure", "RecoveryDiagnostics", "stieltjes_inversion", "hcap", "compose"]
