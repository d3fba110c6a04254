"""Potential theory on a slit half-plane: Green function, harmonic basis,
period matrix, the BMD Green function ``G*`` and ``K*`` as its normal
derivative on the real axis.

Harmonic functions vanishing on ``R`` are represented as single layers on
the slits with their negative mirror images.  On slit ``k`` the layer density
in the local variable ``tau = (x - c_k) / h_k`` is the Chebyshev expansion

    sigma(tau) = sum_m d_km T_m(tau) / sqrt(1 - tau^2),

whose logarithmic potentials are known in closed form through the exterior
Joukowski variable ``J``::

    (1/pi) int log|zeta - tau| T_0 / sqrt(1 - tau^2) dtau = log|J(zeta) / 2|
    (1/pi) int log|zeta - tau| T_m / sqrt(1 - tau^2) dtau = -Re J(zeta)^-m / m

so the layer potential is ``sum d_km (l_m(zeta_mirror) - l_m(zeta))``.  The
square-root endpoint behaviour of the density is built in, which gives
geometric convergence in the number of modes.  This pipeline only shares the
Joukowski helper with the kernel fit; ``K*`` is obtained here by finite
differencing ``G*`` toward the boundary, not from the holomorphic kernel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import SlitConfig, eta
from .kernel import IllConditioned, NonConvergent, ResidualExceeded, joukowski, richardson


def green_h(z, w) -> np.ndarray:
    """``(1/pi) log |(z - conj(w)) / (z - w)|``, the normalised Green function of H."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if np.any(z == w):
        raise ValueError("green_h is singular at coincident points")
    return np.log(np.abs((z - np.conj(w)) / (z - w))) / np.pi


def _mode_potentials(zeta, M):
    """``l_m(zeta)`` for ``m = 0..M-1``, stacked on the last axis."""
    J = joukowski(zeta)
    out = np.empty(np.shape(zeta) + (M,))
    out[..., 0] = np.log(np.abs(J) / 2.0)
    if M > 1:
        m = np.arange(1, M)
        out[..., 1:] = -np.real((1.0 / J)[..., None] ** m) / m
    return out


@dataclass(frozen=True, eq=False)
class ChargeLayer:
    """Chebyshev single layer on every slit, with mirror images below ``R``.

    ``coeffs[k, m]`` is the weight of mode ``m`` on slit ``k``.  ``source``
    records the pole of the Green function the layer corrects (``None`` for
    a harmonic-basis layer) and ``label`` what boundary data was matched.
    """

    s: SlitConfig
    coeffs: np.ndarray
    residual: float
    source: complex | None = None
    label: str = ""
    mirror_images: bool = True

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] if self.coeffs.ndim == 2 else 0

    @property
    def nodes(self) -> list:
        """Chebyshev nodes on each slit (the collocation abscissas)."""
        M = self.degree
        tau = np.cos(np.pi * (np.arange(M) + 0.5) / M)
        return [c.real + h * tau + 1j * y
                for c, h, y in zip(self.s.centers, self.s.half_lengths, self.s.y)]

    @property
    def densities(self) -> list:
        """``sqrt(1 - tau^2) sigma(tau)`` at :attr:`nodes`, one array per slit."""
        M = self.degree
        theta = np.pi * (np.arange(M) + 0.5) / M
        T = np.cos(np.outer(theta, np.arange(M)))
        return [T @ self.coeffs[k] for k in range(self.s.n)]

    def charge(self, k: int) -> float:
        """Total charge of the layer on slit ``k`` (mode 0 only carries mass)."""
        return float(self.coeffs[k, 0])

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for k in range(self.s.n):
            c, h = self.s.centers[k], self.s.half_lengths[k]
            diff = _mode_potentials((z - np.conj(c)) / h, self.degree) \
                - _mode_potentials((z - c) / h, self.degree)
            out += diff @ self.coeffs[k]
        return out

    def to_dict(self) -> dict:
        return {"config": self.s.to_dict(), "coeffs": self.coeffs.tolist(),
                "residual": self.residual, "label": self.label,
                "source": None if self.source is None else [self.source.real, self.source.imag]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class LayerSolver:
    """QR factorisation of the layer collocation problem for one configuration."""

    def __init__(self, s: SlitConfig, degree: int = 24, collocation_factor: int = 4):
        self.s = s
        self.degree = int(degree)
        M = self.degree
        K = collocation_factor * M
        tau = np.cos(np.pi * (np.arange(K) + 0.5) / K)
        tau_v = np.cos(np.pi * np.arange(1, M + 8) / (M + 8))
        self.colloc_z = self._points(tau)
        self.verify_z = self._points(tau_v)
        if s.n:
            self._A = self._design(self.colloc_z)
            self._A_ver = self._design(self.verify_z)
            q, r = np.linalg.qr(self._A)
            diag = np.abs(np.diag(r))
            if diag.min() <= 1e-13 * diag.max():
                raise IllConditioned("layer system lost rank")
            self._q, self._r = q, r

    def _points(self, tau):
        return np.concatenate([c.real + h * tau + 1j * y for c, h, y in
                               zip(self.s.centers, self.s.half_lengths, self.s.y)]) \
            if self.s.n else np.zeros(0, complex)

    def _design(self, z):
        M = self.degree
        A = np.empty((z.size, self.s.n * M))
        for k in range(self.s.n):
            c, h = self.s.centers[k], self.s.half_lengths[k]
            A[:, k * M:(k + 1) * M] = _mode_potentials((z - np.conj(c)) / h, M) \
                - _mode_potentials((z - c) / h, M)
        return A

    def solve(self, data, label: str = "", source=None, tol: float | None = None) -> ChargeLayer:
        """Layer whose potential equals ``data(z)`` on every slit."""
        if self.s.n == 0:
            return ChargeLayer(self.s, np.zeros((0, self.degree)), 0.0, source, label)
        x = np.linalg.solve(self._r, self._q.T @ data(self.colloc_z))
        residual = float(np.max(np.abs(self._A_ver @ x - data(self.verify_z))))
        if tol is not None and residual > tol:
            raise ResidualExceeded(residual, tol)
        return ChargeLayer(self.s, x.reshape(self.s.n, self.degree), residual, source, label)


def solve_green(s: SlitConfig, w: complex, degree: int = 24, tol: float | None = 1e-8,
                solver: LayerSolver | None = None) -> ChargeLayer:
    """Layer ``L_w`` with ``G_D(z, w) = green_h(z, w) - L_w(z)``."""
    w = complex(w)
    if not s.contains(w):
        raise ValueError(f"pole {w} is not in the domain")
    solver = solver or LayerSolver(s, degree)
    return solver.solve(lambda z: green_h(z, w), f"green({w})", w, tol)


def green_d(layer: ChargeLayer, z) -> np.ndarray:
    """``G_D(z, w)`` from the layer returned by :func:`solve_green`."""
    return green_h(z, layer.source) - layer(z)


def harmonic_basis(s: SlitConfig, degree: int = 24, tol: float | None = 1e-8,
                   solver: LayerSolver | None = None) -> list:
    """Layers ``phi_j`` equal to 1 on slit ``j`` and 0 on the other slits."""
    solver = solver or LayerSolver(s, degree)
    out = []
    for j in range(s.n):
        yj, xl, xr = s.y[j], s.x_left[j], s.x_right[j]

        def data(z, yj=yj, xl=xl, xr=xr):
            return ((z.imag == yj) & (z.real >= xl) & (z.real <= xr)).astype(float)
        out.append(solver.solve(data, f"phi_{j + 1}", None, tol))
    return out


def period_matrix(s: SlitConfig, basis: list) -> np.ndarray:
    """``a_ij``: flux of ``grad phi_j`` into slit ``i``, equal to ``2 pi`` times the charge."""
    A = np.array([[2 * np.pi * basis[j].charge(i) for j in range(s.n)] for i in range(s.n)])
    if s.n and np.linalg.cond(A) > 1e12:
        raise np.linalg.LinAlgError("period matrix is numerically singular")
    return A


@dataclass
class BMDGreen:
    """Precomputed harmonic basis and period matrix for ``G*`` evaluations."""

    s: SlitConfig
    basis: list
    A: np.ndarray
    solver: LayerSolver

    @classmethod
    def build(cls, s: SlitConfig, degree: int = 24) -> "BMDGreen":
        solver = LayerSolver(s, degree)
        basis = harmonic_basis(s, degree, solver=solver)
        return cls(s, basis, period_matrix(s, basis), solver)

    def phi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.stack([b(z) for b in self.basis], axis=-1) if self.basis \
            else np.zeros(z.shape + (0,))

    def green_star(self, z, w) -> np.ndarray:
        """``G*(z, w) = G_D(z, w) + 2 Phi(z) A^-1 Phi(w)^T``; vectorised over ``z``."""
        layer = solve_green(self.s, w, solver=self.solver, tol=None)
        val = green_d(layer, z)
        if self.s.n:
            val = val + 2 * self.phi(z) @ np.linalg.solve(self.A, self.phi(w))
        return val


def green_star(s: SlitConfig, z, w, basis=None, A=None, degree: int = 24):
    """Generalised Green function ``G*_D(z, w)``."""
    if basis is None or A is None:
        g = BMDGreen.build(s, degree)
    else:
        g = BMDGreen(s, basis, A, LayerSolver(s, degree))
    return g.green_star(z, w)


def kstar_via_green(s: SlitConfig, z: complex, xi, h=None, degree: int = 24,
                    bmd: BMDGreen | None = None, return_error: bool = False):
    """``K*(z, xi) = lim G*(z, xi + i h) / (2 h)``, Richardson in ``h^2``.

    By symmetry of ``G*`` the pole is placed at ``z`` so one layer solve
    serves every ``xi``.  ``h`` defaults to the ladder ``eta/8, eta/16, eta/32``.
    """
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    bmd = bmd or BMDGreen.build(s, degree)
    if h is None:
        e = eta(s) if s.n else 1.0
        h = [e / 8, e / 16, e / 32]
    h = np.asarray(h, dtype=float)
    if s.n and np.any(h >= eta(s) / 4):
        raise ValueError("h ladder must stay below eta/4")
    layer = solve_green(s, z, solver=bmd.solver, tol=None)
    coupling = 2 * np.linalg.solve(bmd.A, bmd.phi(z)) if s.n else None
    vals = []
    for hk in h:
        w = xi + 1j * hk
        g = green_d(layer, w)
        if s.n:
            g = g + bmd.phi(w) @ coupling
        vals.append(g / (2 * hk))
    est, err = richardson(vals, h, order=2.0)
    if len(vals) >= 3:
        d1, d2 = np.abs(vals[1] - vals[0]), np.abs(vals[2] - vals[1])
        if np.any(d2 > d1 * 1.01 + 1e-14):
            raise NonConvergent("h ladder does not contract")
    if scalar:
        est, err = float(np.asarray(est)[0]), float(np.asarray(err)[0])
    if return_error:
        return est, err
    return est
