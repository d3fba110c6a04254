"""Complex Poisson kernel of Brownian motion with darning on a slit half-plane.

``Psi_D(z, xi)`` is the holomorphic function on ``D`` whose imaginary part is
the BMD Poisson kernel ``K*_D(z, xi)`` and which vanishes at infinity.  It is
built as the half-plane kernel ``-1/(pi (z - xi))`` plus a correction

    sum_{j,m} a_jm (w_j^-m + wt_j^-m) + b_jm i (w_j^-m - wt_j^-m),

where ``w_j`` is the exterior Joukowski variable of slit ``j`` and ``wt_j``
the one of its mirror image in the real axis.  Every basis function is real
on ``R`` and single-valued, so only the slit conditions ``Im Psi = k_j`` are
fitted (least squares, levels ``k_j`` solved jointly).

Because the fit is linear in the boundary data, the kernel integrated
against a measure, ``Psi_D[mu](z) = int Psi_D(z, xi) mu(dxi)``, is obtained
by the same solve with the Cauchy transform of ``mu`` as data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import BASE, SheetPoint, SlitConfig, as_sheet_point, mirror, r_out
from .measures import BoundaryMeasure


class KernelError(RuntimeError):
    pass


class ResidualExceeded(KernelError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"boundary defect {residual:.3e} exceeds tolerance {tol:.3e}")
        self.residual = residual
        self.tol = tol


class IllConditioned(KernelError):
    pass


class PoleProximity(KernelError):
    pass


class NonConvergent(KernelError):
    pass


class BoundViolated(KernelError):
    def __init__(self, ratio: float, witness):
        super().__init__(f"Koebe ratio {ratio:.6f} > 1 at z={witness[0]}, xi={witness[1]}")
        self.ratio = ratio
        self.witness = witness


POLE_GUARD = 1e-12


def joukowski(zeta, edge=None) -> np.ndarray:
    """Exterior inverse of ``zeta = (w + 1/w)/2``, so ``|w| >= 1``.

    Points on the cut ``[-1, 1]`` take the upper-edge value unless
    ``edge < 0``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    w = zeta + np.sqrt(zeta - 1) * np.sqrt(zeta + 1)
    on_cut = (zeta.imag == 0) & (np.abs(zeta.real) <= 1)
    if np.any(on_cut):
        t = zeta.real[on_cut]
        sgn = np.ones_like(t)
        if edge is not None:
            e = np.broadcast_to(np.asarray(edge), zeta.shape)[on_cut]
            sgn = np.where(e < 0, -1.0, 1.0)
        w = np.array(w, copy=True)
        w[on_cut] = t + 1j * sgn * np.sqrt(np.maximum(1 - t * t, 0.0))
    return w


def psi_half_plane(z, xi) -> np.ndarray:
    """``Psi_H(z, xi) = -1 / (pi (z - xi))``."""
    return -1.0 / (np.pi * (np.asarray(z, dtype=complex) - xi))


def psi_half_plane_measure(mu: BoundaryMeasure, z) -> np.ndarray:
    return -mu.cauchy_transform(z) / np.pi


class KernelSolver:
    """Factorised least-squares problem for one slit configuration.

    Parameters
    ----------
    s : SlitConfig
    degree : int
        Number of Joukowski powers per slit (each with two real coefficients).
    collocation_factor : int
        Collocation points per slit are ``collocation_factor * degree``,
        split evenly between the two edges.
    """

    def __init__(self, s: SlitConfig, degree: int = 24, collocation_factor: int = 8):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.s = s
        self.degree = int(degree)
        self.n = s.n
        self.n_coef = 2 * self.degree * self.n
        self._c = s.centers
        self._h = s.half_lengths
        per_edge = max(collocation_factor * self.degree // 2, self.degree + 1)
        self.colloc_z, self.colloc_slit, self.colloc_edge = self._edge_points(
            (np.arange(per_edge) + 0.5) / per_edge)
        n_ver = self.degree + 7
        self.verify_z, self.verify_slit, self.verify_edge = self._edge_points(
            (np.arange(1, n_ver + 1)) / (n_ver + 1))
        self.collocation_count = int(self.colloc_z.size)
        if self.n:
            self._A = self._design(self.colloc_z, self.colloc_slit, self.colloc_edge)
            self._A_ver = self._design(self.verify_z, self.verify_slit, self.verify_edge)
            q, r = np.linalg.qr(self._A)
            diag = np.abs(np.diag(r))
            if diag.min() <= 1e-13 * diag.max():
                raise IllConditioned(
                    f"effective rank collapsed (min/max |R_ii| = {diag.min() / diag.max():.2e})")
            self._q, self._r = q, r

    def _edge_points(self, fractions):
        theta = np.pi * np.asarray(fractions)
        zs, js, es = [], [], []
        for j in range(self.n):
            x = self._c[j].real + self._h[j] * np.cos(theta)
            for edge in (+1, -1):
                zs.append(x + 1j * self.s.y[j])
                js.append(np.full(theta.size, j))
                es.append(np.full(theta.size, edge))
        if not zs:
            return np.zeros(0, complex), np.zeros(0, int), np.zeros(0, int)
        return np.concatenate(zs), np.concatenate(js), np.concatenate(es)

    def basis(self, z, edge=None) -> np.ndarray:
        """Complex basis values, shape ``z.shape + (n_coef,)``."""
        z = np.asarray(z, dtype=complex)
        M = self.degree
        out = np.empty(z.shape + (self.n_coef,), dtype=complex)
        m = np.arange(1, M + 1)
        for k in range(self.n):
            w = joukowski((z - self._c[k]) / self._h[k], edge)
            wt = joukowski((z - np.conj(self._c[k])) / self._h[k])
            pw = (1.0 / w)[..., None] ** m
            pwt = (1.0 / wt)[..., None] ** m
            out[..., 2 * M * k:2 * M * k + M] = pw + pwt
            out[..., 2 * M * k + M:2 * M * (k + 1)] = 1j * (pw - pwt)
        return out

    def _design(self, z, slit, edge):
        A = np.zeros((z.size, self.n_coef + self.n))
        A[:, :self.n_coef] = self.basis(z, edge).imag
        A[np.arange(z.size), self.n_coef + slit] = -1.0
        return A

    def _rhs(self, psi_h_values):
        return -np.asarray(psi_h_values).imag

    def solve_measure(self, mu: BoundaryMeasure):
        """Coefficients, levels and verification defect for ``Psi_D[mu]``."""
        if self.n == 0:
            return np.zeros(0), np.zeros(0), 0.0
        b = self._rhs(psi_half_plane_measure(mu, self.colloc_z))
        x = np.linalg.solve(self._r, self._q.T @ b)
        b_ver = self._rhs(psi_half_plane_measure(mu, self.verify_z))
        residual = float(np.max(np.abs(self._A_ver @ x - b_ver)))
        return x[:self.n_coef], x[self.n_coef:], residual

    def solve_points(self, xi):
        """Batch solve for unit atoms at each ``xi``; columns index ``xi``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.n == 0:
            return np.zeros((0, xi.size)), np.zeros((0, xi.size)), np.zeros(xi.size)
        b = self._rhs(psi_half_plane(self.colloc_z[:, None], xi[None, :]))
        x = np.linalg.solve(self._r, self._q.T @ b)
        b_ver = self._rhs(psi_half_plane(self.verify_z[:, None], xi[None, :]))
        residual = np.max(np.abs(self._A_ver @ x - b_ver), axis=0)
        return x[:self.n_coef], x[self.n_coef:], residual

    def model(self, mu: BoundaryMeasure, tol: float | None = None) -> "PoissonKernelModel":
        coeffs, levels, residual = self.solve_measure(mu)
        if tol is not None and residual > tol:
            raise ResidualExceeded(residual, tol)
        return PoissonKernelModel(self.s, mu, self.degree, coeffs, levels, residual,
                                  self.collocation_count, _solver=self)

    def psi_points(self, z, xi, edge=None) -> np.ndarray:
        """``Psi_D(z_a, xi_b)`` as a matrix over base-sheet points and poles."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = psi_half_plane(z[:, None], xi[None, :])
        if self.n:
            coef, _, _ = self.solve_points(xi)
            out = out + self.basis(z, edge) @ coef
        return out


@lru_cache(maxsize=128)
def kernel_solver(s: SlitConfig, degree: int = 24) -> KernelSolver:
    """Cached :class:`KernelSolver` keyed by configuration and degree."""
    return KernelSolver(s, degree)


@dataclass(eq=False)
class PoissonKernelModel:
    """Fitted ``Psi_D(., xi)`` (or its integral against a measure ``source``)."""

    s: SlitConfig
    source: BoundaryMeasure
    degree: int
    coeffs: np.ndarray
    slit_levels: np.ndarray
    residual: float
    collocation_count: int
    _solver: KernelSolver | None = field(default=None, repr=False)

    @property
    def xi(self) -> float | None:
        src = self.source
        if src.grid.size == 0 and src.atom_locations.size == 1 and src.atom_masses[0] == 1.0:
            return float(src.atom_locations[0])
        return None

    @property
    def solver(self) -> KernelSolver:
        if self._solver is None:
            self._solver = kernel_solver(self.s, self.degree)
        return self._solver

    def psi(self, z, edge=None) -> np.ndarray:
        """Values at base-sheet points (on-slit points use ``edge``)."""
        z = np.asarray(z, dtype=complex)
        out = psi_half_plane_measure(self.source, z)
        if self.s.n:
            out = out + self.solver.basis(z, edge) @ self.coeffs
        return out

    def eval_psi(self, p) -> complex:
        """Value at a sheet point, continuing across slits by reflection."""
        p = as_sheet_point(p)
        _check_pole(self.source, p.z if p.sheet == BASE else mirror(p.z, self.s.y[p.sheet - 1]))
        if p.sheet == BASE:
            return complex(self.psi(p.z, p.edge))
        j = p.sheet - 1
        base_val = complex(self.psi(mirror(p.z, self.s.y[j])))
        return base_val.conjugate() + 2j * self.slit_levels[j]

    def eval_kstar(self, z) -> np.ndarray:
        return self.psi(z).imag

    def to_dict(self) -> dict:
        return {"schema_version": 1, "config": self.s.to_dict(), "source": self.source.to_dict(),
                "xi": self.xi, "degree": self.degree, "coeffs": self.coeffs.tolist(),
                "slit_levels": self.slit_levels.tolist(), "residual": self.residual,
                "collocation_count": self.collocation_count}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PoissonKernelModel":
        return cls(SlitConfig.from_dict(d["config"]), BoundaryMeasure.from_dict(d["source"]),
                   int(d["degree"]), np.asarray(d["coeffs"], float),
                   np.asarray(d["slit_levels"], float), float(d["residual"]),
                   int(d["collocation_count"]))

    @classmethod
    def from_json(cls, text: str) -> "PoissonKernelModel":
        return cls.from_dict(json.loads(text))


def _check_pole(mu: BoundaryMeasure, z: complex):
    if mu.atom_locations.size and abs(z.imag) < POLE_GUARD:
        if np.min(np.abs(z - mu.atom_locations)) < POLE_GUARD:
            raise PoleProximity(f"evaluation point {z} is within {POLE_GUARD} of a pole")


def build_kernel(s: SlitConfig, xi: float, degree: int = 24, tol: float = 1e-8) -> PoissonKernelModel:
    """Fit ``Psi_D(., xi)``; raises :class:`ResidualExceeded` above ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return kernel_solver(s, degree).model(BoundaryMeasure.dirac(xi), tol)


def build_measure_kernel(s: SlitConfig, mu: BoundaryMeasure, degree: int = 24,
                         tol: float | None = None) -> PoissonKernelModel:
    return kernel_solver(s, degree).model(mu, tol)


def eval_psi(model: PoissonKernelModel, p) -> complex:
    return model.eval_psi(p)


def eval_kstar(model: PoissonKernelModel, z) -> float:
    return float(np.imag(model.eval_psi(z)))


def richardson(values, hs, order: float = 1.0, levels: int | None = None):
    """Richardson table for ``values(h) = v0 + c1 h^order + c2 h^(2 order) ...``.

    Returns ``(estimate, error_bar)``; the error bar is the change produced by
    the last elimination.
    """
    values = [np.asarray(v) for v in values]
    hs = np.asarray(hs, dtype=float)
    table = [values]
    k = 1
    levels = len(values) - 1 if levels is None else levels
    while len(table[-1]) > 1 and k <= levels:
        prev = table[-1]
        nxt = []
        for i in range(len(prev) - 1):
            ratio = (hs[i] / hs[i + 1]) ** (order * k)
            nxt.append(prev[i + 1] + (prev[i + 1] - prev[i]) / (ratio - 1))
        table.append(nxt)
        k += 1
    est = table[-1][-1]
    err = np.abs(table[-1][-1] - table[-2][-1]) if len(table) > 1 else np.inf
    return est, err



def kstar_total_mass(s: SlitConfig, z, cutoff: float = 50.0, degree: int = 24,
                     panels: int = 200, nodes: int = 16, tail_nodes: int = 32):
    """``int_R K*_D(z, xi) dxi`` for each ``z``.

    Composite Gauss-Legendre on ``[-cutoff, cutoff]`` with panels graded
    around ``Re z``; the two tails are integrated in ``u = 1/xi``, where
    ``K*(z, 1/u) / u^2`` is smooth up to ``u = 0`` (its limit is the
    ``xi^-2`` decay coefficient of the kernel).
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    solver = kernel_solver(s, degree)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    out = np.empty(z.size)
    for k, zk in enumerate(z):
        # panels concentrated where the Lorentzian of width Im z sits
        u = np.linspace(-1.0, 1.0, panels + 1)
        edges = zk.real + zk.imag * np.sinh(u * np.arcsinh(cutoff / zk.imag * 1.5))
        edges = np.unique(np.clip(np.concatenate([edges, [-cutoff, cutoff]]), -cutoff, cutoff))
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        xi = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
        core = float(w @ solver.psi_points(zk, xi)[0].imag)
        tx, tw = np.polynomial.legendre.leggauss(tail_nodes)
        uu = 0.5 / cutoff * (tx + 1.0)
        uw = 0.5 / cutoff * tw
        tail = 0.0
        for sign in (+1.0, -1.0):
            vals = solver.psi_points(zk, sign / uu)[0].imag / uu ** 2
            tail += float(uw @ vals)
        out[k] = core + tail
    return float(out[0]) if scalar else out

def residue_at_infinity(model: PoissonKernelModel, radius_ladder=(250.0, 500.0, 1000.0)):
    """Extrapolate ``lim z Psi(z, xi)`` along ``z = iy``; returns ``(value, error)``."""
    ys = np.asarray(sorted(radius_ladder), dtype=float)
    if np.any(ys <= r_out(model.s)):
        raise ValueError("radius ladder must exceed r_out of the configuration")
    vals = [complex(1j * y * model.psi(1j * y)) for y in ys]
    diffs = np.abs(np.diff(vals))
    if len(diffs) >= 2 and np.any(diffs[1:] > diffs[:-1] * 1.0001 + 1e-15):
        raise NonConvergent(f"ladder estimates do not contract: {vals}")
    # z Psi = -1/pi + c1/z + c2/z^2 + ...: expand in h = 1/y
    est, err = richardson(vals, 1.0 / ys, order=1.0)
    return complex(est), float(err)


def sector_bound(model: PoissonKernelModel, theta: float = np.pi / 4, radius: float = 1e3,
                 samples: int = 64) -> float:
    """Empirical ``max |z Psi(z, xi)|`` on the arc ``|z| = radius`` inside the sector."""
    ang = np.linspace(theta, np.pi - theta, samples)
    z = radius * np.exp(1j * ang)
    return float(np.max(np.abs(z * model.psi(z))))


@dataclass
class KoebeReport:
    max_ratio: float
    samples: int
    witness: tuple
    slack: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= 1.0 + self.slack


def koebe_ratio(solver: KernelSolver, z, xi) -> np.ndarray:
    """``|Psi| min(|z - xi|, d(xi, slits)) pi / 4`` for paired samples."""
    z = np.asarray(z, dtype=complex)
    xi = np.asarray(xi, dtype=float)
    psi = psi_half_plane(z, xi)
    if solver.n:
        coef, _, _ = solver.solve_points(xi)
        psi = psi + np.einsum("ij,ji->i", solver.basis(z), coef)
    d = np.minimum(np.abs(z - xi), solver.s.distance_to_slits(xi + 0j))
    return np.abs(psi) * d * np.pi / 4


def sample_domain(s: SlitConfig, n: int, rng: np.random.Generator, radius: float | None = None,
                  y_min: float = 1e-3) -> np.ndarray:
    """Random points of ``D(s)``: uniform abscissa, log-uniform height."""
    R = radius if radius is not None else 3.0 * max(r_out(s), 1.0)
    out = np.empty(0, complex)
    while out.size < n:
        x = rng.uniform(-R, R, 2 * n)
        y = np.exp(rng.uniform(np.log(y_min), np.log(R), 2 * n))
        z = x + 1j * y
        keep = s.contains(z) & (s.distance_to_slits(z) > 1e-9)
        out = np.concatenate([out, z[keep]])
    return out[:n]


def koebe_bound_check(model_or_solver, samples: int = 10_000, seed: int = 0,
                      xi=None, slack: float = 1e-6, raise_on_violation: bool = False) -> KoebeReport:
    """Largest Koebe ratio over random samples; ``<= 1`` up to ``slack``.

    With a model the pole is fixed at ``model.xi``; with a solver the poles
    are drawn at random alongside the points (or taken from ``xi``).
    """
    rng = np.random.default_rng(seed)
    if isinstance(model_or_solver, PoissonKernelModel):
        solver = model_or_solver.solver
        xi_fixed = model_or_solver.xi
        if xi_fixed is None:
            raise ValueError("Koebe check needs a point-source model")
        xi_s = np.full(samples, xi_fixed)
    else:
        solver = model_or_solver
        R = 3.0 * max(r_out(solver.s), 1.0)
        xi_s = rng.uniform(-R, R, samples) if xi is None else np.broadcast_to(xi, (samples,))
    z = sample_domain(solver.s, samples, rng)
    ratios = np.empty(samples)
    for lo in range(0, samples, 1000):
        sl = slice(lo, lo + 1000)
        ratios[sl] = koebe_ratio(solver, z[sl], xi_s[sl])
    i = int(np.argmax(ratios))
    report = KoebeReport(float(ratios[i]), samples, (complex(z[i]), float(xi_s[i])), slack)
    if raise_on_violation and not report.passed:
        raise BoundViolated(report.max_ratio, report.witness)
    return report
