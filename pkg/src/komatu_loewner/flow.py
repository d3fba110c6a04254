"""Komatu-Loewner flows on parallel slit half-planes.

The forward system, parametrised by half-plane capacity ``lambda(t) = 2t``,

    ds/dt = 2 b(nu_t, s(t)),        dz/dt = 2 pi int Psi_{s(t)}(z, xi) nu_t(dxi),

moves the slit vector and every tracked point together.  The reversed
(mapping-out) flow flips both signs.  ``b`` collects ``pi int Im Psi`` at the
left endpoints (heights) and ``pi int Re Psi`` at both endpoints (abscissas).

Tracked points live on the glued surface: base sheet, slit edges, or the copy
reflected across a slit.  Three integration modes are used:

* ordinary points integrate ``z`` directly, switching sheets when they cross
  the interior of a slit;
* points on a slit edge integrate only their abscissa, the height being that
  of the slit;
* points within ``rho_guard`` of a slit endpoint integrate the square-root
  chart coordinate ``w = sqrt(z - z_end)``, which obeys ``dw/dt = pi H(t, w)``
  with ``H`` obtained from a Cauchy integral on a circle in the chart.  This
  removes the square-root singularity of ``z -> Psi`` at the endpoint.

All modes share one Dormand-Prince 5(4) step with a max-norm error control
over the whole state.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .drivers import DrivingProcess
from .geometry import (BASE, GeometryError, SheetPoint, SlitConfig, as_sheet_point, eta,
                       l_half_gap, mirror, slit_distance, sq_coordinate, sq_inverse)
from .integrator import dopri_step, error_norm, next_step
from .kernel import KernelSolver, ResidualExceeded
from .measures import BoundaryMeasure


class FlowError(RuntimeError):
    pass


class MinStepUnderflow(FlowError):
    def __init__(self, t: float, dt: float, point: int | None = None, detail: str = ""):
        msg = f"step size {dt:.3e} underflow at t={t:.12g}"
        if point is not None:
            msg += f" (tracked point {point})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.t, self.dt, self.point = t, dt, point


class Absorption(FlowError):
    def __init__(self, j: int, zeta: float):
        super().__init__(f"slit {j} reached the absorption floor at t={zeta:.12g}")
        self.j, self.zeta = j, zeta


class ChartExit(FlowError):
    pass


class BoundaryHit(FlowError):
    def __init__(self, tau: float):
        super().__init__(f"backward path reached the real axis at t={tau:.12g}")
        self.tau = tau


@dataclass
class SolveOptions:
    """Step control and geometric guards.

    ``rho_guard`` defaults to ``min(l_D / 4, 0.1)`` of the current
    configuration; an explicit value must stay below ``l_D(s0) / 2``.
    ``rebuild_tol`` lets a kernel factorisation be reused while the slits
    move less than this distance (0 rebuilds at every stage).
    """

    rtol: float = 1e-10
    atol: float = 1e-10
    dt_initial: float = 1e-3
    dt_min: float = 1e-13
    dt_max: float = 0.05
    degree: int = 24
    rho_guard: float | None = None
    y_floor: float = 1e-3
    absorb_tol: float = 1e-6
    chart_nodes: int = 128
    chart_exit: float = 0.75
    max_steps: int = 200_000
    rebuild_tol: float = 0.0
    kernel_tol: float = 1e-7
    max_degree: int = 128

    def __post_init__(self):
        if self.y_floor <= 0:
            raise ValueError("y_floor must be positive")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")

    def guard(self, s: SlitConfig) -> float:
        if s.n == 0:
            return 0.0
        lD = l_half_gap(s)
        if self.rho_guard is None:
            return min(lD / 4, 0.1)
        return self.rho_guard

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# -- kernel evaluation helpers -------------------------------------------------------


class KernelLimit(FlowError):
    """The kernel fit misses its tolerance even at the largest allowed degree."""

    def __init__(self, t: float, residual: float, degree: int):
        super().__init__(f"kernel residual {residual:.3e} at degree {degree} (t={t:.12g})")
        self.t, self.residual, self.degree = t, residual, degree


class _KernelCache:
    """Per-flow kernel factorisations with adaptive degree.

    A factorisation is reused while the slits stay within ``rebuild_tol`` of
    the configuration it was built for.  When a fit misses ``kernel_tol`` the
    degree grows by half until ``max_degree``; the degree never shrinks
    within one run.
    """

    def __init__(self, degree: int, rebuild_tol: float, kernel_tol: float,
                 max_degree: int | None = None):
        self.degree = degree
        self.max_degree = max(degree, max_degree or degree)
        self.rebuild_tol = rebuild_tol
        self.kernel_tol = kernel_tol
        self._last: KernelSolver | None = None
        self.builds = 0

    def _solver(self, s: SlitConfig) -> KernelSolver:
        solver = self._last
        if solver is None or solver.degree != self.degree or solver.s.n != s.n or (
                solver.s != s and slit_distance(solver.s, s) > self.rebuild_tol):
            solver = KernelSolver(s, self.degree)
            self.builds += 1
            self._last = solver
        return solver

    def model(self, s: SlitConfig, nu: BoundaryMeasure):
        while True:
            model = self._solver(s).model(nu)
            if not s.n or model.residual <= self.kernel_tol:
                return model
            if self.degree >= self.max_degree:
                raise ResidualExceeded(model.residual, self.kernel_tol)
            self.degree = min(self.max_degree, int(math.ceil(1.5 * self.degree)))


def psi_on_sheets(model, s: SlitConfig, z, sheet, edge) -> np.ndarray:
    """``Psi[nu]`` at points given by position, sheet index and edge flag."""
    z = np.asarray(z, dtype=complex)
    sheet = np.asarray(sheet, dtype=int)
    edge = np.asarray(edge, dtype=int)
    out = np.empty(z.shape, dtype=complex)
    base = sheet == BASE
    if np.any(base):
        out[base] = model.psi(z[base], edge[base])
    for j in range(s.n):
        m = sheet == j + 1
        if np.any(m):
            out[m] = np.conj(model.psi(mirror(z[m], s.y[j]))) + 2j * model.slit_levels[j]
    return out


def slit_ode_rhs(nu: BoundaryMeasure, s: SlitConfig, kernel_cache=None, degree: int = 24):
    """``b(nu, s)``: ``pi int Im Psi(z_l)``, ``pi int Re Psi(z_l)``, ``pi int Re Psi(z_r)``."""
    if s.n == 0:
        return np.zeros(0)
    if kernel_cache is None:
        model = KernelSolver(s, degree).model(nu)
    else:
        model = kernel_cache.model(s, nu)
    return _slit_rhs_from_model(model, s)


def _slit_rhs_from_model(model, s: SlitConfig):
    zl = model.psi(s.z_left, np.ones(s.n, dtype=int))
    zr = model.psi(s.z_right, np.ones(s.n, dtype=int))
    return np.pi * np.concatenate([model.slit_levels, zl.real, zr.real])


# -- tracked point bookkeeping --------------------------------------------------------

NORMAL, EDGE, CHART = "normal", "edge", "chart"


@dataclass
class _Track:
    p: SheetPoint
    alive: bool = True
    slit_contact: bool = False
    death_time: float | None = None
    chart: tuple | None = None   # (j, end) while in chart mode

    @property
    def edge_slit(self) -> int | None:
        return self._edge_slit

    _edge_slit: int | None = None


def _edge_slit(s: SlitConfig, p: SheetPoint) -> int | None:
    if p.edge == 0 or p.sheet != BASE:
        return None
    for j in range(s.n):
        if p.z.imag == s.y[j] and s.x_left[j] <= p.z.real <= s.x_right[j]:
            return j
    return None


def _normalise_point(s: SlitConfig, p) -> SheetPoint:
    """Give on-slit base points an edge flag (upper by default)."""
    p = as_sheet_point(p)
    if p.sheet == BASE and p.edge == 0:
        for j in range(s.n):
            if p.z.imag == s.y[j] and s.x_left[j] <= p.z.real <= s.x_right[j]:
                return SheetPoint(p.z, BASE, +1)
    return p


def _endpoints(s: SlitConfig):
    for j in range(s.n):
        yield j, "left", complex(s.z_left[j])
        yield j, "right", complex(s.z_right[j])


def _stage_sheet(p0: SheetPoint, s0: SlitConfig, z: complex, s: SlitConfig) -> int:
    """Sheet of a stage point reached from ``p0``, toggled by slit crossings."""
    sheet = p0.sheet
    for j in range(s.n):
        a = p0.z.imag - s0.y[j]
        b = z.imag - s.y[j]
        if a == 0.0 or a * b >= 0.0:
            continue
        lam = a / (a - b)
        x = p0.z.real + (z.real - p0.z.real) * lam
        xl = s0.x_left[j] + (s.x_left[j] - s0.x_left[j]) * lam
        xr = s0.x_right[j] + (s.x_right[j] - s0.x_right[j]) * lam
        if xl < x < xr:
            if sheet == BASE:
                sheet = j + 1
            elif sheet == j + 1:
                sheet = BASE
    return sheet


# -- trajectory -------------------------------------------------------------------------


@dataclass
class FlowTrajectory:
    """Time series of slit configurations and tracked sheet points."""

    times: list
    configs: list
    tracked: list              # per time: complex array of positions
    sheets: list               # per time: int array
    edges: list                # per time: int array
    alive: list                # per time: bool array
    direction: str = "forward"
    driver_id: str = ""
    t_start: float = 0.0
    slit_contact: list = field(default_factory=list)
    death_times: list = field(default_factory=list)
    absorption: tuple | None = None
    stats: dict = field(default_factory=dict)
    driver: DrivingProcess | None = field(default=None, repr=False)
    options: SolveOptions | None = field(default=None, repr=False)
    halt_reason: str = "completed"

    @property
    def n_points(self) -> int:
        return len(self.tracked[0]) if self.tracked else 0

    @property
    def lambda_(self) -> np.ndarray:
        return 2.0 * np.asarray(self.times)

    @property
    def final_config(self) -> SlitConfig:
        return self.configs[-1]

    def config_vectors(self) -> np.ndarray:
        return np.array([c.as_vector() for c in self.configs])

    def positions(self) -> np.ndarray:
        return np.array(self.tracked)

    def final_points(self) -> list:
        return [SheetPoint(complex(z), int(sh), int(e))
                for z, sh, e in zip(self.tracked[-1], self.sheets[-1], self.edges[-1])]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1, "direction": self.direction, "driver_id": self.driver_id,
            "t_start": self.t_start, "times": [float(t) for t in self.times],
            "lambda": [2.0 * float(t) for t in self.times],
            "configs": [c.to_dict() for c in self.configs],
            "tracked": [[[float(z.real), float(z.imag)] for z in row] for row in self.tracked],
            "sheets": [[int(v) for v in row] for row in self.sheets],
            "edges": [[int(v) for v in row] for row in self.edges],
            "alive": [[bool(v) for v in row] for row in self.alive],
            "slit_contact": [bool(v) for v in self.slit_contact],
            "death_times": [None if v is None else float(v) for v in self.death_times],
            "absorption": None if self.absorption is None else
            {"slit": int(self.absorption[0]), "zeta": float(self.absorption[1])},
            "stats": self.stats, "halt_reason": self.halt_reason,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "FlowTrajectory":
        ab = d.get("absorption")
        return cls(list(d["times"]), [SlitConfig.from_dict(c) for c in d["configs"]],
                   [np.array([complex(a, b) for a, b in row]) for row in d["tracked"]],
                   [np.array(r, dtype=int) for r in d["sheets"]],
                   [np.array(r, dtype=int) for r in d["edges"]],
                   [np.array(r, dtype=bool) for r in d["alive"]],
                   d.get("direction", "forward"), d.get("driver_id", ""), d.get("t_start", 0.0),
                   list(d.get("slit_contact", [])), list(d.get("death_times", [])),
                   None if ab is None else (ab["slit"], ab["zeta"]), d.get("stats", {}),
                   halt_reason=d.get("halt_reason", "completed"))

    def to_csv(self) -> str:
        """Rows ``t, point, re, im, sheet, alive`` (one per time and tracked point)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "point", "re", "im", "sheet", "alive"])
        for t, zs, sh, al in zip(self.times, self.tracked, self.sheets, self.alive):
            for k, z in enumerate(zs):
                w.writerow([_fmt(t), k, _fmt(z.real), _fmt(z.imag), int(sh[k]), int(bool(al[k]))])
        return buf.getvalue()

    def slits_csv(self) -> str:
        """Rows ``t, slit, y, x_left, x_right``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "slit", "y", "x_left", "x_right"])
        for t, c in zip(self.times, self.configs):
            for j in range(c.n):
                w.writerow([_fmt(t), j, _fmt(c.y[j]), _fmt(c.x_left[j]), _fmt(c.x_right[j])])
        return buf.getvalue()


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# -- the stepper --------------------------------------------------------------------------


class FlowStepper:
    """Stateful integrator for one trajectory.

    Parameters
    ----------
    s0 : SlitConfig
        Configuration at ``t0``.
    driver : DrivingProcess
    tracked : list of SheetPoint or complex
    t0 : float
    opts : SolveOptions
    direction : {+1, -1}
        ``+1`` for the Komatu-Loewner flow, ``-1`` for the mapping-out flow.
    """

    def __init__(self, s0: SlitConfig, driver: DrivingProcess, tracked, t0: float = 0.0,
                 opts: SolveOptions | None = None, direction: int = +1):
        self.opts = opts or SolveOptions()
        if self.opts.rho_guard is not None and s0.n and self.opts.rho_guard >= l_half_gap(s0) / 2:
            raise ValueError("rho_guard must be smaller than l_D(s0)/2")
        self.driver = driver
        self.sigma = 1.0 if direction > 0 else -1.0
        self.t = float(t0)
        self.s = s0
        self.n = s0.n
        self.tracks = []
        for p in tracked:
            p = _normalise_point(s0, p)
            if p.sheet == BASE and p.edge == 0 and not s0.contains(p.z):
                raise GeometryError(f"tracked point {p.z} is not in the domain")
            tr = _Track(p)
            tr._edge_slit = _edge_slit(s0, p)
            self.tracks.append(tr)
        self.kernels = _KernelCache(self.opts.degree, self.opts.rebuild_tol, self.opts.kernel_tol,
                                    self.opts.max_degree)
        self.dt = self.opts.dt_initial
        self.steps = 0
        self.rejected = 0
        self.chart_steps = 0
        self.max_chart_drift = 0.0
        self.absorption = None

    # ---- mode selection ----

    def _chart_for(self, tr: _Track, s: SlitConfig):
        if s.n == 0:
            return None
        rho = self.opts.guard(s)
        lD = l_half_gap(s)
        rc = 0.95 * math.sqrt(lD)
        best = None
        for j, end, z_end in _endpoints(s):
            if tr.p.sheet not in (BASE, j + 1):
                continue
            if tr.p.edge != 0 and tr._edge_slit != j:
                continue
            d = abs(tr.p.z - z_end)
            limit = rho
            if tr.chart == (j, end):
                limit = (self.opts.chart_exit * rc) ** 2
            if d < limit and (best is None or d < best[0]):
                best = (d, j, end)
        return None if best is None else (best[1], best[2])

    def _layout(self):
        """Assign modes and state slots for the coming step."""
        s = self.s
        layout = []
        y = [s.as_vector()]
        for k, tr in enumerate(self.tracks):
            if not tr.alive:
                continue
            ch = self._chart_for(tr, s)
            tr.chart = ch
            if ch is not None:
                w = sq_coordinate(s, ch[0], ch[1], tr.p, radius=np.inf)
                layout.append((k, CHART, ch))
                y.append([w.real, w.imag])
            elif tr._edge_slit is not None:
                layout.append((k, EDGE, tr._edge_slit))
                y.append([tr.p.z.real])
            else:
                layout.append((k, NORMAL, None))
                y.append([tr.p.z.real, tr.p.z.imag])
        return layout, np.concatenate([np.asarray(v, dtype=float) for v in y])

    # ---- right-hand side ----

    def _rhs_factory(self, layout, s_start: SlitConfig):
        n3 = 3 * self.n
        lD = l_half_gap(s_start) if self.n else 0.0
        rc = 0.95 * math.sqrt(lD) if self.n else 0.0
        M = self.opts.chart_nodes
        alpha = 2 * np.pi * (np.arange(M) + 0.5) / M
        nodes = rc * np.exp(1j * alpha)
        theta2 = 2 * alpha  # argument of nodes^2 in (0, 4pi)
        sig = self.sigma
        starts = {k: self.tracks[k].p for k, _, _ in layout}

        def node_sheets(j, end):
            th = np.where(theta2 > 2 * np.pi, theta2 - 4 * np.pi, theta2)  # (-2pi, 2pi]
            if end == "left":
                base = (th > 0) & (th < 2 * np.pi)
            else:
                base = (th > -np.pi) & (th < np.pi)
            return np.where(base, BASE, j + 1)

        sheet_cache = {}

        def f(t, y):
            s = SlitConfig.from_vector(y[:n3]) if self.n else SlitConfig.empty()
            nu = self.driver.measure_at(t)
            if nu.is_zero:
                return np.zeros_like(y)
            model = self.kernels.model(s, nu) if self.n else KernelSolver(s, 1).model(nu)
            out = np.empty_like(y)
            if self.n:
                out[:n3] = 2 * sig * _slit_rhs_from_model(model, s)
            pos = n3
            zs, sh, ed, slots = [], [], [], []
            for k, mode, info in layout:
                if mode == NORMAL:
                    z = complex(y[pos], y[pos + 1])
                    zs.append(z)
                    sh.append(_stage_sheet(starts[k], s_start, z, s))
                    ed.append(0)
                    slots.append((pos, 2))
                    pos += 2
                elif mode == EDGE:
                    j = info
                    zs.append(complex(y[pos], s.y[j]))
                    sh.append(BASE)
                    ed.append(starts[k].edge)
                    slots.append((pos, 1))
                    pos += 1
                else:
                    j, end = info
                    w = complex(y[pos], y[pos + 1])
                    key = (j, end)
                    if key not in sheet_cache:
                        sheet_cache[key] = node_sheets(j, end)
                    z_end = complex(s.z_left[j] if end == "left" else s.z_right[j])
                    zn = z_end + nodes ** 2
                    vals = psi_on_sheets(model, s, zn, sheet_cache[key], np.zeros(M, dtype=int))
                    p_end = complex(model.psi(z_end, 1))
                    H = np.mean((vals - p_end) / (nodes - w))
                    v = sig * np.pi * H
                    out[pos], out[pos + 1] = v.real, v.imag
                    pos += 2
            if zs:
                psi = psi_on_sheets(model, s, np.array(zs), np.array(sh), np.array(ed))
                for (p0, width), val in zip(slots, psi):
                    v = 2 * sig * np.pi * val
                    out[p0] = v.real
                    if width == 2:
                        out[p0 + 1] = v.imag
            return out

        return f

    # ---- one accepted step ----

    def _unpack(self, layout, y, s_new: SlitConfig, commit: bool):
        """New sheet points from a state vector; returns (points, problem)."""
        n3 = 3 * self.n
        pos = n3
        new = {}
        rho = self.opts.guard(s_new)
        for k, mode, info in layout:
            tr = self.tracks[k]
            if mode == NORMAL:
                z = complex(y[pos], y[pos + 1])
                pos += 2
                sheet = _stage_sheet(tr.p, self.s, z, s_new)
                p = SheetPoint(z, sheet)
                if sheet == BASE and self.n:
                    for j, end, z_end in _endpoints(s_new):
                        if abs(z - z_end) < rho / 2 and tr.chart is None:
                            return None, ("guard", k)
                new[k] = p
            elif mode == EDGE:
                j = info
                x = float(y[pos])
                pos += 1
                if not s_new.x_left[j] <= x <= s_new.x_right[j]:
                    return None, ("edge", k)
                new[k] = SheetPoint(complex(x, s_new.y[j]), BASE, tr.p.edge)
            else:
                j, end = info
                w = complex(y[pos], y[pos + 1])
                pos += 2
                if tr._edge_slit is not None:
                    # edge points stay on the chart line that carries the slit
                    drift = abs(w.imag) if end == "left" else abs(w.real)
                    if commit:
                        self.max_chart_drift = max(self.max_chart_drift, drift)
                    w = complex(w.real, 0.0) if end == "left" else complex(0.0, w.imag)
                p = sq_inverse(s_new, j, end, w)
                if tr._edge_slit is not None and p.edge == 0 and w != 0:
                    return None, ("edge", k)
                if tr._edge_slit is not None and w == 0:
                    z_end = s_new.z_left[j] if end == "left" else s_new.z_right[j]
                    p = SheetPoint(complex(z_end), BASE, tr.p.edge)
                new[k] = p
        return new, None

    def _reversed_deaths(self, new: dict, s_new: SlitConfig, t_new: float):
        if self.sigma > 0:
            return
        tol = self.opts.absorb_tol
        for k, p in new.items():
            tr = self.tracks[k]
            if tr._edge_slit is not None:
                continue
            if p.sheet == BASE and p.z.imag <= tol:
                tr.alive = False
                tr.death_time = t_new
            elif p.sheet == BASE and self.n and float(s_new.distance_to_slits(p.z)) <= tol:
                tr.alive = False
                tr.slit_contact = True
                tr.death_time = t_new

    def advance(self, t_stop: float) -> float:
        """Take one accepted step without passing ``t_stop``; returns the step size."""
        opts = self.opts
        if self.n:
            try:
                self.kernels.model(self.s, self.driver.measure_at(self.t))
            except ResidualExceeded as exc:
                raise KernelLimit(self.t, exc.residual, self.kernels.degree) from exc
        layout, y0 = self._layout()
        f = self._rhs_factory(layout, self.s)
        dt = min(self.dt, opts.dt_max, t_stop - self.t)
        kernel_failure = None
        while True:
            if kernel_failure is not None and dt < 1e-9 * max(1.0, abs(self.t)):
                raise KernelLimit(self.t, kernel_failure.residual, self.kernels.degree)
            if dt < opts.dt_min:
                if kernel_failure is not None:
                    raise KernelLimit(self.t, kernel_failure.residual, self.kernels.degree)
                self._underflow(layout, dt)
                layout, y0 = self._layout()
                f = self._rhs_factory(layout, self.s)
                dt = max(opts.dt_min * 16, min(self.dt, t_stop - self.t))
                continue
            try:
                y1, err = dopri_step(f, self.t, y0, dt)
                s_new = SlitConfig.from_vector(y1[:3 * self.n]) if self.n else self.s
                new, problem = self._unpack(layout, y1, s_new, commit=False)
                ok_geom = problem is None and all(
                    p.sheet != BASE or p.edge != 0 or p.z.imag > 0 for p in new.values())
            except ResidualExceeded as exc:
                kernel_failure = exc
                ok_geom, err, y1 = False, None, None
            except (GeometryError, FloatingPointError, ValueError, np.linalg.LinAlgError):
                ok_geom, err, y1 = False, None, None
            if ok_geom:
                en = error_norm(err, y0, y1, opts.rtol, opts.atol)
                if np.isfinite(en) and en <= 1.0:
                    break
                dt_next = next_step(dt, en if np.isfinite(en) else 1e10)
                self.rejected += 1
                dt = min(dt_next, 0.9 * dt)
            else:
                self.rejected += 1
                dt *= 0.5
        self._unpack(layout, y1, s_new, commit=True)
        self.t += dt
        self.steps += 1
        self.chart_steps += sum(1 for _, m, _ in layout if m == CHART)
        self.s = s_new
        for k, p in new.items():
            self.tracks[k].p = p
        self._reversed_deaths(new, s_new, self.t)
        self.dt = next_step(dt, en)
        if self.sigma < 0 and self.n and s_new.y.min() <= opts.y_floor:
            j = int(np.argmin(s_new.y))
            self.absorption = (j, self.t)
        return dt

    def _underflow(self, layout, dt):
        """Resolve a step-size collapse: kill a dying point in a reversed flow, else raise."""
        if self.sigma < 0:
            worst, best = None, np.inf
            for k, mode, _ in layout:
                tr = self.tracks[k]
                if mode != NORMAL:
                    continue
                d_axis = tr.p.z.imag if tr.p.sheet == BASE else np.inf
                d_slit = float(self.s.distance_to_slits(tr.p.z)) if self.n and tr.p.sheet == BASE \
                    else np.inf
                d = min(d_axis, d_slit)
                if d < best:
                    worst, best = (k, d_slit < d_axis), d
            if worst is not None and best < 1e-3:
                k, on_slit = worst
                self.tracks[k].alive = False
                self.tracks[k].slit_contact = on_slit
                self.tracks[k].death_time = self.t
                return
        offender = None
        for k, mode, _ in layout:
            offender = k
        raise MinStepUnderflow(self.t, dt, offender)

    def snapshot(self):
        z = np.array([tr.p.z for tr in self.tracks], dtype=complex)
        sh = np.array([tr.p.sheet for tr in self.tracks], dtype=int)
        ed = np.array([tr.p.edge for tr in self.tracks], dtype=int)
        al = np.array([tr.alive for tr in self.tracks], dtype=bool)
        return z, sh, ed, al


def _integrate(s0: SlitConfig, driver: DrivingProcess, tracked, t0: float, t1: float,
               opts: SolveOptions | None, direction: int, t_eval=None, record: bool = True,
               raise_absorption: bool = False, halt_on_kernel_limit: bool = False
               ) -> FlowTrajectory:
    if s0.n and driver.support_bound() == np.inf:
        raise FlowError("driver support must be bounded")
    opts = opts or SolveOptions()
    st = FlowStepper(s0, driver, list(tracked), t0, opts, direction)
    times, configs, rows = [t0], [s0], [st.snapshot()]
    stops = set(float(b) for b in driver.breakpoints if t0 < b < t1)
    if t_eval is not None:
        stops |= set(float(t) for t in t_eval if t0 < t < t1)
    stops = sorted(stops | {float(t1)})
    absorbed = None
    halt = "completed"
    for stop in stops:
        while st.t < stop - 1e-14 * max(1.0, abs(stop)):
            if st.steps >= opts.max_steps:
                raise MinStepUnderflow(st.t, st.dt, None, "maximum number of steps reached")
            try:
                st.advance(stop)
            except KernelLimit as exc:
                if not halt_on_kernel_limit:
                    raise
                halt = f"kernel_limit: {exc}"
                break
            if record or abs(st.t - stop) < 1e-14:
                times.append(st.t)
                configs.append(st.s)
                rows.append(st.snapshot())
            if st.absorption is not None:
                absorbed = st.absorption
                halt = "absorbed"
                break
        if halt != "completed":
            break
        st.t = stop if abs(st.t - stop) < 1e-12 * max(1.0, abs(stop)) else st.t
    if not record and times[-1] != st.t:
        times.append(st.t)
        configs.append(st.s)
        rows.append(st.snapshot())
    traj = FlowTrajectory(
        times, configs, [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
        [r[3] for r in rows], "forward" if direction > 0 else "reversed", driver.driver_id, t0,
        [tr.slit_contact for tr in st.tracks], [tr.death_time for tr in st.tracks], absorbed,
        {"steps": st.steps, "rejected": st.rejected, "kernel_builds": st.kernels.builds,
         "chart_steps": st.chart_steps, "max_chart_drift": st.max_chart_drift,
         "final_degree": st.kernels.degree},
        driver, opts, halt)
    if absorbed is not None and raise_absorption:
        raise Absorption(*absorbed)
    return traj


def solve_forward(s0: SlitConfig, driver: DrivingProcess, tracked, T: float,
                  opts: SolveOptions | None = None, t0: float = 0.0, t_eval=None,
                  record: bool = True) -> FlowTrajectory:
    """Integrate the Komatu-Loewner flow from ``t0`` to ``T``.

    Tracked points never die in the forward flow; a step-size collapse raises
    :class:`MinStepUnderflow` naming the offending point.
    """
    return _integrate(s0, driver, tracked, t0, T, opts, +1, t_eval, record)


def solve_reversed(s0: SlitConfig, driver: DrivingProcess, tracked, T: float,
                   opts: SolveOptions | None = None, t0: float = 0.0, t_eval=None,
                   record: bool = True, raise_absorption: bool = False,
                   halt_on_kernel_limit: bool = True) -> FlowTrajectory:
    """Mapping-out flow ``dg/dt = -2 pi Psi[nu_t](g)``, ``ds/dt = -2b``.

    Tracked points that reach the real axis are marked dead; contact with a
    slit sets their ``slit_contact`` flag.  The run halts once a slit height
    reaches ``opts.y_floor`` (recorded in ``absorption``).  A slit that sinks
    onto a driving atom needs a kernel degree growing like ``1 / y``; once
    ``opts.max_degree`` no longer meets ``opts.kernel_tol`` the run also halts,
    with ``halt_reason`` starting with ``"kernel_limit"``.
    """
    return _integrate(s0, driver, tracked, t0, T, opts, -1, t_eval, record, raise_absorption,
                      halt_on_kernel_limit)


def advance(traj: FlowTrajectory, dt: float, opts: SolveOptions | None = None) -> FlowTrajectory:
    """Extend a trajectory by (at most) ``dt`` of accepted steps."""
    opts = opts or traj.options or SolveOptions()
    direction = +1 if traj.direction == "forward" else -1
    t = traj.times[-1]
    pts = [SheetPoint(complex(z), int(sh), int(e)) for z, sh, e, a in
           zip(traj.tracked[-1], traj.sheets[-1], traj.edges[-1], traj.alive[-1]) if a]
    ext = _integrate(traj.configs[-1], traj.driver, pts, t, t + dt, opts, direction)
    out = replace(traj, times=list(traj.times), configs=list(traj.configs),
                  tracked=list(traj.tracked), sheets=list(traj.sheets), edges=list(traj.edges),
                  alive=list(traj.alive))
    idx = np.flatnonzero(traj.alive[-1])
    for i in range(1, len(ext.times)):
        z = traj.tracked[-1].copy()
        sh = traj.sheets[-1].copy()
        ed = traj.edges[-1].copy()
        al = traj.alive[-1].copy()
        z[idx], sh[idx], ed[idx], al[idx] = ext.tracked[i], ext.sheets[i], ext.edges[i], ext.alive[i]
        out.times.append(ext.times[i])
        out.configs.append(ext.configs[i])
        out.tracked.append(z)
        out.sheets.append(sh)
        out.edges.append(ed)
        out.alive.append(al)
    return out


def near_endpoint_step(s: SlitConfig, driver: DrivingProcess, j: int, end: str, p, t: float,
                       dt: float, opts: SolveOptions | None = None, direction: int = +1):
    """One chart-coordinate step for a point near an endpoint of slit ``j``.

    Returns ``(s_new, p_new, w_new, dt_taken)``; raises :class:`ChartExit`
    when the point leaves the chart ball.
    """
    opts = opts or SolveOptions()
    st = FlowStepper(s, driver, [p], t, opts, direction)
    tr = st.tracks[0]
    rc = 0.95 * math.sqrt(l_half_gap(s))
    w0 = sq_coordinate(s, j, end, tr.p, radius=np.inf)
    if abs(w0) >= opts.chart_exit * rc:
        raise ChartExit("point is outside the chart ball")
    tr.chart = (j, end)
    st.dt = dt
    taken = st.advance(t + dt)
    w1 = sq_coordinate(st.s, j, end, st.tracks[0].p, radius=np.inf)
    if abs(w1) >= opts.chart_exit * 0.95 * math.sqrt(l_half_gap(st.s)):
        raise ChartExit("point left the chart ball")
    return st.s, st.tracks[0].p, w1, taken


def config_at(traj: FlowTrajectory, t: float, opts: SolveOptions | None = None) -> SlitConfig:
    """Slit configuration at time ``t`` (re-integrated from the nearest stored time)."""
    times = np.asarray(traj.times)
    sgn = 1 if traj.direction == "forward" else -1
    i = int(np.searchsorted(times, t, side="right") - 1)
    if i < 0:
        raise ValueError("t precedes the trajectory")
    if times[i] == t or traj.configs[i].n == 0:
        return traj.configs[i]
    sub = _integrate(traj.configs[i], traj.driver, [], float(times[i]), float(t),
                     opts or traj.options, sgn, record=False)
    return sub.configs[-1]


def flow_map(traj: FlowTrajectory, s_time: float, t_time: float, points,
             opts: SolveOptions | None = None) -> np.ndarray:
    """``phi_{t, s}`` (forward trajectory) applied to base points; vectorised evaluator."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    if t_time == s_time:
        return pts.copy()
    s_cfg = config_at(traj, s_time, opts)
    direction = 1 if traj.direction == "forward" else -1
    out = _integrate(s_cfg, traj.driver, list(pts), s_time, t_time, opts or traj.options,
                     direction, record=False)
    return np.asarray(out.tracked[-1])


def map_evaluator(traj: FlowTrajectory, s_time: float, t_time: float, opts=None):
    return lambda z: flow_map(traj, s_time, t_time, z, opts).reshape(np.shape(z))


def solve_backward(traj: FlowTrajectory, z0, t0: float, opts: SolveOptions | None = None,
                   raise_on_hit: bool = True) -> FlowTrajectory:
    """``dw/dt = -2 pi int Psi_{s(t0 - t)}(w, xi) nu_{t0 - t}(dxi)``, ``w(0) = z0``.

    Integrated jointly with the slit vector running backward from ``s(t0)``.
    When the path survives to ``t0``, ``phi_{t0, 0}(w(t0)) = z0``.
    """
    if traj.direction != "forward":
        raise ValueError("solve_backward expects a forward trajectory")
    s_t0 = config_at(traj, t0, opts)
    rev = traj.driver.time_reversed(t0)
    out = _integrate(s_t0, rev, [z0], 0.0, t0, opts or traj.options, -1)
    if raise_on_hit and not out.alive[-1][0]:
        raise BoundaryHit(out.death_times[0])
    return out


def trace_point(traj: FlowTrajectory, t: float, eps_ladder=(0.08, 0.04, 0.02, 0.01),
                opts: SolveOptions | None = None, return_error: bool = False):
    """Tip ``g_t^{-1}(xi(t))`` of a reversed run with a single-atom driver.

    ``g_t^{-1}`` is evaluated at ``xi(t) + i eps`` by running the forward
    equation with the time-reversed driver from ``s(t)``; the ``eps -> 0``
    limit is taken by Richardson extrapolation (the inverse map is
    quadratic at the tip, so the ladder is treated as a power series in
    ``eps``).
    """
    from .kernel import NonConvergent, richardson

    if traj.direction != "reversed":
        raise ValueError("trace_point expects a reversed trajectory")
    drv = traj.driver
    if drv.n_atoms != 1 or drv.density_grid.size:
        raise ValueError("trace_point needs a single-atom driver")
    if t == traj.t_start:
        z = complex(drv.atom_positions(t)[0])
        return (z, 0.0) if return_error else z
    s_t = config_at(traj, t, opts)
    rev = drv.time_reversed(t)
    xi = float(drv.atom_positions(t)[0])
    eps = np.asarray(sorted(eps_ladder, reverse=True), dtype=float)
    out = _integrate(s_t, rev, [xi + 1j * e for e in eps], 0.0, t, opts or traj.options, +1,
                     record=False)
    vals = list(np.asarray(out.tracked[-1]))
    d = np.abs(np.diff(vals))
    if d.size >= 2 and np.any(d[1:] > d[:-1] * 1.0001 + 1e-12):
        raise NonConvergent(f"eps ladder does not contract: {vals}")
    est, err = richardson(vals, eps, order=1.0)
    return (complex(est), float(err)) if return_error else complex(est)


@dataclass
class EvolutionFamilyReport:
    semigroup_defect: float
    lipschitz_ratio: float
    lipschitz_bound: float
    eta_used: float
    min_height_increment: float
    min_tracked_im_increment: float
    hcap_defect: float
    identity_defect: float
    witnesses: dict = field(default_factory=dict)

    @property
    def checks(self) -> dict:
        return {
            "semigroup": self.semigroup_defect <= 1e-5,
            "lipschitz": self.lipschitz_ratio <= self.lipschitz_bound,
            "heights_nondecreasing": self.min_height_increment >= -1e-12,
            "tracked_im_nondecreasing": self.min_tracked_im_increment >= -1e-10,
            "hcap": bool(self.hcap_defect <= 1e-3),
            "identity": self.identity_defect == 0.0,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "witnesses"}
        d["checks"] = self.checks
        d["passed"] = self.passed
        d["witnesses"] = {k: str(v) for k, v in self.witnesses.items()}
        return d


def evolution_family_report(traj: FlowTrajectory, n_random: int = 4, seed: int = 0,
                            hcap_pairs: int = 2, opts: SolveOptions | None = None
                            ) -> EvolutionFamilyReport:
    """Check the evolution-family properties of a forward trajectory: rising slits,
    the composition rule and the linear growth of half-plane capacity."""
    if traj.direction != "forward":
        raise ValueError("evolution_family_report expects a forward trajectory")
    rng = np.random.default_rng(seed)
    times = np.asarray(traj.times)
    t0, T = float(times[0]), float(times[-1])
    Y = traj.config_vectors()
    n = traj.configs[0].n
    min_dy = float(np.min(np.diff(Y[:, :n], axis=0))) if n and len(times) > 1 else 0.0
    Z = traj.positions()
    base = np.array(traj.sheets[0]) == BASE
    min_dim = float(np.min(np.diff(Z[:, base].imag, axis=0))) if base.any() and len(times) > 1 \
        else 0.0
    # Lipschitz ratio against 12/eta for tracked points above height eta
    s0 = traj.configs[0]
    eta0 = eta(s0) if n else np.inf
    heights = np.array([p.imag if sh == BASE else mirror(p, s0.y[sh - 1]).imag
                        for p, sh in zip(Z[0], traj.sheets[0])]) if Z.size else np.zeros(0)
    eta_used = 0.999 * float(min(eta0, heights.min() if heights.size else np.inf))
    ratio = 0.0
    if Z.size and len(times) > 1:
        dl = 2 * np.diff(times)
        dz = np.abs(np.diff(Z, axis=0))
        ratio = float(np.max(dz / dl[:, None]))
    bound = 12.0 / eta_used if np.isfinite(eta_used) and eta_used > 0 else np.inf
    # identity: phi_{t,t} = id
    pts = np.array([complex(rng.uniform(-2, 2), rng.uniform(0.5, 3)) for _ in range(n_random)])
    pts = pts[[s0.contains(p) for p in pts]]
    ident = float(np.max(np.abs(flow_map(traj, t0, t0, pts) - pts), initial=0.0))
    # semigroup on random triples
    defect, wit = 0.0, None
    if T > t0 and pts.size:
        for _ in range(2):
            a, b, c = np.sort(rng.uniform(t0, T, 3))
            za = flow_map(traj, a, a, pts)
            direct = flow_map(traj, a, c, za, opts)
            two = flow_map(traj, b, c, flow_map(traj, a, b, za, opts), opts)
            d = float(np.max(np.abs(direct - two)))
            if d > defect:
                defect, wit = d, (a, b, c)
    # hcap on stored pairs
    from .maps import angular_residue
    hdef = 0.0
    if T > t0:
        grid = np.linspace(t0, T, hcap_pairs + 1)
        for s_, t_ in zip(grid[:-1], grid[1:]):
            res = angular_residue(map_evaluator(traj, float(s_), float(t_), opts))
            mass = np.mean([traj.driver.mass(x) for x in np.linspace(s_, t_, 9)])
            hdef = max(hdef, abs(res.value.real - 2 * (t_ - s_) * mass))
    return EvolutionFamilyReport(defect, ratio, bound, eta_used, min_dy, min_dim, float(hdef), ident,
                                 {"semigroup_triple": wit})
