"""Measure-valued driving processes ``t -> nu_t`` with ``nu_t(R) <= 1``.

A :class:`DriverSpec` describes the process; :func:`sample` realises it on a
time grid as a :class:`DrivingProcess`.  Atom locations are interpolated
linearly between grid nodes (so Dirac paths stay continuous) while atom
weights are piecewise constant.  Random kinds draw from Philox streams keyed
by ``(seed, path index)``, so a realisation does not depend on how many other
paths are sampled.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .measures import BoundaryMeasure

KINDS = ("zero", "dirac", "multi_dirac", "density", "brownian", "dyson")


class DriverError(ValueError):
    pass


class CollisionUnderflow(RuntimeError):
    pass


class Unbounded(DriverError):
    pass


def _stream(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass
class DriverSpec:
    """Declarative description of a driver.

    Parameters by kind:

    ``dirac``
        ``path``: constant, list of ``[t, xi]`` samples, or callable ``xi(t)``.
    ``multi_dirac``
        ``paths``: list as for ``dirac``; ``weights``: constants or callables
        ``c_k(t)`` that are nonnegative and sum to one.
    ``density``
        ``grid`` and ``density`` (time independent), or ``rho``: callable
        ``rho(t, xi)`` sampled on ``grid``.
    ``brownian``
        ``kappa``, ``seed``, ``xi0``.
    ``dyson``
        ``n``, ``seed``, ``spread`` (initial points equally spaced over an
        interval of this length, centred at 0), optional ``kappa`` (default 1).
    """

    kind: str = "zero"
    T: float = 1.0
    n_steps: int = 200
    params: dict = field(default_factory=dict)
    support: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DriverError(f"unknown driver kind {self.kind!r}")
        if self.T <= 0 or self.n_steps < 1:
            raise DriverError("need T > 0 and n_steps >= 1")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def driver_id(self) -> str:
        p = {k: v for k, v in self.params.items() if not callable(v)}
        return f"{self.kind}:{json.dumps(p, sort_keys=True, default=str)}"

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.params.items():
            if callable(v) or (isinstance(v, list) and any(callable(x) for x in v)):
                raise DriverError(f"parameter {k!r} is a callable and cannot be serialised")
            params[k] = v
        return {"kind": self.kind, "T": self.T, "n_steps": self.n_steps, "params": params,
                "support": self.support}

    @classmethod
    def from_dict(cls, d: dict) -> "DriverSpec":
        return cls(d.get("kind", "zero"), float(d.get("T", 1.0)), int(d.get("n_steps", 200)),
                   dict(d.get("params", {})), d.get("support"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DriverSpec":
        return cls.from_dict(json.loads(text))


def _path_values(path, t: np.ndarray) -> np.ndarray:
    if callable(path):
        return np.asarray([path(tk) for tk in t], dtype=float)
    arr = np.asarray(path, dtype=float)
    if arr.ndim == 0:
        return np.full(t.shape, float(arr))
    if arr.ndim == 2 and arr.shape[1] == 2:
        return np.interp(t, arr[:, 0], arr[:, 1])
    if arr.ndim == 1 and arr.size == t.size:
        return arr.copy()
    raise DriverError("path must be a constant, [t, xi] samples, grid values or a callable")


@dataclass(eq=False)
class DrivingProcess:
    """Realised driver on a time grid.

    ``atoms`` and ``weights`` have shape ``(K, len(times))``; an optional
    density part is stored as ``density_grid`` and ``density_values`` with
    shape ``(len(times), len(density_grid))``.
    """

    times: np.ndarray
    atoms: np.ndarray
    weights: np.ndarray
    density_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    density_values: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    driver_id: str = ""
    declared_support: float | None = None

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def breakpoints(self) -> np.ndarray:
        """Grid times where ``t -> nu_t`` may fail to be smooth."""
        constant = (np.all(np.ptp(self.atoms, axis=1) == 0) if self.n_atoms else True) and \
            (np.all(np.ptp(self.weights, axis=1) == 0) if self.n_atoms else True) and \
            (np.all(np.ptp(self.density_values, axis=0) == 0) if self.density_grid.size else True)
        return self.times[[0, -1]] if constant else self.times

    def _index(self, t: float) -> tuple:
        t = float(np.clip(t, self.times[0], self.times[-1]))
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2))
        lam = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, lam

    def atom_positions(self, t: float) -> np.ndarray:
        if self.n_atoms == 0:
            return np.zeros(0)
        i, lam = self._index(t)
        return (1 - lam) * self.atoms[:, i] + lam * self.atoms[:, i + 1]

    def atom_weights(self, t: float) -> np.ndarray:
        if self.n_atoms == 0:
            return np.zeros(0)
        i, lam = self._index(t)
        if lam >= 1.0:
            i += 1
        return self.weights[:, i]

    def measure_at(self, t: float) -> BoundaryMeasure:
        loc, w = self.atom_positions(t), self.atom_weights(t)
        keep = w > 0
        if self.density_grid.size:
            i, lam = self._index(t)
            dens = self.density_values[min(i + (lam >= 1.0), self.times.size - 1)]
            return BoundaryMeasure(loc[keep], w[keep], self.density_grid, dens)
        return BoundaryMeasure(loc[keep], w[keep])

    def mass(self, t: float) -> float:
        return self.measure_at(t).total_mass

    def support_bound(self) -> float:
        """``max_t sup |supp nu_t|`` over the realisation."""
        vals = [0.0]
        if self.n_atoms:
            vals.append(float(np.max(np.abs(self.atoms[self.weights > 0]), initial=0.0)))
        if self.density_grid.size:
            nz = np.any(self.density_values > 0, axis=0)
            if np.any(nz):
                idx = np.flatnonzero(nz)
                lo, hi = max(idx[0] - 1, 0), min(idx[-1] + 1, self.density_grid.size - 1)
                vals.append(float(max(abs(self.density_grid[lo]), abs(self.density_grid[hi]))))
        return max(vals)

    def is_zero(self) -> bool:
        return not np.any(self.weights) and not np.any(self.density_values)

    def time_reversed(self, t0: float) -> "DrivingProcess":
        """The driver ``t -> nu_{t0 - t}`` on ``[0, t0]``."""
        if not 0 < t0 <= self.T + 1e-15:
            raise DriverError("t0 must lie in (0, T]")
        inner = self.times[(self.times > 0) & (self.times < t0)]
        nodes = np.concatenate([[0.0], inner, [t0]])
        rev = t0 - nodes[::-1]
        atoms = np.array([[self.atom_positions(t0 - r)[k] for r in rev]
                          for k in range(self.n_atoms)]).reshape(self.n_atoms, rev.size)
        # weights are right-continuous in forward time; sample interval midpoints
        mids = np.concatenate([0.5 * (rev[1:] + rev[:-1]), [rev[-1]]])
        weights = np.array([[self.atom_weights(t0 - m)[k] for m in mids]
                            for k in range(self.n_atoms)]).reshape(self.n_atoms, rev.size)
        dens = np.zeros((rev.size, self.density_grid.size))
        if self.density_grid.size:
            for i, m in enumerate(mids):
                dens[i] = self.measure_at(t0 - m).density
        return DrivingProcess(rev, atoms, weights, self.density_grid, dens,
                              f"reversed({self.driver_id},{t0!r})", self.declared_support)

    def to_dict(self) -> dict:
        return {"schema_version": 1, "driver_id": self.driver_id, "times": self.times.tolist(),
                "atoms": self.atoms.tolist(), "weights": self.weights.tolist(),
                "density_grid": self.density_grid.tolist(),
                "density_values": self.density_values.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DrivingProcess":
        t = np.asarray(d["times"], float)
        atoms = np.asarray(d["atoms"], float).reshape(-1, t.size)
        weights = np.asarray(d["weights"], float).reshape(-1, t.size)
        g = np.asarray(d.get("density_grid", []), float)
        dv = np.asarray(d.get("density_values", []), float).reshape(t.size if g.size else 0, g.size)
        return cls(t, atoms, weights, g, dv, d.get("driver_id", ""))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def atoms_csv(self) -> str:
        """Atom paths as CSV with columns ``t, atom, xi, weight``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "atom", "xi", "weight"])
        for i, t in enumerate(self.times):
            for k in range(self.n_atoms):
                w.writerow([repr(float(t)), k, repr(float(self.atoms[k, i])),
                            repr(float(self.weights[k, i]))])
        return buf.getvalue()


def _dyson_paths(n: int, seed: int, spread: float, kappa: float, t: np.ndarray,
                 min_gap: float = 1e-9, max_depth: int = 40) -> np.ndarray:
    """Euler-Maruyama for ``dxi_k = sqrt(kappa) dB_k + sum_l dt / (xi_k - xi_l)``.

    A step is split in two (Brownian bridge refinement, deterministic given
    the seed) whenever it would break the ordering or shrink the smallest gap
    below half its current value.
    """
    x = np.linspace(-spread / 2, spread / 2, n) if n > 1 else np.zeros(1)
    out = np.empty((n, t.size))
    out[:, 0] = x
    streams = [_stream(seed, k) for k in range(n)]
    sq = np.sqrt(kappa)

    def drift(x):
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, np.inf)
        return np.sum(1.0 / d, axis=1)

    def advance(x, dt, dB, step, depth, idx):
        gap = np.min(np.diff(x)) if n > 1 else np.inf
        if gap < min_gap:
            raise CollisionUnderflow(f"particle gap {gap:.3e} below {min_gap} at step {step}")
        x_new = x + sq * dB + drift(x) * dt
        gap_new = np.min(np.diff(x_new)) if n > 1 else np.inf
        if gap_new >= 0.5 * gap:
            return x_new
        if depth >= max_depth:
            raise CollisionUnderflow(f"step halving exhausted at step {step}")
        z = _stream(seed, 1_000_003, step, depth, idx).standard_normal(n)
        dB1 = 0.5 * dB + 0.5 * np.sqrt(dt) * z
        x_mid = advance(x, dt / 2, dB1, step, depth + 1, 2 * idx)
        return advance(x_mid, dt / 2, dB - dB1, step, depth + 1, 2 * idx + 1)

    for i in range(t.size - 1):
        dt = t[i + 1] - t[i]
        dB = np.array([g.standard_normal() for g in streams]) * np.sqrt(dt)
        x = advance(x, dt, dB, i, 0, 0)
        out[:, i + 1] = x
    return out


def sample(spec: DriverSpec, grid=None) -> DrivingProcess:
    """Realise ``spec`` on ``grid`` (default: ``spec.grid``)."""
    t = np.asarray(spec.grid if grid is None else grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise DriverError("time grid must be increasing with at least two nodes")
    p = spec.params
    atoms = np.zeros((0, t.size))
    weights = np.zeros((0, t.size))
    dgrid, dvals = np.zeros(0), np.zeros((0, 0))
    if spec.kind == "zero":
        pass
    elif spec.kind == "dirac":
        atoms = _path_values(p.get("path", 0.0), t)[None, :]
        weights = np.full((1, t.size), float(p.get("mass", 1.0)))
    elif spec.kind == "multi_dirac":
        paths = p["paths"]
        atoms = np.array([_path_values(q, t) for q in paths])
        ws = p.get("weights", [1.0 / len(paths)] * len(paths))
        weights = np.array([_path_values(w, t) for w in ws])
        if np.any(weights < 0) or np.any(np.abs(weights.sum(axis=0) - 1.0) > 1e-12):
            raise DriverError("multi_dirac weights must be nonnegative and sum to one")
    elif spec.kind == "density":
        dgrid = np.asarray(p["grid"], dtype=float)
        if "rho" in p and callable(p["rho"]):
            dvals = np.array([np.asarray(p["rho"](tk, dgrid), dtype=float) for tk in t])
        else:
            dvals = np.tile(np.asarray(p["density"], dtype=float), (t.size, 1))
        if not np.all(np.isfinite(dgrid)):
            raise Unbounded("density grid must be finite")
    elif spec.kind == "brownian":
        kappa = float(p.get("kappa", 1.0))
        if kappa < 0:
            raise DriverError("kappa must be nonnegative")
        g = _stream(int(p.get("seed", 0)), 0)
        dB = g.standard_normal(t.size - 1) * np.sqrt(np.diff(t))
        path = float(p.get("xi0", 0.0)) + np.sqrt(kappa) * np.concatenate([[0.0], np.cumsum(dB)])
        atoms = path[None, :]
        weights = np.ones((1, t.size))
    elif spec.kind == "dyson":
        n = int(p.get("n", 3))
        atoms = _dyson_paths(n, int(p.get("seed", 0)), float(p.get("spread", 1.0)),
                             float(p.get("kappa", 1.0)), t)
        weights = np.full((n, t.size), 1.0 / n)
    proc = DrivingProcess(t, atoms, weights, dgrid, dvals, spec.driver_id, spec.support)
    mass = [proc.mass(tk) for tk in t]
    if max(mass, default=0.0) > 1.0 + 1e-12:
        raise DriverError(f"driver mass {max(mass):.6g} exceeds 1")
    if spec.support is not None and proc.support_bound() > spec.support + 1e-12:
        raise DriverError(f"declared support bound {spec.support} is violated "
                          f"(observed {proc.support_bound():.6g})")
    return proc


def support_bound(process: DrivingProcess) -> float:
    return process.support_bound()


def dirac(path=0.0, T: float = 1.0, n_steps: int = 200) -> DrivingProcess:
    """Shorthand for a Dirac driver along ``path``."""
    return sample(DriverSpec("dirac", T, n_steps, {"path": path}))


def zero(T: float = 1.0) -> DrivingProcess:
    return sample(DriverSpec("zero", T, 1))
