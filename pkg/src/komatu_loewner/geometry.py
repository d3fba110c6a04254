"""Parallel slit half-planes, sheet points and square-root charts.

A configuration of ``N`` horizontal slits in the upper half-plane is stored
as three float arrays (heights, left abscissas, right abscissas).  Slits are
identified by position; indices never change during an evolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    """Invalid slit configuration or sheet point."""


class ChartError(GeometryError):
    """Point lies outside the square-root chart around a slit endpoint."""


@dataclass(frozen=True, eq=False)
class SlitConfig:
    """Endpoints of the slits ``C_j = [x_left_j, x_right_j] + i y_j``."""

    y: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        xl = np.array(self.x_left, dtype=float).reshape(-1)
        xr = np.array(self.x_right, dtype=float).reshape(-1)
        if not (y.shape == xl.shape == xr.shape):
            raise GeometryError("y, x_left and x_right must have equal length")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(xl)) and np.all(np.isfinite(xr))):
            raise GeometryError("slit coordinates must be finite")
        if np.any(y <= 0):
            raise GeometryError("slit heights must be positive")
        if np.any(xl >= xr):
            raise GeometryError("degenerate slit: x_left must be < x_right")
        n = y.size
        for j in range(n):
            for k in range(j + 1, n):
                if y[j] == y[k] and not (xr[j] < xl[k] or xr[k] < xl[j]):
                    raise GeometryError(f"slits {j} and {k} overlap at height {y[j]}")
        for arr in (y, xl, xr):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_left", xl)
        object.__setattr__(self, "x_right", xr)

    # -- construction ---------------------------------------------------------

    @classmethod
    def empty(cls) -> "SlitConfig":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0))

    @classmethod
    def from_vector(cls, s: Sequence[float]) -> "SlitConfig":
        """Build from ``(y_1..y_N, xl_1..xl_N, xr_1..xr_N)``."""
        s = np.asarray(s, dtype=float)
        if s.size % 3:
            raise GeometryError("slit vector length must be a multiple of 3")
        n = s.size // 3
        return cls(s[:n], s[n:2 * n], s[2 * n:])

    @classmethod
    def from_dict(cls, d: dict) -> "SlitConfig":
        return cls(d["y"], d["x_left"], d["x_right"])

    @classmethod
    def from_json(cls, text: str) -> "SlitConfig":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"y": self.y.tolist(), "x_left": self.x_left.tolist(),
                "x_right": self.x_right.tolist()}

    def to_json(self) -> str:
        # repr-based float formatting in json round-trips exactly
        return json.dumps(self.to_dict())

    # -- basic quantities -----------------------------------------------------

    @property
    def n(self) -> int:
        return int(self.y.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.x_left, self.x_right])

    @property
    def z_left(self) -> np.ndarray:
        return self.x_left + 1j * self.y

    @property
    def z_right(self) -> np.ndarray:
        return self.x_right + 1j * self.y

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.x_left + self.x_right) + 1j * self.y

    @property
    def half_lengths(self) -> np.ndarray:
        return 0.5 * (self.x_right - self.x_left)

    def translated(self, t: float) -> "SlitConfig":
        return SlitConfig(self.y, self.x_left + t, self.x_right + t)

    def scaled(self, a: float) -> "SlitConfig":
        return SlitConfig(a * self.y, a * self.x_left, a * self.x_right)

    def key(self) -> tuple:
        return tuple(self.as_vector().tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, SlitConfig) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return (f"SlitConfig(y={self.y.tolist()}, x_left={self.x_left.tolist()}, "
                f"x_right={self.x_right.tolist()})")

    # -- geometry -------------------------------------------------------------

    def distance_to_slit(self, z, j: int) -> np.ndarray:
        """Euclidean distance from ``z`` to the closed segment ``C_j``."""
        z = np.asarray(z, dtype=complex)
        x = np.clip(z.real, self.x_left[j], self.x_right[j])
        return np.abs(z - (x + 1j * self.y[j]))

    def distance_to_slits(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.n == 0:
            return np.full(z.shape, np.inf)
        return np.min([self.distance_to_slit(z, j) for j in range(self.n)], axis=0)

    def contains(self, z) -> bool | np.ndarray:
        """Membership in ``D(s)``: ``Im z > 0`` and off every closed slit."""
        z = np.asarray(z, dtype=complex)
        inside = z.imag > 0
        for j in range(self.n):
            on = (z.imag == self.y[j]) & (z.real >= self.x_left[j]) & (z.real <= self.x_right[j])
            inside &= ~on
        return bool(inside) if inside.ndim == 0 else inside

    def crossed_slit(self, z0: complex, z1: complex) -> int | None:
        """Index of the slit whose interior the segment ``[z0, z1]`` crosses."""
        for j in range(self.n):
            a, b = z0.imag - self.y[j], z1.imag - self.y[j]
            if a == 0.0 or a * b >= 0.0:
                continue
            x = z0.real + (z1.real - z0.real) * a / (a - b)
            if self.x_left[j] < x < self.x_right[j]:
                return j
        return None


def slit_distance(s1: SlitConfig, s2: SlitConfig) -> float:
    """``max_j |zl_j - zl~_j| + |zr_j - zr~_j|``."""
    if s1.n != s2.n:
        raise GeometryError(f"slit counts differ: {s1.n} vs {s2.n}")
    if s1.n == 0:
        return 0.0
    return float(np.max(np.abs(s1.z_left - s2.z_left) + np.abs(s1.z_right - s2.z_right)))


def eta(s: SlitConfig) -> float:
    """Lowest slit height (``inf`` for the bare half-plane)."""
    return float(np.min(s.y)) if s.n else np.inf


def r_out(s: SlitConfig) -> float:
    """Largest modulus of a slit point."""
    if s.n == 0:
        return 0.0
    return float(np.max(np.maximum(np.abs(s.z_left), np.abs(s.z_right))))


def _segment_distance(s: SlitConfig, j: int, k: int) -> float:
    dy = abs(s.y[j] - s.y[k])
    gap = max(s.x_left[k] - s.x_right[j], s.x_left[j] - s.x_right[k], 0.0)
    return float(np.hypot(dy, gap))


def l_half_gap(s: SlitConfig) -> float:
    """Half the minimum over slits of (length ∧ distance to the rest of the boundary)."""
    if s.n == 0:
        return np.inf
    vals = []
    for j in range(s.n):
        d = s.y[j]
        for k in range(s.n):
            if k != j:
                d = min(d, _segment_distance(s, j, k))
        vals.append(min(s.x_right[j] - s.x_left[j], d))
    return 0.5 * float(min(vals))


def mirror(z, height: float):
    """Reflection in the line ``Im z = height``."""
    return np.conj(z) + 2j * height


# -- sheet points ---------------------------------------------------------------

BASE = 0


@dataclass(frozen=True)
class SheetPoint:
    """A point of the glued surface ``D^natural``.

    ``sheet == 0`` is the base sheet; ``sheet == j + 1`` is the copy reflected
    in slit ``j`` (zero-based slit index).  ``edge`` marks a point lying on a
    slit of the base sheet: ``+1`` for the upper edge, ``-1`` for the lower one.
    """

    z: complex
    sheet: int = BASE
    edge: int = 0

    @property
    def slit(self) -> int | None:
        return None if self.sheet == BASE else self.sheet - 1

    @classmethod
    def reflected(cls, z: complex, j: int) -> "SheetPoint":
        return cls(complex(z), j + 1)

    def to_dict(self) -> dict:
        return {"re": self.z.real, "im": self.z.imag, "sheet": self.sheet, "edge": self.edge}

    @classmethod
    def from_dict(cls, d: dict) -> "SheetPoint":
        return cls(complex(d["re"], d["im"]), int(d.get("sheet", 0)), int(d.get("edge", 0)))


def as_sheet_point(p) -> SheetPoint:
    return p if isinstance(p, SheetPoint) else SheetPoint(complex(p))


def project(p: SheetPoint | complex) -> complex:
    return as_sheet_point(p).z


def reflect(p: SheetPoint, s: SlitConfig) -> complex:
    """Image in ``D`` of a reflected-sheet point (the mirror across its slit)."""
    p = as_sheet_point(p)
    j = p.slit
    if j is None:
        raise GeometryError("reflect() needs a point on a reflected sheet")
    if not 0 <= j < s.n:
        raise GeometryError(f"sheet index {p.sheet} out of range for {s.n} slits")
    return complex(mirror(p.z, s.y[j]))


def sq_coordinate(s: SlitConfig, j: int, end: str, p: SheetPoint | complex,
                  radius: float | None = None) -> complex:
    """Square-root chart value of ``p`` around an endpoint of slit ``j``.

    The argument of ``pr(p) - z_end`` is continued from the slit direction:
    for the left end it lies in ``(0, 2pi)`` on the base sheet and
    ``(-2pi, 0)`` on the reflected sheet; for the right end in ``(-pi, pi)``
    and ``(pi, 3pi)``.  On-slit points use ``edge`` to pick the side.
    """
    p = as_sheet_point(p)
    if not 0 <= j < s.n:
        raise GeometryError(f"slit index {j} out of range")
    if end not in ("left", "right"):
        raise GeometryError("end must be 'left' or 'right'")
    z_end = s.z_left[j] if end == "left" else s.z_right[j]
    radius = l_half_gap(s) if radius is None else radius
    d = p.z - z_end
    r = abs(d)
    if r >= radius:
        raise ChartError(f"|pr(p) - endpoint| = {r:g} exceeds chart radius {radius:g}")
    if r == 0.0:
        return 0j
    if p.sheet not in (BASE, j + 1):
        raise ChartError("point lies on a sheet not glued along this slit")
    theta = float(np.angle(d))  # in (-pi, pi]
    on_slit_line = d.imag == 0.0
    if end == "left":
        if on_slit_line and d.real > 0:
            # both sheets meet on the slit: upper edge <-> 0, lower edge <-> 2pi
            theta = 0.0 if p.edge >= 0 else 2 * np.pi
        elif p.sheet == BASE:
            theta = theta % (2 * np.pi)
        else:
            theta = theta % (2 * np.pi) - 2 * np.pi
    else:
        if on_slit_line and d.real < 0:
            theta = np.pi if p.edge >= 0 else -np.pi
        elif p.sheet != BASE:
            theta = theta % (2 * np.pi)
            if theta <= np.pi:
                theta += 2 * np.pi
    return complex(np.sqrt(r) * np.exp(0.5j * theta))


def sq_inverse(s: SlitConfig, j: int, end: str, w: complex) -> SheetPoint:
    """Sheet point with chart coordinate ``w`` (inverse of :func:`sq_coordinate`)."""
    z_end = s.z_left[j] if end == "left" else s.z_right[j]
    z = complex(z_end + w * w)
    if w == 0:
        return SheetPoint(z)
    theta = 2.0 * float(np.angle(w))  # in (-2pi, 2pi]
    if end == "left":
        if theta in (0.0, 2 * np.pi):
            return SheetPoint(complex(z.real, s.y[j]), BASE, +1 if theta == 0.0 else -1)
        if 0 < theta < 2 * np.pi:
            return SheetPoint(z)
        if theta == -2 * np.pi:
            return SheetPoint(complex(z.real, s.y[j]), BASE, -1)
        return SheetPoint(z, j + 1)
    # right end: base sheet for theta in (-pi, pi)
    if abs(theta) == np.pi:
        return SheetPoint(complex(z.real, s.y[j]), BASE, +1 if theta > 0 else -1)
    if -np.pi < theta < np.pi:
        return SheetPoint(z)
    return SheetPoint(z, j + 1)


def sheet_after_move(s: SlitConfig, p: SheetPoint, z_new: complex) -> SheetPoint:
    """Continue ``p`` along the straight segment to ``z_new``.

    Crossing the interior of slit ``j`` toggles between the base sheet and
    the copy glued along ``C_j``.
    """
    z0 = p.z
    j = s.crossed_slit(z0, z_new)
    if j is None:
        return SheetPoint(complex(z_new), p.sheet)
    if p.sheet == BASE:
        return SheetPoint(complex(z_new), j + 1)
    if p.sheet == j + 1:
        return SheetPoint(complex(z_new), BASE)
    return SheetPoint(complex(z_new), p.sheet)


def chebyshev_angles(n: int, offset: float = 0.5) -> np.ndarray:
    return np.pi * (np.arange(n) + offset) / n


def configs_equal(a: SlitConfig, b: SlitConfig) -> bool:
    return a == b


def stack_points(points: Iterable) -> np.ndarray:
    return np.array([project(p) for p in points], dtype=complex)
