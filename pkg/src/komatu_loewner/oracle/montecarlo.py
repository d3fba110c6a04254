"""Walk-on-spheres estimates for Brownian motion killed on the real axis.

A walker at ``z`` jumps to a uniform point on the largest circle centred at
``z`` that stays inside ``D``.  It stops on ``R`` once ``Im z < delta`` and on
slit ``j`` once its distance to ``C_j`` drops below ``delta``.  The capture
band biases estimates by ``O(delta)``; the default ``delta = 1e-4 * eta`` is
far below the statistical error at the sample sizes used for checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import SlitConfig


@dataclass
class MCResult:
    estimate: float
    stderr: float
    n_paths: int

    def __iter__(self):
        return iter((self.estimate, self.stderr))

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.estimate - value) <= n_sigma * max(self.stderr, 1e-300)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _slit_distances(s: SlitConfig, z: np.ndarray) -> np.ndarray:
    """Distances from each walker to each slit, shape ``(len(z), N)``."""
    x = np.clip(z.real[:, None], s.x_left[None, :], s.x_right[None, :])
    return np.abs(z[:, None] - (x + 1j * s.y[None, :]))


def walk_to_boundary(s: SlitConfig, z0: complex, n_paths: int, seed: int = 0,
                     delta: float | None = None, max_steps: int = 100_000):
    """Run walkers from ``z0`` until capture.

    Returns ``(slit_index, exit_point)`` arrays; ``slit_index`` is ``-1`` for
    walkers absorbed on ``R`` and ``exit_point`` is the nearest point of the
    boundary piece that captured the walker.
    """
    if not s.contains(z0):
        raise ValueError(f"{z0} is not in the domain")
    eta = min(s.y.min(), 1.0) if s.n else 1.0
    delta = 1e-4 * eta if delta is None else delta
    rng = _rng(seed)
    z = np.full(n_paths, complex(z0))
    hit = np.full(n_paths, -2, dtype=int)
    exit_point = np.zeros(n_paths, dtype=complex)
    active = np.arange(n_paths)
    for _ in range(max_steps):
        if active.size == 0:
            break
        za = z[active]
        d_axis = za.imag
        if s.n:
            ds = _slit_distances(s, za)
            j = np.argmin(ds, axis=1)
            d_slit = ds[np.arange(za.size), j]
        else:
            j = np.zeros(za.size, dtype=int)
            d_slit = np.full(za.size, np.inf)
        on_axis = d_axis < delta
        on_slit = (~on_axis) & (d_slit < delta)
        if np.any(on_axis):
            idx = active[on_axis]
            hit[idx] = -1
            exit_point[idx] = za[on_axis].real
        if np.any(on_slit):
            idx = active[on_slit]
            jj = j[on_slit]
            hit[idx] = jj
            xr = np.clip(za[on_slit].real, s.x_left[jj], s.x_right[jj])
            exit_point[idx] = xr + 1j * s.y[jj]
        moving = ~(on_axis | on_slit)
        active = active[moving]
        r = np.minimum(d_axis, d_slit)[moving]
        theta = rng.uniform(0.0, 2 * np.pi, active.size)
        z[active] = za[moving] + r * np.exp(1j * theta)
    if active.size:
        raise RuntimeError(f"{active.size} walkers not captured after {max_steps} steps")
    return hit, exit_point


def hit_probability(s: SlitConfig, z: complex, j: int, n_paths: int = 100_000,
                    rng_seed: int = 0, delta: float | None = None) -> MCResult:
    """``P_z(hit C_j before R)`` for zero-based slit index ``j``."""
    if not 0 <= j < s.n:
        raise IndexError(f"slit index {j} out of range")
    hit, _ = walk_to_boundary(s, z, n_paths, rng_seed, delta)
    x = (hit == j).astype(float)
    return MCResult(float(x.mean()), float(x.std(ddof=1) / np.sqrt(n_paths)), n_paths)


def _green_h(z, w):
    return np.log(np.abs((z - np.conj(w)) / (z - w))) / np.pi


def mc_green(s: SlitConfig, z: complex, w: complex, n_paths: int = 100_000,
             rng_seed: int = 0, delta: float | None = None) -> MCResult:
    """``G_D(z, w) = G_H(z, w) - E_z[G_H(Z_sigma, w); sigma < inf]`` (normalised by 1/pi)."""
    base = float(_green_h(complex(z), complex(w)))
    if s.n == 0:
        return MCResult(base, 0.0, n_paths)
    hit, p = walk_to_boundary(s, z, n_paths, rng_seed, delta)
    vals = np.where(hit >= 0, _green_h(p, complex(w)), 0.0)
    return MCResult(base - float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_paths)), n_paths)
