"""Dormand-Prince 5(4) embedded Runge-Kutta pair on real state vectors."""

from __future__ import annotations

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
ORDER = 5


def dopri_step(f, t: float, y: np.ndarray, h: float):
    """One step; returns ``(y_new, err_vector)`` with the 5th-order solution."""
    k = []
    for i in range(7):
        yi = y + h * sum(a * kj for a, kj in zip(A[i], k)) if i else y
        k.append(np.asarray(f(t + C[i] * h, yi), dtype=float))
    K = np.array(k)
    y_new = y + h * (B5 @ K)
    err = h * (E @ K)
    return y_new, err


def error_norm(err, y0, y1, rtol: float, atol: float) -> float:
    if err.size == 0:
        return 0.0
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


def next_step(h: float, err_norm: float, safety: float = 0.9, fac_min: float = 0.2,
              fac_max: float = 5.0) -> float:
    if err_norm == 0.0:
        return h * fac_max
    return h * min(fac_max, max(fac_min, safety * err_norm ** (-1.0 / ORDER)))
