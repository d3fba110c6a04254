"""A tour of the BMD complex Poisson kernel on a one-slit domain.

Builds the kernel for the slit {Im z = 1, -1 <= Re z <= 1}, checks that
K* = Im Psi is constant on the slit and has unit mass, and compares one
value with the finite-difference reference solver.

Run:  python3 demos/kernel_tour.py
"""

import numpy as np

from komatu_loewner import SlitConfig, build_kernel, koebe_bound_check, residue_at_infinity
from komatu_loewner.kernel import kstar_total_mass
from komatu_loewner.oracle import fd_kstar

s = SlitConfig([1.0], [-1.0], [1.0])
model = build_kernel(s, xi=0.0)
print(f"least-squares residual on the slit: {model.residual:.2e}")

# Im Psi takes one value on both edges of the slit
x = np.linspace(-0.99, 0.99, 5)
upper = model.psi(x + 1j, edge=+1).imag
lower = model.psi(x + 1j, edge=-1).imag
print("K* on the upper edge:", np.array2string(upper, precision=12))
print("K* on the lower edge:", np.array2string(lower, precision=12))

res, err = residue_at_infinity(model)
print(f"z Psi(z) -> {res:.8f} (expected -1/pi = {-1 / np.pi:.8f}), extrapolation error {err:.1e}")

for z in (3j, 0.5 + 0.3j):
    print(f"total mass of K*({z}, .) = {kstar_total_mass(s, z):.15f}")

rep = koebe_bound_check(model, samples=5000, seed=0)
print(f"Koebe ratio over 5000 samples: max {rep.max_ratio:.4f} (must stay below 1)")

print("\nfinite-difference cross-check at z = 3i (a few seconds) ...")
fd, fd_err = fd_kstar(s, [3j], 0.0)
print(f"kernel  K*(3i, 0) = {float(model.eval_kstar(3j)):.10f}")
print(f"FD      K*(3i, 0) = {fd[0]:.10f} +- {fd_err[0]:.1e}")
