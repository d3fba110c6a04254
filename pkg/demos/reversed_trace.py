"""Mapping-out flows: a growing trace and a slit absorbed by the real axis.

Without slits and with a Dirac driver at 0, the trace is the segment
[0, 2i sqrt(t)].  With two slits and a Dyson driver the reversed flow pulls
the slits down until the lowest reaches the floor height.

Run:  python3 demos/reversed_trace.py
"""

import numpy as np

from komatu_loewner import DriverSpec, SheetPoint, SlitConfig, sample, solve_reversed, trace_point
from komatu_loewner.drivers import dirac
from komatu_loewner.flow import SolveOptions

empty = SlitConfig.empty()
for t in (0.04, 0.16, 0.25):
    traj = solve_reversed(empty, dirac(0.0, T=t), [], t)
    tip = trace_point(traj, t)
    print(f"trace tip at t={t}: {tip:.8f}   (exact {2j * np.sqrt(t):.8f})")

s0 = SlitConfig([1.0, 2.0], [-1.0, 0.5], [0.5, 2.0])
drv = sample(DriverSpec("dyson", T=2.0, n_steps=400, params={"n": 2, "seed": 4, "spread": 1.0}))
opts = SolveOptions(y_floor=0.5)
traj = solve_reversed(s0, drv, [SheetPoint(0.2 + 0.4j), SheetPoint(3 + 3j)], 2.0, opts)
print(f"\nhalt: {traj.halt_reason} at t={traj.times[-1]:.6f}")
if traj.absorption is not None:
    j, zeta = traj.absorption
    print(f"slit {j} reached y_floor={opts.y_floor} at the absorption time zeta={zeta:.8f}")
print("final slits:", traj.final_config)
for k, (z, alive) in enumerate(zip(traj.tracked[-1], traj.alive[-1])):
    print(f"point {k}: {complex(z):.6f}  alive={bool(alive)}")
