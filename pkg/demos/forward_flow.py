"""Forward Komatu-Loewner flow driven by a Dirac mass at the origin.

The slit rises and shrinks while the half-plane capacity of the map grows
like 2t.  A point is pushed forward, pulled back with the backward equation,
and the round trip error is printed.

Run:  python3 demos/forward_flow.py
"""

import numpy as np

from komatu_loewner import SheetPoint, SlitConfig, evolution_family_report, solve_backward, \
    solve_forward
from komatu_loewner.drivers import dirac
from komatu_loewner.flow import flow_map, map_evaluator
from komatu_loewner.maps import hcap

T = 0.3
s0 = SlitConfig([1.0], [-1.0], [1.0])
traj = solve_forward(s0, dirac(0.0, T=T), [SheetPoint(2j), SheetPoint(0.5 + 0.5j)], T)

print(f"{'t':>8} {'y':>12} {'x_left':>12} {'x_right':>12}")
for t, s in list(zip(traj.times, traj.configs))[::4] + [(traj.times[-1], traj.final_config)]:
    print(f"{t:8.4f} {s.y[0]:12.8f} {s.x_left[0]:12.8f} {s.x_right[0]:12.8f}")
print("solver stats:", traj.stats)

for t in (0.1, 0.2, 0.3):
    print(f"hcap(g_{t}) = {hcap(map_evaluator(traj, 0.0, t)):.10f}   (2t = {2 * t})")

z = 0.4 + 1.8j
w = solve_backward(traj, z, T).tracked[-1][0]
again = flow_map(traj, 0.0, T, [w])[0]
print(f"backward image of {z}: {w:.10f}; pushed forward again: {again:.10f}")
print(f"round trip error {abs(again - z):.2e}")

rep = evolution_family_report(traj, n_random=2, hcap_pairs=1)
print("evolution family checks:", "pass" if rep.passed else "FAIL", rep.to_dict()["checks"])
