"""Acceptance suite shared by ``komatu-loewner validate`` and the test-suite.

Every criterion returns a :class:`CriterionResult` holding the measured
quantity, the tolerance it was held to, the wall time and the time budget.
``level="quick"`` shrinks sample counts so the whole suite fits in a couple
of minutes; ``level="full"`` runs every criterion at its stated size.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import drivers, flow, jsonio
from .geometry import SlitConfig
from .kernel import build_kernel, kernel_solver, koebe_bound_check, kstar_total_mass
from .maps import IntegralRepMap, angular_residue, recover_measure
from .measures import BoundaryMeasure
from .oracle import FDOperator, GridSpec, fd_kstar, hit_probability, mc_green
from .potential import BMDGreen, green_d, harmonic_basis, kstar_via_green, solve_green

GOLDEN = SlitConfig([1.0], [-1.0], [1.0])

TOLERANCES = {
    "closed_form_rel": 1e-6,
    "residue_abs": 1e-3,
    "koebe_slack": 1e-6,
    "conservation_abs": 1e-4,
    "three_way_rel": 1e-3,
    "mc_sigmas": 3.0,
    "hcap_abs": 1e-3,
    "semigroup_abs": 1e-5,
    "roundtrip_abs": 1e-5,
    "recovery_l1": 0.02,
    "recovery_mass": 1e-3,
    "monotone_y": 1e-12,
    "monotone_im": 1e-10,
}

BUDGETS = {1: 1.0, 2: 5.0, 3: 30.0, 4: 30.0, 5: 300.0, 6: 120.0, 7: 120.0, 8: 180.0,
           9: 180.0, 10: 120.0, 11: 60.0}

NAMES = {
    1: "closed form N=0",
    2: "kernel asymptotics",
    3: "Koebe bound",
    4: "conservation",
    5: "three-way K* agreement",
    6: "Monte Carlo cross-checks",
    7: "hcap parametrisation",
    8: "semigroup and inversion",
    9: "integral representation round trip",
    10: "monotonicity laws",
    11: "Lipschitz bound",
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    tolerance: dict
    seconds: float
    budget: float
    detail: str = ""

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.number:2d} ({self.name}): {self.detail} "
                f"[{self.seconds:.2f}s / {self.budget:g}s]")


@dataclass
class SuiteReport:
    level: str
    seed: int
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_dict(self) -> dict:
        return {"schema_version": 1, "level": self.level, "seed": self.seed,
                "passed": self.passed,
                "criteria": [dict(asdict(r), within_budget=r.within_budget) for r in self.results]}

    def to_json(self) -> str:
        return jsonio.dumps(self.to_dict())


def _random_points(s: SlitConfig, n: int, rng, y_range=(0.2, 3.0), x_range=(-2.0, 2.0),
                   clearance: float = 0.1) -> np.ndarray:
    pts = []
    while len(pts) < n:
        z = complex(rng.uniform(*x_range), rng.uniform(*y_range))
        if s.contains(z) and float(s.distance_to_slits(z)) > clearance:
            pts.append(z)
    return np.array(pts)


def _monotonicity(traj: flow.FlowTrajectory) -> dict:
    """Worst per-step change of slit heights and base tracked heights."""
    Y = traj.config_vectors()
    n = traj.configs[0].n
    out = {"min_dy": 0.0, "max_dy": 0.0, "min_dim": 0.0}
    if len(traj.times) > 1 and n:
        dy = np.diff(Y[:, :n], axis=0)
        out["min_dy"], out["max_dy"] = float(dy.min()), float(dy.max())
    if len(traj.times) > 1 and traj.n_points:
        Z = traj.positions()
        base = np.all(np.array(traj.sheets) == 0, axis=0) & np.all(np.array(traj.edges) == 0, axis=0)
        if base.any():
            out["min_dim"] = float(np.diff(Z[:, base].imag, axis=0).min())
    return out


# -- the criteria ------------------------------------------------------------------------


def criterion_1(level, seed, tol):
    d = drivers.dirac(0.0, T=1.0, n_steps=100)
    t = time.perf_counter()
    traj = flow.solve_forward(SlitConfig.empty(), d, [2j], 0.25)
    secs = time.perf_counter() - t
    exact = 1j * np.sqrt(5.0)
    rel = abs(traj.tracked[-1][0] - exact) / abs(exact)
    ok = rel <= tol["closed_form_rel"] and secs <= BUDGETS[1]
    return ok, {"relative_error": rel, "solve_seconds": secs}, \
        {"relative": tol["closed_form_rel"], "seconds": BUDGETS[1]}, \
        f"phi_0.25(2i) rel err {rel:.2e} in {secs:.3f}s"


def criterion_2(level, seed, tol):
    devs = {}
    for xi in (-2.0, 0.0, 3.0):
        m = build_kernel(GOLDEN, xi)
        z = 1e3j
        devs[xi] = abs(complex(z * m.psi(z)) + 1 / np.pi)
    worst = max(devs.values())
    return worst <= tol["residue_abs"], {"deviation": {str(k): v for k, v in devs.items()}}, \
        {"absolute": tol["residue_abs"]}, f"max |z Psi + 1/pi| at z=1000i is {worst:.2e}"


def criterion_3(level, seed, tol):
    n = 10_000 if level == "full" else 2_000
    rep = koebe_bound_check(kernel_solver(GOLDEN), n, seed=seed, slack=tol["koebe_slack"])
    return rep.passed, {"max_ratio": rep.max_ratio, "samples": n,
                        "witness": [str(rep.witness[0]), rep.witness[1]]}, \
        {"ratio": 1.0 + tol["koebe_slack"]}, f"max Koebe ratio {rep.max_ratio:.4f} over {n} samples"


def criterion_4(level, seed, tol):
    zs = [2j, 3j, -1 + 2j]
    mass = kstar_total_mass(GOLDEN, zs, cutoff=50.0)
    dev = float(np.max(np.abs(mass - 1.0)))
    return dev <= tol["conservation_abs"], {"mass": dict(zip(map(str, zs), mass.tolist()))}, \
        {"absolute": tol["conservation_abs"]}, f"max |int K* - 1| = {dev:.2e}"


def criterion_5(level, seed, tol):
    zs = np.array([2j, 3j, -1 + 2j, 1.5 + 1.5j, 0.3 + 0.5j])
    xis = [-2.0, -0.5, 0.0, 0.7, 3.0]
    if level != "full":
        zs, xis = zs[:3], xis[1:4]
    spec = GridSpec.for_config(GOLDEN, zs)
    ops = [FDOperator(GOLDEN, spec, lev) for lev in range(spec.levels)]
    bmd = BMDGreen.build(GOLDEN)
    solver = kernel_solver(GOLDEN)
    worst = {"kernel_potential": 0.0, "kernel_fd": 0.0, "potential_fd": 0.0}
    for xi in xis:
        k_fd, _ = fd_kstar(GOLDEN, zs, xi, grid_spec=spec, operators=ops)
        k_pot = np.array([kstar_via_green(GOLDEN, z, xi, bmd=bmd) for z in zs])
        k_ker = solver.psi_points(zs, xi)[:, 0].imag
        for key, (a, b) in {"kernel_potential": (k_ker, k_pot), "kernel_fd": (k_ker, k_fd),
                            "potential_fd": (k_pot, k_fd)}.items():
            worst[key] = max(worst[key], float(np.max(np.abs(a - b) / np.abs(a))))
    m = max(worst.values())
    return m <= tol["three_way_rel"], {"relative": worst, "battery": f"{len(zs)}x{len(xis)}"}, \
        {"relative": tol["three_way_rel"]}, f"worst pairwise relative gap {m:.2e}"


def criterion_6(level, seed, tol):
    n = 100_000 if level == "full" else 20_000
    phi = harmonic_basis(GOLDEN)[0](2j)
    g = float(green_d(solve_green(GOLDEN, 3j), 2j))
    h = hit_probability(GOLDEN, 2j, 0, n, seed)
    mg = mc_green(GOLDEN, 2j, 3j, n, seed + 1)
    z1 = abs(h.estimate - phi) / h.stderr
    z2 = abs(mg.estimate - g) / mg.stderr
    ok = z1 <= tol["mc_sigmas"] and z2 <= tol["mc_sigmas"]
    return ok, {"phi_layer": float(phi), "phi_mc": h.estimate, "phi_stderr": h.stderr,
                "green_layer": g, "green_mc": mg.estimate, "green_stderr": mg.stderr,
                "paths": n}, {"sigmas": tol["mc_sigmas"]}, \
        f"phi_1(2i) off by {z1:.2f} sigma, G_D(2i,3i) off by {z2:.2f} sigma"


def _golden_forward(T=0.5, tracked=(), t_eval=None):
    d = drivers.dirac(0.0, T=1.0, n_steps=100)
    return flow.solve_forward(GOLDEN, d, list(tracked), T, t_eval=t_eval)


def criterion_7(level, seed, tol):
    traj = _golden_forward(0.5, t_eval=[0.1, 0.25])
    devs = {}
    for t in (0.1, 0.25, 0.5):
        r = angular_residue(flow.map_evaluator(traj, 0.0, t))
        devs[t] = abs(r.value.real - 2 * t)
    w = max(devs.values())
    return w <= tol["hcap_abs"], {"deviation": {str(k): v for k, v in devs.items()}}, \
        {"absolute": tol["hcap_abs"]}, f"max |hcap - 2t| = {w:.2e}"


def _multi_dirac():
    return drivers.sample(drivers.DriverSpec(
        "multi_dirac", 1.0, 50,
        {"paths": [lambda t: -1.5 + t, lambda t: 0.3 * np.sin(3 * t), lambda t: 2.0 - 0.5 * t],
         "weights": [0.2, 0.5, 0.3]}))


def criterion_8(level, seed, tol):
    rng = np.random.default_rng(seed)
    n = 10 if level == "full" else 4
    pts = _random_points(GOLDEN, n, rng)
    out = {}
    for label, drv in (("dirac", drivers.dirac(0.0, T=1.0, n_steps=100)),
                       ("multi_dirac", _multi_dirac())):
        traj = flow.solve_forward(GOLDEN, drv, [], 0.4)
        s_, t_, u_ = 0.0, float(rng.uniform(0.1, 0.3)), 0.4
        direct = flow.flow_map(traj, s_, u_, pts)
        two = flow.flow_map(traj, t_, u_, flow.flow_map(traj, s_, t_, pts))
        semigroup = float(np.max(np.abs(direct - two)))
        rt = 0.0
        for z0, w in zip(pts, direct):
            back = flow.solve_backward(traj, w, u_)
            rt = max(rt, abs(back.tracked[-1][0] - z0))
        out[label] = {"semigroup": semigroup, "roundtrip": float(rt), "t_mid": t_}
    sg = max(v["semigroup"] for v in out.values())
    rt = max(v["roundtrip"] for v in out.values())
    ok = sg <= tol["semigroup_abs"] and rt <= tol["roundtrip_abs"]
    return ok, out, {"semigroup": tol["semigroup_abs"], "roundtrip": tol["roundtrip_abs"]}, \
        f"semigroup defect {sg:.2e}, round trip {rt:.2e} on {n} points"


def _bump(x, centre, half_width, mass):
    u = (np.asarray(x) - centre) / half_width
    out = np.zeros_like(u, dtype=float)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return mass * out / (0.443993816168079 * half_width)


TEST_DENSITIES = {
    "polynomial bump": lambda x: 0.75 * (15 / 16) * np.clip(1 - np.asarray(x) ** 2, 0, None) ** 2,
    "two smooth bumps": lambda x: _bump(x, 0.5, 1.5, 0.5) + _bump(x, -2.0, 0.6, 0.25),
}


def criterion_9(level, seed, tol):
    grid_in = np.linspace(-3.5, 3.5, 1401)
    grid = np.linspace(-3.0, 3.0, 601)
    out = {}
    for name, rho in TEST_DENSITIES.items():
        mu = BoundaryMeasure.from_density(grid_in, rho(grid_in))
        f = IntegralRepMap(GOLDEN, mu)
        rec = recover_measure(f, GOLDEN, grid)
        true = rho(grid)
        l1 = float(np.trapezoid(np.abs(rec.density - true), grid) / np.trapezoid(true, grid))
        res = angular_residue(f)
        out[name] = {"l1": l1, "mass": mu.total_mass, "recovered_mass": rec.total_mass,
                     "residue": float(res.value.real),
                     "mass_error": abs(rec.total_mass - mu.total_mass),
                     "residue_error": abs(res.value.real - mu.total_mass)}
    l1 = max(v["l1"] for v in out.values())
    me = max(max(v["mass_error"], v["residue_error"]) for v in out.values())
    ok = l1 <= tol["recovery_l1"] and me <= tol["recovery_mass"]
    return ok, out, {"l1": tol["recovery_l1"], "mass": tol["recovery_mass"]}, \
        f"L1 error {l1:.2e}, mass/residue error {me:.2e}"


def criterion_10(level, seed, tol):
    rng = np.random.default_rng(seed)
    pts = _random_points(GOLDEN, 6, rng)
    fwd = {"dirac": _golden_forward(0.5, pts),
           "multi_dirac": flow.solve_forward(GOLDEN, _multi_dirac(), list(pts), 0.5)}
    y_floor = 0.5
    rev = flow.solve_reversed(GOLDEN, drivers.dirac(0.0, T=3.0, n_steps=10), [2j], 3.0,
                              flow.SolveOptions(y_floor=y_floor))
    m = {k: _monotonicity(v) for k, v in fwd.items()}
    mr = _monotonicity(rev)
    fwd_ok = all(v["min_dy"] >= -tol["monotone_y"] and v["min_dim"] >= -tol["monotone_im"]
                 for v in m.values()) and all(bool(np.all(v.alive[-1])) for v in fwd.values())
    rev_ok = mr["max_dy"] <= tol["monotone_y"] and rev.halt_reason == "absorbed" and \
        rev.configs[-1].y.min() <= y_floor and rev.configs[-2].y.min() > y_floor
    measured = {"forward": m, "reversed": mr, "reversed_halt": rev.halt_reason,
                "absorption_time": None if rev.absorption is None else rev.absorption[1],
                "final_min_height": float(rev.configs[-1].y.min())}
    return fwd_ok and rev_ok, measured, {"dy": tol["monotone_y"], "dim": tol["monotone_im"],
                                         "y_floor": y_floor}, \
        (f"forward min dy {min(v['min_dy'] for v in m.values()):.2e}, reversed max dy "
         f"{mr['max_dy']:.2e}, halted '{rev.halt_reason}' at y={rev.configs[-1].y.min():.4f}")


def criterion_11(level, seed, tol):
    rng = np.random.default_rng(seed)
    pts = _random_points(GOLDEN, 10, rng)
    traj = _golden_forward(0.5, pts)
    rep = flow.evolution_family_report(traj, n_random=0, hcap_pairs=0)
    ok = rep.lipschitz_ratio <= rep.lipschitz_bound
    return ok, {"ratio": rep.lipschitz_ratio, "bound": rep.lipschitz_bound, "eta": rep.eta_used}, \
        {"bound": "12/eta"}, f"Lipschitz ratio {rep.lipschitz_ratio:.3f} vs 12/eta = " \
                             f"{rep.lipschitz_bound:.3f}"


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 12)}


def run_criterion(number: int, level: str = "full", seed: int = 0,
                  tolerances: dict | None = None) -> CriterionResult:
    """Run one criterion; exceptions become failures carrying the message."""
    tol = dict(TOLERANCES, **(tolerances or {}))
    t = time.perf_counter()
    try:
        ok, measured, tolerance, detail = CRITERIA[number](level, seed, tol)
    except Exception as exc:  # a crash is reported as a failed criterion
        ok, measured, tolerance, detail = False, {"error": repr(exc)}, {}, f"error: {exc!r}"
    secs = time.perf_counter() - t
    return CriterionResult(number, NAMES[number], bool(ok), measured, tolerance, secs,
                           BUDGETS[number], detail)


def run_suite(level: str = "quick", seed: int = 0, only=None, tolerances: dict | None = None,
              echo=None) -> SuiteReport:
    """Run the acceptance criteria (all, or the numbers in ``only``)."""
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    report = SuiteReport(level, seed)
    for k in (only or sorted(CRITERIA)):
        r = run_criterion(k, level, seed, tolerances)
        report.results.append(r)
        if echo is not None:
            echo(r.line())
    return report
