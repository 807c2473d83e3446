"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict that is printed in the
"acceptance criteria" section at the end of the pytest run.
"""

import json
import math
import time

import numpy as np

import mms
from conftest import BASE, record
from wolbachia_stefan.cli import main
from wolbachia_stefan.eigen import (EigenProblem, find_d1_star, find_h_star, heterogeneous_h_star,
                                    principal_eigen)
from wolbachia_stefan.model import (BirthRateField, InitialData, InitialProfile, ModelParams,
                                    critical_h0_star)
from wolbachia_stefan.ode import OdeParams, integrate_uv, reduction_report
from wolbachia_stefan.pde import FrontFixingSolver, Grid, Outcome, StopRules, measure_speed
from wolbachia_stefan.semiwave import SemiWaveProblem, solve_beta0, speed_bracket


def test_criterion_01_eigen_closed_form():
    rng = np.random.default_rng(0)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        d, b, h0 = 10 ** rng.uniform(-1, 1, 3)
        exact = d * (math.pi / (2 * h0)) ** 2 - b
        lam = principal_eigen(EigenProblem(d=d, b=b, h0=h0, n=2048)).lambda1
        worst = max(worst, abs(lam - exact) / abs(exact))
    elapsed = time.perf_counter() - started
    ok = worst < 1e-6 and elapsed < 5.0
    record(1, ok, f"worst rel err {worst:.2e} (< 1e-6), {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_02_threshold_closed_forms():
    errs = []
    for b, h0 in [(1.0, math.pi / 2), (2.0, 1.5), (0.3, 4.0)]:
        errs.append(abs(find_d1_star(b, h0, n=2048).value / (b * (2 * h0 / math.pi) ** 2) - 1))
    for d, b in [(1.0, 1.0), (0.5, 3.0), (4.0, 0.2)]:
        errs.append(abs(find_h_star(d, b, n=2048).value / (0.5 * math.pi * math.sqrt(d / b)) - 1))
    for b1, b2, delta1 in [(2.0, 1.0, 1.0), (3.0, 1.0, 2.0)]:
        p = ModelParams(d1=1.0, d2=1.0, delta1=delta1, delta2=1.0, mu=1.0, h0=1.0, b1=b1, b2=b2)
        errs.append(abs(heterogeneous_h_star(p, n=2048).value / critical_h0_star(p) - 1))
    worst = max(errs)
    ok = worst < 1e-6
    record(2, ok, f"worst rel err {worst:.2e} over d*, h*, effective h0* (< 1e-6)")
    assert ok


def test_criterion_03_monotonicity():
    rng = np.random.default_rng(3)
    violations = 0
    for _ in range(10):
        xs = np.sort(rng.uniform(0, 5, 6))
        xs[0] = 0.0
        lo_b, hi_b = 0.2, 3.0          # two-sided bounds
        field = BirthRateField.tabulated(list(zip(xs, rng.uniform(lo_b + 0.01, hi_b - 0.01, 6))))
        lam_d = [principal_eigen(EigenProblem(d=d, b=field, h0=2.0, n=256)).lambda1
                 for d in np.geomspace(0.05, 5.0, 20)]
        lam_h = [principal_eigen(EigenProblem(d=1.0, b=field, h0=h, n=256)).lambda1
                 for h in np.linspace(0.3, 6.0, 20)]
        violations += int(np.sum(np.diff(lam_d) <= 0)) + int(np.sum(np.diff(lam_h) >= 0))
    ok = violations == 0
    record(3, ok, f"{violations} violations over 10 fields x 2 x 20-point grids")
    assert ok


def test_criterion_04_a_priori_bounds():
    rng = np.random.default_rng(4)
    violations, steps = 0, 0
    for _ in range(20):
        d1, d2, b1, b2, dl1, dl2 = rng.uniform(0.5, 2.0, 6)
        mu, h0 = rng.uniform(0.1, 3.0), rng.uniform(0.5, 3.0)
        p = ModelParams(d1=d1, d2=d2, delta1=dl1, delta2=dl2, mu=mu, h0=h0, b1=b1, b2=b2)
        init = InitialData(u0=InitialProfile("cosine", amplitude=rng.uniform(0.2, 3.0)),
                           v0=InitialProfile("constant", value=rng.uniform(0.2, 3.0)))
        grid = Grid(n_u=64, n_v=256, xmax=h0 + 40.0)
        seen = []
        solver = FrontFixingSolver(p, grid, init, on_step=seen.append)
        solver.run(5.0, stop_rules=StopRules(h_stop=h0 + 36.0))
        m1, m2 = solver.bounds.M1, solver.bounds.M2
        for s in seen:
            bad = (s.w.min() < 0 or s.w.max() > m1 * (1 + 1e-6) or s.v.min() <= 0
                   or s.v.max() > m2 * (1 + 1e-6) or s.dhdt < 0)
            violations += int(bad)
        steps += len(seen)
    ok = violations == 0
    record(4, ok, f"{violations} violations in {steps} accepted steps over 20 runs")
    assert ok


def test_criterion_05_dichotomy(spreading_run, vanishing_run):
    s_ok = spreading_run.classification == Outcome.SPREADING
    v_ok = vanishing_run.classification == Outcome.VANISHING
    ts, tv = spreading_run.diagnostics["wall_time_s"], vanishing_run.diagnostics["wall_time_s"]
    ok = s_ok and v_ok and ts < 60 and tv < 60
    record(5, ok, f"h0=pi -> {spreading_run.classification} ({ts:.1f}s); "
                  f"small h0, mu=1e-4 -> {vanishing_run.classification} ({tv:.1f}s)")
    assert ok


def test_criterion_06_limit_states(spreading_run, vanishing_run):
    k1, k2 = BASE["b1"] / BASE["delta1"], BASE["b2"] / BASE["delta2"]
    vs = vanishing_run.final_state
    xv = np.linspace(0, vanishing_run.grid.xmax, len(vs.v))
    h0v = vanishing_run.params.h0
    sup_u_v = float(vs.w.max())
    v_dev = float(np.max(np.abs(vs.v[xv <= 2 * h0v] - k2)) / k2)

    ss = spreading_run.final_state
    h0s = spreading_run.params.h0
    x_u = np.linspace(0, ss.h, len(ss.w))
    u_dev = float(np.max(np.abs(ss.w[x_u <= h0s] - k1)) / k1)
    xs = np.linspace(0, spreading_run.grid.xmax, len(ss.v))
    v_max = float(ss.v[xs <= h0s].max())
    ok = sup_u_v < 1e-3 and v_dev < 1e-2 and u_dev < 5e-2 and v_max < 5e-2 * k2
    record(6, ok, f"vanishing: sup u {sup_u_v:.1e}, |v-k2|/k2 {v_dev:.1e}; "
                  f"spreading: |u-k1|/k1 {u_dev:.1e}, max v {v_max:.1e}")
    assert ok


def test_criterion_07_speed_bracket(spreading_run):
    lo, hi = speed_bracket(spreading_run.params)
    slope = measure_speed(spreading_run)
    in_bracket = 0.95 * lo <= slope <= 1.05 * hi
    rng = np.random.default_rng(7)
    outside = 0
    for _ in range(20):
        mu, a, delta, d = 10 ** rng.uniform(-1, 2), *rng.uniform(0.3, 3.0, 3)
        b0 = solve_beta0(SemiWaveProblem(d=d, a=a, delta=delta, mu=mu)).beta0
        outside += int(not (0 < b0 < 2 * math.sqrt(a * d)))
    ok = in_bracket and outside == 0
    record(7, ok, f"slope {slope:.4f} in [{0.95 * lo:.4f}, {1.05 * hi:.4f}]; "
                  f"{outside}/20 beta0 outside (0, 2 sqrt(ad))")
    assert ok


def test_criterion_08_kpp_limit():
    mus = [1.0, 10.0, 1e2, 1e3, 1e4]
    res = [solve_beta0(SemiWaveProblem(d=1.0, a=1.0, delta=1.0, mu=mu)) for mu in mus]
    betas = [r.beta0 for r in res]
    gaps = [2 - b for b in betas]
    monotone = all(x < y for x, y in zip(betas, betas[1:])) and all(
        x > y for x, y in zip(gaps, gaps[1:]))
    resid = max(r.residual for r in res)
    near = betas[-1] > 1.99
    ok = monotone and resid < 1e-6 and near
    record(8, ok, f"beta0 = {', '.join(f'{b:.5f}' for b in betas)}; monotone={monotone}, "
                  f"max residual {resid:.1e}, beta0(1e4) > 1.99: {near}")
    assert ok


def test_criterion_09_ode_reduction():
    rng = np.random.default_rng(9)
    worst, far = 0.0, 0.0
    for _ in range(10):
        d1, d2 = rng.uniform(0.5, 2.0, 2)
        b2 = rng.uniform(0.5, 2.0)
        k2 = b2 / d2
        k1 = k2 * rng.uniform(1.2, 3.0)
        b1 = k1 * d1
        u0, v0 = rng.uniform(0.05, 2.0, 2)
        p = OdeParams(b1=b1, b2=b2, delta1=d1, delta2=d2, bI=2 * b1, bU=2 * b2)
        rep = reduction_report(p, u0, v0, horizon=50.0, dt=1e-3)
        worst = max(worst, rep["max_rel_error_u"], rep["max_rel_error_v"])
        fin = integrate_uv(p, u0, v0, 200.0, 1e-2).final
        far = max(far, abs(fin["u"] - k1), abs(fin["v"]))
    ok = worst < 1e-6 and far < 1e-3
    record(9, ok, f"reduction rel err {worst:.1e} (< 1e-6); distance to (k1, 0) at t=200 {far:.1e}")
    assert ok


def test_criterion_10_convergence_orders():
    errs = [mms.max_error(n) for n in (16, 32, 64)]
    pde_ratios = [a / b for a, b in zip(errs, errs[1:])]
    p = OdeParams(b1=2.0, b2=1.0)
    ref = integrate_uv(p, 0.1, 1.0, 10.0, 1e-4).final["u"]
    oerr = [abs(integrate_uv(p, 0.1, 1.0, 10.0, dt).final["u"] - ref) for dt in (0.1, 0.05, 0.025)]
    ode_ratios = [a / b for a, b in zip(oerr, oerr[1:])]
    ok = min(pde_ratios) >= 3.5 and min(ode_ratios) >= 14
    record(10, ok, f"PDE ratios {', '.join(f'{r:.2f}' for r in pde_ratios)} (>= 3.5); "
                   f"RK4 ratios {', '.join(f'{r:.1f}' for r in ode_ratios)} (>= 14)")
    assert ok


def test_criterion_11_determinism(tmp_path):
    cfg = {"params": {"d1": 1, "d2": 1, "delta1": 1, "delta2": 1, "mu": 1, "h0": 2.0},
           "b1": 2, "b2": 1, "grid": {"n_u": 64, "n_v": 256, "xmax": 30},
           "run": {"horizon": 8.0, "sample_every": 0.1}}
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for tag in ("a", "b"):
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / tag)]) == 0
        outs.append((tmp_path / tag / "series.csv").read_bytes())
    sim_same = outs[0] == outs[1]

    base = dict(cfg, run={"horizon": 6.0})
    sweep_cfg = {"sweep": {"axis": "params.h0", "values": [2.5, 0.4, 1.6, 0.8, 1.2, 2.0], "base": base}}
    spath = tmp_path / "sweep.json"
    spath.write_text(json.dumps(sweep_cfg))
    sweeps = []
    for par in (1, 4):
        out = tmp_path / f"sweep{par}"
        assert main(["sweep", "--config", str(spath), "--out", str(out), "--parallelism", str(par)]) == 0
        sweeps.append((out / "sweep.csv").read_bytes())
    sweep_same = sweeps[0] == sweeps[1]
    ok = sim_same and sweep_same
    record(11, ok, f"simulate CSV byte-identical: {sim_same}; sweep CSV identical for parallelism 1/4: {sweep_same}")
    assert ok
