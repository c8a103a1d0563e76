"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with -s) and asserts the
criterion as stated; nothing is loosened to force a pass.  Criteria 6 and 7
probe the harmonic purity of the learned control law; at the reference
parameters the learned Hamiltonian retains genuine second-harmonic control
content (the first-harmonic baseline law is exact only in the vanishing
control-penalty limit), so those two assertions are expected to fail and
their messages carry the measured values.  The full-scale Monte-Carlo
variants run under ``-m slow``.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from gaitlearn import control, harness
from gaitlearn.cli import main as cli_main
from gaitlearn.config import default_config
from gaitlearn.dynamics import TWO_PI, simulate
from gaitlearn.fpf import OscillatorEnsemble, gain
from gaitlearn.phase import estimate_radius
from gaitlearn.qlearn import bellman_error, grad_bellman


def _report(criterion, ok, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


# ---------------------------------------------------------------------------
# shared expensive artifacts

@pytest.fixture(scope="module")
def open_loop():
    cfg = default_config()
    t0 = time.perf_counter()
    traj = simulate(cfg.physical, t_end=50.0 * cfg.period, dt=cfg.learn.dt)
    return traj, cfg, time.perf_counter() - t0


@pytest.fixture(scope="module")
def filter_run():
    cfg = default_config()
    t0 = time.perf_counter()
    res = control.evaluate_policy(
        control.PolicySpec(kind="zero"), cfg.physical, cfg.phase_model,
        cfg.sensor, cfg.filter, cfg.learn, seed=cfg.run.seed,
        eval_periods=40.0, warmup_periods=10.0)
    return res, cfg, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_train(tmp_path_factory):
    """One desk-scale CLI training run (the CI-sized preset)."""
    out = tmp_path_factory.mktemp("train_a")
    t0 = time.perf_counter()
    rc = cli_main(["train", "--seed", "7", "--preset", "small", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert rc == 0
    return out, elapsed


@pytest.fixture(scope="module")
def trained_full():
    """Full-scale training at the base seed plus the three evaluation runs."""
    cfg = default_config()
    _, result = harness.train_run(cfg, 0)
    w = result.w
    spec_analytic, info = harness.calibrated_policy(cfg, w)
    ev_learned = harness.evaluate_run(cfg, control.PolicySpec(kind="learned", w=w))
    ev_analytic = harness.evaluate_run(cfg, spec_analytic)
    return cfg, w, ev_learned, ev_analytic, info


# ---------------------------------------------------------------------------
# criteria

def test_criterion_1_limit_cycle_radius(open_loop):
    traj, cfg, elapsed = open_loop
    est = estimate_radius(traj, cfg.physical.omega0)
    ok = 0.51 <= est.r <= 0.61 and elapsed < 5.0
    _report(1, ok, f"r={est.r:.4f}, runtime={elapsed:.2f}s")
    assert 0.51 <= est.r <= 0.61
    assert elapsed < 5.0


def test_criterion_2_no_drift_baseline(open_loop):
    traj, cfg, _ = open_loop
    n10 = int(round(10.0 * cfg.period / cfg.learn.dt))
    drift = abs(traj.q[-1] - traj.q[-1 - n10])
    _report(2, drift < 0.02, f"|dq| over 10 periods = {drift:.2e} rad")
    assert drift < 0.02


def test_criterion_3_filter_tracking(filter_run):
    res, cfg, elapsed = filter_run
    metrics = harness.filter_metrics(cfg, res.series, skip_periods=10.0)
    rmse = metrics["circ_rmse"]
    resultant = metrics["mean_resultant"]
    ok = rmse < 0.3 and resultant > 0.8 and elapsed < 60.0
    _report(3, ok, f"rmse={rmse:.3f} rad, R={resultant:.3f}, runtime={elapsed:.1f}s")
    assert rmse < 0.3
    assert resultant > 0.8
    assert elapsed < 60.0


def test_criterion_4_gain_solver_oracle():
    n = 10_000
    ens = OscillatorEnsemble(theta=TWO_PI * np.arange(n) / n, omega=np.ones(n))
    sol = gain(ens, lambda th: 0.56 * np.sin(th))
    ok = abs(sol.kappa1 - 0.56) <= 1e-3 and abs(sol.kappa2) <= 1e-3
    _report(4, ok, f"kappa1={sol.kappa1:.6f}, kappa2={sol.kappa2:.2e}")
    assert sol.kappa1 == pytest.approx(0.56, abs=1e-3)
    assert sol.kappa2 == pytest.approx(0.0, abs=1e-3)


def test_criterion_5_error_decay_desk_scale(desk_train):
    out, elapsed = desk_train
    rows = np.genfromtxt(out / "learning_curve.csv", delimiter=",", names=True)
    mean_e = np.atleast_1d(rows["mean_e"])
    orders = math.log10(mean_e[0] / mean_e.min())
    ok = orders >= 2.0 and elapsed < 600.0
    _report(5, ok, f"desk preset: {orders:.2f} orders, runtime={elapsed:.0f}s")
    assert orders >= 2.0
    assert elapsed < 600.0


def test_criterion_6_weight_structure_desk_scale(desk_train):
    out, _ = desk_train
    rows = np.genfromtxt(out / "runs.csv", delimiter=",", names=True)
    w = np.column_stack([np.atleast_1d(rows[f"w{i}"]) for i in range(1, 10)])
    dominant = [harness.first_harmonic_dominant(wi) for wi in w]
    fraction = float(np.mean(dominant))
    _report(6, fraction >= 0.8,
            f"|w5| > 3*max(|w6|,|w7|,|w8|) in {fraction:.0%} of runs")
    assert fraction >= 0.8, (
        f"first-harmonic weight dominance holds in {fraction:.0%} of runs; the "
        f"fitted Hamiltonian retains genuine second-harmonic control terms at "
        f"unit control penalty")


def test_criterion_7_policy_agreement(trained_full):
    cfg, _, ev_learned, ev_analytic, _ = trained_full
    sim = harness.cosine_similarity(ev_learned.series["u"], ev_analytic.series["u"])
    _report(7, sim >= 0.9, f"cosine similarity = {sim:.3f}")
    assert sim >= 0.9, (
        f"cosine similarity between learned and first-harmonic baseline inputs "
        f"is {sim:.3f}; the learned law carries second-harmonic content, the "
        f"baseline is exact only as the control penalty vanishes")


def test_criterion_8_clockwise_rotation(trained_full):
    cfg, _, ev_learned, ev_analytic, _ = trained_full
    rel = abs(ev_learned.dq - ev_analytic.dq) / abs(ev_analytic.dq)
    ok = ev_learned.dq < 0.0 and rel <= 0.2
    _report(8, ok, f"dq_learned={ev_learned.dq:+.4f}, dq_analytic={ev_analytic.dq:+.4f}, "
                   f"rel diff={rel:.3f}")
    assert ev_learned.dq < 0.0
    assert rel <= 0.2


def test_criterion_9_gradient_check():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        n = 40
        th0 = rng.uniform(0.0, TWO_PI, n)
        th1 = np.mod(th0 + rng.normal(0.0, 0.3, n) + 0.01, TWO_PI)
        u = float(rng.normal(0.0, 0.5))
        c = float(rng.normal(0.0, 1.0))
        w = np.empty(9)
        w[:8] = rng.uniform(-1.0, 1.0, 8)
        w[8] = rng.uniform(0.5, 1.5)
        g = grad_bellman(th0, th1, u, c, w, 0.01, 1.0)
        h = 1e-6
        for m in range(9):
            e = np.zeros(9)
            e[m] = h
            fd = (bellman_error(th0, th1, u, c, w + e, 0.01, 1.0)
                  - bellman_error(th0, th1, u, c, w - e, 0.01, 1.0)) / (2.0 * h)
            worst = max(worst, abs(g[m] - fd) / max(abs(fd), abs(g[m]), 1.0))
    _report(9, worst <= 1e-4, f"worst relative error = {worst:.2e}")
    assert worst <= 1e-4


def test_criterion_10_determinism(desk_train, tmp_path):
    out_a, _ = desk_train
    out_b = tmp_path / "train_b"
    rc = cli_main(["train", "--seed", "7", "--preset", "small", "--out", str(out_b)])
    assert rc == 0
    identical = all(
        (out_a / name).read_bytes() == (out_b / name).read_bytes()
        for name in ("learning_curve.csv", "runs.csv", "trace.csv"))
    _report(10, identical, "byte-identical CSV outputs across repeated runs")
    assert identical


# ---------------------------------------------------------------------------
# full-scale Monte-Carlo variants (opt-in: pytest -m slow)

@pytest.fixture(scope="module")
def full_monte_carlo():
    cfg = default_config()
    cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, runs=50))
    return harness.monte_carlo(cfg), cfg


@pytest.mark.slow
def test_criterion_5_error_decay_full_scale(full_monte_carlo):
    mc, _ = full_monte_carlo
    orders = math.log10(mc.mean_e[0] / mc.mean_e.min())
    _report("5-full", orders >= 3.0,
            f"50 runs: {orders:.2f} orders, {len(mc.failures)} failures")
    assert not mc.failures
    assert orders >= 3.0


@pytest.mark.slow
def test_criterion_6_weight_structure_full_scale(full_monte_carlo):
    mc, _ = full_monte_carlo
    fraction = mc.dominance_fraction
    _report("6-full", fraction >= 0.8, f"dominance in {fraction:.0%} of 50 runs")
    assert fraction >= 0.8, (
        f"first-harmonic weight dominance holds in {fraction:.0%} of runs; the "
        f"fitted Hamiltonian retains genuine second-harmonic control terms at "
        f"unit control penalty")
