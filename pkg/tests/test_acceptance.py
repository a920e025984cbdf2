"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import io
import math

import numpy as np
import pytest

from autores.asymptotics import compute_coeffs, defect_orders, residual
from autores.capture import fit_envelope
from autores.cli import run
from autores.duffing import compare_envelope
from autores.equilibria import PhaseParams, ell, find_roots, threshold_delta
from autores.integrator import IntegrationConfig, integrate
from autores.model import DuffingParams, ModelParams, demo_es_exact, demo_es_jacobian, demo_es_rhs
from autores.stability import (ScaledFrame, frozen_frequency, integrate_from_scaled, lyapunov_check,
                               lyapunov_summary, omega_formula, perturbation_test, reference_error,
                               tight_config)

PI = math.pi
CANON = ModelParams(1.0)  # lambda = 1, nu = 0, mu = 0, psi0 = pi


def test_criterion_1_root_census(verdict):
    r1 = [r.psi0 for r in find_roots(PhaseParams(1.0, 0.0))]
    r2 = [r.psi0 for r in find_roots(PhaseParams(0.3, 0.0))]
    want1 = [0.0, PI / 3, PI, 5 * PI / 3]
    err1 = max(abs(a - b) for a, b in zip(r1, want1)) if len(r1) == 4 else math.inf
    err2 = max(abs(a - b) for a, b in zip(r2, [0.0, PI])) if len(r2) == 2 else math.inf
    ok = err1 < 1e-10 and err2 < 1e-10
    assert verdict(1, ok, f"delta=1 roots err {err1:.1e}, delta=0.3 roots err {err2:.1e} (tol 1e-10)")


def test_criterion_2_bifurcation_anchors(verdict):
    e = max(abs(ell(PhaseParams(0.5, 0.0))), abs(ell(PhaseParams(-0.5, 0.0))))
    t0 = abs(threshold_delta(0.0) - 0.5)
    t90 = abs(threshold_delta(PI / 2) - 1.0)
    ok = e <= 1e-15 and t0 <= 1e-10 and t90 <= 1e-8
    assert verdict(2, ok, f"|ell(+-1/2,0)|={e:.1e}, threshold(0) err {t0:.1e}, threshold(pi/2) err {t90:.1e}")


def _sample_points(n=20, seed=20240611, margin=0.05, d0=1e-3, tau0=100.0):
    """Points off the fold curves: every root's particular solution must be
    resolved at tau0 well below the perturbation size."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        d, nu = rng.uniform(-1.6, 1.6), rng.uniform(0.0, PI)
        pp = PhaseParams(float(d), float(nu))
        if abs(ell(pp)) < margin:
            continue
        p = ModelParams.from_delta(pp.delta, pp.nu, lam=1.0)
        roots = find_roots(pp)
        if any(abs(r.p_prime) < margin for r in roots):
            continue
        if any(reference_error(ScaledFrame.build(p, r.psi0, allow_unstable=True), tau0) > 0.1 * d0
               for r in roots):
            continue
        pts.append(pp)
    return pts


def test_criterion_3_stability_dichotomy(verdict):
    rows = []
    for pp in _sample_points():
        p = ModelParams.from_delta(pp.delta, pp.nu, lam=1.0)
        for r in find_roots(pp):
            res = perturbation_test(p, r.psi0, d0=1e-3, tau0=100.0, horizon=4.0)
            rows.append(res)
    stable = [r["max_ratio"] for r in rows if r["algebraic"] == "stable"]
    unstable = [r["max_ratio"] for r in rows if r["algebraic"] == "unstable"]
    agree = sum(r["verdict"] == r["algebraic"] for r in rows)
    ok = agree == len(rows) and max(stable) < 2 and min(unstable) >= 10
    assert verdict(3, ok, f"{agree}/{len(rows)} roots on 20 points agree; stable max d/d0 "
                          f"{max(stable):.3f} (< 2), unstable min d/d0 {min(unstable):.1f} (>= 10)")


def test_criterion_4_series_residual_order(verdict):
    c = compute_coeffs(CANON, PI)
    tt = np.geomspace(1e2, 1e5, 301)
    orders = defect_orders(c)
    slopes = [float(np.polyfit(np.log(tt), np.log(np.abs(r)), 1)[0]) for r in residual(c, tt)]
    ok = all(abs(s - o) <= 0.1 for s, o in zip(slopes, orders))
    assert verdict(4, ok, f"slopes rho {slopes[0]:.3f} (theory {orders[0]}), "
                          f"psi {slopes[1]:.3f} (theory {orders[1]}), tol 0.1")


def test_criterion_5_counterexample_fidelity(verdict):
    tr = integrate(demo_es_rhs, 1.0, demo_es_exact(1.0, 1.0, 1.0), 16.0, IntegrationConfig(rel_tol=1e-10))
    a = demo_es_exact(1.0, 1.0, 16.0)[0]
    rel = abs(tr.y[-1, 0] - a) / abs(a)
    worst = max(float(np.max(np.linalg.eigvals(demo_es_jacobian(t)).real))
                for t in np.geomspace(1.0, 1e4, 200))
    ok = rel < 1e-6 and worst < 0 and a > 100
    assert verdict(5, ok, f"a(16) rel err {rel:.1e} (tol 1e-6), a grows to {a:.2f}, "
                          f"max eigenvalue real part {worst:.2e} < 0")


def test_criterion_6_lyapunov_decay(verdict):
    f = ScaledFrame.build(CANON, PI)
    s = lyapunov_summary(lyapunov_check(f, d0=0.02, eta0=1e3, eta1=1e4))
    ok = s["frac_V_positive"] >= 0.99 and s["frac_decreasing"] >= 0.99 and s["frac_sandwich"] == 1.0
    assert verdict(6, ok, f"V>0 {s['frac_V_positive']:.4f}, dV/deta<0 {s['frac_decreasing']:.4f}, "
                          f"sandwich {s['frac_sandwich']:.4f} (V/d^2 in [{s['min_V_over_d2']:.4f}, "
                          f"{s['max_V_over_d2']:.4f}])")


def test_criterion_7_envelope_exponents(verdict):
    f = ScaledFrame.build(CANON, PI)
    d0 = 0.1
    traj = integrate_from_scaled(f, d0 / math.sqrt(2), d0 / math.sqrt(2), 1e2, 1e4,
                                 tight_config(rel_tol=1e-9, abs_tol=1e-12))
    fit = fit_envelope(traj, f)
    want = 2 * f.omega0 * math.sqrt(f.lam)
    ok = (fit.ok and -0.15 <= fit.decay_exponent <= -0.10 and 0.23 <= fit.freq_exponent <= 0.27
          and abs(fit.freq_prefactor / want - 1) <= 0.05)
    assert verdict(7, ok, f"decay {fit.decay_exponent:.4f} in [-0.15,-0.10], frequency exponent "
                          f"{fit.freq_exponent:.4f} in [0.23,0.27], prefactor {fit.freq_prefactor:.4f} "
                          f"vs {want:.4f} ({100 * abs(fit.freq_prefactor / want - 1):.2f}%)")


def test_criterion_8_frozen_frequency_law(verdict):
    f = ScaledFrame.build(CANON, PI)
    w_small = frozen_frequency(f, 1e-4)
    slope = (frozen_frequency(f, 2e-3) - frozen_frequency(f, 1e-3)) / 1e-3
    want = omega_formula(f, 1.0) - omega_formula(f, 0.0)
    lin = 2 * f.omega0 * math.sqrt(f.lam)
    ok = abs(w_small - lin) < 1e-3 and abs(slope / want - 1) <= 0.05
    assert verdict(8, ok, f"omega(1e-4) - 2 omega0 sqrt(lam) = {w_small - lin:.2e}, slope {slope:.5f} "
                          f"vs {want:.5f} ({100 * abs(slope / want - 1):.2f}%)")


def test_criterion_9_duffing_capture(verdict):
    p = DuffingParams(1e-2, 0.25e-4, 1.0, 1 / 6, 0.0)
    cap = compare_envelope(p, -math.sqrt(2), math.sqrt(2), 2000.0)
    esc = compare_envelope(p, 1e-3, 0.0, 2000.0)
    ok = (cap.captured and cap.delta_band_final_half < 2 * PI and cap.max_rel_env_err < 0.15
          and cap.energy_growth > 1.1
          and not esc.captured and esc.max_abs_delta > 4 * PI and esc.energy_growth < 1.1)
    assert verdict(9, ok, f"captured (-sqrt2, sqrt2): E growth {cap.energy_growth:.2f}, Delta band "
                          f"{cap.delta_band_final_half:.2f} < 2pi, envelope err {cap.max_rel_env_err:.3f} "
                          f"< 0.15; escaped (1e-3, 0): E growth {esc.energy_growth:.2f}, "
                          f"max|Delta| {esc.max_abs_delta:.1f} > 4pi")


DETERMINISM_CASES = {
    "equilibria": ["--delta", "1", "--nu", "0"],
    "bifurcation-scan": ["--n-delta", "9", "--n-nu", "5"],
    "simulate": [],
    "basin": ["--tau0", "10", "--tau-max", "40", "--n-rho", "2", "--n-psi", "2"],
    "lyapunov-check": ["--eta1", "2000", "--n-samples", "2000"],
    "freq-check": [],
    "threshold-sweep": ["--deltas", "0.3,0.45,0.55,0.7"],
    "duffing": [],
    "demo-es": [],
    "asymptotics": [],
}


def test_criterion_10_determinism(tmp_path, verdict):
    bad = []
    for command, extra in DETERMINISM_CASES.items():
        outs = []
        for k, workers in enumerate((1, 2, 2)):
            d = tmp_path / command / str(k)
            code = run([command, *extra, "--workers", str(workers), "--out-dir", str(d)], stdout=io.StringIO())
            if code != 0:
                bad.append(f"{command} exit {code}")
                break
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        else:
            if not outs[0] or any(o != outs[0] for o in outs[1:]):
                bad.append(command)
    ok = not bad
    assert verdict(10, ok, f"{len(DETERMINISM_CASES) - len(bad)}/{len(DETERMINISM_CASES)} commands "
                           f"byte-identical over reruns and workers 1/2" + (f"; differing: {bad}" if bad else ""))
