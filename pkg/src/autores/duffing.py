"""Bridge between the chirped Duffing oscillator and the amplitude/phase model.

Two-scale reduction with slow time ``tau = eps t / (2 kappa)`` and
``u ~ kappa rho(tau) cos(psi(tau) - phi(t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError
from .integrator import IntegrationConfig, Trajectory, integrate, interpolate
from .model import ClosedFormMu, DuffingParams, ModelParams, duffing_field, model_field

MU_CHOICES = ("nominal", "averaged")


@dataclass(frozen=True)
class ReductionResult:
    kappa: float
    lam: float
    mu: ClosedFormMu
    mu_averaged: ClosedFormMu
    slow_time_scale: float
    delta_model: float
    delta_conclusion: float
    delta_averaged: float

    def model_params(self, nu: float, mu_choice: str = "nominal") -> ModelParams:
        if mu_choice not in MU_CHOICES:
            raise DomainError(f"mu_choice must be one of {MU_CHOICES}, got {mu_choice!r}")
        return ModelParams(self.lam, nu, self.mu if mu_choice == "nominal" else self.mu_averaged)

    def tau(self, t):
        return self.slow_time_scale * np.asarray(t, dtype=float)


def reduce(p: DuffingParams) -> ReductionResult:
    """Reduction constants.

    ``mu`` is the pump law c (1 + 2 kappa tau)^{-1/2} with c = beta sqrt(2 kappa) / 4;
    ``mu_averaged`` has c = beta kappa / 2, the amplitude a first-order
    averaging of the parametric term yields.  Its delta coincides with
    ``delta_conclusion``; ``delta_model`` is half of it.
    """
    kappa = (4.0 / (3.0 * p.gamma)) ** (1.0 / 3.0)
    lam = 8.0 * p.alpha * kappa ** 2 / p.eps ** 2
    mu = ClosedFormMu(p.beta * math.sqrt(2.0 * kappa) / 4.0, 2.0 * kappa)
    mu_d = ClosedFormMu(p.beta * kappa / 2.0, 2.0 * kappa)
    return ReductionResult(
        kappa=kappa, lam=lam, mu=mu, mu_averaged=mu_d,
        slow_time_scale=p.eps / (2.0 * kappa),
        delta_model=mu.mu0 * math.sqrt(lam),
        delta_conclusion=2.0 * p.beta * math.sqrt(p.alpha) / (p.eps * math.sqrt(3.0 * p.gamma)),
        delta_averaged=mu_d.mu0 * math.sqrt(lam),
    )


@dataclass(frozen=True)
class Observables:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    E: np.ndarray
    Phi: np.ndarray
    Delta: np.ndarray
    skipped: np.ndarray  # indices where (u, v) = (0, 0)


def energy(u, v, gamma: float, eps: float):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u * u / 2.0 - gamma * eps * u ** 4 / 4.0 + v * v / 2.0


def observables(t, u, v, p: DuffingParams, eps: float | None = None) -> Observables:
    """E(t), unwrapped angle Phi of (u, u') and Delta = phi + Phi.

    Samples at the origin carry no angle; they are dropped from Phi and Delta
    and their indices reported in ``skipped``.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.size == 0:
        raise PreconditionError("empty trajectory")
    e = p.eps if eps is None else eps
    bad = (u == 0.0) & (v == 0.0)
    keep = ~bad
    phi_ang = np.full(t.shape, np.nan)
    phi_ang[keep] = np.unwrap(np.arctan2(v[keep], u[keep]))
    delta = p.phase(t) + phi_ang
    return Observables(t, u, v, energy(u, v, p.gamma, e), phi_ang, delta, np.nonzero(bad)[0])


def simulate_duffing(p: DuffingParams, u0: float, v0: float, t_max: float,
                     cfg: IntegrationConfig | None = None, eps: float | None = None) -> Trajectory:
    cfg = cfg or IntegrationConfig(rel_tol=1e-10, abs_tol=1e-12, max_step=0.25)
    return integrate(duffing_field(p, eps), 0.0, [u0, v0], t_max, cfg)


def sample(traj: Trajectory, dt: float = 0.05) -> np.ndarray:
    n = int(math.floor((traj.t1 - traj.t0) / dt + 1e-9))
    t = traj.t0 + dt * np.arange(n + 1)
    return t, interpolate(traj, t)


def match_initial(u0: float, v0: float, kappa: float) -> tuple[float, float]:
    """(rho0, psi0) with u = kappa rho cos psi0, u' = kappa rho sin psi0 at t = 0."""
    r = math.hypot(u0, v0)
    if r == 0.0:
        raise DomainError("initial datum (0, 0) has no phase")
    return r / kappa, math.atan2(v0, u0)


def window_envelope(t, u, width: float, t_lo: float, t_hi: float):
    """Max |u| over consecutive windows of ``width`` tiling [t_lo, t_hi]."""
    edges = np.arange(t_lo, t_hi - 0.5 * width + 1e-12, width)
    centers, env = [], []
    for a in edges:
        sel = (t >= a) & (t < a + width)
        if np.any(sel):
            centers.append(a + width / 2)
            env.append(float(np.max(np.abs(u[sel]))))
    return np.array(centers), np.array(env)


@dataclass
class EnvelopeReport:
    captured: bool
    escaped: bool
    max_rel_env_err: float
    psi0_observed: float
    delta_band_final_half: float
    max_abs_delta: float
    energy_ratio: float
    energy_growth: float
    delta_model: float
    delta_conclusion: float
    mu_choice: str
    window: tuple[float, float]
    t_window: np.ndarray = field(repr=False, default=None)
    env_full: np.ndarray = field(repr=False, default=None)
    env_model: np.ndarray = field(repr=False, default=None)
    rel_err: np.ndarray = field(repr=False, default=None)
    obs: Observables = field(repr=False, default=None)

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "captured", "escaped", "max_rel_env_err", "psi0_observed", "delta_band_final_half",
            "max_abs_delta", "energy_ratio", "energy_growth", "delta_model", "delta_conclusion", "mu_choice")}


def compare_envelope(p: DuffingParams, u0: float, v0: float, t_max: float,
                     window: tuple[float, float] | None = None, mu_choice: str = "nominal",
                     periods_per_window: float = 3.0, dt: float = 0.05,
                     band_limit: float = 2 * math.pi, drift_limit: float = 4 * math.pi) -> EnvelopeReport:
    """Full Duffing run against kappa rho(tau) of the reduced model.

    Captured: Delta stays in a band narrower than ``band_limit`` over the final
    half of the run and E grows.  Escaped: |Delta| exceeds ``drift_limit``.
    Envelopes are compared only for captured runs, over ``window``
    (default [0.2/eps, 1/eps]).
    """
    if window is None:
        window = (0.2 / p.eps, 1.0 / p.eps)
    if not 0 <= window[0] < window[1] <= t_max:
        raise PreconditionError(f"envelope window {window} must lie inside [0, {t_max}]")
    red = reduce(p)
    traj = simulate_duffing(p, u0, v0, t_max)
    t, y = sample(traj, dt)
    obs = observables(t, y[:, 0], y[:, 1], p)
    half = t >= 0.5 * t[-1]
    d_half = obs.Delta[half]
    band = float(np.nanmax(d_half) - np.nanmin(d_half))
    max_abs = float(np.nanmax(np.abs(obs.Delta)))
    e_ratio = float(np.mean(obs.E[half]) / max(obs.E[0], 1e-300))
    # last quarter over third quarter: ~1 when E is bounded, > 1 while it grows
    e_growth = float(np.mean(obs.E[t >= 0.75 * t[-1]]) / np.mean(obs.E[half & (t < 0.75 * t[-1])]))
    captured = band < band_limit and e_ratio > 1.0
    escaped = max_abs > drift_limit
    rep = EnvelopeReport(captured, escaped, float("nan"), float(np.nanmean(d_half)), band, max_abs,
                         e_ratio, e_growth, red.delta_model, red.delta_conclusion, mu_choice, window, obs=obs)
    if not captured:
        return rep
    rho0, psi0 = match_initial(u0, v0, red.kappa)
    mp = red.model_params(p.nu, mu_choice)
    tau1 = float(red.tau(window[1]))
    ms = integrate(model_field(mp), 0.0, [rho0, psi0], tau1,
                   IntegrationConfig(rel_tol=1e-10, abs_tol=1e-12))
    width = periods_per_window * 2.0 * math.pi
    tc, env = window_envelope(t, y[:, 0], width, window[0], window[1])
    env_m = red.kappa * interpolate(ms, np.minimum(red.tau(tc), ms.t1))[:, 0]
    rel = np.abs(env - env_m) / env_m
    rep.max_rel_env_err = float(np.max(rel))
    rep.t_window, rep.env_full, rep.env_model, rep.rel_err = tc, env, env_m, rel
    return rep


def _compare_job(args):
    p, u0, v0, t_max, mu_choice = args
    return compare_envelope(p, u0, v0, t_max, mu_choice=mu_choice)


def run_many(p: DuffingParams, data, t_max: float, mu_choice: str = "nominal",
             workers: int = 1) -> list[EnvelopeReport]:
    """compare_envelope for each (u0, v0) in ``data``, results in input order."""
    jobs = [(p, float(u0), float(v0), t_max, mu_choice) for u0, v0 in data]
    if workers <= 1 or len(jobs) < 2:
        return [_compare_job(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_compare_job, jobs))


def search_captured(p: DuffingParams, amplitudes=(0.1, 0.5, 1.0, 2.0, 3.0), n_phase: int = 8,
                    t_max: float = 2000.0, mu_choice: str = "nominal"):
    """First captured datum on a polar grid (u0, v0) = a (cos th, sin th), scanning a outward.

    Returns (u0, v0, report) or None.
    """
    for a in amplitudes:
        for k in range(n_phase):
            th = 2.0 * math.pi * k / n_phase
            u0, v0 = a * math.cos(th), a * math.sin(th)
            rep = compare_envelope(p, u0, v0, t_max, mu_choice=mu_choice)
            if rep.captured:
                return u0, v0, rep
    return None
