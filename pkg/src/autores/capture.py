"""Capture classification, basin and threshold sweeps, and envelope fits."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equilibria import EquilibriumPoint, PhaseParams, circ_dist, classify, find_roots
from .errors import PreconditionError, SingularityError
from .integrator import IntegrationConfig, Trajectory, integrate, interpolate
from .model import ModelParams, model_field
from .stability import ScaledFrame, integrate_from_scaled, scaled_track, tight_config


class VerdictKind(str, enum.Enum):
    CAPTURED = "Captured"
    ESCAPED = "Escaped"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class CaptureCriteria:
    phase_window: float = math.pi / 2
    amp_band: tuple[float, float] = (0.8, 1.2)
    drift_limit: float = 4 * math.pi
    collapse_ratio: float = 0.3
    tail_start: float = 0.5  # tail window is [tail_start * tau_max, tau_max]
    min_span: float = 4.0


@dataclass(frozen=True)
class CaptureVerdict:
    kind: VerdictKind
    psi0_index: int | None = None
    psi0_value: float | None = None
    tau_final: float = float("nan")
    max_drift: float = float("nan")
    tail_amp_ratio: float = float("nan")
    singular: bool = False

    @property
    def captured(self) -> bool:
        return self.kind is VerdictKind.CAPTURED


def _tail_samples(traj: Trajectory, lo: float, per_step: int = 2):
    t = traj.t
    i = max(int(np.searchsorted(t, lo)) - 1, 0)
    seg = t[i:]
    if len(seg) > 1:
        frac = np.arange(per_step) / per_step
        tt = (seg[:-1, None] + np.diff(seg)[:, None] * frac[None, :]).ravel()
        tt = np.r_[tt, seg[-1]]
    else:
        tt = seg
    tt = tt[tt >= lo]
    return tt, interpolate(traj, tt)


def classify_trajectory(traj: Trajectory, p: ModelParams, roots: Sequence[EquilibriumPoint],
                        criteria: CaptureCriteria = CaptureCriteria()) -> CaptureVerdict:
    """Captured / Escaped / Undetermined from the tail window of ``traj``.

    A trajectory stopped by the rho floor is Escaped whatever its span.
    """
    if p.lam <= 0:
        raise PreconditionError("capture is defined for lam > 0")
    t0, t1 = traj.t0, traj.t1
    if traj.status == "singular":
        return CaptureVerdict(VerdictKind.ESCAPED, tau_final=t1, singular=True)
    if t0 <= 0 or t1 < criteria.min_span * t0:
        raise PreconditionError(f"trajectory spans [{t0}, {t1}], need tau_max >= {criteria.min_span} tau0")
    lo = criteria.tail_start * t1
    tt, y = _tail_samples(traj, lo)
    ratio = y[:, 0] ** 2 / (p.lam * tt)
    psi_lo = float(interpolate(traj, lo)[1])
    drift = abs(float(y[-1, 1]) - psi_lo)
    mean_ratio = float(np.mean(ratio))
    base = dict(tau_final=t1, max_drift=drift, tail_amp_ratio=mean_ratio)
    band_ok = bool(np.all((ratio >= criteria.amp_band[0]) & (ratio <= criteria.amp_band[1])))
    if band_ok:
        for i, r in enumerate(roots):
            if r.stable and np.all(circ_dist(y[:, 1], r.psi0) < criteria.phase_window):
                return CaptureVerdict(VerdictKind.CAPTURED, i, r.psi0, **base)
    if drift > criteria.drift_limit or mean_ratio < criteria.collapse_ratio:
        return CaptureVerdict(VerdictKind.ESCAPED, **base)
    return CaptureVerdict(VerdictKind.UNDETERMINED, **base)


def capture_max_step(p: ModelParams, tau: float) -> float:
    """Quarter of the small-oscillation period 2 pi / (2 omega0 lam^{1/2} tau^{1/4}) at tau.

    omega0 is taken from the stiffest stable root (largest P'); 1 if none.
    """
    roots = [r.p_prime for r in find_roots(PhaseParams(p.delta, p.nu)) if r.stable]
    d1 = max(roots) if roots else 1.0
    w = 2.0 * math.sqrt(d1) * (4.0 * p.lam) ** -0.25 * math.sqrt(p.lam) * tau ** 0.25
    return 0.25 * 2.0 * math.pi / w


def simulate(p: ModelParams, rho0: float, psi0: float, tau0: float, tau_max: float,
             cfg: IntegrationConfig | None = None) -> Trajectory:
    """Integrate the model; ``max_step`` defaults to a quarter oscillation period at tau_max."""
    if cfg is None or math.isinf(cfg.max_step):
        base = cfg or IntegrationConfig()
        cfg = IntegrationConfig(base.rel_tol, base.abs_tol, capture_max_step(p, tau_max),
                                base.max_steps, base.first_step, base.events)
    return integrate(model_field(p), tau0, [rho0, psi0], tau_max, cfg)


# -- basin scan ----------------------------------------------------------------

BASIN_COLUMNS = ("rho0", "psi0_init", "verdict", "psi0_locked", "tail_amp_ratio", "max_drift")


def _basin_node(args) -> dict:
    p, rho0, psi0, tau0, tau_max, cfg, criteria = args
    roots = find_roots(PhaseParams(p.delta, p.nu))
    try:
        traj = simulate(p, rho0, psi0, tau0, tau_max, cfg)
    except SingularityError:
        v = CaptureVerdict(VerdictKind.ESCAPED, tau_final=tau0, singular=True)
    else:
        v = classify_trajectory(traj, p, roots, criteria)
    return {"rho0": rho0, "psi0_init": psi0, "verdict": v.kind.value,
            "psi0_locked": v.psi0_value, "tail_amp_ratio": v.tail_amp_ratio,
            "max_drift": v.max_drift}


def _run_ordered(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def basin_scan(p: ModelParams, tau0: float, rho_grid: Sequence[float], psi_grid: Sequence[float],
               tau_max: float, workers: int = 1, cfg: IntegrationConfig | None = None,
               criteria: CaptureCriteria = CaptureCriteria()) -> list[dict]:
    """Verdict for every (rho0, psi0) node, row-major with rho outer."""
    if len(rho_grid) == 0 or len(psi_grid) == 0:
        raise PreconditionError("basin grid is empty")
    if tau_max < criteria.min_span * tau0:
        raise PreconditionError(f"tau_max={tau_max} < {criteria.min_span} * tau0={tau0}")
    cfg = cfg or IntegrationConfig()
    jobs = [(p, float(r), float(s), tau0, tau_max, cfg, criteria) for r in rho_grid for s in psi_grid]
    return _run_ordered(_basin_node, jobs, workers)


# -- threshold sweep -------------------------------------------------------------

THRESHOLD_COLUMNS = ("delta", "p_prime", "algebraic", "dynamic", "agree")


def perturbed_start(p: ModelParams, psi0: float, d0: float = 1e-3, tau0: float = 100.0,
                    horizon: float = 4.0, angle: float = math.pi / 4,
                    cfg: IntegrationConfig | None = None):
    """Trajectory from scaled distance d0 off the particular solution through psi0."""
    f = ScaledFrame.build(p, psi0, allow_unstable=True)
    cfg = cfg or tight_config(rel_tol=1e-10, abs_tol=1e-12)
    return f, integrate_from_scaled(f, d0 * math.cos(angle), d0 * math.sin(angle),
                                    tau0, horizon * tau0, cfg)


def _threshold_row(args) -> dict:
    p, psi_branch, d0, tau0, horizon = args
    roots = find_roots(PhaseParams(p.delta, p.nu))
    k = int(np.argmin([circ_dist(r.psi0, psi_branch) for r in roots]))
    root = roots[k]
    _, traj = perturbed_start(p, root.psi0, d0, tau0, horizon)
    v = classify_trajectory(traj, p, roots)
    dyn = "stable" if v.captured and v.psi0_index == k else "unstable"
    alg = classify(root.p_prime).value
    return {"delta": p.delta, "p_prime": root.p_prime, "algebraic": alg,
            "dynamic": dyn, "agree": alg == dyn}


def threshold_sweep(nu: float, lam: float, deltas: Sequence[float], psi_branch: float = 0.0,
                    d0: float = 1e-3, tau0: float = 100.0, horizon: float = 4.0,
                    workers: int = 1) -> list[dict]:
    """Track the root nearest ``psi_branch`` across ``deltas`` and compare both classifications.

    The pump is the pure leading term mu0 = delta / sqrt(lam).
    """
    jobs = [(ModelParams.from_delta(float(d), nu, lam), psi_branch, d0, tau0, horizon) for d in deltas]
    return _run_ordered(_threshold_row, jobs, workers)


# -- envelope fit ------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    ok: bool
    a: float = float("nan")
    phi: float = float("nan")
    decay_exponent: float = float("nan")
    freq_exponent: float = float("nan")
    freq_prefactor: float = float("nan")
    rms_residual: float = float("nan")
    n_extrema: int = 0
    reason: str = ""
    extrema: np.ndarray = field(default=None, repr=False, compare=False)


MIN_EXTREMA = 20


def _extrema(tau, x):
    i = np.nonzero((np.abs(x[1:-1]) >= np.abs(x[:-2])) & (np.abs(x[1:-1]) > np.abs(x[2:]))
                   & (np.sign(x[:-2]) == np.sign(x[1:-1])) & (np.sign(x[2:]) == np.sign(x[1:-1])))[0] + 1
    # parabolic refinement through three samples (uniform spacing not assumed)
    t0, t1, t2 = tau[i - 1], tau[i], tau[i + 1]
    y0, y1, y2 = x[i - 1], x[i], x[i + 1]
    d01, d12 = (y1 - y0) / (t1 - t0), (y2 - y1) / (t2 - t1)
    c2 = (d12 - d01) / (t2 - t0)
    c1 = d01 - c2 * (t0 + t1)
    ok = c2 != 0
    tv = np.where(ok, -c1 / np.where(ok, 2 * c2, 1.0), t1)
    tv = np.clip(tv, t0, t2)
    yv = y0 + d01 * (tv - t0) + c2 * (tv - t0) * (tv - t1)
    return tv, yv


def _zero_crossings(tau, x):
    i = np.nonzero(np.sign(x[:-1]) * np.sign(x[1:]) < 0)[0]
    return tau[i] - x[i] * (tau[i + 1] - tau[i]) / (x[i + 1] - x[i])


def fit_envelope_signal(tau, dpsi, omega0: float, lam: float) -> EnvelopeFit:
    """Fit |dpsi| ~ A tau^q at the extrema and the local frequency pi / (zero spacing) ~ C tau^p."""
    tau = np.asarray(tau, dtype=float)
    dpsi = np.asarray(dpsi, dtype=float)
    te, ye = _extrema(tau, dpsi)
    if len(te) < MIN_EXTREMA:
        return EnvelopeFit(False, n_extrema=len(te), reason=f"only {len(te)} extrema (< {MIN_EXTREMA})")
    lt, la = np.log(te), np.log(np.abs(ye))
    q, c = np.polyfit(lt, la, 1)
    rms = float(np.sqrt(np.mean((la - (q * lt + c)) ** 2)))
    z = _zero_crossings(tau, dpsi)
    if len(z) < MIN_EXTREMA:
        return EnvelopeFit(False, n_extrema=len(te), reason=f"only {len(z)} zero crossings")
    tm = 0.5 * (z[1:] + z[:-1])
    w = math.pi / np.diff(z)
    pexp, lc = np.polyfit(np.log(tm), np.log(w), 1)
    s = 1.6 * omega0 * math.sqrt(lam) * te[0] ** 1.25
    phi = float(np.mod((math.pi / 2 if ye[0] > 0 else -math.pi / 2) - s, 2 * math.pi))
    return EnvelopeFit(True, a=float(abs(ye[0])), phi=phi, decay_exponent=float(q),
                       freq_exponent=float(pexp), freq_prefactor=float(math.exp(lc)),
                       rms_residual=rms, n_extrema=len(te), extrema=np.c_[te, ye])


def fit_envelope(traj: Trajectory, f: ScaledFrame, per_step: int = 4) -> EnvelopeFit:
    """Envelope fit of psi - psi* along a captured trajectory."""
    if traj.t1 < 10 * traj.t0:
        return EnvelopeFit(False, reason="trajectory spans less than one decade in tau")
    tt, _R, Psi, _eta, _d = scaled_track(f, traj, per_step)
    return fit_envelope_signal(tt, Psi, f.omega0, f.lam)
