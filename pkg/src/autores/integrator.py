"""Adaptive explicit Runge-Kutta integration with dense output and events.

The scheme is the Dormand-Prince 5(4) pair (FSAL, local extrapolation) with
the usual fourth-order continuous extension, see Hairer, Norsett & Wanner,
*Solving ODEs I*, II.5-6.  Everything is deterministic: the same inputs give
bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BudgetError, DomainError, SingularityError

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th and embedded 4th order weights
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                          22 / 525, -1 / 40)
# dense output
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 10.0
MAX_SINGULAR_RETRIES = 40


@dataclass(frozen=True)
class Event:
    """Scalar event g(t, y); a zero is recorded when g changes sign.

    ``direction`` = +1 (or -1) only records upward (downward) crossings.
    A terminal event stops the integration at the located root.
    """

    fn: Callable[[float, np.ndarray], float]
    terminal: bool = True
    direction: int = 0
    name: str = ""


@dataclass
class IntegrationConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 2_000_000
    first_step: float | None = None
    events: Sequence[Event] = ()

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        if not self.max_step > 0:
            raise DomainError("max_step must be positive")


@dataclass
class Trajectory:
    """Accepted step endpoints plus the per-step continuous extension.

    ``status`` is ``"completed"``, ``"event"`` or ``"singular"``; on the latter
    two ``message`` says why the run stopped early.
    """

    t: np.ndarray
    y: np.ndarray
    dense: np.ndarray  # (n_steps, 5, dim) continuous-extension coefficients
    step: np.ndarray  # signed full length of each step (the last may be cut short by an event)
    status: str = "completed"
    message: str = ""
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    rel_tol: float = 0.0
    abs_tol: float = 0.0
    events: dict = field(default_factory=dict)
    order: int = 4

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    @property
    def truncated(self) -> bool:
        return self.status != "completed"

    def __call__(self, t):
        return interpolate(self, t)


def _rms_norm(e, sc):
    return math.sqrt(float(np.mean((e / sc) ** 2)))


def _initial_step(f, t0, y0, f0, direction, rtol, atol, max_step):
    sc = atol + rtol * np.abs(y0)
    d0 = _rms_norm(y0, sc)
    d1 = _rms_norm(f0, sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + direction * h0 * f0
    f1 = f(t0 + direction * h0, y1)
    d2 = _rms_norm(f1 - f0, sc) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def integrate(rhs: Callable[[float, np.ndarray], np.ndarray], t0: float, y0, t1: float,
              cfg: IntegrationConfig | None = None) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    A :class:`SingularityError` raised by ``rhs`` on an accepted-step boundary
    (after repeated step halving) ends the run with ``status="singular"`` and
    keeps everything computed so far.
    """
    cfg = cfg or IntegrationConfig()
    y0 = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise DomainError("initial state must be finite")
    if t1 == t0:
        raise DomainError("empty integration interval")
    direction = 1.0 if t1 > t0 else -1.0
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    max_step = cfg.max_step
    dim = y0.size

    ts = [float(t0)]
    ys = [y0.copy()]
    dense: list[np.ndarray] = []
    steps: list[float] = []
    status, message = "completed", ""
    n_acc = n_rej = 0
    n_rhs = 1

    try:
        k1 = np.asarray(rhs(t0, y0), dtype=float)
    except SingularityError as exc:
        return Trajectory(np.array(ts), np.array(ys), np.zeros((0, 5, dim)), np.zeros(0),
                          "singular", str(exc), rel_tol=rtol, abs_tol=atol)

    h = cfg.first_step or _initial_step(rhs, t0, y0, k1, direction, rtol, atol, max_step)
    n_rhs += 1
    t, y = float(t0), y0
    events = list(cfg.events)
    ev_found: dict = {ev.name or str(i): [] for i, ev in enumerate(events)}
    g_prev = [float(ev.fn(t, y)) for ev in events]
    singular_retries = 0

    while direction * (t1 - t) > 0:
        if n_acc + n_rej >= cfg.max_steps:
            raise BudgetError(f"max_steps={cfg.max_steps} exceeded at t={t}")
        h = min(h, max_step)
        if direction * (t + direction * h - t1) > 0:
            h = abs(t1 - t)
        hs = direction * h
        try:
            k2 = rhs(t + C2 * hs, y + hs * (A21 * k1))
            k3 = rhs(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
            k4 = rhs(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = rhs(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = rhs(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
            t_new = t1 if h == abs(t1 - t) else t + hs
            k7 = rhs(t_new, y_new)
        except SingularityError as exc:
            n_rhs += 7
            singular_retries += 1
            if singular_retries > MAX_SINGULAR_RETRIES or h < 1e-14 * max(1.0, abs(t)):
                status, message = "singular", str(exc)
                break
            h *= 0.5
            n_rej += 1
            continue
        n_rhs += 6
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms_norm(err_vec, sc)
        if not math.isfinite(err):
            err = 1e10
        if err > 1.0:
            n_rej += 1
            h *= max(FAC_MIN, SAFETY * err ** -0.2)
            continue
        singular_retries = 0
        dy = y_new - y
        bspl = hs * k1 - dy
        rc = np.empty((5, dim))
        rc[0] = y
        rc[1] = dy
        rc[2] = bspl
        rc[3] = dy - hs * k7 - bspl
        rc[4] = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)

        stop_at = None
        if events:
            for i, ev in enumerate(events):
                g_new = float(ev.fn(t_new, y_new))
                g_old = g_prev[i]
                crossed = (g_old < 0 <= g_new) or (g_old > 0 >= g_new)
                if crossed and g_old != 0:
                    up = g_new > g_old
                    if ev.direction == 0 or (ev.direction > 0) == up:
                        def gi(tt, ev=ev, rc=rc, t=t, hs=hs):
                            return float(ev.fn(tt, _eval_step(rc, (tt - t) / hs)))
                        lo, hi = (t, t_new) if t < t_new else (t_new, t)
                        if gi(lo) == 0.0:
                            root = lo
                        elif gi(hi) == 0.0:
                            root = hi
                        else:
                            root = brentq(gi, lo, hi, xtol=1e-14 * max(1.0, abs(t)), rtol=1e-15, maxiter=200)
                        ev_found[ev.name or str(i)].append(root)
                        if ev.terminal and (stop_at is None or direction * (root - stop_at) < 0):
                            stop_at = root
                g_prev[i] = g_new

        dense.append(rc)
        steps.append(hs)
        n_acc += 1
        if stop_at is not None:
            y_stop = _eval_step(rc, (stop_at - t) / hs)
            ts.append(float(stop_at))
            ys.append(y_stop)
            status, message = "event", "terminal event"
            # drop event roots beyond the terminal one
            for key in ev_found:
                ev_found[key] = [r for r in ev_found[key] if direction * (r - stop_at) <= 0]
            break
        t, y, k1 = t_new, y_new, k7
        ts.append(t)
        ys.append(y)
        fac = SAFETY * err ** -0.2 if err > 0 else FAC_MAX
        h *= min(FAC_MAX, max(FAC_MIN, fac))

    return Trajectory(np.array(ts), np.array(ys), np.array(dense).reshape(-1, 5, dim),
                      np.array(steps), status, message, n_acc, n_rej, n_rhs, rtol, atol, ev_found)


def _eval_step(rc, theta):
    th1 = 1.0 - theta
    return rc[0] + theta * (rc[1] + th1 * (rc[2] + theta * (rc[3] + th1 * rc[4])))


def interpolate(traj: Trajectory, t):
    """Dense-output value at ``t`` (scalar or array); exact at stored sample times."""
    ts = traj.t
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    forward = ts[-1] >= ts[0]
    lo, hi = (ts[0], ts[-1]) if forward else (ts[-1], ts[0])
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    if np.any(tt < lo - tol) or np.any(tt > hi + tol):
        raise DomainError(f"t outside trajectory span [{lo}, {hi}]")
    if len(ts) == 1:
        out = np.repeat(traj.y[:1], tt.size, axis=0)
        return out[0] if scalar else out
    key = ts if forward else -ts
    tk = tt if forward else -tt
    idx = np.searchsorted(key, tk, side="right") - 1
    idx = np.clip(idx, 0, len(ts) - 2)
    h = traj.step[idx]
    theta = (tt - ts[idx]) / h
    rc = traj.dense[idx]
    th = theta[:, None]
    th1 = 1.0 - th
    out = rc[:, 0] + th * (rc[:, 1] + th1 * (rc[:, 2] + th * (rc[:, 3] + th1 * rc[:, 4])))
    # exact hits on stored samples
    exact_left = tt == ts[idx]
    exact_right = tt == ts[idx + 1]
    if np.any(exact_left):
        out[exact_left] = traj.y[idx[exact_left]]
    if np.any(exact_right):
        out[exact_right] = traj.y[idx[exact_right] + 1]
    return out[0] if scalar else out
