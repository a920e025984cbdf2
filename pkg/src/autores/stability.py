"""Stability of particular autoresonant solutions.

Linearization about the series solution, the scaled frame (R, Psi, eta) in
which the captured dynamics is near-Hamiltonian, the Lyapunov function built
on its Hamiltonian, and the frozen (eta -> infinity) Hamiltonian whose closed
orbits fix the oscillation frequency law.

Frame conventions::

    rho = rho*(tau) + omega0 tau^{-1/4} R,   psi = psi*(tau) + Psi,
    eta = (4/5) tau^{5/4},   omega0 = sqrt(P'(psi0)) (4 lam)^{-1/4}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import compute_coeffs, extended_series
from .equilibria import PhaseParams, classify, int_p, p_eval
from .errors import DomainError, PreconditionError
from .integrator import Event, IntegrationConfig, Trajectory, integrate, interpolate
from .model import ModelParams, model_field

KAPPA = 0.8
SIGMA = 0.5


def eta_of_tau(tau):
    return KAPPA * np.asarray(tau, dtype=float) ** 1.25


def tau_of_eta(eta):
    return (np.asarray(eta, dtype=float) / KAPPA) ** 0.8


def make_reference(p: ModelParams, psi0: float, kind: str = "extended", order: int = 12):
    """Particular-solution expansion used as the frame origin.

    ``"k3"`` is the closed-form k <= 3 truncation; ``"extended"`` is the
    numerically solved expansion through ``order``.  The k <= 3 defect
    (O(tau^{-3/2}) in the phase equation) is large enough to swamp the
    O(d^2 / eta) Lyapunov decrease, so decay checks use the extended one.
    """
    if kind == "k3":
        return compute_coeffs(p, psi0)
    if kind == "extended":
        return extended_series(p, psi0, order)
    raise DomainError(f"unknown reference kind {kind!r}")


@dataclass(frozen=True)
class ScaledFrame:
    params: ModelParams
    psi0: float
    p_prime: float
    reference: object
    allow_unstable: bool = False

    @classmethod
    def build(cls, p: ModelParams, psi0: float, reference: str | object = "extended",
              order: int = 12, allow_unstable: bool = False) -> "ScaledFrame":
        """Frame about the particular solution through ``psi0``.

        The frame proper needs P'(psi0) > 0; ``allow_unstable`` uses |P'| so
        that the same scaled distance can measure departure from a saddle.
        """
        d1 = float(p_eval(psi0, PhaseParams(p.delta, p.nu), 1))
        if d1 <= 0 and not allow_unstable:
            raise PreconditionError(f"scaled frame needs P'(psi0) > 0, got {d1:.6g}")
        ref = make_reference(p, psi0, reference, order) if isinstance(reference, str) else reference
        return cls(p, psi0, d1, ref, allow_unstable)

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def omega0(self) -> float:
        return math.sqrt(abs(self.p_prime)) * (4.0 * self.lam) ** -0.25

    varkappa = KAPPA

    @property
    def phase_params(self) -> PhaseParams:
        return PhaseParams(self.params.delta, self.params.nu)

    @property
    def linear_frequency(self) -> float:
        """2 omega0 lam^{1/2}: angular frequency of small oscillations in eta."""
        return 2.0 * self.omega0 * math.sqrt(self.lam)


@dataclass(frozen=True)
class ScaledPoint:
    R: float
    Psi: float
    eta: float

    @property
    def d(self) -> float:
        return math.hypot(self.R, self.Psi)


def to_scaled(f: ScaledFrame, tau, rho, psi):
    """(R, Psi, eta) for states (rho, psi) at tau; arrays broadcast."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("scaled frame needs tau > 0")
    rs, ps = f.reference.state(tau)
    R = (np.asarray(rho) - rs) * tau ** 0.25 / f.omega0
    Psi = np.asarray(psi) - ps
    eta = eta_of_tau(tau)
    if np.ndim(R) == 0:
        return ScaledPoint(float(R), float(Psi), float(eta))
    return R, Psi, eta


def from_scaled(f: ScaledFrame, R, Psi, eta):
    """(tau, rho, psi) from scaled coordinates."""
    tau = tau_of_eta(eta)
    rs, ps = f.reference.state(tau)
    rho = rs + f.omega0 * tau ** -0.25 * np.asarray(R)
    psi = ps + np.asarray(Psi)
    if np.ndim(rho) == 0:
        return float(tau), float(rho), float(psi)
    return tau, rho, psi


# -- linearization -----------------------------------------------------------

def linearization_matrix(p: ModelParams, c, tau: float) -> np.ndarray:
    """Jacobian of the model about the series solution ``c`` at tau."""
    rho, psi = c.state(tau)
    m = p.mu(tau)
    a = 2.0 * psi + p.nu
    return np.array([
        [-m * math.sin(a), math.cos(psi) - 2.0 * rho * m * math.cos(a)],
        [2.0 * rho - math.cos(psi) / rho ** 2, 2.0 * m * math.sin(a) - math.sin(psi) / rho],
    ])


def eigenvalues(A) -> tuple[complex, complex]:
    """z_{+/-} = x +/- sqrt(y), x = tr/2, y = tr^2/4 - det (complex when y < 0)."""
    A = np.asarray(A, dtype=float)
    x = 0.5 * (A[0, 0] + A[1, 1])
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    y = x * x - det
    if y >= 0:
        r = math.sqrt(y)
        return complex(x + r), complex(x - r)
    r = math.sqrt(-y)
    return complex(x, r), complex(x, -r)


def trace_det(A) -> tuple[float, float]:
    """(x, y) of the characteristic roots z = x +/- sqrt(y)."""
    A = np.asarray(A, dtype=float)
    x = 0.5 * (A[0, 0] + A[1, 1])
    return x, x * x - (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0])


# -- Hamiltonians and the Lyapunov function -----------------------------------

def hamiltonian_H0(f: ScaledFrame, R, Psi):
    return (f.omega0 * math.sqrt(f.lam) * np.asarray(R) ** 2
            + int_p(f.psi0, f.phase_params, Psi) / f.omega0)


def hamiltonian_H(f: ScaledFrame, R, Psi, eta):
    """Full eta-dependent Hamiltonian of the scaled system.

    The pump term is written so that (R, Psi) = (0, 0) is a critical point,
    i.e. with ``+ 2 Psi sin(2 psi* + nu)`` inside the bracket.
    """
    R = np.asarray(R, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    tau = tau_of_eta(eta)
    rs, ps = f.reference.state(tau)
    m = f.params.mu(tau)
    nu = f.params.nu
    w0 = f.omega0
    k = KAPPA
    a0 = 2.0 * ps + nu
    a1 = a0 + 2.0 * Psi
    return (w0 * k ** 0.4 * eta ** -0.4 * rs * R ** 2
            + (np.cos(ps + Psi) - np.cos(ps) + Psi * np.sin(ps)) / w0
            + w0 ** 2 * k ** 0.6 * eta ** -0.6 * R ** 3 / 3.0
            - R * Psi / (5.0 * eta)
            - m * rs / (2.0 * w0) * (np.cos(a1) - np.cos(a0) + 2.0 * Psi * np.sin(a0))
            - k ** 0.2 * m * eta ** -0.2 * (np.cos(a1) - np.cos(a0)) * R / 2.0)


def lyapunov_V(f: ScaledFrame, R, Psi, eta):
    """V = (H + v1 eta^{-3/5} + v2 eta^{-1}) / (omega0 lam^{1/2})."""
    R = np.asarray(R, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    w0 = f.omega0
    sl = math.sqrt(f.lam)
    v1 = KAPPA ** 0.6 * R * (2.0 * w0 ** 2 * R ** 2 / 3.0 + int_p(f.psi0, f.phase_params, Psi) / sl)
    v2 = -R * Psi / 10.0
    return (hamiltonian_H(f, R, Psi, eta) + v1 * eta ** -0.6 + v2 / eta) / (w0 * sl)


def dV_along(f: ScaledFrame, traj: Trajectory, etas, step_fraction: float = 1e-3):
    """Centered finite differences of V along ``traj`` at the given eta values.

    The difference step is ``step_fraction`` of the small-oscillation period in
    eta (constant, 2 pi / (2 omega0 lam^{1/2})).  Returns a dict of arrays
    eta, R, Psi, d, V, dVdeta.
    """
    etas = np.asarray(etas, dtype=float)
    h = step_fraction * 2.0 * math.pi / f.linear_frequency

    def v_at(e):
        tau = tau_of_eta(e)
        y = interpolate(traj, tau)
        R, Psi, _ = to_scaled(f, tau, y[:, 0], y[:, 1])
        return R, Psi, lyapunov_V(f, R, Psi, e)

    R, Psi, V = v_at(etas)
    _, _, vp = v_at(etas + h)
    _, _, vm = v_at(etas - h)
    return {"eta": etas, "R": R, "Psi": Psi, "d": np.hypot(R, Psi), "V": V,
            "dVdeta": (vp - vm) / (2.0 * h)}


def scaled_track(f: ScaledFrame, traj: Trajectory, per_step: int = 4):
    """(tau, R, Psi, eta, d) on the step grid refined ``per_step`` times."""
    t = traj.t
    if len(t) > 1:
        frac = np.arange(per_step) / per_step
        tt = (t[:-1, None] + np.diff(t)[:, None] * frac[None, :]).ravel()
        tt = np.r_[tt, t[-1]]
    else:
        tt = t
    y = interpolate(traj, tt)
    R, Psi, eta = to_scaled(f, tt, y[:, 0], y[:, 1])
    return tt, R, Psi, eta, np.hypot(R, Psi)


def tight_config(rel_tol: float = 1e-11, abs_tol: float = 1e-13,
                 max_steps: int = 5_000_000) -> IntegrationConfig:
    return IntegrationConfig(rel_tol=rel_tol, abs_tol=abs_tol, max_steps=max_steps)


def integrate_from_scaled(f: ScaledFrame, R0: float, Psi0: float, tau0: float, tau1: float,
                          cfg: IntegrationConfig | None = None) -> Trajectory:
    """Integrate the model from the state whose scaled coordinates at tau0 are (R0, Psi0)."""
    _, rho0, psi0 = from_scaled(f, R0, Psi0, float(eta_of_tau(tau0)))
    return integrate(model_field(f.params), tau0, [rho0, psi0], tau1, cfg or tight_config())


def lyapunov_check(f: ScaledFrame, d0: float = 0.02, eta0: float = 1e3, eta1: float = 1e4,
                   angle: float = math.pi / 4, n_samples: int = 20000,
                   step_fraction: float = 1e-3, cfg: IntegrationConfig | None = None) -> dict:
    """Sample V and dV/deta along the trajectory started at scaled distance d0, eta0."""
    tau0, tau1 = float(tau_of_eta(eta0)), float(tau_of_eta(eta1))
    traj = integrate_from_scaled(f, d0 * math.cos(angle), d0 * math.sin(angle), tau0, tau1, cfg)
    if traj.truncated:
        raise PreconditionError(f"trajectory stopped early: {traj.message}")
    h = step_fraction * 2.0 * math.pi / f.linear_frequency
    etas = np.linspace(eta0 + 2 * h, float(eta_of_tau(traj.t1)) - 2 * h, n_samples)
    table = dV_along(f, traj, etas, step_fraction)
    table["traj"] = traj
    return table


def lyapunov_summary(table: dict, sigma: float = SIGMA) -> dict:
    d2 = table["d"] ** 2
    V = table["V"]
    return {
        "frac_V_positive": float(np.mean(V > 0)),
        "frac_decreasing": float(np.mean(table["dVdeta"] < 0)),
        "frac_sandwich": float(np.mean(((1 - sigma) * d2 <= V) & (V <= (1 + sigma) * d2))),
        "frac_decay_bound": float(np.mean(table["dVdeta"] <= -(1 - sigma) * d2 / (5 * table["eta"]))),
        "min_V_over_d2": float(np.min(V / d2)),
        "max_V_over_d2": float(np.max(V / d2)),
    }


# -- frozen Hamiltonian --------------------------------------------------------

def _frozen_field(f: ScaledFrame):
    a2 = 2.0 * f.omega0 * math.sqrt(f.lam)
    w0 = f.omega0
    pp = f.phase_params
    psi0 = f.psi0

    def rhs(eta, y):
        return np.array((-float(p_eval(psi0 + y[1], pp, 0)) / w0, a2 * y[0]))

    return rhs


def frozen_orbit(f: ScaledFrame, h: float, max_periods: float = 50.0, rel_tol: float = 1e-12,
                 abs_tol: float = 1e-14) -> Trajectory:
    """One closed orbit of the frozen Hamiltonian system from (R, Psi) = (sqrt(h/(omega0 lam^{1/2})), 0)."""
    if not h > 0:
        raise DomainError(f"energy level must be positive, got {h}")
    R0 = math.sqrt(h / (f.omega0 * math.sqrt(f.lam)))
    t_lin = 2.0 * math.pi / f.linear_frequency
    ev = Event(lambda eta, y: y[1], terminal=True, direction=1, name="return")
    cfg = IntegrationConfig(rel_tol=rel_tol, abs_tol=abs_tol, events=[ev], max_steps=2_000_000)
    traj = integrate(_frozen_field(f), 0.0, [R0, 0.0], max_periods * t_lin, cfg)
    if traj.status != "event":
        raise DomainError(f"h={h} is not on a closed orbit (no return within {max_periods} linear periods)")
    return traj


def frozen_frequency(f: ScaledFrame, h: float, **kw) -> float:
    """2 pi / T(h), T the first-return time of the frozen flow."""
    return 2.0 * math.pi / frozen_orbit(f, h, **kw).t1


def omega_formula(f: ScaledFrame, h: float) -> float:
    """Small-h frequency law 2 omega0 lam^{1/2} + h P'''(psi0) / (16 omega0^2 lam^{1/2}).

    Exact to O(h) only when P''(psi0) = 0; a nonzero P'' adds a cubic-term
    contribution the law does not contain.
    """
    d3 = float(p_eval(f.psi0, f.phase_params, 3))
    sl = math.sqrt(f.lam)
    return 2.0 * f.omega0 * sl + h * d3 / (16.0 * f.omega0 ** 2 * sl)


def closed_orbit_bound(f: ScaledFrame, h_hi: float | None = None, iters: int = 40,
                       max_periods: float = 50.0) -> float:
    """Bisection estimate of h0, the upper end of the closed-orbit family."""
    lo = 0.0
    hi = h_hi or 4.0 * (1.0 + 2.0 * abs(f.params.delta)) / f.omega0
    def closed(h):
        try:
            frozen_orbit(f, h, max_periods=max_periods, rel_tol=1e-9, abs_tol=1e-12)
            return True
        except DomainError:
            return False
    while closed(hi):
        lo, hi = hi, 2 * hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if closed(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- perturbation witnesses -----------------------------------------------------

def reference_error(f: ScaledFrame, tau: float) -> float:
    """Scaled distance at tau between the reference and its half-order truncation.

    The expansion is only asymptotic, with coefficients growing roughly like
    P'(psi0)^{-2k}; near a fold it is meaningless at moderate tau.  Returns 0
    for references that cannot be truncated.
    """
    ref = f.reference
    if not hasattr(ref, "truncated"):
        return 0.0
    rs, ps = ref.truncated(max(ref.order // 2, 1)).state(float(tau))
    pt = to_scaled(f, float(tau), rs, ps)
    return pt.d if math.isfinite(pt.d) else math.inf


def perturbation_test(p: ModelParams, psi0: float, d0: float = 1e-3, tau0: float = 100.0,
                      horizon: float = 4.0, angle: float = math.pi / 4,
                      reference: str = "extended", cfg: IntegrationConfig | None = None) -> dict:
    """Perturb the particular solution by scaled distance d0 at tau0 and track d up to horizon*tau0.

    ``verdict`` is "stable" if max d < 2 d0, "unstable" if max d >= 10 d0,
    otherwise "ambiguous"; ``algebraic`` is the classification by sign P'.
    Refuses (PreconditionError) when the reference is not resolved to 0.1 d0
    at tau0, see ``reference_error``.
    """
    f = ScaledFrame.build(p, psi0, reference, allow_unstable=True)
    err = reference_error(f, tau0)
    if not err <= 0.1 * d0:
        raise PreconditionError(f"reference expansion unresolved at tau0={tau0:g}: "
                                f"truncation gap {err:.3g} > 0.1 d0")
    cfg = cfg or tight_config(rel_tol=1e-10, abs_tol=1e-12)
    traj = integrate_from_scaled(f, d0 * math.cos(angle), d0 * math.sin(angle), tau0,
                                 horizon * tau0, cfg)
    _, _, _, _, d = scaled_track(f, traj)
    ratio = float(np.max(d) / d0)
    verdict = "stable" if ratio < 2.0 else ("unstable" if ratio >= 10.0 else "ambiguous")
    return {"psi0": psi0, "p_prime": f.p_prime, "algebraic": classify(f.p_prime).value,
            "max_ratio": ratio, "final_ratio": float(d[-1] / d0), "verdict": verdict,
            "status": traj.status, "tau_end": traj.t1}


def decay_exponent(f: ScaledFrame, d0: float = 0.02, eta0: float = 1e3, eta1: float = 1e5,
                   angle: float = math.pi / 4, cfg: IntegrationConfig | None = None,
                   n_bins: int = 40) -> dict:
    """Fit d ~ eta^q over [eta0, eta1] using the per-bin maxima of d (one bin per log step)."""
    tau0, tau1 = float(tau_of_eta(eta0)), float(tau_of_eta(eta1))
    cfg = cfg or tight_config(rel_tol=1e-10, abs_tol=1e-12)
    traj = integrate_from_scaled(f, d0 * math.cos(angle), d0 * math.sin(angle), tau0, tau1, cfg)
    _, _, _, eta, d = scaled_track(f, traj)
    edges = np.geomspace(eta0, float(eta[-1]), n_bins + 1)
    mids, amps = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (eta >= lo) & (eta < hi)
        if np.any(sel):
            mids.append(math.sqrt(lo * hi))
            amps.append(float(np.max(d[sel])))
    slope = float(np.polyfit(np.log(mids), np.log(amps), 1)[0])
    return {"exponent": slope, "eta": np.array(mids), "d": np.array(amps), "traj": traj}
