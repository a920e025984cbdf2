"""Power-series particular solutions of the amplitude/phase model.

Two constructions of the same expansion

    rho*(tau) = rho_{-1} tau^{1/2} + rho_0 + sum_k rho_k tau^{-k/2},
    psi*(tau) = psi_0 + sum_k psi_k tau^{-k/2}

are provided:

* :func:`compute_coeffs` -- the closed-form recursion through k = 3;
* :func:`extended_series` -- a numerical order-by-order solve in
  ``x = tau^{-1/2}`` to any order, using truncated power-series arithmetic.
  It shares no formulas with the closed-form route and is used both as an
  oracle for it and as a more accurate reference trajectory.

Both return objects with ``state(tau)`` / ``rate(tau)`` so either can serve as
the reference solution of a scaled frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibria import DEGENERACY_TOL, PhaseParams, p_eval
from .errors import DomainError, PreconditionError
from .model import ModelParams, model_rhs


def _check(p: ModelParams, psi0: float, degeneracy_tol: float):
    if p.lam <= 0:
        raise PreconditionError("series construction needs lam > 0 (rho_{-1} = sqrt(lam))")
    pp = PhaseParams(p.delta, p.nu)
    if abs(float(p_eval(psi0, pp, 0))) > 1e-8:
        raise PreconditionError(f"psi0={psi0} is not a root of P for delta={p.delta}, nu={p.nu}")
    d1 = float(p_eval(psi0, pp, 1))
    if abs(d1) <= degeneracy_tol:
        raise PreconditionError(
            f"P'(psi0)={d1:.3g}: (delta, nu)=({p.delta}, {p.nu}) is at a bifurcation, "
            "the coefficient chain is not solvable")
    return pp, d1


@dataclass(frozen=True)
class SeriesCoeffs:
    psi0: float
    rho_m1: float
    rho0: float
    rho1: float
    rho2: float
    rho3: float
    psi1: float
    psi2: float
    psi3: float
    params: ModelParams
    mu0: float
    mu_series: tuple[float, ...]
    mu_index_as_printed: bool = True

    @property
    def rho(self) -> tuple[float, ...]:
        """rho_{-1}, rho_0, ..., rho_3."""
        return (self.rho_m1, self.rho0, self.rho1, self.rho2, self.rho3)

    @property
    def psi(self) -> tuple[float, ...]:
        return (self.psi0, self.psi1, self.psi2, self.psi3)

    def state(self, tau):
        return _eval_pair(self.rho, self.psi, tau)

    def rate(self, tau):
        return _rate_pair(self.rho, self.psi, tau)


def _eval_pair(rho_c, psi_c, tau):
    """rho = sum_j rho_c[j] tau^{(1-j)/2}, psi = sum_j psi_c[j] tau^{-j/2}."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("series needs tau > 0")
    x = tau ** -0.5
    rho = np.zeros_like(x)
    psi = np.zeros_like(x)
    for c in reversed(rho_c):
        rho = rho * x + c
    for c in reversed(psi_c):
        psi = psi * x + c
    rho = rho / x
    if rho.ndim == 0:
        return float(rho), float(psi)
    return rho, psi


def _rate_pair(rho_c, psi_c, tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise DomainError("series needs tau > 0")
    drho = np.zeros_like(tau)
    dpsi = np.zeros_like(tau)
    for j, c in enumerate(rho_c):
        e = (1 - j) / 2
        if c and e:
            drho = drho + c * e * tau ** (e - 1)
    for j, c in enumerate(psi_c):
        if c and j:
            dpsi = dpsi - c * (j / 2) * tau ** (-j / 2 - 1)
    if drho.ndim == 0:
        return float(drho), float(dpsi)
    return drho, dpsi


def compute_coeffs(p: ModelParams, psi0: float, mu_index_as_printed: bool = True,
                   degeneracy_tol: float = DEGENERACY_TOL) -> SeriesCoeffs:
    """Coefficients through k = 3 from the closed-form recursion.

    ``mu_index_as_printed`` selects which pump coefficient enters the second
    phase correction: ``mu_2`` (the tau^{-5/2} coefficient, as the recursion
    is usually written) or ``mu_1`` (tau^{-3/2}), which is what an
    order-by-order balance actually produces.  The two agree whenever the pump
    has no tau^{-3/2} and tau^{-5/2} terms.  The third phase correction always
    uses the leading coefficient ``mu_0`` and omits the ``mu_1`` cross term.
    """
    pp, d1 = _check(p, psi0, degeneracy_tol)
    lam, nu, delta = p.lam, p.nu, p.delta
    mu = p.mu.coefficients(3)
    mu0 = mu[0]
    d2 = float(p_eval(psi0, pp, 2))
    d3 = float(p_eval(psi0, pp, 3))
    s2 = math.sin(2 * psi0 + nu)
    c2 = math.cos(2 * psi0 + nu)
    rl = lam ** -0.5

    rho_m1 = math.sqrt(lam)
    rho0 = 0.0
    f1 = 0.0
    rho1 = f1 / (2 * rho_m1)
    g1 = -rho_m1 / 2
    psi1 = g1 / d1
    f2 = (delta * c2 - math.cos(psi0)) * rl
    rho2 = f2 / (2 * rho_m1)
    mu_g2 = mu[2] if mu_index_as_printed else mu[1]
    g2 = -d2 * psi1 ** 2 / 2 - mu_g2 * rho_m1 * s2
    psi2 = g2 / d1
    f3 = -psi1 * (2 * delta * s2 - math.sin(psi0)) * rl
    rho3 = f3 / (2 * rho_m1)
    g3 = -d2 * psi1 * psi2 - d3 * psi1 ** 3 / 6 - mu0 * rho2 * s2
    psi3 = g3 / d1
    return SeriesCoeffs(psi0, rho_m1, rho0, rho1, rho2, rho3, psi1, psi2, psi3,
                        p, mu0, tuple(mu), mu_index_as_printed)


def eval_series(c, tau):
    """(rho*, psi*) partial sums at tau (scalar or array)."""
    return c.state(tau)


def residual(c, tau, p: ModelParams | None = None):
    """Defects (r_rho, r_psi) = d/dtau(series) - model_rhs(series).

    ``p`` defaults to the parameters the series was built for.
    """
    p = p or c.params
    rho, psi = c.state(tau)
    drho, dpsi = c.rate(tau)
    if np.ndim(tau) == 0:
        f_rho, f_psi = model_rhs(p, float(tau), (rho, psi))
        return drho - f_rho, dpsi - f_psi
    out = np.array([model_rhs(p, float(t), (r, s)) for t, r, s in zip(np.ravel(tau), rho, psi)])
    return drho - out[:, 0], dpsi - out[:, 1]


# -- truncated power series in x = tau^{-1/2} ---------------------------------

def _mul(a, b):
    n = len(a)
    return np.convolve(a, b)[:n]


def _shift(a, k):
    """Multiply by x^k (k >= 0), truncating."""
    out = np.zeros_like(a)
    if k < len(a):
        out[k:] = a[:len(a) - k]
    return out


def _deriv(a):
    out = np.zeros_like(a)
    out[:-1] = a[1:] * np.arange(1, len(a))
    return out


def _sincos(u):
    n = len(u)
    s = np.zeros(n)
    c = np.zeros(n)
    s[0], c[0] = math.sin(u[0]), math.cos(u[0])
    ku = u * np.arange(n)
    for j in range(1, n):
        s[j] = np.dot(ku[1:j + 1], c[j - 1::-1][:j]) / j
        c[j] = -np.dot(ku[1:j + 1], s[j - 1::-1][:j]) / j
    return s, c


def _recip(a):
    n = len(a)
    r = np.zeros(n)
    r[0] = 1.0 / a[0]
    for j in range(1, n):
        r[j] = -np.dot(a[1:j + 1], r[j - 1::-1][:j]) / a[0]
    return r


@dataclass(frozen=True)
class ExtendedSeries:
    """Particular-solution expansion to arbitrary order, solved numerically.

    ``a[j]`` multiplies x^{j-1} in rho (so a[j] = rho_{j-1}) and ``b[j]``
    multiplies x^j in psi, with x = tau^{-1/2}.
    """

    psi0: float
    a: np.ndarray
    b: np.ndarray
    params: ModelParams
    order: int

    @property
    def rho(self) -> tuple[float, ...]:
        return tuple(self.a)

    @property
    def psi(self) -> tuple[float, ...]:
        return tuple(self.b)

    def state(self, tau):
        return _eval_pair(self.a, self.b, tau)

    def rate(self, tau):
        return _rate_pair(self.a, self.b, tau)

    def truncated(self, k: int) -> "ExtendedSeries":
        """Same expansion keeping rho_{-1}..rho_k and psi_0..psi_k."""
        return ExtendedSeries(self.psi0, self.a[:k + 2].copy(), self.b[:k + 1].copy(),
                              self.params, k)


def _defect_series(p: ModelParams, a, b, m):
    """Series of (E_rho, x^2 E_psi) for rho = a/x, psi = b, mu = x m."""
    lam, nu = p.lam, p.nu
    x1a = _shift(a, 1)
    s2, c2 = _sincos(2.0 * b + np.r_[nu, np.zeros(len(b) - 1)])
    s1, c1 = _sincos(b)
    e_rho = 0.5 * x1a - 0.5 * _shift(_deriv(a), 2) + _mul(_mul(m, a), s2) - s1
    a2 = _mul(a, a)
    a2[0] -= lam
    e_psi = (-0.5 * _shift(_deriv(b), 5) - a2 + _shift(_mul(m, c2), 3)
             - _shift(_mul(c1, _recip(a)), 3))
    return e_rho, e_psi


def extended_series(p: ModelParams, psi0: float, order: int = 12,
                    degeneracy_tol: float = DEGENERACY_TOL) -> ExtendedSeries:
    """Solve the order-by-order balance through rho_order and psi_order."""
    _pp, d1 = _check(p, psi0, degeneracy_tol)
    n = order + 2  # a has rho_{-1}..rho_order
    a = np.zeros(n)
    b = np.zeros(n)
    m = np.zeros(n)
    for k, mk in enumerate(p.mu.coefficients(n)):
        if 2 * k < n:
            m[2 * k] = mk
    a[0] = math.sqrt(p.lam)
    b[0] = psi0
    for j in range(1, n):
        a[j] = 0.0
        _, e_psi = _defect_series(p, a, b, m)
        a[j] = e_psi[j] / (2.0 * a[0])
        if j <= order:
            b[j] = 0.0
            e_rho, _ = _defect_series(p, a, b, m)
            b[j] = -e_rho[j] / d1
    return ExtendedSeries(psi0, a, b[:order + 1], p, order)


def defect_orders(c, tol: float = 1e-12, extra: int = 8) -> tuple[float, float]:
    """Leading tau-exponents of the residual (r_rho, r_psi) of a truncated expansion.

    Computed from the defect power series, so a vanishing "first omitted"
    coefficient is skipped rather than assumed nonzero.
    """
    p = c.params
    n = len(c.rho) + extra
    a = np.zeros(n)
    b = np.zeros(n)
    a[:len(c.rho)] = c.rho
    b[:len(c.psi)] = c.psi
    m = np.zeros(n)
    for k, mk in enumerate(p.mu.coefficients(n)):
        if 2 * k < n:
            m[2 * k] = mk
    e_rho, e_psi = _defect_series(p, a, b, m)
    # e_rho ~ x^j = tau^{-j/2}; x^2 e_psi ~ x^j means r_psi ~ tau^{-(j-2)/2}
    j_rho = next(j for j in range(n) if abs(e_rho[j]) > tol)
    j_psi = next(j for j in range(n) if abs(e_psi[j]) > tol)
    return -j_rho / 2, -(j_psi - 2) / 2
