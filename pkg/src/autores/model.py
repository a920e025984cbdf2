"""Right-hand sides of the three dynamical systems and the pump-amplitude law.

* the slow amplitude/phase model in (rho, psi) driven by a chirp of rate
  ``lam`` and a parametric pump ``mu(tau)``;
* Duffing's oscillator with small combined parametric and external chirped
  forcing (the physical system the model is reduced from);
* a two-dimensional non-autonomous toy system whose linearization has
  negative eigenvalues although its origin is unstable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import binom

from .errors import DomainError, SingularityError

RHO_MIN = 1e-8


@dataclass(frozen=True)
class ClosedFormMu:
    """``mu(tau) = c * (1 + b*tau)**(-1/2)``."""

    c: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.b)):
            raise DomainError("closed-form mu needs finite c and b")
        if self.b <= 0:
            raise DomainError(f"closed-form mu needs b > 0, got {self.b}")

    @property
    def mu0(self) -> float:
        return self.c / math.sqrt(self.b)

    def __call__(self, tau):
        return self.c * (1.0 + self.b * tau) ** -0.5

    def derivative(self, tau: float) -> float:
        return -0.5 * self.b * self.c * (1.0 + self.b * tau) ** -1.5

    def coefficients(self, n: int) -> list[float]:
        """First ``n`` coefficients of the large-tau expansion in tau^{-(2k+1)/2}."""
        return [self.mu0 * binom(-0.5, k) * self.b ** (-k) for k in range(n)]


@dataclass(frozen=True)
class SeriesMu:
    """``mu(tau) = sum_k coeffs[k] * tau**(-(2k+1)/2)`` (finite partial sum)."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) == 0:
            raise DomainError("series mu needs at least the leading coefficient")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise DomainError("series mu coefficients must be finite")

    @property
    def mu0(self) -> float:
        return self.coeffs[0]

    def __call__(self, tau: float) -> float:
        s = 0.0
        for k, c in enumerate(self.coeffs):
            if c:
                s += c * tau ** (-(2 * k + 1) / 2)
        return s

    def derivative(self, tau: float) -> float:
        s = 0.0
        for k, c in enumerate(self.coeffs):
            if c:
                s -= c * (2 * k + 1) / 2 * tau ** (-(2 * k + 3) / 2)
        return s

    def coefficients(self, n: int) -> list[float]:
        out = list(self.coeffs[:n])
        return out + [0.0] * (n - len(out))


MuSpec = Union[ClosedFormMu, SeriesMu]


def eval_mu(mu: MuSpec, tau: float) -> float:
    if not tau > 0:
        raise DomainError(f"mu(tau) needs tau > 0, got {tau}")
    return mu(tau)


@dataclass(frozen=True)
class ModelParams:
    """Chirp rate ``lam``, phase offset ``nu`` and pump law ``mu``."""

    lam: float
    nu: float = 0.0
    mu: MuSpec = field(default_factory=SeriesMu)
    rho_min: float = RHO_MIN

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam == 0:
            raise DomainError(f"chirp rate must be finite and nonzero, got {self.lam}")
        if not (0.0 <= self.nu < math.pi):
            raise DomainError(f"nu must lie in [0, pi), got {self.nu}")

    @classmethod
    def from_delta(cls, delta: float, nu: float = 0.0, lam: float = 1.0, **kw) -> "ModelParams":
        """Parameters whose pump is the pure leading term giving the requested delta."""
        if lam <= 0:
            raise DomainError("delta is defined only for lam > 0")
        return cls(lam=lam, nu=nu, mu=SeriesMu((delta / math.sqrt(lam),)), **kw)

    @property
    def mu0(self) -> float:
        return self.mu.mu0

    @property
    def delta(self) -> float:
        """Combined-excitation parameter ``mu0 * sqrt(lam)``."""
        if self.lam <= 0:
            raise DomainError("delta is defined only for lam > 0")
        return self.mu.mu0 * math.sqrt(self.lam)


@dataclass(frozen=True)
class ModelState:
    rho: float
    psi: float


def model_rhs(p: ModelParams, tau: float, s: ModelState | Sequence[float]) -> tuple[float, float]:
    """(d rho/d tau, d psi/d tau) of the amplitude/phase model."""
    rho, psi = (s.rho, s.psi) if isinstance(s, ModelState) else s
    if not rho > p.rho_min:
        raise SingularityError(f"rho={rho!r} at or below floor {p.rho_min}")
    m = p.mu(tau)
    a = 2.0 * psi + p.nu
    drho = math.sin(psi) - m * rho * math.sin(a)
    dpsi = rho * rho - p.lam * tau - m * math.cos(a) + math.cos(psi) / rho
    return drho, dpsi


def model_field(p: ModelParams) -> Callable[[float, np.ndarray], np.ndarray]:
    """``model_rhs`` in the (t, y) -> dy signature the integrator expects."""
    lam, nu, mu, rmin = p.lam, p.nu, p.mu, p.rho_min
    sin, cos = math.sin, math.cos

    def f(tau, y):
        rho = y[0]
        psi = y[1]
        if not rho > rmin:
            raise SingularityError(f"rho={rho!r} at or below floor {rmin}")
        m = mu(tau)
        a = 2.0 * psi + nu
        return np.array((sin(psi) - m * rho * sin(a),
                         rho * rho - lam * tau - m * cos(a) + cos(psi) / rho))

    return f


@dataclass(frozen=True)
class DuffingParams:
    eps: float
    alpha: float
    beta: float
    gamma: float
    nu: float = 0.0

    def __post_init__(self):
        if not 0 < self.eps < 0.1:
            raise DomainError(f"eps must satisfy 0 < eps < 0.1, got {self.eps}")
        if not 0 < self.alpha < 0.01:
            raise DomainError(f"alpha must satisfy 0 < alpha < 0.01, got {self.alpha}")
        if not self.gamma > 0:
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not math.isfinite(self.beta):
            raise DomainError("beta must be finite")

    def phase(self, t):
        """Drive phase phi(t) = t - alpha t^2 (array-friendly)."""
        return t - self.alpha * t * t


def duffing_rhs(p: DuffingParams, t: float, uv: Sequence[float], eps: float | None = None) -> tuple[float, float]:
    """Duffing right-hand side; ``eps`` overrides ``p.eps`` (e.g. eps=0 for the free oscillator)."""
    u, v = uv
    e = p.eps if eps is None else eps
    g = 1.0 + e * t
    if g <= 0:
        raise DomainError(f"1 + eps*t must be positive, got {g}")
    phi = t - p.alpha * t * t
    forcing = math.cos(phi)
    pump = p.beta * math.cos(2.0 * phi + p.nu) / math.sqrt(g)
    return v, e * forcing - (1.0 + e * pump) * (u - p.gamma * e * u ** 3)


def duffing_field(p: DuffingParams, eps: float | None = None):
    e = p.eps if eps is None else eps
    alpha, beta, gamma, nu = p.alpha, p.beta, p.gamma, p.nu
    cos, sqrt = math.cos, math.sqrt

    def f(t, y):
        u = y[0]
        g = 1.0 + e * t
        if g <= 0:
            raise DomainError(f"1 + eps*t must be positive, got {g}")
        phi = t - alpha * t * t
        pump = beta * cos(2.0 * phi + nu) / sqrt(g)
        return np.array((y[1], e * cos(phi) - (1.0 + e * pump) * (u - gamma * e * u * u * u)))

    return f


def demo_es_rhs(t: float, ab: Sequence[float]) -> np.ndarray:
    """da/dt = a b t^{-1/4} - a/t,  db/dt = -b/(2t)."""
    if not t > 0:
        raise DomainError(f"toy system needs t > 0, got {t}")
    a, b = ab[0], ab[1]
    return np.array((a * b * t ** -0.25 - a / t, -0.5 * b / t))


def demo_es_exact(a0: float, b0: float, t: float) -> tuple[float, float]:
    if not t > 0:
        raise DomainError(f"toy system needs t > 0, got {t}")
    return a0 / t * math.exp(4.0 * b0 * t ** 0.25), b0 / math.sqrt(t)


def demo_es_jacobian(t: float, a: float = 0.0, b: float = 0.0) -> np.ndarray:
    """Jacobian of the toy system; at the origin it is diag(-1/t, -1/(2t))."""
    if not t > 0:
        raise DomainError(f"toy system needs t > 0, got {t}")
    return np.array([[b * t ** -0.25 - 1.0 / t, a * t ** -0.25],
                     [0.0, -0.5 / t]])
