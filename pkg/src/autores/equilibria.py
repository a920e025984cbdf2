"""Algebra of the phase equation P(psi; delta, nu) = delta sin(2 psi + nu) - sin(psi).

Roots of P are the limiting phases psi0 of the particular autoresonant
solutions; the sign of P'(psi0) decides their stability.  The bifurcation
function ``ell`` vanishes exactly where a root is double.

Region naming follows the parameter-plane partition: ``OmegaPlus`` is
``ell > 0`` and ``OmegaMinus`` is ``ell < 0``.  Measured root counts are 4 on
OmegaPlus and 2 on OmegaMinus (e.g. nu = 0, |delta| > 1/2 gives ell > 0 and
four roots).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

TWO_PI = 2.0 * math.pi
ROOT_TOL = 1e-12
DEDUP_TOL = 1e-8
DEGENERACY_TOL = 1e-6
ELL_TOL = 1e-10
N_PANELS = 1440


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


class Region(str, enum.Enum):
    OMEGA_MINUS = "OmegaMinus"
    OMEGA_PLUS = "OmegaPlus"
    GAMMA_MINUS = "GammaMinus"
    GAMMA_PLUS = "GammaPlus"


@dataclass(frozen=True)
class PhaseParams:
    delta: float
    nu: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise DomainError("delta must be finite")
        if not 0.0 <= self.nu < math.pi:
            raise DomainError(f"nu must lie in [0, pi), got {self.nu}")

    @classmethod
    def from_model(cls, p) -> "PhaseParams":
        return cls(p.delta, p.nu)


@dataclass(frozen=True)
class EquilibriumPoint:
    psi0: float
    p_prime: float
    p_double_prime: float
    p_triple_prime: float
    stability: Stability

    @property
    def stable(self) -> bool:
        return self.stability is Stability.STABLE


def p_eval(psi, pp: PhaseParams, order: int = 0):
    """P or one of its first three psi-derivatives (numpy-broadcasting)."""
    d, nu = pp.delta, pp.nu
    a = 2.0 * np.asarray(psi) + nu
    if order == 0:
        return d * np.sin(a) - np.sin(psi)
    if order == 1:
        return 2.0 * d * np.cos(a) - np.cos(psi)
    if order == 2:
        return -4.0 * d * np.sin(a) + np.sin(psi)
    if order == 3:
        return -8.0 * d * np.cos(a) + np.cos(psi)
    raise DomainError(f"derivative order must be 0..3, got {order}")


def int_p(psi0: float, pp: PhaseParams, big_psi):
    """Closed form of the integral of P(psi0 + phi) over phi in [0, big_psi]."""
    d, nu = pp.delta, pp.nu
    x = np.asarray(big_psi)
    return (-0.5 * d * (np.cos(2.0 * psi0 + 2.0 * x + nu) - math.cos(2.0 * psi0 + nu))
            + np.cos(psi0 + x) - math.cos(psi0))


def classify(p_prime: float, tol: float = DEGENERACY_TOL) -> Stability:
    if p_prime > tol:
        return Stability.STABLE
    if p_prime < -tol:
        return Stability.UNSTABLE
    return Stability.DEGENERATE


def equilibrium_at(psi0: float, pp: PhaseParams, tol: float = DEGENERACY_TOL) -> EquilibriumPoint:
    d1 = float(p_eval(psi0, pp, 1))
    return EquilibriumPoint(psi0, d1, float(p_eval(psi0, pp, 2)), float(p_eval(psi0, pp, 3)),
                            classify(d1, tol))


def wrap(psi):
    """Map to [0, 2 pi)."""
    w = np.mod(psi, TWO_PI)
    return np.where(w >= TWO_PI, 0.0, w) if np.ndim(w) else (0.0 if w >= TWO_PI else float(w))


def circ_dist(a, b):
    d = np.abs(np.mod(np.asarray(a) - b + math.pi, TWO_PI) - math.pi)
    return d


def _polish(pp: PhaseParams, a: float, b: float) -> float:
    f = lambda x: float(p_eval(x, pp, 0))
    x = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # Newton polish; keep the bracketed value if Newton wanders off
    for _ in range(3):
        d1 = float(p_eval(x, pp, 1))
        if d1 == 0.0:
            break
        xn = x - f(x) / d1
        if not a <= xn <= b or abs(f(xn)) > abs(f(x)):
            break
        x = xn
    return x


def find_roots(pp: PhaseParams, n_panels: int = N_PANELS,
               degeneracy_tol: float = DEGENERACY_TOL) -> list[EquilibriumPoint]:
    """All roots of P(.; delta, nu) in [0, 2 pi), sorted, with derivative data.

    A uniform scan brackets sign changes; each bracket is solved with Brent's
    method and Newton-polished.  Near a double root (on Gamma) the scan may also
    pick up a tangency through a local |P| minimum, which is refined by
    minimising |P| and kept only if it is a genuine zero.
    """
    grid = np.linspace(0.0, TWO_PI, n_panels + 1)
    vals = p_eval(grid, pp, 0)
    # close the circle exactly: P(2 pi) in floating point can differ in sign from P(0)
    vals[-1] = vals[0]
    roots: list[float] = []
    for i in range(n_panels):
        a, b = grid[i], grid[i + 1]
        if i == n_panels - 1:
            a, b = a - TWO_PI, 0.0
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif np.sign(fa) != np.sign(fb) and fb != 0.0:
            # signs, not the product: fa * fb underflows for denormal values
            roots.append(_polish(pp, a, b))
    # tangential zeros: interior local minima of |P| that are near zero
    absv = np.abs(vals)
    for i in range(1, n_panels):
        if absv[i] <= absv[i - 1] and absv[i] <= absv[i + 1] and np.sign(vals[i - 1]) == np.sign(vals[i + 1]) != 0:
            lo, hi = grid[i - 1], grid[i + 1]
            x = _tangent_min(pp, lo, hi)
            if abs(float(p_eval(x, pp, 0))) < ROOT_TOL:
                roots.append(x)
    out: list[float] = []
    for r in sorted(float(wrap(r)) for r in roots):
        if not out or circ_dist(r, out[-1]) > DEDUP_TOL:
            out.append(r)
    if len(out) > 1 and circ_dist(out[0], out[-1]) <= DEDUP_TOL:
        out.pop()
    return [equilibrium_at(r, pp, degeneracy_tol) for r in out]


def _tangent_min(pp, lo, hi):
    # golden-section search on |P|
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    f = lambda x: abs(float(p_eval(x, pp, 0)))
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def ell(pp: PhaseParams) -> float:
    d = pp.delta
    return (4.0 * d * d - 1.0) ** 3 - 27.0 * d * d * math.sin(pp.nu) ** 2


def region(pp: PhaseParams, tol: float = ELL_TOL) -> Region:
    v = ell(pp)
    if abs(v) < tol:
        return Region.GAMMA_PLUS if pp.delta > 0 else Region.GAMMA_MINUS
    return Region.OMEGA_PLUS if v > 0 else Region.OMEGA_MINUS


def threshold_delta(nu: float, upper: float = 10.0) -> float:
    """Smallest delta > 0 on the bifurcation curve for this nu (the mirror value is its negative)."""
    if not 0.0 <= nu < math.pi:
        raise DomainError(f"nu must lie in [0, pi), got {nu}")
    s2 = math.sin(nu) ** 2
    if s2 == 0.0:
        return 0.5
    f = lambda d: (4.0 * d * d - 1.0) ** 3 - 27.0 * d * d * s2
    return brentq(f, 0.5, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- parameter-plane scan ---------------------------------------------------

SCAN_COLUMNS = (["delta", "nu", "ell", "region", "n_roots"]
                + [f"psi0_{i}" for i in range(1, 5)] + [f"stab_{i}" for i in range(1, 5)])


def scan_point(delta: float, nu: float) -> dict:
    pp = PhaseParams(delta, nu)
    roots = find_roots(pp)
    row = {"delta": delta, "nu": nu, "ell": ell(pp), "region": region(pp).value,
           "n_roots": len(roots)}
    for i in range(4):
        row[f"psi0_{i + 1}"] = roots[i].psi0 if i < len(roots) else None
        row[f"stab_{i + 1}"] = roots[i].stability.value if i < len(roots) else None
    return row


def _scan_chunk(points: Sequence[tuple[float, float]]) -> list[dict]:
    return [scan_point(d, n) for d, n in points]


def bifurcation_scan(deltas: Iterable[float], nus: Iterable[float], workers: int = 1) -> list[dict]:
    """Region and roots on the grid deltas x nus, row-major (delta outer)."""
    pts = [(float(d), float(n)) for d in deltas for n in nus]
    if workers <= 1 or len(pts) < 2:
        return _scan_chunk(pts)
    size = math.ceil(len(pts) / workers)
    chunks = [pts[i:i + size] for i in range(0, len(pts), size)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_scan_chunk, chunks))
    return [row for part in parts for row in part]
