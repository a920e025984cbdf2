import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from autores.errors import DomainError, SingularityError
from autores.model import (ClosedFormMu, DuffingParams, ModelParams, ModelState, SeriesMu,
                           demo_es_exact, demo_es_jacobian, demo_es_rhs, duffing_rhs, eval_mu,
                           model_field, model_rhs)

CHIRP = dict(eps=1e-2, alpha=0.25e-4, beta=1.0, gamma=1 / 6, nu=0.0)


def test_eval_mu_examples():
    assert eval_mu(SeriesMu((0.0,)), 7.0) == 0.0
    assert eval_mu(ClosedFormMu(0.5, 4.0), 2.0) == pytest.approx(1 / 6, abs=1e-15)
    tau = 1e6
    assert math.sqrt(tau) * eval_mu(ClosedFormMu(0.5, 4.0), tau) == pytest.approx(0.25, abs=1e-6)


def test_eval_mu_rejects_nonpositive_tau():
    with pytest.raises(DomainError):
        eval_mu(SeriesMu((1.0,)), 0.0)
    with pytest.raises(DomainError):
        eval_mu(ClosedFormMu(1.0, 1.0), -1.0)


def test_mu_spec_validation():
    with pytest.raises(DomainError):
        ClosedFormMu(1.0, 0.0)
    with pytest.raises(DomainError):
        SeriesMu(())
    with pytest.raises(DomainError):
        SeriesMu((1.0, float("nan")))


def test_closed_form_mu0_and_expansion():
    mu = ClosedFormMu(0.5, 4.0)
    assert mu.mu0 == 0.25
    c = mu.coefficients(4)
    # c (b tau)^{-1/2} (1 + 1/(b tau))^{-1/2} = mu0 tau^{-1/2} (1 - 1/(2 b tau) + 3/(8 b^2 tau^2) ...)
    assert c == pytest.approx([0.25, -0.25 / 8, 0.25 * 3 / 128, -0.25 * 5 / 1024])
    tau = 400.0
    approx = sum(ck * tau ** (-(2 * k + 1) / 2) for k, ck in enumerate(c))
    assert approx == pytest.approx(mu(tau), rel=1e-11)


def test_series_mu_partial_sum_and_derivative():
    mu = SeriesMu((1.0, 2.0))
    assert mu(4.0) == pytest.approx(0.5 + 2.0 / 8.0)
    h = 1e-6
    assert mu.derivative(3.0) == pytest.approx((mu(3 + h) - mu(3 - h)) / (2 * h), rel=1e-7)


def test_model_params_invariants():
    with pytest.raises(DomainError):
        ModelParams(0.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, nu=math.pi)
    with pytest.raises(DomainError):
        ModelParams(1.0, nu=-0.1)
    p = ModelParams.from_delta(0.7, 0.3, lam=4.0)
    assert p.mu0 == pytest.approx(0.35)
    assert p.delta == pytest.approx(0.7)


def test_model_rhs_examples():
    p = ModelParams(1.0)
    assert model_rhs(p, 1.0, ModelState(1.0, 0.0)) == pytest.approx((0.0, 1.0))
    assert model_rhs(p, 1.0, (1.0, math.pi)) == pytest.approx((0.0, -1.0), abs=1e-15)
    q = ModelParams(2.0, 0.0, SeriesMu((0.8, 0.1)))
    assert model_rhs(q, 3.7, (2.3, 0.0))[0] == 0.0


def test_model_rhs_singularity():
    p = ModelParams(1.0)
    with pytest.raises(SingularityError):
        model_rhs(p, 1.0, (1e-9, 0.0))
    with pytest.raises(SingularityError):
        model_field(p)(1.0, np.array([0.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(tau=st.floats(0.1, 1e4), rho=st.floats(0.01, 100), psi=st.floats(-20, 20),
       nu=st.floats(0, 3.1), m=st.floats(-2, 2), lam=st.floats(0.1, 10))
def test_model_rhs_periodic_and_field_agrees(tau, rho, psi, nu, m, lam):
    p = ModelParams(lam, nu, SeriesMu((m,)))
    a = model_rhs(p, tau, (rho, psi))
    b = model_rhs(p, tau, (rho, psi + 2 * math.pi))
    scale = 1 + abs(rho) ** 2 + lam * tau
    assert abs(a[0] - b[0]) < 1e-12 * scale
    assert abs(a[1] - b[1]) < 1e-12 * scale
    assert tuple(model_field(p)(tau, np.array([rho, psi]))) == pytest.approx(a, rel=1e-15, abs=1e-12)


def test_duffing_params_validation():
    DuffingParams(**CHIRP)
    for bad in (dict(eps=0.2), dict(alpha=0.02), dict(gamma=0.0), dict(eps=0.0)):
        with pytest.raises(DomainError):
            DuffingParams(**{**CHIRP, **bad})


def test_duffing_rhs_examples():
    p = DuffingParams(**{**CHIRP, "nu": math.pi / 2})
    assert duffing_rhs(p, 0.0, (0.0, 0.0)) == pytest.approx((0.0, 1e-2))
    q = DuffingParams(**CHIRP)
    assert duffing_rhs(q, 5.0, (0.3, -0.2), eps=0.0) == pytest.approx((-0.2, -0.3))
    assert duffing_rhs(q, 0.0, (0.0, 1.0)) == pytest.approx((1.0, 1e-2))
    with pytest.raises(DomainError):
        duffing_rhs(q, -200.0, (0.0, 0.0))


def test_demo_es_examples():
    assert demo_es_exact(0.0, 1.0, 4.0) == pytest.approx((0.0, 0.5))
    a, b = demo_es_exact(1.0, 1.0, 16.0)
    assert a == pytest.approx(math.exp(8) / 16, rel=1e-14)
    assert a == pytest.approx(186.31, abs=0.01)
    assert b == 0.25
    with pytest.raises(DomainError):
        demo_es_rhs(0.0, (1.0, 1.0))


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1.0, 100.0), a0=st.floats(-2, 2), b0=st.floats(-1, 1))
def test_demo_es_rhs_matches_exact_derivative(t, a0, b0):
    a, b = demo_es_exact(a0, b0, t)
    da, db = demo_es_rhs(t, (a, b))
    # analytic derivative of the closed form
    da_ex = a * (-1.0 / t + b0 * t ** -0.75)
    db_ex = -0.5 * b0 * t ** -1.5
    assert da == pytest.approx(da_ex, rel=1e-10, abs=1e-300)
    assert db == pytest.approx(db_ex, rel=1e-10, abs=1e-300)


def test_demo_es_linearization_negative():
    for t in np.geomspace(1, 1e4, 30):
        ev = np.linalg.eigvals(demo_es_jacobian(t))
        assert np.all(ev.real < 0)
        assert sorted(ev.real) == pytest.approx([(-3 - 1) / (4 * t), (-3 + 1) / (4 * t)])
