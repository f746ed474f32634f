import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from newsvendor_poa.demand_models import HalfNormalDemand, UniformDemand, gfr, lfr
from newsvendor_poa.errors import NonDifferentiablePoint
from newsvendor_poa.generalized_model import (
    NewsvendorModel,
    PiecewiseLogModel,
    TanhModel,
    as_generalized,
    gen_gfr,
    gen_lfr,
)
from newsvendor_poa.numerics import finite_difference_taylor


def test_tanh_rates_closed_form():
    assert gen_gfr(TanhModel(), 1.0) == pytest.approx(2 * math.tanh(1.0), rel=1e-12)
    assert gen_gfr(TanhModel(), 1.0) == pytest.approx(1.52318, abs=1e-5)
    assert gen_lfr(TanhModel(), 1.0) == pytest.approx(2 * math.sinh(1.0) ** 2, rel=1e-12)
    assert gen_lfr(TanhModel(), 1.0) == pytest.approx(2.76220, abs=1e-5)


def test_newsvendor_wrapper_agrees_with_demand_rates():
    m = NewsvendorModel(UniformDemand(1.0))
    assert gen_gfr(m, 0.25) == pytest.approx(1 / 3, rel=1e-12)
    assert gen_gfr(m, 0.25) == pytest.approx(gfr(UniformDemand(1.0), 0.25), rel=1e-12)
    assert gen_lfr(m, 0.5) == pytest.approx(1.5, rel=1e-12)
    hn = NewsvendorModel(HalfNormalDemand(1.0))
    for q in (0.2, 1.0, 2.0):
        assert gen_lfr(hn, q) == pytest.approx(lfr(HalfNormalDemand(1.0), q), rel=1e-10)


@pytest.mark.parametrize("model", [TanhModel(), NewsvendorModel(UniformDemand(1.0)), PiecewiseLogModel()])
def test_rates_vanish_at_zero(model):
    assert gen_gfr(model, 0.0) == 0.0 and gen_lfr(model, 0.0) == 0.0


@pytest.mark.parametrize("model,q", [
    (TanhModel(), 0.7),
    (NewsvendorModel(HalfNormalDemand(1.0)), 0.9),
    (PiecewiseLogModel(), 0.4),
])
def test_marginal_jet_matches_finite_differences(model, q):
    jet = model.marginal_jet(q, 3)
    fd = finite_difference_taylor(lambda t: float(model.marginal(t)), q, 3)
    assert jet == pytest.approx(fd, rel=1e-3, abs=1e-6)
    # the marginal is the derivative of the order function
    h = 1e-6
    slope = (float(model.order_fn(q + h)) - float(model.order_fn(q - h))) / (2 * h)
    assert jet[0] == pytest.approx(slope, rel=1e-8)


def test_piecewise_kink_behaviour():
    m = PiecewiseLogModel(knee=1.0, tail_slope=0.1)
    assert m.kinks == (1.0,)
    assert m.marginal_limits(1.0) == (0.5, 0.1)
    assert m.inverse_marginal(0.3) == 1.0
    assert m.inverse_marginal(0.8) == pytest.approx(0.25)
    with pytest.raises(NonDifferentiablePoint):
        m.marginal_derivative(1.0)
    with pytest.raises(NonDifferentiablePoint):
        gen_gfr(m, 1.0)
    with pytest.raises(NonDifferentiablePoint):
        m.marginal_jet(1.0, 2)


def test_as_generalized_passthrough():
    t = TanhModel()
    assert as_generalized(t) is t
    assert isinstance(as_generalized(UniformDemand(1.0)), NewsvendorModel)


MODELS = [TanhModel(), NewsvendorModel(HalfNormalDemand(1.0)), PiecewiseLogModel()]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2), st.floats(0.0, 4.0), st.floats(0.0, 4.0), st.floats(0.0, 1.0))
def test_order_function_concave(i, a, b, lam):
    m = MODELS[i]
    left = lam * float(m.order_fn(a)) + (1 - lam) * float(m.order_fn(b))
    assert left <= float(m.order_fn(lam * a + (1 - lam) * b)) + 1e-12


@pytest.mark.parametrize("model", [TanhModel(), NewsvendorModel(HalfNormalDemand(1.0))])
def test_inverse_marginal_roundtrip(model):
    for y in np.linspace(0.05, 0.95, 10):
        assert float(model.marginal(model.inverse_marginal(y))) == pytest.approx(y, rel=1e-10)
