import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qgtlab.errors import BadData, IllConditionedFit, OutOfDomain, UndefinedExponent
from qgtlab.scaling import (
    QUASI_FREE_INPUT,
    XI_LAMBDA_2,
    K_of_lambda,
    ScalingInput,
    delta_Q,
    extract_slope,
    fit_fss,
    predicted_critical_fss,
    predicted_offcritical,
    xxz_input,
)

SIZES = np.arange(8, 21, 2)
dims = st.floats(-5, 5, allow_nan=False)


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------


def test_delta_q_table():
    assert delta_Q(ScalingInput(2, 2, zeta=1, d=1)) == 1
    assert delta_Q(ScalingInput(1, 1, zeta=1, d=1)) == -1
    assert delta_Q(ScalingInput(1.5, 1.5, zeta=1, d=1)) == 0
    assert delta_Q(ScalingInput(1.7, zeta=1.3, d=2)) == pytest.approx(1.7 + 1.7 - 2.6 - 2)


@settings(max_examples=50)
@given(a=dims, b=dims, c=dims, zeta=st.floats(0.1, 3), d=st.integers(1, 3))
def test_delta_q_symmetric_and_linear(a, b, c, zeta, d):
    assert delta_Q(ScalingInput(a, b, zeta, d)) == delta_Q(ScalingInput(b, a, zeta, d))
    lhs = delta_Q(ScalingInput(a + c, b, zeta, d)) - delta_Q(ScalingInput(a, b, zeta, d))
    assert lhs == pytest.approx(c, abs=1e-12)


def test_offcritical_predictions():
    p = predicted_offcritical(QUASI_FREE_INPUT)
    assert p.exponent == -1 and p.divergent
    p = predicted_offcritical(ScalingInput(2, zeta=1, d=1, delta_lambda=1))
    assert p.exponent == 1 and not p.divergent
    p = predicted_offcritical(ScalingInput(1.5, zeta=1, d=1, delta_lambda=0.7), lam=1.2, lam_c=1.0)
    assert p.exponent == 0 and not p.divergent and p.value == 1.0
    with pytest.raises(UndefinedExponent):
        predicted_offcritical(ScalingInput(2, delta_lambda=0))
    with pytest.raises(UndefinedExponent):
        predicted_offcritical(ScalingInput(2))


def test_critical_fss_predictions():
    p = predicted_critical_fss(xxz_input(0.5))
    assert p.classification == "sub-extensive" and p.delta_Q == 1 and p.q_exponent == -1
    assert not p.superextensive_condition
    p = predicted_critical_fss(QUASI_FREE_INPUT)
    assert p.classification == "super-extensive" and p.q_exponent == 1 and p.Q_exponent == 2
    assert p.superextensive_condition
    p = predicted_critical_fss(ScalingInput(1.5, zeta=1, d=1))
    assert p.classification == "extensive" and not p.superextensive_condition


@settings(max_examples=80)
@given(dv=dims, zeta=st.floats(0.1, 3), d=st.integers(1, 3))
def test_classification_matches_condition(dv, zeta, d):
    assume(abs(d + 2 * zeta - 2 * dv) > 1e-9)
    p = predicted_critical_fss(ScalingInput(dv, zeta=zeta, d=d))
    assert (p.classification == "super-extensive") == (d + 2 * zeta - 2 * dv > 0)
    assert p.superextensive_condition == (d + 2 * zeta - 2 * dv > 0)


def test_invalid_inputs():
    with pytest.raises(OutOfDomain):
        ScalingInput(1.0, zeta=0.0)
    with pytest.raises(OutOfDomain):
        ScalingInput(1.0, d=0)
    with pytest.raises(OutOfDomain):
        ScalingInput(math.inf)


def test_luttinger_parameter_values():
    assert K_of_lambda(0.0) == pytest.approx(1.0, abs=1e-15)
    assert 4 * K_of_lambda(1.0) == pytest.approx(2.0, abs=1e-15)
    assert 4 * K_of_lambda(0.5) == pytest.approx(3.0, abs=1e-14)
    assert K_of_lambda(-1 + 1e-12) > 1e4
    for bad in (-1.0, 1.0000001, 2.0, -3.0):
        with pytest.raises(OutOfDomain):
            K_of_lambda(bad)


@settings(max_examples=80)
@given(a=st.floats(-0.999, 1.0), b=st.floats(-0.999, 1.0))
def test_luttinger_parameter_decreasing(a, b):
    assume(a < b - 1e-9)
    assert K_of_lambda(a) > K_of_lambda(b)


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


def test_gapless_exact_recovery():
    fit = fit_fss(np.column_stack([SIZES, 2 + 3 / SIZES]))
    assert abs(fit.coefficient("A1") - 2) <= 1e-12 and abs(fit.coefficient("A2") - 3) <= 1e-12
    assert fit.r2 == pytest.approx(1.0) and math.isnan(fit.coefficient("A3"))


def test_massive_exact_recovery():
    L = np.arange(8, 25, 2)
    q = 1 + 0.5 * np.exp(-L / XI_LAMBDA_2) / np.sqrt(L)
    fit = fit_fss(np.column_stack([L, q]), model="massive", fixed={"xi": XI_LAMBDA_2})
    assert abs(fit.coefficient("A1") - 1) <= 1e-10 and abs(fit.coefficient("A2") - 0.5) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(
    model=st.sampled_from(["gapless", "gapless-with-irrelevant", "logarithmic", "massive"]),
    coefs=st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    lam=st.floats(-0.8, 0.8),
)
def test_exact_recovery_all_models(model, coefs, lam):
    L = np.arange(8, 25, 2).astype(float)
    fixed = {"delta_v2": 4 * K_of_lambda(lam), "xi": XI_LAMBDA_2}
    cols = {
        "gapless": [np.ones_like(L), 1 / L],
        "gapless-with-irrelevant": [np.ones_like(L), 1 / L, L ** (3 - 2 * fixed["delta_v2"])],
        "logarithmic": [np.ones_like(L), 1 / L, 1 / (L * np.log(L))],
        "massive": [np.ones_like(L), np.exp(-L / XI_LAMBDA_2) / np.sqrt(L)],
    }[model]
    c = np.array(coefs[: len(cols)])
    q = np.column_stack(cols) @ c
    fit = fit_fss(np.column_stack([L, q]), model=model, fixed=fixed)
    # a coefficient matters in proportion to the size of its column
    weight = np.linalg.norm(np.column_stack(cols), axis=0) / np.linalg.norm(cols[0])
    assert np.all(np.abs(fit.coefficients - c) * weight <= 1e-10 * max(1.0, np.abs(c).max()))
    assert np.max(np.abs(fit.predict(L) - q)) <= 1e-10


def test_min_l_filter_and_order():
    L = np.array([20, 8, 14, 16, 18, 10, 12])
    fit = fit_fss(np.column_stack([L, 1 + 1.0 / L]), min_L=14)
    assert list(fit.L) == [14, 16, 18, 20]


def test_fit_errors():
    L = np.array([8.0, 10.0, 12.0])
    with pytest.raises(BadData):
        fit_fss(np.column_stack([L[:2], [1, 2]]))
    with pytest.raises(BadData):
        fit_fss(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(IllConditionedFit) as info:
        # Delta_V2 = 1.5 makes the third column identically one
        fit_fss(np.column_stack([np.arange(8, 17, 2), np.ones(5)]),
                model="gapless-with-irrelevant", fixed={"delta_v2": 1.5})
    assert info.value.condition_number > 1e12
    with pytest.raises(ValueError):
        fit_fss(np.column_stack([SIZES, 1 / SIZES]), model="massive")
    with pytest.raises(ValueError):
        fit_fss(np.column_stack([SIZES, 1 / SIZES]), model="cubic")


def test_r2_in_unit_interval():
    rng = np.random.default_rng(1)
    fit = fit_fss(np.column_stack([SIZES, 0.1 + rng.normal(size=len(SIZES))]))
    assert 0.0 <= fit.r2 <= 1.0


# ---------------------------------------------------------------------------
# slopes
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("power", [1.0, 2.0])
def test_slope_exact_power_law(power):
    L = np.arange(8, 19, 2.0)
    fit = extract_slope(np.column_stack([L, 0.3 * L**power]))
    assert fit.slope == pytest.approx(power, abs=1e-12)
    assert fit.stderr <= 1e-12


@settings(max_examples=40)
@given(shift=st.floats(-20, 20), power=st.floats(-3, 3))
def test_slope_invariant_under_rescaling(shift, power):
    L = np.arange(8, 19, 2.0)
    Q = np.exp(0.05 * np.sin(L)) * L**power
    a = extract_slope(np.column_stack([L, Q]))
    b = extract_slope(np.column_stack([L, Q * math.exp(shift)]))
    assert b.slope == pytest.approx(a.slope, abs=1e-10)
    assert b.intercept - a.intercept == pytest.approx(shift, abs=1e-9)


def test_slope_errors():
    with pytest.raises(BadData):
        extract_slope([(8, 1.0), (10, -1.0), (12, 2.0)])
    with pytest.raises(BadData):
        extract_slope([(8, 1.0), (10, 2.0)])
