import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wolbachia_stefan.errors import DomainError, ValidationError
from wolbachia_stefan.expr import Expression
from wolbachia_stefan.model import (BirthRateField, InitialData, InitialProfile, ModelParams,
                                    ci_birth, critical_d1_star, critical_h0_star,
                                    critical_length_Lstar, derive_bounds, load_model_config)

pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)


def params(**kw):
    base = dict(d1=1.0, d2=1.0, delta1=1.0, delta2=1.0, mu=1.0, h0=1.0, b1=1.0, b2=1.0)
    base.update(kw)
    return ModelParams(**base)


def amp(a):
    return InitialData(u0=InitialProfile("cosine", amplitude=a))


# -- derive_bounds ---------------------------------------------------------

def test_bounds_rate_dominates():
    assert derive_bounds(params(b1=1.0), amp(0.5)).M1 == 1.0


def test_bounds_initial_data_dominates():
    init = InitialData(v0=InitialProfile("constant", value=3.0))
    assert derive_bounds(params(b2=2.0), init).M2 == 3.0


def test_bounds_scaled_rate():
    assert derive_bounds(params(b1=2.0, delta1=4.0), amp(0.1)).M1 == pytest.approx(0.5)


def test_bounds_leave_lambda_unset():
    assert derive_bounds(params(), InitialData()).Lambda is None


@given(a=pos, extra=pos)
def test_bounds_monotone_in_u0(a, extra):
    p = params(b1=2.0)
    assert derive_bounds(p, amp(a + extra)).M1 >= derive_bounds(p, amp(a)).M1


# -- closed forms ------------------------------------------------------------

@pytest.mark.parametrize("d1,delta1,gap,expected", [
    (1.0, 1.0, 1.0, math.pi / 2),
    (4.0, 1.0, 1.0, math.pi),
    (1.0, 2.0, 0.5, math.pi / 2),
])
def test_h0_star_examples(d1, delta1, gap, expected):
    # kappa2 = 1, kappa1 = 1 + gap
    p = params(d1=d1, delta1=delta1, b1=delta1 * (1.0 + gap), b2=1.0)
    assert critical_h0_star(p) == pytest.approx(expected, rel=1e-12)


def test_h0_star_fitness_cost():
    with pytest.raises(DomainError, match="fitness-cost"):
        critical_h0_star(params(b1=1.0, b2=2.0))


def test_d1_star_closed_form():
    p = params(b1=2.0, b2=1.0, h0=math.pi / 2)
    assert critical_d1_star(p) == pytest.approx(1.0)


@pytest.mark.parametrize("d,b,expected", [(1, 1, math.pi / 2), (1, 4, math.pi / 4)])
def test_lstar_examples(d, b, expected):
    assert critical_length_Lstar(d, b) == pytest.approx(expected)


@given(d=pos, b=pos)
def test_lstar_scaling(d, b):
    assert critical_length_Lstar(4 * d, b) == pytest.approx(2 * critical_length_Lstar(d, b))


def test_lstar_rejects_nonpositive():
    with pytest.raises(ValidationError):
        critical_length_Lstar(0.0, 1.0)


@given(d1=pos, delta1=pos, gap=pos, scale=st.floats(1.01, 5.0))
def test_h0_star_monotone(d1, delta1, gap, scale):
    p = params(d1=d1, delta1=delta1, b1=delta1 * (1 + gap), b2=1.0)
    bigger_d = p.replace(d1=d1 * scale)
    bigger_gap = p.replace(b1=delta1 * (1 + gap * scale))
    assert critical_h0_star(bigger_d) > critical_h0_star(p)
    assert critical_h0_star(bigger_gap) < critical_h0_star(p)


# -- fields ------------------------------------------------------------------

def test_tabulated_interpolation_and_extrapolation():
    b = BirthRateField.tabulated([(0, 1), (1, 3), (2, 2)])
    assert b(0.5) == pytest.approx(2.0)
    assert b(10.0) == pytest.approx(2.0)
    assert b.sup() == 3.0 and b.inf() == 1.0


@pytest.mark.parametrize("samples", [[(0, 1)], [(0, 1), (0, 2)], [(0, 1), (1, -1)]])
def test_tabulated_rejects(samples):
    with pytest.raises(ValidationError):
        BirthRateField.tabulated(samples)


def test_expression_negative_rejected():
    with pytest.raises(ValidationError):
        BirthRateField.from_expression("sin(x)")


@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 10)), min_size=2, max_size=8,
                unique_by=lambda p: p[0]),
       st.floats(0, 100))
def test_field_values_within_reported_sup(samples, x):
    b = BirthRateField.tabulated(sorted(samples))
    val = b(x)
    assert 0.0 <= val <= b.sup() + 1e-12


@given(c=st.floats(0.1, 3.0), a=st.floats(0.0, 0.9))
@settings(max_examples=25)
def test_expression_field_sup(c, a):
    b = BirthRateField.from_expression(f"{c}*(1 + {a}*sin(x))", xmax=20)
    xs = np.linspace(0, 20, 501)
    vals = b(xs)
    assert np.all(vals >= 0) and np.all(vals <= b.sup() + 1e-9)


def test_params_validation_names_field():
    with pytest.raises(ValidationError) as exc:
        params(delta1=0.0)
    assert exc.value.field == "delta1"


def test_kappa_undefined_for_heterogeneous():
    p = params(b1=BirthRateField.tabulated([(0, 1), (1, 2)]))
    with pytest.raises(DomainError):
        _ = p.kappa1


# -- initial data -------------------------------------------------------------

def test_cosine_profile_satisfies_compatibility():
    init = InitialData()
    p = params(h0=2.0)
    init.validate(p)
    assert init.u0(2.0, 2.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("expr", ["1 - x", "1 + x - x*x/2 - x/2"])
def test_initial_data_rejects_bad_u0(expr):
    init = InitialData(u0=InitialProfile("expression", expression=expr))
    with pytest.raises(ValidationError):
        init.validate(params(h0=2.0))


def test_initial_data_default_v0_is_carrying_capacity():
    p = params(b2=3.0, delta2=2.0)
    assert InitialData().v0_for(p)(5.0) == pytest.approx(1.5)


# -- config envelope ------------------------------------------------------------

def test_load_config_roundtrip():
    data = {"params": {"d1": 1, "d2": 2, "delta1": 1, "delta2": 1, "mu": 3, "h0": 1},
            "b1": {"kind": "expression", "expression": "1 + 0.5*sin(x)"},
            "b2": 1.5, "init": {"u0": {"kind": "cosine", "amplitude": 0.5}}}
    p, init = load_model_config(data)
    assert p.d2 == 2.0 and p.b2.value == 1.5 and init.u0.amplitude == 0.5
    p2, init2 = load_model_config({**p.to_dict(), "init": init.to_dict()})
    assert p2 == p and init2 == init


def test_load_config_rejects_unknown():
    with pytest.raises(ValidationError):
        load_model_config({"params": {"d1": 1, "d2": 1, "delta1": 1, "delta2": 1, "mu": 1,
                                      "h0": 1, "gamma": 2}})


def test_ci_birth_degenerate():
    out = ci_birth(2.0, np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]), 1e-12)
    assert out.tolist() == [0.0, 2.0, 1.0]


def test_expression_grammar():
    assert Expression("max(1, x) + min(x, 2)*exp(0)")(3.0) == pytest.approx(5.0)
    for bad in ["x**2", "y", "abs(x)", "__import__('os')", "sin(x, 1)", ""]:
        with pytest.raises(ValidationError):
            Expression(bad)
