import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghf import netlang as nl

from astgen import random_ast
from reference import reference_value, ulp_distance

RHO_EPS = nl.EvalContext(rho=nl.Eps())


def test_sum_of_powers_parses_left_to_right():
    assert nl.parse("rho^3 + rho^5") == nl.Add(nl.Pow(nl.Rho(), Fraction(3)), nl.Pow(nl.Rho(), Fraction(5)))


def test_unclassifiable_net_parses():
    e = nl.parse("eps^-1 * sin(eps^-1)")
    assert e == nl.Mul(nl.Pow(nl.Eps(), Fraction(-1)), nl.Func("sin", nl.Pow(nl.Eps(), Fraction(-1))))


def test_unbalanced_parenthesis_reports_column():
    with pytest.raises(nl.NetlangSyntaxError) as info:
        nl.parse("rho^(1/2")
    assert (info.value.line, info.value.column) == (1, 9)


def test_syntax_error_line_numbers():
    with pytest.raises(nl.NetlangSyntaxError) as info:
        nl.parse("rho +\n  * eps")
    assert info.value.line == 2 and info.value.column == 3


def test_unknown_identifier():
    with pytest.raises(nl.UnknownIdentifierError) as info:
        nl.parse("rho + tan(eps)")
    assert info.value.name == "tan"


@pytest.mark.parametrize("text", ["rho^eps", "rho^1.5", "rho^(1/eps)", "eps^(2.5)"])
def test_non_rational_exponent(text):
    with pytest.raises(nl.NonRationalExponentError):
        nl.parse(text)


def test_precedence():
    # ^ binds tighter than unary minus, which binds tighter than * and /
    assert nl.parse("-eps^2") == nl.Neg(nl.Pow(nl.Eps(), Fraction(2)))
    assert nl.parse("1 - eps - rho") == nl.Sub(nl.Sub(nl.Num(Fraction(1)), nl.Eps()), nl.Rho())
    assert nl.parse("eps / rho / 2") == nl.Div(nl.Div(nl.Eps(), nl.Rho()), nl.Num(Fraction(2)))
    assert nl.parse("eps + rho * 2") == nl.Add(nl.Eps(), nl.Mul(nl.Rho(), nl.Num(Fraction(2))))


def test_whitespace_insensitive():
    assert nl.parse("  rho ^ ( -1 / 2 )*eps") == nl.parse("rho^(-1/2) * eps")


def test_bare_params_and_param_form():
    assert nl.parse("z + param(h)", ("z",)) == nl.Add(nl.Param("z"), nl.Param("h"))


def test_rational_literal_and_division_stay_distinct():
    lit = nl.Num(Fraction(1, 3))
    quot = nl.Div(nl.Num(Fraction(1)), nl.Num(Fraction(3)))
    assert nl.parse(nl.to_text(lit)) == lit
    assert nl.parse(nl.to_text(quot)) == quot


def test_round_trip_random_corpus():
    rng = random.Random(11)
    for _ in range(2000):
        a = random_ast(rng)
        assert nl.parse(nl.to_text(a)) == a


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 6))
def test_round_trip_property(rng, d):
    a = random_ast(rng, d)
    assert nl.parse(nl.to_text(a)) == a
    assert nl.depth(a) <= d


def test_evaluate_examples():
    assert nl.evaluate(nl.parse("rho^-2"), 0.5, ctx=RHO_EPS) == 4
    v = nl.evaluate(nl.parse("exp(rho^-1)"), 0.01, ctx=RHO_EPS, form="log")
    assert v.logmag == pytest.approx(100.0, abs=1e-12)
    # e^100 still fits a double; e^1000 does not and switches to log form
    assert isinstance(nl.evaluate(nl.parse("exp(rho^-1)"), 0.01, ctx=RHO_EPS), complex)
    big = nl.evaluate(nl.parse("exp(rho^-1)"), 0.001, ctx=RHO_EPS)
    assert isinstance(big, nl.LogPolar) and big.logmag == pytest.approx(1000.0, abs=1e-9)


def test_log_form_for_underflow():
    v = nl.evaluate(nl.parse("exp(-rho^-2)"), 0.01, ctx=RHO_EPS)
    assert isinstance(v, nl.LogPolar) and v.logmag == pytest.approx(-1e4)


@pytest.mark.parametrize("text,fragment", [("log(eps - eps)", "log(eps - eps)"), ("1 / (rho - eps)", "rho - eps"),
                                          ("log(-1)", "log(-1)")])
def test_domain_errors_name_subexpression(text, fragment):
    with pytest.raises(nl.EvaluationDomainError) as info:
        nl.evaluate(nl.parse(text), 0.5, ctx=RHO_EPS)
    assert fragment in str(info.value)


def test_unbound_parameter():
    with pytest.raises(nl.EvaluationDomainError):
        nl.evaluate(nl.parse("z + 1", ("z",)), 0.5)


def test_evaluation_against_reference():
    rng = random.Random(3)
    rho = nl.parse("eps^2")
    ctx = nl.EvalContext(rho=rho, in_index=lambda name, e: name == "L")
    checked = 0
    for _ in range(400):
        a = random_ast(rng, 5)
        eps = 0.5 * 0.7 ** rng.randrange(24)
        b = {"z": complex(rng.uniform(-2, 2), rng.uniform(-2, 2)), "h": complex(rng.uniform(-1, 1), 0)}
        try:
            v = nl.evaluate(a, eps, b, ctx, form="auto")
        except nl.EvaluationDomainError:
            continue
        if isinstance(v, nl.LogPolar) or not (math.isfinite(v.real) and math.isfinite(v.imag)):
            continue
        ref = reference_value(a, eps, rho, b, lambda name: name == "L")
        assert ulp_distance(v, ref) <= 4, nl.to_text(a)
        checked += 1
    assert checked > 300


def test_compiled_matches_exact_evaluation():
    e = nl.parse("exp(-(z/rho)^2) * rho^-2 + sin(z) * log(z + 3)", ("z",))
    f = nl.compile_numpy(e, ("z",))
    z = np.array([0.1 + 0.2j, -0.3, 0.05j])
    got = f(0.3, 0.3, z)
    want = [nl.evaluate(e, 0.3, {"z": complex(w)}, RHO_EPS) for w in z]
    np.testing.assert_allclose(got, want, rtol=1e-13)


def test_compiled_broadcasts_constants():
    f = nl.compile_numpy(nl.parse("rho^2"), ("z",))
    out = f(0.5, 0.5, np.zeros(3))
    assert out.shape == (3,) and np.allclose(out, 0.25)


def test_diff_matches_reference_derivative():
    import sympy as sp

    e = nl.parse("exp(z^2) * sin(z) / (z + rho) + log(z)^(1/2)", ("z",))
    d = nl.diff(e, "z")
    zs = sp.Symbol("z")
    ref = sp.diff(sp.exp(zs**2) * sp.sin(zs) / (zs + sp.Rational(1, 4)) + sp.sqrt(sp.log(zs)), zs)
    for z in (0.7 + 0.2j, 1.3 - 0.4j):
        got = nl.evaluate(d, 0.25, {"z": z}, RHO_EPS)
        want = complex(ref.subs(zs, sp.Float(z.real, 40) + sp.I * sp.Float(z.imag, 40)).evalf(30))
        assert abs(got - want) <= 1e-14 * abs(want)


def test_diff_rejects_conj():
    with pytest.raises(nl.NotAnalyticError):
        nl.diff(nl.parse("conj(z)", ("z",)), "z")
    assert nl.diff(nl.parse("conj(rho) * z", ("z",)), "z") == nl.Func("conj", nl.Rho())


def test_is_analytic_in():
    assert nl.is_analytic_in(nl.parse("exp(z) + abs(rho)", ("z",)), "z")
    assert not nl.is_analytic_in(nl.parse("abs(z)", ("z",)), "z")


def test_substitute_and_replace_rho():
    e = nl.parse("z * rho", ("z",))
    s = nl.substitute(e, {"z": nl.Eps()})
    assert nl.free_params(s) == set()
    r = nl.replace_rho(e, nl.parse("eps^2"))
    assert not any(isinstance(n, nl.Rho) for n in nl.walk(r))


def test_huge_trig_argument_raises_instead_of_guessing():
    # sin(e^(10^6)) needs ~4.5e5 digits; the capped evaluator must not return noise
    with pytest.raises(nl.PrecisionExhaustedError):
        nl.evaluate(nl.parse("sin(exp(eps^-3))"), 0.0099, ctx=RHO_EPS)
