import math
from fractions import Fraction

import numpy as np
import pytest

from ghf import basicfn as bf
from ghf import holo
from ghf import netlang as nl
from ghf import scalars as sc
from ghf import sets as S

G = sc.Gauge.named("eps")
ZERO = sc.GenNumber.of(0, G)
RHO = sc.GenNumber.parse("rho", G)


def P(text):
    return sc.GenNumber.parse(text, G)


def F(body):
    return bf.FunctionNet(body, G)


def numeric(body):
    """The same net, hidden behind a callable so only quadrature applies."""
    f = nl.compile_numpy(nl.parse(body, ("z",)), ("z",))
    return bf.FunctionNet(None, G, fn=lambda eps, rho, z: f(eps, rho, np.asarray(z, dtype=complex)), rel_err=1e-14)


# Cauchy quadrature against closed-form derivatives

CLOSED_FORMS = [
    ("z^2", "2*z"),
    ("z^3 - rho*z", "3*z^2 - rho"),
    ("(z + 2)^-1", "-(z + 2)^-2"),
    ("exp(z) * rho^-1", "exp(z) * rho^-1"),
    ("(z^2 + 4)^-1 * z", "(4 - z^2) * (z^2 + 4)^-2"),
]


@pytest.mark.parametrize("body,deriv", CLOSED_FORMS)
def test_cauchy_matches_closed_form(body, deriv):
    z0 = P("1/3 + rho")
    res = holo.cauchy_derivative(numeric(body), z0, 1, P("1/4"))
    want = F(deriv).apply(z=z0).values()
    rel = np.abs(res.value.values() - want) / np.abs(want)
    assert np.all(rel < 1e-9)
    assert sc.eq(res.value, F(deriv).apply(z=z0), 10).true


def test_cauchy_higher_order_coefficient():
    res = holo.cauchy_derivative(numeric("exp(2*z)"), ZERO, 3, P("1/2"), coefficient=True)
    assert np.allclose(res.value.values(), 8 / 6, rtol=1e-12)


def test_cauchy_circle_must_stay_in_ball():
    f = holo.certify_eps_diff(F("z^2"), ZERO, 1)
    with pytest.raises(holo.CertificationError):
        holo.cauchy_derivative(f, ZERO, 1, P("2*rho"))


def test_certify_rejects_pole_in_disk():
    # the quadrature sees the pole, the mean value differs from f(z0)
    with pytest.raises(holo.CertificationError):
        holo.certify_eps_diff(numeric("(z - rho/4)^-1"), ZERO, 1)


# certification


def test_certify_closed_form():
    f = holo.certify_eps_diff(F("z^3 + rho"), RHO, 1)
    assert f.evidence == "closed-form-analytic"
    assert f.witness.little_oh.true
    assert sc.eq(f.witness.m, P("3*rho^2")).true


def test_certify_numeric_net():
    f = holo.certify_eps_diff(numeric("exp(z * rho^-1)"), ZERO, 1)
    assert f.evidence == "numerically-certified"
    assert f.checks["cre"].true
    assert sc.eq(f.witness.m, P("rho^-1"), 8).true


def test_certify_rejects_conj():
    with pytest.raises(holo.CertificationError):
        holo.certify_eps_diff(numeric("conj(z)"), ZERO, 1)


def test_certify_checks_domain():
    dom = S.StronglyInternalSet(S.disk(0, "rho"))
    holo.certify_eps_diff(F("z^2"), ZERO, 2, dom)
    with pytest.raises(holo.CertificationError):
        holo.certify_eps_diff(F("z^2"), ZERO, 1, dom)


def test_second_derivative():
    f = holo.certify_eps_diff(F("z^3"), RHO, 1)
    d = holo.derivative(f)
    assert sc.eq(d.witness.m, P("6*rho")).true and d.witness.little_oh.true


# CRE


def test_cre_of_conj():
    rec = holo.cre_residual(numeric("conj(z)"), P("1/3"))
    r1, r2 = rec.residuals[0].values(), rec.residuals[1].values()
    assert np.all(np.abs(r1 - 2) <= 1e-10) and np.all(np.abs(r2) <= 1e-10)


@pytest.mark.parametrize("body", ["z^2 * rho^-1", "exp(z) + rho", "(z + 1)^-1"])
def test_cre_residual_negligible(body):
    rec = holo.cre_residual(numeric(body), P("rho"))
    v1, v2 = rec.verdicts(10)
    assert v1.true and v2.true


def test_cre_symbolic_path():
    rec = holo.cre_residual(F("z^2"), RHO)
    assert rec.method == "symbolic"
    assert sc.eq(rec.derivative, P("2*rho")).true


def test_goursat_and_montel():
    f = holo.goursat_certify("x^2 - y^2", "2*x*y", G, RHO)
    assert f.witness.little_oh.true and sc.eq(f.witness.m, P("2*rho")).true
    ball = S.SharpBall(ZERO, P("1/2"))
    g = holo.montel_certify("x", "y", G, P("1"), ball)
    assert sc.eq(g.witness.m, 1).true
    with pytest.raises(holo.CertificationError):
        holo.goursat_certify("x", "-y", G, RHO)


# algebra


def _pair(a, b, z="rho"):
    return holo.certify_eps_diff(F(a), P(z), 1), holo.certify_eps_diff(F(b), P(z), 1)


@pytest.mark.parametrize("op", [holo.add, holo.mul, holo.div])
def test_algebra_rules(op):
    f, g = _pair("z^2 + rho", "exp(z) + 1")
    res = op(f, g)
    assert res.derivative_identity.true and res.little_oh.true


def test_numeric_product_rule():
    f = holo.certify_eps_diff(numeric("z^2"), P("1/2"), 1)
    g = holo.certify_eps_diff(F("exp(z)"), P("1/2"), 1)
    res = holo.mul(f, g)
    assert res.derivative_identity.true


def test_chain_rule():
    f = holo.certify_eps_diff(F("rho * z"), RHO, 1)
    g = holo.certify_eps_diff(F("exp(z)"), P("rho^2"), 1)
    res = holo.compose(g, f)
    assert res.derivative_identity.true and res.little_oh.true
    assert sc.eq(res.ghf.witness.m, P("rho * exp(rho^2)")).true


def test_chain_rule_checks_range():
    f, g = _pair("rho^-1 * z", "exp(z)")
    with pytest.raises(holo.CertificationError):
        holo.compose(g, f)


def test_division_needs_invertible_denominator():
    f, g = _pair("z", "z - rho")
    with pytest.raises(holo.CertificationError):
        holo.div(f, g)


def test_different_centers_rejected():
    f = holo.certify_eps_diff(F("z"), ZERO, 1)
    g = holo.certify_eps_diff(F("z"), P("1"), 1)
    with pytest.raises(holo.CertificationError):
        holo.add(f, g)


# jets and remainders


def test_jet_of_exponential():
    jet = holo.taylor_jet(F("exp(z)"), ZERO, 8, P("1/2"))
    for n, c in enumerate(jet.coeffs):
        assert np.allclose(c.values(), 1 / math.factorial(n), rtol=1e-9)
    assert jet.verdict.true and jet.Q < 0.05


def test_fit_jet_bounds_tight():
    rho = np.array([0.1, 0.01])
    coeffs = [np.array([1.0, 1.0]), rho ** -1.0, rho ** -2.0]
    Q, R, ok = holo.fit_jet_bounds(coeffs, [np.zeros(2)] * 3, np.log(rho))
    assert ok and abs(Q - 1) < 1e-9 and abs(R) < 1e-9


def test_remainder_forms_agree():
    f = holo.certify_eps_diff(F("exp(z * rho^-1)"), ZERO, 1)
    jet = holo.taylor_jet(f, ZERO, 12, f.ball.radius * Fraction(1, 2))
    for h in bf.probe_ladder(ZERO, 3)[:3]:
        a = holo.int_form_remainder(f, ZERO, h)
        b = holo.taylor_tail_remainder(jet, h)
        assert sc.eq(a, b, 8).true


def test_conj_real_and_parts():
    F_ = nl.parse("x + i*y", ("x", "y"))
    u, v = holo.real_imag_parts(F_)
    assert holo.cre_identity(u, v, G).true
    assert holo.conj_real(nl.parse("conj(x)", ("x",))) == nl.Param("x")
