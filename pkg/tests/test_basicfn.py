import math

import numpy as np
import pytest

from ghf import basicfn as bf
from ghf import scalars as sc
from ghf import sets as S
from ghf.embed import INV_PI

G = sc.Gauge.named("eps")
ZERO = sc.GenNumber.of(0, G)
DELTA_BODY = f"exp(-(z/rho)^2) * {INV_PI} * rho^-2"


def P(text):
    return sc.GenNumber.parse(text, G)


def F(body, params=("z",)):
    return bf.FunctionNet(body, G, params)


def B(body, domain=None):
    return bf.BasicFunction(F(body), domain)


# evaluation


def test_delta_at_zero():
    assert sc.eq(bf.evaluate(B(DELTA_BODY), ZERO), P(f"{INV_PI} * rho^-2")).true


def test_square_at_d_rho():
    assert sc.eq(bf.evaluate(B("z^2"), P("rho")), P("rho^2")).true


@pytest.mark.parametrize("x", ["1", "-1", "3/2", "-7/3", "10"])
def test_delta_far_from_origin(x):
    assert sc.eq(bf.evaluate(B(DELTA_BODY), P(x)), 0, 20).true


def test_domain_enforced():
    f = B("z^-1", S.StronglyInternalSet(S.Union((S.half_plane(1, "-rho"), S.half_plane(-1, "-rho")))))
    assert sc.eq(f(P("1")), 1).true
    with pytest.raises(bf.OutsideDomainError):
        f(P("rho^2"))


def test_non_moderate_value_rejected():
    with pytest.raises(sc.NotModerateError):
        bf.evaluate(B("exp(z * rho^-2)"), P("1"))


def test_sampled_callable_net():
    net = bf.FunctionNet(None, G, fn=lambda eps, rho, z: np.exp(z) * rho)
    v = net.apply(z=P("1"))
    assert sc.eq(v, P("exp(1) * rho"), 8).true


def test_well_defined_spot_check():
    assert bf.check_well_defined(B(DELTA_BODY), P("rho/3")).true


# Lipschitz certificates


def test_lipschitz_of_square():
    res = bf.lipschitz_certify(B("z^2"), ZERO, Q=0)
    assert res.verdict.true
    L = res.L.values().real
    # sup |2z| on the unit disk is 2, times the 5% slack
    assert np.allclose(L, 2.1, rtol=1e-6)


def test_lipschitz_of_delta():
    res = bf.lipschitz_certify(B(DELTA_BODY), ZERO)
    assert res.verdict.true and res.Q == 1
    o = sc.order(res.L)
    assert abs(o.value + 3) <= o.ci + 0.05


def test_lipschitz_of_constant():
    res = bf.lipschitz_certify(B("3 + rho"), P("1/2"), Q=0)
    assert res.verdict.true and np.all(res.L.values() == 0)


def test_lipschitz_rejects_non_moderate():
    res = bf.lipschitz_certify(B("exp(z * rho^-2)"), ZERO, max_Q=0)
    assert not res.verdict.true


# sharp limits


def test_limit_of_scaled_increment():
    res = bf.sharp_limit(F("h * rho^-1", ("h",)), ZERO, ZERO, q=3)
    assert res.verdict.true
    assert res.witnesses == {q: q + 1 for q in range(4)}


def test_remainder_of_square_tends_to_zero():
    assert bf.sharp_limit(F("h", ("h",)), ZERO, ZERO).verdict.true


def test_wrong_limit_rejected():
    res = bf.sharp_limit(F("h + 1", ("h",)), ZERO, ZERO, q=2)
    assert res.verdict.false and res.counterexample is not None


def test_eps_wise_limit_and_lipschitz_give_sharp_limit():
    R = F("h * rho^-2 * exp(h)", ("h",))
    lip = bf.lipschitz_certify(bf.BasicFunction(R), ZERO)
    assert lip.verdict.true
    assert bf.sharp_limit(R, ZERO, ZERO, q=3).verdict.true


def test_limit_uniqueness():
    R = F("h * rho^-1 + rho", ("h",))
    assert bf.limit_unique(R, ZERO, P("rho"), P("rho + exp(-rho^-1)")).true
    assert bf.limit_unique(R, ZERO, P("rho"), P("2*rho")).true
    assert not bf.sharp_limit(R, ZERO, P("2*rho"), q=3).verdict.true


@pytest.mark.parametrize("body,z0", [("z^2 + rho", "rho"), ("exp(z) * rho^-1", "1/3"), (DELTA_BODY, "rho/2")])
def test_lipschitz_functions_are_continuous(body, z0):
    f = B(body)
    z = P(z0)
    assert bf.lipschitz_certify(f, z).verdict.true
    fz = bf.evaluate(f, z)
    assert bf.sharp_limit(lambda h: bf.evaluate(f, h, check_domain=False), z, fz, q=3).verdict.true


# little-oh


def test_weak_little_oh_square():
    assert bf.weak_little_oh(F("h^2", ("h",)), F("h", ("h",))).verdict.true


def test_weak_little_oh_indicator_example():
    h = F("h", ("h",))
    i0 = bf.indicator_infinitesimal(ZERO)

    # the indicator of infinitesimals linearizes at 0 with slope 0
    def increment(x):
        return bf.indicator_infinitesimal(x) - i0

    def scaled(x):
        return bf.indicator_infinitesimal(x) * x * x

    assert bf.weak_little_oh(increment, h).verdict.true
    assert bf.weak_little_oh(scaled, h).verdict.true


def test_weak_little_oh_fails():
    res = bf.weak_little_oh(F("rho * h", ("h",)), F("h^2", ("h",)))
    assert res.verdict.false


def test_weak_little_oh_closure():
    a, b = F("h^2", ("h",)), F("rho^-1 * h^3", ("h",))
    h = F("h", ("h",))
    assert bf.weak_little_oh(lambda x: a.apply(h=x) + b.apply(h=x), h).verdict.true
    assert bf.weak_little_oh(lambda x: a.apply(h=x) * b.apply(h=x), F("h^2", ("h",))).verdict.true


def test_strong_little_oh_square():
    res = bf.strong_little_oh(F("z^2"), [P("rho"), P("1 + i")], F("2*z"), bf.RemainderNet(F("h", ("z", "h"))))
    assert res.verdict.true


def test_strong_little_oh_synthesized_exp():
    f = F("exp(z * rho^-1)")
    res = bf.strong_little_oh(f, [P("rho"), ZERO], f.derivative(), radius=P("rho"))
    assert res.verdict.true, res


def test_strong_little_oh_conj_fails():
    f = F("conj(z)")
    for m in ("1", "0", "i"):
        res = bf.strong_little_oh(f, [P("rho")], F(m))
        assert res.verdict.false


def test_strong_little_oh_wrong_remainder():
    res = bf.strong_little_oh(F("z^2"), [P("rho")], F("2*z"), bf.RemainderNet(F("2*h", ("z", "h"))))
    assert res.identity.false and res.verdict.false


def test_continuity_form():
    res = bf.strong_little_oh(F("z^3 + rho"), [P("rho")], None)
    assert res.verdict.true


def test_synthesized_remainder_vanishes_at_zero():
    r = bf.synthesize_remainder(F("z^3"), F("3*z^2"))
    v = r.net.apply(z=P("rho"), h=ZERO)
    assert sc.eq(v, 0).true


def test_probe_ladder_inside_ball():
    z0 = P("1 + rho")
    for k in (1, 3):
        for p in bf.probe_ladder(z0, k):
            d = abs(p - z0)
            assert sc.lt(d, sc.GenNumber.d_rho(G, k)).true
            assert sc.is_invertible(d).true



def test_not_well_defined():
    # value 0 at the probe, but slope e^(1/ρ): negligible moves give non-negligible changes
    f = B("z * exp(rho^-1)")
    assert bf.check_well_defined(f, ZERO).false
