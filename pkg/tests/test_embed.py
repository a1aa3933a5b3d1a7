import math

import mpmath
import numpy as np
import pytest

from ghf import embed as em
from ghf import holo
from ghf import netlang as nl
from ghf import scalars as sc

G = sc.Gauge.named("eps")
ZERO = sc.GenNumber.of(0, G)
BUMP = em.CompactDistribution.function("(1 - x^2 - y^2)^3", 1, name="bump")
DELTA = em.CompactDistribution.delta()
D1_DELTA = em.CompactDistribution.delta(alpha=(1, 0))


def P(text):
    return sc.GenNumber.parse(text, G)


# mollifiers


def test_registry():
    assert em.mollifier_names() == ["bump-product", "fejer", "gauss-entire", "gauss-plane"]
    with pytest.raises(KeyError):
        em.mollifier("box")


@pytest.mark.parametrize("name", ["gauss-entire", "gauss-plane", "fejer", "bump-product"])
def test_normalization(name):
    assert em.normalization_check(em.mollifier(name)) < 1e-6


@pytest.mark.parametrize("name,fn", [
    ("gauss-entire", lambda z: mpmath.exp(-z**2) / mpmath.pi),
    ("fejer", lambda z: (mpmath.sinc(z) / mpmath.pi) ** 2),
])
def test_taylor_tables_against_series(name, fn):
    mu = em.mollifier(name)
    with mpmath.workdps(40):
        want = mpmath.taylor(fn, 0, 12)
    for n in range(13):
        got = complex(nl.evaluate(mu.taylor_coefficient(n), 0.1, form="complex"))
        assert abs(got - complex(want[n])) <= 1e-15 * max(1.0, abs(complex(want[n])))


def test_bump_taylor_matches_inverse_fourier_derivatives():
    mu = em.mollifier("bump-product")
    phi0 = em.bump_inverse_fourier(0.0).real
    for n in (0, 2, 4):
        d = complex(em.bump_inverse_fourier(0.0, n)).real
        got = complex(nl.evaluate(mu.taylor_coefficient(n), 0.1, form="complex")).real
        assert math.isclose(got, d * phi0 / math.factorial(n), rel_tol=1e-12)


def test_with_taylor_replaces_one_coefficient():
    mu = em.mollifier().with_taylor(n2="1/10")
    assert mu.name.endswith("*")
    assert nl.evaluate(mu.taylor_coefficient(2), 0.1, form="complex") == pytest.approx(0.1)


def test_fejer_has_no_truncated_support():
    with pytest.raises(em.QuadratureFailure):
        em.support_of(em.mollifier("fejer"))


# distributions and the embedding


def test_distribution_json_and_algebra():
    T = em.CompactDistribution.from_json({"terms": [{"dirac": 0}, {"g": "1 - x^2 - y^2", "support": 1, "coeff": 2}]})
    assert [t.kind for t in T.terms] == ["dirac", "g"]
    assert T.order() == 2
    assert T.derivative((1, 1)).order() == 4
    merged = (BUMP + BUMP.scale(2)).merged()
    assert len(merged.terms) == 1
    with pytest.raises(ValueError):
        em.CompactDistribution((em.Term((0, 0), 1.0, nl.parse("x", ("x", "y")), None),))


def test_delta_closed_form():
    emb = em.iota_embed(DELTA, G)
    assert emb.net.symbolic and emb.holomorphy == "closed-form-analytic"
    assert sc.eq(emb(ZERO), P(f"{em.INV_PI} * rho^-2")).true


@pytest.mark.parametrize("x", ["1", "-1", "3/2", "-5/4", "10"])
def test_delta_vanishes_away_from_origin(x):
    assert sc.eq(em.iota_embed(DELTA, G)(P(x)), 0, 20).true


def test_delta_grows_along_imaginary_axis():
    # exp(-z²) is unbounded off the real axis
    assert sc.eq(em.iota_embed(DELTA, G)(P("2*i")), 0, 20).false


def test_g_term_embedding_is_reported():
    emb = em.iota_embed(BUMP, G)
    assert emb.holomorphy == "reported" and emb.cre
    # far outside the support the convolution vanishes
    assert sc.eq(emb(P("3")), 0, 10).true
    # at the origin it converges to g(0) = 1
    v = emb(ZERO).values()
    assert abs(v[-1] - 1) < 1e-6


def test_linearity_mixed():
    S, T = DELTA.scale(2), em.CompactDistribution.delta(0.5)
    whole = em.iota_embed(S + T, G)
    a, b = em.iota_embed(S, G), em.iota_embed(T, G)
    for z in (P("rho"), P("1/2 + rho^2"), P("-rho/3")):
        assert sc.eq(whole(z), a(z) + b(z), 10).true


@pytest.mark.parametrize("alpha", [(1, 0), (0, 1), (1, 1), (2, 0)])
def test_derivative_preservation_delta(alpha):
    assert em.derivative_preservation_check(DELTA, alpha, G, [P("rho/3"), P("-rho/2 + i*rho")]).true


def test_derivative_preservation_d1_delta():
    assert em.derivative_preservation_check(D1_DELTA, (0, 1), G, [P("rho/3")]).true


def test_derivative_preservation_bump():
    assert em.derivative_preservation_check(BUMP, (1, 0), G, [P("1/3")]).true


def test_delta_1d_link():
    assert em.delta_1d_link_check(G, [ZERO, P("rho"), P("37/100"), P("-6/5")]).true
    with pytest.raises(ValueError):
        em.delta_1d_link_check(G, [ZERO], "gauss-plane")


def test_embedding_distinguishes_distributions():
    dists = [DELTA, em.CompactDistribution.delta(0.5), D1_DELTA, em.CompactDistribution.delta(alpha=(0, 1)),
             DELTA.scale(2)]
    probes = [P("rho/3"), P("1/2 + rho/3")]
    vals = [[em.iota_embed(T, G)(p) for p in probes] for T in dists]
    for i in range(len(dists)):
        for j in range(i + 1, len(dists)):
            assert any(sc.eq(vals[i][k], vals[j][k], 10).false for k in range(len(probes))), (i, j)


# mollifier uniqueness


def test_distinct_mollifiers_not_equivalent():
    res = em.mollifier_uniqueness_check("gauss-entire", "fejer", G)
    assert res.verdict.false
    mid = G.grid.points[G.grid.count // 2]
    assert res.witness["n"] <= 8 and res.witness["eps"] < mid


def test_mollifier_self_equivalent():
    assert em.mollifier_uniqueness_check("gauss-entire", "gauss-entire", G).verdict.true


def test_perturbed_second_coefficient_detected():
    mu = em.mollifier()
    other = mu.with_taylor(n2=f"-{em.INV_PI} + 1/1000")
    res = em.mollifier_uniqueness_check(mu, other, G)
    assert res.verdict.false and res.witness["n"] == 2


# j-embedding


@pytest.mark.parametrize("body", ["z^2", "z^3"])
def test_j_standard_part(body):
    f = em.LocIntFunction.parse(body)
    je = em.jmath_embed(f, G)
    F = f.fn()
    for z in (0.3 + 0.1j, -0.5, 0.7j, 1 - 0.2j):
        assert abs(je.standard_part(z) - complex(F(np.array([z]))[0])) < 1e-6


def test_j_rejects_conj():
    f = em.LocIntFunction.parse("conj(z)")
    assert em.distributional_cre_test(f).false
    with pytest.raises(holo.CertificationError):
        em.jmath_embed(f, G)


def test_j_certified_at_probe():
    je = em.jmath_embed(em.LocIntFunction.parse("z^2"), G, probe=P("1/2"))
    assert je.ghf is not None and sc.eq(je.ghf.witness.m, 1, 8).true


def test_smoothed_heaviside():
    H = em.smoothed_heaviside(G)
    assert sc.eq(H.apply(z=ZERO), sc.GenNumber.of(0.5, G), 8).true


def test_mixed_distribution_dirac_part_is_exact():
    # a g-term forces quadrature, the point mass near the probe must still see z exactly
    S = em.CompactDistribution.delta(0.5, alpha=(0, 1)) + BUMP
    z = P("1/2 + rho")
    whole = em.iota_embed(S, G)(z)
    parts = em.iota_embed(em.CompactDistribution.delta(0.5, alpha=(0, 1)), G)(z) + em.iota_embed(BUMP, G)(z)
    assert sc.eq(whole, parts, 10).true
