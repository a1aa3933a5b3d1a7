"""Acceptance suite: one test per criterion, each a bundle of named checks.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary lists
one PASS/FAIL line per criterion.
"""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from astgen import random_ast
from netgen import random_net, random_positive_net
from reference import reference_value, ulp_distance

from ghf import basicfn as bf
from ghf import embed as em
from ghf import holo
from ghf import netlang as nl
from ghf import scalars as sc

G = sc.Gauge.named("eps")
SIGMA = sc.Gauge.named("exp")
ZERO = sc.GenNumber.of(0, G)
DELTA_BODY = f"exp(-(z/rho)^2) * {em.INV_PI} * rho^-2"
BUMP = em.CompactDistribution.function("(1 - x^2 - y^2)^3", 1, name="bump")


def P(text, gauge=G):
    return sc.GenNumber.parse(text, gauge)


def F(body):
    return bf.FunctionNet(body, G)


def numeric(body):
    f = nl.compile_numpy(nl.parse(body, ("z",)), ("z",))
    return bf.FunctionNet(None, G, fn=lambda eps, rho, z: f(eps, rho, np.asarray(z, dtype=complex)), rel_err=1e-14)


def test_ring_and_order(criterion):
    c = criterion(1, "ring axioms, Mayer equivalence, classification")
    rng = random.Random(1)
    nets = [random_net(rng, G) for _ in range(1000)]
    bad = 0
    for i in range(len(nets)):
        x, y, z = nets[i], nets[(i + 1) % 1000], nets[(i + 7) % 1000]
        for lhs, rhs in [((x + y) + z, x + (y + z)), ((x * y) * z, x * (y * z)), (x * (y + z), x * y + x * z),
                         (x + y, y + x), (x * y, y * x), (x - x, 0), (x * 1, x)]:
            v = sc.eq(lhs, rhs)
            bad += not (v.true and v.method == "symbolic")
    c.check("ring axioms exact on 1000 random nets", bad == 0, f"{bad} violations")

    split = 0
    for _ in range(1000):
        verdicts = {v.value for v in sc.mayer_conditions(random_positive_net(rng, G)).values()}
        split += verdicts != {sc.Truth.TRUE}
    c.check("Mayer criteria verdict-identical on 1000 positive invertible nets", split == 0, f"{split} disagreements")

    k = sc.classify(P("rho"))
    c.check("rho is infinitesimal and finite", k.infinitesimal is sc.Truth.TRUE and k.finite is sc.Truth.TRUE)
    k = sc.classify(P("eps^-1 * sin(eps^-1)"))
    c.check("eps^-1 sin(eps^-1) is none of the three",
            (k.infinitesimal, k.finite, k.infinite) == (sc.Truth.FALSE,) * 3)
    c.done()


def test_negligibility_anchors(criterion):
    c = criterion(2, "negligibility anchors")
    v = sc.eq(P("exp(log(rho)/eps)"), 0)
    c.check("rho^(1/eps) = 0, symbolically", v.true and v.method == "symbolic", str(v))
    x = P("exp(-eps^-1 * log(2))", SIGMA)
    pos = sc.lt(0, x)
    c.check("2^(-1/eps) > 0 over exp(-1/eps)", pos.true and pos.method == "symbolic", str(pos))
    zero = sc.eq(sc.regauge(x, G), 0)
    c.check("2^(-1/eps) = 0 over eps", zero.true and zero.method == "symbolic", str(zero))
    c.done()


def test_delta_identities(criterion):
    c = criterion(3, "delta identities")
    delta = em.iota_embed(em.CompactDistribution.delta(), G)
    v = sc.eq(delta(ZERO), P(f"{em.INV_PI} * rho^-2"))
    c.check("delta(0) = mu(0) rho^-2, symbolically", v.true and v.method == "symbolic", str(v))
    xs = ["1", "-1", "3/2", "-3/2", "2", "-5/2", "10", "-7", "11/10", "-13/4"]
    far = [sc.eq(delta(P(x)), 0, 20) for x in xs]
    c.check("delta = 0 at order 20 on 10 real probes |x| >= 1", all(v.true for v in far))
    probes = [ZERO, P("rho"), P("-rho/2"), P("37/100"), P("-6/5"), P("2"), P("rho^2"), P("1/3 + rho"),
              P("-3/4"), P("5")]
    link = em.delta_1d_link_check(G, probes, N=10)
    c.check("1-D link at order 10 on 10 probes", link.true, str(link))
    c.done()


def _random_distribution(rng):
    terms = []
    for _ in range(rng.randrange(1, 3)):
        alpha = rng.choice([(0, 0), (1, 0), (0, 1)])
        coeff = complex(rng.randrange(-3, 4) or 1, rng.randrange(-2, 3))
        terms.append(em.Term(alpha, coeff, point=complex(rng.choice([0, 0.5, -0.25, 1]))))
    return em.CompactDistribution(tuple(terms))


def test_embedding_suite(criterion):
    c = criterion(4, "embedding: linearity, derivatives, injectivity")
    rng = random.Random(4)
    bad = 0
    for k in range(20):
        S, T = _random_distribution(rng), _random_distribution(rng)
        if k % 5 == 0:
            S = S + BUMP
        a, b = complex(rng.randrange(1, 5), rng.randrange(-2, 3)), complex(rng.randrange(-4, 0))
        z = P(rng.choice(["rho", "1/3", "-rho/2 + rho^2", "1/2 + rho", "1/4"]))
        lhs = em.iota_embed(S.scale(a) + T.scale(b), G)(z)
        rhs = em.iota_embed(S, G)(z) * sc.GenNumber.of(a, G) + em.iota_embed(T, G)(z) * sc.GenNumber.of(b, G)
        bad += not sc.eq(lhs, rhs, 10).true
    c.check("linearity at order 10 on 20 random pairs", bad == 0, f"{bad} failures")

    alphas = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    dists = {"delta": em.CompactDistribution.delta(), "d1 delta": em.CompactDistribution.delta(alpha=(1, 0)),
             "bump": BUMP}
    for name, T in dists.items():
        probes = [P("1/3")] if name == "bump" else [P("rho/3"), P("-rho/2 + i*rho")]
        vs = [em.derivative_preservation_check(T, a, G, probes, N=8) for a in alphas]
        c.check(f"derivative preservation at order 8 for {name}, |alpha| <= 2", all(v.true for v in vs),
                "; ".join(str(v) for v in vs if not v.true))

    five = [em.CompactDistribution.delta(), em.CompactDistribution.delta(0.5),
            em.CompactDistribution.delta(alpha=(1, 0)), em.CompactDistribution.delta(alpha=(0, 1)), BUMP]
    probes = [P("rho/3"), P("1/2 + rho/3"), P("1/3")]
    vals = [[em.iota_embed(T, G)(p) for p in probes] for T in five]
    same = [(i, j) for i in range(5) for j in range(i + 1, 5)
            if not any(sc.eq(vals[i][k], vals[j][k], 10).false for k in range(len(probes)))]
    c.check("5 distributions pairwise distinguished", not same, f"undistinguished pairs {same}")
    c.done()


RATIONALS = ["z^2", "z^3 - rho*z", "3*z^4 + z - 1", "(z + 2)^-1", "z * (z^2 + 4)^-1", "rho^-1 * z^2 + rho",
             "(z - 3)^-2", "rho^2 * z^5", "(1 + z) * (2 - z)^-1", "(z^2 + rho) * (z + 5)^-1"]


def test_holomorphy_suite(criterion):
    c = criterion(5, "Cauchy derivatives and CRE residuals")
    z0 = P("1/3 + rho")
    worst, bad = 0.0, []
    for body in RATIONALS:
        res = holo.cauchy_derivative(numeric(body), z0, 1, P("1/4"), nodes=256)
        want = F(body).derivative().apply(z=z0)
        w = want.values()
        worst = max(worst, float(np.max(np.abs(res.value.values() - w) / np.abs(w))))
        if not sc.eq(res.value, want, 10).true:
            bad.append(body)
    c.check("per-eps relative error < 1e-9 on 10 rational functions", worst < 1e-9, f"max {worst:.3g}")
    c.check("Cauchy derivative eq closed form at order 10", not bad, f"failed: {bad}")

    rec = holo.cre_residual(numeric("conj(z)"), P("1/3"))
    r1, r2 = rec.residuals[0].values(), rec.residuals[1].values()
    c.check("CRE residual of conj(z) is 2 +- 1e-10",
            np.all(np.abs(r1 - 2) <= 1e-10) and np.all(np.abs(r2) <= 1e-10),
            f"max |r1 - 2| = {np.max(np.abs(r1 - 2)):.3g}")

    noisy = []
    for body in RATIONALS:
        f = holo.certify_eps_diff(numeric(body), z0, 1)
        v1, v2 = holo.cre_residual(f, z0).verdicts(10)
        if not (v1.true and v2.true):
            noisy.append(body)
    c.check("CRE residuals of 10 certified GHF negligible at order 10", not noisy, f"failed: {noisy}")
    c.done()


CHAIN_POOL = ["z^2 + rho", "exp(z)", "z^3 - z", "(z + 2)^-1", "rho * z + 1", "sin(z) + rho^2"]


def test_chain_and_product(criterion):
    c = criterion(6, "chain and product rules")
    rng = random.Random(6)
    for _ in range(5):
        fb, gb = rng.sample(CHAIN_POOL, 2)
        z0 = P(rng.choice(["rho", "1/3", "-1/2 + rho"]))
        f = holo.certify_eps_diff(F(fb), z0, 2)
        g_here = holo.certify_eps_diff(F(gb), z0, 2)
        prod = holo.mul(f, g_here)
        c.check(f"product rule for ({fb})({gb})", prod.derivative_identity.true and prod.little_oh.true,
                f"{prod.derivative_identity}; {prod.little_oh}")
        g_there = holo.certify_eps_diff(F(gb), f(z0), 1)
        comp = holo.compose(g_there, f)
        c.check(f"chain rule for ({gb})o({fb})", comp.derivative_identity.true and comp.little_oh.true,
                f"{comp.derivative_identity}; {comp.little_oh}")

    f = holo.certify_eps_diff(F(DELTA_BODY), ZERO, 3)
    g = holo.certify_eps_diff(F(DELTA_BODY), f(ZERO), 1)
    dd = holo.compose(g, f)
    c.check("delta o delta: chain rule", dd.derivative_identity.true and dd.little_oh.true)
    v = sc.eq(dd.ghf(ZERO), 0, 10)
    c.check("delta o delta (0) = 0 at order 10", v.true, str(v))
    c.done()


def test_jet_bounds(criterion):
    c = criterion(7, "Taylor jet bounds of iota(delta)")
    emb = em.iota_embed(em.CompactDistribution.delta(), G)
    jet = holo.taylor_jet(emb.net, ZERO, 12, P("rho/2"))
    c.check("fitted Q in [0.9, 1.1]", 0.9 <= jet.Q <= 1.1, f"Q = {jet.Q:.4g}, R = {jet.R:.4g}")
    c.check("|c_n| <= rho^(-nQ-R) for n <= 12 on every grid point", jet.verdict.true, str(jet.verdict))
    c.done()


REMAINDER_GHF = [("exp(z * rho^-1)", "0"), ("z^3 + rho", "rho"), ("(z + 2)^-1", "0"), (DELTA_BODY, "0"),
                 ("rho^-1 * exp(z)", "1/3")]


def test_remainder_forms(criterion):
    c = criterion(8, "integral and Taylor-tail remainders")
    for body, at in REMAINDER_GHF:
        z0 = P(at)
        f = holo.certify_eps_diff(F(body), z0, 1)
        jet = holo.taylor_jet(f, z0, 12, f.ball.radius * Fraction(1, 2))
        hs = [p - z0 for k in (2, 3) for p in bf.probe_ladder(z0, k)[:2]]
        vs = [sc.eq(holo.int_form_remainder(f, z0, h), holo.taylor_tail_remainder(jet, h), 8) for h in hs]
        name = body if len(body) < 30 else "delta"
        c.check(f"remainder forms agree at order 8 for {name}", all(v.true for v in vs),
                "; ".join(str(v) for v in vs if not v.true))
    c.done()


def test_mollifier_uniqueness(criterion):
    c = criterion(9, "mollifier uniqueness")
    a, b = em.mollifier("gauss-entire"), em.mollifier("fejer")
    c2 = [complex(nl.evaluate(m.taylor_coefficient(2), 0.1, form="complex")) for m in (a, b)]
    c.check("second Taylor coefficients differ", abs(c2[0] - c2[1]) > 1e-3, f"{c2[0].real:.6g} vs {c2[1].real:.6g}")
    res = em.mollifier_uniqueness_check(a, b, G, 8, [(1, 0)])
    mid = G.grid.points[G.grid.count // 2]
    w = res.witness or {}
    c.check("distinct mollifiers fail at (q, r) = (1, 0)", res.verdict.false, str(res.verdict))
    c.check("witness at n <= 8 and eps below the grid midpoint",
            w.get("n") is not None and w["n"] <= 8 and w.get("eps") is not None and w["eps"] < mid, str(w))
    same = em.mollifier_uniqueness_check(a, a, G, 8, [(1, 0)])
    c.check("identical mollifiers pass", same.verdict.true, str(same.verdict))
    c.done()


def test_j_embedding(criterion):
    c = criterion(10, "j-embedding of locally integrable functions")
    probes = [0.3 + 0.1j, -0.5, 0.7j, 1 - 0.2j, 0.0, -1.1 + 0.4j, 0.25 - 0.9j, 1.3, -0.6 - 0.6j, 0.05 + 1.2j]
    for body in ("z^2", "z^3"):
        f = em.LocIntFunction.parse(body)
        je = em.jmath_embed(f, G)
        F_ = f.fn()
        err = max(abs(je.standard_part(z) - complex(F_(np.array([z]))[0])) for z in probes)
        c.check(f"st j({body}) = {body} at 10 standard probes", err <= 1e-6, f"max error {err:.3g}")
    try:
        em.jmath_embed(em.LocIntFunction.parse("conj(z)"), G)
        rejected = False
    except holo.CertificationError:
        rejected = True
    c.check("j(conj(z)) rejected by the distributional CRE test", rejected)
    c.done()


def test_netlang(criterion):
    c = criterion(11, "netlang round trip and reference evaluation")
    rng = random.Random(11)
    mismatched = sum(nl.parse(nl.to_text(a)) != a for a in (random_ast(rng) for _ in range(10_000)))
    c.check("10^4 random ASTs round-trip", mismatched == 0, f"{mismatched} mismatches")

    rho = nl.parse("eps^2")
    ctx = nl.EvalContext(rho=rho, in_index=lambda name, e: name == "L")
    worst, checked = 0.0, 0
    while checked < 1000:
        a = random_ast(rng, 5)
        eps = 0.5 * 0.7 ** rng.randrange(24)
        b = {"z": complex(rng.uniform(-2, 2), rng.uniform(-2, 2)), "h": complex(rng.uniform(-1, 1), 0)}
        try:
            v = nl.evaluate(a, eps, b, ctx, form="auto")
        except nl.EvaluationDomainError:
            continue
        if isinstance(v, nl.LogPolar) or not (math.isfinite(v.real) and math.isfinite(v.imag)):
            continue
        worst = max(worst, ulp_distance(v, reference_value(a, eps, rho, b, lambda name: name == "L")))
        checked += 1
    c.check("evaluator within 4 ulps of the 40-digit reference on 1000 trees", worst <= 4, f"max {worst:.3g} ulps")
    c.done()


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
