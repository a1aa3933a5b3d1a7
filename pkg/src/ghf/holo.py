"""Generalized holomorphic functions: certification, derivatives, jets, CRE.

Derivatives of symbolic nets come from exact differentiation of the body;
numeric nets are differentiated by trapezoidal Cauchy quadrature on circles,
which converges geometrically for analytic integrands.  Remainders
r(z, h) = (f(z+h) − f(z))/h − f'(z) of numeric nets are computed by the
contour form (1/2πi)∮ f(w)·h / ((w−z)²(w−z−h)) dw, which stays accurate
for tiny h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from scipy.optimize import linprog

from . import canonical as cn
from . import netlang as nl
from .basicfn import (
    BasicFunction,
    FunctionNet,
    RemainderNet,
    check_well_defined,
    probe_ladder,
    rho_values,
    strong_little_oh,
    synthesize_remainder,
)
from .scalars import (
    DEFAULT_ORDER,
    U,
    GenNumber,
    Gauge,
    SampledNet,
    Samples,
    SymbolicNet,
    Truth,
    Verdict,
    eq,
    lt,
    v_and,
)
from .sets import InternalSet, SharpBall, ball_in_strongly_internal, member

DEFAULT_NODES = 256
QUAD_TOL = 1e-10
MAX_NODES = 1 << 15


class CertificationError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Cauchy quadrature


def _contour(fn: Callable, c: complex, a: float, n: int, nodes: int, tol: float):
    """n-th Taylor coefficient of fn at c from the circle of radius a.

    Returns (coefficient, abs error bound, nodes used).  The node count is
    doubled until successive estimates agree to tol relative, or to the
    roundoff floor 64·u·max|f|/aⁿ.
    """

    def rule(N):
        theta = 2 * np.pi * np.arange(N) / N
        w = c + a * np.exp(1j * theta)
        vals = np.asarray(fn(w), dtype=complex)
        return np.mean(vals * np.exp(-1j * n * theta)) / a**n, float(np.max(np.abs(vals)))

    N = nodes
    prev, _ = rule(N)
    while True:
        cur, fmax = rule(2 * N)
        floor = 64 * U * fmax / a**n
        delta = abs(cur - prev)
        if not (np.isfinite(cur) and np.isfinite(fmax)):
            raise QuadratureError("integrand is not finite on the contour")
        if delta <= tol * abs(cur) + floor:
            return cur, delta + floor, 2 * N
        if 2 * N >= MAX_NODES:
            raise QuadratureError(f"no convergence with {2 * N} nodes (delta {delta:.3g})")
        N *= 2
        prev = cur


@dataclass
class CauchyResult:
    value: GenNumber
    abs_err: np.ndarray
    nodes: np.ndarray


def _net_of(f) -> FunctionNet:
    if isinstance(f, GHF):
        return f.net
    if isinstance(f, BasicFunction):
        return f.net
    return f


def cauchy_derivative(
    f,
    z0: GenNumber,
    n: int,
    a: GenNumber | None = None,
    nodes: int = DEFAULT_NODES,
    coefficient: bool = False,
    tol: float = QUAD_TOL,
) -> CauchyResult:
    """[(n!/2πi)∮ f_ε(w)/(w − z0_ε)^{n+1} dw] over circles of radius a_ε.

    With coefficient=True the n! factor is dropped (Taylor coefficient).
    """
    net = _net_of(f)
    g = net.gauge
    if a is None:
        a = f.ball.radius * Fraction(1, 2) if isinstance(f, GHF) else GenNumber.of(Fraction(1, 2), g)
    if isinstance(f, GHF):
        margin = f.ball.radius - abs(z0 - f.ball.center) - a
        if not lt(GenNumber.of(0, g), margin).true:
            raise CertificationError("the quadrature circle leaves the certified ball")
    zv, av, rho = z0.values(), a.values().real, rho_values(g)
    fac = 1 if coefficient else math.factorial(n)
    vals, errs, used = [], [], []
    for i, e in enumerate(g.grid.points):
        c, e_, k = _contour(lambda w: net.at(e, rho[i], z=w), complex(zv[i]), float(av[i]), n, nodes, tol)
        vals.append(fac * c)
        errs.append(fac * e_)
        used.append(k)
    vals = np.array(vals)
    errs = np.array(errs)
    with np.errstate(divide="ignore"):
        s = Samples.from_complex(vals)
        s = Samples(s.logmag, s.phase, np.log(errs))
    return CauchyResult(GenNumber(SampledNet(s, g), check=False), errs, np.array(used))


def cauchy_net(net: FunctionNet, n: int, radius: Callable[[float, float], float], name: str = "") -> FunctionNet:
    """The net of n-th derivatives of a numeric net, by Cauchy quadrature."""
    fac = math.factorial(n)

    def fn(eps, rho, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        a = radius(eps, rho)
        out = np.array([fac * _contour(lambda w: net.at(eps, rho, z=w), complex(c), a, n, DEFAULT_NODES, QUAD_TOL)[0]
                        for c in z.ravel()])
        return out.reshape(z.shape)

    return FunctionNet(None, net.gauge, ("z",), fn=fn, rel_err=1e-9, name=name or f"d{n}({net.name})")


def contour_remainder(net: FunctionNet, radius: Callable[[float, float], float]) -> RemainderNet:
    """r(z,h) = (1/2πi)∮ f(w)·h/((w−z)²(w−z−h)) dw, valid for |h| < radius/2."""

    def fn(eps, rho, z, h):
        z, h = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(h, dtype=complex))
        a = radius(eps, rho)
        N = 2 * DEFAULT_NODES
        theta = 2 * np.pi * np.arange(N) / N
        out = np.empty(z.shape, dtype=complex)
        for idx in np.ndindex(z.shape):
            d = a * np.exp(1j * theta)
            vals = np.asarray(net.at(eps, rho, z=z[idx] + d), dtype=complex)
            out[idx] = np.mean(vals * h[idx] / (d * (d - h[idx])))
        return out

    return RemainderNet(FunctionNet(None, net.gauge, ("z", "h"), fn=fn, rel_err=1e-9, name=f"r({net.name})"), True)


# ---------------------------------------------------------------------------
# GHF


@dataclass
class DiffWitness:
    m: GenNumber
    remainder: RemainderNet
    little_oh: Verdict


@dataclass
class GHF:
    """A basic function certified ℂ̃-differentiable on a sharp ball."""

    base: BasicFunction
    ball: SharpBall
    evidence: str  # "closed-form-analytic" | "numerically-certified" | "goursat" | "montel"
    dnet: FunctionNet
    witness: DiffWitness | None = None
    name: str = ""
    checks: dict = field(default_factory=dict)
    domain: InternalSet | None = None

    @property
    def net(self) -> FunctionNet:
        return self.base.net

    @property
    def gauge(self) -> Gauge:
        return self.net.gauge

    def __call__(self, z: GenNumber, check_domain: bool = False) -> GenNumber:
        if check_domain and not member(z, self.ball).true:
            raise CertificationError("probe outside the certified ball")
        return self.net.apply(z=z)

    def derivative_at(self, z: GenNumber) -> GenNumber:
        return self.dnet.apply(z=z)

    def radius_fn(self) -> Callable[[float, float], float]:
        """Quadrature radius: half the ball radius at each ε."""
        r = self.ball.radius
        if r.symbolic:
            body = r.expr

            def rad(eps, rho, body=body):
                return 0.5 * abs(complex(nl.compile_numpy(body)(eps, rho)))
        else:
            vals = r.values().real
            grid = self.gauge.grid

            def rad(eps, rho):
                return 0.5 * float(vals[min(max(grid.index_of(eps), 0), grid.count - 1)])
        return rad

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "evidence": self.evidence,
            "ball": {"center": self.ball.center.to_json()["repr"], "radius": self.ball.radius.to_json()["repr"]},
            "checks": {k: v.as_dict() for k, v in self.checks.items()},
            "little_oh": self.witness.little_oh.as_dict() if self.witness else None,
        }


def _is_closed_form_analytic(net: FunctionNet) -> bool:
    return net.symbolic and nl.is_analytic_in(net.body, "z")


def _derivative_net(net: FunctionNet, radius) -> FunctionNet:
    if _is_closed_form_analytic(net):
        return net.derivative("z")
    return cauchy_net(net, 1, radius)


def _remainder(net: FunctionNet, dnet: FunctionNet, radius) -> RemainderNet:
    if net.symbolic and dnet.symbolic:
        return synthesize_remainder(net, dnet)
    return contour_remainder(net, radius)


def certify_eps_diff(
    net: FunctionNet,
    z: GenNumber,
    q: Fraction | int = 1,
    domain: InternalSet | None = None,
    N: int = DEFAULT_ORDER,
    seed: int = 0,
    little_oh_order: int = 2,
    name: str = "",
) -> GHF:
    """Certify a net of ε-wise holomorphic functions as a GHF on B_{dρ^q}(z)."""
    g = net.gauge
    radius = GenNumber.d_rho(g, q)
    ball = SharpBall(z, radius)
    checks = {}
    # (1) the closed ball sits in the strongly internal domain
    if domain is not None:
        v = ball_in_strongly_internal(SharpBall(z, radius, closed=True), domain, N)
        checks["ball_in_domain"] = v
        if not v.true:
            raise CertificationError(f"condition (1) fails: ball not inside the domain ({v})")
    half = radius * Fraction(1, 2)
    rvals = half.values().real

    def rad(eps, rho, rvals=rvals, grid=g.grid):
        return float(rvals[min(max(grid.index_of(eps), 0), grid.count - 1)])

    def moderate_derivative():
        # (3) derivative moderateness at probes
        for c in [z] + probe_ladder(z, int(math.ceil(q)) + 1, seed=seed)[:2]:
            o = dnet.apply(z=c).order()
            if o.value == -math.inf:
                raise CertificationError(f"condition (3) fails: f' is not moderate at a probe ({o.detail})")
        checks["derivative_moderate"] = Verdict(Truth.TRUE, N, "symbolic" if dnet.symbolic else "sampled",
                                                "f' moderate at probes")

    # symbolic bodies are checked for (3) first, numerics could overflow otherwise
    dnet = _derivative_net(net, rad)
    if dnet.symbolic:
        moderate_derivative()
    # (2) holomorphic per ε and basic
    if _is_closed_form_analytic(net):
        evidence = "closed-form-analytic"
    else:
        evidence = "numerically-certified"
    zv = z.values()
    rho = rho_values(g)
    for i, e in enumerate(g.grid.points):
        try:
            c0, err, _ = _contour(lambda w: net.at(e, rho[i], z=w), complex(zv[i]), float(rvals[i]), 0, 64, 1e-9)
        except QuadratureError as exc:
            raise CertificationError(f"condition (2) fails at eps={e:.3g}: {exc}") from exc
        direct = complex(np.asarray(net.at(e, rho[i], z=np.array([zv[i]])))[0])
        if not abs(c0 - direct) <= 1e-7 * (abs(direct) + abs(c0)) + 2 * err + 1e-300:
            raise CertificationError(f"condition (2) fails at eps={e:.3g}: not holomorphic on the disk")
    if evidence == "numerically-certified":
        rec = cre_residual(net, z, scale=radius)
        v = v_and(eq(rec.residuals[0], 0, N), eq(rec.residuals[1], 0, N))
        checks["cre"] = v
        if not v.true:
            raise CertificationError(f"condition (2) fails: CRE residual not negligible ({v})")
    base = BasicFunction(net, ball)
    wd = check_well_defined(base, z, N)
    checks["well_defined"] = wd
    if wd.false:
        raise CertificationError(f"condition (2) fails: not well defined ({wd})")
    if not dnet.symbolic:
        moderate_derivative()
    rem = _remainder(net, dnet, rad)
    lo = strong_little_oh(net, [z], dnet, rem, q=little_oh_order, seed=seed, N=N, radius=radius * Fraction(1, 4))
    witness = DiffWitness(dnet.apply(z=z), rem, lo.verdict)
    return GHF(base, ball, evidence, dnet, witness, name or net.name, checks, domain)


def derivative(f: GHF, N: int = DEFAULT_ORDER) -> GHF:
    """The GHF z ↦ f'(z) on the same ball."""
    rad = f.radius_fn()
    d2 = _derivative_net(f.dnet, rad) if f.dnet.symbolic else cauchy_net(f.net, 2, rad)
    rem = _remainder(f.dnet, d2, rad)
    lo = strong_little_oh(f.dnet, [f.ball.center], d2, rem, q=1, N=N, radius=f.ball.radius * Fraction(1, 4))
    w = DiffWitness(d2.apply(z=f.ball.center), rem, lo.verdict)
    return GHF(BasicFunction(f.dnet, f.ball), f.ball, f.evidence, d2, w, f"({f.name})'", domain=f.domain)


# ---------------------------------------------------------------------------
# Taylor jets


@dataclass
class TaylorJet:
    center: GenNumber
    coeffs: list
    Q: float
    R: float
    verdict: Verdict
    abs_err: list = field(default_factory=list)


def fit_jet_bounds(coeffs: list[np.ndarray], errs: list[np.ndarray], log_rho: np.ndarray,
                   caps: tuple[float, float] = (50.0, 100.0)):
    """Minimal Q + R with log|c_n| ≤ −(nQ + R)·log ρ on every grid point.

    Coefficients that vanish within their error bound impose no constraint.
    """
    L = -log_rho
    A, b = [], []
    for n, (c, e) in enumerate(zip(coeffs, errs)):
        mag = np.abs(c) + e
        for j in range(len(L)):
            if np.abs(c[j]) <= e[j]:
                mag_j = e[j]
            else:
                mag_j = mag[j]
            if mag_j == 0:
                continue
            A.append([-n * L[j], -L[j]])
            b.append(-math.log(mag_j))
    if not A:
        return 0.0, 0.0, True
    res = linprog([1.0, 1.0], A_ub=np.array(A), b_ub=np.array(b),
                  bounds=[(0.0, caps[0]), (-caps[1], caps[1])], method="highs")
    if not res.success:
        return None, None, False
    Q, R = res.x
    ok = bool(np.all(np.array(A) @ res.x <= np.array(b) + 1e-9))
    return float(Q), float(R), ok


def taylor_jet(f, z0: GenNumber, n_max: int = 12, a: GenNumber | None = None) -> TaylorJet:
    """Coefficients f^(n)(z0)/n! for n ≤ n_max with fitted moderateness bounds."""
    results = [cauchy_derivative(f, z0, n, a, coefficient=True) for n in range(n_max + 1)]
    g = z0.gauge
    coeffs = [r.value for r in results]
    Q, R, ok = fit_jet_bounds([c.values() for c in coeffs], [r.abs_err for r in results], g.log_rho)
    if Q is None:
        raise CertificationError("no (Q, R) within caps bounds the jet")
    v = Verdict(Truth.TRUE if ok else Truth.FALSE, None, "sampled",
                f"|c_n| ≤ dρ^(-n·{Q:.4g} - {R:.4g}) for n ≤ {n_max} on the grid")
    return TaylorJet(z0, coeffs, Q, R, v, [r.abs_err for r in results])


# ---------------------------------------------------------------------------
# remainder forms


def int_form_remainder(f: GHF, z: GenNumber, h: GenNumber, t_nodes: int = 12) -> GenNumber:
    """∫₀¹ f'(z+th) dt − f'(z) through the contour kernel, Gauss–Legendre in t."""
    g = f.gauge
    rad = f.radius_fn()
    t, wt = np.polynomial.legendre.leggauss(t_nodes)
    t, wt = (t + 1) / 2, wt / 2
    zv, hv, rho = z.values(), h.values(), rho_values(g)
    out, errs = [], []
    N = 2 * DEFAULT_NODES
    theta = 2 * np.pi * np.arange(N) / N
    for i, e in enumerate(g.grid.points):
        a = rad(e, rho[i])
        d = a * np.exp(1j * theta)
        vals = np.asarray(f.net.at(e, rho[i], z=zv[i] + d), dtype=complex)
        th = np.outer(t, np.full(N, hv[i]))
        # 1/(d − th)² − 1/d² = th(2d − th) / (d²(d − th)²)
        kern = np.sum(wt[:, None] * th * (2 * d - th) / (d**2 * (d - th) ** 2), axis=0)
        val = np.mean(vals * d * kern)
        out.append(val)
        errs.append(16 * U * np.max(np.abs(vals)) * np.max(np.abs(d * kern)) + 1e-14 * abs(val))
    s = Samples.from_complex(np.array(out))
    with np.errstate(divide="ignore"):
        s = Samples(s.logmag, s.phase, np.log(np.array(errs)))
    return GenNumber(SampledNet(s, g), check=False)


def taylor_tail_remainder(jet: TaylorJet, h: GenNumber, n_max: int | None = None) -> GenNumber:
    """Σ_{n=2}^{n_max} c_n h^{n−1}, the truncated Taylor form of the remainder."""
    n_max = n_max or len(jet.coeffs) - 1
    hv = h.values()
    total = np.zeros_like(hv)
    err = np.zeros(len(hv))
    for n in range(2, n_max + 1):
        total = total + jet.coeffs[n].values() * hv ** (n - 1)
        err = err + jet.abs_err[n] * np.abs(hv) ** (n - 1)
    s = Samples.from_complex(total)
    with np.errstate(divide="ignore"):
        s = Samples(s.logmag, s.phase, np.log(err + 4 * U * np.abs(total)))
    return GenNumber(SampledNet(s, h.gauge), check=False)


# ---------------------------------------------------------------------------
# algebra and composition


def _combine_nets(gauge, bodies, fns, symbolic_op, numeric_op, params=("z",)) -> FunctionNet:
    if all(b is not None for b in bodies):
        return FunctionNet(symbolic_op(*bodies), gauge, params)

    def fn(eps, rho, **kw):
        return numeric_op(*[f(eps, rho, **kw) for f in fns])

    return FunctionNet(None, gauge, params, fn=fn, rel_err=1e-9)


def _pair(f: GHF, g: GHF):
    return [f.net.body, g.net.body], [f.net.at, g.net.at]


@dataclass
class AlgebraResult:
    ghf: GHF
    derivative_identity: Verdict
    little_oh: Verdict


def _assemble(name, net, dnet, rem, ball, evidence, expected_m: GenNumber, N, q=1) -> AlgebraResult:
    lo = strong_little_oh(net, [ball.center], dnet, rem, q=q, N=N, radius=ball.radius * Fraction(1, 4))
    m = dnet.apply(z=ball.center)
    ident = eq(m, expected_m, N)
    w = DiffWitness(m, rem, lo.verdict)
    ghf = GHF(BasicFunction(net, ball), ball, evidence, dnet, w, name)
    return AlgebraResult(ghf, ident, lo.verdict)


def _common_ball(f: GHF, g: GHF) -> SharpBall:
    if not eq(f.ball.center, g.ball.center).true:
        raise CertificationError("operands are certified around different points")
    ra, rb = f.ball.radius, g.ball.radius
    r = ra if lt(ra, rb).true or eq(ra, rb).true else rb
    return SharpBall(f.ball.center, r)


def _evidence(*fs: GHF) -> str:
    return "closed-form-analytic" if all(f.evidence == "closed-form-analytic" for f in fs) else "numerically-certified"


def _rem_fn(r: RemainderNet):
    return r.net.at


def add(f: GHF, g: GHF, N: int = DEFAULT_ORDER) -> AlgebraResult:
    ball = _common_ball(f, g)
    gauge = f.gauge
    bodies, fns = _pair(f, g)
    net = _combine_nets(gauge, bodies, fns, nl.add, lambda a, b: a + b)
    dnet = _combine_nets(gauge, [f.dnet.body, g.dnet.body], [f.dnet.at, g.dnet.at], nl.add, lambda a, b: a + b)
    rf, rg = f.witness.remainder.net, g.witness.remainder.net
    rem = RemainderNet(_combine_nets(gauge, [rf.body, rg.body], [rf.at, rg.at], nl.add, lambda a, b: a + b,
                                     ("z", "h")))
    c = ball.center
    return _assemble(f"({f.name})+({g.name})", net, dnet, rem, ball, _evidence(f, g),
                     f.derivative_at(c) + g.derivative_at(c), N)


def mul(f: GHF, g: GHF, N: int = DEFAULT_ORDER) -> AlgebraResult:
    """(fg)' = f'g + fg', remainder r_f g + f r_g + h(f'+r_f)(g'+r_g)."""
    ball = _common_ball(f, g)
    gauge = f.gauge
    bodies, fns = _pair(f, g)
    net = _combine_nets(gauge, bodies, fns, nl.mul, lambda a, b: a * b)
    F, G, dF, dG = f.net, g.net, f.dnet, g.dnet
    rf, rg = f.witness.remainder.net, g.witness.remainder.net
    if all(x.symbolic for x in (F, G, dF, dG, rf, rg)):
        dnet = FunctionNet(nl.add(nl.mul(dF.body, G.body), nl.mul(F.body, dG.body)), gauge)
        z = nl.Param("h")
        rem_body = nl.add(nl.add(nl.mul(rf.body, G.body), nl.mul(F.body, rg.body)),
                          nl.mul(z, nl.mul(nl.add(dF.body, rf.body), nl.add(dG.body, rg.body))))
        rem = RemainderNet(FunctionNet(rem_body, gauge, ("z", "h")))
    else:
        def dfn(eps, rho, z):
            return dF.at(eps, rho, z=z) * G.at(eps, rho, z=z) + F.at(eps, rho, z=z) * dG.at(eps, rho, z=z)

        def rfn(eps, rho, z, h):
            a = rf.at(eps, rho, z=z, h=h)
            b = rg.at(eps, rho, z=z, h=h)
            return (a * G.at(eps, rho, z=z) + F.at(eps, rho, z=z) * b
                    + h * (dF.at(eps, rho, z=z) + a) * (dG.at(eps, rho, z=z) + b))

        dnet = FunctionNet(None, gauge, fn=dfn, rel_err=1e-9)
        rem = RemainderNet(FunctionNet(None, gauge, ("z", "h"), fn=rfn, rel_err=1e-9))
    c = ball.center
    expected = f.derivative_at(c) * g(c) + f(c) * g.derivative_at(c)
    return _assemble(f"({f.name})*({g.name})", net, dnet, rem, ball, _evidence(f, g), expected, N)


def div(f: GHF, g: GHF, N: int = DEFAULT_ORDER) -> AlgebraResult:
    """(f/g)' = (f'g − fg')/g² with g(z0) invertible."""
    from .scalars import is_invertible

    ball = _common_ball(f, g)
    c = ball.center
    inv = is_invertible(g(c), N)
    if not inv.true:
        raise CertificationError(f"division by a non-invertible value: {inv}")
    gauge = f.gauge
    F, G, dF, dG = f.net, g.net, f.dnet, g.dnet
    rf, rg = f.witness.remainder.net, g.witness.remainder.net
    if all(x.symbolic for x in (F, G, dF, dG, rf, rg)):
        net = FunctionNet(nl.div(F.body, G.body), gauge)
        dnet = FunctionNet(nl.div(nl.sub(nl.mul(dF.body, G.body), nl.mul(F.body, dG.body)),
                                  nl.power(G.body, 2)), gauge)
        h = nl.Param("h")
        A = nl.add(dF.body, rf.body)
        B = nl.add(dG.body, rg.body)
        Gs = nl.substitute(G.body, {"z": nl.add(nl.Param("z"), h)})
        rem_body = nl.sub(nl.div(nl.sub(nl.mul(A, G.body), nl.mul(F.body, B)), nl.mul(G.body, Gs)),
                          dnet.body)
        rem = RemainderNet(FunctionNet(rem_body, gauge, ("z", "h")))
    else:
        def ffn(eps, rho, z):
            return F.at(eps, rho, z=z) / G.at(eps, rho, z=z)

        def dfn(eps, rho, z):
            Gz = G.at(eps, rho, z=z)
            return (dF.at(eps, rho, z=z) * Gz - F.at(eps, rho, z=z) * dG.at(eps, rho, z=z)) / Gz**2

        def rfn(eps, rho, z, h):
            Fz, Gz = F.at(eps, rho, z=z), G.at(eps, rho, z=z)
            A = dF.at(eps, rho, z=z) + rf.at(eps, rho, z=z, h=h)
            B = dG.at(eps, rho, z=z) + rg.at(eps, rho, z=z, h=h)
            return (A * Gz - Fz * B) / (Gz * (Gz + h * B)) - dfn(eps, rho, z)

        net = FunctionNet(None, gauge, fn=ffn, rel_err=1e-9)
        dnet = FunctionNet(None, gauge, fn=dfn, rel_err=1e-9)
        rem = RemainderNet(FunctionNet(None, gauge, ("z", "h"), fn=rfn, rel_err=1e-9))
    expected = (f.derivative_at(c) * g(c) - f(c) * g.derivative_at(c)) / (g(c) * g(c))
    # the ladder for the remainder limit starts past the invertibility order of g(z0)
    q = max(1, int(math.ceil(max(0.0, -g(c).order().value))))
    return _assemble(f"({f.name})/({g.name})", net, dnet, rem, ball, _evidence(f, g), expected, N, q=q)


def _ball_probes(ball: SharpBall) -> list[GenNumber]:
    from .basicfn import DIRECTIONS

    c, r, g = ball.center, ball.radius, ball.center.gauge
    return [c] + [c + r * GenNumber(SymbolicNet(d, g), check=False) * frac
                  for d in DIRECTIONS for frac in (Fraction(1, 2), Fraction(1))]


def compose(g: GHF, f: GHF, N: int = DEFAULT_ORDER, q: Fraction | int | None = None,
            check_range: bool = True) -> AlgebraResult:
    """g∘f with remainder r = g'(f)·r_f + (f' + r_f)·r_g(f(z), k), k = h(f' + r_f).

    The composite lives on B_{dρ^q}(z0) (default: the ball of f); the image
    of that ball under f must sit in the domain of g, which is checked on
    probes of the ball.
    """
    c = f.ball.center
    fc = f(c)
    ball = f.ball if q is None else SharpBall(c, GenNumber.d_rho(f.gauge, q))
    if check_range:
        target = g.domain if g.domain is not None else g.ball
        for p in _ball_probes(SharpBall(c, ball.radius, closed=True)):
            v = member(f.net.apply(z=p), target, N)
            if not v.true:
                raise CertificationError(f"f maps a probe of the ball outside the domain of g: {v}")
    gauge = f.gauge
    F, G, dF, dG = f.net, g.net, f.dnet, g.dnet
    rf, rg = f.witness.remainder.net, g.witness.remainder.net
    if all(x.symbolic for x in (F, G, dF, dG, rf, rg)):
        sub = lambda body: nl.substitute(body, {"z": F.body})  # noqa: E731
        net = FunctionNet(sub(G.body), gauge)
        dnet = FunctionNet(nl.mul(sub(dG.body), dF.body), gauge)
        h = nl.Param("h")
        A = nl.add(dF.body, rf.body)
        k = nl.mul(h, A)
        rg_at = nl.substitute(rg.body, {"z": F.body, "h": k})
        rem_body = nl.add(nl.mul(sub(dG.body), rf.body), nl.mul(A, rg_at))
        rem = RemainderNet(FunctionNet(rem_body, gauge, ("z", "h")))
    else:
        def ffn(eps, rho, z):
            return G.at(eps, rho, z=F.at(eps, rho, z=z))

        def dfn(eps, rho, z):
            return dG.at(eps, rho, z=F.at(eps, rho, z=z)) * dF.at(eps, rho, z=z)

        def rfn(eps, rho, z, h):
            Fz = F.at(eps, rho, z=z)
            A = dF.at(eps, rho, z=z) + rf.at(eps, rho, z=z, h=h)
            return dG.at(eps, rho, z=Fz) * (A - dF.at(eps, rho, z=z)) + A * rg.at(eps, rho, z=Fz, h=h * A)

        net = FunctionNet(None, gauge, fn=ffn, rel_err=1e-9)
        dnet = FunctionNet(None, gauge, fn=dfn, rel_err=1e-9)
        rem = RemainderNet(FunctionNet(None, gauge, ("z", "h"), fn=rfn, rel_err=1e-9))
    expected = g.derivative_at(fc) * f.derivative_at(c)
    res = _assemble(f"({g.name})∘({f.name})", net, dnet, rem, ball, _evidence(f, g), expected, N)
    res.ghf.domain = f.domain
    return res


# ---------------------------------------------------------------------------
# Cauchy-Riemann


@dataclass
class PartialDerivativeRecord:
    d1u: GenNumber
    d2u: GenNumber
    d1v: GenNumber
    d2v: GenNumber
    residuals: tuple  # (∂₁u − ∂₂v, ∂₂u + ∂₁v)
    derivative: GenNumber  # ∂₁u + i∂₁v
    method: str

    def verdicts(self, N: int = DEFAULT_ORDER) -> tuple[Verdict, Verdict]:
        return eq(self.residuals[0], 0, N), eq(self.residuals[1], 0, N)


def _richardson(values: list[complex], ratio: float) -> tuple[complex, float]:
    """Extrapolate central differences D(h_k) with h_{k+1} = ratio·h_k."""
    table = list(values)
    err = abs(table[-1] - table[-2]) if len(table) > 1 else math.inf
    p = 2
    while len(table) > 1:
        r = ratio**p
        table = [(table[i + 1] - r * table[i]) / (1 - r) for i in range(len(table) - 1)]
        if len(table) > 1:
            err = min(err, abs(table[-1] - table[-2]))
        p += 2
    return table[0], err


def _partials_at(net: FunctionNet, eps: float, rho: float, z: complex, steps: list[float], ratio: float,
                 use_mp: bool):
    """Central-difference partials ∂₁f and ∂₂f with Richardson extrapolation."""
    out = []
    for direction in (1, 1j):
        ds, noise = [], 0.0
        for h in steps:
            if use_mp:
                zz, hh = nl.Param("z"), nl.Param("h")
                body = net.body
                quot = nl.div(nl.sub(nl.substitute(body, {"z": nl.add(zz, hh)}),
                                     nl.substitute(body, {"z": nl.sub(zz, hh)})),
                              nl.mul(nl.num(2), hh))
                ctx = nl.EvalContext(net.gauge.rho, net._in_index if net.indexsets else None)
                with mpmath.workdps(40):
                    hb = mpmath.mpc(direction) * mpmath.mpf(h)
                v = nl.evaluate_mp(quot, eps, {"z": z, "h": hb}, ctx)
                ds.append(complex(v) * direction)
            else:
                hv = direction * h
                fp = complex(np.asarray(net.at(eps, rho, z=np.array([z + hv]))).ravel()[0])
                fm = complex(np.asarray(net.at(eps, rho, z=np.array([z - hv]))).ravel()[0])
                ds.append((fp - fm) / (2 * hv) * direction)
                # cancellation in f(z+h) − f(z−h), amplified by the extrapolation
                noise = max(noise, 64 * U * (abs(fp) + abs(fm)) / (2 * h))
        val, err = _richardson(ds, ratio)
        out.append((val, err + noise))
    return out


def cre_residual(f, z0: GenNumber, ladder: tuple[int, int] = (2, 6), scale: GenNumber | None = None
                 ) -> PartialDerivativeRecord:
    """The four real partial derivatives at z0 and the two CRE residuals."""
    net = _net_of(f)
    g = net.gauge
    if net.symbolic and nl.is_analytic_in(net.body, "z") and z0.symbolic:
        d = net.derivative("z").apply(z=z0)
        zero = GenNumber.of(0, g)
        i = GenNumber.of(1j, g)
        re = (d + d.conj()) * Fraction(1, 2)
        im = (d - d.conj()) * (i * Fraction(-1, 2))
        # ∂₁f = f', ∂₂f = i·f'
        return PartialDerivativeRecord(re, -im, im, re, (zero, zero), d, "symbolic")
    zv, rho = z0.values(), rho_values(g)
    use_mp = net.symbolic
    if scale is None and isinstance(f, GHF):
        scale = f.ball.radius
    svals = scale.values().real if scale is not None else np.ones(g.grid.count)
    d1, d2, e1, e2 = [], [], [], []
    for i, e in enumerate(g.grid.points):
        if use_mp:
            steps = [float(rho[i]) ** k for k in range(ladder[0], ladder[1] + 1)]
            ratio = float(rho[i])
        else:
            steps = [float(svals[i]) * 2.0**-k for k in range(ladder[0], ladder[1] + 1)]
            ratio = 0.5
        (p1, er1), (p2, er2) = _partials_at(net, e, rho[i], complex(zv[i]), steps, ratio, use_mp)
        d1.append(p1)
        d2.append(p2)
        e1.append(er1)
        e2.append(er2)
    d1, d2 = np.array(d1), np.array(d2)
    err = np.array(e1) + np.array(e2) + 1e-15 * (np.abs(d1) + np.abs(d2))

    def mk(vals, errs):
        s = Samples.from_complex(vals)
        with np.errstate(divide="ignore"):
            return GenNumber(SampledNet(Samples(s.logmag, s.phase, np.log(errs + 1e-300)), g), check=False)

    d1u, d1v, d2u, d2v = d1.real, d1.imag, d2.real, d2.imag
    res1 = d1u - d2v
    res2 = d2u + d1v
    return PartialDerivativeRecord(
        mk(d1u + 0j, err), mk(d2u + 0j, err), mk(d1v + 0j, err), mk(d2v + 0j, err),
        (mk(res1 + 0j, 2 * err), mk(res2 + 0j, 2 * err)), mk(d1, err), "richardson",
    )


# ---------------------------------------------------------------------------
# Goursat and Montel


def conj_real(node: nl.Node) -> nl.Node:
    """Complex conjugate of an expression whose parameters are real."""
    if isinstance(node, nl.Imag):
        return nl.neg(nl.Imag())
    if isinstance(node, (nl.Num, nl.Eps, nl.Rho, nl.Param)):
        return node
    if isinstance(node, nl.Func) and node.name == "conj":
        return node.arg
    kids = [conj_real(c) for c in nl.children(node)]
    if isinstance(node, nl.Neg):
        return nl.Neg(kids[0])
    if isinstance(node, nl.Func):
        return nl.Func(node.name, kids[0])
    if isinstance(node, nl.Pow):
        return nl.Pow(kids[0], node.exp)
    if isinstance(node, nl.Piecewise):
        return nl.Piecewise(node.index, kids[0], kids[1])
    return type(node)(kids[0], kids[1])


def real_imag_parts(F: nl.Node) -> tuple[nl.Node, nl.Node]:
    """u = (F + F̄)/2 and v = (F − F̄)/(2i) for F in real parameters x, y."""
    Fb = conj_real(F)
    u = nl.mul(nl.num(Fraction(1, 2)), nl.add(F, Fb))
    v = nl.mul(nl.mul(nl.num(Fraction(-1, 2)), nl.Imag()), nl.sub(F, Fb))
    return u, v


def _xy_to_z(node: nl.Node) -> nl.Node:
    z = nl.Param("z")
    x = nl.mul(nl.num(Fraction(1, 2)), nl.add(z, nl.func("conj", z)))
    y = nl.mul(nl.mul(nl.num(Fraction(-1, 2)), nl.Imag()), nl.sub(z, nl.func("conj", z)))
    return nl.substitute(node, {"x": x, "y": y})


def cre_identity(u: nl.Node, v: nl.Node, gauge: Gauge) -> Verdict:
    """Whether ∂x u = ∂y v and ∂y u = −∂x v hold identically."""
    ux, uy, vx, vy = nl.diff(u, "x"), nl.diff(u, "y"), nl.diff(v, "x"), nl.diff(v, "y")
    r1 = cn.canon(nl.sub(ux, vy), gauge.poly)
    r2 = cn.canon(nl.add(uy, vx), gauge.poly)
    if r1.is_zero() and r2.is_zero():
        return Verdict(Truth.TRUE, None, "symbolic", "CRE hold identically in x, y")
    # fall back to per-ε numerics at scattered points
    rng = np.random.default_rng(0)
    f1 = nl.compile_numpy(nl.sub(ux, vy), ("x", "y"))
    f2 = nl.compile_numpy(nl.add(uy, vx), ("x", "y"))
    sc = nl.compile_numpy(nl.add(nl.func("abs", ux), nl.func("abs", uy)), ("x", "y"))
    rho = rho_values(gauge)
    worst = 0.0
    for i, e in enumerate(gauge.grid.points):
        x, y = rng.normal(size=16) * rho[i], rng.normal(size=16) * rho[i]
        a, b, s = f1(e, rho[i], x + 0j, y + 0j), f2(e, rho[i], x + 0j, y + 0j), sc(e, rho[i], x + 0j, y + 0j)
        worst = max(worst, float(np.max((np.abs(a) + np.abs(b)) / (np.abs(s) + 1e-300))))
    ok = worst < 1e-9
    return Verdict(Truth.TRUE if ok else Truth.FALSE, None, "sampled", f"max relative CRE defect {worst:.3g}")


def goursat_certify(u: nl.Node | str, v: nl.Node | str, gauge: Gauge, z: GenNumber, q=1,
                    domain: InternalSet | None = None, N: int = DEFAULT_ORDER, name: str = "") -> GHF:
    """f = u + iv from nets with continuous partials that satisfy the CRE per ε."""
    if isinstance(u, str):
        u = nl.parse(u, ("x", "y"))
    if isinstance(v, str):
        v = nl.parse(v, ("x", "y"))
    cre = cre_identity(u, v, gauge)
    if not cre.true:
        raise CertificationError(f"CRE fail: {cre}")
    body = _xy_to_z(nl.add(u, nl.mul(nl.Imag(), v)))
    dbody = _xy_to_z(nl.sub(nl.diff(u, "x"), nl.mul(nl.Imag(), nl.diff(u, "y"))))
    net = FunctionNet(body, gauge)
    dnet = FunctionNet(dbody, gauge)
    radius = GenNumber.d_rho(gauge, q)
    ball = SharpBall(z, radius)
    checks = {"cre": cre}
    if domain is not None:
        vb = ball_in_strongly_internal(SharpBall(z, radius, closed=True), domain, N)
        checks["ball_in_domain"] = vb
        if not vb.true:
            raise CertificationError(f"ball not inside the domain: {vb}")
    rem = synthesize_remainder(net, dnet)
    lo = strong_little_oh(net, [z], dnet, rem, q=2, N=N, radius=radius * Fraction(1, 4))
    w = DiffWitness(dnet.apply(z=z), rem, lo.verdict)
    return GHF(BasicFunction(net, ball), ball, "goursat", dnet, w, name or "u+iv", checks)


def montel_certify(u: nl.Node | str, v: nl.Node | str, gauge: Gauge, M: GenNumber, ball: SharpBall,
                   N: int = DEFAULT_ORDER, name: str = "") -> GHF:
    """f = u + iv with ε-wise CRE and |f| < M on probes of the closed ball."""
    if isinstance(u, str):
        u = nl.parse(u, ("x", "y"))
    if isinstance(v, str):
        v = nl.parse(v, ("x", "y"))
    cre = cre_identity(u, v, gauge)
    if not cre.true:
        raise CertificationError(f"CRE fail: {cre}")
    net = FunctionNet(_xy_to_z(nl.add(u, nl.mul(nl.Imag(), v))), gauge)
    dnet = FunctionNet(_xy_to_z(nl.sub(nl.diff(u, "x"), nl.mul(nl.Imag(), nl.diff(u, "y")))), gauge)
    c, r = ball.center, ball.radius
    pts = _ball_probes(ball)
    bound = v_and(*[lt(abs(net.apply(z=p)), M, N) for p in pts])
    if not bound.true:
        raise CertificationError(f"bound violated at a probe: {bound}")
    rem = synthesize_remainder(net, dnet)
    lo = strong_little_oh(net, [c], dnet, rem, q=1, N=N, radius=r * Fraction(1, 4))
    w = DiffWitness(dnet.apply(z=c), rem, lo.verdict)
    return GHF(BasicFunction(net, ball), SharpBall(c, r), "montel", dnet, w, name or "u+iv",
               {"cre": cre, "bound": bound})
