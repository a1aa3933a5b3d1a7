"""Basic functions f(z) = [f_ε(z_ε)], Lipschitz certificates and sharp limits.

A :class:`FunctionNet` is either a netlang body in the parameters ``z``
(and possibly ``h``), which allows exact symbolic substitution of probes,
or a vectorized callable ``fn(eps, rho, **params)`` for nets that are only
available numerically (quadratures, convolutions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from . import canonical as cn
from . import netlang as nl
from .scalars import (
    DEFAULT_ORDER,
    GenNumber,
    Gauge,
    IndexSet,
    NotModerateError,
    SampledNet,
    Samples,
    SymbolicNet,
    Truth,
    Verdict,
    agree_to_order,
    eq,
    lt,
    v_and,
)
from .sets import InternalSet, SharpBall, member

ARITH_REL_TOL = 1e-12

# exact unit directions used for probe angles
DIRECTIONS = [
    nl.ONE,
    nl.Imag(),
    nl.num(-1),
    nl.neg(nl.Imag()),
    nl.parse("3/5 + 4/5*i"),
    nl.parse("-5/13 + 12/13*i"),
    nl.parse("-8/17 - 15/17*i"),
    nl.parse("7/25 - 24/25*i"),
]


def rho_values(gauge: Gauge) -> np.ndarray:
    return np.exp(gauge.log_rho)


class FunctionNet:
    """A net of functions ε ↦ f_ε in named complex parameters."""

    def __init__(
        self,
        body: nl.Node | str | None,
        gauge: Gauge,
        params: tuple[str, ...] = ("z",),
        indexsets: Mapping[str, IndexSet] | None = None,
        fn: Callable | None = None,
        rel_err: float = 1e-13,
        name: str = "",
    ):
        if body is None and fn is None:
            raise ValueError("a function net needs a body or a callable")
        if isinstance(body, str):
            body = nl.parse(body, params)
        self.body = body
        self.gauge = gauge
        self.params = tuple(params)
        self.indexsets = dict(indexsets or {})
        self.fn = fn
        self.rel_err = rel_err
        self.name = name or (nl.to_text(body) if body is not None else "net")
        if body is not None:
            extra = nl.free_params(body) - set(self.params)
            if extra:
                raise nl.UnknownIdentifierError(sorted(extra)[0], 1, 1)
            self._compiled = nl.compile_numpy(body, self.params)
        else:
            self._compiled = None

    @property
    def symbolic(self) -> bool:
        return self.body is not None

    def _in_index(self, name, eps):
        if name in self.indexsets:
            return self.indexsets[name].contains(eps)
        return not self.indexsets[name[:-2]].contains(eps)

    def at(self, eps: float, rho: float | None = None, **kw):
        """Numeric f_ε at complex arguments (scalars or arrays)."""
        if rho is None:
            rho = float(np.exp(self.gauge.log_rho[self.gauge.grid.index_of(eps)])) \
                if eps in set(self.gauge.grid.points) else float(
                    nl.evaluate(self.gauge.rho, eps, form="complex").real)
        if self.fn is not None:
            return self.fn(eps, rho, **kw)
        args = [np.asarray(kw[p], dtype=complex) for p in self.params]
        out = self._compiled(eps, rho, *args, in_index=self._in_index)
        return out

    def apply(self, **args: GenNumber) -> GenNumber:
        """The generalized value [f_ε(args_ε)]."""
        if self.symbolic and all(a.symbolic for a in args.values()):
            mapping = {k: v.expr for k, v in args.items()}
            idx = dict(self.indexsets)
            for v in args.values():
                idx.update(v.rep.indexsets)
            node = nl.substitute(self.body, mapping)
            return GenNumber(SymbolicNet(node, self.gauge, idx), check=False)
        if self.symbolic:
            return self._apply_mp(args)
        vals = {k: v.values() for k, v in args.items()}
        rho = rho_values(self.gauge)
        out = np.array([
            complex(np.ravel(self.at(e, r, **{k: vals[k][i] for k in vals}))[0])
            for i, (e, r) in enumerate(zip(self.gauge.grid.points, rho))
        ])
        restrict_to = next((a.restrict_to for a in args.values() if a.restrict_to is not None), None)
        return GenNumber(SampledNet.from_values(out, self.gauge, self.rel_err), restrict_to=restrict_to, check=False)

    def _apply_mp(self, args: Mapping[str, GenNumber]) -> GenNumber:
        vals = {k: v.values() for k, v in args.items()}
        ctx = nl.EvalContext(self.gauge.rho, self._in_index if self.indexsets else None)
        out = []
        for i, e in enumerate(self.gauge.grid.points):
            b = {k: complex(vals[k][i]) for k in vals}
            out.append(complex(nl.evaluate(self.body, e, b, ctx, form="complex")))
        return GenNumber(SampledNet.from_values(np.array(out), self.gauge, 1e-15), check=False)

    def derivative(self, name: str = "z") -> "FunctionNet":
        if not self.symbolic:
            raise nl.NotAnalyticError("closed-form derivative needs a symbolic body")
        return FunctionNet(nl.diff(self.body, name), self.gauge, self.params, self.indexsets)

    def fix(self, **values: nl.Node) -> "FunctionNet":
        """Substitute some parameters by expressions, keeping the rest free."""
        rest = tuple(p for p in self.params if p not in values)
        if self.symbolic:
            return FunctionNet(nl.substitute(self.body, values), self.gauge, rest, self.indexsets)
        raise TypeError("only symbolic nets can be partially applied")


@dataclass
class BasicFunction:
    net: FunctionNet
    domain: InternalSet | SharpBall | None = None
    well_defined: Verdict | None = field(default=None, repr=False)

    @property
    def gauge(self) -> Gauge:
        return self.net.gauge

    def __call__(self, z: GenNumber) -> GenNumber:
        return evaluate(self, z)


class OutsideDomainError(ValueError):
    pass


def evaluate(f: BasicFunction, z: GenNumber, N: int = DEFAULT_ORDER, check_domain: bool = True) -> GenNumber:
    """f(z) = [f_ε(z_ε)]."""
    if check_domain and f.domain is not None:
        v = member(z, f.domain, N)
        if not v.true:
            raise OutsideDomainError(f"probe not in the domain: {v}")
    val = f.net.apply(**{f.net.params[0]: z})
    o = val.order()
    if o.value == -math.inf:
        raise NotModerateError(f"value net is not moderate (order {o.value}, {o.detail})")
    return val


def check_well_defined(f: BasicFunction, z: GenNumber, N: int = DEFAULT_ORDER, extra: int = 2) -> Verdict:
    """Spot-check representative independence at a probe.

    The probe is moved by ρ^M and ρ^(2M), M = N + extra. The check passes if
    the value already agrees at order N, or if its change shrinks at the
    rate of the perturbation: a moderate response, so negligible
    perturbations give negligible changes.
    """
    g = f.gauge
    base = evaluate(f, z, N, check_domain=False)
    M = N + extra
    verdicts = []
    for d in DIRECTIONS[:3]:
        def moved(k):
            pert = GenNumber(SymbolicNet(nl.mul(d, nl.power(nl.Rho(), k)), g), check=False)
            return evaluate(f, z + pert, N, check_domain=False) - base

        try:
            near = agree_to_order(moved(M) + base, base, N)
        except NotModerateError as exc:
            verdicts.append(Verdict(Truth.FALSE, N, "symbolic", f"perturbed value is not moderate: {exc}"))
            continue
        if near.true:
            verdicts.append(near)
            continue
        o1, o2 = moved(M).order(), moved(2 * M).order()
        if o1.value == -math.inf or o2.value == -math.inf:
            verdicts.append(Verdict(Truth.FALSE, N, "sampled", "value change is not moderate"))
            continue
        gain = o2.value - o1.value
        slack = (o1.ci or 0) + (o2.ci or 0)
        exact = o1.exact and o2.exact
        ok = gain >= 0.9 * M - slack
        verdicts.append(Verdict(Truth.TRUE if ok else Truth.FALSE, N, "symbolic" if exact else "sampled",
                                f"change of order {o1.value:.3g} at ρ^{M}, {o2.value:.3g} at ρ^{2 * M}"))
    out = v_and(*verdicts)
    f.well_defined = out
    return out


# ---------------------------------------------------------------------------
# Lipschitz certificates


@dataclass
class LipschitzResult:
    L: GenNumber
    Q: int
    verdict: Verdict


def lipschitz_certify(
    f: BasicFunction,
    z0: GenNumber,
    Q: int | None = None,
    max_Q: int = 6,
    n_boundary: int = 512,
    n_pairs: int = 400,
    seed: int = 0,
    slack: float = 1.05,
) -> LipschitzResult:
    """A moderate L_ε with f_ε L_ε-Lipschitz on the disk E_{ρ_ε^Q}(z0_ε)."""
    Qs = [Q] if Q is not None else list(range(0, max_Q + 1))
    last = None
    for q in Qs:
        res = _lipschitz_at(f, z0, q, n_boundary, n_pairs, seed, slack)
        if res.verdict.true:
            return res
        last = res
    return last


def _lipschitz_at(f, z0, Q, n_boundary, n_pairs, seed, slack) -> LipschitzResult:
    g = f.gauge
    rng = np.random.default_rng(seed)
    z0v = z0.values()
    rho = rho_values(g)
    radius = rho**Q
    analytic = f.net.symbolic and nl.is_analytic_in(f.net.body, f.net.params[0])
    dnet = f.net.derivative(f.net.params[0]) if analytic else None
    name = f.net.params[0]
    Ls = []
    violations = []
    with np.errstate(all="ignore"):
        for i, e in enumerate(g.grid.points):
            c, r = z0v[i], radius[i]
            if dnet is not None:
                # maximum modulus: the sup of |f'| over the disk is on its boundary
                w = c + r * np.exp(2j * np.pi * np.arange(n_boundary) / n_boundary)
                L = float(np.max(np.abs(dnet.at(e, rho[i], **{name: w})))) * slack
            else:
                a = c + r * np.sqrt(rng.random(n_pairs)) * np.exp(2j * np.pi * rng.random(n_pairs))
                b = c + r * np.sqrt(rng.random(n_pairs)) * np.exp(2j * np.pi * rng.random(n_pairs))
                fa, fb = f.net.at(e, rho[i], **{name: a}), f.net.at(e, rho[i], **{name: b})
                L = float(np.max(np.abs(fa - fb) / np.abs(a - b))) * 1.5
            Ls.append(L)
            # independent ε-wise check of the Lipschitz inequality on random pairs
            a = c + r * np.sqrt(rng.random(64)) * np.exp(2j * np.pi * rng.random(64))
            b = c + r * np.sqrt(rng.random(64)) * np.exp(2j * np.pi * rng.random(64))
            fa, fb = f.net.at(e, rho[i], **{name: a}), f.net.at(e, rho[i], **{name: b})
            gap = np.abs(fa - fb) - L * np.abs(a - b)
            if np.any(gap > 1e-9 * (np.abs(fa) + np.abs(fb) + 1e-300)):
                violations.append(float(e))
    Ls = np.array(Ls)
    if not np.all(np.isfinite(Ls)):
        L = GenNumber(SampledNet.from_values(np.where(np.isfinite(Ls), Ls, 0.0), g), "real", check=False)
        return LipschitzResult(L, Q, Verdict(Truth.FALSE, None, "sampled", f"Lipschitz bound overflows at Q={Q}"))
    L = GenNumber(SampledNet.from_values(Ls, g, 1e-6), "real", check=False)
    o = L.order()
    if o.value == -math.inf:
        return LipschitzResult(L, Q, Verdict(Truth.FALSE, None, "sampled", f"L is not moderate at Q={Q}"))
    if violations:
        return LipschitzResult(L, Q, Verdict(Truth.FALSE, None, "sampled", f"inequality fails at eps={violations[0]:.3g}"))
    how = "sup of |f'| on the boundary circle" if dnet is not None else "pairwise difference quotients"
    return LipschitzResult(L, Q, Verdict(Truth.TRUE, None, "sampled", f"Q={Q}, L order {o.value:.3g} ({how})"))


# ---------------------------------------------------------------------------
# sharp limits


Oracle = Callable[[GenNumber], GenNumber]


def as_oracle(R, name: str | None = None) -> Oracle:
    if isinstance(R, BasicFunction):
        R = R.net
    if isinstance(R, FunctionNet):
        key = name or R.params[0]
        return lambda h: R.apply(**{key: h})
    return R


def probe_ladder(z0: GenNumber, k: int, count: int = 4, seed: int = 0) -> list[GenNumber]:
    """Probes z0 + c·dρ^j·u with 0 < |probe − z0| < dρ^k."""
    g = z0.gauge
    rng = np.random.default_rng(seed + 7919 * k)
    dirs = [DIRECTIONS[i] for i in rng.choice(len(DIRECTIONS), size=count, replace=False)]
    out = []
    for j, d in zip((0, 1, 2, 3), dirs):
        c = nl.num(Fraction(1, 2)) if j == 0 else nl.ONE
        h = nl.mul(c, nl.mul(d, nl.power(nl.Rho(), k + j)))
        out.append(GenNumber(SymbolicNet(h, g), check=False))
    A = IndexSet.alternating("ladderA", g.grid)
    pw = nl.Piecewise("ladderA", nl.power(nl.Rho(), k + 1), nl.power(nl.Rho(), k + 2))
    out.append(GenNumber(SymbolicNet(pw, g, {"ladderA": A}), check=False))
    return [z0 + p for p in out]


@dataclass
class LimitResult:
    verdict: Verdict
    witnesses: dict = field(default_factory=dict)  # q' -> k with H = dρ^k
    counterexample: GenNumber | None = None


def sharp_limit(
    R,
    z0: GenNumber,
    lam: GenNumber,
    q: int = 3,
    k_max: int | None = None,
    seed: int = 0,
    N: int = DEFAULT_ORDER,
) -> LimitResult:
    """Check that R(h) → λ in the sharp topology up to accuracy dρ^q."""
    oracle = as_oracle(R)
    g = z0.gauge
    k_max = k_max if k_max is not None else q + 6
    witnesses = {}
    k = 0
    for qq in range(q + 1):
        eps_ball = GenNumber.d_rho(g, qq)
        bad = None
        while k <= k_max:
            ok = True
            for h in probe_ladder(z0, k, seed=seed):
                v = lt(abs(oracle(h) - lam), eps_ball, N)
                if not v.true:
                    ok = False
                    bad = (h, v)
                    break
            if ok:
                witnesses[qq] = k
                break
            k += 1
        if qq not in witnesses:
            h, v = bad
            value = Truth.FALSE if v.false else Truth.UNDECIDABLE
            return LimitResult(Verdict(value, N, v.method, f"no radius dρ^k, k ≤ {k_max}, for accuracy dρ^{qq}: {v.detail}"),
                               witnesses, h)
    return LimitResult(Verdict(Truth.TRUE, N, "symbolic", f"witness radii H_q = dρ^k: {witnesses}"), witnesses)


def limit_unique(R, z0: GenNumber, lam1: GenNumber, lam2: GenNumber, q: int = 3, N: int = DEFAULT_ORDER) -> Verdict:
    """If both candidates pass as limits they must be equal."""
    r1 = sharp_limit(R, z0, lam1, q, N=N)
    r2 = sharp_limit(R, z0, lam2, q, N=N)
    if r1.verdict.true and r2.verdict.true:
        return eq(lam1, lam2, N)
    return Verdict(Truth.TRUE, N, "symbolic", "at most one candidate is a limit")


# ---------------------------------------------------------------------------
# little-oh


def weak_little_oh(f1, f2, q: int = 3, seed: int = 0, N: int = DEFAULT_ORDER) -> LimitResult:
    """f1(h) = f2(h)·r(h) with r(h) → 0, using r = f1/f2 on invertible probes."""
    o1, o2 = as_oracle(f1), as_oracle(f2)

    def ratio(h: GenNumber) -> GenNumber:
        return o1(h) / o2(h)

    g = f1.gauge if hasattr(f1, "gauge") else f2.gauge
    zero = GenNumber.of(0, g)
    try:
        return sharp_limit(ratio, zero, zero, q, seed=seed, N=N)
    except ValueError as exc:
        return LimitResult(Verdict(Truth.UNDECIDABLE, N, "sampled", f"divisor not invertible on probes: {exc}"))


def indicator_infinitesimal(h: GenNumber) -> GenNumber:
    """The probe-level indicator i(h) = 1 for infinitesimal h, else 0."""
    from .scalars import classify

    flag = classify(h).infinitesimal
    if flag is Truth.UNDECIDABLE:
        raise ValueError("cannot decide whether the probe is infinitesimal")
    return GenNumber.of(1 if flag is Truth.TRUE else 0, h.gauge)


@dataclass
class RemainderNet:
    """r_ε(z, h), optionally defined as 0 at h = 0."""

    net: FunctionNet
    zero_at_zero: bool = True


def synthesize_remainder(f: FunctionNet, m: FunctionNet | None) -> RemainderNet:
    """r = (f(z+h) − f(z) − h·m(z)) / h from a closed-form body."""
    z, h = nl.Param("z"), nl.Param("h")
    shifted = nl.substitute(f.body, {"z": nl.add(z, h)})
    num = nl.sub(shifted, f.body)
    if m is not None:
        num = nl.sub(num, nl.mul(h, m.body))
        body = nl.div(num, h)
    else:
        body = num
    try:
        simple = cn.to_node(cn.canon(body, f.gauge.poly))
        if sum(1 for _ in nl.walk(simple)) <= sum(1 for _ in nl.walk(body)):
            body = simple
    except (ZeroDivisionError, ValueError):
        pass
    return RemainderNet(FunctionNet(body, f.gauge, ("z", "h"), f.indexsets), True)


def _remainder_at(net: FunctionNet, eps: float, rho: float, z: complex, hs: np.ndarray) -> np.ndarray:
    """r_ε(z, h) for small h; closed forms go through the exact evaluator to avoid cancellation."""
    if not net.symbolic:
        return np.asarray(net.at(eps, rho, z=np.full_like(hs, z), h=hs))
    ctx = nl.EvalContext(net.gauge.rho, net._in_index if net.indexsets else None)
    out = []
    for h in hs:
        try:
            out.append(complex(nl.evaluate(net.body, eps, {"z": complex(z), "h": complex(h)}, ctx, form="complex")))
        except (nl.EvaluationDomainError, ZeroDivisionError, OverflowError):
            out.append(complex(math.nan))
    return np.array(out)


@dataclass
class StrongLittleOhResult:
    verdict: Verdict
    identity: Verdict
    zero_at_zero: Verdict
    eps_limit: Verdict
    sharp: Verdict


def strong_little_oh(
    f: BasicFunction | FunctionNet,
    probes: list[GenNumber],
    m: FunctionNet | None,
    r: RemainderNet | None = None,
    q: int = 2,
    seed: int = 0,
    N: int = DEFAULT_ORDER,
    radius: GenNumber | None = None,
) -> StrongLittleOhResult:
    """Check f_ε(z+h) = f_ε(z) + h·m_ε(z) + h·r_ε(z,h) with r → 0 both ε-wise and sharply.

    With m None the continuity form f_ε(z+h) = f_ε(z) + r_ε(z,h) is checked.
    Random increments are scaled by radius (default 1).
    """
    fn = f.net if isinstance(f, BasicFunction) else f
    g = fn.gauge
    if r is None:
        r = synthesize_remainder(fn, m)
    rng = np.random.default_rng(seed)
    rho = rho_values(g)
    pts = g.grid.points
    hscale = np.abs(radius.values()) if radius is not None else np.ones(len(pts))

    # exact ε-wise identity at random increments
    worst, where = 0.0, None
    for z in probes:
        zv = z.values()
        for i, e in enumerate(pts):
            hs = hscale[i] * rho[i] ** rng.integers(0, 4, 6) * np.exp(2j * np.pi * rng.random(6)) * rng.random(6)
            hs = hs[np.abs(hs) > 0]
            with np.errstate(all="ignore"):
                fzh = fn.at(e, rho[i], z=zv[i] + hs)
                fz = fn.at(e, rho[i], z=np.full_like(hs, zv[i]))
                rv = r.net.at(e, rho[i], z=np.full_like(hs, zv[i]), h=hs)
                lin = hs * m.at(e, rho[i], z=np.full_like(hs, zv[i])) if m is not None else 0
                rest = hs * rv if m is not None else rv
                resid = np.abs(fzh - fz - lin - rest)
                scale = np.abs(fzh) + np.abs(fz) + np.abs(lin) + np.abs(rest)
                rel = np.max(np.where(scale > 0, resid / scale, resid))
            if not np.isfinite(rel) or rel > worst:
                worst, where = (rel if np.isfinite(rel) else math.inf), (z, e)
    identity = Verdict(
        Truth.TRUE if worst <= ARITH_REL_TOL else Truth.FALSE, None, "sampled",
        f"max relative residual {worst:.3g}" + ("" if worst <= ARITH_REL_TOL else f" at eps={where[1]:.3g}"))

    # r(z, 0) = 0
    zero_ok = True
    if r.net.symbolic:
        for z in probes:
            node = nl.substitute(r.net.body, {"h": nl.ZERO})
            try:
                val = FunctionNet(node, g, ("z",), r.net.indexsets).apply(z=z)
                zero_ok &= eq(val, 0, N).true
            except (nl.EvaluationDomainError, ZeroDivisionError, ValueError):
                # 0/0 at h = 0: the remainder is defined to vanish there
                zero_ok &= r.zero_at_zero
    zero = Verdict(Truth.TRUE if zero_ok else Truth.FALSE, N, "symbolic", "r(z, 0) = 0")

    # ε-wise limit h → 0
    lim_ok, lim_detail = True, "ε-wise r(z, h) → 0"
    for z in probes:
        zv = z.values()
        for i, e in enumerate(pts[-6:]):
            idx = len(pts) - 6 + i
            hs = min(rho[idx], hscale[idx]) * 2.0 ** -np.arange(2, 18, 2) * np.exp(0.7j)
            with np.errstate(all="ignore"):
                rv = np.abs(_remainder_at(r.net, e, rho[idx], zv[idx], hs))
                scale = np.abs(fn.at(e, rho[idx], z=np.array([zv[idx]])))[0] + 1.0
            if not np.all(np.isfinite(rv)):
                lim_ok, lim_detail = False, f"r is not finite near h = 0 at eps={e:.3g}"
                break
            if np.all(rv <= 1e-12 * scale):
                continue
            slope = np.polyfit(np.log(np.abs(hs)), np.log(np.maximum(rv, 1e-300)), 1)[0]
            if slope < 0.5:
                lim_ok, lim_detail = False, f"r does not tend to 0 at eps={e:.3g} (log-log slope {slope:.2g})"
                break
    eps_limit = Verdict(Truth.TRUE if lim_ok else Truth.FALSE, None, "sampled", lim_detail)

    # sharp limit of r at h → 0 for every probe z
    sharp_vs = []
    zero_g = GenNumber.of(0, g)
    for z in probes:
        if r.net.symbolic and z.symbolic:
            rz = FunctionNet(nl.substitute(r.net.body, {"z": z.expr}), g, ("h",), {**r.net.indexsets, **z.rep.indexsets})
            oracle = as_oracle(rz)
        else:
            zz = z

            def oracle(h, zz=zz):
                return r.net.apply(z=zz, h=h)
        sharp_vs.append(sharp_limit(oracle, zero_g, zero_g, q, seed=seed, N=N).verdict)
    sharp = v_and(*sharp_vs)
    total = v_and(identity, zero, eps_limit, sharp)
    return StrongLittleOhResult(total, identity, zero, eps_limit, sharp)
