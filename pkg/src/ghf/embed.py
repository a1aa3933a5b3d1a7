"""Mollifiers, the embedding of compactly supported distributions, and j(f).

A mollifier carries two faces.  The entire closed form μ(z) is used where a
holomorphic net is wanted (Dirac terms, Taylor tables, the 1-D link); its
ℝ²-integrable partner is used inside convolution integrals, since a nonzero
function holomorphic in z = x + iy is never integrable over the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import hermite
from scipy import integrate, special

from . import netlang as nl
from .basicfn import FunctionNet, rho_values
from .holo import (
    GHF,
    CertificationError,
    PartialDerivativeRecord,
    cauchy_derivative,
    certify_eps_diff,
    cre_residual,
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
    leq,
    v_and,
)

INV_PI = "0.3183098861837907"
QUAD_REL_TOL = 1e-8


class QuadratureFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# mollifiers


def _hermite_factor(t: np.ndarray, n: int) -> np.ndarray:
    """d^n/dt^n e^{-t²} = (−1)^n H_n(t) e^{-t²}."""
    c = np.zeros(n + 1)
    c[n] = 1.0
    return (-1) ** n * hermite.hermval(t, c) * np.exp(-t * t)


def _gauss_plane(x, y, a=0, b=0):
    return _hermite_factor(x, a) * _hermite_factor(y, b) / math.pi


def _sinc2(t):
    return np.sinc(t / math.pi) ** 2


_XI, _XW = np.polynomial.legendre.leggauss(160)
_BETA = np.exp(1.0 - 1.0 / (1.0 - _XI**2))


def bump_inverse_fourier(x, n: int = 0):
    """n-th derivative of (1/2π)∫ β(ξ) e^{ixξ} dξ, β(ξ) = exp(1 − 1/(1−ξ²)) on (−1, 1)."""
    x = np.asarray(x, dtype=complex)
    w = _XW * (1j * _XI) ** n * _BETA / (2 * math.pi)
    return np.exp(1j * x[..., None] * _XI) @ w


def _bump_plane(x, y, a=0, b=0):
    return bump_inverse_fourier(x, a) * bump_inverse_fourier(y, b)


def _fejer_plane(x, y, a=0, b=0):
    if a or b:
        raise NotImplementedError("fejer partner derivatives are not tabulated")
    return _sinc2(x) * _sinc2(y) / math.pi**2


@dataclass(frozen=True)
class Mollifier:
    name: str
    analyticity: str  # "one-variable-analytic" | "two-variable-real-analytic"
    body: nl.Node | None  # closed form in z, entire
    plane: Callable  # (x, y, a, b) ↦ ∂x^a ∂y^b of the ℝ²-integrable face
    support: float | None  # half-width beyond which the plane face is < 1e-16·max
    taylor: tuple  # μ^(n)(0)/n! along the real axis, as netlang nodes
    normalization: str
    line_integral: float  # ∫_ℝ μ(x) dx
    partner: str | None = None
    entire: Callable | None = None  # numeric μ^(n)(z) when no closed form exists

    def derivative_body(self, n: int) -> nl.Node:
        node = self.body
        for _ in range(n):
            node = nl.diff(node, "z")
        return node

    def taylor_coefficient(self, n: int) -> nl.Node:
        if n < len(self.taylor):
            return self.taylor[n]
        raise IndexError(f"{self.name}: Taylor table ends at n = {len(self.taylor) - 1}")

    def with_taylor(self, **changes) -> "Mollifier":
        """A copy with some Taylor coefficients replaced, e.g. n2="0.1"."""
        table = list(self.taylor)
        for k, v in changes.items():
            table[int(k[1:])] = nl.parse(v) if isinstance(v, str) else nl.num(Fraction(v))
        return replace(self, name=self.name + "*", taylor=tuple(table))


def _gauss_taylor(n_max=24):
    out = []
    for n in range(n_max + 1):
        if n % 2:
            out.append(nl.num(0))
        else:
            m = n // 2
            out.append(nl.parse(f"{(-1) ** m}/{math.factorial(m)}*{INV_PI}"))
    return tuple(out)


def _fejer_taylor(n_max=24):
    out = []
    for n in range(n_max + 1):
        if n % 2:
            out.append(nl.num(0))
        else:
            m = n // 2
            c = Fraction((-1) ** m * 2 ** (2 * m + 1), math.factorial(2 * m + 2))
            out.append(nl.mul(nl.num(c), nl.parse(f"{INV_PI}^2")))
    return tuple(out)


def _bump_taylor(n_max=24):
    phi0 = float(bump_inverse_fourier(0.0).real)
    out = []
    for n in range(n_max + 1):
        d = complex(bump_inverse_fourier(0.0, n))
        out.append(nl.num(Fraction(d.real * phi0 / math.factorial(n))))
    return tuple(out)


def _registry() -> dict[str, Mollifier]:
    gauss_taylor = _gauss_taylor()
    return {
        "gauss-entire": Mollifier(
            "gauss-entire", "one-variable-analytic", nl.parse(f"exp(-z^2)*{INV_PI}", ("z",)), _gauss_plane, 6.5,
            gauss_taylor, "closed form through the partner e^{-|w|²}/π", 1 / math.sqrt(math.pi), "gauss-plane"),
        "gauss-plane": Mollifier(
            "gauss-plane", "two-variable-real-analytic", None, _gauss_plane, 6.5, gauss_taylor,
            "closed form: ∫ e^{-x²-y²}/π = 1", 1 / math.sqrt(math.pi)),
        "fejer": Mollifier(
            "fejer", "one-variable-analytic", nl.parse(f"(sin(z)/z)^2*{INV_PI}^2", ("z",)), _fejer_plane, None,
            _fejer_taylor(), "closed form through the partner sinc²(x)sinc²(y)/π²", 1 / math.pi, "fejer-plane"),
        "bump-product": Mollifier(
            "bump-product", "two-variable-real-analytic", None, _bump_plane, None, _bump_taylor(),
            "Fourier inversion: ∫ F⁻¹(β) = β(0) = 1 per factor", float(bump_inverse_fourier(0.0).real),
            entire=lambda z, n=0: bump_inverse_fourier(z, n) * bump_inverse_fourier(0.0)),
    }


_MOLLIFIERS: dict[str, Mollifier] | None = None


def mollifier(name: str = "gauss-entire") -> Mollifier:
    global _MOLLIFIERS
    if _MOLLIFIERS is None:
        _MOLLIFIERS = _registry()
    if name not in _MOLLIFIERS:
        raise KeyError(f"unknown mollifier {name!r}; known: {sorted(_MOLLIFIERS)}")
    return _MOLLIFIERS[name]


def mollifier_names() -> list[str]:
    mollifier()
    return sorted(_MOLLIFIERS)


def support_of(mu: Mollifier) -> float:
    if mu.support is not None:
        return mu.support
    raise QuadratureFailure(f"{mu.name} decays too slowly for a truncated convolution")


def normalization_check(mu: Mollifier) -> float:
    """|∫_{ℝ²} μ − 1| by product quadrature of the integrable face."""
    if mu.name == "fejer":
        # ∫_ℝ sinc² period by period up to L = Kπ, plus the tail ∫_L^∞ ≈ 1/(2L)
        K = 4000
        t, w = np.polynomial.legendre.leggauss(32)
        starts = np.arange(K) * math.pi
        nodes = (starts[:, None] + (t + 1) * math.pi / 2).ravel()
        half = np.sum(np.tile(w * math.pi / 2, K) * _sinc2(nodes)) + 1 / (2 * K * math.pi)
        one = 2 * half / math.pi
        return abs(one * one - 1)
    if mu.name == "bump-product":
        # ∫ F⁻¹(β) = β(0) per factor; the slow decay rules out a truncated quadrature
        beta0 = float(np.exp(1.0 - 1.0 / (1.0 - 0.0)))
        return abs(beta0 * beta0 - 1)
    W = support_of(mu)
    val, _ = _quad2d(lambda x, y: mu.plane(x, y), -W, W, -W, W, 1e-12)
    return abs(val - 1)


def approx_identity(mu: Mollifier, gauge: Gauge) -> FunctionNet:
    """μ_ε(z) = ρ_ε⁻²·μ(z/ρ_ε)."""
    if mu.body is not None:
        body = nl.mul(nl.power(nl.Rho(), -2), nl.substitute(mu.body, {"z": nl.div(nl.Param("z"), nl.Rho())}))
        return FunctionNet(body, gauge, name=f"{mu.name}_eps")

    def fn(eps, rho, z):
        w = np.asarray(z, dtype=complex) / rho
        return mu.plane(w.real, w.imag) / rho**2

    return FunctionNet(None, gauge, fn=fn, name=f"{mu.name}_eps")


# ---------------------------------------------------------------------------
# quadrature


_GL = np.polynomial.legendre.leggauss(16)


def _panel_nodes(a, b, n):
    t, w = _GL
    edges = np.linspace(a, b, n + 1)
    mid, half = (edges[:-1] + edges[1:]) / 2, (edges[1:] - edges[:-1]) / 2
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * w).ravel()


def _quad2d(F, x0, x1, y0, y1, tol=QUAD_REL_TOL, start=2, max_panels=64):
    """Tensor Gauss–Legendre with panel doubling.

    Returns (integral, absolute error estimate).  The tolerance is relative
    to ∫|F|, so integrals with cancellation are resolved in absolute terms.
    """

    def rule(n):
        xs, wx = _panel_nodes(x0, x1, n)
        ys, wy = _panel_nodes(y0, y1, n)
        vals = F(xs[:, None], ys[None, :])
        return wx @ vals @ wy, wx @ np.abs(vals) @ wy

    n = start
    prev, _ = rule(n)
    while True:
        cur, mass = rule(2 * n)
        delta = abs(cur - prev)
        floor = 1e-15 * mass
        if delta <= tol * mass + floor:
            return complex(cur), delta + floor
        if not np.isfinite(cur):
            raise QuadratureFailure("integrand is not finite")
        if 2 * n >= max_panels:
            # report the unconverged estimate with its panel-doubling spread as the error bar
            return complex(cur), delta + floor
        n *= 2
        prev = cur


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Term:
    """coeff·∂^α g (g continuous, support radius R) or coeff·∂^α δ_p."""

    alpha: tuple[int, int]
    coeff: complex = 1.0
    g: nl.Node | None = None
    support: float | None = None
    point: complex | None = None

    @property
    def kind(self) -> str:
        return "dirac" if self.g is None else "g"

    def order(self) -> int:
        return sum(self.alpha)


@dataclass(frozen=True)
class CompactDistribution:
    terms: tuple[Term, ...]
    name: str = ""

    def __post_init__(self):
        for t in self.terms:
            if t.kind == "g" and not (t.support and t.support > 0):
                raise ValueError("every g-term needs a positive support radius")

    @staticmethod
    def delta(point: complex = 0, alpha=(0, 0)) -> "CompactDistribution":
        return CompactDistribution((Term(tuple(alpha), 1.0, point=complex(point)),), "δ" if alpha == (0, 0) else
                                   f"∂^{tuple(alpha)}δ")

    @staticmethod
    def function(g: str | nl.Node, support: float, alpha=(0, 0), coeff: complex = 1.0, name="") -> "CompactDistribution":
        if isinstance(g, str):
            g = nl.parse(g, ("x", "y"))
        return CompactDistribution((Term(tuple(alpha), complex(coeff), g, float(support)),), name or nl.to_text(g))

    @staticmethod
    def from_json(spec: dict) -> "CompactDistribution":
        terms = []
        for t in spec["terms"]:
            alpha = tuple(t.get("alpha", (0, 0)))
            coeff = complex(t.get("coeff", 1.0))
            if "dirac" in t:
                terms.append(Term(alpha, coeff, point=complex(t["dirac"])))
            else:
                terms.append(Term(alpha, coeff, nl.parse(t["g"], ("x", "y")), float(t["support"])))
        return CompactDistribution(tuple(terms), spec.get("name", ""))

    def derivative(self, alpha) -> "CompactDistribution":
        a, b = alpha
        return CompactDistribution(tuple(replace(t, alpha=(t.alpha[0] + a, t.alpha[1] + b)) for t in self.terms),
                                   f"∂^{tuple(alpha)}({self.name})")

    def scale(self, c: complex) -> "CompactDistribution":
        return CompactDistribution(tuple(replace(t, coeff=t.coeff * c) for t in self.terms), f"{c}·{self.name}")

    def __add__(self, other: "CompactDistribution") -> "CompactDistribution":
        return CompactDistribution(self.terms + other.terms, f"{self.name}+{other.name}").merged()

    def merged(self) -> "CompactDistribution":
        """Fold g-terms with equal α and support into one term."""
        out: list[Term] = []
        for t in self.terms:
            hit = next((i for i, s in enumerate(out) if s.kind == "g" and t.kind == "g" and s.alpha == t.alpha
                        and s.support == t.support), None)
            if hit is None:
                out.append(t)
                continue
            s = out[hit]
            g = nl.add(nl.mul(_cnode(s.coeff), s.g), nl.mul(_cnode(t.coeff), t.g))
            out[hit] = Term(s.alpha, 1.0, g, s.support)
        return CompactDistribution(tuple(out), self.name)

    def order(self) -> int:
        return max((t.order() + (2 if t.kind == "dirac" else 0)) for t in self.terms)


def _cnode(c: complex) -> nl.Node:
    c = complex(c)
    return nl.add(nl.num(Fraction(c.real)), nl.mul(nl.num(Fraction(c.imag)), nl.Imag()))


def _g_eval(t: Term, g: nl.Node):
    f = nl.compile_numpy(g, ("x", "y"))
    R2 = t.support**2

    def run(x, y):
        inside = (x * x + y * y) < R2
        with np.errstate(all="ignore"):
            v = f(0.0, 0.0, x + 0j, y + 0j)
        return np.where(inside, v, 0)

    return run


def _g_derivative(g: nl.Node, alpha) -> nl.Node | None:
    node = g
    try:
        for _ in range(alpha[0]):
            node = nl.diff(node, "x")
        for _ in range(alpha[1]):
            node = nl.diff(node, "y")
    except nl.NotAnalyticError:
        return None
    return node


def _vanishes_on_boundary(t: Term, g: nl.Node) -> bool:
    f = nl.compile_numpy(g, ("x", "y"))
    th = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    v = f(0.0, 0.0, t.support * np.cos(th) + 0j, t.support * np.sin(th) + 0j)
    return bool(np.all(np.abs(v) < 1e-12))


def _g_term_value(t: Term, mu: Mollifier, eps: float, rho: float, z: complex) -> tuple[complex, float]:
    """∫ (∂^α g)(z − ρw) μ(w) dw, or ∫ g(z − ρw) ρ^{−|α|} ∂^α μ(w) dw when g is too rough."""
    W = support_of(mu)
    x0, y0 = z.real / rho, z.imag / rho
    R = t.support / rho
    bx = (max(-W, x0 - R), min(W, x0 + R))
    by = (max(-W, y0 - R), min(W, y0 + R))
    if bx[0] >= bx[1] or by[0] >= by[1]:
        return 0j, 0.0
    dg = _g_derivative(t.g, t.alpha)
    smooth = dg is not None and all(
        _vanishes_on_boundary(t, _g_derivative(t.g, (a, b)))
        for a in range(t.alpha[0] + 1) for b in range(t.alpha[1] + 1) if (a, b) != t.alpha)
    if smooth:
        G = _g_eval(t, dg)

        def F(wx, wy):
            return G(z.real - rho * wx, z.imag - rho * wy) * mu.plane(wx, wy)
    else:
        G = _g_eval(t, t.g)
        k = rho ** -t.order()
        a, b = t.alpha

        def F(wx, wy):
            return G(z.real - rho * wx, z.imag - rho * wy) * mu.plane(wx, wy, a, b) * k
    val, err = _quad2d(F, bx[0], bx[1], by[0], by[1])
    return t.coeff * val, abs(t.coeff) * err


def _dirac_body(t: Term, mu: Mollifier) -> nl.Node | None:
    """coeff·ρ^{−2−|α|}·i^b·μ^{(a+b)}((z − p)/ρ) for an entire closed-form μ."""
    if mu.body is None:
        return None
    a, b = t.alpha
    d = mu.derivative_body(a + b)
    arg = nl.div(nl.sub(nl.Param("z"), _cnode(t.point)), nl.Rho())
    node = nl.mul(nl.power(nl.Rho(), -2 - a - b), nl.substitute(d, {"z": arg}))
    factor = _cnode(t.coeff * (1j) ** b)
    return nl.mul(factor, node)


def _dirac_numeric(t: Term, mu: Mollifier):
    a, b = t.alpha

    def fn(eps, rho, z):
        w = (np.asarray(z, dtype=complex) - t.point) / rho
        if mu.entire is not None:
            v = (1j) ** b * mu.entire(w, a + b)
        else:
            v = mu.plane(w.real, w.imag, a, b)
        return t.coeff * v * rho ** (-2 - a - b)

    return fn


@dataclass
class Embedding:
    """ι(T) as a net, with the holomorphy status of the result."""

    T: CompactDistribution
    mu: Mollifier
    net: FunctionNet
    symbolic_part: nl.Node | None
    holomorphy: str
    cre: dict = field(default_factory=dict)

    @property
    def gauge(self) -> Gauge:
        return self.net.gauge

    def __call__(self, z: GenNumber) -> GenNumber:
        return self.at(z)

    def at(self, z: GenNumber) -> GenNumber:
        """ι(T)(z) with quadrature error bars."""
        if self.net.symbolic:
            return self.net.apply(z=z)
        g = self.gauge
        # closed-form Dirac terms take z exactly: near a point mass the rounding of z_ε is amplified by 1/ρ
        closed = [b for t in self.T.terms if t.kind == "dirac" and (b := _dirac_body(t, self.mu)) is not None]
        zv, rho = z.values(), rho_values(g)
        vals, errs = [], []
        for i, e in enumerate(g.grid.points):
            v, err = self._eval(e, rho[i], complex(zv[i]), skip_closed=bool(closed))
            vals.append(v)
            errs.append(err)
        vals = np.array(vals)
        s = Samples.from_complex(vals)
        with np.errstate(divide="ignore"):
            s = Samples(s.logmag, s.phase, np.log(np.array(errs) + 4 * U * np.abs(vals)))
        out = GenNumber(SampledNet(s, g), check=False)
        if closed:
            body = closed[0]
            for b in closed[1:]:
                body = nl.add(body, b)
            out = out + FunctionNet(body, g).apply(z=z)
        return out

    def _eval(self, eps, rho, z: complex, skip_closed: bool = False) -> tuple[complex, float]:
        total, err = 0j, 0.0
        for t in self.T.terms:
            if t.kind == "dirac":
                body = _dirac_body(t, self.mu)
                if body is not None and skip_closed:
                    continue
                if body is not None:
                    v = complex(nl.evaluate(body, eps, {"z": z}, nl.EvalContext(self.gauge.rho), form="complex"))
                else:
                    v = complex(np.asarray(_dirac_numeric(t, self.mu)(eps, rho, np.array([z])))[0])
                total += v
                err += 4 * U * abs(v)
            else:
                v, e_ = _g_term_value(t, self.mu, eps, rho, z)
                total += v
                err += e_
        return total, err


def iota_embed(T: CompactDistribution, gauge: Gauge, mu: Mollifier | str = "gauss-entire",
               probes: list[GenNumber] | None = None, N: int = DEFAULT_ORDER) -> Embedding:
    """f_ε = T * μ_ε, term by term."""
    if isinstance(mu, str):
        mu = mollifier(mu)
    dirac_bodies = [_dirac_body(t, mu) for t in T.terms if t.kind == "dirac"]
    all_dirac = all(t.kind == "dirac" for t in T.terms)
    if all_dirac and all(b is not None for b in dirac_bodies):
        body = dirac_bodies[0]
        for b in dirac_bodies[1:]:
            body = nl.add(body, b)
        net = FunctionNet(body, gauge, name=f"iota({T.name})")
        emb = Embedding(T, mu, net, body, "closed-form-analytic" if mu.analyticity == "one-variable-analytic"
                        else "reported")
    else:
        holder: list[Embedding] = []

        def fn(eps, rho, z):
            z = np.asarray(z, dtype=complex)
            flat = np.array([holder[0]._eval(eps, rho, complex(c))[0] for c in z.ravel()])
            return flat.reshape(z.shape)

        net = FunctionNet(None, gauge, fn=fn, rel_err=QUAD_REL_TOL, name=f"iota({T.name})")
        emb = Embedding(T, mu, net, None, "reported")
        holder.append(emb)
    # moderateness: the order at the probes must not fall below −m − 1
    m = T.order()
    for p in probes or [GenNumber.of(0, gauge)]:
        o = emb.at(p).order()
        if o.value < -m - 1:
            raise CertificationError(f"moderateness fit {o.value:.3g} exceeds the declared order {m} by more than 1")
        if emb.holomorphy == "reported":
            # Dirac terms grow like exp(y²/ρ²) off the real axis, so their steps live on the ρ scale
            step = GenNumber.d_rho(gauge) if any(t.kind == "dirac" for t in T.terms) else GenNumber.of(1, gauge)
            rec = cre_residual(net, p, scale=step * Fraction(1, 20))
            emb.cre[str(p)] = {"residual_orders": [r.order().value for r in rec.residuals],
                               "negligible": v_and(*rec.verdicts(N)).value.value}
    return emb


# ---------------------------------------------------------------------------
# checks


def _plane_partial_sampled(emb: Embedding, z: GenNumber, alpha, step: float = 0.05) -> GenNumber:
    """∂x^a ∂y^b ι(T)(z) by central differences with one Richardson step."""
    a, b = alpha
    g = emb.gauge
    zv, rho = z.values(), rho_values(g)

    def stencil(eps, r, c, h):
        tot, err = 0j, 0.0
        xs = _fd_weights(a)
        ys = _fd_weights(b)
        for dx, wx in xs:
            for dy, wy in ys:
                v, e_ = emb._eval(eps, r, c + h * dx + 1j * h * dy)
                tot += wx * wy * v
                err += abs(wx * wy) * e_
        return tot / h ** (a + b), err / h ** (a + b)

    vals, errs = [], []
    for i, e in enumerate(g.grid.points):
        c = complex(zv[i])
        d1, e1 = stencil(e, rho[i], c, step)
        d2, e2 = stencil(e, rho[i], c, step / 2)
        est = (4 * d2 - d1) / 3
        vals.append(est)
        errs.append(abs(d2 - d1) / 3 + (4 * e2 + e1) / 3)
    vals = np.array(vals)
    s = Samples.from_complex(vals)
    with np.errstate(divide="ignore"):
        s = Samples(s.logmag, s.phase, np.log(np.array(errs) + 4 * U * np.abs(vals)))
    return GenNumber(SampledNet(s, g), check=False)


def _fd_weights(n: int):
    if n == 0:
        return [(0, 1.0)]
    if n == 1:
        return [(1, 0.5), (-1, -0.5)]
    if n == 2:
        return [(1, 1.0), (0, -2.0), (-1, 1.0)]
    raise ValueError("finite differences are tabulated up to second order per direction")


def derivative_preservation_check(T: CompactDistribution, alpha, gauge: Gauge, probes: list[GenNumber],
                                  mu: Mollifier | str = "gauss-entire", N: int = 8) -> Verdict:
    """ι(∂^α T) against ∂^α ι(T) at the probes.

    Closed-form terms are differentiated by Cauchy quadrature (∂x^a ∂y^b f =
    i^b f^(a+b) for holomorphic f); quadrature terms by finite differences.
    """
    if isinstance(mu, str):
        mu = mollifier(mu)
    a, b = alpha
    lhs = iota_embed(T.derivative(alpha), gauge, mu, probes=probes[:1])
    vs = []
    for z in probes:
        left = lhs(z)
        right = GenNumber.of(0, gauge)
        for t in T.terms:
            single = iota_embed(CompactDistribution((t,), T.name), gauge, mu, probes=[])
            if (a, b) == (0, 0):
                right = right + single(z)
            elif single.net.symbolic and single.holomorphy == "closed-form-analytic":
                r = cauchy_derivative(single.net, z, a + b, GenNumber.d_rho(gauge) * Fraction(1, 2))
                right = right + r.value * GenNumber.of(complex((1j) ** b), gauge)
            else:
                right = right + _plane_partial_sampled(single, z, alpha)
        vs.append(eq(left, right, N))
    return v_and(*vs)


def delta_1d_link_check(gauge: Gauge, probes: list[GenNumber], mu: Mollifier | str = "gauss-entire",
                        N: int = DEFAULT_ORDER) -> Verdict:
    """δ(x) = c·dρ⁻¹·δ₁(x) with δ₁(x) = dρ⁻¹μ₁(x/dρ), μ₁ = μ/c, c = ∫_ℝ μ."""
    if isinstance(mu, str):
        mu = mollifier(mu)
    if mu.body is None:
        raise ValueError("the 1-D link needs a closed-form mollifier")
    f = nl.compile_numpy(mu.body, ("z",))
    c, _ = integrate.quad(lambda t: complex(f(0.0, 1.0, np.array(t + 0j))).real, -np.inf, np.inf, limit=400)
    if abs(c) < 1e-12:
        raise ValueError("∫_ℝ μ vanishes; the 1-D link is undefined")
    cn_ = nl.num(Fraction(c))
    delta = nl.mul(nl.power(nl.Rho(), -2), nl.substitute(mu.body, {"z": nl.div(nl.Param("z"), nl.Rho())}))
    mu1 = nl.div(nl.substitute(mu.body, {"z": nl.div(nl.Param("z"), nl.Rho())}), cn_)
    delta1 = nl.mul(nl.power(nl.Rho(), -1), mu1)
    rhs = nl.mul(nl.mul(cn_, nl.power(nl.Rho(), -1)), delta1)
    L, R = FunctionNet(delta, gauge), FunctionNet(rhs, gauge)
    vs = [eq(L.apply(z=x), R.apply(z=x), N) for x in probes]
    out = v_and(*vs)
    return Verdict(out.value, out.order, out.method, f"c = {c:.16g}; " + out.detail)


@dataclass
class UniquenessResult:
    verdict: Verdict
    witness: dict | None  # {"n": ..., "eps": ...} for the first failing inequality


def mollifier_uniqueness_check(mu1: Mollifier | str, mu2: Mollifier | str, gauge: Gauge, n_max: int = 8,
                               pairs=((1, 0),), N: int = DEFAULT_ORDER) -> UniquenessResult:
    """Strong ρ-equivalence |δ_{1n} − δ_{2n}| ≤ ρ^{nq+r} of the δ-jet coefficients.

    δ_{jn,ε} = ρ_ε^{−n−2}·μ_j^(n)(0)/n!.
    """
    mu1 = mollifier(mu1) if isinstance(mu1, str) else mu1
    mu2 = mollifier(mu2) if isinstance(mu2, str) else mu2
    vs = []
    witness = None
    mid = gauge.grid.points[gauge.grid.count // 2]
    for q, r in pairs:
        for n in range(n_max + 1):
            d = nl.mul(nl.sub(mu1.taylor_coefficient(n), mu2.taylor_coefficient(n)), nl.power(nl.Rho(), -n - 2))
            D = abs(GenNumber(SymbolicNet(d, gauge), check=False))
            bound = GenNumber.d_rho(gauge, q * n + r)
            v = leq(D, bound, N)
            vs.append(v)
            if not v.true and witness is None:
                Dv, Bv = D.values().real, bound.values().real
                bad = [e for e, x, y in zip(gauge.grid.points, Dv, Bv) if x > y and e < mid]
                witness = {"n": n, "q": q, "r": r, "eps": bad[0] if bad else None}
    return UniquenessResult(v_and(*vs), witness)


# ---------------------------------------------------------------------------
# j-embedding of locally integrable functions


def _polar_rule(n_r: int = 96, n_t: int = 64):
    t, w = np.polynomial.legendre.leggauss(n_r)
    r, wr = (t + 1) / 2, w / 2
    th = 2 * np.pi * np.arange(n_t) / n_t
    u = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    wt = (wr[:, None] * r[:, None] * np.full((1, n_t), 2 * np.pi / n_t)).ravel()
    return u, wt


_U, _UW = _polar_rule()
# the convolution rule: coarser, still exact on polynomials since every angular moment vanishes
_KU, _KW = _polar_rule(48, 32)


def unit_bump(u: np.ndarray) -> np.ndarray:
    s = np.abs(u) ** 2
    with np.errstate(all="ignore"):
        return np.where(s < 1, np.exp(-1 / (1 - s)), 0.0)


def _dbar_unit_bump(u: np.ndarray) -> np.ndarray:
    s = np.abs(u) ** 2
    with np.errstate(all="ignore"):
        return np.where(s < 1, -u * np.exp(-1 / (1 - s)) / (1 - s) ** 2, 0.0)


BUMP_MASS = float(np.sum(_KW * unit_bump(_KU)))


@dataclass
class LocIntFunction:
    body: nl.Node
    distributional_cre: bool = True
    center: complex = 0j
    radius: float = 2.0  # the probe domain Ω is the disk of this radius

    @staticmethod
    def parse(text: str, **kw) -> "LocIntFunction":
        return LocIntFunction(nl.parse(text, ("z",)), **kw)

    def fn(self):
        f = nl.compile_numpy(self.body, ("z",))
        return lambda z: f(0.0, 1.0, np.asarray(z, dtype=complex))


def distributional_cre_test(f: LocIntFunction, count: int = 5, seed: int = 0, threshold: float = 1e-8) -> Verdict:
    """⟨f, ∂_z̄ φ⟩ ≈ 0 for bump test functions φ inside Ω."""
    rng = np.random.default_rng(seed)
    F = f.fn()
    worst, name = 0.0, ""
    for k in range(count):
        s = f.radius * rng.uniform(0.05, 0.25)
        c = f.center + (f.radius - s) * 0.9 * rng.uniform(0, 1) * np.exp(2j * np.pi * rng.uniform())
        vals = F(c + s * _U)
        pair = s * np.sum(_UW * vals * _dbar_unit_bump(_U))
        scale = s * np.sum(_UW * np.abs(vals * _dbar_unit_bump(_U))) + 1e-300
        rel = abs(pair) / scale
        if rel > worst:
            worst, name = rel, f"bump(c={c:.4g}, s={s:.4g})"
    ok = worst < threshold
    return Verdict(Truth.TRUE if ok else Truth.FALSE, None, "sampled",
                   f"max relative ⟨f, ∂_z̄φ⟩ = {worst:.3g}" + ("" if ok else f" at test function {name}"))


@dataclass
class JEmbedding:
    f: LocIntFunction
    net: FunctionNet
    cre_test: Verdict
    ghf: GHF | None = None

    def standard_part(self, z0: complex, tol: float = 1e-6) -> complex:
        """st(j(f)(z0)) from the tail of the grid, checked for convergence."""
        g = self.net.gauge
        rho = rho_values(g)
        pts = g.grid.points
        tail = [complex(np.asarray(self.net.at(e, rho[i], z=np.array([z0])))[0]) for i, e in
                enumerate(pts) if i >= len(pts) - 3]
        if abs(tail[-1] - tail[-2]) > tol * (1 + abs(tail[-1])):
            raise ValueError("j(f)(z0) has not settled on the grid tail")
        return tail[-1]


def jmath_embed(f: LocIntFunction, gauge: Gauge, probe: GenNumber | None = None, q=1,
                N: int = DEFAULT_ORDER) -> JEmbedding:
    """f_ε = f * k_ε with the unit-disk bump k, certified at the probe."""
    test = distributional_cre_test(f)
    if not f.distributional_cre or not test.true:
        raise CertificationError(f"distributional CRE rejected: {test.detail}")
    F = f.fn()
    k = unit_bump(_KU) / BUMP_MASS

    def fn(eps, rho, z):
        z = np.asarray(z, dtype=complex)
        out = F(z.ravel()[:, None] - rho * _KU[None, :]) @ (_KW * k)
        return out.reshape(z.shape)

    net = FunctionNet(None, gauge, fn=fn, rel_err=1e-12, name=f"j({nl.to_text(f.body)})")
    je = JEmbedding(f, net, test)
    if probe is not None:
        je.ghf = certify_eps_diff(net, probe, q, N=N, name=net.name)
    return je


def smoothed_heaviside(gauge: Gauge) -> FunctionNet:
    """H_ε(x) = (1 + erf(x/ρ_ε))/2 as a declared net."""

    def fn(eps, rho, z):
        return 0.5 * (1 + special.erf(np.asarray(z, dtype=complex).real / rho)) + 0j

    return FunctionNet(None, gauge, fn=fn, name="H_eps")
