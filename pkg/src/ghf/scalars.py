"""Generalized numbers over a gauge: representatives, orders, verdicts.

A :class:`GenNumber` wraps a representative net, either symbolic (a netlang
expression) or sampled on an ε grid in log-polar form with per-point
absolute error bounds.  Relations return a :class:`Verdict` because
negligibility can only be certified symbolically; on samples it is a
regression against the gauge at a declared order N.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import mpmath
import numpy as np
from scipy import stats

from . import canonical as cn
from . import netlang as nl

DEFAULT_ORDER = 10
TAIL = 12
U = 2.0**-53
LOG_U = math.log(U)
SAMPLED_INF_SLOPE = 200.0
MP_REL_LOG = -60 * math.log(2)
LOG2 = math.log(2)
MIN_DECAY = 0.05  # slowest log-log decay the grid tail can tell apart from a constant


class NotModerateError(ValueError):
    pass


class NotInvertibleError(ValueError):
    pass


class NotHypernaturalError(ValueError):
    pass


class GaugeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# grids, gauges, index sets


@dataclass(frozen=True)
class EpsGrid:
    eps0: float = 0.5
    ratio: float = 0.7
    count: int = 24

    def __post_init__(self):
        if not (0 < self.eps0 <= 1):
            raise ValueError("eps0 must lie in (0, 1]")
        if not (0 < self.ratio < 1):
            raise ValueError("ratio must lie in (0, 1)")
        if self.count < 8:
            raise ValueError("a grid needs at least 8 points")

    @property
    def points(self) -> np.ndarray:
        return self.eps0 * self.ratio ** np.arange(self.count)

    def tail_slice(self, n: int = TAIL) -> slice:
        return slice(max(0, self.count - n), self.count)

    def index_of(self, eps: float) -> int:
        return int(round(math.log(eps / self.eps0) / math.log(self.ratio)))

    @staticmethod
    def parse(text: str) -> "EpsGrid":
        eps0, ratio, count = text.split(":")
        return EpsGrid(float(eps0), float(ratio), int(count))

    def __str__(self) -> str:
        return f"{self.eps0}:{self.ratio}:{self.count}"


NAMED_GAUGES = {
    "eps": "eps",
    "eps2": "eps^2",
    "sqrt": "eps^(1/2)",
    "exp": "exp(-eps^-1)",
}


class Gauge:
    """A gauge net ρ_ε given as a netlang expression in eps."""

    def __init__(self, rho: nl.Node | str, grid: EpsGrid | None = None, name: str | None = None):
        if isinstance(rho, str):
            rho = nl.parse(NAMED_GAUGES.get(rho, rho))
        if any(isinstance(n, (nl.Rho, nl.Param, nl.Piecewise)) for n in nl.walk(rho)):
            raise GaugeError("a gauge must be an expression in eps alone")
        self.rho = rho
        self.grid = grid or EpsGrid()
        self.name = name or nl.to_text(rho)
        vals = [nl.evaluate(rho, e, form="log") for e in self.grid.points]
        self.log_rho = np.array([v.logmag for v in vals])
        if any(abs(v.phase) > 1e-12 for v in vals) or np.any(self.log_rho > 1e-12):
            raise GaugeError(f"gauge {self.name} leaves (0, 1] on the grid")
        tail = self.log_rho[self.grid.tail_slice()]
        if np.any(np.diff(tail) >= 0):
            raise GaugeError(f"gauge {self.name} is not strictly decreasing on the grid tail")
        self.poly = cn.canon(rho)
        a = cn.asym(self.poly)
        lead = cn.leading(a.S)
        self.scale = a.S if (a.kind == "exact" and lead is not None and lead[1] < 0) else None

    @staticmethod
    def named(name: str, grid: EpsGrid | None = None) -> "Gauge":
        return Gauge(NAMED_GAUGES.get(name, name), grid, name)

    def __repr__(self) -> str:
        return f"Gauge({self.name}, grid={self.grid})"

    def same_as(self, other: "Gauge") -> bool:
        return self is other or (self.rho == other.rho and self.grid == other.grid)


@dataclass(eq=False)
class IndexSet:
    """A set of ε values standing in for a cofinal L ⊆ (0, 1].

    ``contains`` decides membership for any ε; ``cofinal`` and ``cocofinal``
    declare whether L and its complement accumulate at 0 in the idealized
    (not just grid) sense, None meaning "not known".
    """

    name: str
    contains: Callable[[float], bool]
    description: str = ""
    cofinal: bool | None = True
    cocofinal: bool | None = True
    complement_of: str | None = None

    def mask(self, grid: EpsGrid) -> np.ndarray:
        return np.array([bool(self.contains(e)) for e in grid.points])

    def grid_cofinal(self, grid: EpsGrid) -> bool:
        m = self.mask(grid)
        return bool(m[-3:].any())

    def complement(self) -> "IndexSet":
        return IndexSet(
            self.name + "_c",
            lambda e, f=self.contains: not f(e),
            f"complement of {self.name}",
            self.cocofinal,
            self.cofinal,
            complement_of=self.name,
        )

    @staticmethod
    def alternating(name: str, grid: EpsGrid, parity: int = 0) -> "IndexSet":
        return IndexSet(
            name,
            lambda e: grid.index_of(e) % 2 == parity,
            f"grid indices with parity {parity}",
        )

    @staticmethod
    def from_mask(name: str, grid: EpsGrid, mask, description: str = "") -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)

        def contains(e, mask=mask):
            k = grid.index_of(e)
            return bool(mask[min(max(k, 0), len(mask) - 1)])

        return IndexSet(name, contains, description or "grid mask", None, None)

    @staticmethod
    def everything(name: str = "all") -> "IndexSet":
        return IndexSet(name, lambda e: True, "all indices", True, False)


# ---------------------------------------------------------------------------
# verdicts


class Truth(enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNDECIDABLE = "Undecidable"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Verdict:
    value: Truth
    order: int | None = None
    method: str = "symbolic"
    detail: str = ""

    @property
    def true(self) -> bool:
        return self.value is Truth.TRUE

    @property
    def false(self) -> bool:
        return self.value is Truth.FALSE

    @property
    def undecidable(self) -> bool:
        return self.value is Truth.UNDECIDABLE

    def as_dict(self) -> dict:
        return {"value": str(self.value), "order": self.order, "method": self.method, "detail": self.detail}

    def __str__(self) -> str:
        return f"{self.value} ({self.method}, N={self.order}): {self.detail}"


def verdict(flag: bool | None, order=None, method="symbolic", detail="") -> Verdict:
    value = Truth.UNDECIDABLE if flag is None else (Truth.TRUE if flag else Truth.FALSE)
    return Verdict(value, order, method, detail)


def v_and(*vs: Verdict, detail: str = "") -> Verdict:
    if any(v.false for v in vs):
        bad = next(v for v in vs if v.false)
        return Verdict(Truth.FALSE, bad.order, bad.method, detail or bad.detail)
    if all(v.true for v in vs):
        method = "symbolic" if all(v.method == "symbolic" for v in vs) else "sampled"
        return Verdict(Truth.TRUE, vs[0].order if vs else None, method, detail or "; ".join(v.detail for v in vs))
    und = next(v for v in vs if v.undecidable)
    return Verdict(Truth.UNDECIDABLE, und.order, und.method, detail or und.detail)


def v_not(v: Verdict) -> Verdict:
    flip = {Truth.TRUE: Truth.FALSE, Truth.FALSE: Truth.TRUE, Truth.UNDECIDABLE: Truth.UNDECIDABLE}
    return Verdict(flip[v.value], v.order, v.method, v.detail)


@dataclass(frozen=True)
class AsymptoticOrder:
    value: float
    exact: bool
    ci: float | None = None
    detail: str = ""

    def __post_init__(self):
        if self.exact and self.ci is not None:
            raise ValueError("exact orders carry no confidence interval")


# ---------------------------------------------------------------------------
# log-polar sample arrays


def _lse(*arrs) -> np.ndarray:
    stack = np.vstack([np.broadcast_to(np.asarray(a, dtype=float), np.shape(arrs[0])) for a in arrs])
    m = np.max(stack, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(all="ignore"):
        s = np.sum(np.exp(stack - safe), axis=0)
        out = safe + np.log(s)
    return np.where(m == -np.inf, -np.inf, np.where(m == np.inf, np.inf, out))


def _wrap(phase):
    return (np.asarray(phase) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True, eq=False)
class Samples:
    """Per-grid-point values as log|x|, arg x and a log absolute error bound."""

    logmag: np.ndarray
    phase: np.ndarray
    logerr: np.ndarray

    @staticmethod
    def from_complex(values, rel_err: float = 4 * U) -> "Samples":
        v = np.asarray(values, dtype=complex)
        with np.errstate(divide="ignore"):
            lm = np.log(np.abs(v))
        return Samples(lm, np.angle(v), lm + (math.log(rel_err) if rel_err > 0 else -math.inf))

    def to_complex(self) -> np.ndarray:
        with np.errstate(all="ignore"):
            out = np.exp(self.logmag + 1j * self.phase)
        return np.where(self.logmag == -np.inf, 0j, out)

    def __neg__(self) -> "Samples":
        return Samples(self.logmag, _wrap(self.phase + np.pi), self.logerr)

    def __add__(self, o: "Samples") -> "Samples":
        m = np.maximum(self.logmag, o.logmag)
        safe = np.where(np.isfinite(m), m, 0.0)
        with np.errstate(all="ignore"):
            z = np.exp(self.logmag - safe + 1j * self.phase) + np.exp(o.logmag - safe + 1j * o.phase)
            lm = np.where(np.abs(z) > 0, safe + np.log(np.abs(z)), -np.inf)
        lm = np.where(m == -np.inf, -np.inf, lm)
        # rebuilding each term from log-polar form costs about (|log x| + |arg x|)·u relative
        big = np.maximum(np.abs(np.where(np.isfinite(m), m, 0.0)), 0.0)
        err = _lse(self.logerr, o.logerr, m + np.log(2 * U * (2 + big + math.pi)))
        return Samples(lm, np.angle(z), err)

    def __sub__(self, o: "Samples") -> "Samples":
        return self + (-o)

    def __mul__(self, o: "Samples") -> "Samples":
        lm = self.logmag + o.logmag
        err = _lse(self.logmag + o.logerr, o.logmag + self.logerr, self.logerr + o.logerr, lm + math.log(2 * U))
        return Samples(lm, _wrap(self.phase + o.phase), err)

    def inverse(self) -> "Samples":
        if np.any(self.logmag == -np.inf):
            raise ZeroDivisionError("sampled net has an exact zero")
        lm = -self.logmag
        good = self.logerr < self.logmag - math.log(2)
        err = np.where(good, math.log(2) + self.logerr - 2 * self.logmag, np.inf)
        err = _lse(err, lm + math.log(2 * U))
        return Samples(lm, _wrap(-self.phase), err)

    def power(self, q: Fraction) -> "Samples":
        qf = float(q)
        lm = qf * self.logmag
        good = self.logerr < self.logmag - math.log(2)
        err = np.where(good, math.log(2 * abs(qf) + 1e-300) + (qf - 1) * self.logmag + self.logerr, np.inf)
        err = _lse(err, lm + math.log(4 * U))
        return Samples(lm, _wrap(qf * self.phase), err)

    def abs(self) -> "Samples":
        return Samples(self.logmag, np.zeros_like(self.phase), self.logerr)

    def conj(self) -> "Samples":
        return Samples(self.logmag, -self.phase, self.logerr)

    def real_part(self) -> "Samples":
        return Samples.from_complex(self.to_complex().real + 0j)

    def resolved(self) -> np.ndarray:
        return self.logmag > self.logerr


# ---------------------------------------------------------------------------
# representatives


class NetValue:
    gauge: Gauge

    def samples(self) -> Samples:
        raise NotImplementedError


class SymbolicNet(NetValue):
    """A representative given by a netlang expression."""

    def __init__(self, expr: nl.Node | str, gauge: Gauge, indexsets: Mapping[str, IndexSet] | None = None):
        if isinstance(expr, str):
            expr = nl.parse(expr)
        self.expr = expr
        self.gauge = gauge
        self.indexsets = dict(indexsets or {})
        for name in nl.index_names(expr):
            if self._lookup(name) is None:
                raise nl.UnknownIdentifierError(name, 1, 1)
        if nl.free_params(expr):
            raise ValueError("a generalized number cannot have free parameters")
        self._samples: Samples | None = None
        self._poly = None

    def _lookup(self, name: str) -> IndexSet | None:
        if name in self.indexsets:
            return self.indexsets[name]
        if name.endswith("_c") and name[:-2] in self.indexsets:
            return self.indexsets[name[:-2]].complement()
        return None

    def in_index(self, name: str, eps: float) -> bool:
        return bool(self._lookup(name).contains(eps))

    def context(self) -> nl.EvalContext:
        return nl.EvalContext(self.gauge.rho, self.in_index)

    def value_mp(self, eps: float):
        return nl.evaluate_mp(self.expr, eps, ctx=self.context())

    def samples(self) -> Samples:
        if self._samples is None:
            lm, ph = [], []
            for e in self.gauge.grid.points:
                v = self.value_mp(e)
                if v == 0:
                    lm.append(-math.inf)
                    ph.append(0.0)
                else:
                    with mpmath.workdps(30):
                        lm.append(float(mpmath.log(abs(v))))
                        ph.append(float(mpmath.arg(v)))
            lm = np.array(lm)
            self._samples = Samples(lm, np.array(ph), lm + MP_REL_LOG)
        return self._samples

    def poly(self) -> cn.Poly:
        if self._poly is None:
            self._poly = cn.canon(self.expr, self.gauge.poly)
        return self._poly

    def asym(self, restrict_to: IndexSet | None = None) -> cn.Asym:
        if self.gauge.scale is None:
            return cn.unknown("gauge without symbolic scale")

        def cof(name):
            s = self._lookup(name)
            if restrict_to is not None:
                return (None, None)
            return (s.cofinal, s.cocofinal)

        return cn.asym(self.poly(), cn.AsymContext(cof))

    def __repr__(self) -> str:
        return f"SymbolicNet({nl.to_text(self.expr)})"


class SampledNet(NetValue):
    def __init__(self, samples: Samples, gauge: Gauge):
        if len(samples.logmag) != gauge.grid.count:
            raise ValueError("sample count does not match the grid")
        if np.any(np.isnan(samples.logmag)) or np.any(samples.logmag == np.inf):
            raise ValueError("sampled values must be finite")
        self._s = samples
        self.gauge = gauge

    @staticmethod
    def from_values(values, gauge: Gauge, rel_err: float = 4 * U) -> "SampledNet":
        return SampledNet(Samples.from_complex(values, rel_err), gauge)

    @staticmethod
    def from_function(fn: Callable[[float], complex], gauge: Gauge, rel_err: float = 4 * U) -> "SampledNet":
        return SampledNet.from_values([fn(e) for e in gauge.grid.points], gauge, rel_err)

    def samples(self) -> Samples:
        return self._s

    def __repr__(self) -> str:
        return "SampledNet(...)"


# ---------------------------------------------------------------------------
# sampled analysis


def _regress(x: np.ndarray, y: np.ndarray):
    """Slope of y against x and its 95% half-width."""
    if len(x) < 3:
        return None
    res = stats.linregress(x, y)
    hw = stats.t.ppf(0.975, len(x) - 2) * res.stderr if len(x) > 2 else math.inf
    return float(res.slope), float(hw)


def _tail_mask(gauge: Gauge, restrict_to: IndexSet | None) -> np.ndarray:
    m = np.zeros(gauge.grid.count, dtype=bool)
    m[gauge.grid.tail_slice()] = True
    if restrict_to is not None:
        m &= restrict_to.mask(gauge.grid)
    return m


def sampled_order(s: Samples, gauge: Gauge, restrict_to: IndexSet | None = None) -> AsymptoticOrder:
    mask = _tail_mask(gauge, restrict_to) & s.resolved()
    if mask.sum() < 3:
        return AsymptoticOrder(math.inf, False, None, "below arithmetic resolution on the grid tail")
    slope, hw = _regress(gauge.log_rho[mask], s.logmag[mask])
    if slope - hw > SAMPLED_INF_SLOPE:
        return AsymptoticOrder(math.inf, False, None, f"regression slope {slope:.3g} beyond every power")
    if slope + hw < -SAMPLED_INF_SLOPE:
        return AsymptoticOrder(-math.inf, False, None, f"regression slope {slope:.3g} beyond every power")
    return AsymptoticOrder(slope, False, hw, f"tail regression over {int(mask.sum())} points")


def sampled_negligible(s: Samples, gauge: Gauge, N: int, restrict_to: IndexSet | None = None) -> Verdict:
    tail = _tail_mask(gauge, restrict_to)
    res = tail & s.resolved()
    if not res.any():
        return Verdict(Truth.TRUE, N, "sampled", "difference within the arithmetic error bound at every tail point")
    if res.sum() < 4:
        return Verdict(Truth.UNDECIDABLE, N, "sampled", f"only {int(res.sum())} tail points resolved")
    slope, hw = _regress(gauge.log_rho[res], s.logmag[res])
    detail = f"order estimate {slope:.4g} ± {hw:.2g} over {int(res.sum())} points"
    if slope - hw > N:
        return Verdict(Truth.TRUE, N, "sampled", detail)
    if slope + hw < N:
        return Verdict(Truth.FALSE, N, "sampled", detail)
    return Verdict(Truth.UNDECIDABLE, N, "sampled", detail)


def _sampled_sign(s: Samples, gauge: Gauge, N: int, restrict_to: IndexSet | None, strict: bool) -> Verdict:
    """Whether the real net is eventually ≥ 0 (or > 0 when strict) up to negligible slack."""
    tail = _tail_mask(gauge, restrict_to)
    vals = s.to_complex().real
    with np.errstate(divide="ignore"):
        slack = np.exp(np.maximum(s.logerr, N * gauge.log_rho if not strict else s.logerr))
    neg = tail & (vals < -slack)
    zero = tail & (np.abs(vals) <= slack)
    idx = np.flatnonzero(tail)
    last = idx[-3:]
    if strict:
        if not (neg | zero).any():
            return Verdict(Truth.TRUE, N, "sampled", "every tail point strictly positive")
        if (neg | zero)[last].any() and (neg | zero).sum() >= 2:
            return Verdict(Truth.FALSE, N, "sampled", "non-positive values on a cofinal part of the tail")
        return Verdict(Truth.UNDECIDABLE, N, "sampled", "sign not settled on the tail")
    if not neg.any():
        return Verdict(Truth.TRUE, N, "sampled", "tail non-negative up to negligible slack")
    if neg[last].any() and neg.sum() >= 2:
        sub = Samples(s.logmag, s.phase, s.logerr)
        o = _regress(gauge.log_rho[neg], sub.logmag[neg]) if neg.sum() >= 3 else None
        if o is None or o[0] + o[1] < N:
            return Verdict(Truth.FALSE, N, "sampled", "negative values beyond slack on a cofinal part of the tail")
    return Verdict(Truth.UNDECIDABLE, N, "sampled", "sign oscillates at grid resolution")


# ---------------------------------------------------------------------------
# generalized numbers


@dataclass
class Classification:
    infinitesimal: Truth
    finite: Truth
    infinite: Truth
    near_standard: Truth
    standard_part: complex | None
    method: str

    def as_dict(self) -> dict:
        sp = self.standard_part
        return {
            "infinitesimal": str(self.infinitesimal),
            "finite": str(self.finite),
            "infinite": str(self.infinite),
            "nearStandard": str(self.near_standard),
            "standardPart": None if sp is None else [sp.real, sp.imag],
            "method": self.method,
        }


def _t(flag: bool | None) -> Truth:
    return Truth.UNDECIDABLE if flag is None else (Truth.TRUE if flag else Truth.FALSE)


class GenNumber:
    """An element of ρ-ℝ̃ or ρ-ℂ̃ given by a representative."""

    def __init__(self, rep: NetValue, kind: str | None = None, restrict_to: IndexSet | None = None,
                 check: bool = True):
        self.rep = rep
        self.gauge = rep.gauge
        self.restrict_to = restrict_to
        self._order: AsymptoticOrder | None = None
        self._asym = None
        if kind == "real" and not self._looks_real():
            raise ValueError("representative is not real")
        self._kind = kind
        if check:
            o = self.order()
            if o.value == -math.inf:
                raise NotModerateError(f"representative is not moderate ({o.detail})")

    @property
    def kind(self) -> str:
        # decided on first use; sampling a complex net to rule out realness is costly
        if self._kind is None:
            self._kind = "real" if self._looks_real() else "complex"
        return self._kind

    # construction ---------------------------------------------------------

    @staticmethod
    def parse(text: str, gauge: Gauge, indexsets: Mapping[str, IndexSet] | None = None, kind=None) -> "GenNumber":
        return GenNumber(SymbolicNet(nl.parse(text), gauge, indexsets), kind)

    @staticmethod
    def of(value, gauge: Gauge) -> "GenNumber":
        if isinstance(value, GenNumber):
            return value
        if isinstance(value, nl.Node):
            return GenNumber(SymbolicNet(value, gauge))
        if isinstance(value, complex):
            node = nl.add(nl.num(Fraction(value.real)), nl.mul(nl.num(Fraction(value.imag)), nl.Imag()))
            return GenNumber(SymbolicNet(node, gauge))
        return GenNumber(SymbolicNet(nl.num(Fraction(value)), gauge))

    @staticmethod
    def d_rho(gauge: Gauge, n=1) -> "GenNumber":
        return GenNumber(SymbolicNet(nl.power(nl.Rho(), Fraction(n)), gauge))

    @property
    def symbolic(self) -> bool:
        return isinstance(self.rep, SymbolicNet)

    @property
    def expr(self) -> nl.Node:
        return self.rep.expr

    def _looks_real(self) -> bool:
        if isinstance(self.rep, SymbolicNet):
            try:
                if cn.is_real(self.rep.poly()):
                    return True
            except (ZeroDivisionError, ValueError):
                pass
        s = self.rep.samples()
        ph = np.abs(_wrap(s.phase))
        return bool(np.all((s.logmag == -np.inf) | (ph < 1e-9) | (np.abs(ph - np.pi) < 1e-9)))

    def samples(self) -> Samples:
        return self.rep.samples()

    def values(self) -> np.ndarray:
        return self.samples().to_complex()

    def restricted_expr(self) -> nl.Node | None:
        if not self.symbolic:
            return None
        if self.restrict_to is None:
            return self.expr
        L = self.restrict_to

        def sub(n: nl.Node) -> nl.Node:
            if isinstance(n, nl.Piecewise):
                if n.index == L.name:
                    return sub(n.a)
                if n.index == L.name + "_c" or (L.complement_of and n.index == L.complement_of):
                    return sub(n.b)
            if isinstance(n, (nl.Num, nl.Imag, nl.Eps, nl.Rho, nl.Param)):
                return n
            return _rebuild(n, [sub(c) for c in nl.children(n)])

        return sub(self.expr)

    def asym(self) -> cn.Asym:
        if self._asym is None:
            if not self.symbolic:
                self._asym = cn.unknown("sampled representative")
            elif self.restrict_to is None:
                self._asym = self.rep.asym()
            else:
                net = SymbolicNet(self.restricted_expr(), self.gauge, self.rep.indexsets)
                others = nl.index_names(net.expr)
                self._asym = net.asym(self.restrict_to) if others else net.asym()
        return self._asym

    # arithmetic -----------------------------------------------------------

    def _coerce(self, other) -> "GenNumber":
        o = GenNumber.of(other, self.gauge)
        if not o.gauge.same_as(self.gauge):
            raise GaugeError("operands live over different gauges")
        if (o.restrict_to is not None or self.restrict_to is not None) and o.restrict_to is not self.restrict_to:
            if o.restrict_to is None:
                o = restrict(o, self.restrict_to)
            elif self.restrict_to is not None:
                raise ValueError("operands restricted to different index sets")
        return o

    def _combine(self, other, sym_op, samp_op) -> "GenNumber":
        o = self._coerce(other)
        restrict_to = self.restrict_to or o.restrict_to
        kind = "real" if self._kind == o._kind == "real" else None
        if self.symbolic and o.symbolic:
            idx = {**self.rep.indexsets, **o.rep.indexsets}
            out = GenNumber(SymbolicNet(sym_op(self.expr, o.expr), self.gauge, idx),
                            restrict_to=restrict_to, check=False)
        else:
            out = GenNumber(SampledNet(samp_op(self.samples(), o.samples()), self.gauge),
                            restrict_to=restrict_to, check=False)
        out._kind = kind
        return out

    def __add__(self, o):
        return self._combine(o, nl.add, lambda a, b: a + b)

    def __radd__(self, o):
        return GenNumber.of(o, self.gauge) + self

    def __sub__(self, o):
        return self._combine(o, nl.sub, lambda a, b: a - b)

    def __rsub__(self, o):
        return GenNumber.of(o, self.gauge) - self

    def __mul__(self, o):
        return self._combine(o, nl.mul, lambda a, b: a * b)

    def __rmul__(self, o):
        return GenNumber.of(o, self.gauge) * self

    def __truediv__(self, o):
        return self * invert(self._coerce(o))

    def __rtruediv__(self, o):
        return GenNumber.of(o, self.gauge) * invert(self)

    def __neg__(self):
        return self._map(nl.neg, lambda s: -s)

    def __pow__(self, q):
        q = Fraction(q)
        if q < 0:
            return invert(self) ** (-q)
        return self._map(lambda e: nl.power(e, q), lambda s: s.power(q))

    def __abs__(self):
        return self._map(lambda e: nl.func("abs", e), Samples.abs)

    def conj(self):
        return self._map(lambda e: nl.func("conj", e), Samples.conj)

    def _map(self, sym_op, samp_op) -> "GenNumber":
        if self.symbolic:
            return GenNumber(SymbolicNet(sym_op(self.expr), self.gauge, self.rep.indexsets),
                             restrict_to=self.restrict_to, check=False)
        return GenNumber(SampledNet(samp_op(self.samples()), self.gauge), restrict_to=self.restrict_to, check=False)

    # analysis -------------------------------------------------------------

    def order(self) -> AsymptoticOrder:
        if self._order is None:
            self._order = order(self)
        return self._order

    def to_json(self) -> dict:
        if self.symbolic:
            rep = nl.to_text(self.expr)
        else:
            s = self.samples()
            rep = {"log_magnitude": s.logmag.tolist(), "phase": s.phase.tolist()}
        return {"gauge": self.gauge.name, "repr": rep}

    def __repr__(self) -> str:
        inner = nl.to_text(self.expr) if self.symbolic else "sampled"
        return f"[{inner}]"


def _rebuild(n: nl.Node, kids: list[nl.Node]) -> nl.Node:
    if isinstance(n, nl.Neg):
        return nl.Neg(kids[0])
    if isinstance(n, nl.Func):
        return nl.Func(n.name, kids[0])
    if isinstance(n, nl.Pow):
        return nl.Pow(kids[0], n.exp)
    if isinstance(n, nl.Piecewise):
        return nl.Piecewise(n.index, kids[0], kids[1])
    return type(n)(kids[0], kids[1])


# ---------------------------------------------------------------------------
# operations


def order(x: GenNumber | NetValue) -> AsymptoticOrder:
    """sup{q : |x_ε| = O(ρ_ε^q)}, exact when the order algebra applies."""
    if isinstance(x, NetValue):
        x = GenNumber(x, check=False)
    a = x.asym()
    if a.kind == "zero":
        return AsymptoticOrder(math.inf, True, None, "identically zero")
    if a.kind != "unknown":
        return AsymptoticOrder(cn.order_from_scale(a.S, x.gauge.scale), True, None, a.kind)
    o = sampled_order(x.samples(), x.gauge, x.restrict_to)
    why = a.reason or "no symbolic rule"
    return AsymptoticOrder(o.value, False, o.ci, f"{why}; {o.detail}")


def classify(x: GenNumber) -> Classification:
    a = abs(x).asym() if x.symbolic else cn.UNKNOWN
    if a.kind == "zero":
        return Classification(Truth.TRUE, Truth.TRUE, Truth.FALSE, Truth.TRUE, 0j, "symbolic")
    if a.kind != "unknown":
        S = a.S
        inf_ = cn.tends_to_zero(S)
        fin = cn.bounded(S)
        if isinstance(a.floor, tuple):
            infinite = cn.unbounded_growth(a.floor[0])
        elif a.floor == "none":
            infinite = False
        else:
            infinite = None if cn.unbounded_growth(S) else False
        xa = x.asym()
        near, sp = None, None
        if inf_:
            near, sp = True, 0j
        elif not fin:
            near = False
        elif xa.kind == "exact" and not S and xa.phase is not None:
            near, sp = True, complex(xa.lo * xa.phase)
        elif xa.kind == "osc" and not S:
            near = False
        if near is None:
            sv = _sampled_near_standard(x)
            near, sp = sv
        if infinite is None:
            infinite = _sampled_classify(x)[2]
        return Classification(_t(inf_), _t(fin), _t(infinite), _t(near), sp, "symbolic")
    flags = _sampled_classify(x)
    near, sp = (True, 0j) if flags[0] else _sampled_near_standard(x)
    return Classification(_t(flags[0]), _t(flags[1]), _t(flags[2]), _t(near), sp, "sampled")


def _sampled_classify(x: GenNumber):
    """Tail regression of log|x| plus a first-half/second-half envelope comparison."""
    s = x.samples()
    lm = s.logmag[_tail_mask(x.gauge, x.restrict_to)]
    lr = x.gauge.log_rho[_tail_mask(x.gauge, x.restrict_to)]
    fin = np.isfinite(lm)
    if not fin.any():
        return True, True, False
    half = len(lm) // 2
    head, tail = lm[:half], lm[half:]
    shrinks = tail.max() < head.max() - LOG2
    grows = tail.max() > head.max() + LOG2
    floor_grows = tail.min() > head.min() + LOG2
    r = _regress(lr[fin], lm[fin]) if fin.sum() >= 3 else None
    q, hw = r if r is not None else (0.0, math.inf)
    infinitesimal = finite = infinite = None
    if q - hw > MIN_DECAY and shrinks:
        infinitesimal = True
    elif q + hw < MIN_DECAY or (not shrinks and tail.max() > -6):
        infinitesimal = False
    if infinitesimal or q - hw > -MIN_DECAY or not grows:
        finite = True
    elif q + hw < -MIN_DECAY:
        finite = False
    if q + hw < -MIN_DECAY and floor_grows and fin.all():
        infinite = True
    elif q - hw > -MIN_DECAY or not floor_grows or not fin.all():
        infinite = False
    return infinitesimal, finite, infinite


def _sampled_near_standard(x: GenNumber):
    """Converging tails: increments shrinking geometrically with a small remaining sum."""
    v = x.values()[_tail_mask(x.gauge, x.restrict_to)]
    if not np.all(np.isfinite(v)):
        return False, None
    last = v[-1]
    scale = 1 + abs(last)
    inc = np.abs(np.diff(v))[-6:]
    floor = 64 * U * scale
    if inc.max() <= floor:
        return True, complex(last)
    live = inc > floor
    ratios = inc[1:][live[:-1]] / inc[:-1][live[:-1]]
    if len(ratios) >= 3 and ratios.max() < 0.95:
        r = ratios.max()
        remaining = inc[-1] * r / (1 - r)
        if remaining < 1e-3 * scale:
            return True, complex(last)
    half = len(v) // 2
    spread_head = np.abs(v[:half] - last).max()
    spread_tail = np.abs(v[half:] - last).max()
    if spread_tail < 1e-3 * scale and spread_tail < spread_head / 4:
        return True, complex(last)
    if np.abs(v[-4:] - v[-4:].mean()).max() > 1e-2 * scale:
        return False, None
    return None, None


def _pair(x, y) -> tuple[GenNumber, GenNumber]:
    """Coerce plain numbers on either side to the other operand's gauge."""
    if not isinstance(x, GenNumber):
        if not isinstance(y, GenNumber):
            raise TypeError("at least one operand must be a GenNumber")
        return y._coerce(x), y
    return x, x._coerce(y)


def eq(x: GenNumber, y, N: int = DEFAULT_ORDER) -> Verdict:
    """x = y in the ring, decided exactly when possible, else at order N."""
    x, y = _pair(x, y)
    d = x - y
    if d.symbolic:
        a = d.asym()
        if a.kind == "zero":
            return Verdict(Truth.TRUE, N, "symbolic", "difference is identically zero")
        if a.kind != "unknown":
            o = cn.order_from_scale(a.S, d.gauge.scale)
            if o == math.inf:
                return Verdict(Truth.TRUE, N, "symbolic", "difference is negligible (order +inf)")
            return Verdict(Truth.FALSE, N, "symbolic", f"difference has exact order {o:.6g}")
    v = sampled_negligible(d.samples(), d.gauge, N, d.restrict_to)
    if d.symbolic:
        return Verdict(v.value, N, "sampled", f"{d.asym().reason}; {v.detail}")
    return v


def agree_to_order(x: GenNumber, y, N: int = DEFAULT_ORDER) -> Verdict:
    """|x − y| = O(ρ^N): the order of the difference is at least N."""
    d = x - y
    o = d.order()
    if o.exact:
        return verdict(o.value >= N, N, "symbolic", f"difference has order {o.value:.6g}")
    return sampled_negligible(d.samples(), d.gauge, N, d.restrict_to)


def _nonneg_symbolic(d: GenNumber):
    """Symbolic sign analysis of a real difference: True/False/None."""
    a = d.asym()
    if a.kind == "zero":
        return True, "identically zero"
    if a.kind == "unknown":
        return None, a.reason
    o = cn.order_from_scale(a.S, d.gauge.scale)
    if o == math.inf:
        return True, "negligible"
    if a.sign in (1, "ge0"):
        return True, "eventually non-negative"
    if a.sign in (-1, "mixed") and isinstance(a.floor, tuple) or (a.sign in (-1, "mixed") and a.kind in ("exact", "theta")):
        return False, "negative on a cofinal set with finite order"
    return None, "sign not determined by the order algebra"


def leq(x: GenNumber, y, N: int = DEFAULT_ORDER) -> Verdict:
    x, y = _pair(x, y)
    if x.kind != "real" or y.kind != "real":
        raise ValueError("order relations need real generalized numbers")
    d = y - x
    if d.symbolic:
        flag, why = _nonneg_symbolic(d)
        if flag is not None:
            return verdict(flag, N, "symbolic", why)
    return _sampled_sign(d.samples(), d.gauge, N, d.restrict_to, strict=False)


def lt(x: GenNumber, y, N: int = DEFAULT_ORDER) -> Verdict:
    x, y = _pair(x, y)
    le = leq(x, y, N)
    if le.false:
        return le
    inv = is_invertible(y - x, N)
    return v_and(le, inv, detail=f"leq: {le.value}; invertible difference: {inv.value}")


def is_invertible(x: GenNumber, N: int = DEFAULT_ORDER) -> Verdict:
    """∃m: |x| > dρ^m."""
    if x.symbolic:
        a = x.asym()
        if a.kind == "zero":
            return Verdict(Truth.FALSE, N, "symbolic", "identically zero")
        if a.kind != "unknown":
            if cn.order_from_scale(a.S, x.gauge.scale) == math.inf:
                return Verdict(Truth.FALSE, N, "symbolic", "negligible")
            if isinstance(a.floor, tuple):
                m = cn.order_from_scale(a.floor[0], x.gauge.scale)
                if m < math.inf:
                    return Verdict(Truth.TRUE, N, "symbolic", f"|x| bounded below by a power of order {m:.6g}")
                return Verdict(Truth.FALSE, N, "symbolic", "lower bound is negligible on a cofinal set")
            if a.floor == "none":
                return Verdict(Truth.FALSE, N, "symbolic", "no power lower bound on a cofinal set")
    return _sampled_invertible(x.samples(), x.gauge, N, x.restrict_to)


def _sampled_invertible(s: Samples, gauge: Gauge, N: int, restrict_to: IndexSet | None) -> Verdict:
    tail = _tail_mask(gauge, restrict_to)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = s.logmag / gauge.log_rho
    small = tail & ((~s.resolved()) | (ratio >= N))
    idx = np.flatnonzero(tail)
    if not small.any():
        return Verdict(Truth.TRUE, N, "sampled", f"|x| > ρ^{N} at every tail point (max ratio {np.nanmax(ratio[tail]):.3g})")
    if small[idx[-3:]].any() and small.sum() >= 3:
        return Verdict(Truth.FALSE, N, "sampled", "|x| at or below ρ^N on a cofinal part of the tail")
    return Verdict(Truth.UNDECIDABLE, N, "sampled", "lower bound not settled on the tail")


def invert(x: GenNumber, N: int = DEFAULT_ORDER) -> GenNumber:
    v = is_invertible(x, N)
    if not v.true:
        raise NotInvertibleError(f"not invertible: {v.detail}")
    if x.symbolic:
        s = x.samples()
        if not np.any(s.logmag == -np.inf):
            return x._map(lambda e: nl.div(nl.ONE, e), Samples.inverse)
    s = x.samples()
    zeros = s.logmag == -np.inf
    vals = np.where(zeros, np.exp(x.gauge.log_rho) / 2, s.to_complex())
    return GenNumber(SampledNet.from_values(1 / vals, x.gauge), restrict_to=x.restrict_to, check=False)


def make_invertible_near(z: GenNumber, r: GenNumber, N: int = DEFAULT_ORDER) -> GenNumber:
    """An invertible z* with |z* − z| < r.

    Entries with |z_ε| < r_ε/4 are shifted by r_ε/2, the others are kept, so
    |z*_ε| ≥ r_ε/4 everywhere and |z*_ε − z_ε| ≤ r_ε/2.
    """
    r = z._coerce(r)
    if not lt(GenNumber.of(0, z.gauge), r, N).true:
        raise ValueError("radius must be positive and invertible")
    zv, rv = np.abs(z.values()), r.values().real
    mask = zv < rv / 4
    if not mask.any() and is_invertible(z, N).true:
        return z
    if z.symbolic and r.symbolic:
        if mask.all() and z.asym().kind == "zero":
            return z + r * Fraction(1, 2)
        ctx_z, ctx_r = z.rep, r.rep

        def near_zero(e, cz=ctx_z, cr=ctx_r):
            return abs(cz.value_mp(e)) < cr.value_mp(e).real / 4

        name = f"repair{len(z.rep.indexsets)}"
        L = IndexSet(name, near_zero, "entries with |z| < r/4", None, None)
        idx = {**z.rep.indexsets, **r.rep.indexsets, name: L}
        node = nl.Piecewise(name, nl.add(z.expr, nl.mul(nl.num(Fraction(1, 2)), r.expr)), z.expr)
        return GenNumber(SymbolicNet(node, z.gauge, idx), restrict_to=z.restrict_to, check=False)
    zc = z.values()
    out = np.where(mask, zc + rv / 2, zc)
    return GenNumber(SampledNet.from_values(out, z.gauge), restrict_to=z.restrict_to, check=False)


# ---------------------------------------------------------------------------
# hypernaturals


class HyperNat:
    """A generalized number with a non-negative integer representative."""

    def __init__(self, rep: GenNumber, N: int = DEFAULT_ORDER):
        if rep.kind != "real":
            raise NotHypernaturalError("hypernaturals are real")
        self.rep = rep
        vals = rep.values().real
        self.ni_rep = np.floor(vals + 0.5).astype(np.int64) if np.all(np.isfinite(vals)) else None
        if self.ni_rep is None:
            raise NotHypernaturalError("representative overflows on the grid")
        tail = rep.gauge.grid.tail_slice()
        if np.any(self.ni_rep[tail] < 0):
            raise NotHypernaturalError("negative entries on the grid tail")
        v = eq(rep, self.ni_net(), N)
        if not v.true:
            raise NotHypernaturalError(f"not integer valued up to negligible nets: {v.detail}")

    def ni_net(self) -> GenNumber:
        return GenNumber(SampledNet.from_values(self.ni_rep.astype(float), self.rep.gauge, 0.0), "real", check=False)

    @staticmethod
    def nearest(x: GenNumber) -> "HyperNat":
        """The hypernatural [ni(x_ε)] for a non-negative real x."""
        vals = np.floor(x.values().real + 0.5)
        return HyperNat(GenNumber(SampledNet.from_values(vals, x.gauge, 0.0), "real"))


def ni(x: HyperNat | GenNumber) -> np.ndarray:
    """The nearest-integer representative ⌊x_ε + 1/2⌋ on the grid.

    A plain non-negative real x need not be hypernatural itself; the result
    is then the representative of the hypernatural nearest to x.
    """
    if isinstance(x, HyperNat):
        return x.ni_rep
    if x.kind != "real":
        raise NotHypernaturalError("hypernaturals are real")
    vals = x.values().real
    if not np.all(np.isfinite(vals)) or np.any(vals[x.gauge.grid.tail_slice()] < -0.5):
        raise NotHypernaturalError("negative or overflowing entries on the grid tail")
    return np.floor(vals + 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# subpoints


def restrict(x: GenNumber, L: IndexSet) -> GenNumber:
    if not L.grid_cofinal(x.gauge.grid):
        raise ValueError(f"index set {L.name} is not cofinal on the grid")
    if x.symbolic:
        idx = dict(x.rep.indexsets)
        base = L.name[:-2] if L.complement_of else L.name
        if base not in idx:
            idx[base] = L if not L.complement_of else L.complement()
        rep = SymbolicNet(x.expr, x.gauge, idx)
    else:
        rep = x.rep
    return GenNumber(rep, x.kind, restrict_to=L, check=False)


def _sign_partitions(d: GenNumber) -> list[IndexSet]:
    s = d.samples()
    v = s.to_complex().real
    slack = np.exp(s.logerr)
    out = []
    for label, m in (("pos", v > slack), ("neg", v < -slack), ("zero", np.abs(v) <= slack)):
        if m[-3:].any():
            out.append(IndexSet.from_mask(f"auto_{label}", d.gauge.grid, m, f"grid points where y - x is {label}"))
    return out


def _candidate_sets(x: GenNumber, y: GenNumber, sets) -> list[IndexSet]:
    cands = []
    for L in sets or ():
        cands += [L, L.complement()]
    if x.symbolic:
        for name, L in x.rep.indexsets.items():
            cands += [L, L.complement()]
    if y.symbolic:
        for name, L in y.rep.indexsets.items():
            cands += [L, L.complement()]
    cands += _sign_partitions(y - x)
    return [L for L in cands if L.grid_cofinal(x.gauge.grid)]


def sbpt_lt(x: GenNumber, y, sets=None, N: int = DEFAULT_ORDER) -> Verdict:
    """x < y on some cofinal index set."""
    x, y = _pair(x, y)
    for L in _candidate_sets(x, y, sets):
        v = lt(restrict(x, L), restrict(y, L), N)
        if v.true:
            return Verdict(Truth.TRUE, N, v.method, f"witness {L.name}: {v.detail}")
    return Verdict(Truth.UNDECIDABLE, N, "sampled", "no witness index set at grid resolution")


def sbpt_gt(x: GenNumber, y, sets=None, N: int = DEFAULT_ORDER) -> Verdict:
    x, y = _pair(x, y)
    return sbpt_lt(y, x, sets, N)


def sbpt_eq(x: GenNumber, y, sets=None, N: int = DEFAULT_ORDER) -> Verdict:
    x, y = _pair(x, y)
    if eq(x, y, N).true:
        return Verdict(Truth.TRUE, N, "symbolic", "equal on every index set")
    for L in _candidate_sets(x, y, sets):
        v = eq(restrict(x, L), restrict(y, L), N)
        if v.true:
            return Verdict(Truth.TRUE, N, v.method, f"witness {L.name}: {v.detail}")
    return Verdict(Truth.UNDECIDABLE, N, "sampled", "no witness index set at grid resolution")


# ---------------------------------------------------------------------------
# change of gauge


def gauge_leq(sigma: Gauge, rho: Gauge) -> bool:
    """σ_ε ≤ ρ_ε on the grid tail."""
    t = rho.grid.tail_slice()
    return bool(np.all(sigma.log_rho[t] <= rho.log_rho[t] + 1e-12))


def lift(x: GenNumber, sigma: Gauge) -> GenNumber:
    """The same representative read over a smaller gauge σ ≤ ρ."""
    if not gauge_leq(sigma, x.gauge):
        raise GaugeError("lift needs σ ≤ ρ on the grid")
    return _move(x, sigma)


def regauge(x: GenNumber, rho: Gauge) -> GenNumber:
    """Map [x]_σ to [x]_ρ for σ ≤ ρ; only equivalence and order change."""
    if not gauge_leq(x.gauge, rho):
        raise GaugeError("regauge needs the source gauge below the target")
    return _move(x, rho)


def _move(x: GenNumber, target: Gauge) -> GenNumber:
    if x.symbolic:
        node = nl.replace_rho(x.expr, x.gauge.rho)
        return GenNumber(SymbolicNet(node, target, x.rep.indexsets), x.kind)
    return GenNumber(SampledNet(x.samples(), target), x.kind)


# ---------------------------------------------------------------------------
# positivity criteria


def _perturbations(gauge: Gauge) -> list[nl.Node]:
    return [
        nl.ZERO,
        nl.parse("-exp(-log(rho)^2)"),
        nl.parse("exp(-log(rho)^2)*sin(eps^-1)"),
        nl.parse("-2*exp(-rho^-1)"),
        nl.parse("-exp(eps^-1*log(rho))"),
    ]


def _eventually_positive(x: GenNumber, N: int) -> Verdict:
    if x.symbolic:
        a = x.asym()
        if a.kind == "zero":
            return Verdict(Truth.FALSE, N, "symbolic", "identically zero")
        if a.kind != "unknown":
            if a.sign == 1 and isinstance(a.floor, tuple) and a.kind != "osc":
                return Verdict(Truth.TRUE, N, "symbolic", "eventually positive")
            if a.sign == 1 and isinstance(a.floor, tuple):
                return Verdict(Truth.TRUE, N, "symbolic", "eventually positive on every branch")
            if a.sign in (-1, "mixed", "le0"):
                return Verdict(Truth.FALSE, N, "symbolic", "non-positive on a cofinal set")
            if a.sign == "ge0" and a.floor == "none":
                return Verdict(Truth.FALSE, N, "symbolic", "vanishes on a cofinal set")
    return _sampled_sign(x.samples(), x.gauge, N, x.restrict_to, strict=True)


def mayer_conditions(x: GenNumber, N: int = DEFAULT_ORDER) -> dict[str, Verdict]:
    """The four equivalent positivity criteria for a real generalized number.

    invertible_nonneg: x invertible and x ≥ 0;
    all_reps_positive: every tested representative is eventually > 0;
    all_reps_above_power: every tested representative eventually exceeds ρ^m;
    some_rep_above_power: the given representative eventually exceeds ρ^m.
    """
    zero = GenNumber.of(0, x.gauge)
    c1 = v_and(is_invertible(x, N), leq(zero, x, N))
    reps = [x] + [x + GenNumber(SymbolicNet(p, x.gauge), check=False) for p in _perturbations(x.gauge)[1:]]
    if not x.symbolic:
        reps = [x]
    c2 = v_and(*[_eventually_positive(r, N) for r in reps])
    o = x.order()
    if o.value == math.inf:
        neg = Verdict(Truth.FALSE, N, "symbolic" if o.exact else "sampled", "negligible, no power bound")
        return {"invertible_nonneg": c1, "all_reps_positive": c2,
                "all_reps_above_power": neg, "some_rep_above_power": neg}
    m = math.floor(o.value) + 1 if o.exact else math.ceil(o.value + (o.ci or 0)) + 1
    if x.asym().kind == "osc" and isinstance(x.asym().floor, tuple):
        m = math.floor(cn.order_from_scale(x.asym().floor[0], x.gauge.scale)) + 1
    pm = GenNumber.d_rho(x.gauge, m)
    c3 = v_and(*[_eventually_positive(r - pm, N) for r in reps])
    c4 = _eventually_positive(x - pm, N)
    return {"invertible_nonneg": c1, "all_reps_positive": c2, "all_reps_above_power": c3, "some_rep_above_power": c4}
