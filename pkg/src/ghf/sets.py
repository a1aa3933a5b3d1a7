"""Internal and strongly internal sets built from per-ε planar regions.

Every region reports a signed margin net for a probe: positive inside
(a lower bound on the distance to the complement), negative outside.
Strong membership asks for a margin bounded below by a power of ρ,
internal membership only for a margin that is ≥ 0 up to a negligible net.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import netlang as nl
from .scalars import (
    DEFAULT_ORDER,
    GenNumber,
    SampledNet,
    SymbolicNet,
    Verdict,
    leq,
    lt,
    v_and,
)

HALF = nl.num(Fraction(1, 2))


def _re(e: nl.Node) -> nl.Node:
    return nl.mul(HALF, nl.add(e, nl.func("conj", e)))


def _node(v) -> nl.Node:
    if isinstance(v, nl.Node):
        return v
    if isinstance(v, str):
        return nl.parse(v)
    return nl.num(Fraction(v))


class Region:
    """A net of planar regions A_ε."""

    def margin(self, z: nl.Node) -> "Margin":
        raise NotImplementedError

    def ball_margin(self, c: nl.Node, r: nl.Node) -> "Margin":
        """Margin by which the open disk E_r(c) sits inside the region."""
        raise NotImplementedError

    def check(self, gauge) -> None:
        pass


@dataclass(frozen=True)
class Margin:
    """A signed margin: a leaf expression, or min/max over sub-margins."""

    op: str  # "leaf" | "min" | "max"
    expr: nl.Node | None = None
    parts: tuple = ()


@dataclass(frozen=True)
class Disk(Region):
    center: nl.Node
    radius: nl.Node

    def margin(self, z):
        return Margin("leaf", nl.sub(self.radius, nl.func("abs", nl.sub(z, self.center))))

    def ball_margin(self, c, r):
        return Margin("leaf", nl.sub(nl.sub(self.radius, nl.func("abs", nl.sub(c, self.center))), r))

    def check(self, gauge):
        for e in gauge.grid.points:
            v = nl.evaluate(self.radius, e, ctx=nl.EvalContext(gauge.rho))
            if not isinstance(v, complex) or v.real <= 0 or v.imag != 0:
                raise ValueError("disk radius must be positive at every grid point")


@dataclass(frozen=True)
class HalfPlane(Region):
    """{z : Re(conj(n)·z) ≤ offset} for a unit direction n."""

    normal: nl.Node
    offset: nl.Node

    def margin(self, z):
        return Margin("leaf", nl.sub(self.offset, _re(nl.mul(nl.func("conj", self.normal), z))))

    def ball_margin(self, c, r):
        return Margin("leaf", nl.sub(self.margin(c).expr, r))


@dataclass(frozen=True)
class Union(Region):
    parts: tuple

    def margin(self, z):
        return Margin("max", parts=tuple(p.margin(z) for p in self.parts))

    def ball_margin(self, c, r):
        # a ball covered only jointly by several pieces is not detected
        return Margin("max", parts=tuple(p.ball_margin(c, r) for p in self.parts))

    def check(self, gauge):
        for p in self.parts:
            p.check(gauge)


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple

    def margin(self, z):
        return Margin("min", parts=tuple(p.margin(z) for p in self.parts))

    def ball_margin(self, c, r):
        return Margin("min", parts=tuple(p.ball_margin(c, r) for p in self.parts))

    def check(self, gauge):
        for p in self.parts:
            p.check(gauge)


def disk(center, radius) -> Disk:
    return Disk(_node(center), _node(radius))


def half_plane(normal, offset) -> HalfPlane:
    return HalfPlane(_node(normal), _node(offset))


def rectangle(x0, x1, y0, y1) -> Intersection:
    x0, x1, y0, y1 = map(_node, (x0, x1, y0, y1))
    i = nl.Imag()
    return Intersection((
        HalfPlane(nl.num(1), x1),
        HalfPlane(nl.num(-1), nl.neg(x0)),
        HalfPlane(i, y1),
        HalfPlane(nl.neg(i), nl.neg(y0)),
    ))


def region_from_json(spec: dict) -> Region:
    if "disk" in spec:
        d = spec["disk"]
        return disk(d["center"], d["radius"])
    if "half_plane" in spec:
        d = spec["half_plane"]
        return half_plane(d["normal"], d["offset"])
    if "rectangle" in spec:
        d = spec["rectangle"]
        return rectangle(d["x0"], d["x1"], d["y0"], d["y1"])
    if "union" in spec:
        return Union(tuple(region_from_json(p) for p in spec["union"]))
    if "intersection" in spec:
        return Intersection(tuple(region_from_json(p) for p in spec["intersection"]))
    raise ValueError(f"unknown region declaration {sorted(spec)}")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InternalSet:
    """[A_ε]: points with some representative eventually in A_ε."""

    region: Region
    strong: bool = False


def StronglyInternalSet(region: Region) -> InternalSet:
    return InternalSet(region, strong=True)


@dataclass(frozen=True)
class SharpBall:
    center: GenNumber
    radius: GenNumber
    closed: bool = False

    def __post_init__(self):
        zero = GenNumber.of(0, self.radius.gauge)
        if not lt(zero, self.radius).true:
            raise ValueError("ball radius must be positive and invertible")


def _margin_number(m: Margin, gauge, indexsets) -> GenNumber:
    if m.op == "leaf":
        return GenNumber(SymbolicNet(m.expr, gauge, indexsets), "real", check=False)
    subs = [_margin_number(p, gauge, indexsets).values().real for p in m.parts]
    vals = np.max(subs, axis=0) if m.op == "max" else np.min(subs, axis=0)
    return GenNumber(SampledNet.from_values(vals, gauge, 1e-14), "real", check=False)


def _decide(m: Margin, gauge, indexsets, strict: bool, N: int) -> Verdict:
    """lt(0, margin) when strict, else leq(0, margin), exploiting min/max structure."""
    zero = GenNumber.of(0, gauge)
    rel = lt if strict else leq
    if m.op == "leaf":
        return rel(zero, _margin_number(m, gauge, indexsets), N)
    subs = [_decide(p, gauge, indexsets, strict, N) for p in m.parts]
    if m.op == "min":
        return v_and(*subs)
    if any(v.true for v in subs):
        return next(v for v in subs if v.true)
    return rel(zero, _margin_number(m, gauge, indexsets), N)


def _expr_of(z: GenNumber) -> tuple[nl.Node, dict]:
    if not z.symbolic:
        raise TypeError("membership needs a symbolic probe")
    return z.expr, z.rep.indexsets


def member(z: GenNumber, S: InternalSet | SharpBall, N: int = DEFAULT_ORDER) -> Verdict:
    """Membership of a generalized point in an internal set or a sharp ball."""
    if isinstance(S, SharpBall):
        dist = abs(z - S.center)
        return leq(dist, S.radius, N) if S.closed else lt(dist, S.radius, N)
    expr, idx = _expr_of(z)
    return _decide(S.region.margin(expr), z.gauge, idx, S.strong, N)


def ball_in_strongly_internal(B: SharpBall, S: InternalSet, N: int = DEFAULT_ORDER) -> Verdict:
    """Whether a closed sharp ball lies inside the strongly internal set ⟨A_ε⟩."""
    if not S.strong:
        raise ValueError("containment is decided for strongly internal sets")
    c, idx = _expr_of(B.center)
    r, idx2 = _expr_of(B.radius)
    return _decide(S.region.ball_margin(c, r), B.center.gauge, {**idx, **idx2}, True, N)


def contains_at(region: Region, z: complex, eps: float, gauge) -> bool:
    """Plain per-ε membership of a complex point in A_ε."""
    m = region.margin(nl.Param("z"))
    return _margin_value(m, z, eps, gauge) > 0


def _margin_value(m: Margin, z: complex, eps: float, gauge) -> float:
    if m.op == "leaf":
        v = nl.evaluate(m.expr, eps, {"z": z}, nl.EvalContext(gauge.rho), form="complex")
        return v.real
    vals = [_margin_value(p, z, eps, gauge) for p in m.parts]
    return max(vals) if m.op == "max" else min(vals)
