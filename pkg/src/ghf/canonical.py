"""Exact normal forms and asymptotic order algebra for netlang expressions.

Expressions are expanded into sums of monomials with exact Gaussian-rational
coefficients over "atoms" (eps, prime constants under fractional powers,
and opaque function applications).  Two expressions with the same normal
form define the same net, so ring identities are decided exactly.

For each normal form an :class:`Asym` describes how |x_ε| behaves as ε→0:
``log|x_ε| = S(ε) + O(1)`` with ``S`` a finite combination of growth
scales ``ε^-p · ℓ^k · (log ℓ)^j`` where ``ℓ = log(1/ε)``.  Orders relative
to a gauge follow by comparing leading scales.  Whenever a rule cannot
certify the leading behaviour (cancellation, oscillation under a rule gap)
the result is ``kind="unknown"`` and callers fall back to sampling.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import netlang as nl

# ---------------------------------------------------------------------------
# exact Gaussian rationals


@dataclass(frozen=True)
class QI:
    re: Fraction
    im: Fraction = Fraction(0)

    def __add__(self, o: "QI") -> "QI":
        return QI(self.re + o.re, self.im + o.im)

    def __neg__(self) -> "QI":
        return QI(-self.re, -self.im)

    def __sub__(self, o: "QI") -> "QI":
        return QI(self.re - o.re, self.im - o.im)

    def __mul__(self, o: "QI") -> "QI":
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def inverse(self) -> "QI":
        d = self.re * self.re + self.im * self.im
        return QI(self.re / d, -self.im / d)

    def conj(self) -> "QI":
        return QI(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))


Q0 = QI(Fraction(0))
Q1 = QI(Fraction(1))


# ---------------------------------------------------------------------------
# polynomials over atoms

Atom = tuple
Mono = tuple  # sorted tuple of (atom, Fraction exponent)

_key_cache: dict = {}


def _akey(atom: Atom) -> str:
    k = _key_cache.get(atom)
    if k is None:
        k = "(" + ",".join(repr(x) if not isinstance(x, Poly) else x.key for x in atom) + ")"
        _key_cache[atom] = k
    return k


def _mkey(mono: Mono) -> str:
    return "*".join(f"{_akey(a)}^{e}" for a, e in mono)


class Poly:
    __slots__ = ("terms", "_d", "key", "_hash")

    def __init__(self, d: dict):
        d = {m: c for m, c in d.items() if not c.is_zero()}
        self._d = d
        self.terms = tuple(sorted(d.items(), key=lambda t: _mkey(t[0])))
        self.key = "{" + "+".join(f"{c.re},{c.im}:{_mkey(m)}" for m, c in self.terms) + "}"
        self._hash = hash(self.key)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.key == other.key

    def __repr__(self) -> str:
        return f"Poly{self.key}"

    @staticmethod
    def const(c) -> "Poly":
        if not isinstance(c, QI):
            c = QI(Fraction(c))
        return Poly({(): c})

    @staticmethod
    def atom(a: Atom, e=1) -> "Poly":
        return mono_poly(QI(Fraction(1)), {a: Fraction(e)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == () for m, _ in self.terms)

    def const_value(self) -> QI:
        return self._d.get((), Q0)

    def monomial(self):
        """(coef, mono) if the polynomial is a single monomial, else None."""
        if len(self.terms) == 1:
            m, c = self.terms[0]
            return c, m
        return None

    def __add__(self, o: "Poly") -> "Poly":
        d = dict(self._d)
        for m, c in o._d.items():
            d[m] = d.get(m, Q0) + c
        return Poly(d)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self._d.items()})

    def __sub__(self, o: "Poly") -> "Poly":
        return self + (-o)

    def __mul__(self, o: "Poly") -> "Poly":
        acc: dict = {}
        for m1, c1 in self.terms:
            for m2, c2 in o.terms:
                prod = mono_mul(c1 * c2, m1, m2)
                for m, c in prod._d.items():
                    acc[m] = acc.get(m, Q0) + c
        return Poly(acc)

    def scale(self, c: QI) -> "Poly":
        return Poly({m: c * k for m, k in self._d.items()})


ZERO = Poly({})
ONE = Poly.const(1)
EPS: Atom = ("eps",)
EPS_POLY = None  # filled below
MAX_EXPAND_TERMS = 400


def _factor(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= n and p < 100000:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def rational_power(c: Fraction, q: Fraction) -> Poly:
    """Exact ``c**q`` for positive rational c as coefficient times prime atoms."""
    coef = QI(Fraction(1))
    atoms: dict = {}
    for base, sign in ((c.numerator, 1), (c.denominator, -1)):
        for p, k in _factor(base).items():
            e = sign * k * q
            whole = math.floor(e)
            frac = e - whole
            coef = coef * QI(Fraction(p) ** whole)
            if frac:
                atoms[("prime", p)] = atoms.get(("prime", p), Fraction(0)) + frac
    return mono_poly(coef, atoms)


def mono_poly(coef: QI, atoms: dict) -> Poly:
    """Normalize a monomial given as coefficient and atom→exponent map."""
    if coef.is_zero():
        return ZERO
    atoms = {a: Fraction(e) for a, e in atoms.items() if e != 0}
    extra = ONE
    # prime atoms: fold integer parts into the coefficient
    for a in [a for a in atoms if a[0] == "prime"]:
        e = atoms[a]
        whole = math.floor(e)
        if whole:
            coef = coef * QI(Fraction(a[1]) ** whole)
            atoms[a] = e - whole
            if atoms[a] == 0:
                del atoms[a]
    # exp atoms: merge into a single exponential where branch-safe
    exps = [a for a in atoms if a[0] == "exp"]
    if exps:
        total = ZERO
        for a in exps:
            e = atoms[a]
            if e.denominator == 1 or is_real(a[1]):
                total = total + a[1].scale(QI(e))
                del atoms[a]
        if not total.is_zero():
            key = ("exp", total)
            atoms[key] = atoms.get(key, Fraction(0)) + 1
    # bases raised to non-negative integer powers are expanded
    for a in [a for a in atoms if a[0] == "base"]:
        e = atoms[a]
        if e.denominator == 1 and e > 0:
            del atoms[a]
            extra = extra * poly_pow(a[1], int(e))
    mono = tuple(sorted(atoms.items(), key=lambda t: _akey(t[0])))
    base = Poly({mono: coef})
    return base if extra is ONE else base * extra


def mono_mul(c: QI, m1: Mono, m2: Mono) -> Poly:
    atoms = dict(m1)
    for a, e in m2:
        atoms[a] = atoms.get(a, Fraction(0)) + e
    return mono_poly(c, atoms)


def poly_pow(P: Poly, q) -> Poly:
    q = Fraction(q)
    if q == 0:
        return ONE
    if P.is_zero():
        if q < 0:
            raise ZeroDivisionError("zero to a negative power")
        return ZERO
    mono = P.monomial()
    if q.denominator == 1 and q > 0:
        n = int(q)
        if mono is None and len(P.terms) ** min(n, 8) > MAX_EXPAND_TERMS:
            return Poly.atom(("base", P), q)
        out = ONE
        for _ in range(n):
            out = out * P
        return out
    if mono is not None:
        c, m = mono
        if q.denominator == 1:
            inv = c
            for _ in range(abs(int(q)) - 1):
                inv = inv * c
            coef = inv.inverse()
            return mono_poly(coef, {a: e * q for a, e in m})
        # fractional power of a monomial: split off the positive parts
        out = ONE
        rest: dict = {}
        rest_coef = c
        if c.im == 0 and c.re > 0:
            out = rational_power(c.re, q)
            rest_coef = Q1
        for a, e in m:
            if _positive_atom(a):
                out = out * mono_poly(Q1, {a: e * q})
            else:
                rest[a] = e
        if rest or not (rest_coef.im == 0 and rest_coef.re == 1):
            out = out * Poly.atom(("base", mono_poly(rest_coef, rest)), q)
        return out
    # a sum: normalize the leading coefficient when it is safe to pull out
    lead = P.terms[0][1]
    if q.denominator == 1 or (lead.im == 0 and lead.re > 0):
        if lead.im == 0 and lead.re > 0:
            scale = rational_power(lead.re, q)
            return scale * Poly.atom(("base", P.scale(QI(1 / lead.re))), q)
        if q.denominator == 1:
            inv = lead
            for _ in range(abs(int(q)) - 1):
                inv = inv * lead
            return Poly.const(inv.inverse()) * Poly.atom(("base", P.scale(lead.inverse())), q)
    return Poly.atom(("base", P), q)


# ---------------------------------------------------------------------------
# predicates


def _positive_atom(a: Atom) -> bool:
    tag = a[0]
    if tag in ("eps", "prime"):
        return True
    if tag == "exp":
        return is_real(a[1])
    if tag == "base":
        return is_positive(a[1])
    return False


def _real_atom(a: Atom) -> bool:
    tag = a[0]
    if tag in ("eps", "prime", "abs"):
        return True
    if tag in ("exp", "sin", "cos"):
        return is_real(a[1])
    if tag == "log":
        return is_positive(a[1])
    if tag == "conj":
        return is_real(a[1])
    if tag == "pw":
        return is_real(a[2]) and is_real(a[3])
    if tag == "base":
        return is_real(a[1])
    return False


def is_real(P: Poly) -> bool:
    for m, c in P.terms:
        if c.im != 0:
            return False
        for a, e in m:
            if e.denominator == 1:
                if not _real_atom(a):
                    return False
            elif not _positive_atom(a):
                return False
    return True


def is_positive(P: Poly) -> bool:
    mono = P.monomial()
    if mono is None:
        return False
    c, m = mono
    return c.im == 0 and c.re > 0 and all(_positive_atom(a) for a, _ in m)


def depends_on_eps(P: Poly) -> bool:
    for m, _ in P.terms:
        for a, _ in m:
            if a[0] in ("eps", "pw", "param"):
                return True
            for x in a[1:]:
                if isinstance(x, Poly) and depends_on_eps(x):
                    return True
    return False


def has_params(P: Poly) -> bool:
    for m, _ in P.terms:
        for a, _ in m:
            if a[0] == "param":
                return True
            for x in a[1:]:
                if isinstance(x, Poly) and has_params(x):
                    return True
    return False


def has_piecewise(P: Poly) -> bool:
    for m, _ in P.terms:
        for a, _ in m:
            if a[0] == "pw":
                return True
            for x in a[1:]:
                if isinstance(x, Poly) and has_piecewise(x):
                    return True
    return False


# ---------------------------------------------------------------------------
# function constructors


def mk_exp(P: Poly) -> Poly:
    if P.is_zero():
        return ONE
    return Poly.atom(("exp", P))


def _log_rational(c: Fraction) -> Poly:
    out = ZERO
    for base, sign in ((c.numerator, 1), (c.denominator, -1)):
        for p, k in _factor(base).items():
            out = out + Poly.atom(("log", Poly.const(p))).scale(QI(Fraction(sign * k)))
    return out


def mk_log(P: Poly) -> Poly:
    if P == ONE:
        return ZERO
    if P.is_zero():
        raise ZeroDivisionError("log of zero")
    mono = P.monomial()
    if mono is not None:
        c, m = mono
        if c.im == 0 and c.re > 0 and all(_positive_atom(a) for a, _ in m):
            out = _log_rational(c.re) if c.re != 1 else ZERO
            for a, e in m:
                if a[0] == "exp":
                    part = a[1]
                elif a[0] == "prime":
                    part = Poly.atom(("log", Poly.const(a[1])))
                elif a[0] == "eps":
                    part = Poly.atom(("log", EPS_POLY))
                else:
                    part = Poly.atom(("log", Poly.atom(a)))
                out = out + part.scale(QI(e))
            return out
    return Poly.atom(("log", P))


def mk_sin(P: Poly) -> Poly:
    return ZERO if P.is_zero() else Poly.atom(("sin", P))


def mk_cos(P: Poly) -> Poly:
    return ONE if P.is_zero() else Poly.atom(("cos", P))


def mk_abs(P: Poly) -> Poly:
    mono = P.monomial()
    if mono is None:
        return ZERO if P.is_zero() else Poly.atom(("abs", P))
    c, m = mono
    n2 = c.re * c.re + c.im * c.im
    out = rational_power(n2, Fraction(1, 2))
    for a, e in m:
        if _positive_atom(a) or a[0] == "abs":
            out = out * mono_poly(Q1, {a: e})
        elif a[0] == "base":
            out = out * mono_poly(Q1, {("abs", a[1]): e})
        elif a[0] == "conj":
            out = out * mono_poly(Q1, {("abs", a[1]): e})
        else:
            out = out * mono_poly(Q1, {("abs", Poly.atom(a)): e})
    return out


def mk_conj(P: Poly) -> Poly:
    out = ZERO
    for m, c in P.terms:
        term = Poly.const(c.conj())
        for a, e in m:
            tag = a[0]
            if _real_atom(a) and (e.denominator == 1 or _positive_atom(a)):
                part = mono_poly(Q1, {a: e})
            elif tag == "exp" and e.denominator == 1:
                part = mono_poly(Q1, {("exp", mk_conj(a[1])): e})
            elif tag in ("sin", "cos") and e.denominator == 1:
                part = mono_poly(Q1, {(tag, mk_conj(a[1])): e})
            elif tag == "conj" and e.denominator == 1:
                part = poly_pow(a[1], e)
            elif tag == "pw" and e.denominator == 1:
                part = mono_poly(Q1, {("pw", a[1], mk_conj(a[2]), mk_conj(a[3])): e})
            elif tag == "base" and e.denominator == 1:
                part = mono_poly(Q1, {("base", mk_conj(a[1])): e})
            else:
                part = Poly.atom(("conj", mono_poly(Q1, {a: e})))
            term = term * part
        out = out + term
    return out


def mk_pw(name: str, A: Poly, B: Poly) -> Poly:
    if A == B:
        return A
    return Poly.atom(("pw", name, A, B))


EPS_POLY = Poly.atom(EPS)


def canon(node: nl.Node, rho: Poly | None = None, cache: dict | None = None) -> Poly:
    """Normal form of ``node``; ``rho`` is the normal form of the gauge net."""
    if cache is None:
        cache = {}
    hit = cache.get(node)
    if hit is not None:
        return hit

    def go(n: nl.Node) -> Poly:
        return canon(n, rho, cache)

    if isinstance(node, nl.Num):
        out = Poly.const(node.value)
    elif isinstance(node, nl.Imag):
        out = Poly.const(QI(Fraction(0), Fraction(1)))
    elif isinstance(node, nl.Eps):
        out = EPS_POLY
    elif isinstance(node, nl.Rho):
        if rho is None:
            raise ValueError("rho needs a gauge")
        out = rho
    elif isinstance(node, nl.Param):
        out = Poly.atom(("param", node.name))
    elif isinstance(node, nl.Neg):
        out = -go(node.arg)
    elif isinstance(node, nl.Add):
        out = go(node.left) + go(node.right)
    elif isinstance(node, nl.Sub):
        out = go(node.left) - go(node.right)
    elif isinstance(node, nl.Mul):
        out = go(node.left) * go(node.right)
    elif isinstance(node, nl.Div):
        out = go(node.left) * poly_pow(go(node.right), -1)
    elif isinstance(node, nl.Pow):
        out = poly_pow(go(node.base), node.exp)
    elif isinstance(node, nl.Func):
        arg = go(node.arg)
        out = {
            "exp": mk_exp,
            "log": mk_log,
            "sin": mk_sin,
            "cos": mk_cos,
            "abs": mk_abs,
            "conj": mk_conj,
        }[node.name](arg)
    elif isinstance(node, nl.Piecewise):
        out = mk_pw(node.index, go(node.a), go(node.b))
    else:
        raise TypeError(f"cannot normalize {node!r}")
    cache[node] = out
    return out


# ---------------------------------------------------------------------------
# numeric value of eps-free normal forms


def const_value(P: Poly) -> complex:
    total = 0j
    for m, c in P.terms:
        v = complex(c)
        for a, e in m:
            v *= _atom_const_value(a) ** float(e) if e.denominator != 1 else _atom_const_value(a) ** int(e)
        total += v
    return total


def _atom_const_value(a: Atom) -> complex:
    tag = a[0]
    if tag == "prime":
        return complex(a[1])
    if tag == "exp":
        return cmath.exp(const_value(a[1]))
    if tag == "log":
        return cmath.log(const_value(a[1]))
    if tag == "sin":
        return cmath.sin(const_value(a[1]))
    if tag == "cos":
        return cmath.cos(const_value(a[1]))
    if tag == "abs":
        return complex(abs(const_value(a[1])))
    if tag == "conj":
        return const_value(a[1]).conjugate()
    if tag == "base":
        return const_value(a[1])
    raise ValueError(f"atom {tag} is not constant")


# ---------------------------------------------------------------------------
# asymptotic descriptors

Basis = tuple  # (p, k, j): ε^-p ℓ^k (log ℓ)^j
TOL = 1e-12


def _clean(S: dict) -> dict:
    return {b: c for b, c in S.items() if abs(c) > TOL}


def s_add(S1: dict, S2: dict, w: float = 1.0) -> dict:
    out = dict(S1)
    for b, c in S2.items():
        out[b] = out.get(b, 0.0) + w * c
    return _clean(out)


def s_scale(S: dict, w: float) -> dict:
    return _clean({b: c * w for b, c in S.items()})


def leading(S: dict):
    if not S:
        return None
    b = max(S)
    return b, S[b]


def cmp_scale(S1: dict, S2: dict) -> int:
    """+1 if e^S1 dominates e^S2, -1 if dominated, 0 if the same scale."""
    lead = leading(s_add(S1, S2, -1.0))
    if lead is None:
        return 0
    return 1 if lead[1] > 0 else -1


Floor = object  # (S, lo) tuple, "none" (certified no power lower bound), or None (unknown)


@dataclass(frozen=True)
class Asym:
    """Leading asymptotic behaviour of |x_ε| as ε → 0.

    kind:
      zero    - the net vanishes for small ε
      exact   - |x_ε| / e^S(ε) → lo (= hi) > 0; phase is the limit of x/|x| if known
      theta   - lo ≤ |x_ε| / e^S(ε) ≤ hi eventually, lo > 0
      osc     - limsup |x_ε| / e^S(ε) = hi > 0 but the ratio does not stay away from 0
      unknown - no rule applies
    floor is a certified lower bound (S_low, c): |x_ε| ≥ c·e^S_low eventually;
    "none" records that no power lower bound exists, None that it is unknown.
    sign applies to real nets: 1, -1, "ge0", "le0", "mixed" or None.
    """

    kind: str
    S: dict = field(default_factory=dict)
    lo: float = 0.0
    hi: float = 0.0
    phase: complex | None = None
    sign: object = None
    floor: object = None
    reason: str = ""


UNKNOWN = Asym("unknown")
AZERO = Asym("zero", floor="none", sign=0)


def unknown(reason: str) -> Asym:
    return Asym("unknown", reason=reason)


def exact(S: dict, mag: float, phase: complex | None, sign=None) -> Asym:
    return Asym("exact", _clean(S), mag, mag, phase, sign, (_clean(S), mag))


def _sign_of_phase(phase, real: bool):
    if phase is None or not real:
        return None
    if abs(phase - 1) < 1e-9:
        return 1
    if abs(phase + 1) < 1e-9:
        return -1
    return None


def _sign_mul(a, b):
    if a == 0 or b == 0:
        return 0
    if a in (1, -1) and b in (1, -1):
        return a * b
    if "mixed" in (a, b) and (a in (1, -1) or b in (1, -1)):
        return "mixed"
    for s, t in ((a, b), (b, a)):
        if s in ("ge0", "le0") and t in (1, -1):
            flip = t == -1
            return {"ge0": "le0", "le0": "ge0"}[s] if flip else s
    return None


def asym_mul(x: Asym, y: Asym) -> Asym:
    if x.kind == "unknown" or y.kind == "unknown":
        return unknown(x.reason or y.reason)
    if x.kind == "zero" or y.kind == "zero":
        return AZERO
    rank = {"exact": 0, "theta": 1, "osc": 2}
    if x.kind == "osc" and y.kind == "osc":
        return unknown("product of two oscillating factors")
    kind = max(x.kind, y.kind, key=rank.get)
    S = s_add(x.S, y.S)
    phase = x.phase * y.phase if (kind == "exact" and x.phase is not None and y.phase is not None) else None
    lo = x.lo * y.lo if kind != "osc" else 0.0
    hi = x.hi * y.hi
    floor = None
    if x.floor == "none" or y.floor == "none":
        floor = "none" if (x.floor == "none" and y.floor != None) or (y.floor == "none" and x.floor != None) else None
    elif x.floor is not None and y.floor is not None:
        floor = (s_add(x.floor[0], y.floor[0]), x.floor[1] * y.floor[1])
    return Asym(kind, S, lo, hi, phase, _sign_mul(x.sign, y.sign), floor)


def asym_pow(x: Asym, e: Fraction) -> Asym:
    e = Fraction(e)
    ef = float(e)
    if x.kind == "unknown":
        return x
    if x.kind == "zero":
        return AZERO if e > 0 else unknown("zero to a non-positive power")
    sign = None
    if x.sign in (1, -1) and e.denominator == 1:
        sign = x.sign ** int(e) if e > 0 else x.sign ** (-int(e))
    elif x.sign == 1:
        sign = 1
    phase = None
    if x.phase is not None:
        if e.denominator == 1:
            phase = x.phase ** int(e)
        elif abs(x.phase - 1) < 1e-12:
            phase = 1 + 0j
    if x.kind in ("exact", "theta"):
        lo, hi = (x.lo**ef, x.hi**ef) if e > 0 else (x.hi**ef, x.lo**ef)
        floor = (s_scale(x.S, ef), lo)
        if e > 0 and isinstance(x.floor, tuple):
            floor = (s_scale(x.floor[0], ef), x.floor[1] ** ef)
        return Asym(x.kind, s_scale(x.S, ef), lo, hi, phase if x.kind == "exact" else None, sign, floor)
    # osc
    if e > 0:
        floor = "none" if x.floor == "none" else (
            (s_scale(x.floor[0], ef), x.floor[1] ** ef) if isinstance(x.floor, tuple) else None
        )
        return Asym("osc", s_scale(x.S, ef), 0.0, x.hi**ef, None, sign, floor)
    if isinstance(x.floor, tuple):
        S_new = s_scale(x.floor[0], ef)
        return Asym("osc", S_new, 0.0, x.floor[1] ** ef, None, sign, (s_scale(x.S, ef), x.hi**ef))
    return unknown("negative power of a net that approaches zero")


def asym_sum(parts: list[Asym], real: bool) -> Asym:
    parts = [p for p in parts if p.kind != "zero"]
    if not parts:
        return AZERO
    if any(p.kind == "unknown" for p in parts):
        return unknown(next(p.reason for p in parts if p.kind == "unknown") or "unknown summand")
    if len(parts) == 1:
        return parts[0]
    # dominant scale group
    top = parts[0].S
    for p in parts[1:]:
        if cmp_scale(p.S, top) > 0:
            top = p.S
    group = [p for p in parts if cmp_scale(p.S, top) == 0]
    rest = [p for p in parts if cmp_scale(p.S, top) < 0]
    if len(group) == 1:
        g = group[0]
        floor = g.floor
        if isinstance(floor, tuple) and any(cmp_scale(r.S, floor[0]) >= 0 for r in rest):
            floor = None if g.kind == "osc" else (g.S, g.lo)
        if g.kind == "osc" and rest:
            floor = None if floor == "none" else floor
        sign = g.sign if g.kind != "osc" or not rest or isinstance(floor, tuple) else None
        return Asym(g.kind, g.S, g.lo, g.hi, g.phase, sign, floor)
    if all(p.kind == "exact" and p.phase is not None for p in group):
        total = sum(p.lo * p.phase for p in group)
        scale = sum(p.lo for p in group)
        if abs(total) <= 1e-12 * scale:
            return unknown("cancellation of leading terms")
        mag = abs(total)
        phase = total / mag
        return exact(top, mag, phase, _sign_of_phase(phase, real))
    his = [p.hi for p in group]
    best_lo, best = 0.0, None
    for idx, p in enumerate(group):
        lo = p.lo - (sum(his) - his[idx])
        if lo > best_lo:
            best_lo, best = lo, p
    if best is not None:
        sign = best.sign if best.sign in (1, -1) else None
        return Asym("theta", top, best_lo, sum(his), None, sign, (top, best_lo))
    return unknown("same-scale summands without certified lower bound")


# ---------------------------------------------------------------------------


class AsymContext:
    """Index-set cofinality flags needed for piecewise atoms."""

    def __init__(self, cofinality: Callable[[str], tuple[bool, bool]] | None = None):
        self.cofinality = cofinality or (lambda name: (True, True))
        self.cache: dict = {}


def _growth_expansion(A: Poly, ctx: AsymContext):
    """Split A(ε) = Σ g_b·b(ε) + c0 + bounded oscillation + o(1)."""
    G: dict = {}
    c0 = 0j
    bound = 0.0
    for m, coef in A.terms:
        a_eps = Fraction(0)
        k_log = 0
        const = complex(coef)
        pure = True
        for a, e in m:
            if a == EPS:
                a_eps += e
            elif a[0] == "log" and a[1] == EPS_POLY and e.denominator == 1 and e > 0:
                k_log += int(e)
            elif not depends_on_eps(Poly.atom(a)):
                const *= _atom_const_value(a) ** (int(e) if e.denominator == 1 else float(e))
            else:
                pure = False
        if pure:
            c = const * (-1) ** k_log
            basis = (-a_eps, Fraction(k_log), Fraction(0))
            if basis > (0, 0, 0):
                G[basis] = G.get(basis, 0j) + c
            elif basis == (0, 0, 0):
                c0 += c
            continue
        M = asym(Poly({m: coef}), ctx)
        if M.kind == "zero":
            continue
        if M.kind == "unknown":
            return None
        lead = leading(M.S)
        if lead is None:
            if M.kind == "exact" and M.phase is not None:
                c0 += M.lo * M.phase
            else:
                bound += M.hi
        elif lead[1] < 0:
            continue
        else:
            return None
    return G, c0, bound


def _atom_asym(a: Atom, ctx: AsymContext) -> Asym:
    tag = a[0]
    if tag == "eps":
        return exact({(Fraction(0), Fraction(1), Fraction(0)): -1.0}, 1.0, 1 + 0j, 1)
    if tag == "param":
        return unknown(f"free parameter {a[1]}")
    if not depends_on_eps(Poly.atom(a)):
        v = _atom_const_value(a)
        if abs(v) == 0:
            return AZERO
        real = _real_atom(a)
        ph = v / abs(v)
        return exact({}, abs(v), ph, _sign_of_phase(ph, real))
    if tag == "exp":
        ge = _growth_expansion(a[1], ctx)
        if ge is None:
            return unknown("exponent growth not resolved")
        G, c0, bound = ge
        S = _clean({b: g.real for b, g in G.items()})
        im_growth = any(abs(g.imag) > TOL for g in G.values())
        mag = math.exp(c0.real)
        real = is_real(a[1])
        if bound > 0:
            return Asym("theta", S, mag * math.exp(-bound), mag * math.exp(bound), None,
                        1 if real else None, (S, mag * math.exp(-bound)))
        phase = None if im_growth else cmath.exp(1j * c0.imag)
        return exact(S, mag, phase, 1 if real else None)
    if tag == "log":
        P = asym(a[1], ctx)
        if P.kind != "exact":
            return unknown("log of a net without exact leading behaviour")
        lead = leading(P.S)
        if lead is not None:
            (p, k, j), c = lead
            if j != 0:
                return unknown("iterated logarithmic scale")
            S = {}
            if p:
                S[(Fraction(0), Fraction(1), Fraction(0))] = float(p)
            if k:
                S[(Fraction(0), Fraction(0), Fraction(1))] = float(k)
            return exact(S, abs(c), 1 + 0j if c > 0 else -1 + 0j, 1 if c > 0 else -1)
        if P.phase is None:
            return unknown("log of a net with unknown phase")
        L = complex(P.lo * P.phase)
        if L.imag == 0 and L.real < 0:
            return unknown("log near the branch cut")
        val = cmath.log(L)
        if abs(val) > 1e-9:
            real = is_positive(a[1])
            return exact({}, abs(val), val / abs(val), _sign_of_phase(val / abs(val), real))
        return asym(a[1] - ONE, ctx)
    if tag in ("sin", "cos"):
        U = asym(a[1], ctx)
        if U.kind == "zero":
            return AZERO if tag == "sin" else exact({}, 1.0, 1 + 0j, 1)
        if U.kind != "exact":
            return unknown(f"{tag} of a net without exact leading behaviour")
        lead = leading(U.S)
        if lead is None:
            if U.phase is None:
                return unknown(f"{tag} of a net with unknown phase")
            L = U.lo * U.phase
            v = cmath.sin(L) if tag == "sin" else cmath.cos(L)
            if abs(v) < 1e-9:
                return unknown(f"{tag} near a zero")
            real = is_real(a[1])
            return exact({}, abs(v), v / abs(v), _sign_of_phase(v / abs(v), real))
        if lead[1] < 0:
            if tag == "cos":
                return exact({}, 1.0, 1 + 0j, 1)
            return U
        if is_real(a[1]) and not has_piecewise(a[1]):
            return Asym("osc", {}, 0.0, 1.0, None, None, "none")
        return unknown(f"{tag} of a growing complex argument")
    if tag == "abs":
        P = asym(a[1], ctx)
        if P.kind in ("unknown", "zero"):
            return P
        sign = 1 if isinstance(P.floor, tuple) else ("ge0" if P.floor == "none" else None)
        return Asym(P.kind, P.S, P.lo, P.hi, 1 + 0j if P.kind == "exact" else None, sign, P.floor)
    if tag == "conj":
        P = asym(a[1], ctx)
        if P.kind in ("unknown", "zero"):
            return P
        ph = P.phase.conjugate() if P.phase is not None else None
        return Asym(P.kind, P.S, P.lo, P.hi, ph, P.sign, P.floor)
    if tag == "base":
        return asym(a[1], ctx)
    if tag == "pw":
        in_cof, out_cof = ctx.cofinality(a[1])
        if in_cof is None or out_cof is None:
            return unknown(f"cofinality of index set {a[1]} not known")
        A = asym(a[2], ctx)
        B = asym(a[3], ctx)
        if not out_cof:
            return A
        if not in_cof:
            return B
        if A.kind == "unknown" or B.kind == "unknown":
            return unknown("piecewise branch without leading behaviour")
        if A.kind == "zero" and B.kind == "zero":
            return AZERO
        if A.kind == "zero" or B.kind == "zero":
            X = B if A.kind == "zero" else A
            sign = {1: "ge0", -1: "le0"}.get(X.sign) if X.sign in (1, -1) else None
            return Asym("osc", X.S, 0.0, X.hi, None, sign, "none")
        sign = None
        if A.sign in (1, -1) and B.sign in (1, -1):
            sign = A.sign if A.sign == B.sign else "mixed"
        c = cmp_scale(A.S, B.S)
        if c == 0:
            fa, fb = A.floor, B.floor
            floor = None
            if isinstance(fa, tuple) and isinstance(fb, tuple):
                floor = fa if cmp_scale(fa[0], fb[0]) < 0 else fb
            elif "none" in (fa, fb):
                floor = "none"
            if A.kind == B.kind == "exact" and A.phase is not None and B.phase is not None \
                    and abs(A.lo - B.lo) < 1e-12 * A.lo and abs(A.phase - B.phase) < 1e-12:
                return exact(A.S, A.lo, A.phase, sign)
            lo = min(A.lo, B.lo)
            if lo > 0:
                return Asym("theta", A.S, lo, max(A.hi, B.hi), None, sign, floor)
            return Asym("osc", A.S, 0.0, max(A.hi, B.hi), None, sign, floor)
        big, small = (A, B) if c > 0 else (B, A)
        floor = small.floor if isinstance(small.floor, tuple) else small.floor
        if isinstance(big.floor, tuple) and isinstance(small.floor, tuple):
            floor = big.floor if cmp_scale(big.floor[0], small.floor[0]) < 0 else small.floor
        return Asym("osc", big.S, 0.0, big.hi, None, sign, floor)
    return unknown(f"no rule for {tag}")


def asym(P: Poly, ctx: AsymContext | None = None) -> Asym:
    ctx = ctx or AsymContext()
    hit = ctx.cache.get(P)
    if hit is not None:
        return hit
    parts = []
    for m, c in P.terms:
        cc = complex(c)
        mag = abs(cc)
        ph = cc / mag
        acc = exact({}, mag, ph, _sign_of_phase(ph, c.im == 0))
        for a, e in m:
            acc = asym_mul(acc, asym_pow(_atom_asym(a, ctx), e))
            if acc.kind == "unknown":
                break
        parts.append(acc)
    out = asym_sum(parts, is_real(P))
    ctx.cache[P] = out
    return out


def order_from_scale(S: dict, S_rho: dict) -> float:
    """lim log|x| / log ρ for |x| ≍ e^S and ρ ≍ e^S_rho."""
    lr = leading(S_rho)
    if lr is None or lr[1] >= 0:
        raise ValueError("gauge does not tend to zero")
    lx = leading(S)
    if lx is None:
        return 0.0
    if lx[0] > lr[0]:
        return math.inf if lx[1] < 0 else -math.inf
    if lx[0] < lr[0]:
        return 0.0
    return lx[1] / lr[1]


def tends_to_zero(S: dict) -> bool:
    lead = leading(S)
    return lead is not None and lead[1] < 0


def bounded(S: dict) -> bool:
    lead = leading(S)
    return lead is None or lead[1] < 0


def unbounded_growth(S: dict) -> bool:
    lead = leading(S)
    return lead is not None and lead[1] > 0


# ---------------------------------------------------------------------------
# back to expressions


def _coef_node(c: QI) -> nl.Node:
    re, im = nl.num(c.re), nl.num(c.im)
    if c.im == 0:
        return re
    return nl.add(re, nl.mul(im, nl.Imag()))


def _atom_node(a: Atom) -> nl.Node:
    tag = a[0]
    if tag == "eps":
        return nl.Eps()
    if tag == "prime":
        return nl.num(a[1])
    if tag == "param":
        return nl.Param(a[1])
    if tag in ("exp", "log", "sin", "cos", "abs", "conj"):
        return nl.Func(tag, to_node(a[1]))
    if tag == "pw":
        return nl.Piecewise(a[1], to_node(a[2]), to_node(a[3]))
    if tag == "base":
        return to_node(a[1])
    raise ValueError(f"unknown atom {tag}")


def to_node(P: Poly) -> nl.Node:
    """An expression whose normal form is P."""
    out = nl.ZERO
    for m, c in P.terms:
        term = _coef_node(c)
        for a, e in m:
            term = nl.mul(term, nl.power(_atom_node(a), e))
        out = nl.add(out, term)
    return out
