"""Expression language for ε-nets.

A small grammar covering rational/decimal literals, the imaginary unit,
the symbols ``eps`` and ``rho``, the functions log/exp/sin/cos/abs/conj,
binary arithmetic with rational exponents, ``piecewise`` over named index
sets and free complex parameters ``param(name)``.

Grammar::

    expr   := term {("+"|"-") term}
    term   := factor {("*"|"/") factor}
    factor := ["-"] base ["^" rational]
    base   := number | "i" | "eps" | "rho" | func "(" expr ")"
            | "piecewise" "(" ident "," expr "," expr ")"
            | "param" "(" ident ")" | "(" expr ")"
    func   := "log" | "exp" | "sin" | "cos" | "abs" | "conj"
    rational := integer | "(" integer "/" integer ")"

Exponents may carry a sign (``eps^-1``, ``rho^(-1/2)``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping

import mpmath
import numpy as np

FUNCS = ("log", "exp", "sin", "cos", "abs", "conj")
ANALYTIC_FUNCS = ("log", "exp", "sin", "cos")


class NetlangError(ValueError):
    pass


class NetlangSyntaxError(NetlangError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"syntax error at line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownIdentifierError(NetlangSyntaxError):
    def __init__(self, name: str, line: int, column: int):
        NetlangError.__init__(
            self, f"unknown identifier {name!r} at line {line}, column {column}"
        )
        self.name = name
        self.line = line
        self.column = column


class NonRationalExponentError(NetlangSyntaxError):
    def __init__(self, found: str, line: int, column: int):
        NetlangError.__init__(
            self,
            f"non-rational exponent {found!r} at line {line}, column {column}",
        )
        self.line = line
        self.column = column


class EvaluationDomainError(NetlangError):
    def __init__(self, message: str, subexpr: "Node"):
        super().__init__(f"{message} in subexpression '{to_text(subexpr)}'")
        self.subexpr = subexpr


class PrecisionExhaustedError(EvaluationDomainError):
    """Working precision hit its cap before two runs agreed, e.g. sin of a huge argument."""


class NotAnalyticError(NetlangError):
    pass


# ---------------------------------------------------------------------------
# AST


class Node:
    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Num(Node):
    value: Fraction


@dataclass(frozen=True)
class Imag(Node):
    pass


@dataclass(frozen=True)
class Eps(Node):
    pass


@dataclass(frozen=True)
class Rho(Node):
    pass


@dataclass(frozen=True)
class Param(Node):
    name: str


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node


@dataclass(frozen=True)
class Piecewise(Node):
    index: str
    a: Node
    b: Node


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exp: Fraction


ZERO = Num(Fraction(0))
ONE = Num(Fraction(1))


def num(value) -> Node:
    """Literal node for a rational value; negative values become Neg(Num)."""
    v = Fraction(value)
    return Neg(Num(-v)) if v < 0 else Num(v)


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Func, Neg)):
        return (node.arg,)
    if isinstance(node, Piecewise):
        return (node.a, node.b)
    if isinstance(node, (Add, Sub, Mul, Div)):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base,)
    return ()


def walk(node: Node) -> Iterator[Node]:
    yield node
    for c in children(node):
        yield from walk(c)


def free_params(node: Node) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Param)}


def index_names(node: Node) -> set[str]:
    return {n.index for n in walk(node) if isinstance(n, Piecewise)}


def depth(node: Node) -> int:
    cs = children(node)
    return 1 + (max(depth(c) for c in cs) if cs else 0)


# ---------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise NetlangSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, params: tuple[str, ...]):
        self.toks = _tokenize(text)
        self.i = 0
        self.params = params

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, tok: _Tok | None = None):
        t = tok or self.tok
        raise NetlangSyntaxError(message, t.line, t.col)

    def describe(self, tok: _Tok) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail(f"expected {text!r}, found {self.describe(self.tok)}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.describe(self.tok)}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            if self.accept("+"):
                node = Add(node, self.term())
            elif self.accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            if self.accept("*"):
                node = Mul(node, self.factor())
            elif self.accept("/"):
                node = Div(node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        negate = self.accept("-")
        node = self.base()
        if self.accept("^"):
            node = Pow(node, self.rational())
        return Neg(node) if negate else node

    def integer(self, allow_sign: bool = True) -> int:
        sign = -1 if allow_sign and self.accept("-") else 1
        tok = self.tok
        if tok.kind == "num":
            if not tok.text.isdigit():
                raise NonRationalExponentError(tok.text, tok.line, tok.col)
            self.i += 1
            return sign * int(tok.text)
        if tok.kind == "ident":
            raise NonRationalExponentError(tok.text, tok.line, tok.col)
        self.fail(f"expected integer exponent, found {self.describe(tok)}")

    def rational(self) -> Fraction:
        if self.accept("("):
            p = self.integer()
            q = 1
            if self.accept("/"):
                q = self.integer()
                if q == 0:
                    self.fail("zero denominator in exponent", self.toks[self.i - 1])
            elif not (self.tok.kind == "op" and self.tok.text == ")"):
                if self.tok.kind != "eof":
                    raise NonRationalExponentError(
                        self.tok.text, self.tok.line, self.tok.col
                    )
            self.expect(")")
            return Fraction(p, q)
        return Fraction(self.integer())

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident":
            self.fail(f"expected identifier, found {self.describe(tok)}")
        self.i += 1
        return tok.text

    def base(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(Fraction(tok.text))
        if tok.kind == "ident":
            name = tok.text
            self.i += 1
            if name == "i":
                return Imag()
            if name == "eps":
                return Eps()
            if name == "rho":
                return Rho()
            if name in FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(name, arg)
            if name == "piecewise":
                self.expect("(")
                index = self.ident()
                self.expect(",")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return Piecewise(index, a, b)
            if name == "param":
                self.expect("(")
                pname = self.ident()
                self.expect(")")
                return Param(pname)
            if name in self.params:
                return Param(name)
            raise UnknownIdentifierError(name, tok.line, tok.col)
        if self.accept("("):
            lit = self._ratio_literal()
            if lit is not None:
                return lit
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {self.describe(tok)}")

    def _ratio_literal(self) -> Node | None:
        # "(p/q)" with bare integers is a single rational literal
        t = self.toks[self.i:self.i + 4]
        if (len(t) == 4 and t[0].kind == "num" and t[0].text.isdigit() and t[1].text == "/"
                and t[2].kind == "num" and t[2].text.isdigit() and int(t[2].text) != 0 and t[3].text == ")"):
            self.i += 4
            return Num(Fraction(int(t[0].text), int(t[2].text)))
        return None


def parse(text: str, params: tuple[str, ...] | list[str] = ()) -> Node:
    """Parse ``text`` into an AST.

    Names listed in ``params`` may be written bare (``z``) instead of
    ``param(z)``.
    """
    return _Parser(text, tuple(params)).parse()


# ---------------------------------------------------------------------------
# Printer

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node: Node) -> int:
    return _PREC.get(type(node), 5)


def _fraction_text(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"({v.numerator}/{v.denominator})"
    places = max(twos, fives)
    scaled = v.numerator * 10**places // v.denominator
    whole, frac = divmod(scaled, 10**places)
    return f"{whole}.{str(frac).rjust(places, '0').rstrip('0')}"


def _exp_text(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"({q.numerator}/{q.denominator})"


def _is_int_literal(node: Node) -> bool:
    return isinstance(node, Num) and node.value.denominator == 1


def to_text(node: Node) -> str:
    def p(child: Node, minprec: int) -> str:
        s = to_text(child)
        return f"({s})" if _prec(child) < minprec else s

    if isinstance(node, Num):
        return _fraction_text(node.value)
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, Eps):
        return "eps"
    if isinstance(node, Rho):
        return "rho"
    if isinstance(node, Param):
        return f"param({node.name})"
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Piecewise):
        return f"piecewise({node.index}, {to_text(node.a)}, {to_text(node.b)})"
    if isinstance(node, Neg):
        return "-" + p(node.arg, 4)
    if isinstance(node, Add):
        return f"{p(node.left, 1)} + {p(node.right, 2)}"
    if isinstance(node, Sub):
        return f"{p(node.left, 1)} - {p(node.right, 2)}"
    if isinstance(node, Mul):
        return f"{p(node.left, 2)} * {p(node.right, 3)}"
    if isinstance(node, Div):
        left = p(node.left, 2)
        if _is_int_literal(node.left) and _is_int_literal(node.right):
            left = f"({left})"  # keep "(p/q)" free for the literal
        return f"{left} / {p(node.right, 3)}"
    if isinstance(node, Pow):
        return f"{p(node.base, 5)}^{_exp_text(node.exp)}"
    raise TypeError(f"not a netlang node: {node!r}")


# ---------------------------------------------------------------------------
# Construction helpers with light folding (used by differentiation and by
# the higher modules when they assemble nets programmatically).


def _is_num(node: Node, value) -> bool:
    return isinstance(node, Num) and node.value == value


def add(a: Node, b: Node) -> Node:
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if isinstance(b, Neg):
        return Sub(a, b.arg)
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return neg(b)
    return Sub(a, b)


def neg(a: Node) -> Node:
    if _is_num(a, 0):
        return a
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if _is_num(b, 1):
        return a
    if _is_num(a, 0):
        return ZERO
    return Div(a, b)


def power(a: Node, q) -> Node:
    q = Fraction(q)
    if q == 0:
        return ONE
    if q == 1:
        return a
    if isinstance(a, Pow):
        # only merge when it cannot change the branch
        if q.denominator == 1 and a.exp.denominator == 1:
            return Pow(a.base, a.exp * q)
    return Pow(a, q)


def func(name: str, arg: Node) -> Node:
    if name not in FUNCS:
        raise NetlangError(f"unknown function {name!r}")
    return Func(name, arg)


def substitute(node: Node, mapping: Mapping[str, Node]) -> Node:
    """Replace ``param(name)`` leaves by the given subtrees."""
    if isinstance(node, Param):
        return mapping.get(node.name, node)
    if isinstance(node, Func):
        return Func(node.name, substitute(node.arg, mapping))
    if isinstance(node, Piecewise):
        return Piecewise(
            node.index, substitute(node.a, mapping), substitute(node.b, mapping)
        )
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, mapping))
    if isinstance(node, (Add, Sub, Mul, Div)):
        return type(node)(substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, mapping), node.exp)
    return node


def replace_rho(node: Node, rho: Node) -> Node:
    if isinstance(node, Rho):
        return rho
    if isinstance(node, Func):
        return Func(node.name, replace_rho(node.arg, rho))
    if isinstance(node, Piecewise):
        return Piecewise(node.index, replace_rho(node.a, rho), replace_rho(node.b, rho))
    if isinstance(node, Neg):
        return Neg(replace_rho(node.arg, rho))
    if isinstance(node, (Add, Sub, Mul, Div)):
        return type(node)(replace_rho(node.left, rho), replace_rho(node.right, rho))
    if isinstance(node, Pow):
        return Pow(replace_rho(node.base, rho), node.exp)
    return node


def diff(node: Node, name: str) -> Node:
    """Complex derivative with respect to ``param(name)``.

    abs and conj are not holomorphic; differentiating through them raises
    NotAnalyticError unless the argument does not depend on ``name``.
    """
    if name not in free_params(node):
        return ZERO
    if isinstance(node, Param):
        return ONE
    if isinstance(node, Neg):
        return neg(diff(node.arg, name))
    if isinstance(node, Add):
        return add(diff(node.left, name), diff(node.right, name))
    if isinstance(node, Sub):
        return sub(diff(node.left, name), diff(node.right, name))
    if isinstance(node, Mul):
        a, b = node.left, node.right
        return add(mul(diff(a, name), b), mul(a, diff(b, name)))
    if isinstance(node, Div):
        a, b = node.left, node.right
        da, db = diff(a, name), diff(b, name)
        if _is_num(db, 0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(node, Pow):
        q = node.exp
        return mul(mul(num(q), power(node.base, q - 1)), diff(node.base, name))
    if isinstance(node, Piecewise):
        return Piecewise(node.index, diff(node.a, name), diff(node.b, name))
    if isinstance(node, Func):
        u = node.arg
        du = diff(u, name)
        if node.name == "exp":
            return mul(node, du)
        if node.name == "log":
            return div(du, u)
        if node.name == "sin":
            return mul(Func("cos", u), du)
        if node.name == "cos":
            return neg(mul(Func("sin", u), du))
        raise NotAnalyticError(f"{node.name} is not complex-differentiable in {name}")
    raise TypeError(f"cannot differentiate {node!r}")


def is_analytic_in(node: Node, name: str) -> bool:
    """True when no abs/conj is applied to a subexpression depending on ``name``."""
    for n in walk(node):
        if isinstance(n, Func) and n.name in ("abs", "conj") and name in free_params(n.arg):
            return False
    return True


# ---------------------------------------------------------------------------
# Exact evaluation (arbitrary precision, rounded at the end)


@dataclass(frozen=True)
class LogPolar:
    """A complex number stored as log-magnitude and phase."""

    logmag: float
    phase: float

    def to_complex(self) -> complex:
        if self.logmag == -math.inf:
            return 0j
        r = math.exp(self.logmag)
        return complex(r * math.cos(self.phase), r * math.sin(self.phase))


class EvalContext:
    """What evaluation needs besides ε: the gauge net and index-set lookup."""

    def __init__(
        self,
        rho: Node | None = None,
        in_index: Callable[[str, float], bool] | None = None,
    ):
        self.rho = rho
        self.in_index = in_index


def _mp_eval(node: Node, eps, bindings, ctx: EvalContext | None):
    mp = mpmath.mp

    def ev(n: Node):
        if isinstance(n, Num):
            return mp.mpf(n.value.numerator) / n.value.denominator
        if isinstance(n, Imag):
            return mp.mpc(0, 1)
        if isinstance(n, Eps):
            return eps
        if isinstance(n, Rho):
            if ctx is None or ctx.rho is None:
                raise EvaluationDomainError("no gauge supplied for rho", n)
            return ev(ctx.rho)
        if isinstance(n, Param):
            if n.name not in bindings:
                raise EvaluationDomainError(f"unbound parameter {n.name!r}", n)
            v = bindings[n.name]
            return mp.mpc(v.real, v.imag) if isinstance(v, complex) else mp.mpmathify(v)
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, Add):
            return ev(n.left) + ev(n.right)
        if isinstance(n, Sub):
            return ev(n.left) - ev(n.right)
        if isinstance(n, Mul):
            return ev(n.left) * ev(n.right)
        if isinstance(n, Div):
            d = ev(n.right)
            if d == 0:
                raise EvaluationDomainError("division by exact zero", n)
            return ev(n.left) / d
        if isinstance(n, Pow):
            b = ev(n.base)
            q = n.exp
            if b == 0:
                if q < 0:
                    raise EvaluationDomainError("zero raised to a negative power", n)
                return mp.mpf(0) if q > 0 else mp.mpf(1)
            if q.denominator == 1:
                return b ** int(q)
            bc = mp.mpc(b)
            return mp.exp(mp.mpf(q.numerator) / q.denominator * mp.log(bc))
        if isinstance(n, Func):
            u = ev(n.arg)
            name = n.name
            if name == "exp":
                return mp.exp(u)
            if name == "log":
                if mp.im(u) == 0 and mp.re(u) <= 0:
                    raise EvaluationDomainError("log of a nonpositive real", n)
                return mp.log(u)
            if name == "sin":
                return mp.sin(u)
            if name == "cos":
                return mp.cos(u)
            if name == "abs":
                return abs(u)
            if name == "conj":
                return mp.conj(u)
        if isinstance(n, Piecewise):
            if ctx is None or ctx.in_index is None:
                raise EvaluationDomainError("piecewise needs index-set context", n)
            return ev(n.a) if ctx.in_index(n.index, float(eps)) else ev(n.b)
        raise TypeError(f"cannot evaluate {n!r}")

    return ev(node)


def _close(a, b) -> bool:
    mp = mpmath.mp
    if a == b:
        return True
    scale = max(abs(a), abs(b))
    return abs(a - b) <= scale * mp.mpf(2) ** -70


def evaluate_mp(
    node: Node,
    eps: float,
    bindings: Mapping[str, complex] | None = None,
    ctx: EvalContext | None = None,
    start_dps: int = 30,
    max_dps: int = 1600,
):
    """Evaluate with increasing working precision until two runs agree.

    Returns an mpmath number accurate well beyond double precision, or
    raises PrecisionExhaustedError when max_dps is reached first.
    """
    bindings = bindings or {}
    dps = start_dps
    with mpmath.workdps(dps):
        prev = _mp_eval(node, mpmath.mpf(eps), bindings, ctx)
    while dps < max_dps:
        dps = min(2 * dps, max_dps)
        with mpmath.workdps(dps):
            cur = _mp_eval(node, mpmath.mpf(eps), bindings, ctx)
            if _close(prev, cur):
                return +cur
        prev = cur
    raise PrecisionExhaustedError(f"no agreement at {max_dps} digits (eps={eps:.6g})", node)


_DBL_MAX_LOG = math.log(1.7e308)
_DBL_MIN_LOG = math.log(2.3e-308)


def _mp_logpolar(v) -> LogPolar:
    if v == 0:
        return LogPolar(-math.inf, 0.0)
    with mpmath.workdps(30):
        return LogPolar(float(mpmath.log(abs(v))), float(mpmath.arg(v)))


def evaluate(
    node: Node,
    eps: float,
    bindings: Mapping[str, complex] | None = None,
    ctx: EvalContext | None = None,
    form: str = "auto",
):
    """Evaluate ``node`` at ``eps``.

    form="complex" returns a Python complex (inf on overflow),
    form="log" always returns a LogPolar, and form="auto" returns a complex
    unless the magnitude leaves the double range, in which case the
    LogPolar form is returned.
    """
    v = evaluate_mp(node, eps, bindings, ctx)
    if form == "log":
        return _mp_logpolar(v)
    if form == "auto" and v != 0:
        lp = _mp_logpolar(v)
        if not (_DBL_MIN_LOG < lp.logmag < _DBL_MAX_LOG):
            return lp
    c = mpmath.mpc(v)
    return complex(float(c.real), float(c.imag))


# ---------------------------------------------------------------------------
# Fast vectorized evaluation in double precision


def compile_numpy(node: Node, params: tuple[str, ...] = ()) -> Callable:
    """Return ``f(eps, rho, *param_arrays) -> complex ndarray``.

    ``rho`` is the numeric gauge value at ``eps``; piecewise nodes are
    resolved by an ``in_index`` keyword callable when present.
    """
    order = list(params)

    def build(n: Node):
        if isinstance(n, Num):
            c = complex(float(n.value))
            return lambda env: c
        if isinstance(n, Imag):
            return lambda env: 1j
        if isinstance(n, Eps):
            return lambda env: env["eps"]
        if isinstance(n, Rho):
            return lambda env: env["rho"]
        if isinstance(n, Param):
            key = n.name
            return lambda env: env[key]
        if isinstance(n, Neg):
            f = build(n.arg)
            return lambda env: -f(env)
        if isinstance(n, (Add, Sub, Mul, Div)):
            f, g = build(n.left), build(n.right)
            if isinstance(n, Add):
                return lambda env: f(env) + g(env)
            if isinstance(n, Sub):
                return lambda env: f(env) - g(env)
            if isinstance(n, Mul):
                return lambda env: f(env) * g(env)
            return lambda env: f(env) / g(env)
        if isinstance(n, Pow):
            f = build(n.base)
            q = n.exp
            if q.denominator == 1:
                k = int(q)
                if k >= 0:
                    return lambda env: _ipow(f(env), k)
                return lambda env: 1.0 / _ipow(f(env), -k)
            qf = float(q)
            return lambda env: np.exp(qf * np.log(np.asarray(f(env), dtype=complex)))
        if isinstance(n, Func):
            f = build(n.arg)
            table = {
                "exp": np.exp,
                "log": lambda u: np.log(np.asarray(u, dtype=complex)),
                "sin": np.sin,
                "cos": np.cos,
                "abs": lambda u: np.abs(u) + 0j,
                "conj": np.conj,
            }
            op = table[n.name]
            return lambda env: op(f(env))
        if isinstance(n, Piecewise):
            fa, fb = build(n.a), build(n.b)
            name = n.index
            return lambda env: fa(env) if env["in_index"](name, env["eps"]) else fb(env)
        raise TypeError(f"cannot compile {n!r}")

    body = build(node)

    def run(eps, rho, *args, in_index=None):
        env = {"eps": eps, "rho": rho, "in_index": in_index}
        for k, v in zip(order, args):
            env[k] = v
        with np.errstate(all="ignore"):
            out = body(env)
        if args:
            shape = np.broadcast(*[np.asarray(a) for a in args]).shape
            out = np.asarray(out, dtype=complex)
            if out.shape == shape:
                return out
            return np.broadcast_to(out, shape).copy()
        return complex(out)

    return run


def _ipow(u, k: int):
    """u**k by repeated squaring; numpy's complex power is far slower."""
    u = np.asarray(u, dtype=complex)
    result = None
    while k:
        if k & 1:
            result = u if result is None else result * u
        k >>= 1
        if k:
            u = u * u
    return np.ones_like(u) if result is None else result
