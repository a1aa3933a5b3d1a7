"""Independent reference evaluation of netlang trees through sympy."""

import math

import sympy as sp

from ghf import netlang as nl

_FUNCS = {"exp": sp.exp, "log": sp.log, "sin": sp.sin, "cos": sp.cos, "abs": sp.Abs, "conj": sp.conjugate}


def exact_float(x: float) -> sp.Float:
    return sp.Float(x, 60)


def exact_complex(c: complex):
    return exact_float(c.real) + sp.I * exact_float(c.imag)


def to_sympy(node: nl.Node, eps, rho, bindings: dict, member=lambda name: False):
    def go(n):
        if isinstance(n, nl.Num):
            return sp.Rational(n.value.numerator, n.value.denominator)
        if isinstance(n, nl.Imag):
            return sp.I
        if isinstance(n, nl.Eps):
            return eps
        if isinstance(n, nl.Rho):
            return rho
        if isinstance(n, nl.Param):
            return bindings[n.name]
        if isinstance(n, nl.Neg):
            return -go(n.arg)
        if isinstance(n, nl.Add):
            return go(n.left) + go(n.right)
        if isinstance(n, nl.Sub):
            return go(n.left) - go(n.right)
        if isinstance(n, nl.Mul):
            return go(n.left) * go(n.right)
        if isinstance(n, nl.Div):
            return go(n.left) / go(n.right)
        if isinstance(n, nl.Pow):
            return sp.Pow(go(n.base), sp.Rational(n.exp.numerator, n.exp.denominator))
        if isinstance(n, nl.Piecewise):
            return go(n.a) if member(n.index) else go(n.b)
        return _FUNCS[n.name](go(n.arg))

    return go(node)


def reference_value(node, eps: float, rho_node: nl.Node, bindings: dict, member=lambda name: False) -> complex:
    e = exact_float(eps)
    rho = to_sympy(rho_node, e, None, {})
    expr = to_sympy(node, e, rho, {k: exact_complex(complex(v)) for k, v in bindings.items()}, member)
    return complex(sp.N(expr, 40))


def ulp_distance(x: complex, ref: complex) -> float:
    """Worst componentwise distance in ulps.

    A component far below the modulus is measured in ulps of the modulus,
    since its relative accuracy is not meaningful there.
    """
    m = max(abs(ref.real), abs(ref.imag))
    if m == 0:
        return 0.0 if x == 0 else math.inf
    worst = 0.0
    for a, b in ((x.real, ref.real), (x.imag, ref.imag)):
        scale = abs(b) if abs(b) > 1e-8 * m else m
        worst = max(worst, abs(a - b) / math.ulp(scale))
    return worst
