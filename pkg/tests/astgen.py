"""Random netlang ASTs for round-trip and evaluation tests."""

import random
from fractions import Fraction

from ghf import netlang as nl

PARAMS = ("z", "h")
INDEX_SETS = ("L", "M")
BINARY = (nl.Add, nl.Sub, nl.Mul, nl.Div)


def random_literal(rng: random.Random) -> Fraction:
    kind = rng.randrange(3)
    if kind == 0:
        return Fraction(rng.randrange(0, 50))
    if kind == 1:
        return Fraction(rng.randrange(0, 10**4), 10 ** rng.randrange(1, 4))
    return Fraction(rng.randrange(1, 20), rng.choice((3, 7, 9, 11)))


def random_exponent(rng: random.Random) -> Fraction:
    return Fraction(rng.randrange(-6, 7), rng.choice((1, 1, 2, 3)))


def random_ast(rng: random.Random, max_depth: int = 6, leaves=None) -> nl.Node:
    """A uniformly shaped random tree of depth at most ``max_depth``."""
    leaves = leaves or (
        lambda r: nl.Num(random_literal(r)),
        lambda r: nl.Imag(),
        lambda r: nl.Eps(),
        lambda r: nl.Rho(),
        lambda r: nl.Param(r.choice(PARAMS)),
    )
    if max_depth <= 1 or rng.random() < 0.25:
        return rng.choice(leaves)(rng)
    sub = lambda: random_ast(rng, max_depth - 1, leaves)  # noqa: E731
    kind = rng.randrange(6)
    if kind == 0:
        return rng.choice(BINARY)(sub(), sub())
    if kind == 1:
        return nl.Func(rng.choice(nl.FUNCS), sub())
    if kind == 2:
        return nl.Neg(sub())
    if kind == 3:
        return nl.Pow(sub(), random_exponent(rng))
    if kind == 4:
        return nl.Piecewise(rng.choice(INDEX_SETS), sub(), sub())
    return rng.choice(BINARY)(sub(), sub())
