"""Trees of the regularity structure, their canonical form and homogeneity.

Trees are plain nested tuples so that they are hashable, immutable and
cheap to compare:

    ('1',)               unit
    ('Xi',)              noise
    ('X', k)             monomial X^k, k a multi-index over (t, x_1, ..., x_d)
    ('C', j)             counterterm symbol C_j, j in {1, 2}
    ('P', factors)       product, factors sorted (descending tree order)
    ('I', k, arg)        integration I_k(arg)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

Tree = tuple

ONE: Tree = ("1",)
XI: Tree = ("Xi",)


@dataclass(frozen=True)
class Structure:
    """Parameters of the structure: noise regularity alpha, delta0 and dimension."""

    alpha: Fraction = Fraction(-51, 20)
    delta0: Fraction = Fraction(1, 10)
    d: int = 3
    # cap on the parabolic degree of monomials generated in the model set
    poly_degree: int = field(default=2)

    def __post_init__(self):
        object.__setattr__(self, "alpha", Fraction(self.alpha))
        object.__setattr__(self, "delta0", Fraction(self.delta0))
        validate_alpha(self.alpha)
        if not (4 * self.alpha + 10 < -self.delta0 < 0):
            raise ValueError(
                f"delta0={float(self.delta0)} violates 4*alpha+10 < -delta0 < 0 "
                f"at alpha={float(self.alpha)}"
            )
        if self.d not in (1, 2, 3):
            raise ValueError(f"d={self.d} must be 1, 2 or 3")


def validate_alpha(alpha) -> Fraction:
    alpha = Fraction(alpha)
    if not (Fraction(-18, 7) < alpha < Fraction(-5, 2)):
        raise ValueError(f"alpha={float(alpha)} outside the admissible interval (-18/7, -5/2)")
    return alpha


DEFAULT = Structure()


class Homogeneity(NamedTuple):
    """Affine homogeneity c0 + c1*alpha + c2*(-delta0)."""

    c0: int
    c1: int
    c2: int

    def __add__(self, other):
        return Homogeneity(self.c0 + other.c0, self.c1 + other.c1, self.c2 + other.c2)

    def value(self, alpha=DEFAULT.alpha, delta0=DEFAULT.delta0) -> Fraction:
        return self.c0 + self.c1 * Fraction(alpha) - self.c2 * Fraction(delta0)

    def at(self, S: Structure = DEFAULT) -> Fraction:
        return self.value(S.alpha, S.delta0)


# -- constructors -----------------------------------------------------------


def zero_index(d: int) -> tuple:
    return (0,) * (d + 1)


def unit_index(mu: int, d: int) -> tuple:
    k = [0] * (d + 1)
    k[mu] = 1
    return tuple(k)


def poly(k) -> Tree:
    k = tuple(int(v) for v in k)
    if any(v < 0 for v in k):
        raise ValueError(f"negative multi-index {k}")
    return ONE if not any(k) else ("X", k)


def x(mu: int, d: int = 3) -> Tree:
    """The monomial X_mu; mu=0 is time, mu=1..d are the spatial directions."""
    return poly(unit_index(mu, d))


def csym(j: int) -> Tree:
    if j not in (1, 2):
        raise ValueError(f"C-symbol index {j} must be 1 or 2")
    return ("C", j)


def integ(arg: Tree, k=None, d: int = 3) -> Tree:
    k = zero_index(d) if k is None else tuple(int(v) for v in k)
    return canonicalize(("I", k, arg))


def prod(*factors: Tree) -> Tree:
    return canonicalize(("P", tuple(factors)))


def psi(d: int = 3) -> Tree:
    return integ(XI, d=d)


def power(t: Tree, n: int) -> Tree:
    return prod(*([t] * n)) if n > 0 else ONE


# -- canonical form ---------------------------------------------------------


def is_poly(t: Tree) -> bool:
    return t[0] in ("1", "X")


def canonicalize(raw: Tree) -> Tree:
    """Return the canonical representative of a tree."""
    tag = raw[0]
    if tag in ("1", "Xi"):
        return raw
    if tag == "C":
        return csym(raw[1])
    if tag == "X":
        return poly(raw[1])
    if tag == "I":
        arg = canonicalize(raw[2])
        if is_poly(arg):
            raise ValueError("integration of a pure polynomial is excluded")
        return ("I", tuple(raw[1]), arg)
    if tag == "P":
        flat = []
        stack = [canonicalize(f) for f in raw[1]]
        while stack:
            f = stack.pop()
            if f[0] == "P":
                stack.extend(f[1])
            else:
                flat.append(f)
        k = None
        rest = []
        for f in flat:
            if f[0] == "X":
                k = f[1] if k is None else tuple(a + b for a, b in zip(k, f[1]))
            elif f[0] != "1":
                rest.append(f)
        if k is not None and any(k):
            rest.append(("X", k))
        if not rest:
            return ONE
        if len(rest) == 1:
            return rest[0]
        return ("P", tuple(sorted(rest, key=order_key, reverse=True)))
    raise ValueError(f"unknown tree tag {tag!r}")


def factors(t: Tree) -> tuple:
    """Product factors of a canonical tree (empty for the unit)."""
    if t[0] == "P":
        return t[1]
    if t[0] == "1":
        return ()
    return (t,)


def parabolic_degree(k) -> int:
    return 2 * k[0] + sum(k[1:])


@lru_cache(maxsize=None)
def homogeneity(t: Tree) -> Homogeneity:
    tag = t[0]
    if tag == "1":
        return Homogeneity(0, 0, 0)
    if tag == "Xi":
        return Homogeneity(0, 1, 0)
    if tag == "X":
        return Homogeneity(parabolic_degree(t[1]), 0, 0)
    if tag == "C":
        return Homogeneity(0, 0, 1)
    if tag == "I":
        h = homogeneity(t[2])
        return Homogeneity(h.c0 + 2 - parabolic_degree(t[1]), h.c1, h.c2)
    h = Homogeneity(0, 0, 0)
    for f in t[1]:
        h = h + homogeneity(f)
    return h


def hom_value(t: Tree, S: Structure = DEFAULT) -> Fraction:
    return homogeneity(t).at(S)


def order_key(t: Tree):
    """Total order on trees: homogeneity at the default parameters, then structure."""
    return (homogeneity(t).value(), _structure_key(t))


_TAG_RANK = {"1": 0, "X": 1, "C": 2, "Xi": 3, "I": 4, "P": 5}


def _structure_key(t: Tree):
    tag = t[0]
    if tag in ("1", "Xi"):
        return (_TAG_RANK[tag],)
    if tag in ("X", "C"):
        return (_TAG_RANK[tag], t[1])
    if tag == "I":
        return (_TAG_RANK[tag], t[1], _structure_key(t[2]))
    return (_TAG_RANK[tag], len(t[1]), tuple(_structure_key(f) for f in t[1]))


def tree_dim(t: Tree):
    """Number of space-time variables carried by multi-indices in t, or None."""
    tag = t[0]
    if tag == "X":
        return len(t[1])
    if tag == "I":
        return len(t[1])
    if tag == "P":
        for f in t[1]:
            n = tree_dim(f)
            if n is not None:
                return n
    return None
