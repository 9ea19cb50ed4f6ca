"""Finite linear combinations of trees and of tensor pairs, with rational coefficients."""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable

from .trees import ONE, Tree, canonicalize, order_key


class LinComb(dict):
    """Map tree -> Fraction with no zero coefficients."""

    @classmethod
    def of(cls, t: Tree, c=1) -> "LinComb":
        out = cls()
        out.add(t, c)
        return out

    def add(self, t, c=1):
        c = Fraction(c)
        if c == 0:
            return self
        v = self.get(t, 0) + c
        if v == 0:
            self.pop(t, None)
        else:
            self[t] = v
        return self

    def iadd(self, other, scale=1):
        scale = Fraction(scale)
        for t, c in other.items():
            self.add(t, c * scale)
        return self

    def __add__(self, other):
        return type(self)(self).iadd(other)

    def __sub__(self, other):
        return type(self)(self).iadd(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c):
        c = Fraction(c)
        out = type(self)()
        if c != 0:
            for t, v in self.items():
                out[t] = v * c
        return out

    def __mul__(self, other):
        if not isinstance(other, LinComb):
            return self.scale(other)
        out = LinComb()
        for a, ca in self.items():
            for b, cb in other.items():
                out.add(canonicalize(("P", (a, b))), ca * cb)
        return out

    __rmul__ = __mul__

    def map(self, f: Callable[[Tree], "LinComb"]) -> "LinComb":
        """Extend a map on trees linearly."""
        out = LinComb()
        for t, c in self.items():
            out.iadd(f(t), c)
        return out

    def sorted_items(self):
        return sorted(self.items(), key=lambda kv: order_key(kv[0]))


def lc(*pairs) -> LinComb:
    """Build a LinComb from (coefficient, tree) pairs or bare trees."""
    out = LinComb()
    for p in pairs:
        if isinstance(p, tuple) and len(p) == 2 and not isinstance(p[0], str):
            out.add(p[1], p[0])
        else:
            out.add(p, 1)
    return out


def lc_product(parts: Iterable[LinComb]) -> LinComb:
    out = LinComb.of(ONE)
    for p in parts:
        out = out * p
    return out


class TensorComb(dict):
    """Map (left tree, right tree) -> Fraction with no zero coefficients."""

    @classmethod
    def of(cls, a: Tree, b: Tree, c=1) -> "TensorComb":
        out = cls()
        out.add((a, b), c)
        return out

    add = LinComb.add
    iadd = LinComb.iadd
    scale = LinComb.scale
    __add__ = LinComb.__add__
    __sub__ = LinComb.__sub__

    def __mul__(self, other: "TensorComb") -> "TensorComb":
        out = TensorComb()
        for (a, b), c in self.items():
            for (p, q), e in other.items():
                out.add((canonicalize(("P", (a, p))), canonicalize(("P", (b, q)))), c * e)
        return out

    @classmethod
    def from_parts(cls, left: LinComb, right: LinComb) -> "TensorComb":
        out = cls()
        for a, c in left.items():
            for b, e in right.items():
                out.add((a, b), c * e)
        return out

    def map_left(self, f: Callable[[Tree], LinComb]) -> "TensorComb":
        out = TensorComb()
        for (a, b), c in self.items():
            for a2, c2 in f(a).items():
                out.add((a2, b), c * c2)
        return out

    def map_right(self, f: Callable[[Tree], LinComb]) -> "TensorComb":
        out = TensorComb()
        for (a, b), c in self.items():
            for b2, c2 in f(b).items():
                out.add((a, b2), c * c2)
        return out

    def multiply(self) -> LinComb:
        """The multiplication map applied to both slots."""
        out = LinComb()
        for (a, b), c in self.items():
            out.add(canonicalize(("P", (a, b))), c)
        return out

    def pair_right(self, g: Callable[[Tree], Fraction]) -> LinComb:
        """(I ⊗ g) for a functional g on the right slot."""
        out = LinComb()
        for (a, b), c in self.items():
            out.add(a, c * g(b))
        return out

    def pair_left(self, g: Callable[[Tree], Fraction]) -> LinComb:
        out = LinComb()
        for (a, b), c in self.items():
            out.add(b, c * g(a))
        return out

    def sorted_items(self):
        return sorted(self.items(), key=lambda kv: (order_key(kv[0][0]), order_key(kv[0][1])))
