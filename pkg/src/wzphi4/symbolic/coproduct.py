"""Coproducts, structure-group action and antipode, all in exact arithmetic."""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product as iproduct
from math import comb, factorial, floor
from typing import Callable, Mapping, Union

from .lincomb import LinComb, TensorComb
from .sector import is_positive
from .trees import (
    DEFAULT, ONE, Structure, Tree, canonicalize, hom_value, is_poly,
    parabolic_degree, poly,
)


def _sub_indices(k):
    """All multi-indices l <= k componentwise."""
    return iproduct(*(range(v + 1) for v in k))


def _mfact(k) -> int:
    out = 1
    for v in k:
        out *= factorial(v)
    return out


def _add(a, b):
    return tuple(p + q for p, q in zip(a, b))


def _indices_below(n_vars: int, bound: Fraction):
    """Multi-indices j with parabolic degree strictly below bound."""
    top = floor(bound) if bound > 0 else -1
    if top < 0:
        return []
    out = []
    for j in iproduct(*([range(top // 2 + 1)] + [range(top + 1)] * (n_vars - 1))):
        if parabolic_degree(j) < bound:
            out.append(j)
    return out


def integrate_lin(v: LinComb, k) -> LinComb:
    """Linear extension of I_k, with I_k of a polynomial equal to zero."""
    out = LinComb()
    for t, c in v.items():
        if not is_poly(t):
            out.add(("I", tuple(k), t), c)
    return out


def _poly_delta(k) -> TensorComb:
    out = TensorComb()
    for l in _sub_indices(k):
        m = tuple(a - b for a, b in zip(k, l))
        c = 1
        for a, b in zip(k, l):
            c *= comb(a, b)
        out.add((poly(l), poly(m)), c)
    return out


@lru_cache(maxsize=None)
def delta(t: Tree, S: Structure = DEFAULT) -> TensorComb:
    """The coproduct Delta: H -> H ⊗ H_+."""
    tag = t[0]
    if tag in ("1", "Xi", "C"):
        return TensorComb.of(t, ONE)
    if tag == "X":
        return _poly_delta(t[1])
    if tag == "P":
        out = TensorComb.of(ONE, ONE)
        for f in t[1]:
            out = out * delta(f, S)
        return out
    k, arg = t[1], t[2]
    out = TensorComb()
    for (s, sb), c in delta(arg, S).items():
        if not is_poly(s):
            out.add((("I", k, s), sb), c)
    h = hom_value(arg, S) + 2 - parabolic_degree(k)
    for j in _indices_below(len(k), h):
        top = ("I", _add(k, j), arg)
        for l in _sub_indices(j):
            m = tuple(a - b for a, b in zip(j, l))
            right = canonicalize(("P", (poly(m), top)))
            out.add((poly(l), right), Fraction(1, _mfact(l) * _mfact(m)))
    return out


@lru_cache(maxsize=None)
def delta_plus(t: Tree, S: Structure = DEFAULT) -> TensorComb:
    """The coproduct Delta^+ on H_+."""
    tag = t[0]
    if tag == "1":
        return TensorComb.of(ONE, ONE)
    if tag == "X":
        return _poly_delta(t[1])
    if tag == "P":
        out = TensorComb.of(ONE, ONE)
        for f in t[1]:
            out = out * delta_plus(f, S)
        return out
    if tag != "I":
        raise ValueError(f"Delta^+ is defined on positive trees only, got {t}")
    k, arg = t[1], t[2]
    out = TensorComb.of(ONE, t)
    for (s, sb), c in delta(arg, S).items():
        if is_poly(s):
            continue
        h = hom_value(s, S) + 2 - parabolic_degree(k)
        for l in _indices_below(len(k), h):
            left = ("I", _add(k, l), s)
            sign = (-1) ** sum(l)
            right = canonicalize(("P", (poly(l), sb)))
            out.add((left, right), c * Fraction(sign, _mfact(l)))
    return out


def counit(t: Tree) -> Fraction:
    return Fraction(1) if t == ONE else Fraction(0)


Character = Union[Mapping[Tree, object], Callable[[Tree], object]]


def character_value(g: Character, t: Tree):
    """Evaluate a multiplicative character, given on atoms, on a positive tree."""
    if t == ONE:
        return 1
    if t[0] == "P":
        v = 1
        for f in t[1]:
            v = v * character_value(g, f)
        return v
    if callable(g):
        return g(t)
    if t[0] == "X" and t not in g:
        v = 1
        for mu, p in enumerate(t[1]):
            if p:
                unit = poly(tuple(1 if i == mu else 0 for i in range(len(t[1]))))
                if unit not in g:
                    raise ValueError(f"character undefined on {unit}")
                v = v * g[unit] ** p
        return v
    if t not in g:
        raise ValueError(f"character undefined on {t}")
    return g[t]


def gamma_g(g: Character, t: Tree, S: Structure = DEFAULT) -> LinComb:
    """Structure-group action Gamma_g tau = (I ⊗ g) Delta tau."""
    return delta(t, S).pair_right(lambda b: Fraction(character_value(g, b)))


@lru_cache(maxsize=None)
def antipode(t: Tree, S: Structure = DEFAULT) -> LinComb:
    """Antipode of H_+, from M(A ⊗ I)Delta^+ = counit, extended multiplicatively."""
    tag = t[0]
    if tag == "1":
        return LinComb.of(ONE)
    if tag == "X":
        return LinComb.of(t, (-1) ** sum(t[1]))
    if tag == "P":
        out = LinComb.of(ONE)
        for f in t[1]:
            out = out * antipode(f, S)
        return out
    if not is_positive(t, S):
        raise ValueError(f"antipode is defined on positive trees only, got {t}")
    dp = delta_plus(t, S)
    if dp.get((t, ONE)) != 1:
        raise RuntimeError("Delta^+ lacks the tau ⊗ 1 term")
    out = LinComb()
    for (a, b), c in dp.items():
        if (a, b) == (t, ONE):
            continue
        out.iadd(antipode(a, S) * LinComb.of(b), -c)
    return out


def antipode_lin(v: LinComb, S: Structure = DEFAULT) -> LinComb:
    return v.map(lambda t: antipode(t, S))

