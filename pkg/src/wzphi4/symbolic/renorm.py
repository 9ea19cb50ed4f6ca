"""Renormalisation map M, its companions Delta^M, hat M, hat Delta^M, and identity checks."""
from __future__ import annotations

from functools import lru_cache

from .coproduct import antipode_lin, delta, delta_plus, integrate_lin
from .lincomb import LinComb, TensorComb
from .sector import F_star, H0_plus_generators, multi_indices, sector_F0
from .trees import (
    DEFAULT, ONE, Structure, Tree, csym, factors, integ, is_poly, power, prod,
    psi, unit_index, x, zero_index,
)


class _Symbols:
    """Frequently used trees for a given spatial dimension."""

    def __init__(self, d: int):
        self.d = d
        self.psi = psi(d)
        self.psi2 = power(self.psi, 2)
        self.psi3 = power(self.psi, 3)
        self.c1 = csym(1)
        self.c2 = csym(2)
        self.i_psi = integ(self.psi, d=d)
        self.i_psi2 = integ(self.psi2, d=d)
        self.i_psi3 = integ(self.psi3, d=d)
        self.xs = [x(i, d) for i in range(1, d + 1)]

    def lc(self, t, c=1):
        return LinComb.of(t, c)

    def i_lin(self, v, k=None):
        return integrate_lin(v, zero_index(self.d) if k is None else k)


@lru_cache(maxsize=None)
def _symbols(d: int) -> _Symbols:
    return _Symbols(d)


@lru_cache(maxsize=None)
def _M_table(d: int) -> dict:
    s = _symbols(d)
    L = s.lc
    m_psi2 = L(s.psi2) - L(s.c1)
    m_psi3 = L(s.psi3) - L(prod(s.c1, s.psi), 3)
    m_ipsi2 = s.i_lin(m_psi2)
    m_ipsi3 = s.i_lin(m_psi3)
    table = {
        s.psi2: m_psi2,
        s.psi3: m_psi3,
        s.i_psi2: m_ipsi2,
        prod(s.i_psi2, s.psi2): m_ipsi2 * m_psi2 - L(s.c2),
        prod(s.i_psi3, s.psi): m_ipsi3 * L(s.psi),
        prod(s.i_psi3, s.psi2): m_ipsi3 * m_psi2 - L(prod(s.c2, s.psi), 3),
        prod(s.i_psi, s.psi2): L(s.i_psi) * m_psi2,
    }
    for xi in s.xs:
        table[prod(s.psi2, xi)] = L(prod(s.psi2, xi)) - L(prod(s.c1, xi))
    return table


@lru_cache(maxsize=None)
def _F0(S: Structure) -> frozenset:
    """F_0 together with every left factor of Delta tau, tau in F_0.

    The listed F_0 is not closed under Delta: Delta(I(Psi)Psi) has the left
    factor Psi X_i. Such extra trees are fixed by M.
    """
    base = set(sector_F0(S))
    closed = set(base)
    for t in base:
        closed.update(a for (a, _b) in delta(t, S))
    return frozenset(closed)


def renorm_domain(S: Structure = DEFAULT) -> list:
    from .trees import order_key
    return sorted(_F0(S), key=order_key)


def _require_F0(t: Tree, S: Structure):
    if t not in _F0(S):
        raise ValueError(f"tree outside F_0: {t}")


def renorm_M(t: Tree, S: Structure = DEFAULT) -> LinComb:
    """The renormalisation map M on the basis of F_0."""
    _require_F0(t, S)
    table = _M_table(S.d)
    return LinComb(table[t]) if t in table else LinComb.of(t)


def renorm_M_lin(v: LinComb, S: Structure = DEFAULT) -> LinComb:
    return v.map(lambda t: renorm_M(t, S))


def delta_M(t: Tree, S: Structure = DEFAULT) -> TensorComb:
    """Delta^M tau = M tau ⊗ 1, plus the corrections for trees containing I(Psi^2), I(Psi^3)."""
    m = renorm_M(t, S)
    out = TensorComb.from_parts(m, LinComb.of(ONE))
    s = _symbols(S.d)
    L = s.lc
    m_psi2 = L(s.psi2) - L(s.c1)
    extra = None
    if t == s.i_psi2:
        extra = (L(ONE), s.c1, 1)
    elif t == prod(s.i_psi2, s.psi2):
        extra = (m_psi2, s.c1, 1)
    elif t == prod(s.i_psi3, s.psi):
        extra = (L(s.psi), prod(s.c1, s.psi), 3)
    elif t == prod(s.i_psi3, s.psi2):
        extra = (m_psi2, prod(s.c1, s.psi), 3)
    if extra is not None:
        left, arg, c = extra
        for i, xi in enumerate(s.xs, start=1):
            right = integ(arg, unit_index(i, S.d), d=S.d)
            out.iadd(TensorComb.from_parts(left * L(xi), L(right)), c)
    return out


def _hat_M_atom(f: Tree, S: Structure) -> LinComb:
    s = _symbols(S.d)
    if f[0] == "X":
        return LinComb.of(f)
    if f not in set(H0_plus_generators(S)):
        raise ValueError(f"tree outside H_0^+: {f}")
    arg = f[2]
    if f[1] == zero_index(S.d) and arg in (s.psi, s.psi2, s.psi3):
        return s.i_lin(renorm_M(arg, S))
    return LinComb.of(f)


def hat_M(t: Tree, S: Structure = DEFAULT) -> LinComb:
    """hat M: multiplicative on H_0^+, fixing X^k, with I(Psi^n) -> I(M Psi^n)."""
    out = LinComb.of(ONE)
    for f in factors(t):
        out = out * _hat_M_atom(f, S)
    return out


def hat_M_lin(v: LinComb, S: Structure = DEFAULT) -> LinComb:
    return v.map(lambda t: hat_M(t, S))


def _hat_delta_M_atom(f: Tree, S: Structure) -> TensorComb:
    s = _symbols(S.d)
    L = s.lc
    if f[0] == "X":
        return TensorComb.of(f, ONE)
    if f not in set(H0_plus_generators(S)):
        raise ValueError(f"tree outside H_0^+: {f}")
    out = TensorComb.from_parts(_hat_M_atom(f, S), L(ONE))
    if f in (s.i_psi2, s.i_psi3):
        arg, c = (s.c1, 1) if f == s.i_psi2 else (prod(s.c1, s.psi), 3)
        for i, xi in enumerate(s.xs, start=1):
            right = integ(arg, unit_index(i, S.d), d=S.d)
            out.add((xi, right), c)
            out.add((prod(xi, right), ONE), -c)
    return out


def hat_delta_M(t: Tree, S: Structure = DEFAULT) -> TensorComb:
    """hat Delta^M on H_0^+, multiplicative; I_i(Psi) is mapped to I_i(Psi) ⊗ 1."""
    out = TensorComb.of(ONE, ONE)
    for f in factors(t):
        out = out * _hat_delta_M_atom(f, S)
    return out


# -- identities -------------------------------------------------------------


def integration_identity_indices(t: Tree, S: Structure = DEFAULT) -> list:
    """Multi-indices k for which I_k tau is a generator of H_0^+."""
    gens = set(H0_plus_generators(S))
    if t not in F_star(S.d):
        return []
    return [k for k in multi_indices(S.d, 2) if integ(t, k, d=S.d) in gens]


def integration_identity_sides(t: Tree, k, S: Structure = DEFAULT):
    lhs = hat_M(integ(t, k, d=S.d), S)
    rhs = delta_M(t, S).map_left(lambda a: integrate_lin(LinComb.of(a), k)).multiply()
    return lhs, rhs


def check_integration_identity(t: Tree, S: Structure = DEFAULT) -> bool:
    """hat M I_k = M(I_k ⊗ I) Delta^M for every k with I_k tau in H_0^+ (vacuous otherwise)."""
    if t == ONE or is_poly(t):
        return True
    _require_F0(t, S)
    for k in integration_identity_indices(t, S):
        lhs, rhs = integration_identity_sides(t, k, S)
        if lhs != rhs:
            return False
    return True


def coproduct_identity_sides(t: Tree, S: Structure = DEFAULT):
    lhs = TensorComb()
    for (a, b), c in delta_M(t, S).items():
        for (a1, a2), e in delta(a, S).items():
            lhs.add((a1, prod(a2, b)), c * e)
    rhs = TensorComb()
    for (s1, s2), c in delta(t, S).items():
        for p, cp in renorm_M(s1, S).items():
            for q, cq in hat_M(s2, S).items():
                rhs.add((p, q), c * cp * cq)
    return lhs, rhs


def check_coproduct_identity(t: Tree, S: Structure = DEFAULT) -> bool:
    """(I ⊗ M)(Delta ⊗ I)Delta^M = (M ⊗ hat M)Delta on tau."""
    lhs, rhs = coproduct_identity_sides(t, S)
    return lhs == rhs


def antipode_identity_sides(t: Tree, S: Structure = DEFAULT):
    lhs = TensorComb()
    for (a, b), c in delta_plus(t, S).items():
        left = antipode_lin(hat_M_lin(antipode_lin(LinComb.of(a), S), S), S)
        right = hat_M(b, S)
        lhs.iadd(TensorComb.from_parts(left, right), c)
    rhs = TensorComb()
    for (a, b), c in hat_delta_M(t, S).items():
        for (a1, a2), e in delta_plus(a, S).items():
            rhs.add((a1, prod(a2, b)), c * e)
    return lhs, rhs


def check_identity_antipode(t: Tree, S: Structure = DEFAULT) -> bool:
    """(A hat M A ⊗ hat M)Delta^+ = (I ⊗ M)(Delta^+ ⊗ I) hat Delta^M on H_0^+."""
    lhs, rhs = antipode_identity_sides(t, S)
    return lhs == rhs
