"""Model-set generation, positive subspace and the low-homogeneity sectors."""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement, product as iproduct

from .lincomb import LinComb
from .trees import (
    DEFAULT, ONE, XI, Structure, Tree, canonicalize, factors, hom_value, integ,
    order_key, poly, power, prod, psi, validate_alpha, x,
)


def is_positive(t: Tree, S: Structure = DEFAULT) -> bool:
    """Membership in F_+: the unit, or positive trees with positive factors only."""
    if t == ONE:
        return True
    if hom_value(t, S) <= 0:
        return False
    return all(hom_value(f, S) > 0 for f in factors(t))


def p_plus(v: LinComb, S: Structure = DEFAULT) -> LinComb:
    out = LinComb()
    for t, c in v.items():
        if is_positive(t, S):
            out.add(t, c)
    return out


def multi_indices(d: int, max_degree: int):
    """All multi-indices over (t, x_1..x_d) with parabolic degree <= max_degree."""
    out = []
    for k0 in range(max_degree // 2 + 1):
        rest = max_degree - 2 * k0
        for ks in iproduct(range(rest + 1), repeat=d):
            if sum(ks) <= rest:
                out.append((k0,) + ks)
    return out


def _products(pool, S, cap, max_factors=3):
    """Canonical products of 0..max_factors elements of pool with homogeneity <= cap."""
    items = sorted(pool, key=lambda t: hom_value(t, S))
    homs = [hom_value(t, S) for t in items]
    out = {ONE} if cap is None or 0 <= cap else set()
    for n in range(1, max_factors + 1):
        for idx in combinations_with_replacement(range(len(items)), n):
            if cap is not None and sum(homs[i] for i in idx) > cap:
                continue
            out.add(canonicalize(("P", tuple(items[i] for i in idx))))
    return out


def generate_model_set(n_max: int, S: Structure = DEFAULT, hom_cap=Fraction(2)) -> set:
    """W_n union U_n of the recursive model-set construction, truncated.

    Monomials are limited to parabolic degree S.poly_degree and, when hom_cap
    is not None, trees are kept only if their homogeneity is <= hom_cap.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    final_cap = hom_cap
    if hom_cap is not None:
        # a product of three factors may combine one large factor with two copies
        # of the most negative integrated tree I(Xi), so prune more loosely
        hom_cap = hom_cap - 2 * (S.alpha + 2)
    polys = [poly(k) for k in multi_indices(S.d, S.poly_degree)]
    W: set = set()
    U: set = set()
    for _ in range(n_max):
        newW = set(W)
        newW |= _products(U, S, hom_cap)
        if hom_cap is None or hom_value(XI, S) <= hom_cap:
            newW.add(XI)
        W = newW
        U = set(polys)
        for t in W:
            if t[0] in ("1", "X"):
                continue
            i = integ(t, d=S.d)
            if hom_cap is None or hom_value(i, S) <= hom_cap:
                U.add(i)
    out = W | U
    if final_cap is not None:
        out = {t for t in out if hom_value(t, S) <= final_cap}
    return out


def _fixpoint_set(S: Structure, cap: Fraction, max_depth: int = 12) -> set:
    prev = None
    for n in range(2, max_depth + 1):
        cur = generate_model_set(n, S, hom_cap=cap)
        if cur == prev:
            return cur
        prev = cur
    raise RuntimeError("model set did not stabilise below the homogeneity cap")


def negative_sector(alpha_val=DEFAULT.alpha, strict: bool = False, S: Structure = DEFAULT) -> list:
    """Generated trees with homogeneity <= 0 (< 0 when strict), sorted by homogeneity."""
    alpha_val = validate_alpha(Fraction(alpha_val).limit_denominator(10**9)
                               if isinstance(alpha_val, float) else alpha_val)
    S = Structure(alpha=alpha_val, delta0=_delta0_for(alpha_val, S.delta0), d=S.d,
                  poly_degree=S.poly_degree)
    trees = _fixpoint_set(S, Fraction(0))
    keep = [t for t in trees if (hom_value(t, S) < 0 if strict else hom_value(t, S) <= 0)]
    return sorted(keep, key=lambda t: (hom_value(t, S), order_key(t)))


def _delta0_for(alpha: Fraction, delta0: Fraction) -> Fraction:
    # keep the configured delta0 when admissible, otherwise take the midpoint
    if 4 * alpha + 10 < -delta0 < 0:
        return delta0
    return -(4 * alpha + 10) / 2


def positive_members_F0(d: int = 3) -> list:
    """Members of F_0 with positive homogeneity; listed, no homogeneity rule singles them out."""
    p = psi(d)
    spatial = [x(i, d) for i in range(1, d + 1)]
    return spatial + [
        integ(power(p, 2), d=d),
        prod(integ(p, d=d), p),
        prod(integ(p, d=d), p, p),
    ]


def sector_F0(S: Structure = DEFAULT) -> list:
    """The sector F_0: every generated tree of non-positive homogeneity plus the listed extras."""
    out = set(negative_sector(S.alpha, strict=False, S=S)) | set(positive_members_F0(S.d))
    return sorted(out, key=lambda t: (hom_value(t, S), order_key(t)))


def sector_F_minus(S: Structure = DEFAULT) -> list:
    return negative_sector(S.alpha, strict=True, S=S)


def F_star(d: int = 3) -> list:
    p = psi(d)
    return [p, power(p, 2), power(p, 3)]


def H0_plus_generators(S: Structure = DEFAULT) -> list:
    """Generators of H_0^+: X_mu and positive I_l(tau) with tau in {Psi, Psi^2, Psi^3}."""
    d = S.d
    gens = [x(mu, d) for mu in range(d + 1)]
    for t in F_star(d):
        for k in multi_indices(d, 2):
            i = integ(t, k, d=d)
            if hom_value(i, S) > 0:
                gens.append(i)
    return gens


def in_H0_plus(t: Tree, S: Structure = DEFAULT) -> bool:
    gens = set(H0_plus_generators(S))
    for f in factors(t):
        if f[0] == "X":
            continue
        if f not in gens:
            return False
    return True
