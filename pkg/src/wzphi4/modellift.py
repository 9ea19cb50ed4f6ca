"""Lattice evaluation of the canonical and renormalised models on trees of F_0.

Fields live on a periodic space-time lattice: cell n of the time axis is the
time n dt, and convolution with K uses the cell-integrated spectral weights of
KernelOperator, so the lifts see exactly the kernel the counterterms use.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Optional

import numpy as np

from .counterterm import CountertermTable
from .grid import Grid
from .kernel import KernelOperator, bump, bump_mass
from .noise import NoiseField
from .symbolic import DEFAULT, Structure, Tree, character_value, delta_M, hom_value, parse
from .symbolic.renorm import renorm_domain
from .symbolic.sector import multi_indices


@dataclass
class LiftedField:
    tree: Tree
    base: tuple
    values: np.ndarray
    stage: str = "canonical"


class LiftContext:
    """Shared spectral data for lifting fields on an nt-cell periodic time axis."""

    def __init__(self, op: KernelOperator, nt: int, counterterms: Optional[CountertermTable] = None,
                 S: Optional[Structure] = None):
        g = op.grid
        S = Structure(d=g.d) if S is None else S
        if g.d != S.d:
            raise ValueError(f"structure dimension {S.d} differs from grid dimension {g.d}")
        if nt <= op.Q:
            raise ValueError(f"time axis of {nt} cells is shorter than the kernel support ({op.Q})")
        self.op, self.grid, self.nt, self.S = op, g, nt, S
        self.counterterms = counterterms
        wpad = np.zeros((nt,) + g.rshape)
        wpad[1:op.Q + 1] = g.modes.expand_rfft(op.w)
        self._w_hat = np.fft.fft(wpad, axis=0)
        self._ik = [1j * np.pi * 2 / g.L * m for m in g.int_freqs(real=True)]

    def conv(self, u: np.ndarray, k=None) -> np.ndarray:
        """(D^k K * u) on the periodic lattice; k is a (d+1)-multi-index, spatial only."""
        g = self.grid
        uh = np.fft.fft(g.fft(u), axis=0) * self._w_hat
        if k is not None:
            if k[0]:
                raise NotImplementedError("time derivatives of K are not needed on F_0")
            for ik, p in zip(self._ik, k[1:]):
                if p:
                    uh = uh * ik ** p
        return g.ifft(np.fft.ifft(uh, axis=0))

    def displacement(self, mu: int, base: tuple) -> np.ndarray:
        """Signed periodic (z - x)_mu on the lattice; mu = 0 is time."""
        g = self.grid
        if mu == 0:
            n = (np.arange(self.nt) - base[0] + self.nt // 2) % self.nt - self.nt // 2
            return (n * g.dt).reshape((-1,) + (1,) * g.d)
        j = (np.arange(g.n) - base[1][mu - 1] + g.n // 2) % g.n - g.n // 2
        shape = [1] * (g.d + 1)
        shape[mu] = g.n
        return (j * g.dx).reshape(shape)

    def c_field(self, j: int) -> np.ndarray:
        if self.counterterms is None:
            raise ValueError("C-symbols need a counterterm table")
        t = self.grid.dt * np.arange(self.nt)
        v = self.counterterms.C1_at(t) if j == 1 else self.counterterms.C2_at(t)
        return v.reshape((-1,) + (1,) * self.grid.d)


def _recentering_indices(t: Tree, S: Structure) -> list:
    """Multi-indices l with I_{k+l} tau of positive homogeneity, for t = I_k tau."""
    h = hom_value(t, S)
    if h <= 0:
        return []
    return [l for l in multi_indices(S.d, int(np.floor(h))) if 2 * l[0] + sum(l[1:]) < h]


def needs_base_point(t: Tree, S: Structure = DEFAULT) -> bool:
    tag = t[0]
    if tag == "X":
        return True
    if tag == "P":
        return any(needs_base_point(f, S) for f in t[1])
    if tag == "I":
        return bool(_recentering_indices(t, S)) or needs_base_point(t[2], S)
    return False


class _Lifter:
    def __init__(self, ctx: LiftContext, xi: np.ndarray, base: tuple):
        self.ctx, self.xi, self.base = ctx, xi, base
        self.cache: dict = {}
        self.conv_cache: dict = {}
        g = ctx.grid
        self._full = (ctx.nt,) + g.shape

    def _conv(self, t: Tree, k) -> np.ndarray:
        key = (t, tuple(k))
        if key not in self.conv_cache:
            self.conv_cache[key] = self.ctx.conv(self.lift(t), k)
        return self.conv_cache[key]

    def at_base(self, arr: np.ndarray) -> float:
        return float(arr[(self.base[0],) + tuple(self.base[1])])

    def lift(self, t: Tree) -> np.ndarray:
        if t in self.cache:
            return self.cache[t]
        tag = t[0]
        ctx = self.ctx
        if tag == "1":
            v = np.ones(self._full)
        elif tag == "Xi":
            v = self.xi
        elif tag == "X":
            v = np.ones(self._full)
            for mu, p in enumerate(t[1]):
                if p:
                    v = v * ctx.displacement(mu, self.base) ** p
        elif tag == "C":
            v = np.broadcast_to(ctx.c_field(t[1]), self._full)
        elif tag == "P":
            v = np.ones(self._full)
            for f in t[1]:
                v = v * self.lift(f)
        else:
            k, arg = t[1], t[2]
            v = self._conv(arg, k).copy()
            for l in _recentering_indices(t, ctx.S):
                kl = tuple(a + b for a, b in zip(k, l))
                coef = -self.at_base(self._conv(arg, kl))
                mono = 1.0
                for mu, p in enumerate(l):
                    if p:
                        mono = mono * ctx.displacement(mu, self.base) ** p / factorial(p)
                v = v + coef * mono
        self.cache[t] = v
        return v

    def character(self, t: Tree) -> float:
        """f_x on an atom of H_+: -x^k on X, -(D^k K * Pi_x tau)(x) on positive I_k tau."""
        tag = t[0]
        if tag == "X":
            g = self.ctx.grid
            pos = [self.base[0] * g.dt] + [self.ctx.displacement(mu, (0, (0,) * g.d)).reshape(-1)[self.base[1][mu - 1]]
                                           for mu in range(1, g.d + 1)]
            v = 1.0
            for mu, p in enumerate(t[1]):
                v *= (-pos[mu]) ** p
            return v
        if tag == "I":
            if hom_value(t, self.ctx.S) <= 0:
                return 0.0
            return -self.at_base(self._conv(t[2], t[1]))
        raise ValueError(f"character undefined on {t}")


def _check_tree(t, S):
    if isinstance(t, str):
        t = parse(t, S.d)
    if t not in set(renorm_domain(S)):
        raise ValueError(f"tree outside F_0: {t}")
    return t


def _check_base(base: tuple, ctx: LiftContext) -> tuple:
    n, idx = base
    g = ctx.grid
    if int(n) != n or not 0 <= n < ctx.nt or len(idx) != g.d or any(int(i) != i or not 0 <= i < g.n for i in idx):
        raise ValueError(f"base point {base} is not a lattice point")
    return int(n), tuple(int(i) for i in idx)


def lift_canonical(tree, xi: NoiseField, base: tuple, ctx: LiftContext) -> LiftedField:
    """Pi_x tau for a lattice base point x = (time cell, spatial index tuple)."""
    S = ctx.S
    t = _check_tree(tree, S)
    base = _check_base(base, ctx)
    return LiftedField(t, base, _Lifter(ctx, xi.values, base).lift(t), "canonical")


def lift_renormalised(tree, xi: NoiseField, base: tuple, ctx: LiftContext) -> LiftedField:
    """(Pi_x ⊗ f_x) Delta^M tau, with C-symbols lifted to the counterterm functions."""
    S = ctx.S
    t = _check_tree(tree, S)
    base = _check_base(base, ctx)
    ct = ctx.counterterms
    if ct is None:
        raise ValueError("renormalised lift needs a counterterm table")
    if xi.eps is not None and (abs(ct.eps - xi.eps) > 1e-12 or abs(ct.theta - (xi.theta or 0)) > 1e-12):
        raise ValueError("noise and counterterm table have different (epsilon, theta)")
    lf = _Lifter(ctx, xi.values, base)
    out = np.zeros((ctx.nt,) + ctx.grid.shape)
    for (left, right), c in delta_M(t, S).sorted_items():
        val = float(character_value(lf.character, right))
        if val != 0.0:
            out = out + float(Fraction(c)) * val * lf.lift(left)
    return LiftedField(t, base, out, "renormalised")


# -- scaling probe -----------------------------------------------------------


def scaled_test_function(s, y_list, lam: float):
    """phi^lam_0(s, y) = lam^-(d+2) phi(s/lam^2, y/lam), phi = time bump x space bump x (1 + y_1)."""
    d = len(y_list)
    u = [np.asarray(y) / lam for y in y_list]
    val = bump(np.asarray(s) / lam ** 2) / bump_mass()
    for c in u:
        val = val * bump(c) / bump_mass()
    val = val * (1.0 + u[0])
    return val / lam ** (d + 2)


def _lattice_test_factors(grid: Grid, lam: float, h: int) -> tuple:
    """Time weights and spatial profile of phi^lam, each normalised to lattice mass 1."""
    tw = bump(np.arange(-h, h + 1) * grid.dt / lam ** 2)
    tw = tw / (tw.sum() * grid.dt)
    coords = grid.coords()
    prof = 1.0
    for c in coords:
        b = bump(c / lam)
        prof = prof * b / (b.sum() * grid.dx)
    return tw, prof * (1.0 + coords[0] / lam) * np.ones(grid.shape)


def pair_all_x(field: np.ndarray, n0: int, lam: float, grid: Grid) -> np.ndarray:
    """(field, phi^lam_(t_n0, x)) for every lattice x at once.

    phi is scaled_test_function with each bump factor renormalised to lattice mass 1,
    as for the mollifiers.
    """
    nt = field.shape[0]
    h = int(np.ceil(lam ** 2 / grid.dt))
    if lam < 4 * grid.dx or lam ** 2 < 4 * grid.dt:
        raise ValueError(f"lambda={lam} under-resolved")
    if 2 * h + 1 > nt:
        raise ValueError(f"lambda={lam} wider than the time axis")
    tw, prof = _lattice_test_factors(grid, lam, h)
    ph = np.conj(grid.fft(prof))
    acc = np.zeros(grid.rshape, dtype=complex)
    for j in range(-h, h + 1):
        if tw[j + h] == 0:
            continue
        # correlation: sum_y phi(y - x) F(y)
        acc += tw[j + h] * ph * grid.fft(field[(n0 + j) % nt])
    return grid.ifft(acc) * grid.dt


def pair_at(field: np.ndarray, base: tuple, lam: float, grid: Grid) -> float:
    """(field, phi^lam_base) at a single lattice base point."""
    n0, idx = base
    nt = field.shape[0]
    h = int(np.ceil(lam ** 2 / grid.dt))
    if lam < 4 * grid.dx or lam ** 2 < 4 * grid.dt:
        raise ValueError(f"lambda={lam} under-resolved")
    if 2 * h + 1 > nt:
        raise ValueError(f"lambda={lam} wider than the time axis")
    tw, prof = _lattice_test_factors(grid, lam, h)
    prof = np.roll(prof, tuple(idx), axis=tuple(range(grid.d)))
    rows = (n0 + np.arange(-h, h + 1)) % nt
    slab = np.tensordot(field[rows], prof, axes=grid.d)
    return float(np.dot(tw, slab) * grid.dt * grid.cell_volume)


def realization_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0])


def scaling_probe(tree, stage: str, lambdas, n_mc: int, make_noise, ctx: LiftContext,
                  n_base: int = 8, seed: int = 0) -> dict:
    """Second moments E|Pi_x tau(phi_x^lam)|^2 over realizations and base points, with a log-log slope.

    make_noise(r) returns the r-th regularised noise realization on the context's axis.
    """
    S = ctx.S
    t = _check_tree(tree, S)
    if stage not in ("canonical", "renormalised"):
        raise ValueError(f"stage must be canonical or renormalised, not {stage}")
    lambdas = sorted(float(l) for l in lambdas)
    g = ctx.grid
    n0 = ctx.nt // 2
    lift = lift_canonical if stage == "canonical" else lift_renormalised
    per_real = np.zeros((n_mc, len(lambdas)))
    rng = np.random.default_rng(seed)
    with_base = needs_base_point(t, S)
    bases = [(n0, tuple(rng.integers(0, g.n, g.d))) for _ in range(n_base)] if with_base else [(n0, (0,) * g.d)]
    for r in range(n_mc):
        xi = make_noise(r) if "Xi" in repr(t) else _zero_noise(ctx)
        if with_base:
            sq = np.zeros((len(bases), len(lambdas)))
            for j, b in enumerate(bases):
                f = lift(t, xi, b, ctx).values
                sq[j] = [pair_at(f, b, lam, g) ** 2 for lam in lambdas]
            per_real[r] = sq.mean(axis=0)
        else:
            f = lift(t, xi, bases[0], ctx).values
            per_real[r] = [np.mean(pair_all_x(f, n0, lam, g) ** 2) for lam in lambdas]
    mean = per_real.mean(axis=0)
    stderr = per_real.std(axis=0, ddof=1) / np.sqrt(n_mc) if n_mc > 1 else np.zeros_like(mean)
    slope = float(np.polyfit(np.log(lambdas), np.log(mean), 1)[0]) if np.all(mean > 0) else float("nan")
    return {"tree": t, "stage": stage, "lambda": lambdas, "second_moment": mean.tolist(),
            "stderr": stderr.tolist(), "slope": slope, "target_slope": float(2 * hom_value(t, S)),
            "n_mc": n_mc, "n_base": len(bases)}


def _zero_noise(ctx: LiftContext) -> NoiseField:
    return NoiseField(np.zeros((ctx.nt,) + ctx.grid.shape), ctx.grid, 0)
