"""Heat kernel, the truncated kernel K, mollifiers and the spectral K-operator.

K = chi * G_per - sum_a c_a B_a where G_per is the periodised heat kernel,
chi(|x|^2 + t) is a smooth cutoff equal to 1 on {|x|^2 + t < R^2/2} and 0 outside
{|x|^2 + t < R^2}, and the B_a are smooth bumps living in the annulus between the
two regions, so that K is the exact heat kernel near the origin.  The c_a kill the
even polynomial moments up to parabolic degree r (odd ones vanish by symmetry).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Optional

import numpy as np
from scipy import integrate

from .grid import Grid


# -- smooth building blocks -------------------------------------------------


def _e(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 1e-300
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    a = _e(u)
    b = _e(1.0 - np.asarray(u, dtype=float))
    return a / (a + b)


def bump(u):
    """Unnormalised bump exp(-1/(1-u^2)) on (-1, 1)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def bump_mass() -> float:
    return integrate.quad(lambda s: float(bump(np.array(s))), -1, 1, epsabs=1e-14, epsrel=1e-14)[0]


def rho1(s):
    """Normalised time mollifier on (-1, 1)."""
    return bump(s) / bump_mass()


def rho2(x_list):
    """Normalised tensorised space mollifier on (-1, 1)^d."""
    out = 1.0
    for c in x_list:
        out = out * (bump(c) / bump_mass())
    return out


# -- heat kernel ------------------------------------------------------------


def heat_kernel_1d(t, x, n_images: int = 6, L: float = 2.0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    out = np.zeros(x.shape)
    for p in range(-n_images, n_images + 1):
        out += np.exp(-((x + p * L) ** 2) / (4 * ts))
    out *= (4 * np.pi * ts) ** -0.5
    return np.where(pos, out, 0.0)


def heat_kernel(t, x, n_images: int = 6, L: float = 2.0) -> np.ndarray:
    """Periodised heat kernel on the torus of side L, images truncated per dimension.

    x is an array whose last axis holds the d coordinates.  Returns 0 for t <= 0.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    return np.prod(heat_kernel_1d(t, x, n_images, L), axis=-1)


def _g_per(t: float, grid_or_coords, n_images: int, L: float):
    """G_per(t, .) on a list of broadcastable coordinate arrays."""
    coords = grid_or_coords.coords() if isinstance(grid_or_coords, Grid) else grid_or_coords
    out = 1.0
    for c in coords:
        out = out * heat_kernel_1d(t, c, n_images, L)
    return out


# -- kernel specification ---------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    d: int = 3
    r: int = 3
    n_images: int = 6
    n_dyadic: int = 3
    support_radius: float = 1.0
    L: float = 2.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d={self.d} must be 1, 2 or 3")
        if self.r < 2:
            raise ValueError(f"r={self.r} must be >= 2")
        if not 0 < self.support_radius <= self.L / 2:
            raise ValueError(f"support_radius={self.support_radius} must lie in (0, L/2]")
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")

    @property
    def R2(self) -> float:
        return self.support_radius ** 2


def moment_classes(d: int, r: int) -> list:
    """Even monomial classes t^a * sym(prod x_i^(2 b_i)) of parabolic degree <= r."""
    out = []
    for a in range(r // 2 + 1):
        rest = (r - 2 * a) // 2
        for b in _partitions(rest, d):
            out.append((a, b))
    return out


def _partitions(total_max: int, d: int):
    """Non-increasing d-tuples of non-negative ints with sum <= total_max."""
    res = []

    def rec(prefix, left, cap):
        if len(prefix) == d:
            res.append(tuple(prefix))
            return
        for v in range(min(left, cap), -1, -1):
            rec(prefix + [v], left - v, v)

    rec([], total_max, total_max)
    return sorted(res, key=lambda b: (sum(b), b))


def monomial(cls, t, coords) -> np.ndarray:
    a, b = cls
    total = 0.0
    for perm in set(permutations(b)):
        term = 1.0
        for c, p in zip(coords, perm):
            if p:
                term = term * c ** (2 * p)
        total = total + term
    return (t ** a) * total


def cutoff_chi(s, R2: float):
    """1 on s <= R2/2, 0 on s >= R2."""
    return 1.0 - smooth_step((np.asarray(s, dtype=float) - R2 / 2) / (R2 / 2))


def correction_basis(cls, t, coords, R2: float):
    """Smooth bump supported in {R2/2 < |x|^2 + t < R2, t > 0} times a monomial."""
    s = sum(c ** 2 for c in coords) + t
    eta = bump((s - 0.75 * R2) / (0.25 * R2))
    nu = smooth_step(4.0 * t / R2)
    return eta * nu * monomial(cls, t, coords)


def kernel_slice(spec: KernelSpec, coeffs, t: float, coords) -> np.ndarray:
    """K(t, x) on coordinate arrays; zero for t <= 0."""
    if t <= 0:
        shape = np.broadcast_shapes(*[np.shape(c) for c in coords])
        return np.zeros(shape)
    s = sum(c ** 2 for c in coords) + t
    out = cutoff_chi(s, spec.R2) * _g_per(t, coords, spec.n_images, spec.L)
    for c, cls in zip(coeffs, moment_classes(spec.d, spec.r)):
        out = out - c * correction_basis(cls, t, coords, spec.R2)
    return out


# -- tables -----------------------------------------------------------------


@dataclass
class KernelTable:
    """Samples of a space-time kernel at t_k = t0 + k dt on the spatial lattice."""

    name: str
    values: np.ndarray
    dt: float
    dx: float
    L: float
    t0: float = 0.0
    eps: Optional[float] = None
    theta: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.values.ndim - 1

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.shape[0])

    def grid(self) -> Grid:
        return Grid(self.d, self.values.shape[1], self.dt, self.L)

    def integrate(self, weight=None) -> float:
        v = self.values if weight is None else self.values * weight
        return float(v.sum() * self.dt * self.dx ** self.d)


def _table_moments(spec: KernelSpec, grid: Grid, times, slices) -> np.ndarray:
    coords = grid.coords()
    classes = moment_classes(spec.d, spec.r)
    out = np.zeros(len(classes))
    for t, v in zip(times, slices):
        for i, cls in enumerate(classes):
            out[i] += float(np.sum(v * monomial(cls, t, coords)))
    return out * grid.dt * grid.cell_volume


def build_K(spec: KernelSpec, grid: Grid) -> KernelTable:
    """Tabulate K on the lattice, with corrections solved so lattice moments vanish."""
    if grid.d != spec.d or grid.L != spec.L:
        raise ValueError("grid and kernel spec disagree on d or L")
    coords = grid.coords()
    nt = int(np.ceil(spec.R2 / grid.dt - 1e-9)) + 1
    times = grid.dt * np.arange(nt)
    classes = moment_classes(spec.d, spec.r)
    zero = [0.0] * len(classes)
    base = [kernel_slice(spec, zero, t, coords) for t in times]
    mom_base = _table_moments(spec, grid, times, base)
    basis_mom = np.zeros((len(classes), len(classes)))
    basis_slices = []
    for j, cls in enumerate(classes):
        sl = [correction_basis(cls, t, coords, spec.R2) * np.ones(grid.shape) for t in times]
        basis_slices.append(sl)
        basis_mom[:, j] = _table_moments(spec, grid, times, sl)
    if np.linalg.cond(basis_mom) > 1e12:
        raise np.linalg.LinAlgError("moment-correction system is singular for this grid")
    coeffs = np.linalg.solve(basis_mom, mom_base)
    values = np.stack(base)
    for c, sl in zip(coeffs, basis_slices):
        values -= c * np.stack(sl)
    return KernelTable("K", values, grid.dt, grid.dx, grid.L, meta={"coeffs": coeffs.tolist(), "r": spec.r})


def table_moments(table: KernelTable, spec: KernelSpec, max_degree: Optional[int] = None) -> dict:
    """All monomial moments t^a x^b of parabolic degree <= max_degree (default r)."""
    r = spec.r if max_degree is None else max_degree
    g = table.grid()
    coords = g.coords()
    times = table.times()
    out = {}
    d = spec.d
    for a in range(r // 2 + 1):
        for b in np.ndindex(*([r + 1] * d)):
            if 2 * a + sum(b) > r:
                continue
            m = 0.0
            for t, v in zip(times, table.values):
                term = t ** a * np.ones(g.shape)
                for c, p in zip(coords, b):
                    term = term * c ** p
                m += float(np.sum(v * term))
            out[(a,) + tuple(b)] = m * table.dt * table.dx ** d
    return out


@lru_cache(maxsize=None)
def continuum_coefficients(spec: KernelSpec, n_ref: int = 0, n_nodes: int = 8, n_panels: int = 8):
    """Correction coefficients from accurate (continuum) moment integrals."""
    classes = moment_classes(spec.d, spec.r)
    if n_ref == 0:
        n_ref = {1: 256, 2: 96, 3: 48}[spec.d]
    g = Grid(spec.d, n_ref, 1.0, spec.L)
    coords = g.coords()
    vol = g.cell_volume
    xg, wg = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(0.0, spec.R2, n_panels + 1)
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ts.extend(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.extend(0.5 * (b - a) * wg)
    target = np.zeros(len(classes))
    basis = np.zeros((len(classes), len(classes)))
    x1 = g.coords_1d()
    for t, w in zip(ts, ws):
        s = g.r2() + t
        gper = _g_per(t, coords, spec.n_images, spec.L)
        if t < 0.04 * spec.R2:
            # G_per is too narrow for the lattice: integrate it exactly and
            # subtract the smooth (1 - chi) G_per part on the lattice
            for i, cls in enumerate(classes):
                exact = _gper_moment(cls, t, spec)
                lat = float(np.sum((1 - cutoff_chi(s, spec.R2)) * gper * monomial(cls, t, coords))) * vol
                target[i] += w * (exact - lat)
        else:
            integrand = cutoff_chi(s, spec.R2) * gper
            for i, cls in enumerate(classes):
                target[i] += w * float(np.sum(integrand * monomial(cls, t, coords))) * vol
        for j, cls_b in enumerate(classes):
            bj = correction_basis(cls_b, t, coords, spec.R2)
            for i, cls in enumerate(classes):
                basis[i, j] += w * float(np.sum(bj * monomial(cls, t, coords))) * vol
    _ = x1
    return tuple(np.linalg.solve(basis, target))


def _gper_moment(cls, t: float, spec: KernelSpec) -> float:
    """Integral of G_per(t, x) * monomial over the torus, via 1D quadratures."""
    a, b = cls
    half = spec.L / 2
    one_d = {}
    for p in set(b):
        if p == 0:
            one_d[p] = 1.0
        else:
            f = lambda xx, p=p: float(heat_kernel_1d(t, xx, spec.n_images, spec.L)) * xx ** (2 * p)
            one_d[p] = integrate.quad(f, -half, half, points=[0.0], limit=200, epsabs=1e-13)[0]
    total = 0.0
    for perm in set(permutations(b)):
        term = 1.0
        for p in perm:
            term *= one_d[p]
        total += term
    return t ** a * total


# -- dyadic decomposition ---------------------------------------------------


def _phi(r):
    """1 on r <= 1/2, 0 on r >= 1."""
    return 1.0 - smooth_step(2.0 * np.asarray(r, dtype=float) - 1.0)


def parabolic_radius(t, coords, R: float = 1.0):
    """Quasi-norm (|x|^2 + |t|)^(1/2) / R used for the dyadic annuli."""
    return np.sqrt(sum(c ** 2 for c in coords) + np.abs(t)) / R


def dyadic_decompose(K: KernelTable, spec: KernelSpec, n_dyadic: Optional[int] = None,
                     annihilate_moments: bool = False) -> list:
    """Split K = sum_n K_n with K_n supported in the parabolic ball of radius 2^-n.

    Level 0 carries the outer part, the last level everything inside radius
    2^-n_dyadic.  With annihilate_moments, telescoping bumps are added so that
    each level has vanishing lattice moments while the sum is unchanged.
    """
    n_dyadic = spec.n_dyadic if n_dyadic is None else n_dyadic
    R = spec.support_radius
    rmin = R * 2.0 ** -n_dyadic
    if rmin < 2 * K.dx or rmin ** 2 < 2 * K.dt:
        raise ValueError(f"n_dyadic={n_dyadic} exceeds the grid resolution")
    g = K.grid()
    coords = g.coords()
    times = K.times()
    levels = []
    for n in range(n_dyadic + 1):
        vals = np.empty_like(K.values)
        for i, t in enumerate(times):
            rho = parabolic_radius(t, coords, R) * np.ones(g.shape)
            if n == 0:
                psi = 1.0 - _phi(2.0 * rho)
            elif n < n_dyadic:
                psi = _phi(2.0 ** n * rho) - _phi(2.0 ** (n + 1) * rho)
            else:
                psi = _phi(2.0 ** n * rho)
            vals[i] = psi * K.values[i]
        levels.append(KernelTable(f"K_{n}", vals, K.dt, K.dx, K.L, meta={"level": n}))
    if annihilate_moments:
        _telescope(levels, spec, g, times, coords)
    return levels


def _ball_basis(cls, t, coords, radius):
    s = (sum(c ** 2 for c in coords) + t) / radius ** 2
    return bump(2.0 * s - 1.0) * smooth_step(4.0 * t / radius ** 2) * monomial(cls, t, coords)


def _telescope(levels, spec, g, times, coords):
    classes = moment_classes(spec.d, spec.r)
    R = spec.support_radius
    moms = [_table_moments(spec, g, times, lv.values) for lv in levels]
    n_lv = len(levels)
    # tail[n] = moments of sum_{m >= n} K_m
    tail = [np.sum(moms[n:], axis=0) for n in range(n_lv)] + [np.zeros(len(classes))]
    betas = [None] * (n_lv + 1)
    for n in range(1, n_lv):
        radius = R * 2.0 ** -n
        basis = [np.stack([_ball_basis(c, t, coords, radius) * np.ones(g.shape) for t in times])
                 for c in classes]
        mat = np.stack([_table_moments(spec, g, times, b) for b in basis], axis=1)
        coef = np.linalg.solve(mat, tail[n])
        betas[n] = sum(c * b for c, b in zip(coef, basis))
    for n, lv in enumerate(levels):
        if betas[n + 1] is not None if n + 1 < n_lv else False:
            lv.values += betas[n + 1]
        if betas[n] is not None:
            lv.values -= betas[n]


# -- mollifier --------------------------------------------------------------


@dataclass(frozen=True)
class Mollifier:
    """rho_eps(t, x) = eps^-(d+2) rho1(t/eps^2) rho2(x/eps), sampled and renormalised on a lattice."""

    eps: float
    spatial_only: bool = False

    @property
    def identity(self) -> bool:
        return self.eps == 0

    def time_weights(self, dt: float) -> np.ndarray:
        """Lattice weights w_j, j = -p..p, with sum w_j = 1 (the dt factor included)."""
        if self.spatial_only or self.identity:
            return np.array([1.0])
        p = int(np.ceil(self.eps ** 2 / dt))
        s = dt * np.arange(-p, p + 1) / self.eps ** 2
        w = rho1(s)
        if w.sum() <= 0:
            raise ValueError(f"epsilon={self.eps} under-resolved in time by dt={dt}")
        return w / w.sum()

    def space_hat_1d(self, grid: Grid) -> np.ndarray:
        """1D DFT (continuum-normalised, real) of the sampled spatial bump, length n."""
        if self.identity:
            return np.ones(grid.n)
        if self.eps < 2 * grid.dx - 1e-12:
            raise ValueError(f"epsilon={self.eps} must be >= 2 dx = {2 * grid.dx}")
        c = grid.coords_1d()
        w = bump(c / self.eps)
        w = w / (w.sum() * grid.dx)
        return np.real(np.fft.fft(w)) * grid.dx

    def space_hat(self, grid: Grid, real: bool = True) -> np.ndarray:
        h = self.space_hat_1d(grid)
        m = grid.int_freqs(real)
        out = 1.0
        for mi in m:
            out = out * h[mi % grid.n]
        return out

    def space_hat_classes(self, grid: Grid) -> np.ndarray:
        h = self.space_hat_1d(grid)
        return np.prod(h[grid.modes.classes], axis=1)

    def space_weights(self, grid: Grid) -> np.ndarray:
        """Real-space lattice weights (sum * dx^d = 1)."""
        c = grid.coords()
        if self.identity:
            w = np.zeros(grid.shape)
            w[(0,) * grid.d] = 1.0 / grid.cell_volume
            return w
        w = 1.0
        for ci in c:
            b = bump(ci / self.eps)
            w = w * b / (b.sum() * grid.dx)
        return w


# -- spectral K operator ----------------------------------------------------


class KernelOperator:
    """Lattice action of K on cell-valued inputs, per spatial mode class.

    w[q-1, c] = int over lag cell ((q-1)dt, q dt] of K_hat(s, k_c) ds, where the
    heat part is integrated exactly in time and the smooth remainder
    R = (1 - chi) G_per + corrections is integrated by the midpoint rule.
    """

    def __init__(self, spec: KernelSpec, grid: Grid, coeffs=None, chunk: int = 16):
        if grid.d != spec.d or grid.L != spec.L:
            raise ValueError("grid and kernel spec disagree on d or L")
        self.spec = spec
        self.grid = grid
        self.coeffs = np.asarray(continuum_coefficients(spec) if coeffs is None else coeffs)
        dt = grid.dt
        self.Q = int(np.ceil(spec.R2 / dt - 1e-9))
        edges = np.minimum(dt * np.arange(self.Q + 1), spec.R2)
        k2 = grid.modes.k2(grid.L)
        a, b = edges[:-1, None], edges[1:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            gpart = np.exp(-k2 * a) * (-np.expm1(-k2 * (b - a))) / k2
        gpart[:, k2 == 0] = (b - a)[:, 0:1]
        mids = 0.5 * (edges[:-1] + edges[1:])
        rpart = np.empty_like(gpart)
        coords = grid.coords()
        s0 = grid.r2()
        classes = moment_classes(spec.d, spec.r)
        for start in range(0, self.Q, chunk):
            ts = mids[start:start + chunk]
            block = []
            for t in ts:
                s = s0 + t
                r = (1.0 - cutoff_chi(s, spec.R2)) * _g_per(t, coords, spec.n_images, spec.L)
                for c, cls in zip(self.coeffs, classes):
                    r = r + c * correction_basis(cls, t, coords, spec.R2)
                block.append(r)
            rh = grid.fft(np.stack(block))
            rpart[start:start + len(ts)] = np.real(grid.modes.from_rfft(rh))
        rpart *= (b - a)
        self.w = gpart - rpart

    @property
    def n_lags(self) -> int:
        return self.Q

    def real_space(self, lags) -> np.ndarray:
        """Cell-averaged kernel values K(q dt, x) per unit time for the given lags (>= 1)."""
        lags = np.asarray(lags)
        vals = self.grid.modes.expand_rfft(self.w[lags - 1]) / self.grid.dt
        return self.grid.ifft(vals)

    def mass(self) -> float:
        zero = int(np.argmin(self.grid.modes.k2(self.grid.L)))
        return float(self.w[:, zero].sum())


# -- Wong-Zakai kernel and covariance ---------------------------------------


def _block_average(u: np.ndarray, M: int) -> np.ndarray:
    """Replace each aligned block of M cells (axis 0) by its mean."""
    T = u.shape[0]
    v = u.reshape((T // M, M) + u.shape[1:]).mean(axis=1, keepdims=True)
    return np.broadcast_to(v, (T // M, M) + u.shape[1:]).reshape(u.shape)


def _time_mollify(u: np.ndarray, weights: np.ndarray) -> np.ndarray:
    if len(weights) == 1:
        return u * weights[0]
    from scipy.ndimage import convolve1d

    return convolve1d(u, weights, axis=0, mode="constant")


class WZCovariance:
    """K_{eps,theta} and f^{(eps,theta)} per spatial mode class on a finite time line.

    Time indices are lattice cells; the block containing cell n is
    [M floor(n/M), M floor(n/M) + M) with M = theta/dt.  Everything is a
    function of the phase n mod M only, so targets are given as phases.
    """

    def __init__(self, op: KernelOperator, moll: Mollifier, theta: float, C0: float = 1.0,
                 class_chunk: int = 1024):
        g = op.grid
        M = int(round(theta / g.dt))
        if M < 1 or abs(M * g.dt - theta) > 1e-9 * theta:
            raise ValueError(f"theta={theta} is not a multiple of dt={g.dt}")
        if moll.eps ** 2 > C0 * theta * (1 + 1e-12):
            raise ValueError(f"epsilon^2={moll.eps ** 2} exceeds C0*theta={C0 * theta}")
        self.op, self.moll, self.grid = op, moll, g
        self.theta, self.M = theta, M
        self.tw = moll.time_weights(g.dt)
        self.p = len(self.tw) // 2
        self.rho_hat = moll.space_hat_classes(g)
        Q = op.Q
        self.n0 = M * int(np.ceil((Q + 2 * M + 3 * self.p + 1) / M))
        self.T = M * int(np.ceil((self.n0 + M + Q + 3 * self.p + M) / M))
        self.class_chunk = class_chunk
        self._kk = np.vstack([np.zeros((1, op.w.shape[1])), op.w])

    # rows r_n(n') = w(n - n') for a target n on the local axis
    def _row(self, n: int, sl: slice) -> np.ndarray:
        Q = self.op.Q
        r = np.zeros((self.T, sl.stop - sl.start))
        lo = max(n - Q, 0)
        r[lo:n] = self.op.w[n - lo - 1::-1, sl] if n - lo > 0 else 0.0
        return r

    def _apply(self, r: np.ndarray) -> np.ndarray:
        """a = P^T B^T r, i.e. the noise-cell weights of the row."""
        return _time_mollify(_block_average(r, self.M), self.tw)

    def _chunks(self):
        C = self.op.w.shape[1]
        for s in range(0, C, self.class_chunk):
            yield slice(s, min(s + self.class_chunk, C))

    def target(self, phase: int) -> int:
        if not 0 <= phase < self.M:
            raise ValueError(f"phase {phase} outside [0, {self.M})")
        return self.n0 + phase

    def c1(self, phase: int) -> float:
        """C1 = int K_{eps,theta}(z, z1)^2 dz1 via the squared noise weights."""
        n = self.target(phase)
        g = self.grid
        total = 0.0
        for sl in self._chunks():
            a = self._apply(self._row(n, sl))
            total += float(np.dot(self.grid.modes.count[sl] * self.rho_hat[sl] ** 2, (a * a).sum(axis=0)))
        return total / (g.L ** g.d * g.dt)

    def f_hat(self, phase: int, n1) -> np.ndarray:
        """Spatial transform of f(z, z1) for target phase, at absolute cells n1, per class."""
        from scipy.signal import fftconvolve

        n = self.target(phase)
        n1 = np.asarray(n1)
        out = np.empty((len(n1), self.op.w.shape[1]))
        for sl in self._chunks():
            a = self._apply(self._row(n, sl))
            v = _block_average(_time_mollify(a, self.tw), self.M)
            conv = fftconvolve(v, self._kk[:, sl], axes=0)
            out[:, sl] = conv[n1] * (self.rho_hat[sl] ** 2 / self.grid.dt)
        return out

    def c1_diag(self, phase: int) -> float:
        """C1 as the diagonal f(z, z) of the covariance (second route)."""
        n = self.target(phase)
        fh = self.f_hat(phase, [n])[0]
        g = self.grid
        return float(g.modes.sum_full(fh)) / g.L ** g.d

    def c2(self, phases, lag_chunk: int = 32) -> np.ndarray:
        """C2 = 2 int f(z, z1)^2 K(z - z1) dz1 for each target phase."""
        g = self.grid
        Q = self.op.Q
        fh = []
        for ph in phases:
            n = self.target(ph)
            fh.append(self.f_hat(ph, n - np.arange(1, Q + 1)))
        out = np.zeros(len(phases))
        for s in range(0, Q, lag_chunk):
            lags = np.arange(s + 1, min(s + lag_chunk, Q) + 1)
            kbar = self.op.real_space(lags)
            for i in range(len(phases)):
                f = g.ifft(g.modes.expand_rfft(fh[i][lags - 1]))
                out[i] += float(np.sum(f * f * kbar))
        return 2.0 * out * g.dt * g.cell_volume

    # pointwise evaluations -------------------------------------------------
    def _noise_weights_parts(self, n: int):
        """a^(1), a^(2): noise weights of the completed-block and current-block parts."""
        blk = self.M * (n // self.M)
        parts = [np.zeros((self.T, self.op.w.shape[1])) for _ in range(2)]
        for sl in self._chunks():
            r = self._row(n, sl)
            r2 = np.zeros_like(r)
            r2[blk:n] = r[blk:n]
            parts[0][:, sl] = self._apply(r - r2)
            parts[1][:, sl] = self._apply(r2)
        return parts

    def wz_kernel(self, n: int, n2: int, offset) -> float:
        """K_{eps,theta}((n dt, x), (n2 dt, x - offset)) with offset an integer lattice vector."""
        a = sum(self._noise_weights_parts(n))[n2]
        field = self.grid.ifft(self.grid.modes.expand_rfft(self.rho_hat * a)) / self.grid.dt
        return float(field[tuple(np.mod(offset, self.grid.n))])

    def wz_kernel_field(self, n: int) -> np.ndarray:
        """K_{eps,theta}((n dt, 0), (n2 dt, -y)) for every cell n2 and lattice y."""
        a = sum(self._noise_weights_parts(n))
        g = self.grid
        return g.ifft(g.modes.expand_rfft(self.rho_hat * a)) / g.dt

    def covariance_parts(self, n: int, nbar: int, offset) -> np.ndarray:
        """J1..J4 at z = (n dt, x), zbar = (nbar dt, x - offset)."""
        g = self.grid
        cache = self.__dict__.setdefault("_parts_cache", {})
        for m in (n, nbar):
            if m not in cache:
                if len(cache) > 16:
                    cache.clear()
                cache[m] = self._noise_weights_parts(m)
        A, B = cache[n], cache[nbar]
        out = np.empty(4)
        idx = tuple(np.mod(offset, g.n))
        for k, (i, j) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            spec = self.rho_hat ** 2 * (A[i] * B[j]).sum(axis=0) / g.dt
            out[k] = g.ifft(g.modes.expand_rfft(spec))[idx]
        return out

    def covariance(self, n: int, nbar: int, offset) -> float:
        return float(self.covariance_parts(n, nbar, offset).sum())


# -- kernel bound sup-ratio checks -------------------------------------------------


def _pnorm(dn: int, off, grid: Grid) -> float:
    return float(np.sqrt(abs(dn) * grid.dt) + np.sum(np.abs(np.asarray(off)) * grid.dx))


def _sample_pairs(rng, grid: Grid, Q: int, n_points: int) -> list:
    out = []
    while len(out) < n_points:
        dn = int(rng.integers(-Q // 2, Q // 4 + 1))
        off = tuple(int(v) for v in rng.integers(-grid.n // 4, grid.n // 4 + 1, grid.d))
        if dn == 0 and not any(off):
            continue
        out.append((dn, off))
    return out


def check_kernel_bounds(d: int = 3, n: int = 32, dt: float = 1.0 / 256, pairs=None, n_points: int = 10,
                        seed: int = 0, delta: float = 0.1, theta_exp: float = 0.5, delta_k: float = 0.5, C0: float = 1.0,
                        spec: Optional[KernelSpec] = None) -> dict:
    """Empirical sup over sampled points of (left side)/(right side with C = 1) for each kernel bound.

    Exponents follow d = 3; in other dimensions the kernel exponent -d replaces -3
    and the covariance exponent 2 - d replaces -1.  Diagonal pairs z = zbar are excluded.
    """
    spec = KernelSpec(d=d) if spec is None else spec
    g = Grid(d, n, dt, spec.L)
    op = KernelOperator(spec, g)
    if pairs is None:
        pairs = [(4 * g.dx, 16 * dt), (4 * g.dx, 32 * dt), (2 * g.dx, 16 * dt)]
    rng = np.random.default_rng(seed)
    pts = _sample_pairs(rng, g, op.Q, n_points)
    zeta = -float(d)
    cov_exp = 2.0 - d
    ref = WZCovariance(op, Mollifier(0.0), dt, C0)
    rows = []
    for eps, theta in pairs:
        eng = WZCovariance(op, Mollifier(eps), theta, C0)
        n0 = eng.target(0)
        r_k, r_cov, r_diff, r_inc = [], [], [], []
        # K * rho_2 at (q dt, x)
        kr = g.ifft(g.modes.expand_rfft(op.w * eng.rho_hat)) / dt
        for dn, off in pts:
            q = max(abs(dn), 1)
            idx = tuple(np.mod(off, n))
            lhs = abs(kr[q - 1][idx])
            t = (q - 0.5) * dt
            r_k.append(lhs / (t ** (-delta_k / 2) * _pnorm(q, off, g) ** (zeta + delta_k)))
        fe = {}
        for dn, off in pts:
            nb = n0 - dn
            fv = eng.covariance(n0, nb, off)
            fe[(dn, off)] = fv
            dist = _pnorm(dn, off, g)
            r_cov.append(abs(fv) * dist ** (-cov_exp + delta))
            f0 = ref.covariance(ref.target(0), ref.target(0) - dn, off)
            rhs = (theta ** theta_exp + eps ** (2 * theta_exp)) * dist ** (cov_exp - 2 * theta_exp - delta)
            r_diff.append(abs(fv - f0) / rhs)
        for (dn1, o1), (dn2, o2) in zip(pts[:-1], pts[1:]):
            lhs = abs(fe[(dn1, o1)] - fe[(dn2, o2)])
            sep = _pnorm(dn1 - dn2, np.subtract(o1, o2), g)
            rhs = sep ** delta * (_pnorm(dn1, o1, g) ** (cov_exp - 2 * delta) + _pnorm(dn2, o2, g) ** (cov_exp - 2 * delta))
            r_inc.append(lhs / rhs)
        rows.append({"epsilon": eps, "theta": theta,
                     "mollified_kernel": float(max(r_k)), "covariance_bound": float(max(r_cov)),
                     "covariance_difference": float(max(r_diff)), "covariance_increment": float(max(r_inc))})
    report = {"d": d, "n": n, "dt": dt, "delta": delta, "theta_exponent": theta_exp,
              "n_points": len(pts), "excluded": "diagonal pairs z = zbar are not sampled", "rows": rows}
    for key in ("mollified_kernel", "covariance_bound", "covariance_difference", "covariance_increment"):
        vals = np.array([r[key] for r in rows])
        report[key] = {"finite": bool(np.all(np.isfinite(vals))),
                       "spread": float(vals.max() / vals.min()) if vals.min() > 0 else float("inf")}
    return report
