"""Counterterm functions C1(t), C2(t) of the Wong-Zakai scheme and their divergence fits."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .grid import Grid
from .kernel import KernelOperator, KernelSpec, Mollifier, WZCovariance


@lru_cache(maxsize=8)
def _operator(spec: KernelSpec, grid: Grid) -> KernelOperator:
    return KernelOperator(spec, grid)


def build_engine(d: int, n: int, dt: float, eps: float, theta: float, C0: float = 1.0,
                 spatial_only: bool = False, spec: Optional[KernelSpec] = None) -> WZCovariance:
    spec = KernelSpec(d=d) if spec is None else spec
    grid = Grid(d, n, dt, spec.L)
    return WZCovariance(_operator(spec, grid), Mollifier(eps, spatial_only), theta, C0)


def sample_phases(M: int, n_samples: int = 8) -> np.ndarray:
    """Equispaced cells in one block; exact when n_samples divides M."""
    return np.unique(np.floor(np.arange(n_samples) * M / n_samples + 1e-9).astype(int))


def compute_C1(eng: WZCovariance, phases=None, route: str = "weights") -> np.ndarray:
    """C1 at the given block phases; route 'weights' squares K_{eps,theta}, 'diagonal' uses f(z, z)."""
    phases = sample_phases(eng.M) if phases is None else phases
    fn = eng.c1 if route == "weights" else eng.c1_diag
    return np.array([fn(int(p)) for p in phases])


def compute_C2(eng: WZCovariance, phases=None) -> np.ndarray:
    phases = sample_phases(eng.M) if phases is None else phases
    return eng.c2([int(p) for p in phases])


@dataclass
class CountertermTable:
    eps: float
    theta: float
    t: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def c(self) -> np.ndarray:
        return 3.0 * self.C1 - 9.0 * self.C2

    def _interp(self, values, t):
        tt = np.concatenate([self.t, [self.t[0] + self.theta]])
        vv = np.concatenate([values, [values[0]]])
        return np.interp(np.mod(t, self.theta), tt, vv)

    def c_at(self, t):
        """Periodic piecewise-linear interpolation of 3 C1 - 9 C2."""
        return self._interp(self.c, t)

    def C1_at(self, t):
        return self._interp(self.C1, t)

    def C2_at(self, t):
        return self._interp(self.C2, t)

    def rows(self) -> list:
        return [(self.eps, self.theta, float(t), float(a), float(b), float(3 * a - 9 * b))
                for t, a, b in zip(self.t, self.C1, self.C2)]

    def to_csv(self) -> str:
        return tables_to_csv([self])

    @classmethod
    def zero(cls, eps: float, theta: float) -> "CountertermTable":
        return cls(eps, theta, np.array([0.0]), np.array([0.0]), np.array([0.0]))


def tables_to_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "theta", "t", "C1", "C2", "c"])
    for tab in tables:
        for row in tab.rows():
            w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def counterterm_table(eng: WZCovariance, n_samples: int = 8, with_c2: bool = True) -> CountertermTable:
    phases = sample_phases(eng.M, n_samples)
    c1 = compute_C1(eng, phases)
    c2 = compute_C2(eng, phases) if with_c2 else np.zeros_like(c1)
    g = eng.grid
    return CountertermTable(eng.moll.eps, eng.theta, phases * g.dt, c1, c2,
                            meta={"d": g.d, "n": g.n, "dt": g.dt})


def periodicity_defect(eng: WZCovariance, phase: int = 0) -> float:
    """Relative change of C1 when the target moves one block later."""
    a = eng.c1(phase)
    n = eng.target(phase) + eng.M
    g = eng.grid
    total = 0.0
    for sl in eng._chunks():
        w = eng._apply(eng._row(n, sl))
        total += float(np.dot(g.modes.count[sl] * eng.rho_hat[sl] ** 2, (w * w).sum(axis=0)))
    b = total / (g.L ** g.d * g.dt)
    return abs(a - b) / abs(a)


def fit_divergence(eps, c1=None, c2=None) -> dict:
    """Log-log slope of C1 against eps and the C2-versus-log(eps) diagnostics."""
    eps = np.asarray(eps, dtype=float)
    if len(eps) < 3:
        raise ValueError("fit_divergence needs at least 3 epsilon values")
    order = np.argsort(-eps)
    eps = eps[order]
    out: dict = {"epsilon": eps.tolist()}
    le = np.log(eps)
    if c1 is not None:
        c1 = np.asarray(c1, dtype=float)[order]
        if np.any(c1 <= 0):
            raise ValueError("C1 must be positive for a log-log fit")
        slope, icpt = np.polyfit(le, np.log(c1), 1)
        out.update(c1=c1.tolist(), c1_slope=float(slope), c1_intercept=float(icpt))
    if c2 is not None:
        c2 = np.asarray(c2, dtype=float)[order]
        inc = np.diff(c2)
        a, b = np.polyfit(-le, c2, 1)
        resid = c2 - (a * -le + b)
        spread = float(np.abs(inc - inc.mean()).max() / abs(inc.mean())) if inc.mean() != 0 else float("inf")
        out.update(c2=c2.tolist(), c2_increments=inc.tolist(), c2_log_coeff=float(a),
                   c2_increment_spread=spread, c2_residual=float(np.abs(resid).max()))
    return out


def ladder_grids(d: int, eps_list, dx_per_eps: float = 2.0, n_fixed: Optional[int] = None,
                 dt_per_eps2: float = 0.25, L: float = 2.0) -> list:
    """(n, dt) per rung: either a matched lattice with eps = dx_per_eps * dx or a fixed n."""
    out = []
    for e in eps_list:
        n = n_fixed if n_fixed else int(round(L * dx_per_eps / e))
        dt = dt_per_eps2 * e ** 2
        out.append((n, dt))
    return out


def divergence_ladder(d: int, eps_list, theta_of=lambda e: e, n_fixed: Optional[int] = None,
                      n_samples: int = 8, with_c2: bool = True, log=None) -> tuple:
    tables = []
    for e, (n, dt) in zip(eps_list, ladder_grids(d, eps_list, n_fixed=n_fixed)):
        eng = build_engine(d, n, dt, e, theta_of(e))
        tab = counterterm_table(eng, n_samples, with_c2)
        tables.append(tab)
        if log:
            log(f"d={d} eps={e} n={n} dt={dt}: C1={tab.C1.mean():.6g} C2={tab.C2.mean():.6g}")
    fit = fit_divergence(eps_list, [t.C1.mean() for t in tables],
                         [t.C2.mean() for t in tables] if with_c2 else None)
    return tables, fit
