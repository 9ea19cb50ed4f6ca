"""Negative Hölder seminorm estimates from scaled test-function pairings, and
the convergence experiments built on them."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import Grid
from .kernel import bump, bump_mass


@dataclass
class HolderEstimate:
    alpha: float
    scales: list
    per_scale: list
    sup_pairing: list
    rms_pairing: list = field(default_factory=list)
    parabolic: bool = True

    @property
    def seminorm(self) -> float:
        return float(max(self.per_scale))

    def scaling_exponent(self, which: str = "sup") -> float:
        """Log-log slope of the sup (or root-mean-square) pairing against the scale."""
        vals = self.sup_pairing if which == "sup" else self.rms_pairing
        return float(np.polyfit(np.log(self.scales), np.log(vals), 1)[0])


def _bump_nd(coords, lam):
    out = 1.0
    for c in coords:
        out = out * bump(np.asarray(c) / lam) / bump_mass()
    return out / lam ** len(coords)


def _pairings_spatial(u: np.ndarray, grid: Grid, lam: float) -> np.ndarray:
    """(u, phi^lam_x) at every lattice x for one spatial field (correlation by FFT)."""
    phi = _bump_nd(grid.coords(), lam) * np.ones(grid.shape)
    axes = tuple(range(-grid.d, 0))
    uh = np.fft.rfftn(u, axes=axes)
    ph = np.conj(np.fft.rfftn(phi))
    return np.fft.irfftn(uh * ph, s=grid.shape, axes=axes) * grid.cell_volume


def _pairings_spacetime(u: np.ndarray, grid: Grid, lam: float, centres) -> np.ndarray:
    """(u, phi^lam_z) for z at the given time cells and every lattice x; time is periodic."""
    nt = u.shape[0]
    h = int(np.ceil(lam ** 2 / grid.dt))
    out = np.zeros((len(centres),) + grid.shape)
    for j in range(-h, h + 1):
        wt = bump(j * grid.dt / lam ** 2) / bump_mass() / lam ** 2
        if wt == 0:
            continue
        rows = np.array([(c + j) % nt for c in centres])
        out += wt * grid.dt * _pairings_spatial(u[rows], grid, lam)
    return out


def holder_seminorm(u: np.ndarray, grid: Grid, alpha: float, scales, region=None,
                    parabolic: bool = True) -> HolderEstimate:
    """sup over scales and a dyadic point grid of lam^(-alpha) |(u, phi_z^lam)|.

    u is a space-time array (time first) when parabolic, else a spatial field.
    region gives the admissible time cells of the centres (default: all cells at
    least the largest time half-width away from both ends).
    """
    if alpha >= 0:
        raise ValueError(f"alpha={alpha} must be negative")
    scales = sorted(float(s) for s in scales)
    if len(scales) < 3:
        raise ValueError("need at least 3 scales")
    if scales[0] < 4 * grid.dx - 1e-12 or (parabolic and scales[0] ** 2 < 4 * grid.dt - 1e-12):
        raise ValueError(f"scale {scales[0]} under-resolved (needs >= 4 lattice spacings)")
    per, sups, rms = [], [], []
    if parabolic:
        nt = u.shape[0]
        hmax = int(np.ceil(scales[-1] ** 2 / grid.dt))
        if region is None:
            region = range(hmax, nt - hmax)
        region = np.asarray(list(region))
        if region.size == 0:
            raise ValueError("empty region")
    for lam in scales:
        stride_x = max(int(round(lam / grid.dx)), 1)
        if parabolic:
            stride_t = max(int(round(lam ** 2 / grid.dt)), 1)
            centres = region[:: stride_t]
            vals = _pairings_spacetime(u, grid, lam, centres)
            sl = (slice(None),) + (slice(None, None, stride_x),) * grid.d
        else:
            vals = _pairings_spatial(u, grid, lam)
            sl = (slice(None, None, stride_x),) * grid.d
        m = float(np.abs(vals[sl]).max())
        sups.append(m)
        rms.append(float(np.sqrt(np.mean(vals[sl] ** 2))))
        per.append(m * lam ** (-alpha))
    return HolderEstimate(alpha, scales, per, sups, rms, parabolic)


# -- experiment harness -------------------------------------------------------


def _fit_rate(eps, means) -> Optional[float]:
    eps, means = np.asarray(eps, float), np.asarray(means, float)
    if len(eps) < 2 or np.any(means <= 0):
        return None
    return float(np.polyfit(np.log(eps), np.log(means), 1)[0])


def _summary(values: np.ndarray) -> tuple:
    n = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def ladder_csv(ladder, means, stderrs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rung", "epsilon", "theta", "mean", "stderr"])
    for i, ((e, th), m, s) in enumerate(zip(ladder, means, stderrs)):
        w.writerow([i, repr(float(e)), repr(float(th)), repr(float(m)), repr(float(s))])
    return buf.getvalue()


def _order(ladder):
    return sorted(((float(e), float(t)) for e, t in ladder), key=lambda p: (-p[0], -p[1]))


def noise_convergence_experiment(ladder, n_mc: int, grid: Grid, n_steps: int, alpha: float = -2.0,
                                 scales=None, seed: int = 0) -> dict:
    """Mean Hölder seminorm of xi_{eps,theta} - xi over realizations, per rung; reference is the white noise."""
    from .noise import sample_white, wz_noise

    ladder = _order(ladder)
    if scales is None:
        scales = [4 * grid.dx * 2 ** j for j in range(4)]
    vals = np.zeros((n_mc, len(ladder)))
    for r in range(n_mc):
        xi = sample_white(grid, n_steps, _seed(seed, r))
        for i, (e, th) in enumerate(ladder):
            diff = wz_noise(xi, e, th).values - xi.values
            vals[r, i] = holder_seminorm(diff, grid, alpha, scales).seminorm
    mean, se = _summary(vals)
    return _ladder_report("noise", ladder, mean, se, n_mc, seed, grid, alpha, scales,
                          reference="finest-lattice white noise")


def kstar_convergence_experiment(ladder, n_mc: int, grid: Grid, n_steps: int, alpha: float = -0.25,
                                 scales=None, n_times: int = 4, seed: int = 0, spec=None) -> dict:
    """Same harness on the spatial fields K * xi_{eps,theta}(t, .) against K * xi at sampled t."""
    from .kernel import KernelOperator, KernelSpec
    from .modellift import LiftContext
    from .noise import sample_white, wz_noise

    ladder = _order(ladder)
    spec = KernelSpec(d=grid.d) if spec is None else spec
    op = KernelOperator(spec, grid)
    ctx = LiftContext(op, n_steps)
    if scales is None:
        scales = [4 * grid.dx * 2 ** j for j in range(3)]
    times = np.linspace(op.Q + 1, n_steps - 1, n_times).astype(int)
    vals = np.zeros((n_mc, len(ladder)))
    for r in range(n_mc):
        xi = sample_white(grid, n_steps, _seed(seed, r))
        ref = ctx.conv(xi.values)[times]
        for i, (e, th) in enumerate(ladder):
            ke = ctx.conv(wz_noise(xi, e, th).values)[times]
            vals[r, i] = max(holder_seminorm(ke[j] - ref[j], grid, alpha, scales, parabolic=False).seminorm
                             for j in range(len(times)))
    mean, se = _summary(vals)
    return _ladder_report("kstar", ladder, mean, se, n_mc, seed, grid, alpha, scales,
                          reference="K * (finest-lattice white noise)", times=(times * grid.dt).tolist())


def _seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0])


def _ladder_report(kind, ladder, mean, se, n_mc, seed, grid, alpha, scales, **extra) -> dict:
    rep = {"experiment": kind, "ladder": [list(p) for p in ladder], "mean": mean.tolist(),
           "stderr": se.tolist(), "n_mc": n_mc, "seed": seed,
           "grid": {"d": grid.d, "n": grid.n, "dt": grid.dt, "L": grid.L},
           "alpha": alpha, "scales": list(scales), **extra}
    if len(ladder) < 2:
        rep["rate"] = None
        rep["flag"] = "ladder of length 1: rate undefined"
    else:
        rep["rate"] = _fit_rate([p[0] for p in ladder], mean)
        rep["strictly_decreasing"] = bool(np.all(np.diff(mean) < 0))
    return rep


def negative_sobolev_distance(u: np.ndarray, v: np.ndarray, grid: Grid, s: float = 1.0) -> float:
    """Norm of u - v in H^{-s}: sqrt(sum_m (1 + |k|^2)^{-s} |hat|^2 / L^d)."""
    h = grid.fft(u - v)
    w = (1.0 + grid.k2(real=True)) ** (-s)
    mult = np.full(grid.rshape, 2.0)
    mult[..., 0] = 1.0
    if grid.n % 2 == 0:
        mult[..., -1] = 1.0
    return float(np.sqrt(np.sum(mult * w * np.abs(h) ** 2) / grid.L ** grid.d))


def solution_convergence_experiment(base_cfg: dict, ladder, seeds, t_eval: Optional[float] = None,
                                    modes=("on", "off"), log=None) -> dict:
    """Coupled solver ladder per seed: distances to the finest rung and between successive rungs.

    Rungs that blow up are excluded (per seed) and counted.
    """
    from .counterterm import build_engine, counterterm_table
    from .solver import Integrator, initial_condition, integrate, solver_noise, validate_solver_config

    ladder = _order(ladder)
    cfg = validate_solver_config(dict(base_cfg, epsilon=ladder[-1][0], theta=ladder[-1][1]))
    g = Grid(cfg["d"], cfg["n"], cfg["dt"])
    t_eval = cfg["t_final"] if t_eval is None else t_eval
    n_steps = int(round(t_eval / g.dt))
    tables = {}
    if "on" in modes:
        for e, th in ladder:
            validate_solver_config(dict(base_cfg, epsilon=e, theta=th))
            tables[(e, th)] = counterterm_table(build_engine(g.d, g.n, g.dt, e, th, cfg["c0"]))
            if log:
                log(f"counterterms eps={e} theta={th}: c mean {tables[(e, th)].c.mean():.6g}")
    out = {"config": cfg, "ladder": [list(p) for p in ladder], "t_eval": t_eval,
           "seeds": list(seeds), "reference": "finest ladder rung"}
    dealias = {"auto": None, "on": True, "off": False}[cfg["dealias"]]
    for mode in modes:
        l2_succ, sup_norms, l2_fin, hm1_succ, excluded = [], [], [], [], 0
        for sd in seeds:
            noises = solver_noise(g, n_steps, sd, ladder, cfg["spatial_only"])
            finals = []
            for (e, th), xi in zip(ladder, noises):
                coeff = None
                if mode == "on":
                    tab = tables[(e, th)]
                    coeff = lambda t, tab=tab: float(tab.c_at(t))
                integ = Integrator(g, lambda k, xi=xi: xi[k], coeff, cfg["scheme"], dealias, True, cfg["cap"])
                tr = integrate(integ, initial_condition(cfg["ic"], g), n_steps)
                finals.append(None if tr.blown_up else tr.final)
            if any(f is None for f in finals):
                excluded += 1
                continue
            l2 = lambda a, b: float(np.sqrt(np.mean((a - b) ** 2)))
            l2_succ.append([l2(finals[i], finals[i + 1]) for i in range(len(finals) - 1)])
            hm1_succ.append([negative_sobolev_distance(finals[i], finals[i + 1], g) for i in range(len(finals) - 1)])
            l2_fin.append([l2(f, finals[-1]) for f in finals])
            sup_norms.append([float(np.abs(f).max()) for f in finals])
            if log:
                log(f"renorm={mode} seed={sd}: successive L2 {l2_succ[-1]}, sup {sup_norms[-1]}")
        res = {"excluded_seeds": excluded, "n_used": len(l2_succ)}
        for name, arr in (("l2_successive", l2_succ), ("hm1_successive", hm1_succ),
                          ("l2_to_finest", l2_fin), ("sup_norm", sup_norms)):
            if arr:
                a = np.asarray(arr)
                m, s = _summary(a)
                res[name] = {"mean": m.tolist(), "stderr": s.tolist(), "per_seed": a.tolist()}
        out[f"renorm_{mode}"] = res
    return out


def paired_change(per_seed, sigmas: float = 2.0) -> dict:
    """Paired last-minus-first change over seeds, flagged when beyond sigmas standard errors."""
    a = np.asarray(per_seed, float)
    diff = a[:, -1] - a[:, 0]
    m = float(diff.mean())
    se = float(diff.std(ddof=1) / np.sqrt(len(diff))) if len(diff) > 1 else float("inf")
    return {"mean_change": m, "stderr": se, "decreasing": bool(m < -sigmas * se),
            "increasing": bool(m > sigmas * se)}
