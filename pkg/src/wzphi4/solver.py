"""Integrating-factor spectral integrator for the (renormalised) Wong-Zakai equation.

    d/dt Phi = Laplacian Phi + c(t) Phi - Phi^3 + xi_{eps,theta}

The Laplacian is handled exactly in Fourier space; the rest is explicit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import ConfigError, resolve
from .counterterm import CountertermTable
from .grid import Grid

SOLVER_SCHEMA = {
    "d": (int, 1),
    "n": (int, 256),
    "dt": (float, 1.0 / 4096),
    "t_final": (float, 0.25),
    "epsilon": (float, 1.0 / 16),
    "theta": (float, 1.0 / 256),
    "c0": (float, 1.0),
    "renorm": (bool, True),
    "seed": (int, 0),
    "ic": (str, "sin"),
    "cap": (float, 1e6),
    "scheme": (str, "rk4"),
    "dealias": (str, "auto"),
    "spatial_only": (bool, False),
    "snapshots": ("floats", []),
}


def validate_solver_config(cfg: dict, allow_unstable: bool = False) -> dict:
    cfg = resolve(cfg, SOLVER_SCHEMA)
    if cfg["d"] not in (1, 2, 3):
        raise ConfigError("d", "must be 1, 2 or 3")
    if cfg["n"] < 4 or cfg["n"] % 2:
        raise ConfigError("n", "must be even and >= 4")
    for k in ("dt", "t_final", "epsilon", "theta", "c0", "cap"):
        if not cfg[k] > 0:
            raise ConfigError(k, "must be positive")
    M = round(cfg["theta"] / cfg["dt"])
    if M < 1 or abs(M * cfg["dt"] - cfg["theta"]) > 1e-9 * cfg["theta"]:
        raise ConfigError("theta", "must be a whole multiple of dt")
    if cfg["epsilon"] < 2 * 2.0 / cfg["n"] - 1e-12:
        raise ConfigError("epsilon", "must be at least two lattice spacings")
    if cfg["epsilon"] ** 2 > cfg["c0"] * cfg["theta"] and not allow_unstable:
        raise ConfigError("epsilon", "epsilon^2 > c0*theta (use --allow-unstable to override)")
    if cfg["scheme"] not in ("rk4", "etd1"):
        raise ConfigError("scheme", "must be rk4 or etd1")
    if cfg["dealias"] not in ("auto", "on", "off"):
        raise ConfigError("dealias", "must be auto, on or off")
    initial_condition(cfg["ic"], Grid(cfg["d"], cfg["n"], cfg["dt"]), key_check=True)
    return cfg


def initial_condition(spec: str, grid: Grid, key_check: bool = False) -> np.ndarray:
    """'sin' (sin(pi x_1)), 'zero', or 'const:<a>'."""
    if spec == "sin":
        return np.sin(np.pi * grid.coords()[0]) * np.ones(grid.shape)
    if spec == "zero":
        return np.zeros(grid.shape)
    if spec.startswith("const:"):
        try:
            return float(spec[6:]) * np.ones(grid.shape)
        except ValueError:
            pass
    raise ConfigError("ic", f"unknown initial condition {spec!r}")


@dataclass
class SolverState:
    phi: np.ndarray
    t: float
    step: int
    grid: Grid
    blown_up: bool = False


@dataclass
class Integrator:
    """One-step map for the equation on a fixed grid.

    forcing(step) returns the noise cell values for [step dt, (step+1) dt);
    coeff(t) returns c(t).  cube=False drops the -Phi^3 term (for tests).
    """

    grid: Grid
    forcing: Optional[Callable[[int], np.ndarray]] = None
    coeff: Optional[Callable[[float], float]] = None
    scheme: str = "rk4"
    dealias: Optional[bool] = None
    cube: bool = True
    cap: float = 1e6

    def __post_init__(self):
        g = self.grid
        k2 = g.k2(real=True)
        h = g.dt
        self.E = np.exp(-k2 * h)
        self.E2 = np.exp(-k2 * h / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi1 = -np.expm1(-k2 * h) / (k2 * h)
        self.phi1 = np.where(k2 == 0, 1.0, phi1)
        dealias = (g.d >= 2) if self.dealias is None else self.dealias
        self.mask = None
        if dealias:
            m = g.int_freqs(real=True)
            keep = np.ones(g.rshape, dtype=bool)
            for mi in m:
                keep &= np.abs(mi) <= g.n // 3
            self.mask = keep

    def _N(self, uh: np.ndarray, t: float, xi_h) -> np.ndarray:
        g = self.grid
        out = np.zeros_like(uh)
        if self.cube:
            u = g.ifft(uh)
            c3 = g.fft(u * u * u)
            if self.mask is not None:
                c3 = c3 * self.mask
            out -= c3
        if self.coeff is not None:
            out += self.coeff(t) * uh
        if xi_h is not None:
            out += xi_h
        return out

    def step(self, state: SolverState) -> SolverState:
        g = self.grid
        h = g.dt
        t = state.t
        uh = g.fft(state.phi)
        xi_h = g.fft(self.forcing(state.step)) if self.forcing is not None else None
        if self.scheme == "etd1":
            new = self.E * uh + h * self.phi1 * self._N(uh, t, xi_h)
        else:
            E, E2 = self.E, self.E2
            k1 = self._N(uh, t, xi_h)
            k2 = self._N(E2 * (uh + 0.5 * h * k1), t + h / 2, xi_h)
            k3 = self._N(E2 * uh + 0.5 * h * k2, t + h / 2, xi_h)
            k4 = self._N(E * uh + h * E2 * k3, t + h, xi_h)
            new = E * uh + h / 6 * (E * k1 + 2 * E2 * (k2 + k3) + k4)
        phi = g.ifft(new)
        bad = not np.all(np.isfinite(phi)) or np.abs(phi).max() > self.cap
        return SolverState(phi, t + h, state.step + 1, g, bad)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    blown_up: bool = False
    stop_time: Optional[float] = None
    final: Optional[np.ndarray] = None

    def report(self) -> dict:
        rows = []
        for t, s in zip(self.times, self.snapshots):
            rows.append({"t": t, "l2": float(np.sqrt(np.mean(s ** 2))), "sup": float(np.abs(s).max())})
        return {"blown_up": self.blown_up, "stop_time": self.stop_time, "snapshots": rows}


def integrate(integrator: Integrator, phi0: np.ndarray, n_steps: int, snapshot_steps=()) -> Trajectory:
    state = SolverState(np.array(phi0, dtype=float), 0.0, 0, integrator.grid)
    traj = Trajectory()
    wanted = set(int(s) for s in snapshot_steps)
    if 0 in wanted:
        traj.times.append(0.0)
        traj.snapshots.append(state.phi.copy())
    for _ in range(n_steps):
        state = integrator.step(state)
        if state.blown_up:
            traj.blown_up = True
            traj.stop_time = state.t
            return traj
        if state.step in wanted:
            traj.times.append(state.t)
            traj.snapshots.append(state.phi.copy())
    traj.final = state.phi
    return traj


def explicit_rk4_reference(grid: Grid, phi0: np.ndarray, t_final: float, substeps: int,
                           forcing: Optional[Callable[[int], np.ndarray]] = None,
                           coeff: Optional[Callable[[float], float]] = None) -> np.ndarray:
    """Classical RK4 on the full semi-discrete system with dt/substeps, noise held per coarse cell."""
    g = grid
    k2 = g.k2(real=True)
    h = g.dt / substeps
    n_coarse = int(round(t_final / g.dt))

    def rhs(uh, t, xi_h):
        u = g.ifft(uh)
        out = -k2 * uh - g.fft(u ** 3)
        if coeff is not None:
            out += coeff(t) * uh
        if xi_h is not None:
            out += xi_h
        return out

    uh = g.fft(phi0)
    t = 0.0
    for n in range(n_coarse):
        xi_h = g.fft(forcing(n)) if forcing is not None else None
        for _ in range(substeps):
            a = rhs(uh, t, xi_h)
            b = rhs(uh + h / 2 * a, t + h / 2, xi_h)
            c = rhs(uh + h / 2 * b, t + h / 2, xi_h)
            e = rhs(uh + h * c, t + h, xi_h)
            uh = uh + h / 6 * (a + 2 * b + 2 * c + e)
            t += h
    return g.ifft(uh)


def noise_pad(eps: float, dt: float, M: int) -> int:
    """Block-aligned number of lead-in cells so periodic time mollification never wraps into [0, T)."""
    p = int(np.ceil(eps ** 2 / dt)) + 1
    return M * int(np.ceil(p / M)) + M


def run(cfg: dict, counterterms: Optional[CountertermTable] = None, xi_values: Optional[np.ndarray] = None,
        allow_unstable: bool = False) -> tuple:
    """Run one trajectory; returns (Trajectory, report dict).

    xi_values, if given, are the regularised noise cells for [0, T); otherwise they are
    generated from cfg['seed'].  With renorm on and no table, the counterterms are computed.
    """
    from .noise import sample_white, wz_noise

    cfg = validate_solver_config(cfg, allow_unstable)
    g = Grid(cfg["d"], cfg["n"], cfg["dt"])
    n_steps = int(round(cfg["t_final"] / g.dt))
    if xi_values is None:
        xi_values = solver_noise(g, n_steps, cfg["seed"], [(cfg["epsilon"], cfg["theta"])],
                                 cfg["spatial_only"])[0]
    coeff = None
    if cfg["renorm"]:
        if counterterms is None:
            from .counterterm import build_engine, counterterm_table

            eng = build_engine(g.d, g.n, g.dt, cfg["epsilon"], cfg["theta"], cfg["c0"] if not allow_unstable else np.inf,
                               cfg["spatial_only"])
            counterterms = counterterm_table(eng)
        coeff = lambda t: float(counterterms.c_at(t))
    dealias = {"auto": None, "on": True, "off": False}[cfg["dealias"]]
    integ = Integrator(g, lambda k: xi_values[k], coeff, cfg["scheme"], dealias, True, cfg["cap"])
    snaps = cfg["snapshots"] or [cfg["t_final"]]
    steps = [int(round(s / g.dt)) for s in snaps]
    traj = integrate(integ, initial_condition(cfg["ic"], g), n_steps, steps)
    report = {"config": cfg, **traj.report()}
    if counterterms is not None:
        report["c_mean"] = float(np.mean(counterterms.c))
    return traj, report


def solver_noise(grid: Grid, n_steps: int, seed: int, pairs, spatial_only: bool = False) -> list:
    """Regularised noise cells on [0, n_steps dt) for each (eps, theta), from one master realization."""
    from .noise import couple_resolutions, sample_white

    Ms = [int(round(th / grid.dt)) for _, th in pairs]
    block = int(np.lcm.reduce(Ms))
    pad = max(noise_pad(e, grid.dt, block) for e, _ in pairs)
    total = block * int(np.ceil((n_steps + 2 * pad) / block))
    master = sample_white(grid, total, seed)
    fields = couple_resolutions(seed, grid, total, pairs, spatial_only, master=master)
    return [f.values[pad:pad + n_steps] for f in fields]
