"""Lattice space-time white noise and its mollified, block-averaged versions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .grid import Grid
from .kernel import Mollifier


@dataclass
class NoiseField:
    """Cell values on a (time, space...) lattice; time is periodic with len(values) cells."""

    values: np.ndarray
    grid: Grid
    seed: int
    stage: str = "white"
    eps: Optional[float] = None
    theta: Optional[float] = None

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]


def _slice_generator(seed: int, k: int) -> np.random.Generator:
    # the counter's high word carries the time-slice index, so every slice is
    # an independent stream and can be drawn in any order
    return np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1), counter=[0, 0, 0, int(k)]))


def sample_white(grid: Grid, n_steps: int, seed: int, first_slice: int = 0) -> NoiseField:
    """i.i.d. N(0, 1/(dt dx^d)) cells for time slices first_slice .. first_slice + n_steps - 1."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    scale = 1.0 / np.sqrt(grid.dt * grid.cell_volume)
    vals = np.empty((n_steps,) + grid.shape)
    for i in range(n_steps):
        vals[i] = _slice_generator(seed, first_slice + i).standard_normal(grid.shape)
    vals *= scale
    return NoiseField(vals, grid, seed)


def _time_kernel_hat(weights: np.ndarray, nt: int) -> np.ndarray:
    p = len(weights) // 2
    if len(weights) > nt:
        raise ValueError("time mollifier wider than the periodic time axis")
    circ = np.zeros(nt)
    idx = np.arange(-p, p + 1) % nt
    np.add.at(circ, idx, weights)
    return np.fft.rfft(circ)


def mollify(xi: NoiseField, eps: float, spatial_only: bool = False) -> NoiseField:
    """Periodic space-time convolution with rho_eps (lattice-normalised to mass 1)."""
    if xi.stage != "white":
        raise ValueError("mollify expects a white-noise field")
    g = xi.grid
    moll = Mollifier(eps, spatial_only)
    sh = moll.space_hat(g, real=True)
    axes = tuple(range(1, g.d + 1))
    vh = np.fft.rfftn(xi.values, axes=axes) * sh
    out = np.fft.irfftn(vh, s=g.shape, axes=axes)
    tw = moll.time_weights(g.dt)
    if len(tw) > 1:
        th = _time_kernel_hat(tw, xi.n_steps)
        out = np.fft.irfft(np.fft.rfft(out, axis=0) * th.reshape((-1,) + (1,) * g.d), n=xi.n_steps, axis=0)
    return replace(xi, values=out, stage="mollified", eps=eps)


def piecewise_linearize(xi_eps: NoiseField, theta: float, C0: float = 1.0) -> NoiseField:
    """Average over aligned blocks [k theta, (k+1) theta): the derivative of the interpolated path."""
    g = xi_eps.grid
    M = int(round(theta / g.dt))
    if M < 1 or abs(M * g.dt - theta) > 1e-9 * theta:
        raise ValueError(f"theta={theta} is not a multiple of dt={g.dt}")
    if xi_eps.n_steps % M:
        raise ValueError(f"time axis of {xi_eps.n_steps} cells is not a whole number of blocks")
    if xi_eps.eps is not None and xi_eps.eps ** 2 > C0 * theta:
        warnings.warn(f"epsilon^2 = {xi_eps.eps ** 2} exceeds C0*theta = {C0 * theta}")
    v = xi_eps.values
    blocks = v.reshape((v.shape[0] // M, M) + v.shape[1:]).mean(axis=1, keepdims=True)
    out = np.broadcast_to(blocks, (v.shape[0] // M, M) + v.shape[1:]).reshape(v.shape).copy()
    return replace(xi_eps, values=out, stage="wz", theta=theta)


def wz_noise(xi: NoiseField, eps: float, theta: float, spatial_only: bool = False) -> NoiseField:
    return piecewise_linearize(mollify(xi, eps, spatial_only), theta)


def couple_resolutions(master_seed: int, grid: Grid, n_steps: int, pairs, spatial_only: bool = False,
                       master: Optional[NoiseField] = None) -> list:
    """Regularise one master white noise at each (eps, theta); all outputs share the lattice."""
    if master is None:
        master = sample_white(grid, n_steps, master_seed)
    return [wz_noise(master, e, th, spatial_only) for e, th in pairs]
