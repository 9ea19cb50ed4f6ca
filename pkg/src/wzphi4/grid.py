"""Periodic space-time lattice with parabolic scaling and spectral helpers."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Spatial torus [-L/2, L/2)^d with n points per side, plus a time step.

    Index j corresponds to the signed periodic coordinate ((j + n/2) mod n - n/2) dx,
    so index 0 is the origin and kernels centred at 0 need no shifting.
    """

    d: int
    n: int
    dt: float
    L: float = 2.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d={self.d} must be 1, 2 or 3")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n={self.n} must be even and >= 4")
        if not self.dt > 0:
            raise ValueError(f"dt={self.dt} must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def rshape(self) -> tuple:
        return (self.n,) * (self.d - 1) + (self.n // 2 + 1,)

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    def coords_1d(self) -> np.ndarray:
        j = np.arange(self.n)
        return (((j + self.n // 2) % self.n) - self.n // 2) * self.dx

    def coords(self) -> list:
        """Signed coordinates, one broadcastable array per axis."""
        c = self.coords_1d()
        out = []
        for i in range(self.d):
            shape = [1] * self.d
            shape[i] = self.n
            out.append(c.reshape(shape))
        return out

    def r2(self) -> np.ndarray:
        return sum(c ** 2 for c in self.coords())

    def int_freqs(self, real: bool = True) -> list:
        """Signed integer frequencies on the (r)fft layout, broadcastable per axis."""
        m = np.fft.fftfreq(self.n, 1.0 / self.n).round().astype(int)
        mr = np.arange(self.n // 2 + 1)
        out = []
        for i in range(self.d):
            shape = [1] * self.d
            last = real and i == self.d - 1
            shape[i] = self.n // 2 + 1 if last else self.n
            out.append((mr if last else m).reshape(shape))
        return out

    def k2(self, real: bool = True) -> np.ndarray:
        """|k|^2 on the spectral layout, k = 2 pi m / L."""
        c = 2 * np.pi / self.L
        return sum((c * m) ** 2 for m in self.int_freqs(real)).astype(float)

    @cached_property
    def modes(self) -> "ReducedModes":
        return ReducedModes(self.d, self.n)

    # spectral transforms with continuum normalisation: u_hat(m) = sum_j u_j e^{-ikx_j} dx^d
    def fft(self, u: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        return np.fft.rfftn(u, axes=axes) * self.cell_volume

    def ifft(self, uh: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        return np.fft.irfftn(uh, s=self.shape, axes=axes) / self.cell_volume


class ReducedModes:
    """Classes of lattice modes under coordinate permutations and sign flips.

    Every kernel used here is invariant under this group, so spectral quantities
    are computed once per class and expanded when a full layout is needed.
    """

    def __init__(self, d: int, n: int):
        self.d = d
        self.n = n
        a = np.abs(np.fft.fftfreq(n, 1.0 / n).round().astype(int))
        full = np.stack(np.meshgrid(*([a] * d), indexing="ij"), axis=-1).reshape(-1, d)
        keys = np.sort(full, axis=1)
        self.classes, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        self.full_index = inv.reshape((n,) * d)
        self.count = counts.astype(float)
        self.rfft_index = np.ascontiguousarray(self.full_index[..., : n // 2 + 1])

    @property
    def size(self) -> int:
        return len(self.classes)

    def k2(self, L: float) -> np.ndarray:
        return ((2 * np.pi / L) ** 2 * (self.classes.astype(float) ** 2).sum(axis=1))

    def sum_full(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Sum over every lattice mode of a class-indexed array."""
        return np.tensordot(values, self.count, axes=([axis], [0]))

    def expand_rfft(self, values: np.ndarray) -> np.ndarray:
        """Class-indexed values (..., n_classes) onto the rfft layout (..., *rshape)."""
        return values[..., self.rfft_index]

    def from_rfft(self, field_hat: np.ndarray) -> np.ndarray:
        """Pick one representative per class from an rfft-layout array."""
        flat = self.rfft_index.reshape(-1)
        out = np.empty(field_hat.shape[: field_hat.ndim - self.d] + (self.size,), dtype=field_hat.dtype)
        pos = np.empty(self.size, dtype=int)
        pos[flat[::-1]] = np.arange(flat.size)[::-1]
        return field_hat.reshape(field_hat.shape[: field_hat.ndim - self.d] + (-1,))[..., pos]


def parabolic_norm(t, x) -> np.ndarray:
    """||z||_s = |t|^(1/2) + sum |x_i|, x given as a list of coordinate arrays."""
    return np.sqrt(np.abs(t)) + sum(np.abs(c) for c in x)
