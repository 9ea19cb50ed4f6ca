import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.analysis import (
    holder_seminorm, kstar_convergence_experiment, ladder_csv, negative_sobolev_distance,
    noise_convergence_experiment, paired_change,
)
from wzphi4.grid import Grid
from wzphi4.noise import sample_white

G = Grid(1, 256, 1 / 4096)
SCALES = [1 / 32, 1 / 16, 1 / 8, 1 / 4]


def test_constant_field_scale_free():
    u = np.full((1024,) + G.shape, 3.0)
    est = holder_seminorm(u, G, -1.0, SCALES)
    # lattice quadrature of the bump: about 1% at 8 cells per scale
    assert np.allclose(est.sup_pairing, 3.0, rtol=2e-2)
    assert abs(est.scaling_exponent()) < 1e-2
    assert est.seminorm == pytest.approx(3.0 * 0.25, rel=1e-3)


def test_white_noise_rms_exponent():
    # parabolic scaling of space-time white noise in d=1: -(d+2)/2
    xi = sample_white(G, 4096, 0).values
    est = holder_seminorm(xi, G, -2.0, SCALES)
    assert est.scaling_exponent("rms") == pytest.approx(-1.5, abs=0.15)


def test_spatial_white_noise_exponent():
    g = Grid(1, 4096, 1.0)
    u = np.random.default_rng(1).standard_normal(g.shape) / np.sqrt(g.dx)
    est = holder_seminorm(u, g, -1.0, [1 / 64, 1 / 32, 1 / 16, 1 / 8], parabolic=False)
    assert est.scaling_exponent("rms") == pytest.approx(-0.5, abs=0.1)


def test_guards():
    u = np.zeros((64,) + G.shape)
    with pytest.raises(ValueError):
        holder_seminorm(u, G, 0.5, SCALES)
    with pytest.raises(ValueError):
        holder_seminorm(u, G, -1.0, SCALES[:2])
    with pytest.raises(ValueError):
        holder_seminorm(u, G, -1.0, [G.dx, 0.1, 0.2])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 20), st.floats(0.1, 5))
def test_hm1_single_mode(m, a):
    g = Grid(1, 128, 1.0)
    k = np.pi * m
    u = a * np.cos(k * g.coords_1d())
    assert negative_sobolev_distance(u, 0 * u, g) == pytest.approx(a / np.sqrt(1 + k * k), rel=1e-10)


def test_ladder_csv():
    text = ladder_csv([(0.1, 0.01), (0.05, 0.0025)], [1.0, 0.5], [0.1, 0.05])
    assert text.splitlines()[0] == "rung,epsilon,theta,mean,stderr"
    assert len(text.splitlines()) == 3


def test_noise_experiment_shape():
    g = Grid(1, 128, 1 / 1024)
    rep = noise_convergence_experiment([(1 / 8, 1 / 64), (1 / 16, 1 / 256)], 2, g, 512,
                                       scales=[1 / 16, 1 / 8, 1 / 4])
    assert len(rep["mean"]) == 2 and rep["rate"] is not None
    single = noise_convergence_experiment([(1 / 8, 1 / 64)], 2, g, 512, scales=[1 / 16, 1 / 8, 1 / 4])
    assert single["rate"] is None and "flag" in single


def test_kstar_needs_long_axis():
    g = Grid(1, 64, 1 / 256)
    with pytest.raises(ValueError):
        kstar_convergence_experiment([(1 / 8, 1 / 64), (1 / 16, 1 / 256)], 1, g, 128,
                                     scales=[1 / 16, 1 / 8, 1 / 4])


def test_paired_change():
    rng = np.random.default_rng(0)
    base = rng.uniform(1, 2, 8)
    down = np.stack([base, base - 0.5 + 0.01 * rng.standard_normal(8)], axis=1)
    up = down[:, ::-1]
    assert paired_change(down)["decreasing"] and not paired_change(down)["increasing"]
    assert paired_change(up)["increasing"]
