import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.grid import Grid
from wzphi4.noise import (
    NoiseField, couple_resolutions, mollify, piecewise_linearize, sample_white, wz_noise,
)

G = Grid(1, 64, 1 / 256)
G2 = Grid(2, 16, 1 / 64)


def test_white_deterministic_and_sliceable():
    a = sample_white(G, 32, seed=7)
    b = sample_white(G, 32, seed=7)
    c = sample_white(G, 16, seed=7, first_slice=16)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.values[16:], c.values)
    assert not np.array_equal(a.values, sample_white(G, 32, seed=8).values)


def test_white_variance():
    xi = sample_white(G2, 256, seed=1)
    target = 1 / (G2.dt * G2.cell_volume)
    # 65536 samples: relative standard error of the variance is about 0.55%
    assert xi.values.var() == pytest.approx(target, rel=0.03)
    assert abs(xi.values.mean()) < 4 * np.sqrt(target / xi.values.size)


@pytest.mark.parametrize("spatial_only", [False, True])
def test_mollify_preserves_constants(spatial_only):
    one = NoiseField(np.ones((64,) + G.shape), G, 0)
    out = mollify(one, 1 / 8, spatial_only)
    assert np.abs(out.values - 1).max() < 1e-8
    assert out.stage == "mollified"


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.integers(0, 1000))
def test_mollify_linear(a, seed):
    x = sample_white(G, 16, seed)
    y = sample_white(G, 16, seed + 1)
    s = NoiseField(a * x.values + y.values, G, 0)
    lhs = mollify(s, 1 / 8).values
    rhs = a * mollify(x, 1 / 8).values + mollify(y, 1 / 8).values
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(a)) * np.abs(rhs).max())


def test_mollify_stage_guard():
    m = mollify(sample_white(G, 16, 0), 1 / 8)
    with pytest.raises(ValueError):
        mollify(m, 1 / 8)


def test_block_average():
    m = mollify(sample_white(G, 64, 3), 1 / 8)
    wz = piecewise_linearize(m, 16 * G.dt)
    v = wz.values.reshape(4, 16, -1)
    assert np.allclose(v, v[:, :1])
    assert np.allclose(v[:, 0], m.values.reshape(4, 16, -1).mean(axis=1))
    assert wz.stage == "wz" and wz.theta == 16 * G.dt


def test_block_guards():
    m = mollify(sample_white(G, 64, 3), 1 / 8)
    with pytest.raises(ValueError):
        piecewise_linearize(m, 1.5 * G.dt)
    with pytest.raises(ValueError):
        piecewise_linearize(m, 48 * G.dt)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        piecewise_linearize(m, G.dt)
    assert rec


def test_coupling_shares_master():
    pairs = [(1 / 8, 1 / 64), (1 / 16, 1 / 256)]
    out = couple_resolutions(5, G, 64, pairs)
    xi = sample_white(G, 64, 5)
    for f, (e, th) in zip(out, pairs):
        assert np.array_equal(f.values, wz_noise(xi, e, th).values)
