import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.counterterm import build_engine, counterterm_table
from wzphi4.modellift import (
    LiftContext, lift_canonical, lift_renormalised, needs_base_point, pair_all_x, pair_at,
    realization_seed, scaling_probe,
)
from wzphi4.noise import sample_white, wz_noise
from wzphi4.symbolic import parse

EPS = TH = 1 / 16
NT = 512


@pytest.fixture(scope="module")
def setup():
    eng = build_engine(1, 64, 1 / 256, EPS, TH)
    ctx = LiftContext(eng.op, NT, counterterm_table(eng, with_c2=True))
    xi = wz_noise(sample_white(eng.grid, NT, 11), EPS, TH)
    return eng, ctx, xi


BASE = (200, (10,))


def test_psi_is_linear_in_noise(setup):
    eng, ctx, xi = setup
    a = lift_canonical("Psi", xi, BASE, ctx).values
    xi2 = type(xi)(2 * xi.values, xi.grid, 0, "wz", EPS, TH)
    assert np.allclose(lift_canonical("Psi", xi2, BASE, ctx).values, 2 * a)
    assert np.allclose(lift_canonical("Psi^2", xi, BASE, ctx).values, a ** 2)


def test_positive_integral_recentred(setup):
    _, ctx, xi = setup
    f = lift_canonical("I(Psi^2)", xi, BASE, ctx).values
    assert f[BASE[0], BASE[1][0]] == 0.0
    assert np.abs(f).max() > 0
    x1 = lift_canonical("X1", xi, BASE, ctx).values
    assert x1[BASE[0], BASE[1][0]] == 0.0
    assert needs_base_point(parse("I(Psi^2)", 1)) and not needs_base_point(parse("Psi^2", 1))


def test_renormalised_wick_powers(setup):
    eng, ctx, xi = setup
    c1 = ctx.c_field(1)
    psi = lift_canonical("Psi", xi, BASE, ctx).values
    r2 = lift_renormalised("Psi^2", xi, BASE, ctx).values
    r3 = lift_renormalised("Psi^3", xi, BASE, ctx).values
    assert np.allclose(r2, psi ** 2 - c1)
    assert np.allclose(r3, psi ** 3 - 3 * c1 * psi)
    t = np.arange(NT) * eng.grid.dt
    assert np.allclose(c1.reshape(NT, -1)[:, 0], ctx.counterterms.C1_at(t))


def test_wick_square_mean_zero(setup):
    eng, ctx, _ = setup
    g = eng.grid
    means = []
    for r in range(40):
        xi = wz_noise(sample_white(g, NT, realization_seed(3, r)), EPS, TH)
        v = lift_renormalised("Psi^2", xi, BASE, ctx).values
        means.append(v[300].mean())
    means = np.array(means)
    se = means.std(ddof=1) / np.sqrt(len(means))
    assert abs(means.mean()) < 4 * se


def test_pairing_mass_one(setup):
    eng, _, _ = setup
    g = eng.grid
    ones = np.ones((NT,) + g.shape)
    # lattice-normalised bumps: mass one exactly, the (1 + y_1) factor is odd
    for lam in (0.125, 0.25, 0.5):
        assert np.allclose(pair_all_x(ones, 256, lam, g), 1.0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 63), st.integers(0, 1000))
def test_pair_at_matches_all_x(i, seed):
    g = build_engine(1, 64, 1 / 256, EPS, TH).grid
    f = np.random.default_rng(seed).standard_normal((NT,) + g.shape)
    assert pair_at(f, (256, (i,)), 0.25, g) == pytest.approx(pair_all_x(f, 256, 0.25, g)[i], abs=1e-10)


def test_guards(setup):
    eng, ctx, xi = setup
    with pytest.raises(ValueError):
        lift_canonical("I(Psi^3)", xi, BASE, ctx)
    with pytest.raises(ValueError):
        lift_canonical("Psi", xi, (NT, (0,)), ctx)
    with pytest.raises(ValueError):
        pair_all_x(xi.values, 0, eng.grid.dx, eng.grid)
    with pytest.raises(ValueError):
        LiftContext(eng.op, eng.op.Q)
    other = wz_noise(sample_white(eng.grid, NT, 1), 1 / 8, 1 / 16)
    with pytest.raises(ValueError):
        lift_renormalised("Psi^2", other, BASE, ctx)


def test_probe_deterministic(setup):
    eng, ctx, _ = setup

    def make(r):
        return wz_noise(sample_white(eng.grid, NT, realization_seed(0, r)), EPS, TH)

    a = scaling_probe("Psi", "canonical", [0.125, 0.25, 0.5], 3, make, ctx)
    b = scaling_probe("Psi", "canonical", [0.125, 0.25, 0.5], 3, make, ctx)
    assert a == b
    assert len(a["second_moment"]) == 3 and np.isfinite(a["slope"])
