import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.grid import Grid
from wzphi4.kernel import (
    KernelOperator, KernelSpec, Mollifier, WZCovariance, build_K, bump, check_kernel_bounds,
    dyadic_decompose, heat_kernel, heat_kernel_1d, smooth_step, table_moments,
)

SPEC1 = KernelSpec(d=1)
G1 = Grid(1, 64, 1 / 256)


@pytest.fixture(scope="module")
def K1():
    return build_K(SPEC1, G1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0))
def test_heat_kernel_mass(t):
    g = Grid(1, 256, 1.0)
    assert heat_kernel_1d(t, g.coords_1d()).sum() * g.dx == pytest.approx(1.0, abs=1e-10)


def test_heat_kernel_causal_and_product():
    x = np.array([[0.1, -0.2], [0.3, 0.0]])
    assert np.all(heat_kernel(0.0, x) == 0)
    assert np.all(heat_kernel(-0.1, x) == 0)
    prod = heat_kernel_1d(0.2, x[..., 0]) * heat_kernel_1d(0.2, x[..., 1])
    assert np.allclose(heat_kernel(0.2, x), prod)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_cutoffs(u, v):
    assert 0 <= smooth_step(u) <= 1
    if u <= v:
        assert smooth_step(u) <= smooth_step(v) + 1e-15
    assert bump(u) == pytest.approx(bump(-u))
    if abs(u) >= 1:
        assert bump(u) == 0


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(d=4)
    with pytest.raises(ValueError):
        KernelSpec(r=-1)


def test_K_equals_heat_kernel_inside(K1):
    t = K1.times()[:, None]
    x = G1.coords_1d()[None, :]
    inside = (x ** 2 + t < 0.5) & (t > 0)
    exact = heat_kernel_1d(t, x) * np.ones_like(K1.values)
    assert np.abs(K1.values - exact)[inside].max() < 1e-8


def test_K_moments_vanish(K1):
    l1 = np.abs(K1.values).sum() * K1.dt * K1.dx
    for m in table_moments(K1, SPEC1).values():
        assert abs(m) < 1e-8 * l1


def test_K_support(K1):
    t = K1.times()[:, None]
    x = G1.coords_1d()[None, :]
    assert np.all(K1.values[(x ** 2 + t >= 1.0) | (t <= 0)] == 0)


@pytest.mark.parametrize("annihilate", [False, True])
def test_dyadic_sum(K1, annihilate):
    levels = dyadic_decompose(K1, SPEC1, annihilate_moments=annihilate)
    assert np.abs(sum(lv.values for lv in levels) - K1.values).max() < 1e-12
    if annihilate:
        l1 = np.abs(K1.values).sum() * K1.dt * K1.dx
        for lv in levels:
            assert max(abs(v) for v in table_moments(lv, SPEC1).values()) < 1e-10 * l1


def test_dyadic_resolution_guard(K1):
    with pytest.raises(ValueError):
        dyadic_decompose(K1, SPEC1, n_dyadic=8)


@pytest.mark.parametrize("eps", [1 / 16, 1 / 8, 1 / 4])
def test_mollifier_mass(eps):
    m = Mollifier(eps)
    assert m.time_weights(1 / 256).sum() == pytest.approx(1.0, abs=1e-12)
    assert m.space_weights(G1).sum() * G1.dx == pytest.approx(1.0, abs=1e-12)
    assert m.space_hat_1d(G1)[0] == pytest.approx(1.0, abs=1e-12)


def test_mollifier_identity_and_guard():
    assert np.all(Mollifier(0.0).space_hat_1d(G1) == 1)
    assert list(Mollifier(1 / 16, spatial_only=True).time_weights(1 / 256)) == [1.0]
    with pytest.raises(ValueError):
        Mollifier(G1.dx).space_hat_1d(G1)


def test_operator_mass_small():
    op = KernelOperator(SPEC1, G1)
    assert abs(op.mass()) < 1e-5


def test_covariance_validation():
    op = KernelOperator(SPEC1, G1)
    with pytest.raises(ValueError):
        WZCovariance(op, Mollifier(1 / 16), 1.5 / 256)
    with pytest.raises(ValueError):
        WZCovariance(op, Mollifier(1 / 4), 1 / 256)


def test_bound_checks_finite():
    rep = check_kernel_bounds(d=1, n=64, dt=1 / 256, n_points=6)
    for key in ("mollified_kernel", "covariance_bound", "covariance_difference", "covariance_increment"):
        assert rep[key]["finite"]
