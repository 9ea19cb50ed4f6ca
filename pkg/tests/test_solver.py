import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.config import ConfigError
from wzphi4.grid import Grid
from wzphi4.solver import (
    Integrator, explicit_rk4_reference, initial_condition, integrate, noise_pad, run,
    solver_noise, validate_solver_config,
)


def ode_exact(u0, c, t):
    e = np.exp(2 * c * t)
    return np.sign(u0) * np.sqrt(c * u0 ** 2 * e / (c + u0 ** 2 * (e - 1)))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), st.floats(0.5, 2.0))
def test_linear_heat_exact(m, a):
    g = Grid(1, 64, 1 / 512)
    x = g.coords_1d()
    phi0 = a * np.cos(np.pi * m * x)
    traj = integrate(Integrator(g, cube=False), phi0, 64)
    exact = phi0 * np.exp(-(np.pi * m) ** 2 * 64 * g.dt)
    assert np.abs(traj.final - exact).max() < 1e-12


@pytest.mark.parametrize("u0,c", [(0.5, 2.0), (2.0, 1.0), (-1.0, 3.0)])
def test_ode_oracle(u0, c):
    g = Grid(2, 8, 1 / 256)
    traj = integrate(Integrator(g, coeff=lambda t: c), np.full(g.shape, u0), 256)
    assert np.abs(traj.final - ode_exact(u0, c, 1.0)).max() < 1e-6


def test_etd1_first_order():
    errs = []
    for k in (256, 512):
        g = Grid(1, 8, 1 / k)
        traj = integrate(Integrator(g, coeff=lambda t: 2.0, scheme="etd1"), np.full(g.shape, 0.5), k)
        errs.append(np.abs(traj.final - ode_exact(0.5, 2.0, 1.0)).max())
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.1)


def test_self_convergence_with_noise():
    g = Grid(1, 64, 1 / 1024)
    n = 128
    xi = solver_noise(g, n, 4, [(1 / 16, 1 / 256)])[0]
    c = 2.0
    phi0 = initial_condition("sin", g)
    traj = integrate(Integrator(g, lambda k: xi[k], lambda t: c), phi0, n)
    ref = explicit_rk4_reference(g, phi0, n * g.dt, 8, lambda k: xi[k], lambda t: c)
    assert np.abs(traj.final - ref).max() < 1e-3


def test_blow_up_flag():
    g = Grid(1, 16, 1 / 64)
    traj = integrate(Integrator(g, coeff=lambda t: 0.0, cap=0.5), np.ones(g.shape), 10)
    assert traj.blown_up and traj.stop_time == pytest.approx(1 / 64)
    assert traj.final is None


def test_dealias_mask_d2():
    g = Grid(2, 12, 1 / 64)
    it = Integrator(g)
    assert it.mask is not None and not it.mask.all()
    assert Integrator(Grid(1, 12, 1 / 64)).mask is None


def test_initial_conditions():
    g = Grid(1, 16, 1 / 64)
    assert np.all(initial_condition("zero", g) == 0)
    assert np.all(initial_condition("const:0.25", g) == 0.25)
    with pytest.raises(ConfigError):
        initial_condition("bogus", g)


@pytest.mark.parametrize("key,value", [
    ("theta", 1.5 / 4096), ("epsilon", 1 / 256), ("scheme", "euler"), ("n", 7), ("d", 4), ("dt", -1.0),
])
def test_config_errors_name_key(key, value):
    with pytest.raises(ConfigError) as exc:
        validate_solver_config({key: value})
    assert exc.value.key == key


def test_unstable_ratio():
    cfg = {"epsilon": 1 / 8, "theta": 1 / 256}
    with pytest.raises(ConfigError):
        validate_solver_config(cfg)
    assert validate_solver_config(cfg, allow_unstable=True)["epsilon"] == 1 / 8


def test_noise_pad_block_aligned():
    for M in (1, 4, 16):
        assert noise_pad(1 / 16, 1 / 4096, M) % M == 0
        assert noise_pad(1 / 16, 1 / 4096, M) > 16


def test_solver_noise_coupled_and_cropped():
    g = Grid(1, 128, 1 / 1024)
    a = solver_noise(g, 100, 3, [(1 / 16, 1 / 256), (1 / 32, 1 / 1024)])
    b = solver_noise(g, 100, 3, [(1 / 16, 1 / 256), (1 / 32, 1 / 1024)])
    assert [x.shape for x in a] == [(100, 128), (100, 128)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_run_deterministic():
    cfg = {"n": 64, "dt": 1 / 1024, "t_final": 1 / 32, "epsilon": 1 / 16, "theta": 1 / 256}
    t1, r1 = run(cfg)
    t2, r2 = run(cfg)
    assert np.array_equal(t1.final, t2.final) and r1 == r2
    assert not t1.blown_up and r1["c_mean"] > 0
