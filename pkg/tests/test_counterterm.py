import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wzphi4.counterterm import (
    CountertermTable, build_engine, compute_C1, counterterm_table, fit_divergence, ladder_grids,
    periodicity_defect, sample_phases, tables_to_csv,
)


@pytest.fixture(scope="module")
def eng():
    return build_engine(1, 64, 1 / 256, 1 / 16, 1 / 16)


@pytest.fixture(scope="module")
def table(eng):
    return counterterm_table(eng)


def test_C1_routes_agree(eng):
    ph = sample_phases(eng.M)
    a = compute_C1(eng, ph, route="weights")
    b = compute_C1(eng, ph, route="diagonal")
    assert np.allclose(a, b, rtol=1e-6)
    for p in ph[:3]:
        n = eng.target(int(p))
        assert eng.covariance(n, n, (0,)) == pytest.approx(eng.c1(int(p)), rel=1e-6)


def test_C1_from_real_space_kernel(eng):
    # sum of K_{eps,theta}(z, .)^2 over the lattice, at four base points y
    g = eng.grid
    n = eng.target(0)
    f = eng.wz_kernel_field(n)
    vals = [(np.roll(f, y, axis=1) ** 2).sum() * g.dt * g.dx for y in (0, 5, 17, 40)]
    assert np.allclose(vals, eng.c1(0), rtol=1e-8)


def test_C1_periodic(eng):
    assert periodicity_defect(eng, 0) < 1e-8
    assert periodicity_defect(eng, 5) < 1e-8


def test_c_positive(table):
    assert np.all(table.C1 > 0)
    assert np.all(table.c > 0)
    assert np.allclose(table.c, 3 * table.C1 - 9 * table.C2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1))
def test_interpolation_periodic(table, t):
    th = table.theta
    assert table.c_at(t) == pytest.approx(table.c_at(t + th), rel=1e-12)
    lo, hi = table.c.min(), table.c.max()
    assert lo - 1e-12 <= table.c_at(t) <= hi + 1e-12


def test_interpolation_nodes(table):
    assert np.allclose(table.c_at(table.t), table.c)


def test_csv(table):
    text = tables_to_csv([table])
    lines = text.strip().splitlines()
    assert lines[0] == "epsilon,theta,t,C1,C2,c"
    assert len(lines) == 1 + len(table.t)
    assert CountertermTable.zero(0.1, 0.1).c_at(0.3) == 0


def test_fit_exact_rates():
    eps = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
    c1 = [3.0 / e for e in eps]
    c2 = [0.2 * np.log(1 / e) + 1 for e in eps]
    fit = fit_divergence(eps, c1, c2)
    assert fit["c1_slope"] == pytest.approx(-1.0)
    assert fit["c2_log_coeff"] == pytest.approx(0.2)
    assert fit["c2_increment_spread"] < 1e-10
    with pytest.raises(ValueError):
        fit_divergence(eps[:2], c1[:2])


def test_ladder_grids():
    assert ladder_grids(3, [1 / 4, 1 / 8]) == [(16, 1 / 64), (32, 1 / 256)]
    assert ladder_grids(1, [1 / 4], n_fixed=256) == [(256, 1 / 64)]
