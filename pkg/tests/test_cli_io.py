import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from wzphi4 import io
from wzphi4.cli import main
from wzphi4.config import ConfigError, coerce, parse_number, read_kv, resolve


@given(st.integers(-1000, 1000), st.integers(1, 1000))
def test_parse_fraction(p, q):
    assert parse_number(f"{p}/{q}") == float(Fraction(p, q))


def test_read_kv_and_resolve():
    raw = read_kv("# comment\nn = 64\ndt = 1/1024  # trailing\nflag = yes\n")
    cfg = resolve(raw, {"n": (int, 1), "dt": (float, 1.0), "flag": (bool, False), "x": ("floats", [1.0])})
    assert cfg == {"n": 64, "dt": 1 / 1024, "flag": True, "x": [1.0]}
    with pytest.raises(ConfigError) as exc:
        resolve({"bogus": "1"}, {"n": (int, 1)})
    assert exc.value.key == "bogus"
    with pytest.raises(ConfigError):
        coerce("n", "2.5", int)
    with pytest.raises(ConfigError):
        read_kv("no equals sign")


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=4, max_side=5),
                  elements=st.floats(allow_nan=False, width=64)))
def test_field_roundtrip(tmp_path_factory, arr):
    p = tmp_path_factory.mktemp("f") / "x.bin"
    io.write_field(p, arr, [0.5] * arr.ndim, {"k": 1})
    back, hdr = io.read_field(p)
    assert np.array_equal(back, arr) and hdr["meta"] == {"k": 1}
    assert hdr["spacings"] == [0.5] * arr.ndim


def test_field_bad_magic(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"notafield" * 4)
    with pytest.raises(ValueError):
        io.read_field(p)


def test_json_deterministic_and_finite():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), float("inf")], "c": (1, 2)}
    text = io.dumps_json(obj)
    assert text == io.dumps_json(dict(reversed(list(obj.items()))))
    data = json.loads(text)
    assert data["a"] == [2, "inf"] and data["format"] == io.JSON_FORMAT


def run_cli(tmp_path, name, *args):
    out = tmp_path / name
    code = main(list(args) + ["--out", str(out), "--jobs", "1"])
    return code, out


def _replay(tmp_path, *args):
    c1, a = run_cli(tmp_path, "a", *args)
    c2, b = run_cli(tmp_path, "b", *args)
    assert c1 == c2 == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    return a


def test_algebra_check_replay(tmp_path):
    out = _replay(tmp_path, "algebra-check")
    rep = json.loads((out / "algebra.json").read_text())
    assert rep["all_pass"] and rep["config"]["alpha"] == "-51/20"


def test_gen_noise_replay(tmp_path):
    out = _replay(tmp_path, "gen-noise", "--n", "64", "--dt", "1/256", "--steps", "64",
                  "--epsilon", "1/16", "--theta", "1/16")
    vals, hdr = io.read_field(out / "noise.bin")
    assert vals.shape == (64, 64) and hdr["meta"]["stage"] == "wz"


def test_counterterms_replay_and_jobs(tmp_path):
    args = ["counterterms", "--d", "1", "--eps0", "1/8", "--ladder", "3", "--c2", "false", "--emit-plot-data"]
    a = _replay(tmp_path, *args)
    out = tmp_path / "jobs2"
    assert main(args + ["--out", str(out), "--jobs", "2"]) == 0
    assert (out / "counterterms.json").read_bytes() == (a / "counterterms.json").read_bytes()
    assert (a / "C1.dat").exists()


def test_simulate_replay(tmp_path):
    out = _replay(tmp_path, "simulate", "--n", "64", "--dt", "1/1024", "--t_final", "1/32",
                  "--theta", "1/256", "--epsilon", "1/16")
    assert json.loads((out / "simulate.json").read_text())["blown_up"] is False


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("n = 64\ndt = 1/256\nsteps = 32\nepsilon = 1/16\ntheta = 1/16\nstage = white\n")
    code, out = run_cli(tmp_path, "o", "gen-noise", "--config", str(cfg), "--seed", "3")
    assert code == 0
    rep = json.loads((out / "noise.json").read_text())
    assert rep["config"]["seed"] == 3 and rep["config"]["stage"] == "white"


@pytest.mark.parametrize("args,key", [
    (["gen-noise", "--bogus", "1"], "bogus"),
    (["gen-noise", "--epsilon", "1/4", "--theta", "1/256"], "epsilon"),
    (["gen-noise", "--theta", "1.5/4096"], "theta"),
    (["simulate", "--scheme", "euler"], "scheme"),
    (["lift-probe", "--tree", "foo"], "tree"),
    (["converge", "--experiment", "nope", "--n_mc", "1"], "experiment"),
])
def test_config_errors_exit_1(tmp_path, capsys, args, key):
    code, _ = run_cli(tmp_path, "e", *args)
    assert code == 1
    assert key in capsys.readouterr().err


def test_blow_up_exit_2(tmp_path):
    code, _ = run_cli(tmp_path, "x", "simulate", "--n", "64", "--dt", "1/1024", "--t_final", "1/32",
                      "--cap", "1e-3")
    assert code == 2


def test_unstable_override(tmp_path):
    with pytest.warns(UserWarning):
        code, _ = run_cli(tmp_path, "u", "gen-noise", "--n", "64", "--dt", "1/256", "--steps", "64",
                          "--epsilon", "1/4", "--theta", "1/256", "--allow-unstable")
    assert code == 0
