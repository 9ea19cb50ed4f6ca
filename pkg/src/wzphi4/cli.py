"""Command-line front end: wzphi4 <command> [--config FILE] [--key value ...]."""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, NumericalFailure, read_kv, resolve

COMMANDS = ("algebra-check", "build-kernels", "gen-noise", "counterterms", "lift-probe", "simulate", "converge")

_GRID = {"d": (int, 3), "n": (int, 32), "dt": (float, 1.0 / 512)}
SCHEMAS = {
    "algebra-check": {"d": (int, 3), "alpha": (str, "-51/20")},
    "build-kernels": {**_GRID, "r": (int, 3), "n_images": (int, 6), "n_dyadic": (int, 3),
                      "support_radius": (float, 1.0), "annihilate": (bool, False), "bounds": (bool, False),
                      "seed": (int, 0)},
    "gen-noise": {"d": (int, 1), "n": (int, 256), "dt": (float, 1.0 / 4096), "steps": (int, 1024),
                  "epsilon": (float, 1.0 / 16), "theta": (float, 1.0 / 256), "c0": (float, 1.0),
                  "stage": (str, "wz"), "spatial_only": (bool, False), "seed": (int, 0)},
    "counterterms": {"d": (int, 3), "ladder": (int, 3), "eps0": (float, 0.25), "n": (int, 0),
                     "theta_rule": (str, "eps"), "samples": (int, 8), "c2": (bool, True), "c0": (float, 1.0)},
    "lift-probe": {"d": (int, 3), "n": (int, 32), "dt": (float, 1.0 / 256), "epsilon": (float, 1.0 / 8),
                   "theta": (float, 1.0 / 64), "c0": (float, 1.0), "tree": (str, "Psi"),
                   "stage": (str, "renormalised"), "lambdas": ("floats", [0.25, 0.5, 1.0]),
                   "n_mc": (int, 16), "nt": (int, 1024), "n_base": (int, 8), "seed": (int, 0)},
    "converge": {"experiment": (str, "noise"), "d": (int, 1), "n": (int, 256), "dt": (float, 1.0 / 4096),
                 "steps": (int, 1024), "eps": ("floats", [1 / 8, 1 / 16, 1 / 32]), "theta_rule": (str, "eps2"),
                 "n_mc": (int, 16), "alpha": (float, -2.0), "scales": ("floats", []), "seed": (int, 0),
                 "seeds": (int, 8), "t_final": (float, 0.1), "ic": (str, "sin"), "c0": (float, 1.0),
                 "cap": (float, 1e6), "scheme": (str, "rk4"), "dealias": (str, "auto")},
}


def _theta(rule: str, eps: float) -> float:
    if rule == "eps":
        return eps
    if rule == "eps2":
        return eps * eps
    raise ConfigError("theta_rule", "must be eps or eps2")


def _check_ratio(eps: float, theta: float, c0: float, allow: bool, key: str = "epsilon") -> None:
    if eps * eps > c0 * theta * (1 + 1e-12) and not allow:
        raise ConfigError(key, f"epsilon^2 = {eps * eps} > c0*theta = {c0 * theta} (use --allow-unstable)")


def _grid(cfg):
    from .grid import Grid

    try:
        return Grid(cfg["d"], cfg["n"], cfg["dt"])
    except ValueError as exc:
        key = str(exc).split("=")[0]
        raise ConfigError(key if key in cfg else "n", str(exc)) from None


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# -- commands -----------------------------------------------------------------


def cmd_algebra_check(cfg, out: Path, opts) -> int:
    from fractions import Fraction

    from .symbolic import (
        Structure, check_integration_identity, check_coproduct_identity, check_identity_antipode, lincomb_to_ascii,
        negative_sector, renorm_M, sector_F0, sector_to_json, to_ascii,
    )
    from .symbolic.renorm import integration_identity_indices
    from .symbolic.sector import H0_plus_generators

    try:
        S = Structure(alpha=Fraction(cfg["alpha"]), d=cfg["d"])
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("alpha", str(exc)) from None
    rows = []
    ok = True
    for t in sector_F0(S):
        for name, fn in (("integration", check_integration_identity), ("coproduct", check_coproduct_identity)):
            res = bool(fn(t, S))
            ok &= res
            rows.append({"identity": name, "tree": to_ascii(t), "pass": res,
                         "instances": len(integration_identity_indices(t, S)) if name == "integration" else 1})
    for t in H0_plus_generators(S):
        res = bool(check_identity_antipode(t, S))
        ok &= res
        rows.append({"identity": "antipode", "tree": to_ascii(t), "pass": res, "instances": 1})
    for r in rows:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['identity']} {r['tree']}")
    golden = {to_ascii(t): lincomb_to_ascii(renorm_M(t, S)) for t in sector_F0(S)}
    report = {"command": "algebra-check", "config": cfg, "all_pass": ok, "checks": rows, "M": golden,
              "negative_sector": [to_ascii(t) for t in negative_sector(S.alpha, S=S)]}
    io.write_json(out / "algebra.json", report)
    io.write_text(out / "sector.json", sector_to_json(sector_F0(S), S))
    return 0 if ok else 2


def cmd_build_kernels(cfg, out: Path, opts) -> int:
    from .kernel import KernelSpec, build_K, check_kernel_bounds, dyadic_decompose, table_moments

    try:
        spec = KernelSpec(cfg["d"], cfg["r"], cfg["n_images"], cfg["n_dyadic"], cfg["support_radius"])
    except ValueError as exc:
        key = str(exc).split("=")[0]
        raise ConfigError(key if key in cfg else "d", str(exc)) from None
    g = _grid(cfg)
    K = build_K(spec, g)
    mom = table_moments(K, spec)
    l1 = float(np.abs(K.values).sum() * K.dt * K.dx ** g.d)
    try:
        levels = dyadic_decompose(K, spec, annihilate_moments=cfg["annihilate"])
    except ValueError as exc:
        raise ConfigError("n_dyadic", str(exc)) from None
    sups = [float(np.abs(lv.values).max()) for lv in levels]
    report = {"command": "build-kernels", "config": cfg, "coefficients": K.meta["coeffs"],
              "max_relative_moment": max(abs(v) for v in mom.values()) / l1,
              "dyadic": [{"level": i, "sup": s, "C_d_minus_1": s / 2 ** (i * (g.d - 1)), "C_d": s / 2 ** (i * g.d)}
                         for i, s in enumerate(sups)]}
    if cfg["bounds"]:
        report["bounds"] = check_kernel_bounds(d=g.d, n=g.n, dt=g.dt, seed=cfg["seed"], spec=spec)
    io.write_field(out / "K.bin", K.values, [K.dt] + [K.dx] * g.d, {"kernel": "K", "d": g.d})
    io.write_json(out / "kernel.json", report)
    lines = ["level,sup,C_d_minus_1,C_d"] + [f"{r['level']},{r['sup']!r},{r['C_d_minus_1']!r},{r['C_d']!r}"
                                             for r in report["dyadic"]]
    io.write_text(out / "dyadic.csv", "\n".join(lines) + "\n")
    if opts.emit_plot_data:
        io.write_plot_data(out / "dyadic.dat", range(len(sups)), sups, "level sup|K_n|")
    print(f"kernel built: max relative moment {report['max_relative_moment']:.3e}")
    return 0


def cmd_gen_noise(cfg, out: Path, opts) -> int:
    from .noise import mollify, piecewise_linearize, sample_white

    g = _grid(cfg)
    if cfg["stage"] not in ("white", "mollified", "wz"):
        raise ConfigError("stage", "must be white, mollified or wz")
    _check_ratio(cfg["epsilon"], cfg["theta"], cfg["c0"], opts.allow_unstable)
    if cfg["epsilon"] < 2 * g.dx - 1e-12:
        raise ConfigError("epsilon", "must be at least two lattice spacings")
    M = round(cfg["theta"] / g.dt)
    if M < 1 or abs(M * g.dt - cfg["theta"]) > 1e-9 * cfg["theta"]:
        raise ConfigError("theta", "must be a whole multiple of dt")
    if cfg["steps"] % M:
        raise ConfigError("steps", "must be a whole number of theta-blocks")
    xi = sample_white(g, cfg["steps"], cfg["seed"])
    if cfg["stage"] != "white":
        xi = mollify(xi, cfg["epsilon"], cfg["spatial_only"])
    if cfg["stage"] == "wz":
        xi = piecewise_linearize(xi, cfg["theta"], cfg["c0"])
    io.write_field(out / "noise.bin", xi.values, [g.dt] + [g.dx] * g.d,
                   {"stage": xi.stage, "seed": cfg["seed"], "epsilon": cfg["epsilon"], "theta": cfg["theta"]})
    report = {"command": "gen-noise", "config": cfg, "mean": float(xi.values.mean()),
              "variance": float(xi.values.var())}
    io.write_json(out / "noise.json", report)
    return 0


def _ct_rung(args):
    from .counterterm import build_engine, counterterm_table

    d, n, dt, e, th, c0, samples, c2 = args
    return counterterm_table(build_engine(d, n, dt, e, th, c0), samples, c2)


def cmd_counterterms(cfg, out: Path, opts) -> int:
    from .counterterm import fit_divergence, tables_to_csv

    if cfg["d"] not in (1, 2, 3):
        raise ConfigError("d", "must be 1, 2 or 3")
    if cfg["ladder"] < 1:
        raise ConfigError("ladder", "must be >= 1")
    eps = [cfg["eps0"] / 2 ** j for j in range(cfg["ladder"])]
    tasks = []
    for e in eps:
        th = _theta(cfg["theta_rule"], e)
        _check_ratio(e, th, cfg["c0"], opts.allow_unstable, "eps0")
        n = cfg["n"] or int(round(4 / e))
        if n % 2 or n < 4:
            raise ConfigError("n", "must be even and >= 4")
        if e < 2 * 2.0 / n - 1e-12:
            raise ConfigError("n", f"lattice too coarse for epsilon={e}")
        tasks.append((cfg["d"], n, e * e / 4, e, th, np.inf if opts.allow_unstable else cfg["c0"],
                      cfg["samples"], cfg["c2"]))
    tables = _pmap(_ct_rung, tasks, opts.jobs)
    report = {"command": "counterterms", "config": cfg,
              "rungs": [{"epsilon": t.eps, "theta": t.theta, "n": tk[1], "dt": tk[2],
                         "C1_mean": float(t.C1.mean()), "C2_mean": float(t.C2.mean()),
                         "c_mean": float(t.c.mean()), "c_positive": bool(np.all(t.c > 0))}
                        for t, tk in zip(tables, tasks)]}
    if len(eps) >= 3:
        report["fit"] = fit_divergence(eps, [t.C1.mean() for t in tables],
                                       [t.C2.mean() for t in tables] if cfg["c2"] else None)
    io.write_text(out / "counterterms.csv", tables_to_csv(tables))
    io.write_json(out / "counterterms.json", report)
    if opts.emit_plot_data:
        io.write_plot_data(out / "C1.dat", eps, [t.C1.mean() for t in tables], "epsilon C1")
        io.write_plot_data(out / "C2.dat", eps, [t.C2.mean() for t in tables], "epsilon C2")
    for r in report["rungs"]:
        print(f"eps={r['epsilon']:.6g} C1={r['C1_mean']:.6g} C2={r['C2_mean']:.6g}")
    return 0


def cmd_lift_probe(cfg, out: Path, opts) -> int:
    from .counterterm import build_engine, counterterm_table
    from .modellift import LiftContext, realization_seed, scaling_probe
    from .noise import sample_white, wz_noise
    from .symbolic import Structure, parse, to_ascii

    g = _grid(cfg)
    _check_ratio(cfg["epsilon"], cfg["theta"], cfg["c0"], opts.allow_unstable)
    if cfg["stage"] not in ("canonical", "renormalised"):
        raise ConfigError("stage", "must be canonical or renormalised")
    S = Structure(d=g.d)
    try:
        tree = parse(cfg["tree"], g.d)
    except ValueError as exc:
        raise ConfigError("tree", str(exc)) from None
    try:
        eng = build_engine(g.d, g.n, g.dt, cfg["epsilon"], cfg["theta"], np.inf if opts.allow_unstable else cfg["c0"])
    except ValueError as exc:
        raise ConfigError("theta", str(exc)) from None
    table = counterterm_table(eng) if cfg["stage"] == "renormalised" else None
    M = eng.M
    nt = cfg["nt"]
    if nt % M:
        raise ConfigError("nt", "must be a whole number of theta-blocks")
    try:
        ctx = LiftContext(eng.op, nt, table, S)
    except ValueError as exc:
        raise ConfigError("nt", str(exc)) from None

    def make_noise(r):
        return wz_noise(sample_white(g, nt, realization_seed(cfg["seed"], r)), cfg["epsilon"], cfg["theta"])

    try:
        res = scaling_probe(tree, cfg["stage"], cfg["lambdas"], cfg["n_mc"], make_noise, ctx, cfg["n_base"], cfg["seed"])
    except ValueError as exc:
        key = "lambdas" if "lambda" in str(exc) else "tree"
        raise ConfigError(key, str(exc)) from None
    res["tree"] = to_ascii(res["tree"])
    report = {"command": "lift-probe", "config": cfg, **res}
    io.write_json(out / "probe.json", report)
    lines = ["tau,lambda,stage,second_moment,stderr"] + [
        f"{res['tree']},{l!r},{cfg['stage']},{m!r},{s!r}"
        for l, m, s in zip(res["lambda"], res["second_moment"], res["stderr"])]
    io.write_text(out / "probe.csv", "\n".join(lines) + "\n")
    if opts.emit_plot_data:
        io.write_plot_data(out / "probe.dat", res["lambda"], res["second_moment"], "lambda second_moment")
    print(f"{res['tree']} {cfg['stage']}: slope {res['slope']:.4f} (2*homogeneity {res['target_slope']:.4f})")
    return 0


def cmd_simulate(cfg, out: Path, opts) -> int:
    from .solver import run, validate_solver_config

    cfg = validate_solver_config(cfg, opts.allow_unstable)
    traj, report = run(cfg, allow_unstable=opts.allow_unstable)
    report = {"command": "simulate", **report}
    io.write_json(out / "simulate.json", report)
    g_sp = [2.0 / cfg["n"]] * cfg["d"]
    for i, (t, s) in enumerate(zip(traj.times, traj.snapshots)):
        io.write_field(out / f"phi_{i}.bin", s, g_sp, {"t": t, "seed": cfg["seed"]})
    if opts.emit_plot_data and traj.snapshots:
        s = traj.snapshots[-1]
        line = s.reshape(s.shape[0], -1)[:, 0] if s.ndim > 1 else s
        io.write_plot_data(out / "phi_line.dat", (np.arange(cfg["n"]) - cfg["n"] // 2) * 2.0 / cfg["n"],
                           np.roll(line, cfg["n"] // 2), "x phi")
    if traj.blown_up:
        print(f"blow-up at t={traj.stop_time}", file=sys.stderr)
        return 2
    return 0


def cmd_converge(cfg, out: Path, opts) -> int:
    from .analysis import (
        kstar_convergence_experiment, ladder_csv, noise_convergence_experiment,
        solution_convergence_experiment,
    )

    g = _grid(cfg)
    ladder = [(e, _theta(cfg["theta_rule"], e)) for e in cfg["eps"]]
    for e, th in ladder:
        _check_ratio(e, th, cfg["c0"], opts.allow_unstable, "eps")
        if e < 2 * g.dx - 1e-12:
            raise ConfigError("eps", f"epsilon={e} below two lattice spacings")
        M = round(th / g.dt)
        if M < 1 or abs(M * g.dt - th) > 1e-9 * th:
            raise ConfigError("dt", f"theta={th} is not a multiple of dt")
    exp = cfg["experiment"]
    scales = cfg["scales"] or None
    try:
        if exp == "noise":
            rep = noise_convergence_experiment(ladder, cfg["n_mc"], g, cfg["steps"], cfg["alpha"], scales, cfg["seed"])
        elif exp == "kstar":
            rep = kstar_convergence_experiment(ladder, cfg["n_mc"], g, cfg["steps"], cfg["alpha"], scales,
                                               seed=cfg["seed"])
        elif exp == "solution":
            base = {k: cfg[k] for k in ("d", "n", "dt", "t_final", "ic", "c0", "cap", "scheme", "dealias")}
            rep = solution_convergence_experiment(base, ladder, list(range(cfg["seed"], cfg["seed"] + cfg["seeds"])))
            if all(rep[f"renorm_{m}"]["n_used"] == 0 for m in ("on", "off")):
                raise NumericalFailure("every trajectory blew up")
        else:
            raise ConfigError("experiment", "must be noise, kstar or solution")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("scales" if "scale" in str(exc) else "steps", str(exc)) from None
    report = {"command": "converge", "config": cfg, **rep}
    io.write_json(out / f"converge_{exp}.json", report)
    if exp in ("noise", "kstar"):
        io.write_text(out / f"converge_{exp}.csv", ladder_csv(rep["ladder"], rep["mean"], rep["stderr"]))
        if opts.emit_plot_data:
            io.write_plot_data(out / f"converge_{exp}.dat", [p[0] for p in rep["ladder"]], rep["mean"], "epsilon mean")
    else:
        r = rep["renorm_on"].get("l2_to_finest")
        if r:
            io.write_text(out / "converge_solution.csv", ladder_csv(rep["ladder"], r["mean"], r["stderr"]))
            if opts.emit_plot_data:
                io.write_plot_data(out / "converge_solution.dat", [p[0] for p in rep["ladder"]], r["mean"],
                                   "epsilon l2_to_finest")
    return 0


HANDLERS = {
    "algebra-check": cmd_algebra_check,
    "build-kernels": cmd_build_kernels,
    "gen-noise": cmd_gen_noise,
    "counterterms": cmd_counterterms,
    "lift-probe": cmd_lift_probe,
    "simulate": cmd_simulate,
    "converge": cmd_converge,
}


def _overrides(extra: list) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(tok, "expected --key value")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(key, "missing value")
            val = extra[i + 1]
            i += 2
        out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wzphi4", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--allow-unstable", action="store_true", help="permit epsilon^2 > c0*theta")
    p.add_argument("--emit-plot-data", action="store_true", help="also write two-column .dat files")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    opts, extra = parser.parse_known_args(argv)
    try:
        raw = {}
        if opts.config:
            try:
                raw.update(read_kv(Path(opts.config).read_text()))
            except OSError as exc:
                raise ConfigError("config", str(exc)) from None
        raw.update(_overrides(extra))
        schema = SCHEMAS.get(opts.command)
        if opts.command == "simulate":
            cfg = raw
        else:
            cfg = resolve(raw, schema)
        out = Path(opts.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[opts.command](cfg, out, opts)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
