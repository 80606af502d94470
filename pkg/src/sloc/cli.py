"""Command-line experiment runner.

Subcommands: simulate, gaussian-check, constants, isoperimetry, couple,
report.  Each reads an INI config (--config), with --seed/--out overrides,
writes per-run CSVs plus a summary JSON of named checks, and a manifest.
Exit status is nonzero iff any pass/fail check failed.
"""

import argparse
import json
import os
import sys
import warnings
from math import sqrt

import numpy as np

from . import __version__
from . import constants as const_mod
from . import coupling as cp
from . import diagnostics as dg
from . import isoperimetry as iso
from .config import ConfigError, new_manifest, parse_config, run_seeds, validate_config
from .engine import Schedule, run_trajectory, write_trajectory_csv
from .measures import (
    product_exponential,
    standard_gaussian,
    uniform_body,
)
from .tilt import GaussianClosedForm, GridQuadrature, ParticleWeights
from . import bodies


def make_battery_density(name, n):
    if name == "gaussian":
        return standard_gaussian(n)
    if name == "cube":
        return uniform_body(bodies.BodySpec("cube", n, {"side": sqrt(12.0)}))
    if name == "ball":
        return uniform_body(bodies.BodySpec("ball", n, {"radius": sqrt(n + 2.0)}))
    if name == "exponential":
        return product_exponential(n)
    raise ValueError(f"unknown density {name!r}")


def make_strategy(cfg, f):
    name = cfg.strategy
    if name == "auto":
        name = "closed-form" if f.gaussian_tilt_oracle is not None else (
            "quadrature" if f.dim <= 3 else "cloud"
        )
    if name == "closed-form":
        return GaussianClosedForm()
    if name == "quadrature":
        return GridQuadrature()
    if name == "cloud":
        return ParticleWeights(n_particles=cfg.particles)
    raise ValueError(f"unknown strategy {name!r}")


def write_summary(out_dir, checks):
    """summary.json: {check name -> {value, ci, status}}; returns #failed."""
    path = os.path.join(out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(checks, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sum(1 for c in checks.values() if c.get("status") == "fail"), path


def _check(value, status, ci=None):
    return {
        "value": float(value) if np.isscalar(value) else value,
        "ci": ci,
        "status": status,
    }


# ---------------------------------------------------------------------------
# experiments


def run_simulate(cfg):
    f = make_battery_density(cfg.density, cfg.n)
    strategy = make_strategy(cfg, f)
    schedule = Schedule(dt=cfg.dt, t_max=cfg.t_max, stride=cfg.stride)
    files, final_traces = [], []
    for i, seed in enumerate(run_seeds(cfg.seed, cfg.runs)):
        traj = run_trajectory(f, schedule, strategy, seed)
        path = os.path.join(cfg.out, f"trajectory_{i:03d}.csv")
        write_trajectory_csv(traj, path)
        files.append(path)
        final_traces.append(float(np.trace(traj.records[-1].Atilde)))
    checks = {
        "companion-trace-mean": _check(
            float(np.mean(final_traces)),
            "info",
            ci=[
                float(np.mean(final_traces) - 3 * np.std(final_traces) / sqrt(len(final_traces))),
                float(np.mean(final_traces) + 3 * np.std(final_traces) / sqrt(len(final_traces))),
            ],
        )
    }
    return files, checks


def run_gaussian_check(cfg):
    f = standard_gaussian(cfg.n)
    schedule = Schedule(dt=cfg.dt, t_max=cfg.t_max, stride=cfg.stride)
    tol = cfg.tolerances.get("gaussian_rel", 0.1)
    files, devs = [], []
    for i, seed in enumerate(run_seeds(cfg.seed, cfg.runs)):
        traj = run_trajectory(f, schedule, GaussianClosedForm(), seed)
        path = os.path.join(cfg.out, f"trajectory_{i:03d}.csv")
        write_trajectory_csv(traj, path)
        files.append(path)
        for rec in traj.records:
            ref = np.exp(-rec.t)
            devs.append(
                float(np.max(np.abs(np.linalg.eigvalsh(rec.A - ref * np.eye(cfg.n))))) / ref
            )
    worst = max(devs)
    checks = {
        "covariance-exponential-decay": _check(
            worst, "pass" if worst < tol else "fail"
        )
    }
    return files, checks


def run_constants(cfg):
    files, checks = [], {}
    for name in ("gaussian", "cube", "exponential"):
        f = make_battery_density(name, cfg.n)
        rep = const_mod.constants_report(
            f, k_ladder=list(range(1, cfg.n + 1)), rng=np.random.default_rng(cfg.seed)
        )
        path = os.path.join(cfg.out, f"constants_{name}.json")
        with open(path, "w") as fh:
            json.dump(rep.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        files.append(path)
        checks[f"sqrt2-inequality-{name}"] = _check(
            rep.detail["sqrt2_ratio"],
            "pass" if rep.detail["sqrt2_pass"] else "fail",
        )
    return files, checks


def run_isoperimetry(cfg):
    f = make_battery_density(cfg.density, cfg.n)
    normal = np.zeros(cfg.n)
    normal[0] = 1.0
    offset = iso.halfspace_bisection(f, normal)
    hs = iso.halfspace(normal, offset)
    schedule = Schedule(dt=cfg.dt, t_max=cfg.t_max, stride=cfg.stride)
    strategy = make_strategy(cfg, f)
    procs = [
        iso.run_mass_process(f, hs, schedule, strategy, seed)
        for seed in run_seeds(cfg.seed, cfg.runs)
    ]
    rep = iso.variance_bound_check(procs)
    path = os.path.join(cfg.out, "mass_process.csv")
    k = len(rep["t"])
    gs = np.array([p.g[:k] for p in procs])
    with open(path, "w", newline="") as fh:
        fh.write("# sloc-csv v1\n")
        fh.write("t,mean_g,var_g,qv_rate,band_frequency\n")
        rate = rep["mean_qv_rate"]
        for j in range(k):
            fh.write(
                ",".join(
                    repr(float(v))
                    for v in (
                        rep["t"][j],
                        gs[:, j].mean(),
                        gs[:, j].var(ddof=1),
                        rate,
                        rep["band_frequency"][j],
                    )
                )
                + "\n"
            )
    checks = {
        "set-mass-variance-bound": _check(
            float(np.max(rep["mean_sq_dev"] - rep["t"])),
            "pass" if rep["variance_bound_pass"] else "fail",
        ),
        "set-mass-qv-rate": _check(
            rep["mean_qv_rate"], "pass" if rep["qv_rate_pass"] else "fail"
        ),
        "set-mass-martingale": _check(
            0.0, "pass" if rep["martingale_pass"] else "fail"
        ),
    }
    return [path], checks


def run_couple(cfg):
    cube = bodies.BodySpec("cube", cfg.n, {"side": 1.0})
    ball = bodies.BodySpec(
        "ball", cfg.n, {"radius": bodies.unit_volume_ball_radius(cfg.n)}
    )
    from .measures import exact_moments, isotropize

    f_iso, _ = isotropize(uniform_body(cube))
    g_iso, _ = isotropize(uniform_body(ball))
    h_conv = cp.sup_convolution(f_iso, g_iso)
    schedule = Schedule(dt=cfg.dt, t_max=cfg.t_max, stride=cfg.stride)
    runs = [
        cp.run_coupled(
            f_iso, g_iso, schedule, seed, n_particles=cfg.particles, h_conv=h_conv
        )
        for seed in run_seeds(cfg.seed, cfg.runs)
    ]
    files = []
    for i, r in enumerate(runs):
        path = os.path.join(cfg.out, f"coupled_{i:03d}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("# sloc-csv v1\n")
            fh.write("t,S,gap_sq,d_hs_sq,trA,trC\n")
            for rec in r.records:
                fh.write(
                    ",".join(
                        repr(float(v))
                        for v in (
                            rec.t,
                            rec.S,
                            rec.gap_sq,
                            rec.d_hs_sq,
                            np.trace(rec.A),
                            np.trace(rec.C),
                        )
                    )
                    + "\n"
                )
        files.append(path)
    dd = cp.drift_diagnostic(runs, min_runs=min(cfg.runs, 100))
    sm = cp.s_martingale_check(runs, min_runs=min(cfg.runs, 100))
    sv_bound_worst = 0.0
    for r in runs:
        for rec in r.records:
            d_mat, _ = cp.mismatch_matrix(rec.A, rec.C)
            chk = cp.singular_value_bound_check(rec.A, d_mat, rec.delta)
            sv_bound_worst = max(sv_bound_worst, chk["lhs"] - chk["rhs"])
    checks = {
        "optional-stopping-identity": _check(
            float(np.max(np.abs(dd["mean_gap_sq"] - dd["mean_int_d"]))),
            "pass" if dd["identity_pass"] else "fail",
        ),
        "coupled-covariation": _check(
            dd["covariation_rel_err"], "pass" if dd["covariation_pass"] else "fail"
        ),
        "midpoint-mass-martingale": _check(
            float(sm["mean_S"][-1]), "pass" if sm["pass"] else "fail"
        ),
        "trace-inequality-per-record": _check(
            sv_bound_worst, "pass" if sv_bound_worst <= 1e-8 else "fail"
        ),
    }
    return files, checks


def run_report(cfg):
    """Aggregate summary JSONs under the output directory into report.json."""
    merged = {}
    for root, _, names in os.walk(cfg.out):
        for name in sorted(names):
            if name == "summary.json":
                with open(os.path.join(root, name)) as fh:
                    data = json.load(fh)
                tag = os.path.relpath(root, cfg.out)
                for key, val in data.items():
                    merged[f"{tag}/{key}" if tag != "." else key] = val
    path = os.path.join(cfg.out, "report.json")
    with open(path, "w") as fh:
        json.dump(merged, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [path], merged


_EXPERIMENTS = {
    "simulate": run_simulate,
    "gaussian-check": run_gaussian_check,
    "constants": run_constants,
    "isoperimetry": run_isoperimetry,
    "couple": run_couple,
    "report": run_report,
}


def run_experiment(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    manifest = new_manifest(cfg, __version__)
    files, checks = _EXPERIMENTS[cfg.kind](cfg)
    failed, summary_path = write_summary(cfg.out, checks)
    manifest.files = [os.path.basename(p) for p in files] + ["summary.json"]
    manifest.checks_failed = failed
    import time

    manifest.finished = time.time()
    manifest.write(os.path.join(cfg.out, "manifest.json"))
    return manifest, checks


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sloc", description="localization experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "report"))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--fail-fast", action="store_true")
    args = parser.parse_args(argv)
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    else:
        text = "[experiment]\nkind = report\n"
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for fieldname, msg in exc.violations:
            print(f"config error: {fieldname}: {msg}", file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        cfg.kind = args.command
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfg.fail_fast = args.fail_fast
    violations = validate_config(cfg)
    if violations:
        for fieldname, msg in violations:
            print(f"config error: {fieldname}: {msg}", file=sys.stderr)
        return 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        manifest, checks = run_experiment(cfg)
    for name, chk in sorted(checks.items()):
        print(f"{name}: {chk.get('status', 'info')} (value={chk.get('value')})")
    return 1 if manifest.checks_failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
