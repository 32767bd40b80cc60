"""Command-line experiment driver.

Subcommands: analyze (closed-form tables), simulate (seeded growth runs),
compare (join empirical against analytic), sweep (exponent versus bias).
Exit codes: 0 ok, 2 phase refusal, 3 unwritable output, 4 missing inputs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, constants
from .analytic import (
    Phase,
    build_model,
    choice_density,
    classify_phase,
    critical_alpha,
    degree_cdf,
    psi_curve,
    saddle_point_tail_mass,
    tail_exponent,
    tail_mass_curve,
)
from .config import ExperimentConfig, parse_config
from .errors import PhaseError, PrefChoiceError, RangeError, ShapeError
from .growth import run
from .output import fmt, read_json, read_table, write_json, write_table
from .stats import (
    condensation_diagnostic,
    default_fit_k_max,
    degree_ccdf,
    fit_power_law,
    local_degree_grid,
    psi_empirical,
)

EXIT_OK = 0
EXIT_PHASE = 2
EXIT_IO = 3
EXIT_MISSING = 4


def _meta(config: ExperimentConfig, seed=None) -> dict:
    return {
        "config_hash": config.config_hash(),
        "seed": config.seed if seed is None else seed,
        "version": __version__,
        "rng": constants.RNG_NAME,
    }


def _ensure_outdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise SystemExit(
            _fail(EXIT_IO, f"output directory {path} is not writable: {exc}"))


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _mu_k_grid(max_k: int = 100_000, points: int = 61) -> list[int]:
    ks = np.unique(np.geomspace(1, max_k, points).astype(np.int64))
    return [int(k) for k in ks]


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(config: ExperimentConfig, out: Path) -> int:
    _ensure_outdir(out)
    meta = _meta(config)
    model = build_model(config.choice, config.alpha)
    phase = model.phase

    xs = np.linspace(0.0, 1.0, config.x_grid)
    write_table(out / "f_curve.csv", meta, ["x", "f"],
                zip(xs, choice_density(model, xs)))

    tau = None
    if phase is not Phase.CONDENSATION:
        tau = tail_exponent(config.choice, config.alpha)
    write_json(out / "phase.json", {
        **{k: str(v) for k, v in meta.items()},
        "alpha": config.alpha,
        "alpha_c": model.alpha_c,
        "f_max": model.f_max,
        "maximizers": list(model.maximizers),
        "phase": phase.value,
        "tau": tau,
    })

    if phase is Phase.CONDENSATION:
        write_json(out / "error.json", {
            "error": "PhaseError",
            "message": "alpha below alpha_c: psi and kernel outputs refused",
            "alpha": config.alpha,
            "alpha_c": model.alpha_c,
        })
        return _fail(EXIT_PHASE,
                     f"alpha={config.alpha} is below alpha_c={model.alpha_c:.6g}; "
                     "condensation phase has no unique weight profile")

    write_table(out / "psi_curve.csv", meta, ["x", "psi"],
                zip(xs, psi_curve(model, xs)))

    if phase is Phase.NO_CONDENSATION:
        centers = (np.arange(config.bins) + 0.5) / config.bins
        rows = []
        for x in centers:
            for k in config.k_list:
                rows.append((x, k, degree_cdf(model, int(k), float(x))))
        write_table(out / "kernel_grid.csv", meta, ["x", "k", "mu_cdf"], rows)

        ks = _mu_k_grid()
        masses = tail_mass_curve(model, ks)
        try:
            saddle = [saddle_point_tail_mass(model, k) if k + config.alpha > 1.0
                      else None for k in ks]
        except ShapeError:
            saddle = [None] * len(ks)
        write_table(out / "mu_k.csv", meta, ["k", "mu_k", "saddle"],
                    zip(ks, masses, saddle))
    else:
        # critical phase: kernel and tail-mass formulas need alpha > alpha_c
        write_json(out / "error.json", {
            "error": "PhaseError",
            "message": "critical phase: kernel grid and tail mass refused",
            "alpha": config.alpha,
            "alpha_c": model.alpha_c,
        })
        return _fail(EXIT_PHASE, "critical phase: kernel outputs refused")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_replica(config: ExperimentConfig, index: int, seed: int,
                      out: Path) -> dict:
    t0 = time.perf_counter()
    params = config.model_params(seed=seed)
    snaps = run(params, list(config.schedule))
    t_run = time.perf_counter() - t0

    rep_dir = out / f"replica_{index:02d}"
    rep_dir.mkdir(parents=True, exist_ok=True)
    meta = _meta(config, seed=seed)

    xs = np.linspace(0.0, 1.0, config.x_grid)
    psi_rows = []
    ccdf_rows = []
    grid_rows = []
    for snap in snaps:
        for x, value in zip(xs, psi_empirical(snap, xs)):
            psi_rows.append((snap.n, x, value))
        ks, fractions, counts = degree_ccdf(snap)
        for k, mu_hat, count in zip(ks, fractions, counts):
            ccdf_rows.append((snap.n, int(k), float(mu_hat), int(count)))
        grid = local_degree_grid(snap, config.bins, config.k_list)
        for b in range(config.bins):
            for j, k in enumerate(grid.k_list):
                frac = grid.fractions[b, j]
                grid_rows.append((
                    snap.n, b, float(grid.centers[b]), k,
                    None if math.isnan(frac) else float(frac),
                    int(grid.counts[b]),
                ))
    write_table(rep_dir / "psi_empirical.csv", meta, ["step", "x", "psi"], psi_rows)
    write_table(rep_dir / "degree_ccdf.csv", meta,
                ["step", "k", "mu_hat", "count"], ccdf_rows)
    write_table(rep_dir / "local_grid.csv", meta,
                ["step", "bin", "x_center", "k", "fraction", "count"], grid_rows)

    diag = condensation_diagnostic(snaps)
    write_table(rep_dir / "diagnostics.csv", meta,
                ["step", "vertices", "max_degree", "max_degree_fraction"],
                [(s.n, s.vertex_count, s.max_degree, float(d))
                 for s, d in zip(snaps, diag)])

    info = {
        "replica": index,
        "seed": seed,
        "rng": constants.RNG_NAME,
        "config_hash": config.config_hash(),
        "version": __version__,
        "steps": config.steps,
        "final_vertex_count": config.steps + config.n0,
        "run_seconds": t_run,
        "constants": constants.as_dict(),
    }
    write_json(rep_dir / "metadata.json", info)
    return info


def cmd_simulate(config: ExperimentConfig, out: Path) -> int:
    _ensure_outdir(out)
    seeds = config.replica_seeds()
    jobs = [(config, i, seed, out) for i, seed in enumerate(seeds)]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            list(pool.map(_simulate_replica_star, jobs))
    else:
        for job in jobs:
            _simulate_replica(*job)
    return EXIT_OK


def _simulate_replica_star(job):
    return _simulate_replica(*job)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(path)
    return path


def cmd_compare(config: ExperimentConfig, out: Path) -> int:
    _ensure_outdir(out)
    try:
        kernel_path = _require(out / "kernel_grid.csv")
        grid_path = _require(out / "replica_00" / "local_grid.csv")
        ccdf_path = _require(out / "replica_00" / "degree_ccdf.csv")
        phase_path = _require(out / "phase.json")
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING, f"missing input: {exc.args[0]} "
                                   "(run analyze and simulate first)")

    expected_hash = config.config_hash()
    tables = {}
    for name, path in (("kernel", kernel_path), ("grid", grid_path),
                       ("ccdf", ccdf_path)):
        meta, columns, rows = read_table(path)
        if meta.get("config_hash") != expected_hash:
            return _fail(EXIT_MISSING,
                         f"config hash mismatch in {path}: "
                         f"{meta.get('config_hash')} != {expected_hash}")
        tables[name] = (columns, rows)
    phase_doc = read_json(phase_path)
    if phase_doc.get("config_hash") != expected_hash:
        return _fail(EXIT_MISSING, f"config hash mismatch in {phase_path}")

    meta = _meta(config)

    # join the analytic kernel grid with the last-step empirical grid
    kern_cols, kern_rows = tables["kernel"]
    analytic = {}
    for row in kern_rows:
        rec = dict(zip(kern_cols, row))
        analytic[(rec["x"], rec["k"])] = float(rec["mu_cdf"])

    grid_cols, grid_rows = tables["grid"]
    records = [dict(zip(grid_cols, row)) for row in grid_rows]
    last_step = max(int(rec["step"]) for rec in records)
    compare_rows = []
    for rec in records:
        if int(rec["step"]) != last_step:
            continue
        key = (rec["x_center"], rec["k"])
        if key not in analytic:
            continue
        theory = analytic[key]
        count = int(rec["count"])
        if rec["fraction"] == "" or count == 0:
            empirical = abs_err = se = None
        else:
            empirical = float(rec["fraction"])
            abs_err = abs(empirical - theory)
            se = math.sqrt(max(empirical * (1.0 - empirical), 0.0) / count)
        compare_rows.append((float(rec["x_center"]), int(rec["k"]),
                             empirical, theory, abs_err, se))
    write_table(out / "compare_grid.csv", meta,
                ["x", "k", "empirical", "analytic", "abs_error", "binomial_se"],
                compare_rows)

    # fit the final-snapshot tail and set it against the analytic exponent
    ccdf_cols, ccdf_rows = tables["ccdf"]
    recs = [dict(zip(ccdf_cols, row)) for row in ccdf_rows]
    last_step = max(int(rec["step"]) for rec in recs)
    ks = np.array([int(rec["k"]) for rec in recs if int(rec["step"]) == last_step])
    mu_hat = np.array([float(rec["mu_hat"]) for rec in recs
                       if int(rec["step"]) == last_step])
    counts = np.array([int(rec["count"]) for rec in recs
                       if int(rec["step"]) == last_step])
    k_max = config.k_max_fit or default_fit_k_max(ks, counts)
    try:
        fit = fit_power_law(ks, mu_hat, config.alpha,
                            k_min=config.k_min_fit, k_max=k_max)
    except RangeError as exc:
        return _fail(EXIT_MISSING, f"tail fit impossible: {exc}")
    tau_analytic = tail_exponent(config.choice, config.alpha)
    write_json(out / "fit.json", {
        **{k: str(v) for k, v in meta.items()},
        "tau_hat": fit.tau_hat,
        "tau_analytic": tau_analytic,
        "difference": fit.tau_hat - tau_analytic,
        "amplitude": fit.amplitude,
        "residual_rms": fit.residual_rms,
        "k_min": fit.k_min,
        "k_max": fit.k_max,
        "n_points": fit.n_points,
        "fit_step": last_step,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_point(config: ExperimentConfig, alpha: float, seed: int):
    """Simulate one bias value in memory and fit its tail exponent."""
    point = config.with_overrides(alpha=alpha, seed=seed)
    alpha_c, _ = critical_alpha(point.choice)
    if classify_phase(point.choice, alpha, alpha_c=alpha_c) is not Phase.NO_CONDENSATION:
        raise PhaseError(f"alpha={alpha} not above alpha_c={alpha_c:.6g}")
    snaps = run(point.model_params(), [point.steps])
    ks, mu_hat, counts = degree_ccdf(snaps[-1])
    k_max = point.k_max_fit or default_fit_k_max(ks, counts)
    fit = fit_power_law(ks, mu_hat, alpha, k_min=point.k_min_fit, k_max=k_max)
    return fit.tau_hat, (2.0 + alpha) / (2.0 + alpha_c)


def _sweep_point_star(job):
    config, alpha, seed = job
    try:
        tau_hat, tau_analytic = _sweep_point(config, alpha, seed)
        return alpha, tau_hat, tau_analytic, None
    except PrefChoiceError as exc:
        return alpha, None, None, str(exc)


def cmd_sweep(config: ExperimentConfig, out: Path) -> int:
    _ensure_outdir(out)
    meta = _meta(config)
    from .config import splitmix64_stream
    seeds = splitmix64_stream(config.seed, max(len(config.alphas), 1))
    jobs = [(config, alpha, seed) for alpha, seed in zip(config.alphas, seeds)]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_sweep_point_star, jobs))
    else:
        results = [_sweep_point_star(job) for job in jobs]
    rows = [(alpha, tau_hat, tau_analytic)
            for alpha, tau_hat, tau_analytic, _err in results]
    write_table(out / "exponent_sweep.csv", meta,
                ["alpha", "tau_hat", "tau_analytic"], rows)
    errors = {fmt(alpha): err for alpha, _, _, err in results if err}
    if errors:
        write_json(out / "sweep_errors.json", errors)
        print(f"sweep: {len(errors)} of {len(jobs)} points failed "
              f"(see sweep_errors.json)", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefchoice",
        description="Preferential attachment with location-based choice: "
                    "analytics, simulation, comparison, exponent sweeps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("analyze", "closed-form curves, phase report, kernel tables"),
        ("simulate", "seeded growth runs with snapshot measurements"),
        ("compare", "join simulate output against analyze output"),
        ("sweep", "fit the tail exponent across the configured alphas"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", required=True, help="experiment file")
        cmd.add_argument("--out", help="output directory (default from config)")
        cmd.add_argument("--seed", type=int, help="override the base seed")
        cmd.add_argument("--replicas", type=int, help="override replica count")
        cmd.add_argument("--threads", type=int,
                         help="worker processes (default PREFCHOICE_THREADS or 1)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = parse_config(args.config)
    except PrefChoiceError as exc:
        return _fail(1, str(exc))
    threads = args.threads
    if threads is None:
        env = os.environ.get("PREFCHOICE_THREADS")
        threads = int(env) if env else None
    try:
        config = config.with_overrides(seed=args.seed, replicas=args.replicas,
                                       out=args.out, threads=threads)
    except PrefChoiceError as exc:
        return _fail(1, str(exc))
    out = Path(config.out)
    handler = {
        "analyze": cmd_analyze,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "sweep": cmd_sweep,
    }[args.command]
    try:
        return handler(config, out)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 1
    except PhaseError as exc:
        return _fail(EXIT_PHASE, str(exc))
    except PrefChoiceError as exc:
        return _fail(1, str(exc))


if __name__ == "__main__":
    sys.exit(main())
