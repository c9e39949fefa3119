"""Command-line interface.

Subcommands
-----------
simulate    one seeded path: trajectory CSV + path statistics JSON
estimate    apply both estimator families to a stored statistics JSON
variances   invariant-trace and limiting-variance report as JSON
montecarlo  replication study: report JSON, samples CSV, optional Q-Q SVGs
verify      run the numerical cross-check suites

The model comes either from ``--config`` (JSON or TOML file) or from
preset flags (``--preset``, ``--a``, ``--b``, ``--modes``); giving both is
an error, giving neither selects the default wave preset with a=1, b=0.2,
N=10. Run parameters on the command line override those in the config
file. All outputs are deterministic: rerunning with the same inputs
produces byte-identical files.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 verification failure. The WAVEINFER_THREADS environment variable sets
the Monte Carlo worker count (default 1).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import _svg
from .covariance import (
    asymptotic_variances,
    q_infinity_apply,
    q_infinity_quadrature_oracle,
    trace_q_infinity,
)
from .estimate import estimate_all, running_estimates
from .harness import report_to_json, run_monte_carlo, write_samples_csv
from .model import ConfigError, Model, builtin_preset, load_config, model_from_config, trace_q
from .semigroup import expm_oracle, mode_generator, mode_propagator, r_matrices
from .simulate import NumericError, PathStatistics, ito_identity_residual, simulate_path

TRAJECTORY_HEADER = "time,I_t,Y_t,H_t,a_hat_t,b_hat_t,a_tilde_t,b_tilde_t"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waveinfer",
        description="Simulation and parameter estimation for damped "
                    "second-order stochastic systems.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="model/run config file (.json or .toml)")
    common.add_argument("--preset", choices=("wave", "plate"), default=None,
                        help="built-in spectrum preset (default: wave when no --config)")
    common.add_argument("--a", type=float, default=None,
                        help="damping coefficient (preset source, default 1.0)")
    common.add_argument("--b", type=float, default=None,
                        help="stiffness multiplier (preset source, default 0.2)")
    common.add_argument("--modes", type=int, default=None,
                        help="number of modes (preset source, default 10)")
    common.add_argument("--T", type=float, default=None, dest="T",
                        help="time horizon (default 100)")
    common.add_argument("--dt", type=float, default=None, help="step size (default 0.001)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--scheme", choices=("euler", "exact"), default=None,
                        help="stepping scheme (default euler)")
    common.add_argument("--out", type=Path, default=Path("."),
                        help="output directory (default: current directory)")
    common.add_argument("--plots", action="store_true", help="emit SVG plots")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common],
                   help="simulate one path and write its trajectory and statistics")
    p_est = sub.add_parser("estimate", parents=[common],
                           help="estimate parameters from stored path statistics")
    p_est.add_argument("stats_json", type=Path,
                       help="path statistics JSON written by the simulate subcommand")
    sub.add_parser("variances", parents=[common],
                   help="print invariant trace and limiting variances as JSON")
    p_mc = sub.add_parser("montecarlo", parents=[common],
                          help="run a replication study")
    p_mc.add_argument("--reps", type=int, default=100,
                      help="number of replications (default 100)")
    sub.add_parser("verify", parents=[common], help="run the numerical cross-check suites")
    return parser


def _resolve_model(args) -> tuple[Model, dict]:
    """Model plus run parameters with CLI flags layered on top."""
    if args.config is not None and args.preset is not None:
        raise ConfigError("give exactly one model source: --config or --preset")
    preset_flags = {k: getattr(args, k) for k in ("a", "b", "modes")}
    if args.config is not None:
        if any(v is not None for v in preset_flags.values()):
            raise ConfigError("--a/--b/--modes apply to preset models, not --config")
        model, run = model_from_config(load_config(args.config))
    else:
        kind = args.preset or "wave"
        model = builtin_preset(
            kind,
            args.modes if args.modes is not None else 10,
            args.a if args.a is not None else 1.0,
            args.b if args.b is not None else 0.2,
        )
        run = {}
    if args.T is not None:
        run["T"] = args.T
    if args.dt is not None:
        run["dt"] = args.dt
    if args.seed is not None:
        run["seed"] = args.seed
    if args.scheme is not None:
        run["scheme"] = args.scheme
    run.setdefault("T", 100.0)
    run.setdefault("dt", 1e-3)
    run.setdefault("seed", 0)
    run.setdefault("scheme", "euler")
    if not isinstance(run["seed"], int) or isinstance(run["seed"], bool) or run["seed"] < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {run['seed']!r}")
    return model, run


def _fmt(v) -> str:
    if v is None:
        return "NA"
    v = float(v)
    if math.isnan(v):
        return "NA"
    return repr(v)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _trajectory_rows(stats: PathStatistics, model: Model) -> list[str]:
    series = running_estimates(stats.trajectory, trace_q(model),
                               known_a=model.a, known_b=model.b)
    rows = [TRAJECTORY_HEADER]
    for t, est in series:
        rows.append(",".join([
            repr(float(t)),
            _fmt(est.i_t), _fmt(est.y_t), _fmt(est.h_t),
            _fmt(est.a_hat), _fmt(est.b_hat), _fmt(est.a_tilde), _fmt(est.b_tilde),
        ]))
    return rows


def cmd_simulate(args) -> int:
    model, run = _resolve_model(args)
    stats = simulate_path(
        model, scheme=run["scheme"], dt=run["dt"], T=run["T"], seed=run["seed"],
        record_trajectory=True,
    )
    out: Path = args.out
    rows = _trajectory_rows(stats, model)
    _write_text(out / "trajectory.csv", "\n".join(rows) + "\n")
    _write_text(out / "path_stats.json",
                json.dumps(stats.to_json_dict(), indent=2, sort_keys=True) + "\n")
    if args.plots:
        series = running_estimates(stats.trajectory, trace_q(model),
                                   known_a=model.a, known_b=model.b)
        ts = [t for t, _ in series]
        _write_text(out / "trajectory_functionals.svg", _svg.line_chart(
            [("I_t", ts, [e.i_t if e.i_t is not None else math.nan for _, e in series]),
             ("Y_t", ts, [e.y_t if e.y_t is not None else math.nan for _, e in series]),
             ("H_t", ts, [e.h_t if e.h_t is not None else math.nan for _, e in series])],
            "Running path functionals", "t", "time average"))
        def col(name):
            return [getattr(e, name) if getattr(e, name) is not None else math.nan
                    for _, e in series]
        _write_text(out / "trajectory_estimates.svg", _svg.line_chart(
            [("a_hat", ts, col("a_hat")), ("b_hat", ts, col("b_hat")),
             ("a_tilde", ts, col("a_tilde")), ("b_tilde", ts, col("b_tilde"))],
            "Running estimates", "t", "estimate"))
    print(f"wrote {out / 'trajectory.csv'} ({len(rows) - 1} rows) and "
          f"{out / 'path_stats.json'}")
    print(f"I_T={stats.i_t:.6f} Y_T={stats.y_t:.6f} H_T={stats.h_t:.6f}")
    return 0


def cmd_estimate(args) -> int:
    model, _ = _resolve_model(args)
    try:
        payload = json.loads(args.stats_json.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {args.stats_json}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed statistics JSON: {exc}") from exc
    try:
        stats = PathStatistics.from_json_dict(payload)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid statistics JSON: {exc}") from exc
    est = estimate_all(stats.i_t, stats.y_t, stats.h_t, trace_q(model),
                       known_a=model.a, known_b=model.b)
    out = {
        "a_hat": est.a_hat, "b_hat": est.b_hat,
        "a_tilde": est.a_tilde, "b_tilde": est.b_tilde,
        "reasons": est.reasons,
        "inputs": {"I_T": stats.i_t, "Y_T": stats.y_t, "H_T": stats.h_t,
                   "TrQ": est.tr_q, "known_a": est.known_a, "known_b": est.known_b},
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_variances(args) -> int:
    model, _ = _resolve_model(args)
    tr = trace_q_infinity(model)
    out = {
        "trace_q": trace_q(model),
        "trace_q_infinity": tr.total,
        "split": {"position": tr.position_part, "velocity": tr.velocity_part},
    }
    try:
        vs = asymptotic_variances(model)
        out["asymptotic_variances"] = {
            "a_hat": vs.var_a_hat, "b_hat": vs.var_b_hat,
            "a_tilde": vs.var_a_tilde, "b_tilde": vs.var_b_tilde,
        }
    except ValueError as exc:
        out["asymptotic_variances"] = None
        out["note"] = str(exc)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _workers_from_env() -> int:
    raw = os.environ.get("WAVEINFER_THREADS")
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError as exc:
        raise ConfigError(f"WAVEINFER_THREADS must be an integer, got {raw!r}") from exc
    if workers < 1:
        raise ConfigError(f"WAVEINFER_THREADS must be >= 1, got {workers}")
    return workers


def cmd_montecarlo(args) -> int:
    model, run = _resolve_model(args)
    report = run_monte_carlo(
        model, T=run["T"], dt=run["dt"], scheme=run["scheme"],
        M=args.reps, master_seed=run["seed"], workers=_workers_from_env(),
    )
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "mc_report.json", report_to_json(report) + "\n")
    write_samples_csv(report.samples, out / "samples.csv")
    if args.plots:
        from statistics import NormalDist
        nd = NormalDist()
        for name in ("a_hat", "b_hat", "a_tilde", "b_tilde"):
            vals = sorted(getattr(s, name) for s in report.samples
                          if getattr(s, name) is not None)
            n = len(vals)
            if n < 3:
                continue
            mu = sum(vals) / n
            sd = math.sqrt(sum((v - mu) ** 2 for v in vals) / (n - 1))
            theo = [mu + sd * nd.inv_cdf((i - 0.375) / (n + 0.25))
                    for i in range(1, n + 1)]
            _write_text(out / f"qq_{name}.svg", _svg.scatter_chart(
                theo, vals, f"Q-Q plot: {name}", "normal quantile", "sample quantile"))
    print(f"wrote {out / 'mc_report.json'} and {out / 'samples.csv'}")
    for name in ("a_hat", "b_hat", "a_tilde", "b_tilde"):
        m = report.mean[name]
        v = report.variance_scaled[name]
        p = report.normality[name]["p"] if report.normality[name] else None
        print(f"{name}: mean={_fmt(m)} variance_scaled={_fmt(v)} sw_p={_fmt(p)} "
              f"excluded={report.excluded[name]}")
    return 0


def _verify_semigroup() -> tuple[bool, str]:
    """Closed-form propagator vs the series matrix exponential."""
    worst = 0.0
    count = 0
    for a in (0.3, 1.0, 3.0):
        for b in (0.2, 1.0, 5.0):
            crit = a * a / b
            for factor in (0.25, 0.5, 1.0 - 1e-9, 1.0, 1.0 + 1e-9, 2.0, 4.0, 25.0):
                kappa = crit * factor
                gen = mode_generator(a, b, kappa)
                bound = max(1.0, b * kappa + 2.0 * a)
                for tau in (0.0, 2e-4, 0.02, 0.2, 1.0):
                    t = tau * min(5.0, 50.0 / bound)
                    diff = np.abs(mode_propagator(a, b, kappa, t) - expm_oracle(gen, t)).max()
                    worst = max(worst, float(diff))
                    count += 1
    ok = worst <= 1e-10
    return ok, f"{count} grid points, max entry error {worst:.3e}"


def _verify_covariance(model: Model) -> tuple[bool, str]:
    """Closed-form invariant covariance vs its defining time integral."""
    rng = np.random.default_rng(161803)
    worst = 0.0
    for _ in range(5):
        x = rng.standard_normal((model.n_modes, 2))
        closed = q_infinity_apply(model, x)
        quad = q_infinity_quadrature_oracle(model, x)
        scale = float(np.abs(closed).max())
        worst = max(worst, float(np.abs(closed - quad.pairs).max()) / scale)
    ok = worst <= 1e-6
    return ok, f"max relative deviation {worst:.3e}"


def _verify_lyapunov() -> tuple[bool, str]:
    """Drift identities of the three weight matrices on random states."""
    rng = np.random.default_rng(271828)
    worst = 0.0
    for _ in range(100):
        a = float(rng.uniform(0.2, 3.0))
        b = float(rng.uniform(0.1, 4.0))
        kappa = float(rng.uniform(0.05, 50.0))
        x = rng.standard_normal(2)
        gen = mode_generator(a, b, kappa)
        mats = r_matrices(a, b, kappa)
        z = gen @ x
        energy_sq = kappa * x[0] ** 2 + x[1] ** 2
        targets = {
            "energy": -(2.0 * a * b / (b + 1.0)) * energy_sq,
            "kinetic": -2.0 * a * x[1] ** 2,
            "potential": -2.0 * a * b * kappa * x[0] ** 2,
        }
        for name, target in targets.items():
            y = getattr(mats, name) @ x
            inner = kappa * y[0] * z[0] + y[1] * z[1]
            rel = abs(inner - target) / max(abs(target), 1e-9 * energy_sq)
            worst = max(worst, rel)
    ok = worst <= 1e-10
    return ok, f"100 random states, max relative defect {worst:.3e}"


def _verify_ito(model: Model) -> tuple[bool, str]:
    """Pathwise representation residuals and their O(dt) decay.

    A single path's residual carries a mean-zero fluctuation (the realized
    quadratic variation around its expectation), so per-seed decay ratios
    are too noisy to test.  The mean SQUARE residual over a fixed seed
    ensemble is proportional to dt to leading order, so halving dt halves
    it; that is the quantity checked here.
    """
    t_final = 10.0
    seeds = range(100, 112)
    tags = ("energy", "kinetic", "potential")
    mean_sq = {}
    i_mean = {}
    for dt in (1e-3, 5e-4):
        acc = dict.fromkeys(tags, 0.0)
        i_acc = 0.0
        for seed in seeds:
            stats = simulate_path(model, scheme="euler", dt=dt, T=t_final,
                                  seed=seed, record_ito=True)
            i_acc += stats.i_t
            for tag in tags:
                acc[tag] += ito_identity_residual(stats, model, tag) ** 2
        mean_sq[dt] = {tag: acc[tag] / len(seeds) for tag in tags}
        i_mean[dt] = i_acc / len(seeds)
    small = all(mean_sq[1e-3][tag] ** 0.5 <= 0.02 * i_mean[1e-3] for tag in tags)
    ratios = {tag: mean_sq[1e-3][tag] / mean_sq[5e-4][tag] for tag in tags}
    decays = all(1.6 <= r <= 2.6 for r in ratios.values())
    detail = ", ".join(f"{tag} mean-square ratio {ratios[tag]:.2f}" for tag in tags)
    return small and decays, detail


def cmd_verify(args) -> int:
    model, _ = _resolve_model(args)
    suites = [
        ("semigroup vs matrix-exponential oracle", lambda: _verify_semigroup()),
        ("invariant covariance vs quadrature oracle", lambda: _verify_covariance(model)),
        ("drift identities of the weight matrices", lambda: _verify_lyapunov()),
        ("pathwise representation residuals", lambda: _verify_ito(model)),
    ]
    failed = 0
    for name, fn in suites:
        ok, detail = fn()
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        if not ok:
            failed += 1
    if failed:
        print(f"{failed} suite(s) failed")
        return 3
    print("all verification suites passed")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "variances": cmd_variances,
    "montecarlo": cmd_montecarlo,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
