"""Monte Carlo replication runner and statistical summary.

Runs M independent replications of the simulator, applies both estimator
families to each path (the one-parameter family receives the true values
of the model as its known parameters), and aggregates:

* per-estimator mean,
* empirical variance of sqrt(T) (estimate - truth) with an n-1
  denominator, next to the theoretical limiting variance,
* maximum and 75th-percentile relative errors,
* a Shapiro-Wilk normality check of the replication sample.

Replication j draws its noise from PCG64(SeedSequence((master_seed, j))),
so the report is bit-identical for any worker count; workers only change
how contiguous index chunks are scheduled. Replications whose estimator is
undefined (for example the pole of b_hat on short paths) are excluded from
that estimator's statistics and counted in ``excluded``.

The Shapiro-Wilk implementation follows the AS R94 polynomial
approximation (Royston 1995): weights from normal order-statistic scores
m_i = Phi^-1((i - 3/8)/(n + 1/4)) with polynomial-corrected extremes, the
exact arcsine law at n = 3, a -ln(gamma - ln(1-W)) transform for
4 <= n <= 11 and a ln(1-W) transform for n >= 12. Normal cdf and quantile
come from the standard library.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from statistics import NormalDist
from typing import NamedTuple, Sequence

import numpy as np

from .covariance import asymptotic_variances
from .estimate import estimate_all
from .model import ConfigError, Model, trace_q
from .simulate import _simulate_batch, _validate_grid

__all__ = [
    "McSample",
    "McReport",
    "normality_test",
    "summarize",
    "run_monte_carlo",
    "report_to_json",
    "report_from_json",
    "write_samples_csv",
]

ESTIMATOR_NAMES = ("a_hat", "b_hat", "a_tilde", "b_tilde")

# AS R94 constants. Polynomials in descending powers for np.polyval.
_C1 = [-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0]
_C2 = [-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0]
_C3 = [-0.0006714, 0.025054, -0.39978, 0.544]
_C4 = [-0.0020322, 0.062767, -0.77857, 1.3822]
_C5 = [0.0038915, -0.083751, -0.31082, -1.5861]
_C6 = [0.0030302, -0.082676, -0.4803]
_G = [-2.273, 0.459]  # gamma = -2.273 + 0.459 n, ascending here
_PI6 = 1.90985931710274  # 6/pi
_STQR = 1.04719755119660  # pi/3


class McSample(NamedTuple):
    """One replication: stream index, estimates, path functionals.

    ``seed`` is the replication index j; together with the report's master
    seed it reproduces the path via simulate_path(..., seed=master_seed,
    replication=j). Undefined estimators are None.
    """

    seed: int
    a_hat: float | None
    b_hat: float | None
    a_tilde: float | None
    b_tilde: float | None
    i_t: float
    y_t: float
    h_t: float


@dataclass(frozen=True)
class McReport:
    """Aggregated Monte Carlo study, JSON-serializable.

    All per-estimator mappings are keyed by ESTIMATOR_NAMES. Entries are
    None when undefined (too few defined samples, or zero-noise model for
    the theoretical variances). ``normality`` values are {"W": .., "p": ..}
    mappings.
    """

    samples: list
    mean: dict
    variance_scaled: dict
    var_theoretical: dict
    rel_err_max: dict
    rel_err_typical: dict
    normality: dict
    excluded: dict
    config: dict


def normality_test(samples: Sequence[float]) -> tuple[float, float]:
    """Shapiro-Wilk statistic W and approximate p-value (AS R94).

    Valid for 3 <= n <= 5000. Raises on out-of-range sizes, non-finite
    values, and constant samples (W is undefined there).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 3 or n > 5000:
        raise ValueError(f"sample size must be in [3, 5000], got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if x[-1] == x[0]:
        raise ValueError("samples are constant; the test statistic is undefined")

    nd = NormalDist()
    m = np.array([nd.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    summ2 = float(m @ m)
    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    else:
        rsn = 1.0 / math.sqrt(n)
        a_n = float(np.polyval(_C1, rsn)) + m[-1] / math.sqrt(summ2)
        if n > 5:
            a_n1 = float(np.polyval(_C2, rsn)) + m[-2] / math.sqrt(summ2)
            phi = (summ2 - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
                1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2
            )
            a = m / math.sqrt(phi)
            a[-2], a[1] = a_n1, -a_n1
        else:
            phi = (summ2 - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n**2)
            a = m / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n

    xbar = float(x.mean())
    ssq = float(np.sum((x - xbar) ** 2))
    w = float(a @ x) ** 2 / ssq
    w = min(w, 1.0)

    if n == 3:
        p = _PI6 * (math.asin(math.sqrt(w)) - _STQR)
        return w, min(max(p, 0.0), 1.0)
    one_minus = 1.0 - w
    if one_minus < 1e-12:
        return w, 1.0
    if n <= 11:
        gamma = _G[0] + _G[1] * n
        arg = gamma - math.log(one_minus)
        if arg <= 0.0:
            return w, 0.0
        y = -math.log(arg)
        mu = float(np.polyval(_C3, n))
        sigma = math.exp(float(np.polyval(_C4, n)))
    else:
        y = math.log(one_minus)
        u = math.log(n)
        mu = float(np.polyval(_C5, u))
        sigma = math.exp(float(np.polyval(_C6, u)))
    z = (y - mu) / sigma
    return w, 1.0 - nd.cdf(z)


_TRUTH_OF = {"a_hat": "a", "b_hat": "b", "a_tilde": "a", "b_tilde": "b"}


def summarize(
    samples: Sequence[McSample],
    true_a: float,
    true_b: float,
    T: float,
    model: Model,
) -> McReport:
    """Aggregate replication samples into report statistics.

    Undefined estimates are excluded per estimator with a count. Variance
    entries use an n-1 denominator on sqrt(T) (estimate - truth) and are
    None when fewer than two defined samples remain; normality entries
    need at least three defined, non-constant samples.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("summarize needs at least one sample")
    truth = {"a": float(true_a), "b": float(true_b)}
    sqrt_t = math.sqrt(T)

    mean: dict = {}
    variance_scaled: dict = {}
    rel_err_max: dict = {}
    rel_err_typical: dict = {}
    normality: dict = {}
    excluded: dict = {}
    for name in ESTIMATOR_NAMES:
        values = [getattr(s, name) for s in samples]
        defined = np.array([v for v in values if v is not None], dtype=float)
        excluded[name] = len(values) - defined.size
        if defined.size == 0:
            mean[name] = None
            variance_scaled[name] = None
            rel_err_max[name] = None
            rel_err_typical[name] = None
            normality[name] = None
            continue
        tv = truth[_TRUTH_OF[name]]
        mean[name] = float(defined.mean())
        scaled = sqrt_t * (defined - tv)
        variance_scaled[name] = float(scaled.var(ddof=1)) if defined.size > 1 else None
        rel = np.abs(defined - tv) / abs(tv)
        rel_err_max[name] = float(rel.max())
        rel_err_typical[name] = float(np.percentile(rel, 75.0))
        if defined.size >= 3 and defined.max() > defined.min():
            w, p = normality_test(defined)
            normality[name] = {"W": w, "p": p}
        else:
            normality[name] = None

    try:
        vt = asymptotic_variances(model)
        var_theoretical = {
            "a_hat": vt.var_a_hat,
            "b_hat": vt.var_b_hat,
            "a_tilde": vt.var_a_tilde,
            "b_tilde": vt.var_b_tilde,
        }
    except ValueError:
        var_theoretical = {name: None for name in ESTIMATOR_NAMES}

    return McReport(
        samples=samples,
        mean=mean,
        variance_scaled=variance_scaled,
        var_theoretical=var_theoretical,
        rel_err_max=rel_err_max,
        rel_err_typical=rel_err_typical,
        normality=normality,
        excluded=excluded,
        config={"model": model.describe(), "T": float(T)},
    )


def _chunk_indices(m: int, workers: int) -> list[list[int]]:
    """Contiguous replication index chunks, as even as possible."""
    workers = max(1, min(workers, m))
    base, rem = divmod(m, workers)
    chunks = []
    start = 0
    for w in range(workers):
        size = base + (1 if w < rem else 0)
        chunks.append(list(range(start, start + size)))
        start += size
    return chunks


def run_monte_carlo(
    model: Model,
    T: float,
    dt: float,
    scheme: str = "euler",
    M: int = 100,
    master_seed: int = 0,
    workers: int = 1,
) -> McReport:
    """Run M seeded replications and summarize them.

    The report is identical for any ``workers`` value: replication j
    always draws from the stream keyed by (master_seed, j), and chunk
    results are merged back in index order. A path blow-up raises
    NumericError naming the offending replication.
    """
    if not isinstance(M, int) or isinstance(M, bool) or M < 2:
        raise ConfigError(f"M must be an integer >= 2, got {M!r}")
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    if scheme not in ("euler", "exact"):
        raise ConfigError(f"unknown scheme {scheme!r} (expected 'euler' or 'exact')")
    if scheme == "exact" and not model.is_diagonal:
        raise ConfigError("the exact scheme requires a diagonal q_matrix")
    if not isinstance(master_seed, int) or isinstance(master_seed, bool) or master_seed < 0:
        raise ConfigError(f"master_seed must be a non-negative integer, got {master_seed!r}")
    n_steps = _validate_grid(dt, T)
    t_eff = n_steps * float(dt)

    chunks = _chunk_indices(M, workers)
    if len(chunks) == 1:
        results = [_simulate_batch(model, scheme, float(dt), n_steps, master_seed, chunks[0])]
    elif workers == 1:
        results = [
            _simulate_batch(model, scheme, float(dt), n_steps, master_seed, c) for c in chunks
        ]
    else:
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            futures = [
                pool.submit(_simulate_batch, model, scheme, float(dt), n_steps, master_seed, c)
                for c in chunks
            ]
            results = [f.result() for f in futures]

    tq = trace_q(model)
    samples: list[McSample] = []
    for chunk, res in zip(chunks, results):
        for pos, j in enumerate(chunk):
            i_t = float(res.y[pos] + res.h[pos])
            y_t = float(res.y[pos])
            h_t = float(res.h[pos])
            est = estimate_all(i_t, y_t, h_t, tq, known_a=model.a, known_b=model.b)
            samples.append(McSample(
                seed=j,
                a_hat=est.a_hat, b_hat=est.b_hat,
                a_tilde=est.a_tilde, b_tilde=est.b_tilde,
                i_t=i_t, y_t=y_t, h_t=h_t,
            ))

    report = summarize(samples, model.a, model.b, t_eff, model)
    return replace(report, config={
        "model": model.describe(),
        "T": t_eff,
        "dt": float(dt),
        "scheme": scheme,
        "M": M,
        "master_seed": master_seed,
    })


def report_to_json(report: McReport) -> str:
    """Serialize a report to a deterministic JSON string."""
    obj = {
        "samples": [s._asdict() for s in report.samples],
        "mean": report.mean,
        "variance_scaled": report.variance_scaled,
        "var_theoretical": report.var_theoretical,
        "rel_err_max": report.rel_err_max,
        "rel_err_typical": report.rel_err_typical,
        "normality": report.normality,
        "excluded": report.excluded,
        "config": report.config,
    }
    return json.dumps(obj, indent=2, sort_keys=True)


def report_from_json(text: str) -> McReport:
    """Rebuild a report from its JSON form (inverse of report_to_json)."""
    obj = json.loads(text)
    required = {"samples", "mean", "variance_scaled", "var_theoretical",
                "rel_err_max", "rel_err_typical", "normality", "excluded", "config"}
    missing = required - set(obj)
    if missing:
        raise ValueError(f"report JSON is missing keys: {sorted(missing)}")
    samples = [McSample(**s) for s in obj["samples"]]
    return McReport(
        samples=samples,
        mean=obj["mean"],
        variance_scaled=obj["variance_scaled"],
        var_theoretical=obj["var_theoretical"],
        rel_err_max=obj["rel_err_max"],
        rel_err_typical=obj["rel_err_typical"],
        normality=obj["normality"],
        excluded=obj["excluded"],
        config=obj["config"],
    )


def write_samples_csv(samples: Sequence[McSample], path) -> None:
    """Write per-replication samples as CSV.

    Columns: seed, a_hat, b_hat, a_tilde, b_tilde, I_T, Y_T, H_T.
    Undefined estimators are written as NA. Float formatting is repr-exact
    so repeated runs produce byte-identical files.
    """
    def fmt(v):
        return "NA" if v is None else repr(float(v))

    lines = ["seed,a_hat,b_hat,a_tilde,b_tilde,I_T,Y_T,H_T"]
    for s in samples:
        lines.append(",".join([
            str(int(s.seed)),
            fmt(s.a_hat), fmt(s.b_hat), fmt(s.a_tilde), fmt(s.b_tilde),
            fmt(s.i_t), fmt(s.y_t), fmt(s.h_t),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
