"""Path simulation and ergodic functionals of the truncated system.

Two stepping schemes over a uniform grid of ``n = T/dt`` steps:

* ``euler``: explicit Euler with additive Gaussian increments, evaluating
  the drift at the pre-step state,

      u <- u + v dt
      v <- v + (-b kappa u - 2 a v) dt + (F xi) sqrt(dt)

  where F is a factor of the noise covariance (FF^T = q_matrix) and xi is
  a standard normal vector.

* ``exact``: distribution-exact transitions. Per mode the state is mapped
  by the closed-form propagator and perturbed by a Gaussian with the true
  finite-horizon covariance C(dt), obtained by Gauss-Legendre quadrature
  and Cholesky factorization. Requires diagonal noise.

The quadratic path functionals are accumulated as left-endpoint Riemann
sums on the same grid (initial state included, final state excluded) and
divided by n dt: Y_T averages the kappa-weighted squared positions, H_T
the squared velocities, and I_T = Y_T + H_T exactly.

Reproducibility: replication ``j`` of master seed ``s`` draws from
``PCG64(SeedSequence((s, j)))``; a plain ``simulate_path(..., seed=s)`` is
replication 0. Normal variates come from numpy's ziggurat sampler
(``Generator.standard_normal``) in blocks of 4096 steps (final block
truncated), with every cross-mode reduction done by a fixed-order einsum.
Identical (model, scheme, dt, T, seed, replication) therefore yields
bit-identical output regardless of how replications are batched across
workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import ConfigError, Model, trace_q
from .semigroup import mode_propagator, r_matrices

__all__ = [
    "NumericError",
    "NoiseFactor",
    "noise_factor",
    "TrajectorySample",
    "ItoData",
    "PathStatistics",
    "simulate_path",
    "exact_transition",
    "ito_identity_residual",
]

_BLOCK = 4096
_GL_NODES = 16


class NumericError(RuntimeError):
    """Simulation produced a non-finite state."""


@dataclass(frozen=True)
class NoiseFactor:
    """Factor F of the noise covariance with F F^T = q_matrix.

    ``factor`` holds per-mode amplitudes sqrt(lambda_n) (shape (N,)) when
    ``diagonal``, otherwise the dense symmetric PSD square root (N, N).
    """

    diagonal: bool
    factor: np.ndarray

    def apply(self, xi: np.ndarray) -> np.ndarray:
        """F xi for xi with modes on the last axis."""
        if self.diagonal:
            return xi * self.factor
        return np.einsum("nk,...k->...n", self.factor, xi, optimize=False)


def noise_factor(model: Model) -> NoiseFactor:
    """Factor the noise covariance, with a diagonal fast path."""
    q = model.q_matrix
    tol = 1e-10 * max(float(np.trace(q)), 1.0)
    if model.is_diagonal:
        lam = model.lam.copy()
        if np.any(lam < -tol):
            raise ValueError("q_matrix diagonal has a negative entry")
        return NoiseFactor(diagonal=True, factor=np.sqrt(np.maximum(lam, 0.0)))
    w, vecs = np.linalg.eigh(q)
    if np.any(w < -tol):
        raise ValueError(f"q_matrix is indefinite (eigenvalue {w.min():.3e})")
    root = vecs @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ vecs.T
    return NoiseFactor(diagonal=False, factor=root)


class TrajectorySample(NamedTuple):
    """Running time-averaged functionals at one decimated grid time."""

    t: float
    i_t: float
    y_t: float
    h_t: float


class ItoData(NamedTuple):
    """Accumulated stochastic integrals of the three weighted states
    against the driving noise increments, in the energy inner product."""

    energy: float
    kinetic: float
    potential: float


@dataclass(frozen=True)
class PathStatistics:
    """Ergodic functionals of one simulated path.

    ``horizon`` is exactly n_steps * dt. ``i_t = y_t + h_t`` holds by
    construction. ``ito_data`` is present only when requested on an Euler
    run; ``trajectory`` only when recording was requested.
    """

    i_t: float
    y_t: float
    h_t: float
    horizon: float
    dt: float
    scheme: str
    seed: int
    replication: int
    final_state: np.ndarray | None
    ito_data: ItoData | None = None
    trajectory: list[TrajectorySample] | None = None

    def to_json_dict(self) -> dict:
        out = {
            "I_T": self.i_t,
            "Y_T": self.y_t,
            "H_T": self.h_t,
            "T": self.horizon,
            "dt": self.dt,
            "scheme": self.scheme,
            "seed": self.seed,
            "replication": self.replication,
            "final_state": None if self.final_state is None else self.final_state.tolist(),
        }
        if self.ito_data is not None:
            out["ito_data"] = {
                "energy": self.ito_data.energy,
                "kinetic": self.ito_data.kinetic,
                "potential": self.ito_data.potential,
            }
        return out

    @classmethod
    def from_json_dict(cls, d: dict) -> "PathStatistics":
        required = {"I_T", "Y_T", "H_T", "T", "dt", "scheme", "seed"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"path statistics JSON is missing keys: {sorted(missing)}")
        unknown = set(d) - required - {"replication", "final_state", "ito_data"}
        if unknown:
            raise ValueError(f"path statistics JSON has unknown keys: {sorted(unknown)}")
        ito = d.get("ito_data")
        final = d.get("final_state")
        return cls(
            i_t=float(d["I_T"]),
            y_t=float(d["Y_T"]),
            h_t=float(d["H_T"]),
            horizon=float(d["T"]),
            dt=float(d["dt"]),
            scheme=str(d["scheme"]),
            seed=int(d["seed"]),
            replication=int(d.get("replication", 0)),
            final_state=None if final is None else np.asarray(final, dtype=float),
            ito_data=None if ito is None else ItoData(
                energy=float(ito["energy"]),
                kinetic=float(ito["kinetic"]),
                potential=float(ito["potential"]),
            ),
        )


def _mode_decay_rates(model: Model) -> np.ndarray:
    a, b = model.a, model.b
    disc = b * model.kappa - a * a
    return np.where(
        disc >= 0.0, a, b * model.kappa / (a + np.sqrt(np.maximum(-disc, 0.0)))
    )


def _cov_integrals(a: float, b: float, kappa: float, dt: float) -> np.ndarray:
    """Unit-intensity transition covariance integral of one mode.

    Returns the 2x2 matrix of integrals over (0, dt) of the outer product
    of the propagator column (s12, s22), by composite 16-node
    Gauss-Legendre panels sized to the mode's oscillation and decay. The
    integration range is capped where the integrand has decayed below
    double precision.
    """
    disc = b * kappa - a * a
    omega = math.sqrt(disc) if disc > 0 else 0.0
    rho = a if disc >= 0 else b * kappa / (a + math.sqrt(-disc))
    t_int = min(dt, 25.0 / rho)
    panels = max(1, math.ceil(t_int * max(a, omega) / 2.0))
    nodes, weights = np.polynomial.legendre.leggauss(_GL_NODES)
    edges = np.linspace(0.0, t_int, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    ts = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    ws = (half[:, None] * weights[None, :]).reshape(-1)
    props = mode_propagator(a, b, kappa, ts)
    s12 = props[:, 0, 1]
    s22 = props[:, 1, 1]
    c11 = float(np.sum(ws * s12 * s12))
    c12 = float(np.sum(ws * s12 * s22))
    c22 = float(np.sum(ws * s22 * s22))
    return np.array([[c11, c12], [c12, c22]])


def _chol2(c: np.ndarray) -> np.ndarray:
    """Cholesky factor of a 2x2 PSD matrix, tolerating zero diagonals."""
    c11, c12, c22 = c[0, 0], c[0, 1], c[1, 1]
    if c11 <= 0.0:
        return np.array([[0.0, 0.0], [0.0, math.sqrt(max(c22, 0.0))]])
    l11 = math.sqrt(c11)
    l21 = c12 / l11
    l22 = math.sqrt(max(c22 - l21 * l21, 0.0))
    return np.array([[l11, 0.0], [l21, l22]])


def exact_transition(model: Model, mode_index: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Propagator and noise Cholesky factor of one mode over one step.

    The state update ``x <- P x + L xi`` with standard normal xi has
    exactly the transition law of the mode over time dt. Requires
    diagonal noise; raises ConfigError otherwise.
    """
    if not model.is_diagonal:
        raise ConfigError("exact transitions require a diagonal q_matrix")
    if not 0 <= mode_index < model.n_modes:
        raise ValueError(f"mode_index out of range: {mode_index}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, b = model.a, model.b
    kappa = float(model.kappa[mode_index])
    lam = float(model.lam[mode_index])
    prop = mode_propagator(a, b, kappa, dt)
    cov = lam * _cov_integrals(a, b, kappa, dt)
    return prop, _chol2(cov)


def _exact_matrices(model: Model, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (N, 2, 2) propagators and noise factors for all modes."""
    props = np.empty((model.n_modes, 2, 2))
    chols = np.empty((model.n_modes, 2, 2))
    for k in range(model.n_modes):
        props[k], chols[k] = exact_transition(model, k, dt)
    return props, chols


class _BatchResult(NamedTuple):
    y: np.ndarray
    h: np.ndarray
    iu: np.ndarray | None
    iv: np.ndarray | None
    state: np.ndarray
    trajectory: list[TrajectorySample] | None


def _record(trajectory: list, step: int, dt: float, y_acc: np.ndarray, h_acc: np.ndarray) -> None:
    if step == 0:
        trajectory.append(TrajectorySample(0.0, math.nan, math.nan, math.nan))
        return
    y = float(y_acc[0]) / step
    h = float(h_acc[0]) / step
    trajectory.append(TrajectorySample(step * dt, y + h, y, h))


def _simulate_batch(
    model: Model,
    scheme: str,
    dt: float,
    n_steps: int,
    master_seed: int,
    rep_indices,
    record_ito: bool = False,
    record_stride: int | None = None,
) -> _BatchResult:
    """Step a batch of replications with per-replication noise streams.

    The workhorse behind simulate_path and the Monte Carlo harness. Each
    replication j draws from PCG64(SeedSequence((master_seed, j))), so the
    result per replication does not depend on how the batch is split.
    """
    m = len(rep_indices)
    n = model.n_modes
    if record_stride is not None and m != 1:
        raise ValueError("trajectory recording supports a single replication only")
    gens = [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(master_seed), int(j)))))
        for j in rep_indices
    ]
    kappa = model.kappa
    u = np.tile(model.x0[:, 0], (m, 1))
    v = np.tile(model.x0[:, 1], (m, 1))
    y_acc = np.zeros(m)
    h_acc = np.zeros(m)
    iu = np.zeros(m) if record_ito else None
    iv = np.zeros(m) if record_ito else None
    trajectory: list[TrajectorySample] | None = [] if record_stride is not None else None

    euler = scheme == "euler"
    if euler:
        nf = noise_factor(model)
        bk = model.b * kappa
        two_a = 2.0 * model.a
        sqrt_dt = math.sqrt(dt)
    else:
        props, chols = _exact_matrices(model, dt)
        p00, p01 = props[:, 0, 0], props[:, 0, 1]
        p10, p11 = props[:, 1, 0], props[:, 1, 1]
        l00, l10, l11 = chols[:, 0, 0], chols[:, 1, 0], chols[:, 1, 1]

    def run_block(noise: np.ndarray, step_base: int, blk: int, check: bool) -> None:
        nonlocal u, v
        for i in range(blk):
            step = step_base + i
            if record_stride is not None and step % record_stride == 0:
                _record(trajectory, step, dt, y_acc, h_acc)
            y_acc[:] += np.einsum("n,mn->m", kappa, u * u, optimize=False)
            h_acc[:] += np.einsum("mn,mn->m", v, v, optimize=False)
            if euler:
                fdw = nf.apply(noise[i]) * sqrt_dt
                if record_ito:
                    iu[:] += np.einsum("mn,mn->m", u, fdw, optimize=False)
                    iv[:] += np.einsum("mn,mn->m", v, fdw, optimize=False)
                u, v = u + v * dt, v + (-bk * u - two_a * v) * dt + fdw
            else:
                xi = noise[i]
                u, v = (
                    p00 * u + p01 * v + l00 * xi[..., 0],
                    p10 * u + p11 * v + l10 * xi[..., 0] + l11 * xi[..., 1],
                )
            if check and not (np.isfinite(u).all() and np.isfinite(v).all()):
                bad = int(np.argwhere(~(np.isfinite(u) & np.isfinite(v)))[0][0])
                raise NumericError(
                    f"non-finite state in replication {rep_indices[bad]} "
                    f"at step {step + 1} (t = {(step + 1) * dt:.6g})"
                )

    step_base = 0
    # the isfinite check below is the divergence detector; the arithmetic
    # warnings numpy would emit on the way to it are redundant
    with np.errstate(over="ignore", invalid="ignore"):
        while step_base < n_steps:
            blk = min(_BLOCK, n_steps - step_base)
            if euler:
                noise = np.stack([g.standard_normal((blk, n)) for g in gens], axis=1)
            else:
                noise = np.stack([g.standard_normal((blk, n, 2)) for g in gens], axis=1)
            snap = (u.copy(), v.copy(), y_acc.copy(), h_acc.copy(),
                    None if iu is None else iu.copy(),
                    None if iv is None else iv.copy(),
                    None if trajectory is None else len(trajectory))
            run_block(noise, step_base, blk, check=False)
            if not (np.isfinite(u).all() and np.isfinite(v).all()):
                # replay the failed block step-by-step to name the exact step
                u, v = snap[0], snap[1]
                y_acc[:], h_acc[:] = snap[2], snap[3]
                if iu is not None:
                    iu[:], iv[:] = snap[4], snap[5]
                if trajectory is not None:
                    del trajectory[snap[6]:]
                run_block(noise, step_base, blk, check=True)
            step_base += blk

    if record_stride is not None and n_steps % record_stride == 0:
        _record(trajectory, n_steps, dt, y_acc, h_acc)

    y = y_acc / n_steps
    h = h_acc / n_steps
    return _BatchResult(
        y=y, h=h, iu=iu, iv=iv,
        state=np.stack([u, v], axis=-1),
        trajectory=trajectory,
    )


def _validate_grid(dt: float, t_final: float) -> int:
    if not (isinstance(dt, (int, float)) and math.isfinite(dt) and dt > 0):
        raise ConfigError(f"dt must be a positive real, got {dt!r}")
    if not (isinstance(t_final, (int, float)) and math.isfinite(t_final) and t_final >= dt):
        raise ConfigError(f"T must satisfy T >= dt, got T={t_final!r}")
    ratio = t_final / dt
    n_steps = round(ratio)
    if abs(ratio - n_steps) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"T/dt must be an integer, got {ratio!r}")
    return int(n_steps)


def simulate_path(
    model: Model,
    scheme: str = "euler",
    dt: float = 1e-3,
    T: float = 1.0,
    seed: int = 0,
    replication: int = 0,
    record_ito: bool = False,
    record_trajectory: bool = False,
    trajectory_stride: int = 100,
) -> PathStatistics:
    """Simulate one path and return its ergodic functionals.

    ``seed`` is the master seed and ``replication`` selects the noise
    stream within it, so replication j of a Monte Carlo run can be
    reproduced standalone. ``record_ito`` (Euler only) additionally
    accumulates the stochastic integrals needed by
    :func:`ito_identity_residual`. ``record_trajectory`` attaches
    decimated running functionals (default every 100 steps, including the
    degenerate t=0 sample).
    """
    if scheme not in ("euler", "exact"):
        raise ConfigError(f"unknown scheme {scheme!r} (expected 'euler' or 'exact')")
    if scheme == "exact" and not model.is_diagonal:
        raise ConfigError("the exact scheme requires a diagonal q_matrix")
    if scheme == "exact" and record_ito:
        raise ValueError("stochastic-integral recording needs the Euler scheme: "
                         "the exact scheme does not expose the driving increments")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    if not isinstance(replication, int) or replication < 0:
        raise ConfigError(f"replication must be a non-negative integer, got {replication!r}")
    if record_trajectory and trajectory_stride < 1:
        raise ValueError("trajectory_stride must be >= 1")
    n_steps = _validate_grid(dt, T)

    res = _simulate_batch(
        model, scheme, float(dt), n_steps, seed, [replication],
        record_ito=record_ito,
        record_stride=trajectory_stride if record_trajectory else None,
    )
    ito = None
    if record_ito:
        a, b = model.a, model.b
        iu0, iv0 = float(res.iu[0]), float(res.iv[0])
        ito = ItoData(
            energy=(2.0 * a / (b + 1.0)) * iu0 + iv0,
            kinetic=iv0,
            potential=2.0 * a * iu0 + iv0,
        )
    return PathStatistics(
        i_t=float(res.y[0] + res.h[0]),
        y_t=float(res.y[0]),
        h_t=float(res.h[0]),
        horizon=n_steps * float(dt),
        dt=float(dt),
        scheme=scheme,
        seed=seed,
        replication=replication,
        final_state=res.state[0],
        ito_data=ito,
        trajectory=res.trajectory,
    )


def _r_quadratic(model: Model, state: np.ndarray, which: str) -> float:
    """<R state, state> in the energy inner product, R picked by tag."""
    total = 0.0
    for k in range(model.n_modes):
        mats = r_matrices(model.a, model.b, float(model.kappa[k]))
        r = getattr(mats, which)
        y = r @ state[k]
        total += float(model.kappa[k]) * y[0] * state[k, 0] + y[1] * state[k, 1]
    return total


def ito_identity_residual(stats: PathStatistics, model: Model, which: str) -> float:
    """Defect of the pathwise representation of one ergodic functional.

    Each functional admits an exact decomposition into the noise trace, a
    boundary term in the corresponding weighted quadratic form, and a
    stochastic integral. On a discretized path the decomposition holds up
    to O(dt); the residual is its absolute defect.

    ``which`` is ``"energy"`` (checks I_T), ``"kinetic"`` (H_T) or
    ``"potential"`` (Y_T). Requires statistics recorded with
    ``record_ito=True``.
    """
    if which not in ("energy", "kinetic", "potential"):
        raise ValueError(f"unknown identity tag {which!r}")
    if stats.ito_data is None:
        raise ValueError("path statistics were recorded without ito_data; "
                         "rerun simulate_path with record_ito=True")
    if stats.final_state is None:
        raise ValueError("path statistics lack the final state")
    a, b = model.a, model.b
    t_final = stats.horizon
    tq = trace_q(model)
    boundary = _r_quadratic(model, stats.final_state, which) - _r_quadratic(model, model.x0, which)
    if which == "energy":
        coeff = (b + 1.0) / (4.0 * a * b)
        lhs = stats.i_t
        stoch = stats.ito_data.energy
    elif which == "kinetic":
        coeff = 1.0 / (4.0 * a)
        lhs = stats.h_t
        stoch = stats.ito_data.kinetic
    else:
        coeff = 1.0 / (4.0 * a * b)
        lhs = stats.y_t
        stoch = stats.ito_data.potential
    return abs(lhs + coeff / t_final * boundary - 2.0 * coeff / t_final * stoch - coeff * tq)
