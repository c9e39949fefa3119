"""Invariant covariance operator and limiting variances of the estimators.

The stationary covariance of the damped system acts on per-mode pairs
(u, v) through a double sum over mode indices with the common denominator

    D(n, k) = b^2 (kappa_n - kappa_k)^2 + 8 a^2 b (kappa_n + kappa_k).

For diagonal noise it collapses to diag(lambda/(4ab), lambda/(4a)) per mode.
The same denominator drives the trace formulas behind the central limit
variances of the contrast estimators. Everything here is closed-form; the
quadrature oracle integrates the defining time integral numerically and
exists only to cross-check the closed forms.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .model import Model, trace_q
from .semigroup import mode_propagator

__all__ = [
    "q_infinity_apply",
    "q_infinity_dense",
    "QuadratureResult",
    "q_infinity_quadrature_oracle",
    "TraceSplit",
    "trace_q_infinity",
    "clt_trace",
    "VarianceSet",
    "asymptotic_variances",
    "diagonal_variance_shortcut",
]

_CLT_TAGS = ("energy", "kinetic", "potential")


def _denominator(model: Model) -> np.ndarray:
    """D(n, k) grid with n on axis 0 and k on axis 1."""
    a, b = model.a, model.b
    kn = model.kappa[:, None]
    kk = model.kappa[None, :]
    return b * b * (kn - kk) ** 2 + 8.0 * a * a * b * (kn + kk)


def q_infinity_apply(model: Model, x: np.ndarray) -> np.ndarray:
    """Apply the invariant covariance operator to a state.

    Parameters
    ----------
    model : Model
    x : ndarray, shape (N, 2)
        Per-mode (u, v) coefficients.

    Returns
    -------
    ndarray, shape (N, 2)
        y with

        y_u[k] = sum_n (4 a kappa_n u_n + b (kappa_k - kappa_n) v_n) q[n,k] / D(n,k)
        y_v[k] = sum_n (b kappa_n (kappa_n - kappa_k) u_n
                        + 2 a b (kappa_n + kappa_k) v_n) q[n,k] / D(n,k)
    """
    x = np.asarray(x, dtype=float)
    n = model.n_modes
    if x.shape != (n, 2):
        raise ValueError(f"state must have shape ({n}, 2), got {x.shape}")
    a, b = model.a, model.b
    kn = model.kappa[:, None]
    kk = model.kappa[None, :]
    w = model.q_matrix / _denominator(model)
    u = x[:, 0][:, None]
    v = x[:, 1][:, None]

    num_u = 4.0 * a * kn * u + b * (kk - kn) * v
    num_v = b * kn * (kn - kk) * u + 2.0 * a * b * (kn + kk) * v
    out = np.empty((n, 2))
    out[:, 0] = np.sum(num_u * w, axis=0)
    out[:, 1] = np.sum(num_v * w, axis=0)
    return out


def q_infinity_dense(model: Model) -> np.ndarray:
    """Dense 2N x 2N matrix of the covariance operator, for tests.

    Coordinates are stacked as (u_1..u_N, v_1..v_N). Column j is the image
    of the j-th coordinate vector under :func:`q_infinity_apply`.
    """
    n = model.n_modes
    out = np.empty((2 * n, 2 * n))
    basis = np.zeros((n, 2))
    for j in range(2 * n):
        mode, comp = (j % n, j // n)
        basis[mode, comp] = 1.0
        y = q_infinity_apply(model, basis)
        basis[mode, comp] = 0.0
        out[:n, j] = y[:, 0]
        out[n:, j] = y[:, 1]
    return out


class QuadratureResult(NamedTuple):
    """Output of the time-integral oracle.

    ``pairs`` is the (N, 2) image of the input state, ``tail_bound`` the
    decay factor exp(-2 rho t_max) of the neglected tail, and
    ``sufficient`` whether that factor is below 1e-10.
    """

    pairs: np.ndarray
    tail_bound: float
    sufficient: bool


def _min_decay_rate(model: Model) -> float:
    """Slowest exponential decay rate over all modes."""
    a, b = model.a, model.b
    disc = b * model.kappa - a * a
    rates = np.where(
        disc >= 0.0,
        a,
        b * model.kappa / (a + np.sqrt(np.maximum(-disc, 0.0))),
    )
    return float(rates.min())


def q_infinity_quadrature_oracle(
    model: Model,
    x: np.ndarray,
    t_max: float | None = None,
    steps: int | None = None,
) -> QuadratureResult:
    """Integrate the defining covariance integral numerically.

    Composite Simpson quadrature of the matrix-valued integral

        integral_0^t_max  S(t) Phi Phi^* S^*(t) x  dt

    where S is the per-mode propagator, S^* its transpose in the
    kappa-weighted inner product, and Phi Phi^* injects the noise
    covariance into the velocity component only. Slower but independent
    of the closed form in :func:`q_infinity_apply`.

    Defaults: ``t_max = 12 / rho`` with rho the slowest mode decay rate,
    and ``steps >= 20 t_max max(a, omega_max)`` rounded up to an even
    count of at least 64.
    """
    x = np.asarray(x, dtype=float)
    n = model.n_modes
    if x.shape != (n, 2):
        raise ValueError(f"state must have shape ({n}, 2), got {x.shape}")
    a, b = model.a, model.b
    rho = _min_decay_rate(model)
    if t_max is None:
        t_max = 12.0 / rho
    t_max = float(t_max)
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if steps is None:
        # 40 nodes per unit of the fastest rate: twice the required floor,
        # which buys two extra digits from Simpson's fourth-order error
        disc = b * model.kappa - a * a
        omega_max = float(np.sqrt(np.maximum(disc, 0.0)).max())
        steps = max(64, int(np.ceil(40.0 * t_max * max(a, omega_max))))
    steps = int(steps)
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if steps % 2:
        steps += 1

    ts = np.linspace(0.0, t_max, steps + 1)
    props = mode_propagator(a, b, model.kappa[:, None], ts[None, :])  # (N, steps+1, 2, 2)
    kappa = model.kappa[:, None]

    s11 = props[..., 0, 0]
    s12 = props[..., 0, 1]
    s21 = props[..., 1, 0]
    s22 = props[..., 1, 1]

    # z = S^*(t) x per mode; V-transpose swaps off-diagonals with kappa weights
    zu = s11 * x[:, 0][:, None] + (s21 / kappa) * x[:, 1][:, None]
    zv = kappa * s12 * x[:, 0][:, None] + s22 * x[:, 1][:, None]
    # w = Phi Phi^* z: zero position row, velocity row mixed by q_matrix
    wv = model.q_matrix @ zv
    fu = s12 * wv
    fv = s22 * wv

    weights = np.ones(steps + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    h = t_max / steps
    out = np.empty((n, 2))
    out[:, 0] = (h / 3.0) * np.sum(fu * weights, axis=1)
    out[:, 1] = (h / 3.0) * np.sum(fv * weights, axis=1)

    tail = float(np.exp(-2.0 * rho * t_max))
    return QuadratureResult(pairs=out, tail_bound=tail, sufficient=tail < 1e-10)


class TraceSplit(NamedTuple):
    """Trace of the invariant covariance and its position/velocity parts."""

    total: float
    position_part: float
    velocity_part: float


def trace_q_infinity(model: Model) -> TraceSplit:
    """Trace (b+1)/(4ab) Tr Q with the split (Tr Q/(4ab), Tr Q/(4a))."""
    a, b = model.a, model.b
    tq = trace_q(model)
    return TraceSplit(
        total=(b + 1.0) / (4.0 * a * b) * tq,
        position_part=tq / (4.0 * a * b),
        velocity_part=tq / (4.0 * a),
    )


def clt_trace(model: Model, which: str) -> float:
    """Double-sum trace driving one limiting variance.

    ``which`` selects the quadratic functional: ``"energy"`` for the full
    energy contrast, ``"kinetic"`` for the velocity-only contrast,
    ``"potential"`` for the position-only contrast. The value is

        sum_{n,k} numerator(n, k) q[n,k]^2 / D(n,k)

    with the numerator depending on the tag.
    """
    if which not in _CLT_TAGS:
        raise ValueError(f"unknown trace tag {which!r}, expected one of {_CLT_TAGS}")
    a, b = model.a, model.b
    kn = model.kappa[:, None]
    kk = model.kappa[None, :]
    if which == "energy":
        num = (16.0 * a**3 + 2.0 * a * b * (b + 1.0) ** 2 * (kn + kk)) / (b + 1.0) ** 2
    elif which == "kinetic":
        num = 2.0 * a * b * (kn + kk)
    else:
        num = np.full_like(kn + kk, 16.0 * a**3)
    return float(np.sum(num * model.q_matrix**2 / _denominator(model)))


class VarianceSet(NamedTuple):
    """Limiting variances of sqrt(T)-scaled estimator errors."""

    var_a_hat: float
    var_b_hat: float
    var_a_tilde: float
    var_b_tilde: float


def asymptotic_variances(model: Model) -> VarianceSet:
    """Limiting variances of the four estimators via the CLT traces.

    Raises ValueError when the noise trace vanishes (no information).
    """
    tq = trace_q(model)
    if tq <= 0.0:
        raise ValueError("asymptotic variances need a positive noise trace")
    a, b = model.a, model.b
    energy = clt_trace(model, "energy")
    kinetic = clt_trace(model, "kinetic")
    potential = clt_trace(model, "potential")
    inv_tq2 = 1.0 / tq**2
    return VarianceSet(
        var_a_hat=4.0 * a * a * inv_tq2 * energy,
        var_b_hat=4.0 * b * b * (b + 1.0) ** 2 * inv_tq2 * energy,
        var_a_tilde=4.0 * a * a * inv_tq2 * kinetic,
        var_b_tilde=4.0 * b * b * inv_tq2 * potential,
    )


def diagonal_variance_shortcut(model: Model) -> VarianceSet:
    """Closed forms for diagonal noise; must agree with the general sums.

    With S2 = sum lambda_n^2 and S2K = sum lambda_n^2 / kappa_n:

        var_a_hat   = (4a^3/(b(b+1)^2) S2K + a S2) / (Tr Q)^2
        var_b_hat   = (4ab S2K + b^2 (b+1)^2 / a S2) / (Tr Q)^2
        var_a_tilde = a S2 / (Tr Q)^2
        var_b_tilde = 4ab S2K / (Tr Q)^2
    """
    if not model.is_diagonal:
        raise ValueError("diagonal shortcut needs a diagonal q_matrix")
    tq = trace_q(model)
    if tq <= 0.0:
        raise ValueError("asymptotic variances need a positive noise trace")
    a, b = model.a, model.b
    lam = model.lam
    s2 = float(np.sum(lam**2))
    s2k = float(np.sum(lam**2 / model.kappa))
    inv_tq2 = 1.0 / tq**2
    return VarianceSet(
        var_a_hat=(4.0 * a**3 / (b * (b + 1.0) ** 2) * s2k + a * s2) * inv_tq2,
        var_b_hat=(4.0 * a * b * s2k + b * b * (b + 1.0) ** 2 / a * s2) * inv_tq2,
        var_a_tilde=a * s2 * inv_tq2,
        var_b_tilde=4.0 * a * b * s2k * inv_tq2,
    )
