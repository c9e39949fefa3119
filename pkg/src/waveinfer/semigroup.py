"""Per-mode dynamics: generator, closed-form propagator, energy geometry.

Each mode evolves under the 2x2 system

    d/dt (u, v) = M (u, v),   M = [[0, 1], [-b*kappa, -2a]],

whose matrix exponential has a single closed form valid in every damping
regime. With E = exp(-a t) and zeta = (b*kappa - a^2) t^2 define the entire
functions

    C(zeta) = sum_j (-zeta)^j / (2j)!      (cos for zeta > 0, cosh below)
    K(zeta) = sum_j (-zeta)^j / (2j+1)!    (sinc-type companion)

so that

    exp(t M) = E * [[C + a t K,        t K     ],
                    [-b*kappa t K,  C - a t K]].

The evaluation switches between a short power series near zeta = 0 and the
trigonometric / scaled-exponential forms away from it, which keeps every
entry accurate through the critical-damping crossover and avoids cosh/sinh
overflow for strongly overdamped modes.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

from .model import Model

__all__ = [
    "Regime",
    "classify_mode",
    "mode_generator",
    "mode_propagator",
    "expm_oracle",
    "RMatrices",
    "r_matrices",
    "v_inner",
]

_SERIES_CUT = 1e-4
_SERIES_TERMS = 8


class Regime(enum.Enum):
    """Damping regime of a single mode."""

    OSCILLATORY = "oscillatory"
    OVERDAMPED = "overdamped"
    CRITICAL = "critical"


def classify_mode(a: float, b: float, kappa: float, tol: float = 1e-12) -> Regime:
    """Classify a mode by the sign of the discriminant b*kappa - a^2.

    The critical band has relative width ``tol`` measured against a^2.
    """
    if a <= 0 or b <= 0 or kappa <= 0:
        raise ValueError("classify_mode needs positive a, b, kappa")
    disc = b * kappa - a * a
    if abs(disc) <= tol * a * a:
        return Regime.CRITICAL
    return Regime.OSCILLATORY if disc > 0 else Regime.OVERDAMPED


def mode_generator(a: float, b: float, kappa: float) -> np.ndarray:
    """Drift matrix [[0, 1], [-b*kappa, -2a]] of one mode."""
    return np.array([[0.0, 1.0], [-b * kappa, -2.0 * a]])


def _ck_series(zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C(zeta) and K(zeta) by truncated power series, for |zeta| <= 1e-4."""
    c = np.zeros_like(zeta)
    k = np.zeros_like(zeta)
    term_c = np.ones_like(zeta)
    term_k = np.ones_like(zeta)
    for j in range(_SERIES_TERMS):
        c = c + term_c
        k = k + term_k
        term_c = term_c * (-zeta) / ((2 * j + 1) * (2 * j + 2))
        term_k = term_k * (-zeta) / ((2 * j + 2) * (2 * j + 3))
    return c, k


def mode_propagator(a: float, b: float, kappa, t) -> np.ndarray:
    """Closed-form exp(t * mode_generator(a, b, kappa)).

    ``kappa`` and ``t`` may be scalars or broadcastable arrays; the result
    has shape ``broadcast(kappa, t).shape + (2, 2)``.
    """
    if a <= 0 or b <= 0:
        raise ValueError("mode_propagator needs positive a and b")
    kappa_arr = np.asarray(kappa, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(kappa_arr <= 0):
        raise ValueError("kappa must be positive")
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite and non-negative")

    kappa_b, t_b = np.broadcast_arrays(kappa_arr, t_arr)
    shape = kappa_b.shape
    kappa_f = kappa_b.reshape(-1).astype(float)
    t_f = t_b.reshape(-1).astype(float)

    disc = b * kappa_f - a * a
    zeta = disc * t_f * t_f
    ec = np.empty_like(zeta)   # E * C
    etk = np.empty_like(zeta)  # E * t * K

    near = np.abs(zeta) <= _SERIES_CUT
    if np.any(near):
        e = np.exp(-a * t_f[near])
        c, k = _ck_series(zeta[near])
        ec[near] = e * c
        etk[near] = e * t_f[near] * k

    osc = zeta > _SERIES_CUT
    if np.any(osc):
        om = np.sqrt(disc[osc])
        wt = om * t_f[osc]
        e = np.exp(-a * t_f[osc])
        ec[osc] = e * np.cos(wt)
        etk[osc] = e * np.sin(wt) / om

    over = zeta < -_SERIES_CUT
    if np.any(over):
        gam = np.sqrt(-disc[over])
        e1 = np.exp((gam - a) * t_f[over])
        e2 = np.exp(-(gam + a) * t_f[over])
        ec[over] = 0.5 * (e1 + e2)
        etk[over] = (e1 - e2) / (2.0 * gam)

    out = np.empty(zeta.shape + (2, 2))
    out[:, 0, 0] = ec + a * etk
    out[:, 0, 1] = etk
    out[:, 1, 0] = -b * kappa_f * etk
    out[:, 1, 1] = ec - a * etk
    return out.reshape(shape + (2, 2))


def expm_oracle(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(t m) by scaling-and-squaring Taylor summation.

    Independent of :func:`mode_propagator`; used to cross-check it. Accurate
    to about 1e-12 per entry for ||t m|| up to ~50.
    """
    a = np.asarray(m, dtype=float) * float(t)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm_oracle needs a square matrix")
    nrm = float(np.abs(a).sum(axis=1).max())
    s = max(0, math.ceil(math.log2(nrm / 0.25))) if nrm > 0.25 else 0
    a = a / (2.0**s)
    n = a.shape[0]
    result = np.eye(n)
    term = np.eye(n)
    for j in range(1, 40):
        term = term @ a / j
        result = result + term
        if float(np.abs(term).max()) < 1e-18 * float(np.abs(result).max()):
            break
    for _ in range(s):
        result = result @ result
    return result


class RMatrices(NamedTuple):
    """Weight matrices of the three quadratic path functionals of one mode.

    ``energy`` weights the full squared energy norm, ``kinetic`` isolates
    v^2, ``potential`` isolates kappa u^2; each drives a Lyapunov identity
    used by the contrast estimators.
    """

    energy: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray


def r_matrices(a: float, b: float, kappa: float) -> RMatrices:
    """Per-mode weight matrices, each self-adjoint in the energy inner product.

    With M the mode generator and <.,.> the kappa-weighted inner product:

      <energy x, M x>    = -(2ab/(b+1)) (kappa u^2 + v^2)
      <kinetic x, M x>   = -2a v^2
      <potential x, M x> = -2ab kappa u^2
    """
    if a <= 0 or b <= 0 or kappa <= 0:
        raise ValueError("r_matrices needs positive a, b, kappa")
    energy = np.array(
        [
            [b + 4.0 * a * a / ((b + 1.0) * kappa), 2.0 * a / ((b + 1.0) * kappa)],
            [2.0 * a / (b + 1.0), 1.0],
        ]
    )
    kinetic = np.array([[b, 0.0], [0.0, 1.0]])
    potential = np.array(
        [
            [b + 4.0 * a * a / kappa, 2.0 * a / kappa],
            [2.0 * a, 1.0],
        ]
    )
    return RMatrices(energy=energy, kinetic=kinetic, potential=potential)


def v_inner(x: np.ndarray, y: np.ndarray, model: Model) -> float:
    """Energy inner product sum_n kappa_n u_x u_y + v_x v_y.

    ``x`` and ``y`` are (N, 2) arrays of per-mode (u, v) coefficients.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = model.n_modes
    if x.shape != (n, 2) or y.shape != (n, 2):
        raise ValueError(f"states must have shape ({n}, 2)")
    return float(np.sum(model.kappa * x[:, 0] * y[:, 0]) + np.sum(x[:, 1] * y[:, 1]))
