"""Minimum-contrast estimators built from ergodic path functionals.

Two families. The energy family needs one parameter known to recover the
other: a_hat from the total energy integral I_T when b is known, b_hat when
a is known. The split family recovers both at once from the potential part
Y_T (integral of kappa-weighted squared positions) and the kinetic part H_T
(integral of squared velocities):

    a_hat = (b+1) TrQ / (4 b I_T)      b_hat = TrQ / (4 a I_T - TrQ)
    a_tilde = TrQ / (4 H_T)            b_tilde = H_T / Y_T

TrQ is always the truncated N-mode noise trace of the model under study.
An estimator whose denominator degenerates is reported as an explicit
``None`` with a reason string, never as a sentinel number: the pole of
b_hat at 4 a I_T = TrQ is genuinely reachable on short paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

__all__ = [
    "EstimateSet",
    "estimate_hat",
    "estimate_tilde",
    "estimate_all",
    "running_estimates",
]


@dataclass(frozen=True)
class EstimateSet:
    """Estimator values with input echoes.

    Each estimator field is a float (positive whenever the noise trace
    is positive) or ``None``; when ``None``,
    ``reasons`` explains why under the same key (``"a_hat"`` etc.). Fields
    a family was never asked to produce stay ``None`` without a reason.
    """

    a_hat: float | None = None
    b_hat: float | None = None
    a_tilde: float | None = None
    b_tilde: float | None = None
    i_t: float | None = None
    y_t: float | None = None
    h_t: float | None = None
    tr_q: float | None = None
    known_a: float | None = None
    known_b: float | None = None
    reasons: dict = field(default_factory=dict)


def _hat_fields(i_t, tr_q, known_a, known_b):
    values: dict = {}
    reasons: dict = {}
    if i_t is None or not i_t > 0.0:
        if known_b is not None:
            reasons["a_hat"] = "energy integral I_T is not positive yet"
        if known_a is not None:
            reasons["b_hat"] = "energy integral I_T is not positive yet"
        return values, reasons
    if known_b is not None:
        values["a_hat"] = (known_b + 1.0) * tr_q / (4.0 * known_b * i_t)
    if known_a is not None:
        denom = 4.0 * known_a * i_t - tr_q
        if denom > 0.0:
            values["b_hat"] = tr_q / denom
        else:
            reasons["b_hat"] = "pole: 4*a*I_T <= TrQ"
    return values, reasons


def _tilde_fields(y_t, h_t, tr_q):
    values: dict = {}
    reasons: dict = {}
    if h_t is not None and h_t > 0.0:
        values["a_tilde"] = tr_q / (4.0 * h_t)
    else:
        reasons["a_tilde"] = "kinetic integral H_T is not positive yet"
    if y_t is not None and y_t > 0.0 and h_t is not None and h_t > 0.0:
        values["b_tilde"] = h_t / y_t
    else:
        reasons["b_tilde"] = "potential integral Y_T is not positive yet"
    return values, reasons


def estimate_hat(
    i_t: float,
    tr_q: float,
    known_a: float | None = None,
    known_b: float | None = None,
) -> EstimateSet:
    """Energy-family estimators from the total energy integral.

    ``a_hat`` is produced when ``known_b`` is given, ``b_hat`` when
    ``known_a`` is given; omitting both yields an empty set. ``b_hat`` is
    undefined (with reason) when 4 a I_T <= TrQ.
    """
    if not i_t > 0.0:
        raise ValueError(f"I_T must be positive, got {i_t!r}")
    if not tr_q >= 0.0:
        raise ValueError(f"TrQ must be non-negative, got {tr_q!r}")
    values, reasons = _hat_fields(i_t, tr_q, known_a, known_b)
    return EstimateSet(i_t=i_t, tr_q=tr_q, known_a=known_a, known_b=known_b,
                       reasons=reasons, **values)


def estimate_tilde(y_t: float, h_t: float, tr_q: float) -> EstimateSet:
    """Split-family estimators from the potential and kinetic integrals.

    Needs no known parameter. Zero or negative denominators give
    undefined markers.
    """
    if not tr_q >= 0.0:
        raise ValueError(f"TrQ must be non-negative, got {tr_q!r}")
    values, reasons = _tilde_fields(y_t, h_t, tr_q)
    return EstimateSet(y_t=y_t, h_t=h_t, tr_q=tr_q, reasons=reasons, **values)


def estimate_all(
    i_t: float,
    y_t: float,
    h_t: float,
    tr_q: float,
    known_a: float | None = None,
    known_b: float | None = None,
) -> EstimateSet:
    """Both families from one set of path functionals."""
    if not tr_q >= 0.0:
        raise ValueError(f"TrQ must be non-negative, got {tr_q!r}")
    hv, hr = _hat_fields(i_t, tr_q, known_a, known_b)
    tv, tr = _tilde_fields(y_t, h_t, tr_q)
    return EstimateSet(i_t=i_t, y_t=y_t, h_t=h_t, tr_q=tr_q,
                       known_a=known_a, known_b=known_b,
                       reasons={**hr, **tr}, **hv, **tv)


def running_estimates(
    stream: Iterable,
    tr_q: float,
    known_a: float | None = None,
    known_b: float | None = None,
) -> list[tuple[float, EstimateSet]]:
    """Estimator time series along a recorded trajectory.

    ``stream`` yields samples with attributes ``t``, ``i_t``, ``y_t``,
    ``h_t`` (or plain 4-tuples in that order). Returns (time, EstimateSet)
    pairs; early samples with degenerate integrals carry undefined markers
    instead of raising. Raises on an empty stream.
    """
    if not tr_q >= 0.0:
        raise ValueError(f"TrQ must be non-negative, got {tr_q!r}")
    out: list[tuple[float, EstimateSet]] = []
    last_t = None
    for sample in stream:
        if hasattr(sample, "i_t"):
            t, i_t, y_t, h_t = sample.t, sample.i_t, sample.y_t, sample.h_t
        else:
            t, i_t, y_t, h_t = sample
        if last_t is not None and t < last_t:
            raise ValueError("trajectory time stamps must be non-decreasing")
        last_t = t
        hv, hr = _hat_fields(i_t, tr_q, known_a, known_b)
        tv, tr = _tilde_fields(y_t, h_t, tr_q)
        out.append((float(t), EstimateSet(
            i_t=i_t, y_t=y_t, h_t=h_t, tr_q=tr_q,
            known_a=known_a, known_b=known_b,
            reasons={**hr, **tr}, **hv, **tv,
        )))
    if not out:
        raise ValueError("running_estimates needs a non-empty trajectory stream")
    return out
