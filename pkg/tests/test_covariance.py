"""Invariant covariance operator, traces, and asymptotic variances."""

import time

import numpy as np
import pytest

from waveinfer import (
    Model,
    asymptotic_variances,
    builtin_preset,
    clt_trace,
    diagonal_variance_shortcut,
    q_infinity_apply,
    q_infinity_dense,
    q_infinity_quadrature_oracle,
    trace_q,
    trace_q_infinity,
    v_inner,
)


def _random_model(rng, n, diagonal=True, mixed_regimes=False):
    a = float(rng.uniform(0.3, 2.5))
    b = float(rng.uniform(0.1, 2.0))
    if mixed_regimes:
        # kappa values straddling a^2/b so both regimes appear
        crit = a * a / b
        kappa = np.sort(rng.uniform(0.2 * crit, 5.0 * crit, size=n))
    else:
        kappa = np.sort(rng.uniform(0.5, 60.0, size=n))
    while np.any(np.diff(kappa) <= 0):
        kappa += np.arange(n) * 1e-6
    if diagonal:
        q = np.diag(rng.uniform(0.2, 3.0, size=n))
    else:
        w = rng.normal(size=(n, n))
        q = w @ w.T / n + 0.1 * np.eye(n)
    return Model(a=a, b=b, kappa=kappa, q_matrix=q, x0=np.zeros((n, 2)))


def test_diagonal_invariant_covariance():
    """Diagonal noise: the operator acts mode by mode with the known gains.

    In the energy coordinates the position gain is lambda/(4ab); the
    state-space position variance lambda/(4ab kappa) corresponds to the
    V-quadratic form kappa * E[u^2] = lambda/(4ab).
    """
    m = builtin_preset("wave", 4, 1.3, 0.6)
    a, b = m.a, m.b
    for k in range(4):
        basis = np.zeros((4, 2))
        basis[k, 0] = 1.0
        y = q_infinity_apply(m, basis)
        want = m.lam[k] / (4 * a * b)
        assert abs(y[k, 0] - want) < 1e-12 * want
        y[k, 0] = 0.0
        assert np.abs(y).max() < 1e-14

        basis[k, 0] = 0.0
        basis[k, 1] = 1.0
        y = q_infinity_apply(m, basis)
        want = m.lam[k] / (4 * a)
        assert abs(y[k, 1] - want) < 1e-12 * want
        y[k, 1] = 0.0
        assert np.abs(y).max() < 1e-14


def test_apply_is_v_selfadjoint_and_psd():
    rng = np.random.default_rng(31)
    for trial in range(20):
        m = _random_model(rng, 4, diagonal=(trial % 2 == 0))
        x = rng.normal(size=(4, 2))
        y = rng.normal(size=(4, 2))
        lhs = v_inner(q_infinity_apply(m, x), y, m)
        rhs = v_inner(x, q_infinity_apply(m, y), m)
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)
        quad = v_inner(q_infinity_apply(m, x), x, m)
        assert quad >= -1e-10 * abs(quad + 1.0)


def test_apply_shape_validation():
    m = builtin_preset("wave", 3, 1.0, 0.2)
    with pytest.raises(ValueError):
        q_infinity_apply(m, np.zeros((2, 2)))


def test_closed_form_vs_quadrature_oracle():
    """Double-sum formula against direct time integration, non-diagonal noise."""
    rng = np.random.default_rng(47)
    for n in (2, 3, 4):
        m = _random_model(rng, n, diagonal=False, mixed_regimes=True)
        x = rng.normal(size=(n, 2))
        closed = q_infinity_apply(m, x)
        quad = q_infinity_quadrature_oracle(m, x)
        assert quad.sufficient
        scale = np.abs(closed).max()
        assert np.abs(closed - quad.pairs).max() <= 1e-6 * scale


def test_trace_equals_dense_basis_sum():
    rng = np.random.default_rng(53)
    m = _random_model(rng, 5, diagonal=False)
    dense = q_infinity_dense(m)
    n = m.n_modes
    # columns are images of coordinate vectors; in V-orthonormal coordinates
    # the kappa weights cancel, so the V-trace is the plain diagonal sum
    position = float(np.sum(np.diag(dense)[:n]))
    velocity = float(np.sum(np.diag(dense)[n:]))
    split = trace_q_infinity(m)
    assert abs(position - split.position_part) < 1e-9 * split.position_part
    assert abs(velocity - split.velocity_part) < 1e-9 * split.velocity_part
    assert abs(split.total - (split.position_part + split.velocity_part)) < 1e-12 * split.total


def test_benchmark_trace_values():
    m = builtin_preset("wave", 10, 1.0, 0.2)
    split = trace_q_infinity(m)
    assert abs(split.total - 2324.652) < 1e-3
    assert abs(split.position_part - 1937.210) < 1e-3
    assert abs(split.velocity_part - 387.442) < 1e-3
    # full-precision anchors for regression detection
    assert abs(split.total - 2324.651596749811) < 1e-9
    assert abs(split.position_part - 1937.2096639581757) < 1e-9
    assert abs(split.velocity_part - 387.44193279163517) < 1e-9


def test_benchmark_variances():
    m = builtin_preset("wave", 10, 1.0, 0.2)
    start = time.perf_counter()
    vs = asymptotic_variances(m)
    elapsed = time.perf_counter() - start
    assert abs(vs.var_a_hat - 1.0465899751141226) < 1e-12
    assert abs(vs.var_b_hat - 0.06028358256657348) < 1e-12
    assert abs(vs.var_a_tilde - 0.45051444105159005) < 1e-12
    assert abs(vs.var_b_tilde - 0.03433395076200189) < 1e-12
    assert elapsed < 0.05


def test_clt_trace_tags():
    m = builtin_preset("wave", 10, 1.0, 0.2)
    assert abs(clt_trace(m, "energy") - 628419.7229882028) < 1e-6
    assert abs(clt_trace(m, "kinetic") - 270509.14587343915) < 1e-6
    assert abs(clt_trace(m, "potential") - 515391.23104525974) < 1e-6
    with pytest.raises(ValueError):
        clt_trace(m, "nonsense")


def test_diagonal_shortcut_matches_general_sums():
    rng = np.random.default_rng(59)
    for _ in range(20):
        m = _random_model(rng, 6, diagonal=True)
        full = asymptotic_variances(m)
        short = diagonal_variance_shortcut(m)
        for got, want in zip(short, full):
            assert abs(got - want) <= 1e-12 * abs(want)


def test_shortcut_rejects_non_diagonal():
    rng = np.random.default_rng(61)
    m = _random_model(rng, 3, diagonal=False)
    with pytest.raises(ValueError):
        diagonal_variance_shortcut(m)


def test_variances_reject_zero_trace():
    m = builtin_preset("wave", 2, 1.0, 0.2, lambda_rule=[0.0, 0.0])
    with pytest.raises(ValueError):
        asymptotic_variances(m)
    with pytest.raises(ValueError):
        diagonal_variance_shortcut(m)


def test_variance_comparison_inequalities():
    """The known-parameter family is never better: strict on 100 models."""
    rng = np.random.default_rng(67)
    for _ in range(100):
        m = _random_model(rng, int(rng.integers(1, 8)), diagonal=True)
        vs = asymptotic_variances(m)
        assert vs.var_a_tilde < vs.var_a_hat
        assert vs.var_b_tilde < vs.var_b_hat


def test_quadrature_tail_flag():
    m = builtin_preset("wave", 2, 1.0, 0.2)
    x = np.ones((2, 2))
    short = q_infinity_quadrature_oracle(m, x, t_max=1.0)
    assert not short.sufficient
    assert short.tail_bound > 1e-10
    full = q_infinity_quadrature_oracle(m, x)
    assert full.sufficient
