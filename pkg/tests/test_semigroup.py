"""Per-mode propagator, generator, weight matrices, V inner product."""

import numpy as np
import pytest

from waveinfer import (
    Regime,
    builtin_preset,
    classify_mode,
    expm_oracle,
    mode_generator,
    mode_propagator,
    r_matrices,
    v_inner,
)

# (a, b, kappa) triples hitting all three regimes
REGIME_CASES = [
    (1.0, 0.2, 98.696),      # oscillatory, b*kappa >> a^2
    (1.0, 2.0, 3.0),         # oscillatory
    (3.0, 0.1, 2.0),         # overdamped, b*kappa < a^2
    (2.0, 0.5, 1.0),         # overdamped
    (1.0, 1.0, 1.0),         # critical, b*kappa = a^2
    (2.0, 2.0, 2.0),         # critical
    (1.0, 1.0, 1.0 + 1e-9),  # just inside the near-critical band
    (1.0, 1.0, 1.0 - 1e-9),
]


def test_classify_mode():
    assert classify_mode(1.0, 0.2, 98.7) is Regime.OSCILLATORY
    assert classify_mode(3.0, 0.1, 2.0) is Regime.OVERDAMPED
    assert classify_mode(1.0, 1.0, 1.0) is Regime.CRITICAL
    assert classify_mode(1.0, 1.0, 1.0 + 1e-14) is Regime.CRITICAL
    assert classify_mode(1.0, 1.0, 2.0, tol=1e-12) is Regime.OSCILLATORY
    with pytest.raises(ValueError):
        classify_mode(0.0, 1.0, 1.0)


def test_generator_shape_and_values():
    m = mode_generator(1.0, 0.2, 9.0)
    assert np.array_equal(m, np.array([[0.0, 1.0], [-1.8, -2.0]]))


def test_propagator_at_zero_is_identity():
    for a, b, kappa in REGIME_CASES:
        p = mode_propagator(a, b, kappa, 0.0)
        assert np.abs(p - np.eye(2)).max() < 1e-15


def test_propagator_matches_expm_oracle():
    for a, b, kappa in REGIME_CASES:
        gen = mode_generator(a, b, kappa)
        for t in (1e-4, 0.02, 0.3, 1.0, 4.0):
            p = mode_propagator(a, b, kappa, t)
            ref = expm_oracle(gen, t)
            scale = max(np.abs(ref).max(), 1e-30)
            assert np.abs(p - ref).max() <= 1e-10 * max(scale, 1.0), (a, b, kappa, t)


def test_propagator_semigroup_law():
    grid = (0.01, 0.1, 1.0, 3.0, 10.0)
    for a, b, kappa in REGIME_CASES:
        for t in grid:
            for s in grid:
                left = mode_propagator(a, b, kappa, t + s)
                right = mode_propagator(a, b, kappa, t) @ mode_propagator(a, b, kappa, s)
                assert np.abs(left - right).max() < 1e-10, (a, b, kappa, t, s)


def test_propagator_broadcasting():
    kappa = np.array([1.0, 4.0, 9.0])
    t = np.array([[0.1], [0.5]])
    p = mode_propagator(1.0, 0.5, kappa, t)
    assert p.shape == (2, 3, 2, 2)
    single = mode_propagator(1.0, 0.5, 4.0, 0.5)
    assert np.abs(p[1, 1] - single).max() < 1e-15


def test_propagator_input_validation():
    with pytest.raises(ValueError):
        mode_propagator(1.0, 0.5, 1.0, -0.1)
    with pytest.raises(ValueError):
        mode_propagator(1.0, 0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        mode_propagator(-1.0, 0.5, 1.0, 1.0)


def test_generator_consistency():
    """(P(h) - I)/h converges to the generator at first order in h."""
    for a, b, kappa in ((1.0, 0.2, 40.0), (3.0, 0.1, 2.0), (1.0, 1.0, 1.0)):
        gen = mode_generator(a, b, kappa)
        errs = []
        for h in (1e-3, 5e-4, 2.5e-4):
            approx = (mode_propagator(a, b, kappa, h) - np.eye(2)) / h
            errs.append(np.abs(approx - gen).max())
        assert errs[0] < 0.1 * max(np.abs(gen).max(), 1.0)
        assert 1.7 < errs[0] / errs[1] < 2.3
        assert 1.7 < errs[1] / errs[2] < 2.3


def test_exponential_stability():
    for a, b, kappa in REGIME_CASES:
        eigs = np.linalg.eigvals(mode_generator(a, b, kappa))
        abscissa = eigs.real.max()
        disc = b * kappa - a * a
        if disc >= 0:
            assert abs(abscissa + a) < 1e-9
        else:
            gamma = np.sqrt(-disc)
            assert abs(abscissa + a - gamma) < 1e-9
            assert abscissa < 0
        # decay at the spectral rate, allowing the polynomial critical factor
        late = np.abs(mode_propagator(a, b, kappa, 50.0)).max()
        envelope = (1.0 + max(1.0, a, b * kappa) * 50.0) * np.exp(abscissa * 50.0)
        assert late <= 10.0 * envelope
        assert late < np.abs(mode_propagator(a, b, kappa, 25.0)).max()


def test_expm_oracle_basics():
    assert np.array_equal(expm_oracle(np.zeros((2, 2)), 5.0), np.eye(2))
    m = np.array([[0.0, 1.0], [-1.0, -2.0]])
    assert np.abs(expm_oracle(m, 1.0) - mode_propagator(1.0, 1.0, 1.0, 1.0)).max() < 1e-12
    two = expm_oracle(m, 2.0)
    squared = expm_oracle(m, 1.0) @ expm_oracle(m, 1.0)
    assert np.abs(two - squared).max() < 1e-12
    with pytest.raises(ValueError):
        expm_oracle(np.zeros((2, 3)))


def test_r_matrices_closed_forms():
    r = r_matrices(3.0, 0.5, 9.0)
    assert np.array_equal(r.kinetic, np.array([[0.5, 0.0], [0.0, 1.0]]))

    r = r_matrices(1.0, 1.0, 2.0)
    assert np.abs(r.energy - np.array([[2.0, 0.5], [1.0, 1.0]])).max() < 1e-15

    rng = np.random.default_rng(3)
    for _ in range(10):
        a = float(rng.uniform(0.1, 3.0))
        b = float(rng.uniform(0.1, 3.0))
        kappa = float(rng.uniform(0.5, 40.0))
        r = r_matrices(a, b, kappa)
        diff = r.potential - r.kinetic
        want = np.array([[4 * a * a / kappa, 2 * a / kappa], [2 * a, 0.0]])
        assert np.abs(diff - want).max() < 1e-12


def _v_form(x, y, kappa):
    return float(kappa * x[0] * y[0] + x[1] * y[1])


def test_r_matrices_v_selfadjoint():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a = float(rng.uniform(0.1, 3.0))
        b = float(rng.uniform(0.1, 3.0))
        kappa = float(rng.uniform(0.5, 40.0))
        x = rng.normal(size=2)
        y = rng.normal(size=2)
        for r in r_matrices(a, b, kappa):
            lhs = _v_form(r @ x, y, kappa)
            rhs = _v_form(x, r @ y, kappa)
            assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)


def test_lyapunov_drift_identities():
    """The three weight matrices turn the drift into the target quadratics."""
    rng = np.random.default_rng(23)
    for _ in range(100):
        a = float(rng.uniform(0.1, 3.0))
        b = float(rng.uniform(0.1, 3.0))
        kappa = float(rng.uniform(0.5, 40.0))
        u, v = rng.normal(size=2) * 3.0
        x = np.array([u, v])
        mx = mode_generator(a, b, kappa) @ x
        r = r_matrices(a, b, kappa)
        norm_sq = kappa * u * u + v * v

        got = _v_form(r.energy @ x, mx, kappa)
        want = -(2 * a * b / (b + 1.0)) * norm_sq
        assert abs(got - want) <= 1e-10 * max(abs(want), 1.0)

        got = _v_form(r.kinetic @ x, mx, kappa)
        assert abs(got + 2 * a * v * v) <= 1e-10 * max(abs(2 * a * v * v), 1.0)

        got = _v_form(r.potential @ x, mx, kappa)
        want = -2 * a * b * kappa * u * u
        assert abs(got - want) <= 1e-10 * max(abs(want), 1.0)


def test_v_inner():
    m1 = builtin_preset("wave", 1, 1.0, 1.0, lambda_rule=[1.0])
    x = np.array([[1.0, 0.0]])
    scaled = v_inner(x, x, m1) / m1.kappa[0]
    assert abs(scaled - 1.0) < 1e-15

    xv = np.array([[0.0, 3.0]])
    yv = np.array([[0.0, 2.0]])
    assert abs(v_inner(xv, yv, m1) - 6.0) < 1e-15

    m3 = builtin_preset("wave", 3, 1.0, 0.2)
    rng = np.random.default_rng(5)
    x3 = rng.normal(size=(3, 2))
    y3 = rng.normal(size=(3, 2))
    total = v_inner(x3, y3, m3)
    per_mode = 0.0
    for n in range(3):
        per_mode += m3.kappa[n] * x3[n, 0] * y3[n, 0] + x3[n, 1] * y3[n, 1]
    assert abs(total - per_mode) < 1e-12

    with pytest.raises(ValueError):
        v_inner(x3[:2], y3, m3)


def test_series_kernel_continuity_at_regime_boundary():
    """Sweep kappa through the critical point; entries must vary smoothly."""
    a, b, t = 1.0, 1.0, 0.7
    kappas = 1.0 + np.linspace(-1e-6, 1e-6, 41)
    props = mode_propagator(a, b, kappas, t)
    steps = np.abs(np.diff(props, axis=0)).max(axis=(1, 2))
    assert steps.max() < 1e-6
