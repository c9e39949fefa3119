"""Model validation, presets, and strict config parsing."""

import json
import math

import numpy as np
import pytest

from waveinfer import (
    ConfigError,
    Model,
    builtin_preset,
    load_config,
    model_from_config,
    trace_q,
)


def test_wave_preset_setup():
    m = builtin_preset("wave", 10, 1.0, 0.2)
    assert m.n_modes == 10
    assert abs(m.kappa[0] - math.pi**2) < 1e-12
    assert abs(m.kappa[0] - 9.8696) < 5e-5
    assert m.lam[0] == 1000.0
    assert m.is_diagonal
    assert np.all(m.x0 == 1.0)
    assert abs(trace_q(m) - 1549.7677311665407) < 1e-9


def test_plate_preset_kappa():
    m = builtin_preset("plate", 3, 1.0, 0.2, lambda_rule=lambda n: 1.0 / n**2)
    assert abs(m.kappa[1] - 16.0 * math.pi**4) < 1e-9
    assert abs(m.lam[2] - 1.0 / 9.0) < 1e-15


def test_noise_free_single_oscillator():
    m = builtin_preset("wave", 1, 1.0, 1.0, lambda_rule=[0.0])
    assert trace_q(m) == 0.0
    assert m.q_matrix.shape == (1, 1)


def test_trace_q_simple_cases():
    m = builtin_preset("wave", 1, 1.0, 1.0, lambda_rule=[7.0])
    assert trace_q(m) == 7.0
    zero = builtin_preset("wave", 4, 0.5, 2.0, lambda_rule=[0.0] * 4)
    assert trace_q(zero) == 0.0


def test_trace_q_rotation_invariant():
    """Trace is basis-free: conjugate q by random rotations and compare."""
    rng = np.random.default_rng(7)
    for n in (2, 3, 5):
        lam = rng.uniform(0.5, 3.0, size=n)
        kappa = np.sort(rng.uniform(1.0, 50.0, size=n))
        while np.any(np.diff(kappa) <= 0):
            kappa = np.sort(rng.uniform(1.0, 50.0, size=n))
        q = np.diag(lam)
        base = Model(a=1.0, b=0.5, kappa=kappa, q_matrix=q, x0=np.zeros((n, 2)))
        for _ in range(5):
            w = rng.normal(size=(n, n))
            u, _ = np.linalg.qr(w)
            rotated = Model(a=1.0, b=0.5, kappa=kappa, q_matrix=u @ q @ u.T,
                            x0=np.zeros((n, 2)))
            assert abs(trace_q(rotated) - trace_q(base)) < 1e-10 * trace_q(base)


def test_presets_pass_model_invariants():
    rng = np.random.default_rng(11)
    for kind in ("wave", "plate"):
        for n in (1, 3, 12):
            a = float(rng.uniform(0.1, 4.0))
            b = float(rng.uniform(0.1, 4.0))
            m = builtin_preset(kind, n, a, b)
            assert np.all(np.diff(m.kappa) > 0)
            assert np.all(m.kappa > 0)
            assert np.all(m.lam >= 0)
            assert m.x0.shape == (n, 2)


def test_model_rejects_bad_parameters():
    kappa = np.array([1.0, 2.0])
    q = np.eye(2)
    x0 = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        Model(a=0.0, b=1.0, kappa=kappa, q_matrix=q, x0=x0)
    with pytest.raises(ConfigError):
        Model(a=1.0, b=-0.5, kappa=kappa, q_matrix=q, x0=x0)
    with pytest.raises(ConfigError):
        Model(a=math.nan, b=1.0, kappa=kappa, q_matrix=q, x0=x0)
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=np.array([2.0, 1.0]), q_matrix=q, x0=x0)
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=np.array([-1.0, 2.0]), q_matrix=q, x0=x0)
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=np.array([1.0, 1.0]), q_matrix=q, x0=x0)


def test_model_rejects_bad_noise_matrix():
    kappa = np.array([1.0, 2.0])
    x0 = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=kappa, q_matrix=np.eye(3), x0=x0)
    asym = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=kappa, q_matrix=asym, x0=x0)
    indefinite = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=kappa, q_matrix=indefinite, x0=x0)


def test_model_rejects_bad_x0():
    kappa = np.array([1.0, 2.0])
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=kappa, q_matrix=np.eye(2), x0=np.zeros((3, 2)))
    with pytest.raises(ConfigError):
        Model(a=1.0, b=1.0, kappa=kappa, q_matrix=np.eye(2),
              x0=np.full((2, 2), math.inf))


def test_model_is_immutable():
    m = builtin_preset("wave", 3, 1.0, 0.2)
    with pytest.raises(Exception):
        m.a = 2.0
    with pytest.raises(ValueError):
        m.kappa[0] = 5.0
    with pytest.raises(ValueError):
        m.q_matrix[0, 0] = 5.0


def test_describe_echo():
    m = builtin_preset("wave", 2, 1.0, 0.2)
    d = m.describe()
    assert d["a"] == 1.0 and d["b"] == 0.2 and d["N"] == 2
    assert "lambda" in d and "q_matrix" not in d
    json.dumps(d)

    q = np.array([[2.0, 0.3], [0.3, 1.0]])
    full = Model(a=1.0, b=0.2, kappa=m.kappa, q_matrix=q, x0=np.ones((2, 2)))
    d2 = full.describe()
    assert "q_matrix" in d2 and "lambda" not in d2


def test_load_config_json(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({
        "a": 1.0, "b": 0.2, "N": 3, "preset": "wave",
        "dt": 0.01, "T": 2.0, "seed": 5, "scheme": "euler",
    }))
    cfg = load_config(cfg_path)
    model, run = model_from_config(cfg)
    assert model.n_modes == 3
    assert run == {"dt": 0.01, "T": 2.0, "seed": 5, "scheme": "euler"}


def test_load_config_toml(tmp_path):
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text(
        'a = 0.5\nb = 1.5\nkappa = [1.0, 4.0, 9.0]\n'
        '"lambda" = [1.0, 0.5, 0.25]\nT = 1.0\n'
    )
    model, run = model_from_config(load_config(cfg_path))
    assert model.n_modes == 3
    assert model.is_diagonal
    assert abs(model.lam[2] - 0.25) < 1e-15
    assert run == {"T": 1.0}


def test_load_config_rejects_unknown_key(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"a": 1.0, "b": 0.2, "N": 2,
                                    "preset": "wave", "gamma": 3}))
    with pytest.raises(ConfigError, match="gamma"):
        load_config(cfg_path)


def test_load_config_rejects_bad_extension(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("a: 1")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_config_source_exclusivity():
    with pytest.raises(ConfigError):
        model_from_config({"a": 1.0, "b": 0.2, "N": 2, "preset": "wave",
                           "kappa": [1.0, 2.0]})
    with pytest.raises(ConfigError):
        model_from_config({"a": 1.0, "b": 0.2, "N": 2})
    with pytest.raises(ConfigError):
        model_from_config({"a": 1.0, "b": 0.2, "preset": "wave", "N": 2,
                           "lambda": [1.0, 1.0], "q_matrix": [[1.0, 0.0], [0.0, 1.0]]})
    with pytest.raises(ConfigError):
        model_from_config({"b": 0.2, "N": 2, "preset": "wave"})


def test_config_n_mismatch_rejected():
    with pytest.raises(ConfigError):
        model_from_config({"a": 1.0, "b": 0.2, "N": 3, "kappa": [1.0, 2.0],
                           "lambda": [1.0, 1.0]})


def test_config_full_q_matrix_and_x0():
    cfg = {
        "a": 1.0, "b": 0.2, "kappa": [1.0, 4.0],
        "q_matrix": [[2.0, 0.5], [0.5, 1.0]],
        "x0": [[0.0, 1.0], [1.0, 0.0]],
    }
    model, run = model_from_config(cfg)
    assert not model.is_diagonal
    assert model.x0[0, 1] == 1.0
    assert run == {}
