"""Problem configuration: mode spectrum, noise covariance, initial state.

A :class:`Model` fixes everything the simulator and the estimators need to
know about the truncated system: the damping coefficient ``a``, the stiffness
multiplier ``b``, the per-mode stiffness eigenvalues ``kappa`` (which double
as the weights of the energy inner product), the noise covariance matrix in
the mode basis, and the initial coefficients.

Two presets cover the standard examples on the unit interval with Dirichlet
boundary conditions:

* ``wave``:  kappa_n = n^2 pi^2
* ``plate``: kappa_n = n^4 pi^4

Both presets use a diagonal noise covariance with entries lambda_n and the
default rule lambda_n = 1000/n^2, and start every mode at (u_n, v_n) = (1, 1).

Config files (JSON or TOML) are parsed strictly. Recognized keys:

==========  =============================================================
key         meaning
==========  =============================================================
a           damping coefficient, positive real
b           stiffness multiplier, positive real
N           number of modes, positive integer
preset      "wave" or "plate" (mutually exclusive with kappa)
kappa       explicit list of N strictly increasing positive eigenvalues
lambda      list of N diagonal noise intensities (>= 0)
q_matrix    full N x N symmetric PSD noise covariance (nested lists)
x0          list of N pairs [u_n, v_n] (default: all ones)
dt          simulation step size
T           simulation horizon
seed        master seed, non-negative integer
scheme      "euler" or "exact"
==========  =============================================================

Anything else is rejected with :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = [
    "ConfigError",
    "Model",
    "builtin_preset",
    "trace_q",
    "load_config",
    "model_from_config",
    "MODEL_KEYS",
    "RUN_KEYS",
]

_SYMMETRY_TOL = 1e-12
_PSD_TOL = 1e-10


class ConfigError(ValueError):
    """Invalid model parameters or malformed configuration input."""


@dataclass(frozen=True)
class Model:
    """Immutable truncated model definition.

    Attributes
    ----------
    a : float
        Damping coefficient, > 0.
    b : float
        Stiffness multiplier, > 0.
    kappa : ndarray, shape (N,)
        Strictly increasing positive per-mode stiffness eigenvalues. Also
        the weights of the energy inner product (see ``semigroup.v_inner``).
    q_matrix : ndarray, shape (N, N)
        Symmetric PSD noise covariance in the mode basis.
    x0 : ndarray, shape (N, 2)
        Initial (u_n, v_n) coefficients per mode.
    """

    a: float
    b: float
    kappa: np.ndarray
    q_matrix: np.ndarray
    x0: np.ndarray
    _diagonal: bool = field(init=False, repr=False, compare=False, default=False)

    def __post_init__(self) -> None:
        a = float(self.a)
        b = float(self.b)
        if not (math.isfinite(a) and a > 0):
            raise ConfigError(f"damping coefficient a must be positive, got {self.a!r}")
        if not (math.isfinite(b) and b > 0):
            raise ConfigError(f"stiffness multiplier b must be positive, got {self.b!r}")

        kappa = np.asarray(self.kappa, dtype=float).reshape(-1)
        if kappa.size == 0:
            raise ConfigError("at least one mode is required")
        if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
            raise ConfigError("kappa entries must be finite and positive")
        if np.any(np.diff(kappa) <= 0):
            raise ConfigError("kappa must be strictly increasing")
        n = kappa.size

        q = np.asarray(self.q_matrix, dtype=float)
        if q.shape != (n, n):
            raise ConfigError(f"q_matrix must be {n}x{n}, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ConfigError("q_matrix entries must be finite")
        scale = max(np.abs(q).max(), 1.0)
        if np.abs(q - q.T).max() > _SYMMETRY_TOL * scale:
            raise ConfigError("q_matrix must be symmetric (tolerance 1e-12)")
        q = 0.5 * (q + q.T)
        tr = float(np.trace(q))
        if tr < 0 or not math.isfinite(tr):
            raise ConfigError("trace of q_matrix must be finite and non-negative")
        if tr > 0:
            min_eig = float(np.linalg.eigvalsh(q)[0])
            if min_eig < -_PSD_TOL * tr:
                raise ConfigError(
                    f"q_matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})"
                )

        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n, 2):
            raise ConfigError(f"x0 must have shape ({n}, 2), got {x0.shape}")
        if not np.all(np.isfinite(x0)):
            raise ConfigError("x0 entries must be finite")

        diagonal = bool(np.count_nonzero(q - np.diag(np.diag(q))) == 0)
        for name, value in (
            ("a", a),
            ("b", b),
            ("kappa", kappa),
            ("q_matrix", q),
            ("x0", x0),
            ("_diagonal", diagonal),
        ):
            object.__setattr__(self, name, value)
        for arr in (self.kappa, self.q_matrix, self.x0):
            arr.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return self.kappa.size

    @property
    def is_diagonal(self) -> bool:
        """True when the noise covariance is diagonal in the mode basis."""
        return self._diagonal

    @property
    def lam(self) -> np.ndarray:
        """Diagonal noise intensities lambda_n (the q_matrix diagonal)."""
        return np.diag(self.q_matrix)

    def describe(self) -> dict:
        """JSON-friendly echo of the model, used in reports."""
        out: dict = {
            "a": self.a,
            "b": self.b,
            "N": int(self.n_modes),
            "kappa": self.kappa.tolist(),
            "x0": self.x0.tolist(),
        }
        if self.is_diagonal:
            out["lambda"] = self.lam.tolist()
        else:
            out["q_matrix"] = self.q_matrix.tolist()
        return out


def builtin_preset(
    kind: str,
    n: int,
    a: float,
    b: float,
    lambda_rule: Callable[[int], float] | Sequence[float] | None = None,
) -> Model:
    """Build a preset model on the unit interval with Dirichlet conditions.

    Parameters
    ----------
    kind : {"wave", "plate"}
        Spectrum family: kappa_n = n^2 pi^2 (wave) or n^4 pi^4 (plate).
    n : int
        Number of retained modes, >= 1.
    a, b : float
        Damping coefficient and stiffness multiplier, both > 0.
    lambda_rule : callable, sequence, or None
        Per-mode noise intensity. A callable receives the 1-based mode index;
        a sequence must have length ``n``. Default: lambda_n = 1000/n^2.

    Returns
    -------
    Model
        Diagonal-noise model with x0 = (1, 1) in every mode.
    """
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"number of modes must be a positive integer, got {n!r}")
    idx = np.arange(1, n + 1, dtype=float)
    if kind == "wave":
        kappa = idx**2 * math.pi**2
    elif kind == "plate":
        kappa = idx**4 * math.pi**4
    else:
        raise ConfigError(f"unknown preset {kind!r} (expected 'wave' or 'plate')")

    if lambda_rule is None:
        lam = 1000.0 / idx**2
    elif callable(lambda_rule):
        lam = np.array([float(lambda_rule(k)) for k in range(1, n + 1)])
    else:
        lam = np.asarray(list(lambda_rule), dtype=float)
        if lam.shape != (n,):
            raise ConfigError(f"lambda list must have length {n}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ConfigError("lambda entries must be finite and non-negative")

    x0 = np.ones((n, 2))
    return Model(a=float(a), b=float(b), kappa=kappa, q_matrix=np.diag(lam), x0=x0)


def trace_q(model: Model) -> float:
    """Truncated trace of the noise covariance, sum of q_matrix[n][n]."""
    return float(np.trace(model.q_matrix))


MODEL_KEYS = frozenset({"a", "b", "N", "preset", "kappa", "lambda", "q_matrix", "x0"})
RUN_KEYS = frozenset({"dt", "T", "seed", "scheme"})


def load_config(path: str | Path) -> dict:
    """Read a JSON or TOML config file and validate its key set."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            cfg = tomllib.loads(raw.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    elif path.suffix.lower() == ".json":
        try:
            cfg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    else:
        raise ConfigError(f"unsupported config extension {path.suffix!r} (use .json or .toml)")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(cfg) - MODEL_KEYS - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def model_from_config(cfg: dict) -> tuple[Model, dict]:
    """Build a Model from a validated config mapping.

    Returns the model and the remaining run parameters (dt, T, seed, scheme)
    that the caller layers onto its own defaults.
    """
    unknown = set(cfg) - MODEL_KEYS - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    run = {k: cfg[k] for k in RUN_KEYS if k in cfg}

    if "a" not in cfg or "b" not in cfg:
        raise ConfigError("config must set both a and b")
    a, b = cfg["a"], cfg["b"]

    has_preset = "preset" in cfg
    has_kappa = "kappa" in cfg
    if has_preset == has_kappa:
        raise ConfigError("config must set exactly one of 'preset' or 'kappa'")

    if "lambda" in cfg and "q_matrix" in cfg:
        raise ConfigError("config may set 'lambda' or 'q_matrix', not both")

    if has_preset:
        if "N" not in cfg:
            raise ConfigError("preset configs must set N")
        n = cfg["N"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ConfigError(f"N must be a positive integer, got {n!r}")
        if "q_matrix" in cfg:
            idx = np.arange(1, n + 1, dtype=float)
            kappa = idx**2 * math.pi**2 if cfg["preset"] == "wave" else idx**4 * math.pi**4
            if cfg["preset"] not in ("wave", "plate"):
                raise ConfigError(f"unknown preset {cfg['preset']!r}")
            model = Model(a=a, b=b, kappa=kappa, q_matrix=np.asarray(cfg["q_matrix"], float),
                          x0=_x0_from(cfg, n))
        else:
            model = builtin_preset(cfg["preset"], n, a, b, cfg.get("lambda"))
            if "x0" in cfg:
                model = Model(a=model.a, b=model.b, kappa=model.kappa,
                              q_matrix=model.q_matrix, x0=_x0_from(cfg, n))
    else:
        kappa = np.asarray(cfg["kappa"], dtype=float).reshape(-1)
        n = kappa.size
        if "N" in cfg and cfg["N"] != n:
            raise ConfigError(f"N={cfg['N']} contradicts kappa of length {n}")
        if "q_matrix" in cfg:
            q = np.asarray(cfg["q_matrix"], dtype=float)
        elif "lambda" in cfg:
            lam = np.asarray(cfg["lambda"], dtype=float).reshape(-1)
            if lam.size != n:
                raise ConfigError(f"lambda list must have length {n}")
            q = np.diag(lam)
        else:
            raise ConfigError("explicit-kappa configs must set 'lambda' or 'q_matrix'")
        model = Model(a=a, b=b, kappa=kappa, q_matrix=q, x0=_x0_from(cfg, n))

    return model, run


def _x0_from(cfg: dict, n: int) -> np.ndarray:
    if "x0" not in cfg:
        return np.ones((n, 2))
    x0 = np.asarray(cfg["x0"], dtype=float)
    if x0.shape != (n, 2):
        raise ConfigError(f"x0 must be a list of {n} [u, v] pairs")
    return x0
