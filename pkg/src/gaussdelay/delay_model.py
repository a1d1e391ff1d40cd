"""Linear delay SDE model, initial histories and the shared time grid.

The model is the Ito delay SDE

    dX_t = (a + B X_t + C X_{t - tau}) dt + epsilon * Sigma dW_t,
    X_t  = gamma(t)  for t in [-tau, 0].
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, ParameterError, RankError

# Sigma is "full rank" when s_min > RANK_RTOL * s_max.
RANK_RTOL = 1e-10


def _frozen(x, ndim):
    arr = np.array(x, dtype=float)
    if arr.ndim == 0 and ndim == 1:
        arr = arr.reshape(1)
    elif arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DelayModel:
    """Coefficients of a linear delay SDE.

    Construction only coerces inputs to float arrays; use
    `validate_model` for a diagnostic report. Solvers reject invalid
    models with `ParameterError`.
    """

    a: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Sigma: np.ndarray
    tau: float
    epsilon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, 1))
        object.__setattr__(self, "B", _frozen(self.B, 2))
        object.__setattr__(self, "C", _frozen(self.C, 2))
        object.__setattr__(self, "Sigma", _frozen(self.Sigma, 2))
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def dim(self):
        return self.a.shape[0]

    @classmethod
    def centered(cls, B, C, Sigma, tau, epsilon=1.0):
        """Model with zero drift offset."""
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return cls(np.zeros(B.shape[0]), B, C, Sigma, tau, epsilon)

    def with_epsilon(self, epsilon):
        return DelayModel(self.a, self.B, self.C, self.Sigma, self.tau, epsilon)

    def singular_values(self):
        return np.linalg.svd(self.Sigma, compute_uv=False)

    def require_valid(self):
        errors = _model_errors(self)
        if errors:
            raise ParameterError("invalid delay model: " + "; ".join(errors))

    def require_full_rank(self):
        sv = self.singular_values()
        if sv.size == 0 or not sv[-1] > RANK_RTOL * sv[0]:
            raise RankError(
                "diffusion matrix Sigma is rank deficient "
                f"(smallest singular value {sv[-1] if sv.size else 0.0:.3e})"
            )


class HistoryPath:
    """Piecewise-linear initial history on [-tau, 0].

    Parameters
    ----------
    times : array_like, shape (n,)
        Strictly increasing sample times; the first should be -tau and the
        last 0.
    values : array_like, shape (n, d)
        State at each sample time.
    """

    def __init__(self, times, values):
        times = np.array(times, dtype=float).ravel()
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1) if times.size > 1 else values.reshape(1, -1)
        if values.shape[0] != times.size:
            raise ParameterError(
                f"history has {times.size} times but {values.shape[0]} state samples"
            )
        if times.size == 0:
            raise ParameterError("history needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("history sample times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        self.times = times
        self.values = values

    @classmethod
    def constant(cls, value, tau):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([-float(tau), 0.0], np.vstack([value, value]))

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def start(self):
        """Process start point gamma(0)."""
        return self.values[-1].copy()

    def is_constant(self):
        return bool(np.all(self.values == self.values[0]))

    def __call__(self, t):
        return eval_history(self, t)

    def shifted(self, offset):
        """History with `offset` subtracted from every state sample."""
        return HistoryPath(self.times, self.values - np.asarray(offset, dtype=float))

    def __repr__(self):
        return f"HistoryPath(n={self.times.size}, span=[{self.times[0]:g}, {self.times[-1]:g}], d={self.dim})"


def eval_history(history, t):
    """Evaluate the interpolated history at a time (or array of times) in [-tau, 0].

    Returns an array of shape (d,) for scalar `t`, (len(t), d) otherwise.
    """
    t_arr = np.asarray(t, dtype=float)
    lo, hi = history.times[0], history.times[-1]
    slack = 1e-12 * max(1.0, abs(lo))
    if np.any(t_arr < lo - slack) or np.any(t_arr > hi + slack):
        raise DomainError(f"history evaluated outside [{lo:g}, {hi:g}]")
    tc = np.clip(t_arr, lo, hi)
    if history.times.size == 1:
        out = np.broadcast_to(history.values[0], tc.shape + (history.dim,)).copy()
        return out
    cols = [np.interp(tc, history.times, history.values[:, i]) for i in range(history.dim)]
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j * tau / N, j = 0..M, with M = N (1 + floor(T / tau)).

    Index 0 (t = 0) is stored in addition to the points j = 1..M so that
    paths start at their initial values. The grid may overhang T.
    """

    tau: float
    T: float
    N: int
    M: int = field(init=False)

    def __post_init__(self):
        # guard floor() against T/tau landing a hair under an integer
        intervals = math.floor(self.T / self.tau + 1e-9)
        object.__setattr__(self, "M", self.N * (1 + intervals))

    @property
    def delta(self):
        return self.tau / self.N

    @property
    def points(self):
        """All grid times including t_0 = 0, shape (M + 1,)."""
        return np.arange(self.M + 1) * self.delta

    @property
    def end(self):
        return self.M * self.delta

    def index(self, t):
        """Index of grid time `t`; raises if `t` is not on the grid."""
        x = float(t) / self.delta
        j = int(round(x))
        if abs(x - j) > 1e-6 or j < 0 or j > self.M:
            raise ParameterError(f"t={t!r} is not a point of the grid (delta={self.delta:g}, end={self.end:g})")
        return j

    def nearest_index(self, t):
        j = int(round(float(t) / self.delta))
        if j < 0 or j > self.M:
            raise ParameterError(f"t={t!r} outside grid [0, {self.end:g}]")
        return j

    def horizon_index(self, T=None):
        """Largest index with t_j <= T (defaults to the requested horizon)."""
        T = self.T if T is None else T
        return min(self.M, int(math.floor(float(T) / self.delta + 1e-9)))


def build_grid(tau, T, N):
    if not T > 0:
        raise ParameterError(f"horizon T must be positive, got {T!r}")
    if not tau > 0:
        raise ParameterError(f"delay tau must be positive, got {tau!r}")
    if int(N) != N or N < 2:
        raise ParameterError(f"N must be an integer >= 2, got {N!r}")
    return TimeGrid(float(tau), float(T), int(N))


@dataclass
class ValidationReport:
    errors: list
    full_rank: bool
    smallest_singular_value: float
    largest_singular_value: float
    history_covers: bool

    @property
    def valid(self):
        return not self.errors

    def __str__(self):
        lines = [f"valid: {self.valid}", f"Sigma full rank: {self.full_rank} "
                 f"(s_min={self.smallest_singular_value:.3e}, s_max={self.largest_singular_value:.3e})"]
        lines += [f"error: {e}" for e in self.errors]
        return "\n".join(lines)


def _model_errors(model):
    errors = []
    d = model.a.shape[0]
    for name in ("B", "C", "Sigma"):
        shape = getattr(model, name).shape
        if shape != (d, d):
            errors.append(f"{name} has shape {shape}, expected ({d}, {d})")
    if not model.tau > 0 or not math.isfinite(model.tau):
        errors.append(f"tau must be positive, got {model.tau!r}")
    if not model.epsilon >= 0:
        errors.append(f"epsilon must be >= 0, got {model.epsilon!r}")
    for name in ("a", "B", "C", "Sigma"):
        if not np.all(np.isfinite(getattr(model, name))):
            errors.append(f"{name} has non-finite entries")
    return errors


def validate_model(model, history):
    """Diagnose a model/history pair without raising."""
    errors = _model_errors(model)
    if history.dim != model.dim:
        errors.append(f"history dimension {history.dim} != model dimension {model.dim}")
    tol = 1e-9 * max(1.0, model.tau)
    covers = abs(history.times[0] + model.tau) <= tol and abs(history.times[-1]) <= tol
    if not covers:
        errors.append(
            f"history covers [{history.times[0]:g}, {history.times[-1]:g}], expected [-{model.tau:g}, 0]"
        )
    try:
        sv = model.singular_values()
    except np.linalg.LinAlgError:
        sv = np.array([0.0])
    s_max = float(sv[0]) if sv.size else 0.0
    s_min = float(sv[-1]) if sv.size else 0.0
    full_rank = s_max > 0 and s_min > RANK_RTOL * s_max
    return ValidationReport(errors, full_rank, s_min, s_max, covers)


def require_compatible(model, history):
    report = validate_model(model, history)
    if not report.valid:
        raise ParameterError("; ".join(report.errors))
