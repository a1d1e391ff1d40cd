"""Linear noise approximation of nonlinear delay Langevin systems at fixed points.

A nonlinear model

    dx = f(x(t), x(t - tau)) dt + N^{-1/2} g(x(t), x(t - tau)) dW

is linearised around a stationary state z (f(z, z) = 0) into the
centered delay SDE with B = D1 f(z, z), C = D2 f(z, z), Sigma = g(z, z)
and epsilon = N^{-1/2}, written in local coordinates xi = x - z.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np

from .delay_model import DelayModel
from .errors import DomainError, NumericalError, ParameterError

log = logging.getLogger(__name__)

NEWTON_MAX_ITER = 200
RESIDUAL_TOL = 1e-10
DEDUP_DIST = 1e-6


@dataclass(frozen=True, eq=False)
class NonlinearDelayModel:
    """Drift and diffusion evaluators of a delay Langevin system.

    `jacobians`, when given, returns the closed-form (D1 f, D2 f) at
    (x, x_delayed); it is cross-checked against finite differences.
    `propensity`, when given, marks a chemical Langevin model whose
    diffusion is diag(sqrt(propensity)); simulators use it to clamp
    negative radicands instead of failing.
    """

    dim: int
    drift: object  # f(x, x_delayed) -> (d,)
    diffusion: object  # g(x, x_delayed) -> (d, n)
    tau: float
    system_size: float
    jacobians: object = None
    name: str = "custom"
    propensity: object = None

    @property
    def epsilon(self):
        return 1.0 / math.sqrt(self.system_size)


@dataclass(frozen=True)
class ToggleParams:
    beta: float = 0.73
    k: float = 0.05
    gamma_dil: float = math.log(2.0)
    tau: float = 1.0
    N: float = 1000.0

    def __post_init__(self):
        for name in ("beta", "k", "gamma_dil", "tau", "N"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"toggle parameter {name} must be positive")


@dataclass(frozen=True, eq=False)
class StationaryState:
    z: np.ndarray
    residual: float
    stability: str  # "stable", "saddle" or "unstable"
    zero_frequency_eigenvalues: np.ndarray

    @property
    def stable(self):
        return self.stability == "stable"


def toggle_model(params=None):
    """Co-repressive toggle switch as a chemical Langevin equation with delayed repression."""
    p = ToggleParams() if params is None else params
    beta, k, gam = p.beta, p.k, p.gamma_dil

    def production(u):
        return beta / (1.0 + u * u / k)

    # evaluators broadcast over leading axes: x, xd of shape (..., 2)
    def drift(x, xd):
        x = np.asarray(x, dtype=float)
        xd = np.asarray(xd, dtype=float)
        return np.stack(
            [production(xd[..., 1]) - gam * x[..., 0], production(xd[..., 0]) - gam * x[..., 1]],
            axis=-1,
        )

    def propensity(x, xd):
        x = np.asarray(x, dtype=float)
        xd = np.asarray(xd, dtype=float)
        return np.stack(
            [production(xd[..., 1]) + gam * x[..., 0], production(xd[..., 0]) + gam * x[..., 1]],
            axis=-1,
        )

    def diffusion(x, xd):
        rad = propensity(x, xd)
        if np.any(rad < 0):
            raise DomainError(f"negative propensity sum {rad}; the state left the physical region")
        root = np.sqrt(rad)
        return root[..., :, None] * np.eye(2)

    def jacobians(x, xd):
        xd = np.asarray(xd, dtype=float)

        def slope(u):
            return -2.0 * beta * u / (k * (1.0 + u * u / k) ** 2)

        D1 = -gam * np.eye(2)
        D2 = np.array([[0.0, slope(xd[1])], [slope(xd[0]), 0.0]])
        return D1, D2

    return NonlinearDelayModel(
        2, drift, diffusion, p.tau, p.N, jacobians, name="toggle", propensity=propensity
    )


def _fd_jacobians(model, x, xd):
    x = np.asarray(x, dtype=float)
    xd = np.asarray(xd, dtype=float)
    h = 1e-6 * (1.0 + max(np.linalg.norm(x), np.linalg.norm(xd)))
    d = model.dim
    D1 = np.empty((d, d))
    D2 = np.empty((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        D1[:, i] = (model.drift(x + e, xd) - model.drift(x - e, xd)) / (2 * h)
        D2[:, i] = (model.drift(x, xd + e) - model.drift(x, xd - e)) / (2 * h)
    return D1, D2


def _classify(model, z, B, C):
    """Zero-frequency eigenvalues of B + C, then a deterministic simulation check."""
    ev = np.linalg.eigvals(B + C)
    if np.any(ev.real > 0):
        return "saddle", ev
    # march the deterministic delay ODE from a small constant offset
    dt = model.tau / 200
    steps = int(40 * model.tau / dt)
    lag = 200
    offset = 1e-3 * (1.0 + np.linalg.norm(z))
    x = np.tile(z + offset / math.sqrt(model.dim), (lag + 1, 1))
    buf = list(x)
    for _ in range(steps):
        cur = buf[-1]
        buf.append(cur + dt * model.drift(cur, buf[-1 - lag]))
        if not np.all(np.isfinite(buf[-1])):
            return "unstable", ev
    final = np.linalg.norm(buf[-1] - z)
    return ("stable" if final < 0.5 * offset else "unstable"), ev


def _newton(model, seed):
    z = np.asarray(seed, dtype=float).copy()

    def residual(u):
        return model.drift(u, u)

    r = residual(z)
    for _ in range(NEWTON_MAX_ITER):
        nr = np.linalg.norm(r)
        if nr <= RESIDUAL_TOL * (1.0 + np.linalg.norm(z)):
            return z, nr
        D1, D2 = _fd_jacobians(model, z, z)
        try:
            step = np.linalg.solve(D1 + D2, -r)
        except np.linalg.LinAlgError:
            return None, nr
        t = 1.0
        while t > 1e-10:
            trial = z + t * step
            try:
                rt = residual(trial)
            except (DomainError, FloatingPointError):
                rt = None
            if rt is not None and np.all(np.isfinite(rt)) and np.linalg.norm(rt) < nr:
                break
            t *= 0.5
        else:
            return None, nr
        z, r = trial, rt
    nr = np.linalg.norm(r)
    return (z, nr) if nr <= RESIDUAL_TOL * (1.0 + np.linalg.norm(z)) else (None, nr)


def find_stationary_states(model, seeds):
    """Damped Newton on z -> f(z, z) from each seed; distinct converged roots.

    Seeds that fail to converge are logged and skipped.
    """
    found = []
    for seed in seeds:
        z, res = _newton(model, seed)
        if z is None:
            log.info("stationary-state search from %s did not converge (residual %.3e)", seed, res)
            continue
        if any(np.linalg.norm(z - s.z) <= DEDUP_DIST for s in found):
            continue
        B, C = _fd_jacobians(model, z, z)
        stability, ev = _classify(model, z, B, C)
        z.setflags(write=False)
        found.append(StationaryState(z, float(res), stability, ev))
    return found


def build_lna(model, z):
    """Centered delay model of the fluctuations xi = x - z around a stationary state."""
    zz = np.asarray(z.z if isinstance(z, StationaryState) else z, dtype=float)
    try:
        fd = _fd_jacobians(model, zz, zz)
        Sigma = np.asarray(model.diffusion(zz, zz), dtype=float)
    except (DomainError, FloatingPointError) as exc:
        raise NumericalError(f"could not linearise at {zz}: {exc}") from exc
    if model.jacobians is not None:
        B, C = (np.asarray(m, dtype=float) for m in model.jacobians(zz, zz))
        for exact, approx, label in ((B, fd[0], "D1 f"), (C, fd[1], "D2 f")):
            scale = max(1.0, np.abs(exact).max())
            if np.abs(exact - approx).max() > 1e-6 * scale:
                log.warning("closed-form %s disagrees with finite differences at %s", label, zz)
    else:
        B, C = fd
    if Sigma.shape != (model.dim, model.dim):
        raise ParameterError(f"diffusion at z has shape {Sigma.shape}; a square matrix is required")
    return DelayModel(np.zeros(model.dim), B, C, Sigma, model.tau, model.epsilon)


def toggle_lna(params=None, seed=(0.05, 1.0)):
    """LNA of the toggle switch at the stationary state reached from `seed`.

    Returns (model, stationary_state). The default seed picks the
    (x low, y high) state.
    """
    nl = toggle_model(params)
    states = find_stationary_states(nl, [seed])
    if not states:
        raise NumericalError(f"no stationary state found from seed {seed}")
    return build_lna(nl, states[0]), states[0]
