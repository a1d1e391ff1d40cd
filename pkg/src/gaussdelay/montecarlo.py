"""Euler-Maruyama ensembles for delay SDEs and the statistics used as oracles.

Every path draws its Gaussian increments from its own counter-based
stream keyed by (seed, path index), so an ensemble does not depend on
batching or on the number of worker threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math

import numpy as np

from .delay_model import eval_history
from .errors import ConfigError, ParameterError

log = logging.getLogger(__name__)

# steps drawn per generator call; bounds the noise buffer to
# batch * STEP_CHUNK * d doubles without changing the streams
STEP_CHUNK = 1024
BATCH_SIZE = 1000


@dataclass(frozen=True)
class SimulationConfig:
    """Euler-Maruyama settings.

    dt must divide the model delay. `epsilon` overrides the model's noise
    scale when given. Every `record_stride`-th step is stored.
    """

    dt: float
    T_sim: float
    n_paths: int
    seed: int = 0
    epsilon: float = None
    record_stride: int = 1
    batch_size: int = BATCH_SIZE

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt!r}", "dt")
        if not self.T_sim > 0:
            raise ConfigError(f"T_sim must be positive, got {self.T_sim!r}", "T_sim")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}", "n_paths")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}", "seed")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("record_stride must be a positive integer", "record_stride")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon!r}", "epsilon")

    def lag(self, tau):
        """Steps per delay; raises unless dt divides tau."""
        ratio = tau / self.dt
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"dt={self.dt!r} does not divide tau={tau!r}", "dt")
        return n

    @property
    def n_steps(self):
        return int(math.floor(self.T_sim / self.dt + 1e-9))


@dataclass(eq=False)
class PathEnsemble:
    times: np.ndarray  # (n_rec,)
    paths: np.ndarray  # (n_paths, n_rec, d)
    seed: int
    dt: float
    failed: np.ndarray  # (n_paths,) bool, paths that hit NaN or overflow
    clamp_count: int = 0

    @property
    def n_paths(self):
        return self.paths.shape[0]

    @property
    def dim(self):
        return self.paths.shape[2]

    def time_index(self, t):
        j = int(round(float(t) / (self.times[1] - self.times[0]))) if self.times.size > 1 else 0
        if j < 0 or j >= self.times.size or abs(self.times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ParameterError(f"t={t!r} is not a recorded time of the ensemble")
        return j


@dataclass(eq=False)
class MomentEstimate:
    times: np.ndarray
    mean: np.ndarray  # (n_t, d)
    mean_se: np.ndarray
    cov: np.ndarray  # (n_t, d, d)
    cov_se: np.ndarray
    n: int
    pairs: list = None  # [(s, t)]
    cross: np.ndarray = None  # (n_pairs, d, d): E[(X_s - mean_s)(X_t - mean_t)^T]
    cross_se: np.ndarray = None


@dataclass(eq=False)
class ExitStatistics:
    times: np.ndarray  # first-exit time per path, NaN when no exit
    points: np.ndarray  # exit point per path, NaN rows when no exit
    exited: np.ndarray  # bool
    n_paths: int

    @property
    def n_exited(self):
        return int(self.exited.sum())

    @property
    def fraction(self):
        return self.n_exited / self.n_paths if self.n_paths else 0.0


def path_generator(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def _history_buffer(history, tau, lag, n):
    t = -tau + np.arange(lag + 1) * (tau / lag)
    t[-1] = 0.0
    vals = eval_history(history, t)  # (lag + 1, d)
    return np.repeat(vals[:, None, :], n, axis=1)


def _run_batch(step, history, tau, lag, cfg, start, stop, d):
    n = stop - start
    gens = [path_generator(cfg.seed, i) for i in range(start, stop)]
    buf = _history_buffer(history, tau, lag, n)
    p = lag
    stride = cfg.record_stride
    n_steps = cfg.n_steps
    rec = np.empty((n, n_steps // stride + 1, d))
    rec[:, 0] = buf[p]
    failed = np.zeros(n, dtype=bool)
    clamps = 0
    sqdt = math.sqrt(cfg.dt)
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while k < n_steps:
            chunk = min(STEP_CHUNK, n_steps - k)
            noise = np.stack([g.standard_normal((chunk, d)) for g in gens], axis=1) * sqdt
            for c in range(chunk):
                x = buf[p]
                xd = buf[(p + 1) % (lag + 1)]
                new, nclamp = step(x, xd, noise[c])
                clamps += nclamp
                bad = ~np.all(np.isfinite(new), axis=1)
                if bad.any():
                    failed |= bad
                    new[bad] = np.nan
                p = (p + 1) % (lag + 1)
                buf[p] = new
                k += 1
                if k % stride == 0:
                    rec[:, k // stride] = new
    return rec, failed, clamps


def _simulate(step, history, tau, cfg, d, threads):
    lag = cfg.lag(tau)
    if history.dim != d:
        raise ParameterError(f"history dimension {history.dim} != model dimension {d}")
    bounds = [(s, min(s + cfg.batch_size, cfg.n_paths)) for s in range(0, cfg.n_paths, cfg.batch_size)]

    def job(b):
        return _run_batch(step, history, tau, lag, cfg, b[0], b[1], d)

    if threads and threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, bounds))
    else:
        results = [job(b) for b in bounds]
    paths = np.concatenate([r[0] for r in results])
    failed = np.concatenate([r[1] for r in results])
    clamps = sum(r[2] for r in results)
    if failed.any():
        log.warning("%d of %d paths diverged", int(failed.sum()), cfg.n_paths)
    times = np.arange(paths.shape[1]) * cfg.dt * cfg.record_stride
    return PathEnsemble(times, paths, int(cfg.seed), cfg.dt, failed, int(clamps))


def simulate_linear(model, history, config, threads=1):
    """Euler-Maruyama ensemble of the linear delay SDE."""
    model.require_valid()
    eps = model.epsilon if config.epsilon is None else config.epsilon
    a, Bt, Ct = model.a, model.B.T, model.C.T
    St = eps * model.Sigma.T
    dt = config.dt

    def step(x, xd, dW):
        return x + dt * (a + x @ Bt + xd @ Ct) + dW @ St, 0

    return _simulate(step, history, model.tau, config, model.dim, threads)


def simulate_nonlinear(model, history, config, threads=1):
    """Euler-Maruyama ensemble of a nonlinear delay Langevin model.

    Chemical Langevin models (with a `propensity`) have negative radicands
    clamped to zero; the number of clamped entries is reported.
    """
    eps = model.epsilon if config.epsilon is None else config.epsilon
    dt = config.dt

    if model.propensity is not None:
        def step(x, xd, dW):
            rad = model.propensity(x, xd)
            neg = rad < 0
            g = np.sqrt(np.where(neg, 0.0, rad))
            return x + dt * model.drift(x, xd) + eps * g * dW, int(neg.sum())
    else:
        def step(x, xd, dW):
            g = model.diffusion(x, xd)
            return x + dt * model.drift(x, xd) + eps * np.einsum("bij,bj->bi", g, dW), 0

    ens = _simulate(step, history, model.tau, config, model.dim, threads)
    if ens.clamp_count:
        log.warning("clamped %d negative propensity sums to zero", ens.clamp_count)
    return ens


def _centered(ens, j):
    x = ens.paths[~ens.failed, j]
    return x - x.mean(axis=0)


def _product_stats(u, v):
    n = u.shape[0]
    prod = u[:, :, None] * v[:, None, :]
    est = prod.sum(axis=0) / (n - 1)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n)
    return est, se


def estimate_moments(ensemble, times, pairs=None):
    """Sample means and covariances (with standard errors) at recorded times.

    `pairs` optionally lists (s, t) time pairs for cross-covariances.
    Diverged paths are dropped.
    """
    n = int((~ensemble.failed).sum())
    if n < 2:
        raise ParameterError(f"moment estimation needs at least 2 paths, got {n}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = [ensemble.time_index(t) for t in times]
    good = ensemble.paths[~ensemble.failed]
    d = ensemble.dim
    mean = np.empty((len(idx), d))
    mean_se = np.empty((len(idx), d))
    cov = np.empty((len(idx), d, d))
    cov_se = np.empty((len(idx), d, d))
    for r, j in enumerate(idx):
        x = good[:, j]
        mean[r] = x.mean(axis=0)
        mean_se[r] = x.std(axis=0, ddof=1) / math.sqrt(n)
        u = x - mean[r]
        cov[r], cov_se[r] = _product_stats(u, u)
    out = MomentEstimate(times, mean, mean_se, cov, cov_se, n)
    if pairs:
        cross = []
        cross_se = []
        for s, t in pairs:
            est, se = _product_stats(_centered(ensemble, ensemble.time_index(s)),
                                     _centered(ensemble, ensemble.time_index(t)))
            cross.append(est)
            cross_se.append(se)
        out.pairs = [tuple(p) for p in pairs]
        out.cross = np.array(cross)
        out.cross_se = np.array(cross_se)
    return out


def exit_statistics(ensemble, center, radius):
    """First exits from the closed disk |x - center| < radius.

    The crossing is placed by linear interpolation of the distance between
    the two recorded steps that straddle the boundary.
    """
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(ensemble.paths - center, axis=2)  # (n, n_rec)
    hit = dist >= radius
    hit[ensemble.failed] = False
    exited = hit.any(axis=1)
    n = ensemble.n_paths
    times = np.full(n, np.nan)
    points = np.full((n, ensemble.dim), np.nan)
    for i in np.flatnonzero(exited):
        k = int(np.argmax(hit[i]))
        if k == 0:
            times[i] = ensemble.times[0]
            points[i] = ensemble.paths[i, 0]
            continue
        r0, r1 = dist[i, k - 1], dist[i, k]
        theta = (radius - r0) / (r1 - r0) if r1 > r0 else 1.0
        times[i] = ensemble.times[k - 1] + theta * (ensemble.times[k] - ensemble.times[k - 1])
        points[i] = ensemble.paths[i, k - 1] + theta * (ensemble.paths[i, k] - ensemble.paths[i, k - 1])
    return ExitStatistics(times, points, exited, n)


def exit_direction_mode(stats, center, bins=36):
    """Centre angle in degrees, in [-180, 180), of the fullest bin of exit directions."""
    pts = stats.points[stats.exited] - np.asarray(center, dtype=float)
    if pts.shape[0] == 0:
        raise ParameterError("no path exited the disk")
    ang = np.degrees(np.arctan2(pts[:, 1], pts[:, 0]))
    counts, edges = np.histogram(ang, bins=bins, range=(-180.0, 180.0))
    k = int(np.argmax(counts))
    return 0.5 * (edges[k] + edges[k + 1]), counts, edges


def tube_probability(ensemble, reference, r):
    """Fraction of paths within sup-distance r of `reference` at every recorded time.

    `reference` holds one state per recorded time, shape (n_rec, d) or (n_rec,).
    """
    ref = np.asarray(reference, dtype=float)
    if ref.ndim == 1:
        ref = ref[:, None]
    if ref.shape != ensemble.paths.shape[1:]:
        raise ParameterError(
            f"reference has shape {ref.shape}; expected {ensemble.paths.shape[1:]} on the recorded grid"
        )
    if math.isinf(r):
        return 1.0
    dev = np.linalg.norm(ensemble.paths - ref, axis=2).max(axis=1)
    inside = (dev <= r) & ~ensemble.failed
    return float(inside.mean())
