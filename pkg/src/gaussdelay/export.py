"""CSV writers. Numbers use 17 significant digits so reruns are byte-identical."""
import numpy as np

FMT = "%.17g"


def write_csv(path, header, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, rows, fmt=FMT, delimiter=",", header=",".join(header), comments="", newline="\n")
    return path


def _state_header(prefix, d):
    return [f"{prefix}_{i + 1}" for i in range(d)]


def _matrix_header(prefix, d):
    return [f"{prefix}_{i + 1}{j + 1}" for i in range(d) for j in range(d)]


def write_trajectory(path, times, values, prefix="m"):
    values = np.asarray(values)
    header = ["t"] + _state_header(prefix, values.shape[1])
    return write_csv(path, header, np.column_stack([times, values]))


def write_cov_diagonal(path, times, values):
    values = np.asarray(values)
    d = values.shape[1]
    return write_csv(path, ["t"] + _matrix_header("rho", d), np.column_stack([times, values.reshape(len(values), -1)]))


def write_eigcurve(path, times, curve):
    return write_csv(path, ["t", "min_eig_rho_inv"], np.column_stack([times, curve]))


def write_energy_scan(path, times, matrix, points):
    """Per-time minimum of the energy matrix with the minimising boundary point."""
    masked = np.where(np.isnan(matrix), np.inf, matrix)
    k = np.argmin(masked, axis=1)
    best = masked[np.arange(len(k)), k]
    excluded = ~np.isfinite(best)
    best = np.where(excluded, np.nan, best)
    q = np.where(excluded[:, None], np.nan, points[k])
    header = ["T", "energy", "k"] + _state_header("q", points.shape[1])
    return write_csv(path, header, np.column_stack([times, best, np.where(excluded, -1, k), q]))


def write_energy_matrix(path, times, matrix):
    header = ["T"] + [f"E_{k}" for k in range(matrix.shape[1])]
    return write_csv(path, header, np.column_stack([times, matrix]))


def write_points(path, points):
    header = ["k"] + _state_header("q", points.shape[1])
    return write_csv(path, header, np.column_stack([np.arange(len(points)), points]))


def write_moments(path, est):
    d = est.mean.shape[1]
    header = (["t"] + _state_header("mean", d) + _state_header("mean_se", d)
              + _matrix_header("cov", d) + _matrix_header("cov_se", d))
    n = len(est.times)
    rows = np.column_stack([est.times, est.mean, est.mean_se, est.cov.reshape(n, -1), est.cov_se.reshape(n, -1)])
    return write_csv(path, header + ["n_paths"], np.column_stack([rows, np.full(n, est.n)]))


def write_exits(path, stats):
    d = stats.points.shape[1]
    header = ["path", "exited", "t_exit"] + _state_header("x", d)
    rows = np.column_stack([np.arange(stats.n_paths), stats.exited.astype(float), stats.times, stats.points])
    return write_csv(path, header, rows)


def write_paths(path, ensemble):
    n, r, d = ensemble.paths.shape
    idx = np.repeat(np.arange(n), r)
    t = np.tile(ensemble.times, n)
    rows = np.column_stack([idx, t, ensemble.paths.reshape(n * r, d)])
    return write_csv(path, ["path", "t"] + _state_header("x", d), rows)
