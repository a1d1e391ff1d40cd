"""Static figures written next to the CSV outputs."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps SVG output stable across runs
_SVG_META = {"Date": None}


def _save(fig, stem, svg):
    paths = [f"{stem}.png"]
    fig.savefig(paths[0], dpi=120)
    if svg:
        matplotlib.rcParams["svg.hashsalt"] = "gaussdelay"
        fig.savefig(f"{stem}.svg", metadata=_SVG_META)
        paths.append(f"{stem}.svg")
    plt.close(fig)
    return paths


def _components(ax, times, values, label):
    for i in range(values.shape[1]):
        ax.plot(times, values[:, i], lw=1.2, label=f"{label}$_{i + 1}$")
    ax.set_xlabel("t")
    ax.legend(frameon=False)


def plot_mean(stem, times, values, svg=False):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    _components(ax, times, np.asarray(values), "m")
    ax.set_title("mean path")
    fig.tight_layout()
    return _save(fig, stem, svg)


def plot_variances(stem, times, variances, svg=False):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    _components(ax, times, np.asarray(variances), r"\rho_{ii}")
    ax.set_title("variances")
    fig.tight_layout()
    return _save(fig, stem, svg)


def plot_eigcurve(stem, times, curve, svg=False):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ok = np.isfinite(curve)
    ax.plot(np.asarray(times)[ok], np.asarray(curve)[ok], lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(r"$\lambda_{min}(\rho(t,t)^{-1})$")
    fig.tight_layout()
    return _save(fig, stem, svg)


def plot_path(stem, values, disk=None, mean=None, svg=False):
    """Phase-plane view of a two-dimensional path, optionally with the exit disk."""
    values = np.asarray(values)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    if mean is not None:
        ax.plot(mean[:, 0], mean[:, 1], color="0.6", lw=1, label="mean")
    ax.plot(values[:, 0], values[:, 1], lw=1.5, label="optimal path")
    ax.plot(*values[-1], "o", ms=4)
    if disk is not None:
        center, R = disk
        th = np.linspace(0, 2 * np.pi, 361)
        ax.plot(center[0] + R * np.cos(th), center[1] + R * np.sin(th), "k--", lw=0.8)
        ax.set_aspect("equal")
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$x_2$")
    ax.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, stem, svg)


def plot_energy_scan(stem, times, energies, T_opt=None, svg=False):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(times, energies, lw=1.2)
    if T_opt is not None and np.isfinite(T_opt):
        ax.axvline(T_opt, color="k", ls=":", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("T")
    ax.set_ylabel("minimal energy")
    fig.tight_layout()
    return _save(fig, stem, svg)


def plot_exits(stem, points, center, R, svg=False):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    th = np.linspace(0, 2 * np.pi, 361)
    ax.plot(center[0] + R * np.cos(th), center[1] + R * np.sin(th), "k--", lw=0.8)
    ax.plot(points[:, 0], points[:, 1], ".", ms=2, alpha=0.5)
    ax.set_aspect("equal")
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$x_2$")
    fig.tight_layout()
    return _save(fig, stem, svg)
