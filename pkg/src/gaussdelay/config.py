"""TOML run configurations for the command-line tool.

Schema version 1::

    schema = 1
    [model]                  # builtin = "toggle" or explicit a/B/C/Sigma/tau
    [history]                # constant = [...] or times = [...] + values = [[...]]
    [grid]                   # N, T
    [optimal_path]           # Q, T
    [escape]                 # center, R, delta_r, T_large, half
    [simulate]               # dt, T, n_paths, seed, ...

For the toggle model the linearisation runs in local coordinates
xi = x - z. Vectors in the file (history, Q, disk centre) are read in the
frame named by ``model.coordinates`` ("absolute", the default, or "local").
"""
from dataclasses import dataclass, field
import importlib.resources
import math
import sys

import numpy as np

from .delay_model import DelayModel, HistoryPath
from .errors import ConfigError, GaussDelayError, ParameterError
from .lna import ToggleParams, build_lna, find_stationary_states, toggle_model

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
BUILTIN_MODELS = ("toggle",)
COMMAND_BLOCKS = {
    "mean": ("grid",),
    "cov": ("grid",),
    "optimal-path": ("optimal_path",),
    "escape": ("escape",),
    "simulate": ("simulate",),
}


@dataclass(eq=False)
class RunConfig:
    raw: dict
    model: DelayModel
    history: HistoryPath
    origin: np.ndarray  # stationary state (absolute) subtracted to get local coordinates
    source: str = "explicit"
    nonlinear: object = None  # NonlinearDelayModel for builtins
    stationary: object = None
    warnings: list = field(default_factory=list)

    def block(self, name):
        return self.raw.get(name, {})

    def to_local(self, v, frame=None):
        """Vector from the config frame into model coordinates."""
        frame = frame or self.frame
        v = np.asarray(v, dtype=float)
        return v - self.origin if frame == "absolute" else v

    @property
    def frame(self):
        return self.raw.get("model", {}).get("coordinates", "absolute")


def _get(block, key, where, kind=float, required=True, default=None):
    if key not in block:
        if required:
            raise ConfigError(f"missing required key '{where}.{key}'", f"{where}.{key}")
        return default
    val = block[key]
    try:
        if kind is float:
            out = float(val)
            if not math.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        if kind == "vector":
            arr = np.asarray(val, dtype=float)
            if arr.ndim != 1:
                raise ValueError
            return arr
        if kind == "matrix":
            arr = np.atleast_2d(np.asarray(val, dtype=float))
            if arr.ndim != 2:
                raise ValueError
            return arr
        if kind is str:
            if not isinstance(val, str):
                raise ValueError
            return val
        if kind is bool:
            if not isinstance(val, bool):
                raise ValueError
            return val
    except (TypeError, ValueError):
        label = kind if isinstance(kind, str) else kind.__name__
        raise ConfigError(f"'{where}.{key}' must be a {label}, got {val!r}", f"{where}.{key}") from None
    raise AssertionError(kind)


def _toggle(block):
    opts = block.get("toggle", {})
    try:
        params = ToggleParams(
            beta=_get(opts, "beta", "model.toggle", required=False, default=0.73),
            k=_get(opts, "k", "model.toggle", required=False, default=0.05),
            gamma_dil=_get(opts, "gamma", "model.toggle", required=False, default=math.log(2.0)),
            tau=_get(opts, "tau", "model.toggle", required=False, default=1.0),
            N=_get(opts, "N", "model.toggle", required=False, default=1000.0),
        )
    except ConfigError:
        raise
    except ParameterError as exc:
        raise ConfigError(str(exc), "model.toggle") from exc
    seed = _get(block, "stationary_seed", "model", "vector", required=False, default=np.array([0.05, 1.0]))
    nl = toggle_model(params)
    states = find_stationary_states(nl, [seed])
    if not states:
        raise ConfigError(f"no stationary state found from model.stationary_seed={seed.tolist()}",
                          "model.stationary_seed")
    lna = build_lna(nl, states[0])
    eps = _get(block, "epsilon", "model", required=False)
    if eps is not None:
        lna = lna.with_epsilon(eps)
    return lna, nl, states[0]


def _explicit(block):
    a = _get(block, "a", "model", "vector", required=False)
    B = _get(block, "B", "model", "matrix")
    C = _get(block, "C", "model", "matrix")
    Sigma = _get(block, "Sigma", "model", "matrix")
    tau = _get(block, "tau", "model")
    eps = _get(block, "epsilon", "model", required=False, default=1.0)
    if a is None:
        a = np.zeros(B.shape[0])
    model = DelayModel(a, B, C, Sigma, tau, eps)
    try:
        model.require_valid()
    except GaussDelayError as exc:
        raise ConfigError(str(exc), "model") from exc
    return model


def _history(block, model, cfg_frame, origin):
    if not block:
        raise ConfigError("missing required table '[history]'", "history")
    if "constant" in block:
        v = _get(block, "constant", "history", "vector")
        if cfg_frame == "absolute":
            v = v - origin
        hist = HistoryPath.constant(v, model.tau)
    elif "times" in block:
        t = _get(block, "times", "history", "vector")
        vals = np.asarray(block.get("values"), dtype=float)
        if vals.ndim != 2:
            raise ConfigError("'history.values' must be a list of state vectors", "history.values")
        if cfg_frame == "absolute":
            vals = vals - origin
        try:
            hist = HistoryPath(t, vals)
        except GaussDelayError as exc:
            raise ConfigError(str(exc), "history") from exc
    else:
        raise ConfigError("history needs 'constant' or 'times' and 'values'", "history")
    if hist.dim != model.dim:
        raise ConfigError(f"history has dimension {hist.dim}, the model {model.dim}", "history")
    tol = 1e-9 * max(1.0, model.tau)
    if abs(hist.times[0] + model.tau) > tol or abs(hist.times[-1]) > tol:
        raise ConfigError(f"history must span [-{model.tau:g}, 0]", "history.times")
    return hist


def parse_config(raw, command=None):
    """Validate a parsed TOML document and build the model and history."""
    schema = raw.get("schema")
    if schema is None:
        raise ConfigError("missing required key 'schema'", "schema")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {schema!r}; this version reads schema {SCHEMA_VERSION}", "schema")
    mblock = raw.get("model")
    if not isinstance(mblock, dict):
        raise ConfigError("missing required table '[model]'", "model")
    frame = mblock.get("coordinates", "absolute")
    if frame not in ("absolute", "local"):
        raise ConfigError("'model.coordinates' must be 'absolute' or 'local'", "model.coordinates")
    builtin = mblock.get("builtin")
    explicit_keys = {"B", "C", "Sigma"} & set(mblock)
    if builtin is not None and explicit_keys:
        raise ConfigError("give either model.builtin or explicit matrices, not both", "model")
    if builtin is not None:
        if builtin not in BUILTIN_MODELS:
            raise ConfigError(f"unknown builtin model {builtin!r}; known: {', '.join(BUILTIN_MODELS)}",
                              "model.builtin")
        model, nl, state = _toggle(mblock)
        origin = np.array(state.z, dtype=float)
        source = builtin
    else:
        model = _explicit(mblock)
        nl = state = None
        origin = np.zeros(model.dim)
        source = "explicit"
    history = _history(raw.get("history", {}), model, frame, origin)
    if command is not None:
        for name in COMMAND_BLOCKS.get(command, ()):
            if not isinstance(raw.get(name), dict):
                raise ConfigError(f"command '{command}' needs a '[{name}]' table", name)
    return RunConfig(raw, model, history, origin, source, nl, state)


def load_config(path, command=None):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "config") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}", "config") from None
    return parse_config(raw, command)


def bundled_config(name):
    """Path to one of the example configs shipped with the package."""
    res = importlib.resources.files("gaussdelay") / "configs" / name
    if not res.is_file():
        raise ConfigError(f"no bundled config named {name!r}", "config")
    return str(res)
