"""Experiment configuration: parsing, overrides, validation, resolution.

A config file (YAML or JSON) has up to five top-level keys::

    channel:    {users, loop_length_m, attenuation, k_fext, sigma_db, seed}
    plan:       preset name or {preset, <BandPlan field>: value, ...}
    experiment: command-specific parameters (see COMMAND_PARAMS)
    trials:     int
    seed:       int

Numeric values may carry a ``dB`` suffix. For keys ending in ``_db`` the
number is kept in dB; for any other key ``30dB`` is converted to linear.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .channel import CAD55_LIKE_ATTENUATION, ChannelScenario
from .errors import ConfigError
from .linkbudget import BandPlan, SweepMode

COMMANDS = ("asymptotic-sweep", "convergence", "scatter", "rate-reach", "spectral-efficiency")
TOP_LEVEL_KEYS = ("channel", "plan", "experiment", "trials", "seed")

DEFAULT_CHANNEL = {"users": 20, "loop_length_m": 100.0, "attenuation": "cad55",
                   "k_fext": 1.59e-10, "sigma_db": 2.0, "seed": 0}

# per command: key -> (default, kind)
COMMAND_PARAMS: dict[str, dict[str, tuple[Any, str]]] = {
    "asymptotic-sweep": {
        "eta_db": ({"start": 0.0, "stop": 60.0, "step": 5.0}, "grid"),
        "sigma2": ({"start": 0.0, "stop": 3.0, "step": 0.1}, "grid"),
    },
    "convergence": {
        "m_target": (200, "size"),
        "sigma2": (0.3, "nonneg"),
        "n_values": ([10, 20, 50, 100, 200], "sizes"),
        "canceler": ("ZF", "canceler"),
        "eta": (1000.0, "positive"),
        "sigma_db": (2.0, "nonneg"),
    },
    "scatter": {
        "m_values": ([20, 50, 100], "sizes"),
        "sigma2": ({"start": 0.0, "stop": 0.9, "step": 0.1}, "grid"),
        "eta_db": (30.0, "number"),
        "sigma_db": (2.0, "nonneg"),
    },
    "rate-reach": {
        "lengths_m": ([50.0, 100.0, 200.0, 300.0, 400.0], "grid"),
        "mode": ("BOTH", "mode"),
        "include_single_wire": (False, "bool"),
    },
    "spectral-efficiency": {
        "loop_length_m": (100.0, "nonneg"),
        "mode": ("BOTH", "mode"),
    },
}
# grids that may not go negative
_NONNEG_GRIDS = {"sigma2", "lengths_m"}
DEFAULT_TRIALS = {"asymptotic-sweep": 0, "convergence": 200, "scatter": 200,
                  "rate-reach": 10, "spectral-efficiency": 10}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(dB|db|DB)?\s*$")


def parse_quantity(value, key: str) -> float:
    """Number, or string with an optional ``dB`` suffix (see module docs)."""
    if isinstance(value, bool):
        raise ConfigError(key, f"expected number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _QTY.match(value)
        if m:
            x = float(m.group(1))
            if m.group(2) and not key.endswith("_db"):
                return 10.0 ** (x / 10.0)
            return x
    raise ConfigError(key, f"expected number (optionally dB-suffixed), got {value!r}")


def parse_int(value, key: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(key, f"expected integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and re.fullmatch(r"\s*[-+]?\d+\s*", value):
        return int(value)
    raise ConfigError(key, f"expected integer, got {value!r}")


def parse_grid(value, key: str) -> list[float]:
    """A list of quantities or ``{start, stop, step}`` (inclusive of stop)."""
    if isinstance(value, Mapping):
        unknown = set(value) - {"start", "stop", "step"}
        if unknown:
            raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown key")
        try:
            start, stop, step = (parse_quantity(value[k], f"{key}.{k}") for k in ("start", "stop", "step"))
        except KeyError as exc:
            raise ConfigError(f"{key}.{exc.args[0]}", "required") from None
        if step <= 0 or stop < start:
            raise ConfigError(key, "need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        # round to kill binary drift so grids print as their decimal values
        return [round(start + k * step, 12) for k in range(count)]
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(key, "grid must be nonempty")
        return [parse_quantity(v, f"{key}[{i}]") for i, v in enumerate(value)]
    return [parse_quantity(value, key)]


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=value`` -> (["a", "b"], parsed YAML scalar/list)."""
    if "=" not in text:
        raise ConfigError(text, "override must look like key=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(text, "empty override key")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        value = raw
    return path, value


def _apply_override(cfg: dict, path: list[str], value) -> None:
    if path[0] not in TOP_LEVEL_KEYS:
        # bare keys address the experiment section
        path = ["experiment", *path]
    node = cfg
    for part in path[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {} if child is None or not isinstance(child, str) else {"preset": child}
            node[part] = child
        node = child
    node[path[-1]] = value


def load_file(path: str | Path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a mapping")
    return data


@dataclass
class ExperimentConfig:
    """A fully resolved, validated run description."""

    command: str
    channel: ChannelScenario
    plan: BandPlan
    params: dict
    trials: int
    seed: int
    output_path: Path | None = None
    overrides: tuple = ()

    def to_dict(self) -> dict:
        """Canonical form; feeding it back to :func:`resolve` is a fixed point."""
        ch = self.channel
        att = ch.attenuation
        att_out = {"r_per_m": att} if isinstance(att, float) else {"table": [list(r) for r in att]}
        plan = {k: getattr(self.plan, k) for k in self.plan.__dataclass_fields__}
        plan["psd_mask"] = [list(seg) for seg in plan["psd_mask"]]
        return {
            "command": self.command,
            "channel": {"users": ch.users, "loop_length_m": list(ch.loop_length_m), "attenuation": att_out,
                        "k_fext": ch.k_fext, "sigma_db": ch.sigma_db, "seed": ch.seed},
            "plan": plan,
            "experiment": copy.deepcopy(self.params),
            "trials": self.trials,
            "seed": self.seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _parse_param(key: str, value, kind: str):
    k = f"experiment.{key}"
    if kind == "grid":
        out = parse_grid(value, k)
        if key in _NONNEG_GRIDS and min(out) < 0:
            raise ConfigError(k, "must be >= 0")
        return out
    if kind == "size":
        out = parse_int(value, k)
        if out < 2:
            raise ConfigError(k, "must be >= 2")
        return out
    if kind == "sizes":
        vals = value if isinstance(value, (list, tuple)) else [value]
        if not vals:
            raise ConfigError(k, "list must be nonempty")
        return [_parse_param(f"{key}[{i}]", v, "size") for i, v in enumerate(vals)]
    if kind == "canceler":
        if str(value).upper() not in ("ZF", "MMSE"):
            raise ConfigError(k, f"expected ZF or MMSE, got {value!r}")
        return str(value).upper()
    if kind == "mode":
        try:
            return SweepMode(str(value).upper()).value
        except ValueError:
            raise ConfigError(k, f"expected one of {[m.value for m in SweepMode]}, got {value!r}") from None
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(k, f"expected boolean, got {value!r}")
        return value
    x = parse_quantity(value, k)
    if kind == "nonneg" and x < 0:
        raise ConfigError(k, "must be >= 0")
    if kind == "positive" and not x > 0:
        raise ConfigError(k, "must be > 0")
    return x


def _resolve_params(command: str, given: Mapping) -> dict:
    schema = COMMAND_PARAMS[command]
    for key in given:
        if key not in schema:
            raise ConfigError(f"experiment.{key}", f"unknown key for {command}")
    return {key: _parse_param(key, given.get(key, default), kind) for key, (default, kind) in schema.items()}


def resolve(command: str, data: Mapping | None = None, overrides: list[str] | None = None,
            trials: int | None = None, seed: int | None = None,
            output_path: str | Path | None = None) -> ExperimentConfig:
    """Merge file data, ``key=value`` overrides and CLI flags into a config."""
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    cfg = copy.deepcopy(dict(data or {}))
    cfg.pop("command", None)
    for text in overrides or []:
        _apply_override(cfg, *parse_override(text))
    for key in cfg:
        if key not in TOP_LEVEL_KEYS:
            raise ConfigError(key, "unknown key")

    if not isinstance(cfg.get("channel") or {}, Mapping):
        raise ConfigError("channel", "must be a mapping")
    channel_data = {**DEFAULT_CHANNEL, **(cfg.get("channel") or {})}
    if channel_data.get("attenuation") == "cad55":
        channel_data["attenuation"] = CAD55_LIKE_ATTENUATION
    channel = ChannelScenario.from_mapping(channel_data)

    plan_data = cfg.get("plan", "gfast212")
    if not isinstance(plan_data, (str, Mapping)):
        raise ConfigError("plan", "must be a preset name or a mapping")
    plan = BandPlan.from_mapping(plan_data)

    exp = cfg.get("experiment") or {}
    if not isinstance(exp, Mapping):
        raise ConfigError("experiment", "must be a mapping")
    params = _resolve_params(command, exp)

    if trials is None:
        trials = parse_int(cfg.get("trials", DEFAULT_TRIALS[command]), "trials")
    if trials < 0 or (trials < 1 and command != "asymptotic-sweep"):
        raise ConfigError("trials", "must be >= 1")
    if seed is None:
        seed = parse_int(cfg.get("seed", channel.seed), "seed")
    if seed < 0:
        raise ConfigError("seed", "must be >= 0")
    out = Path(output_path) if output_path is not None else None
    return ExperimentConfig(command, channel, plan, params, trials, seed, out, tuple(overrides or ()))
