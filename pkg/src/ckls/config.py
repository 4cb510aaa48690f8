"""Run configuration: JSON in, JSON out, strict about what it accepts.

A config object looks like

    {
      "params": {"a": 1.0, "b": 0.2, "sigma": 0.5, "gamma": 1.5,
                 "r0": 1.0, "C": 1.0},
      "grid": {"t_end": 1.0, "n_steps": 1024},
      "n_paths": 100000,
      "seed": 42,
      "delta_rule": "derived",
      "aux_variant": "derived",
      "scale_variant": "paper",
      "output": {"format": "csv", "path": "paths.csv"}
    }

"C" and everything from "delta_rule" down are optional.  Unknown keys are
rejected at every level; round-trips are lossless.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path as FsPath

from .engine import TimeGrid
from .errors import ConfigError
from .params import CklsParams

__all__ = ["RunConfig", "load_config", "parse_config"]

_PARAM_KEYS = {"a", "b", "sigma", "gamma", "r0", "C"}
_GRID_KEYS = {"t_end", "n_steps"}
_OUTPUT_KEYS = {"format", "path"}
_TOP_KEYS = {
    "params",
    "grid",
    "n_paths",
    "seed",
    "delta_rule",
    "aux_variant",
    "scale_variant",
    "output",
}
_FORMATS = {"csv", "json", "binary"}
_VARIANTS = {"paper", "derived"}


@dataclass(frozen=True)
class RunConfig:
    params: CklsParams
    c: float | None
    grid: TimeGrid
    n_paths: int
    seed: int
    delta_rule: str = "derived"
    aux_variant: str = "derived"
    scale_variant: str = "paper"
    output_format: str = "csv"
    output_path: str | None = None

    def to_dict(self) -> dict:
        params = self.params.to_dict()
        if self.c is not None:
            params["C"] = self.c
        return {
            "params": params,
            "grid": {"t_end": self.grid.t_end, "n_steps": self.grid.n_steps},
            "n_paths": self.n_paths,
            "seed": self.seed,
            "delta_rule": self.delta_rule,
            "aux_variant": self.aux_variant,
            "scale_variant": self.scale_variant,
            "output": {"format": self.output_format, "path": self.output_path},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_config(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"config must be an object, got {type(obj).__name__}")
    _reject_unknown(obj, _TOP_KEYS, "config")
    try:
        raw_params = obj["params"]
        raw_grid = obj["grid"]
        n_paths = int(obj["n_paths"])
        seed = int(obj["seed"])
    except KeyError as exc:
        raise ConfigError(f"missing required config key: {exc.args[0]}") from exc
    if not isinstance(raw_params, dict):
        raise ConfigError("params must be an object")
    _reject_unknown(raw_params, _PARAM_KEYS, "params")
    if not isinstance(raw_grid, dict):
        raise ConfigError("grid must be an object")
    _reject_unknown(raw_grid, _GRID_KEYS, "grid")
    raw_output = obj.get("output", {})
    if not isinstance(raw_output, dict):
        raise ConfigError("output must be an object")
    _reject_unknown(raw_output, _OUTPUT_KEYS, "output")

    delta_rule = obj.get("delta_rule", "derived")
    aux_variant = obj.get("aux_variant", "derived")
    scale_variant = obj.get("scale_variant", "paper")
    for name, val in (
        ("delta_rule", delta_rule),
        ("aux_variant", aux_variant),
        ("scale_variant", scale_variant),
    ):
        if val not in _VARIANTS:
            raise ConfigError(f"{name} must be one of {sorted(_VARIANTS)}, got {val!r}")
    output_format = raw_output.get("format", "csv")
    if output_format not in _FORMATS:
        raise ConfigError(f"output format must be one of {sorted(_FORMATS)}, got {output_format!r}")

    try:
        params = CklsParams.from_dict(raw_params)
        c = raw_params.get("C")
        if c is not None:
            c = float(c)
            if not c > 0:
                raise ConfigError(f"C must be positive, got {c}")
        grid = TimeGrid(t_end=float(raw_grid["t_end"]), n_steps=int(raw_grid["n_steps"]))
        if n_paths < 1:
            raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
        if not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc

    return RunConfig(
        params=params,
        c=c,
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        delta_rule=delta_rule,
        aux_variant=aux_variant,
        scale_variant=scale_variant,
        output_format=output_format,
        output_path=raw_output.get("path"),
    )


def load_config(path: str | FsPath) -> RunConfig:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(obj)
