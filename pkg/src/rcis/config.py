"""JSON run configuration: schema, validation and model construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

import jsonschema

from rcis import expr
from rcis.algorithms import EPS_MODES, MODES, RunConfig
from rcis.dynamics import CELL_STRATEGIES, DISTURBANCE_MODES, SamplerConfig, SystemModel, parse_expression_system
from rcis.geometry import Box
from rcis.symbolic_image import METHODS
from rcis.systems import BUILTINS, builtin

_NUMBER_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_BOX = {
    "type": "object",
    "properties": {"lo": _NUMBER_LIST, "hi": _NUMBER_LIST},
    "required": ["lo", "hi"],
    "additionalProperties": False,
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "system": {
            "oneOf": [
                {"type": "string", "enum": sorted(BUILTINS)},
                {
                    "type": "object",
                    "properties": {
                        "expressions": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "parameters": {"type": "object", "additionalProperties": {"type": "number"}},
                        "name": {"type": "string"},
                    },
                    "required": ["expressions"],
                    "additionalProperties": False,
                },
            ]
        },
        "system_params": {"type": "object", "additionalProperties": {"type": "number"}},
        "X": _BOX,
        "U": _BOX,
        "W": _BOX,
        "mode": {"enum": list(MODES)},
        "N": {"type": "integer", "minimum": 1},
        "eps": {"type": "number", "exclusiveMinimum": 0},
        "eps_mode": {"enum": list(EPS_MODES)},
        "inner_cap": {"type": "integer", "minimum": 1},
        "method": {"enum": list(METHODS)},
        "refine_level": {"type": "boolean"},
        "image_inflation": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "sampler": {
            "type": "object",
            "properties": {
                "cell_strategy": {"enum": list(CELL_STRATEGIES)},
                "cell_samples": {"type": "integer", "minimum": 1},
                "input_samples": {"type": "integer", "minimum": 1},
                "disturbance_mode": {"enum": list(DISTURBANCE_MODES)},
                "disturbance_samples_per_dim": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "cells": {"type": "string"},
                "report": {"type": "string"},
                "progress": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["system"],
    "additionalProperties": False,
}

DEFAULTS = {
    "mode": "outer",
    "N": 16,
    "eps": 0.001,
    "eps_mode": "perturbation",
    "inner_cap": 64,
    "method": "sampling",
    "refine_level": False,
    "image_inflation": 0.0,
    "seed": 0,
    "sampler": {
        "cell_strategy": "boundary",
        "cell_samples": 10,
        "input_samples": 5,
        "disturbance_mode": "vertices",
        "disturbance_samples_per_dim": 2,
    },
    "output": {"dir": "rcis_out", "cells": "cells.csv", "report": "report.json", "progress": "progress.jsonl"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


def _pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


@dataclass(frozen=True)
class RunConfigFile:
    raw: dict
    source: Optional[Path] = None

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def run_config(self) -> RunConfig:
        r = self.raw
        s = r["sampler"]
        sampler = SamplerConfig(
            cell_strategy=s["cell_strategy"],
            cell_samples=s["cell_samples"],
            input_samples=s["input_samples"],
            disturbance_mode=s["disturbance_mode"],
            disturbance_samples_per_dim=s["disturbance_samples_per_dim"],
            rng_seed=r["seed"],
        )
        return RunConfig(
            mode=r["mode"],
            N=r["N"],
            eps=r["eps"],
            sampler=sampler,
            method=r["method"],
            refine_level=r["refine_level"],
            eps_mode=r["eps_mode"],
            inner_cap=r["inner_cap"],
        )

    def model(self) -> SystemModel:
        return build_model(self.raw)


def _check_finite(node: Any, path: list) -> None:
    if isinstance(node, bool):
        return
    if isinstance(node, float) and not math.isfinite(node):
        raise ConfigError("number must be finite", _pointer(path))
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, path + [k])
    elif isinstance(node, list):
        for i, v in enumerate(node):
            _check_finite(v, path + [i])


def _box(raw: dict, key: str) -> Optional[Box]:
    if key not in raw:
        return None
    lo, hi = raw[key]["lo"], raw[key]["hi"]
    if len(lo) != len(hi):
        raise ConfigError("lo and hi must have the same length", f"/{key}")
    for i, (a, b) in enumerate(zip(lo, hi)):
        if a > b:
            raise ConfigError(f"lo[{i}] = {a} exceeds hi[{i}] = {b}", f"/{key}/lo/{i}")
    return Box(lo, hi)


def validate(raw: Any) -> dict:
    """Schema check plus the semantic checks a schema cannot express; returns a copy with defaults."""
    _check_finite(raw, [])
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _pointer(e.absolute_path))
    out = {**DEFAULTS, **raw}
    out["sampler"] = {**DEFAULTS["sampler"], **raw.get("sampler", {})}
    out["output"] = {**DEFAULTS["output"], **raw.get("output", {})}
    for key in ("X", "U", "W"):
        _box(out, key)
    if isinstance(out["system"], dict) and "X" not in out:
        raise ConfigError("expression systems need an X box", "/X")
    if isinstance(out["system"], dict) and "system_params" in out:
        raise ConfigError("system_params only applies to builtin systems", "/system_params")
    # build once so dimension and expression errors surface at load time
    build_model(out)
    return out


def build_model(raw: dict) -> SystemModel:
    system = raw["system"]
    X, U, W = _box(raw, "X"), _box(raw, "U"), _box(raw, "W")
    if isinstance(system, str):
        try:
            model = builtin(system, **raw.get("system_params", {}))
        except TypeError as exc:
            raise ConfigError(str(exc), "/system_params") from None
        changes = {k: v for k, v in (("X", X), ("U", U), ("W", W)) if v is not None}
        if changes:
            try:
                model = replace(model, **changes)
            except ValueError as exc:
                raise ConfigError(str(exc), "/" + next(iter(changes))) from None
    else:
        try:
            model = parse_expression_system(
                system["expressions"], X, U, W, system.get("parameters"), system.get("name", "expressions")
            )
        except expr.ExpressionError as exc:
            raise ConfigError(str(exc), f"/system/expressions/{exc.line - 1}") from None
        except ValueError as exc:
            raise ConfigError(str(exc), "/system") from None
    inflation = raw.get("image_inflation", 0.0)
    return model.with_inflation(inflation) if inflation else model


def load_config(path) -> RunConfigFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror or exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return RunConfigFile(validate(raw), path)
