"""Experiment config: JSON schema validation, defaults and the config hash."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from ..energy import LAMBDA_DEFAULT
from ..grid import GridConfigError, SlitGrid, build_grid
from ..solve import SolverSettings


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json")
                      .read_text(encoding="utf-8"))


DEFAULT_DIAGNOSTICS = [{"name": "energy"}]


@dataclass
class ExperimentConfig:
    raw: dict
    experiment: str
    grid: SlitGrid
    lam: float
    boundary: dict
    coefficient: dict
    field: str
    solver: SolverSettings
    diagnostics: list
    save_field: bool
    output_dir: str
    seed: int

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """sha256 of the canonical config; the output location does not enter the hash."""
    body = {k: v for k, v in raw.items() if k != "output_dir"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def _parse_h(h) -> float:
    if isinstance(h, str):
        try:
            f = Fraction(h)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad spacing {h!r}") from exc
        if f <= 0:
            raise ConfigError("h must be positive")
        return float(f)
    return float(h)


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    raw = copy.deepcopy(raw)
    g = raw["grid"]
    try:
        grid = build_grid(g["n"], _parse_h(g["h"]), g.get("halfwidth", 1.0))
    except GridConfigError as exc:
        raise ConfigError(str(exc)) from None
    boundary = raw.get("boundary", {"generator": "U-trace"})
    coef = {"name": "one", "kappa": 0.0, "beta": 1.0, **raw.get("coefficient", {})}
    field = raw.get("field", "data")
    if field == "almost-minimizer" and "coefficient" not in raw:
        raise ConfigError("field 'almost-minimizer' needs a coefficient block")
    if boundary["generator"] == "custom" and not boundary.get("params", {}).get("path"):
        raise ConfigError("custom boundary data needs params.path")
    try:
        solver = SolverSettings(**raw.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    diags = raw.get("diagnostics", DEFAULT_DIAGNOSTICS)
    for d in diags:
        c = d.get("center")
        if c is not None and len(c) != grid.dim:
            raise ConfigError(f"diagnostic {d['name']}: center needs {grid.dim} coordinates")
    return ExperimentConfig(raw=raw, experiment=raw["experiment"], grid=grid,
                            lam=float(raw.get("lambda", LAMBDA_DEFAULT)), boundary=boundary,
                            coefficient=coef, field=field, solver=solver, diagnostics=diags,
                            save_field=bool(raw.get("save_field", False)),
                            output_dir=raw.get("output_dir", "results"),
                            seed=int(raw.get("seed", 0)))


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(raw)
