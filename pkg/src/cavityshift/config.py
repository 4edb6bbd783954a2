"""Run configuration: the strict JSON schema binding model, instrument
and plan together with one master seed.

Every section is optional and falls back to the reference defaults;
unknown keys anywhere are rejected.  The top-level ``seed`` is
authoritative: it overwrites the instrument seed on load so a run is
reproducible from the one number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields, replace
from pathlib import Path

from . import model
from .errors import ConfigError
from .instrument import InstrumentConfig
from .protocol import SweepPlan, plan_sweep

DEFAULT_SEED = 1

#: Default reference experiment: ten fields spanning [h_v, 5*h_v].
N_DEFAULT_FIELDS = 10


def default_fields(params: model.ModelParams) -> tuple[float, ...]:
    lo, hi = params.h_v, 5.0 * params.h_v
    step = (hi - lo) / (N_DEFAULT_FIELDS - 1)
    return tuple(lo + i * step for i in range(N_DEFAULT_FIELDS))


@dataclass(frozen=True)
class RunConfig:
    model: model.ModelParams
    instrument: InstrumentConfig
    plan: SweepPlan
    seed: int = DEFAULT_SEED
    output_dir: str = "out"


def _build_section(cls, data: dict, name: str):
    allowed = {f.name for f in dataclass_fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}' section: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{name}' section: {exc}") from exc


def run_config_from_dict(data: dict) -> RunConfig:
    """Validate a raw dict against the strict schema."""
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    allowed = {"model", "instrument", "plan", "seed", "output_dir"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    params = _build_section(model.ModelParams, data.get("model", {}), "model")
    instrument = _build_section(InstrumentConfig, data.get("instrument", {}),
                                "instrument")
    seed = data.get("seed", DEFAULT_SEED)
    if not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2 ** 64):
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    instrument = replace(instrument, seed=seed)

    plan_data = dict(data.get("plan", {}))
    if "fields" not in plan_data:
        plan_data["fields"] = default_fields(params)
    if "t_center_guess" not in plan_data or "t_span" not in plan_data:
        try:
            derived = plan_sweep(params, instrument, plan_data["fields"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'plan' section: {exc}") from exc
        plan_data.setdefault("t_center_guess", derived.t_center_guess)
        plan_data.setdefault("t_span", derived.t_span)
    plan = _build_section(SweepPlan, plan_data, "plan")

    output_dir = data.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError(f"output_dir must be a string, got {output_dir!r}")
    return RunConfig(model=params, instrument=instrument, plan=plan,
                     seed=seed, output_dir=output_dir)


def run_config_to_dict(config: RunConfig, include_output_dir: bool = True) -> dict:
    """Serialize a config; manifests drop ``output_dir`` so two runs of
    one experiment into different directories stay byte-identical."""
    payload = {
        "model": {
            "t_c": config.model.t_c,
            "alpha": config.model.alpha,
            "delta_inf": config.model.delta_inf,
            "h_v": config.model.h_v,
            "cond_scale": config.model.cond_scale,
        },
        "instrument": {
            "coil_constant": config.instrument.coil_constant,
            "current_resolution": config.instrument.current_resolution,
            "base_temperature": config.instrument.base_temperature,
            "normal_resistance": config.instrument.normal_resistance,
            "transition_width": config.instrument.transition_width,
            "resistance_noise": config.instrument.resistance_noise,
            "temperature_jitter": config.instrument.temperature_jitter,
            "seed": config.instrument.seed,
        },
        "plan": {
            "fields": list(config.plan.fields),
            "t_center_guess": config.plan.t_center_guess,
            "t_span": config.plan.t_span,
            "n_points": config.plan.n_points,
            "repetitions": config.plan.repetitions,
        },
        "seed": config.seed,
        "output_dir": config.output_dir,
    }
    if not include_output_dir:
        del payload["output_dir"]
    return payload


def load_run_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return run_config_from_dict(data)


def default_run_config() -> RunConfig:
    return run_config_from_dict({})
