"""Scenario configuration files and the shipped baseline preset.

Config files are JSON whose keys mirror ``ScenarioConfig`` field names; the
packaged ``fig3`` preset carries the baseline comparison parameters so a
single command reproduces the headline duration-versus-distance data.
"""

from __future__ import annotations

import json
from importlib import resources

from .exceptions import ConfigError
from .links import ChannelEfficiencies
from .swaps import SwapTopology
from .timing import ScenarioConfig

_SCALAR_FIELDS = {
    "total_distance_km": float,
    "n_bb_modes": int,
    "attenuation_db_per_km": float,
    "c_fiber_km_per_s": float,
    "ion_pulse_duration_s": float,
    "time_bin_duration_s": float,
    "correlation_time_s": float,
    "detector_resolution_s": float,
    "dark_rate_hz": float,
    "fidelity_target": float,
    "reset_time_s": float,
    "fock_cutoff": int,
}
_EFFICIENCY_FIELDS = {"eta", "eta0_prime", "eta_fc", "eta_m"}


def preset_dict(name: str = "fig3") -> dict:
    """Load a packaged preset as a plain dict."""
    try:
        payload = resources.files("ionlink.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown preset {name!r}") from None
    return json.loads(payload)


def scenario_from_dict(data: dict, base: dict | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from a config mapping, on top of the preset.

    Unknown keys and wrong types raise ConfigError naming the field.
    """
    merged = dict(base if base is not None else preset_dict())
    eff = dict(merged.get("efficiencies", {}))
    for key, value in data.items():
        if key == "efficiencies":
            if not isinstance(value, dict):
                raise ConfigError("must be an object", field="efficiencies")
            for ek, ev in value.items():
                if ek not in _EFFICIENCY_FIELDS:
                    raise ConfigError("unknown efficiency", field=f"efficiencies.{ek}")
                eff[ek] = _coerce(f"efficiencies.{ek}", ev, float)
            continue
        if key == "with_repeater":
            merged[key] = _coerce(key, value, bool)
            continue
        if key not in _SCALAR_FIELDS:
            raise ConfigError("unknown configuration key", field=key)
        merged[key] = _coerce(key, value, _SCALAR_FIELDS[key])
    merged["efficiencies"] = eff

    try:
        efficiencies = ChannelEfficiencies(**{k: float(v) for k, v in eff.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="efficiencies") from None
    topo = (SwapTopology.with_repeater() if merged.get("with_repeater", True)
            else SwapTopology.without_repeater())
    kwargs = {k: merged[k] for k in _SCALAR_FIELDS if k in merged}
    try:
        return ScenarioConfig(topology=topo, efficiencies=efficiencies, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _coerce(field: str, value, kind):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError("must be true or false", field=field)
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"must be a number, got {type(value).__name__}", field=field)
    if kind is int:
        if int(value) != value:
            raise ConfigError("must be an integer", field=field)
        return int(value)
    return float(value)


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def default_scenario(**overrides) -> ScenarioConfig:
    return scenario_from_dict(overrides)
