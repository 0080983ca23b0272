"""Bundled scenario presets (a)-(d) and noise profiles."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .sim import NoiseConfig, ScenarioConfig, noise_from_dict, scenario_from_dict

PRESET_NAMES = ("a", "b", "c", "d")
NOISE_PROFILES = ("none", "calibrated")


def _preset_text(name: str) -> str:
    return resources.files(__package__).joinpath("presets", f"{name}.json").read_text()


def preset_dict(name: str) -> dict:
    return json.loads(_preset_text(name))


def load_scenario(name_or_path: str | Path, seed: int | None = None) -> ScenarioConfig:
    """Load a preset by letter or a scenario JSON file by path."""
    key = str(name_or_path)
    if key in PRESET_NAMES:
        d = preset_dict(key)
    else:
        d = json.loads(Path(key).read_text())
    sc = scenario_from_dict(d)
    return sc if seed is None else sc.with_seed(seed)


def noise_profile_dict(name_or_path: str | Path) -> dict:
    key = str(name_or_path)
    if key == "none":
        return {"noise": {}}
    if key in NOISE_PROFILES:
        return json.loads(resources.files(__package__).joinpath("presets", f"noise_{key}.json").read_text())
    return json.loads(Path(key).read_text())


def load_noise_profile(name_or_path: str | Path) -> NoiseConfig:
    return noise_from_dict(noise_profile_dict(name_or_path).get("noise"))


def profile_run_overrides(name_or_path: str | Path) -> dict:
    """Processing settings a noise profile was calibrated with (for example
    a static-window force tolerance wide enough for its force noise)."""
    return dict(noise_profile_dict(name_or_path).get("run_config", {}))
