"""Configuration-driven experiment runner."""

from .config import ConfigError, Scenario, load, resolve, set_path, validate
from .presets import names as preset_names
from .presets import preset_dict
from .runner import Bundle, RunError, read_manifest, rerun, run, simulate, sweep


def preset(name: str) -> Scenario:
    """Fully resolved built-in scenario."""
    try:
        raw = preset_dict(name)
    except KeyError as exc:
        raise ConfigError([("preset", exc.args[0])]) from exc
    return Scenario(resolve(raw))


__all__ = [
    "Bundle",
    "ConfigError",
    "RunError",
    "Scenario",
    "load",
    "preset",
    "preset_names",
    "read_manifest",
    "rerun",
    "resolve",
    "run",
    "set_path",
    "simulate",
    "sweep",
    "validate",
]
