"""Scenario files: schema, defaults, preset inheritance and the resolved :class:`Scenario`.

A scenario is a YAML or JSON mapping.  ``seed`` is mandatory.  ``preset: <name>``
starts from a built-in scenario and deep-merges the file's keys on top of it
(lists such as ``arms`` and ``analyses`` are replaced, not merged).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import jsonschema
import yaml

from ..instrument import NoiseSpec
from ..medium import DEFAULT_EXCITED_DECAY_HZ, DEFAULT_GAMMA_HZ_PER_NT, FieldDrive, ZeemanCalibration
from ..optics import RB87_D1_WAVELENGTH_M, PolarimeterConfig
from ..waveforms import MagneticWaveformSpec


class ConfigError(ValueError):
    """Schema or semantic violation; ``errors`` holds ``(key_path, message)`` pairs."""

    def __init__(self, errors):
        self.errors = [(str(p), str(m)) for p, m in errors]
        super().__init__("; ".join(f"{p}: {m}" if p else m for p, m in self.errors))

    def to_dict(self) -> dict:
        return {"error": "config", "details": [{"path": p, "message": m} for p, m in self.errors]}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_window = {"type": "array", "items": _nonneg, "minItems": 2, "maxItems": 2}


def _opt(schema: dict) -> dict:
    return {"oneOf": [schema, {"type": "null"}]}


_DRIVE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["rabi_hz"],
    "properties": {
        "rabi_hz": _nonneg,
        "rabi_minus_hz": _nonneg,
        "detuning_hz": _num,
        "intensity_uw_cm2": _opt(_nonneg),
    },
}

_NOISE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"white_psd_v2_per_hz": _nonneg, "scope_noise_rms_v": _nonneg},
}

_ANALYSES = {
    "time_domain": {
        "required": ["signal_window_s", "noise_window_s"],
        "properties": {"signal_window_s": _window, "noise_window_s": _window},
    },
    "spectrum": {
        "required": ["f0_hz"],
        "properties": {"f0_hz": _nonneg, "tol_hz": _pos, "floor_band_hz": _opt(_window)},
    },
    "amplitude_sweep": {
        "required": ["amplitudes_nt", "f0_hz"],
        "properties": {
            "amplitudes_nt": {"type": "array", "items": _pos, "minItems": 3},
            "f0_hz": _nonneg,
            "tol_hz": _pos,
        },
    },
    "enhancement": {
        "required": ["wm_arm", "single_arm", "f0_hz"],
        "properties": {"wm_arm": {"type": "string"}, "single_arm": {"type": "string"}, "f0_hz": _nonneg, "tol_hz": _pos},
    },
    "resonance_scan": {
        "properties": {"points": {"type": "integer", "minimum": 11}, "halfwidth_hz": _opt(_pos)},
    },
    "rabi_sweep": {
        "required": ["arm", "rabi_hz"],
        "properties": {
            "arm": {"type": "string"},
            "rabi_hz": {"type": "array", "items": _pos, "minItems": 2},
            "points": {"type": "integer", "minimum": 11},
        },
    },
}


def _analysis_schema() -> dict:
    variants = []
    for kind, body in _ANALYSES.items():
        props = {"type": {"const": kind}, **body.get("properties", {})}
        variants.append(
            {
                "type": "object",
                "additionalProperties": False,
                "required": ["type", *body.get("required", [])],
                "properties": props,
                "if": {"properties": {"type": {"const": kind}}},
            }
        )
    # dispatch on "type" so errors point at the offending variant rather than a vague oneOf
    return {
        "type": "object",
        "required": ["type"],
        "properties": {"type": {"enum": list(_ANALYSES)}},
        "allOf": [{"if": v.pop("if"), "then": v} for v in variants],
    }


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "preset": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "zeeman": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gamma_hz_per_nt": _pos},
        },
        "atoms": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "excited_decay_hz": _pos,
                "ground_decoherence_hz": _pos,
                "relative_dipoles": {"type": "object", "additionalProperties": _pos},
            },
        },
        "arms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "scheme", "probe"],
                "properties": {
                    "label": {"type": "string", "pattern": "^[A-Za-z0-9_-]+$"},
                    "scheme": {"enum": ["single_lambda", "wave_mixing"]},
                    "probe": _DRIVE,
                    "wm": _opt(_DRIVE),
                    "trapped_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                    "n_scans": _opt({"type": "integer", "minimum": 1}),
                    "noise": _NOISE,
                },
            },
        },
        "waveform": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "sine", "square", "gaussian_train"]},
                "amplitude_nt": _num,
                "rate_hz": _nonneg,
                "fwhm_s": _opt(_pos),
                "offset_nt": _num,
                "duration_s": _pos,
                "sample_rate_hz": _pos,
            },
        },
        "noise": _NOISE,
        "polarimeter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "cell_length_m": _pos,
                "wavelength_m": _pos,
                "input_intensity": _nonneg,
                "detector_gain": _pos,
                "analyzer_angle_rad": _num,
            },
        },
        "calibration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "reference_arm": {"type": "string"},
                "target_peak_v": _pos,
                "scale": _pos,
            },
        },
        "scope": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_scans": {"type": "integer", "minimum": 1}},
        },
        "analyzer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rbw_hz": _pos,
                "n_spectra": {"type": "integer", "minimum": 1},
                "duration_s": _opt(_pos),
            },
        },
        "analyses": {"type": "array", "items": _analysis_schema()},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": _opt({"type": "string"}), "format": {"enum": ["csv", "jsonl"]}},
        },
        "metadata": {"type": "object"},
    },
}

DEFAULTS: dict[str, Any] = {
    "name": "scenario",
    "description": "",
    "zeeman": {"gamma_hz_per_nt": DEFAULT_GAMMA_HZ_PER_NT},
    "atoms": {"excited_decay_hz": DEFAULT_EXCITED_DECAY_HZ, "ground_decoherence_hz": 1000.0, "relative_dipoles": {}},
    "waveform": {
        "kind": "constant",
        "amplitude_nt": 0.0,
        "rate_hz": 0.0,
        "fwhm_s": None,
        "offset_nt": 0.0,
        "duration_s": 0.025,
        "sample_rate_hz": 20_000.0,
    },
    "noise": {"white_psd_v2_per_hz": 0.0, "scope_noise_rms_v": 0.0},
    "polarimeter": {
        "cell_length_m": 0.05,
        "wavelength_m": RB87_D1_WAVELENGTH_M,
        "input_intensity": 1.0,
        "detector_gain": 1.0,
        "analyzer_angle_rad": 0.7853981633974483,
    },
    "calibration": {},
    "scope": {"n_scans": 1},
    "analyzer": {"rbw_hz": 0.725, "n_spectra": 1, "duration_s": None},
    "analyses": [],
    "output": {"dir": None, "format": "csv"},
    "metadata": {},
}

ARM_DEFAULTS = {"wm": None, "trapped_fraction": 0.0, "n_scans": None, "noise": {}}
DRIVE_DEFAULTS = {"detuning_hz": 0.0, "intensity_uw_cm2": None}
ANALYSIS_DEFAULTS = {
    "spectrum": {"tol_hz": 2.0, "floor_band_hz": None},
    "amplitude_sweep": {"tol_hz": 2.0},
    "enhancement": {"tol_hz": 2.0},
    "resonance_scan": {"points": 201, "halfwidth_hz": None},
    "rabi_sweep": {"points": 201},
}


def deep_merge(base: Mapping, over: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _path(err: jsonschema.ValidationError) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else ("." if parts else "") + str(p))
    return "".join(parts)


def _error_path(err: jsonschema.ValidationError) -> str:
    path = _path(err)
    if err.validator == "required":
        # point at the missing key itself rather than its parent
        missing = next((k for k in err.validator_value if k not in err.instance), None)
        if missing is not None:
            return f"{path}.{missing}" if path else missing
    return path


def validate(raw: Mapping) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigError([(_error_path(e), e.message) for e in errors])


def load_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([("", f"cannot read {path}: {exc.strerror}")]) from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError([("", f"cannot parse {path}: {exc}")]) from exc
    if not isinstance(data, dict):
        raise ConfigError([("", "top level must be a mapping")])
    return data


def resolve(raw: Mapping) -> dict:
    """Validate ``raw``, apply its preset and fill every default.

    The result no longer carries ``preset`` and is itself a valid scenario file.
    """
    validate(raw)
    raw = dict(raw)
    name = raw.pop("preset", None)
    if name is not None:
        from .presets import preset_dict

        try:
            base = preset_dict(name)
        except KeyError as exc:
            raise ConfigError([("preset", str(exc.args[0]))]) from exc
        merged = deep_merge(base, raw)
        if "calibration" in raw:
            # one calibration mode replaces the other rather than mixing with it
            merged["calibration"] = copy.deepcopy(raw["calibration"])
        raw = merged
    cfg = deep_merge(DEFAULTS, raw)
    if not cfg["calibration"]:
        cfg["calibration"] = {"scale": 1.0}
    if "arms" not in cfg:
        raise ConfigError([("arms", "at least one arm is required")])
    cfg["arms"] = [_resolve_arm(a) for a in cfg["arms"]]
    cfg["analyses"] = [deep_merge(ANALYSIS_DEFAULTS.get(a["type"], {}), a) for a in cfg["analyses"]]
    validate(cfg)
    _check_semantics(cfg)
    return cfg


def _resolve_arm(arm: Mapping) -> dict:
    out = deep_merge(ARM_DEFAULTS, arm)
    out["probe"] = deep_merge(DRIVE_DEFAULTS, out["probe"])
    if out["wm"] is not None:
        out["wm"] = deep_merge(DRIVE_DEFAULTS, out["wm"])
    return out


def _check_semantics(cfg: Mapping) -> None:
    errors = []
    labels = [a["label"] for a in cfg["arms"]]
    if len(set(labels)) != len(labels):
        errors.append(("arms", f"duplicate arm labels {labels}"))
    for i, arm in enumerate(cfg["arms"]):
        if arm["scheme"] == "single_lambda" and arm["wm"] is not None:
            errors.append((f"arms[{i}].wm", "single_lambda arm cannot take a wave-mixing drive"))
        if arm["scheme"] == "single_lambda" and arm["trapped_fraction"]:
            errors.append((f"arms[{i}].trapped_fraction", "only wave_mixing arms have a reservoir"))
    ref = cfg["calibration"].get("reference_arm")
    if ref is not None and ref not in labels:
        errors.append(("calibration.reference_arm", f"unknown arm {ref!r}"))
    if "scale" in cfg["calibration"] and "target_peak_v" in cfg["calibration"]:
        errors.append(("calibration", "give either 'scale' or 'target_peak_v', not both"))
    for i, a in enumerate(cfg["analyses"]):
        for key in ("wm_arm", "single_arm", "arm"):
            if key in a and a[key] not in labels:
                errors.append((f"analyses[{i}].{key}", f"unknown arm {a[key]!r}"))
        for key in ("signal_window_s", "noise_window_s", "floor_band_hz"):
            w = a.get(key)
            if w is not None and not w[0] < w[1]:
                errors.append((f"analyses[{i}].{key}", "start must be below stop"))
    try:
        waveform_spec(cfg)
    except ValueError as exc:
        errors.append(("waveform", str(exc)))
    if errors:
        raise ConfigError(errors)


def load(path_or_mapping) -> "Scenario":
    raw = path_or_mapping if isinstance(path_or_mapping, Mapping) else load_file(path_or_mapping)
    return Scenario(resolve(raw))


# --- typed views of a resolved config --------------------------------------


def waveform_spec(cfg: Mapping, **overrides) -> MagneticWaveformSpec:
    w = dict(cfg["waveform"], **overrides)
    return MagneticWaveformSpec(
        kind=w["kind"],
        amplitude=float(w["amplitude_nt"]),
        frequency_or_rate=float(w["rate_hz"]),
        fwhm=None if w["fwhm_s"] is None else float(w["fwhm_s"]),
        offset=float(w["offset_nt"]),
        duration=float(w["duration_s"]),
        sample_rate=float(w["sample_rate_hz"]),
    )


def drive(role: str, d: Mapping) -> FieldDrive:
    rabi = float(d["rabi_hz"])
    return FieldDrive(
        role,
        rabi,
        float(d.get("rabi_minus_hz", rabi)),
        float(d["detuning_hz"]),
        d.get("intensity_uw_cm2"),
    )


@dataclass(frozen=True)
class Scenario:
    """A fully resolved scenario; ``config`` is the plain mapping written to manifests."""

    config: dict = field(repr=False)

    @property
    def name(self) -> str:
        return self.config["name"]

    @property
    def seed(self) -> int:
        return int(self.config["seed"])

    @property
    def arms(self) -> list[dict]:
        return self.config["arms"]

    def arm(self, label: str) -> dict:
        for a in self.arms:
            if a["label"] == label:
                return a
        raise KeyError(label)

    @property
    def calibration(self) -> ZeemanCalibration:
        return ZeemanCalibration(self.config["zeeman"]["gamma_hz_per_nt"])

    @property
    def waveform(self) -> MagneticWaveformSpec:
        return waveform_spec(self.config)

    @property
    def polarimeter(self) -> PolarimeterConfig:
        p = self.config["polarimeter"]
        return PolarimeterConfig(
            cell_length=p["cell_length_m"],
            wavelength=p["wavelength_m"],
            input_intensity=p["input_intensity"],
            detector_gain=p["detector_gain"],
            analyzer_angle=p["analyzer_angle_rad"],
        )

    def noise(self, label: Optional[str] = None) -> NoiseSpec:
        n = dict(self.config["noise"])
        if label is not None:
            n.update(self.arm(label)["noise"])
        return NoiseSpec(n["white_psd_v2_per_hz"], n["scope_noise_rms_v"], self.seed)

    def n_scans(self, label: str) -> int:
        own = self.arm(label)["n_scans"]
        return int(own if own is not None else self.config["scope"]["n_scans"])

    def drives(self, label: str) -> list[FieldDrive]:
        arm = self.arm(label)
        out = [drive("probe", arm["probe"])]
        if arm["wm"] is not None:
            out.append(drive("wm", arm["wm"]))
        return out

    def with_overrides(self, overrides: Mapping) -> "Scenario":
        return Scenario(resolve(deep_merge(self.config, overrides)))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.config)


def set_path(cfg: Mapping, path: str, value) -> dict:
    """Copy of ``cfg`` with the dotted ``path`` (``arms[1].probe.rabi_hz`` style) set to ``value``."""
    out = copy.deepcopy(dict(cfg))
    node: Any = out
    tokens = _tokens(path)
    for tok in tokens[:-1]:
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError([(path, "no such key")]) from exc
    last = tokens[-1]
    if isinstance(node, list):
        if not isinstance(last, int) or not -len(node) <= last < len(node):
            raise ConfigError([(path, "no such index")])
    elif not isinstance(node, dict):
        raise ConfigError([(path, "parent is not a mapping")])
    node[last] = value
    return out


def _tokens(path: str) -> list:
    out: list = []
    for part in path.split("."):
        while "[" in part:
            head, rest = part.split("[", 1)
            if head:
                out.append(head)
            idx, part = rest.split("]", 1)
            try:
                out.append(int(idx))
            except ValueError as exc:
                raise ConfigError([(path, f"bad index {idx!r}")]) from exc
        if part:
            out.append(part)
    if not out:
        raise ConfigError([(path, "empty parameter path")])
    return out
