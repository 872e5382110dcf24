"""
Configuration Manager

Loads and validates the YAML experiment configuration for PyQIRange.

Every physical quantity in the file is a string with an explicit unit ("5 um", "1 ns",
"332 kHz", "0.1 dB/km", "22.5 deg"); dimensionless quantities are plain numbers. The file
is validated completely before anything runs: unknown keys, missing required keys,
wrong units and out-of-range values raise ConfigError naming the key path and, when the
value came from a file, its line number.

Validated values are kept as a nested dictionary in SI base units (m, s, 1/s, deg, 1/m).
That dictionary is what gets hashed into run manifests and what `to_mapping` writes back
out with explicit base units, so a manifest reloads into the identical configuration.
"""
import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import yaml

from PyQIRange.core.channel.gaussian_beam import CollimatorSpec
from PyQIRange.core.channel.link_budget import LinkModel
from PyQIRange.core.constants import Constants
from PyQIRange.core.extractors.protocol import AnalysisParameters
from PyQIRange.core.quantum.polarization import AnalyzerSetting, ChshSettings, SourceModel
from PyQIRange.core.runners.event_engine import (
    DetectorModel, DetectorSet, ExperimentPlan, FiberDelays, OutcomeConvention, expand_chsh_settings)
from PyQIRange.core.utils.unit_converter import parse_quantity, seconds_to_ps

# Base unit written back for each quantity kind.
BASE_UNITS = {"length": "m", "time": "s", "rate": "Hz", "angle": "deg", "attenuation": "1/m"}
# Keys that never influence results and are therefore left out of hashes and manifests.
UNHASHED_KEYS = ("output_dir", "workers")


class ConfigError(ValueError):
    """Invalid configuration; the message carries the key path and line number."""

    def __init__(self, path: str, message: str, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        location = f"{path} (line {line})" if line is not None else path
        super().__init__(f"{location}: {message}" if path else message)


class Field(NamedTuple):
    kind: str
    default: Any = None
    required: bool = False


def _required(kind: str) -> Field:
    return Field(kind, required=True)


_COLLIMATOR = {
    "mode_field_diameter": _required("length"),
    "focal_length": _required("length"),
    "clear_aperture": _required("length"),
    "coupling": Field("fraction", Constants.DEFAULT_COUPLING_TRANSMISSION),
}
_RECEIVER = {
    # Only apertures and coupling act on the return beam; the optics default to the sender's.
    "mode_field_diameter": Field("length"),
    "focal_length": Field("length"),
    "clear_aperture": _required("length"),
    "coupling": Field("fraction", 1.0),
}
_DETECTOR_DEFAULT = {
    "efficiency": _required("fraction"),
    "dark_count_rate": Field("rate", f"{Constants.DEFAULT_DARK_COUNT_RATE:g} Hz"),
    "timing_jitter": Field("time", f"{Constants.DEFAULT_TIMING_JITTER_PS:g} ps"),
    "dead_time": Field("time", "0 s"),
}
_DETECTOR_OVERRIDE = {key: Field(spec.kind) for key, spec in _DETECTOR_DEFAULT.items()}

SCHEMA: Dict[str, Any] = {
    "seed": Field("int", 0),
    "output_dir": Field("str", "output"),
    "source": {
        "pair_rate": _required("rate"),
        "wavelength": _required("length"),
        "visibility_hv": Field("fraction", 1.0),
        "visibility_ad": Field("fraction", 1.0),
        "heralding_efficiency": Field("fraction", 1.0),
    },
    "link": {
        "sender": _COLLIMATOR,
        "receiver": _RECEIVER,
        "pbs_aperture": _required("length"),
        "object_distance": _required("length"),
        "object_diameter": _required("length"),
        "object_reflectivity": _required("fraction"),
        "attenuation": Field("attenuation", f"{Constants.DEFAULT_ATTENUATION_DB_PER_KM:g} dB/km"),
        "pointing_rms": Field("length", "0 m"),
    },
    "detectors": {
        "default": _DETECTOR_DEFAULT,
        "probe": _DETECTOR_OVERRIDE,
        "reference": _DETECTOR_OVERRIDE,
        "idler": _DETECTOR_OVERRIDE,
    },
    "delays": {
        "probe": Field("time", "0 s"),
        "reference": Field("time", "0 s"),
        "idler": Field("time", "0 s"),
    },
    "plan": {
        "duration_per_setting": _required("time"),
        "bs_probe_fraction": Field("fraction", 0.5),
        "outcome_convention": Field("convention", OutcomeConvention.FLAGS.value),
        "chsh": {
            "alpha": Field("angle", "0 deg"),
            "alpha_prime": Field("angle", "45 deg"),
            "beta": Field("angle", "67.5 deg"),
            "beta_prime": Field("angle", "22.5 deg"),
        },
        "settings": Field("settings"),
    },
    "analysis": {
        "bin_width": Field("time", "1 ns"),
        "histogram_start": Field("time", "0 s"),
        "max_delay": Field("time", "10 us"),
        "window_half_width": Field("time", "1.5 ns"),
        "min_significance": Field("number", 5.0),
        "guard_bins": Field("int", 3),
        "refine_peak": Field("bool", False),
        "k_sigma": Field("number", 3.0),
        "subtract_accidentals": Field("bool", False),
        "sideband_offset": Field("time", "20 ns"),
    },
    "sweep": {
        "distances": _required("length_list"),
        "workers": Field("int", 1),
        "simulate": Field("bool", True),
    },
}
# Sections that may be omitted entirely.
OPTIONAL_SECTIONS = ("sweep",)


@dataclass(frozen=True)
class SweepSpec:
    distances: Tuple[float, ...]
    workers: int = 1
    simulate: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete validated description of an experiment."""
    seed: int
    output_dir: Path
    source: SourceModel
    link: LinkModel
    detectors: DetectorSet
    delays: FiberDelays
    duration_per_setting: float
    bs_probe_fraction: float
    outcome_convention: OutcomeConvention
    chsh: ChshSettings
    settings: Tuple[AnalyzerSetting, ...]
    analysis: AnalysisParameters
    sweep: Optional[SweepSpec] = None

    def plan(self, object_distance: Optional[float] = None, seed: Optional[int] = None) -> ExperimentPlan:
        link = self.link if object_distance is None else self.link.with_distance(object_distance)
        return ExperimentPlan(
            duration_per_setting=self.duration_per_setting,
            settings=self.settings,
            seed=self.seed if seed is None else seed,
            source=self.source,
            link=link,
            detectors=self.detectors,
            bs_probe_fraction=self.bs_probe_fraction,
            delays=self.delays,
            outcome_convention=self.outcome_convention,
            chsh=self.chsh,
        )


def _line_index(text: str) -> Dict[str, int]:
    """Map dotted key paths to 1-based line numbers of their keys."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node: Any, path: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                child = f"{path}.{key_node.value}" if path else str(key_node.value)
                lines[child] = key_node.start_mark.line + 1
                walk(value_node, child)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                child = f"{path}[{i}]"
                lines[child] = item.start_mark.line + 1
                walk(item, child)

    if root is not None:
        walk(root, "")
    return lines


class ConfigManager:
    def __init__(self, config_path: Optional[str] = None, mapping: Optional[Dict[str, Any]] = None) -> None:
        if config_path is None and mapping is None:
            raise ValueError("Either config_path or mapping is required")
        self.config_path = Path(config_path).resolve() if config_path is not None else None
        self._lines: Dict[str, int] = {}
        raw = self._load_config(self.config_path) if mapping is None else mapping
        self.values: Dict[str, Any] = self._validate(raw)
        self.config: ExperimentConfig = self._build(self.values)

    @classmethod
    def from_mapping(cls, mapping: Dict[str, Any]) -> "ConfigManager":
        return cls(mapping=mapping)

    @property
    def config_dir(self) -> Path:
        """Return the directory containing the config file."""
        return self.config_path.parent if self.config_path is not None else Path.cwd()

    def _load_config(self, config_path: Path) -> Dict[str, Any]:
        if not config_path.is_file():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")
        text = config_path.read_text(encoding="utf-8")
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError("", f"Error parsing YAML configuration: {e}",
                              mark.line + 1 if mark is not None else None)
        self._lines = _line_index(text)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("", "Top level of the configuration must be a mapping", 1)
        return raw

    def _error(self, path: str, message: str) -> ConfigError:
        line = self._lines.get(path)
        # Fall back to the closest enclosing key that has a line.
        probe = path
        while line is None and "." in probe:
            probe = probe.rsplit(".", 1)[0]
            line = self._lines.get(probe)
        return ConfigError(path, message, line)

    # ------------------------------------------------------------------ validation

    def _validate(self, raw: Dict[str, Any]) -> Dict[str, Any]:
        values = self._validate_section(raw, SCHEMA, "")
        self._check_consistency(values)
        return values

    def _validate_section(self, node: Any, schema: Dict[str, Any], path: str) -> Dict[str, Any]:
        if node is None:
            node = {}
        if not isinstance(node, dict):
            raise self._error(path, f"expected a mapping, got {type(node).__name__}")
        for key in node:
            if key not in schema:
                child = f"{path}.{key}" if path else str(key)
                raise self._error(child, f"unknown key (allowed: {', '.join(schema)})")

        values: Dict[str, Any] = {}
        for key, spec in schema.items():
            child = f"{path}.{key}" if path else key
            if isinstance(spec, dict):
                if key not in node and not path and key in OPTIONAL_SECTIONS:
                    values[key] = None
                    continue
                values[key] = self._validate_section(node.get(key), spec, child)
                continue
            if key not in node or node[key] is None:
                if spec.required:
                    raise self._error(child, "value must not be empty" if key in node else "missing required key")
                values[key] = None if spec.default is None else self._convert(spec.default, spec.kind, child)
                continue
            values[key] = self._convert(node[key], spec.kind, child)
        return values

    def _convert(self, value: Any, kind: str, path: str) -> Any:
        try:
            if kind in BASE_UNITS:
                if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                    raise ValueError(f"expected a {kind} with unit, got {value!r}")
                result = parse_quantity(value, kind)
                if not math.isfinite(result):
                    raise ValueError(f"{value!r} is not finite")
                return result
            if kind in ("fraction", "number"):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValueError(f"expected a plain number, got {value!r}")
                if not math.isfinite(value):
                    raise ValueError(f"{value!r} is not finite")
                if kind == "fraction" and not 0.0 <= value <= 1.0:
                    raise ValueError(f"{value} is outside [0, 1]")
                return float(value)
            if kind == "int":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ValueError(f"expected an integer, got {value!r}")
                return int(value)
            if kind == "bool":
                if not isinstance(value, bool):
                    raise ValueError(f"expected true or false, got {value!r}")
                return value
            if kind == "str":
                if not isinstance(value, str) or not value:
                    raise ValueError(f"expected a non-empty string, got {value!r}")
                return value
            if kind == "convention":
                return OutcomeConvention(value).value
            if kind == "length_list":
                if not isinstance(value, list) or not value:
                    raise ValueError("expected a non-empty list of lengths")
                return [self._convert(item, "length", f"{path}[{i}]") for i, item in enumerate(value)]
            if kind == "settings":
                return self._convert_settings(value, path)
        except ConfigError:
            raise
        except ValueError as e:
            raise self._error(path, str(e))
        raise self._error(path, f"unsupported field kind '{kind}'")

    def _convert_settings(self, value: Any, path: str) -> List[Dict[str, float]]:
        if not isinstance(value, list) or not value:
            raise ValueError("expected a non-empty list of {alpha, beta} settings")
        settings = []
        for i, item in enumerate(value):
            item_path = f"{path}[{i}]"
            if not isinstance(item, dict) or set(item) != {"alpha", "beta"}:
                raise self._error(item_path, "each setting needs exactly the keys alpha and beta")
            settings.append({
                "alpha": self._convert(item["alpha"], "angle", f"{item_path}.alpha"),
                "beta": self._convert(item["beta"], "angle", f"{item_path}.beta"),
            })
        return settings

    def _check_consistency(self, values: Dict[str, Any]) -> None:
        if values["seed"] < 0 or values["seed"] >= 2 ** 64:
            raise self._error("seed", "must be a 64-bit unsigned integer")
        source = values["source"]
        if source["visibility_ad"] > source["visibility_hv"]:
            raise self._error("source.visibility_ad", "must not exceed visibility_hv")
        if not 0.0 < values["plan"]["bs_probe_fraction"] < 1.0:
            raise self._error("plan.bs_probe_fraction", "must lie strictly between 0 and 1")
        if values["plan"]["duration_per_setting"] <= 0.0:
            raise self._error("plan.duration_per_setting", "must be positive")
        sweep = values.get("sweep")
        if sweep is not None:
            if sweep["workers"] < 1:
                raise self._error("sweep.workers", "must be at least 1")
            if any(d <= 0 for d in sweep["distances"]):
                raise self._error("sweep.distances", "distances must be positive")

    # ------------------------------------------------------------------ model building

    def _build(self, values: Dict[str, Any]) -> ExperimentConfig:
        section = "source"
        try:
            s = values["source"]
            source = SourceModel(s["pair_rate"], s["visibility_hv"], s["visibility_ad"], s["heralding_efficiency"])

            section = "link"
            link_values = values["link"]
            sender_values, receiver_values = link_values["sender"], link_values["receiver"]
            sender = CollimatorSpec(sender_values["mode_field_diameter"], sender_values["focal_length"],
                                    sender_values["clear_aperture"], sender_values["coupling"])
            receiver = CollimatorSpec(
                receiver_values["mode_field_diameter"] or sender.mode_field_diameter,
                receiver_values["focal_length"] or sender.focal_length,
                receiver_values["clear_aperture"], receiver_values["coupling"])
            link = LinkModel(
                sender=sender,
                receiver=receiver,
                receiver_pbs_aperture_diameter=link_values["pbs_aperture"],
                object_distance=link_values["object_distance"],
                object_diameter=link_values["object_diameter"],
                object_reflectivity=link_values["object_reflectivity"],
                attenuation_coefficient=link_values["attenuation"],
                wavelength=s["wavelength"],
                pointing_rms=link_values["pointing_rms"],
            )

            section = "detectors"
            detectors = DetectorSet(**{name: self._detector(values["detectors"], name)
                                       for name in ("probe", "reference", "idler")})

            section = "delays"
            d = values["delays"]
            delays = FiberDelays(seconds_to_ps(d["probe"]), seconds_to_ps(d["reference"]), seconds_to_ps(d["idler"]))

            section = "plan"
            plan = values["plan"]
            chsh = ChshSettings(**plan["chsh"])
            convention = OutcomeConvention(plan["outcome_convention"])
            if plan["settings"]:
                settings = tuple(AnalyzerSetting(item["alpha"], item["beta"]) for item in plan["settings"])
            else:
                settings = expand_chsh_settings(chsh, convention)

            section = "analysis"
            a = values["analysis"]
            analysis = AnalysisParameters(
                bin_width=seconds_to_ps(a["bin_width"]),
                histogram_start=seconds_to_ps(a["histogram_start"]),
                histogram_span=seconds_to_ps(a["max_delay"] - a["histogram_start"]),
                window_half_width=seconds_to_ps(a["window_half_width"]),
                min_significance=a["min_significance"],
                guard_bins=a["guard_bins"],
                refine_peak=a["refine_peak"],
                k_sigma=a["k_sigma"],
                subtract_accidentals=a["subtract_accidentals"],
                sideband_offset=seconds_to_ps(a["sideband_offset"]),
            )

            section = "sweep"
            sweep = None
            if values.get("sweep") is not None:
                sw = values["sweep"]
                sweep = SweepSpec(tuple(sw["distances"]), sw["workers"], sw["simulate"])
        except ConfigError:
            raise
        except ValueError as e:
            raise self._error(section, str(e))

        return ExperimentConfig(
            seed=values["seed"],
            output_dir=Path(values["output_dir"]),
            source=source,
            link=link,
            detectors=detectors,
            delays=delays,
            duration_per_setting=plan["duration_per_setting"],
            bs_probe_fraction=plan["bs_probe_fraction"],
            outcome_convention=convention,
            chsh=chsh,
            settings=settings,
            analysis=analysis,
            sweep=sweep,
        )

    @staticmethod
    def _detector(detectors: Dict[str, Any], name: str) -> DetectorModel:
        merged = dict(detectors["default"])
        merged.update({k: v for k, v in detectors[name].items() if v is not None})
        return DetectorModel(
            efficiency=merged["efficiency"],
            dark_count_rate=merged["dark_count_rate"],
            timing_jitter_rms=seconds_to_ps(merged["timing_jitter"]),
            dead_time=seconds_to_ps(merged["dead_time"]),
        )

    # ------------------------------------------------------------------ overrides & serialization

    def apply_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                        workers: Optional[int] = None, bin_width: Optional[str] = None,
                        k_sigma: Optional[float] = None) -> None:
        """
        Apply command-line overrides on top of the validated file.

        Raises:
            ConfigError: if an override is invalid.
        """
        values = copy.deepcopy(self.values)
        if seed is not None:
            values["seed"] = self._convert(seed, "int", "--seed")
        if output_dir is not None:
            values["output_dir"] = self._convert(str(output_dir), "str", "--out")
        if bin_width is not None:
            values["analysis"]["bin_width"] = self._convert(bin_width, "time", "--bin-width")
        if k_sigma is not None:
            values["analysis"]["k_sigma"] = self._convert(k_sigma, "number", "--k-sigma")
        if workers is not None:
            if workers < 1:
                raise ConfigError("--workers", "must be at least 1")
            if values.get("sweep") is not None:
                values["sweep"]["workers"] = workers
        self._check_consistency(values)
        self.values = values
        self.config = self._build(values)
        if any(v is not None for v in (seed, output_dir, workers, bin_width, k_sigma)):
            logging.debug(f"Configuration after command-line overrides: hash {self.config_hash()}")

    @property
    def workers(self) -> int:
        sweep = self.values.get("sweep")
        return sweep["workers"] if sweep is not None else 1

    def canonical_values(self) -> Dict[str, Any]:
        """Validated values without keys that cannot change results."""
        return _strip_unhashed(self.values)

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON of the SI values."""
        payload = json.dumps(self.canonical_values(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_mapping(self) -> Dict[str, Any]:
        """Configuration as a YAML-ready mapping with explicit base units, reloadable by from_mapping."""
        return _with_units(self.canonical_values(), SCHEMA)


def _strip_unhashed(values: Any) -> Any:
    if isinstance(values, dict):
        return {k: _strip_unhashed(v) for k, v in values.items() if k not in UNHASHED_KEYS}
    if isinstance(values, list):
        return [_strip_unhashed(v) for v in values]
    return values


def _with_units(values: Dict[str, Any], schema: Dict[str, Any]) -> Dict[str, Any]:
    mapping: Dict[str, Any] = {}
    for key, value in values.items():
        spec = schema[key]
        if value is None:
            continue
        if isinstance(spec, dict):
            mapping[key] = _with_units(value, spec)
        elif spec.kind in BASE_UNITS:
            mapping[key] = f"{value!r} {BASE_UNITS[spec.kind]}"
        elif spec.kind == "length_list":
            mapping[key] = [f"{v!r} m" for v in value]
        elif spec.kind == "settings":
            mapping[key] = [{"alpha": f"{s['alpha']!r} deg", "beta": f"{s['beta']!r} deg"} for s in value]
        else:
            mapping[key] = value
    return mapping


def load_config(config_path: str, **overrides: Any) -> ConfigManager:
    manager = ConfigManager(config_path)
    manager.apply_overrides(**overrides)
    return manager
