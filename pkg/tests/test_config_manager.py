from pathlib import Path

import pytest
import yaml

from PyQIRange.core.config.config_manager import ConfigError, ConfigManager, load_config
from PyQIRange.core.quantum.polarization import AnalyzerSetting
from PyQIRange.core.runners.event_engine import OutcomeConvention

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _error_line_text(path, error):
    return path.read_text(encoding="utf-8").splitlines()[error.line - 1]


def test_load_example_config():
    manager = ConfigManager(str(CONFIG_DIR / "mirror_500m.yaml"))
    config = manager.config
    assert config.seed == 20251018
    assert config.source.pair_rate == pytest.approx(332e3)
    assert config.link.object_distance == pytest.approx(500.0)
    assert config.link.wavelength == pytest.approx(808.049e-9)
    assert config.link.attenuation_coefficient == pytest.approx(2.302585e-5, rel=1e-6)
    assert config.detectors.probe.efficiency == pytest.approx(0.9217)
    assert config.detectors.idler.timing_jitter_rms == pytest.approx(350.0)
    assert config.analysis.bin_width == pytest.approx(1000.0)
    assert config.analysis.histogram_span == pytest.approx(1e7)
    assert config.outcome_convention is OutcomeConvention.FLAGS
    assert len(config.settings) == 4
    assert len(config.sweep.distances) == 7
    assert config.plan().roundtrip_ps == 3_336_542


def test_no_object_config_loads():
    config = ConfigManager(str(CONFIG_DIR / "no_object.yaml")).config
    assert config.link.object_reflectivity == 0.0


def test_unknown_key_reports_line(lab_mapping, write_config):
    lab_mapping["link"]["colour"] = "red"
    path = write_config(lab_mapping)
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager(str(path))
    assert excinfo.value.path == "link.colour"
    assert "unknown key" in str(excinfo.value)
    assert "colour" in _error_line_text(path, excinfo.value)


def test_quantity_without_unit_is_rejected(lab_mapping, write_config):
    lab_mapping["source"]["pair_rate"] = 332000
    path = write_config(lab_mapping)
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager(str(path))
    assert excinfo.value.path == "source.pair_rate"
    assert "unit" in str(excinfo.value)
    assert "pair_rate" in _error_line_text(path, excinfo.value)


@pytest.mark.parametrize("value", ["332 kg", "fast", "5 ns"])
def test_quantity_with_wrong_unit_is_rejected(lab_mapping, value):
    lab_mapping["source"]["pair_rate"] = value
    with pytest.raises(ConfigError, match="source.pair_rate"):
        ConfigManager.from_mapping(lab_mapping)


def test_missing_required_key(lab_mapping, write_config):
    del lab_mapping["link"]["object_distance"]
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager(str(write_config(lab_mapping)))
    assert excinfo.value.path == "link.object_distance"
    assert "missing required key" in str(excinfo.value)


@pytest.mark.parametrize("section,key,value", [
    ("source", "visibility_hv", 1.2),
    ("source", "visibility_ad", 0.999),
    ("plan", "bs_probe_fraction", 1.0),
    ("plan", "duration_per_setting", "0 s"),
    ("plan", "outcome_convention", "both"),
    ("link", "object_reflectivity", "high"),
])
def test_invalid_values(lab_mapping, section, key, value):
    lab_mapping[section][key] = value
    with pytest.raises(ConfigError, match=f"{section}.{key}"):
        ConfigManager.from_mapping(lab_mapping)


def test_invalid_sweep(lab_mapping):
    lab_mapping["sweep"] = {"distances": ["50 m", "-1 m"]}
    with pytest.raises(ConfigError, match="sweep.distances"):
        ConfigManager.from_mapping(lab_mapping)
    lab_mapping["sweep"] = {"distances": ["50 m"], "workers": 0}
    with pytest.raises(ConfigError, match="sweep.workers"):
        ConfigManager.from_mapping(lab_mapping)


def test_malformed_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("source:\n  pair_rate: [332 kHz\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        ConfigManager(str(path))
    assert excinfo.value.line is not None
    path.write_text("- just\n- a list\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        ConfigManager(str(path))
    with pytest.raises(FileNotFoundError):
        ConfigManager(str(tmp_path / "missing.yaml"))


def test_receiver_defaults_to_sender_optics(lab_mapping):
    config = ConfigManager.from_mapping(lab_mapping).config
    assert config.link.receiver.mode_field_diameter == pytest.approx(5e-6)
    assert config.link.receiver.focal_length == pytest.approx(0.080)
    assert config.link.receiver.clear_aperture_diameter == pytest.approx(42e-3)
    assert config.link.receiver.coupling_transmission == 1.0


def test_detector_overrides_merge_with_default(lab_mapping):
    lab_mapping["detectors"]["probe"] = {"efficiency": 0.5}
    lab_mapping["detectors"]["idler"] = {"dead_time": "40 ns"}
    detectors = ConfigManager.from_mapping(lab_mapping).config.detectors
    assert detectors.probe.efficiency == 0.5
    assert detectors.probe.dark_count_rate == pytest.approx(100.0)
    assert detectors.reference.efficiency == pytest.approx(0.9217)
    assert detectors.idler.dead_time == pytest.approx(40_000.0)


def test_explicit_settings(lab_mapping):
    lab_mapping["plan"]["settings"] = [{"alpha": "0 deg", "beta": "22.5 deg"}, {"alpha": "45 deg", "beta": "0 deg"}]
    config = ConfigManager.from_mapping(lab_mapping).config
    assert config.settings == (AnalyzerSetting(0.0, 22.5), AnalyzerSetting(45.0, 0.0))
    lab_mapping["plan"]["settings"] = [{"alpha": "0 deg"}]
    with pytest.raises(ConfigError, match=r"plan.settings\[0\]"):
        ConfigManager.from_mapping(lab_mapping)


def test_transmitted_only_expands_to_sixteen_settings(lab_mapping):
    lab_mapping["plan"]["outcome_convention"] = "transmitted_only"
    assert len(ConfigManager.from_mapping(lab_mapping).config.settings) == 16


def test_hash_tracks_parameters_not_output_location(lab_mapping):
    base = ConfigManager.from_mapping(lab_mapping)
    moved = ConfigManager.from_mapping(lab_mapping)
    moved.apply_overrides(output_dir="elsewhere", workers=4)
    assert moved.config_hash() == base.config_hash()
    assert moved.config.output_dir == Path("elsewhere")
    assert moved.workers == 4

    for overrides in ({"seed": 1}, {"bin_width": "2 ns"}, {"k_sigma": 2.0}):
        changed = ConfigManager.from_mapping(lab_mapping)
        changed.apply_overrides(**overrides)
        assert changed.config_hash() != base.config_hash()

    lab_mapping["link"]["object_reflectivity"] = 0.5
    assert ConfigManager.from_mapping(lab_mapping).config_hash() != base.config_hash()


def test_invalid_overrides(lab_mapping):
    manager = ConfigManager.from_mapping(lab_mapping)
    with pytest.raises(ConfigError, match="--bin-width"):
        manager.apply_overrides(bin_width="2 kg")
    with pytest.raises(ConfigError, match="--workers"):
        manager.apply_overrides(workers=0)


def test_mapping_round_trip_keeps_hash(lab_mapping):
    manager = ConfigManager.from_mapping(lab_mapping)
    mapping = yaml.safe_load(yaml.safe_dump(manager.to_mapping()))
    reloaded = ConfigManager.from_mapping(mapping)
    assert reloaded.config_hash() == manager.config_hash()
    assert reloaded.config.plan() == manager.config.plan()


def test_load_config_applies_overrides(write_config, lab_mapping, tmp_path):
    manager = load_config(str(write_config(lab_mapping)), seed=5, output_dir=str(tmp_path / "run"))
    assert manager.config.seed == 5
    assert manager.config.output_dir == tmp_path / "run"
