"""
Shared fixtures: the 500 m mirror link, a lossless identity link, plan and config factories.
"""
import copy
from pathlib import Path

import pytest
import yaml

from PyQIRange.core.channel.gaussian_beam import CollimatorSpec
from PyQIRange.core.channel.link_budget import LinkModel
from PyQIRange.core.quantum.polarization import ChshSettings, SourceModel
from PyQIRange.core.runners.event_engine import (
    DetectorModel, DetectorSet, ExperimentPlan, OutcomeConvention, expand_chsh_settings)
from PyQIRange.core.utils.unit_converter import parse_quantity

WAVELENGTH = 808.049e-9
LAB_DISTANCES = (50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0)

LAB_MAPPING = {
    "seed": 20251018,
    "output_dir": "runs/mirror_500m",
    "source": {
        "pair_rate": "332 kHz",
        "wavelength": "808.049 nm",
        "visibility_hv": 0.995,
        "visibility_ad": 0.984,
        "heralding_efficiency": 0.38,
    },
    "link": {
        "sender": {"mode_field_diameter": "5 um", "focal_length": "80 mm", "clear_aperture": "42.5 mm",
                   "coupling": 0.745},
        "receiver": {"clear_aperture": "42 mm", "coupling": 1.0},
        "pbs_aperture": "20.32 mm",
        "object_distance": "500 m",
        "object_diameter": "50.8 mm",
        "object_reflectivity": 0.96,
        "attenuation": "0.1 dB/km",
        "pointing_rms": "0 mm",
    },
    "detectors": {"default": {"efficiency": 0.9217, "dark_count_rate": "100 Hz",
                              "timing_jitter": "350 ps", "dead_time": "0 ns"}},
    "plan": {"duration_per_setting": "0.2 s", "outcome_convention": "flags"},
    "analysis": {"bin_width": "1 ns", "max_delay": "4 us", "window_half_width": "1.5 ns"},
}


def _sender() -> CollimatorSpec:
    return CollimatorSpec(5e-6, 0.080, 42.5e-3, 0.745)


@pytest.fixture
def lab_mapping():
    """Fresh copy of the 500 m mirror configuration as a YAML-ready mapping."""
    return copy.deepcopy(LAB_MAPPING)


@pytest.fixture
def write_config(tmp_path):
    """Write a mapping as YAML and return the path; output_dir is redirected into tmp_path."""
    def _write(mapping, name="config.yaml", redirect_output=True):
        mapping = copy.deepcopy(mapping)
        if redirect_output:
            mapping["output_dir"] = str(tmp_path / "out")
        path = Path(tmp_path) / name
        path.write_text(yaml.safe_dump(mapping, sort_keys=False), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def lab_link():
    return LinkModel(
        sender=_sender(),
        receiver=CollimatorSpec(5e-6, 0.080, 42e-3, 1.0),
        receiver_pbs_aperture_diameter=20.32e-3,
        object_distance=500.0,
        object_diameter=50.8e-3,
        object_reflectivity=0.96,
        attenuation_coefficient=parse_quantity("0.1 dB/km", "attenuation"),
        wavelength=WAVELENGTH,
    )


def make_identity_link(reflectivity: float = 1.0, object_distance: float = 10.0) -> LinkModel:
    """Apertures of a kilometer and unit coupling: transmission equals the reflectivity."""
    return LinkModel(
        sender=CollimatorSpec(5e-6, 0.080, 1e3, 1.0),
        receiver=CollimatorSpec(5e-6, 0.080, 1e3, 1.0),
        receiver_pbs_aperture_diameter=1e3,
        object_distance=object_distance,
        object_diameter=1e3,
        object_reflectivity=reflectivity,
        attenuation_coefficient=0.0,
        wavelength=WAVELENGTH,
    )


@pytest.fixture
def identity_link():
    return make_identity_link()


def build_plan(duration=0.1, pair_rate=1e4, visibility_hv=1.0, visibility_ad=1.0, heralding=1.0,
               link=None, detector=None, seed=1, convention=OutcomeConvention.FLAGS, settings=None,
               **kwargs) -> ExperimentPlan:
    """Plan over the identity link; keyword arguments override the defaults."""
    chsh = ChshSettings()
    detector = detector or DetectorModel(efficiency=1.0, dark_count_rate=0.0, timing_jitter_rms=0.0)
    return ExperimentPlan(
        duration_per_setting=duration,
        settings=expand_chsh_settings(chsh, convention) if settings is None else settings,
        seed=seed,
        source=SourceModel(pair_rate, visibility_hv, visibility_ad, heralding),
        link=link or make_identity_link(),
        detectors=DetectorSet.uniform(detector),
        outcome_convention=convention,
        chsh=chsh,
        **kwargs,
    )


@pytest.fixture
def make_plan():
    return build_plan
