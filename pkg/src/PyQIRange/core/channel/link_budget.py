"""
Link Budget Module

Deterministic loss chain of the probe path, from the fiber at the sending collimator to
the fiber at the receiving collimator:

    coupling -> sender_clip -> object_clip -> reflectivity -> atmosphere
             -> pbs_clip -> receiver_clip -> receiver_coupling

The return beam is treated as reflected by a plane object that preserves divergence, so
the beam at the receiver is the sender beam after the full round trip. Clipping stages
multiply independently. Pointing errors enter as a transverse beam-center offset at the
object, PBS and receiver apertures.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from PyQIRange.core.channel.gaussian_beam import (
    CollimatorSpec, beam_diameter_at, gaussian_clip_fraction)
from PyQIRange.core.constants import Constants

STAGE_NAMES = (
    "coupling", "sender_clip", "object_clip", "reflectivity",
    "atmosphere", "pbs_clip", "receiver_clip", "receiver_coupling",
)
# Stages that see a pointing offset, in the order offsets are passed.
POINTING_STAGES = ("object_clip", "pbs_clip", "receiver_clip")


class InvalidInputError(ValueError):
    """Inputs for which the inverse link problem has no answer."""


@dataclass(frozen=True)
class LinkModel:
    sender: CollimatorSpec
    receiver: CollimatorSpec
    receiver_pbs_aperture_diameter: float
    object_distance: float
    object_diameter: float
    object_reflectivity: float
    attenuation_coefficient: float
    wavelength: float
    pointing_rms: float = 0.0

    def __post_init__(self) -> None:
        for name in ("receiver_pbs_aperture_diameter", "object_distance", "object_diameter", "wavelength"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if not 0.0 <= self.object_reflectivity <= 1.0:
            raise ValueError(f"object_reflectivity must lie in [0, 1], got {self.object_reflectivity}")
        if self.attenuation_coefficient < 0.0 or not math.isfinite(self.attenuation_coefficient):
            raise ValueError(f"attenuation_coefficient must be >= 0, got {self.attenuation_coefficient}")
        if self.pointing_rms < 0.0:
            raise ValueError(f"pointing_rms must be >= 0, got {self.pointing_rms}")

    @property
    def roundtrip_length(self) -> float:
        return 2.0 * self.object_distance

    def roundtrip_time(self) -> float:
        """Round-trip propagation time in seconds."""
        return self.roundtrip_length * Constants.N_AIR / Constants.SPEED_OF_LIGHT

    def with_distance(self, object_distance: float) -> "LinkModel":
        return replace(self, object_distance=object_distance)


@dataclass(frozen=True)
class LossBreakdown:
    stages: Tuple[Tuple[str, float], ...]
    total_transmission: float

    def factor(self, stage: str) -> float:
        for name, value in self.stages:
            if name == stage:
                return value
        raise KeyError(stage)

    def as_rows(self) -> List[dict]:
        """CSV-ready rows (stage, factor) followed by the total."""
        rows = [{"stage": name, "factor": value} for name, value in self.stages]
        rows.append({"stage": "total", "factor": self.total_transmission})
        return rows


@dataclass(frozen=True)
class ReflectivityEstimate:
    value: float
    raw_value: float
    clamped: bool


def atmospheric_transmission(a: float, roundtrip_length: float) -> float:
    """Beer-Lambert transmission exp(-a L)."""
    if a < 0 or roundtrip_length < 0:
        raise ValueError("attenuation coefficient and length must be non-negative")
    return math.exp(-a * roundtrip_length)


def sample_pointing_offsets(rng: np.random.Generator, pointing_rms: float) -> Tuple[float, ...]:
    """
    Draw one radial beam-center offset per pointing stage from a 2-D Gaussian whose
    radial rms equals `pointing_rms`.
    """
    if pointing_rms == 0.0:
        return tuple(0.0 for _ in POINTING_STAGES)
    sigma = pointing_rms / math.sqrt(2.0)
    xy = rng.normal(0.0, sigma, size=(len(POINTING_STAGES), 2))
    return tuple(float(v) for v in np.hypot(xy[:, 0], xy[:, 1]))


def end_to_end_transmission(link: LinkModel, offsets: Optional[Sequence[float]] = None) -> LossBreakdown:
    """
    Stage-by-stage transmission of the probe path.

    Args:
        link: Channel parameters
        offsets: Beam-center offsets at (object, PBS, receiver) in meters; perfect
                 alignment when omitted. Draw them with sample_pointing_offsets.
    """
    if offsets is None:
        offsets = (0.0,) * len(POINTING_STAGES)
    if len(offsets) != len(POINTING_STAGES):
        raise ValueError(f"Expected {len(POINTING_STAGES)} pointing offsets, got {len(offsets)}")
    object_offset, pbs_offset, receiver_offset = offsets

    beam_at_sender = beam_diameter_at(link.sender, link.wavelength, 0.0)
    beam_at_object = beam_diameter_at(link.sender, link.wavelength, link.object_distance)
    beam_at_receiver = beam_diameter_at(link.sender, link.wavelength, link.roundtrip_length)

    stages = (
        ("coupling", link.sender.coupling_transmission),
        ("sender_clip", gaussian_clip_fraction(beam_at_sender, link.sender.clear_aperture_diameter)),
        ("object_clip", gaussian_clip_fraction(beam_at_object, link.object_diameter, object_offset)),
        ("reflectivity", link.object_reflectivity),
        ("atmosphere", atmospheric_transmission(link.attenuation_coefficient, link.roundtrip_length)),
        ("pbs_clip", gaussian_clip_fraction(beam_at_receiver, link.receiver_pbs_aperture_diameter, pbs_offset)),
        ("receiver_clip", gaussian_clip_fraction(beam_at_receiver, link.receiver.clear_aperture_diameter, receiver_offset)),
        ("receiver_coupling", link.receiver.coupling_transmission),
    )
    total = math.prod(value for _, value in stages)
    return LossBreakdown(stages=stages, total_transmission=total)


def transmission_excluding_reflectivity(link: LinkModel, offsets: Optional[Sequence[float]] = None) -> float:
    breakdown = end_to_end_transmission(replace(link, object_reflectivity=1.0), offsets)
    return breakdown.total_transmission


def predict_received_rate(launched_rate: float, link: LinkModel) -> float:
    """Photons/s expected at the receiver for `launched_rate` photons/s sent into the probe path."""
    if launched_rate < 0:
        raise ValueError(f"launched_rate must be non-negative, got {launched_rate}")
    return launched_rate * end_to_end_transmission(link).total_transmission


def infer_reflectivity(measured_rate: float, launched_rate: float, link_without_R: LinkModel,
                       offsets: Optional[Sequence[float]] = None) -> ReflectivityEstimate:
    """
    Invert the loss chain for the object reflectivity. The reflectivity field of
    `link_without_R` is ignored. `offsets` are the pointing offsets the measured rate saw,
    as for end_to_end_transmission. Estimates above 1 are clamped and flagged.

    Raises:
        InvalidInputError: for a non-positive launched rate or zero residual transmission.
    """
    if launched_rate <= 0:
        raise InvalidInputError(f"launched_rate must be positive, got {launched_rate}")
    if measured_rate < 0:
        raise InvalidInputError(f"measured_rate must be non-negative, got {measured_rate}")
    residual = transmission_excluding_reflectivity(link_without_R, offsets)
    if residual <= 0.0:
        raise InvalidInputError("Link transmission excluding reflectivity is zero")
    raw = measured_rate / (launched_rate * residual)
    if raw > 1.0:
        logging.warning(f"Inferred reflectivity {raw:.4f} exceeds 1; reporting 1.0")
        return ReflectivityEstimate(value=1.0, raw_value=raw, clamped=True)
    return ReflectivityEstimate(value=raw, raw_value=raw, clamped=False)


def reflectivity_ratio(counts_a: float, counts_b: float) -> Tuple[float, float]:
    """
    Reflectivity of object b relative to object a seen over the same link and integration
    time, with first-order Poisson uncertainty.
    """
    if counts_a <= 0:
        raise InvalidInputError("Reference object counts must be positive")
    ratio = counts_b / counts_a
    variance_terms = 1.0 / counts_a + (1.0 / counts_b if counts_b > 0 else 0.0)
    return ratio, ratio * math.sqrt(variance_terms)


def static_pointing_offsets(link: LinkModel) -> Tuple[float, ...]:
    """Every pointing stage displaced by exactly pointing_rms."""
    return (link.pointing_rms,) * len(POINTING_STAGES)
