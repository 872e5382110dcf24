"""
Gaussian Beam Module

Collimated-beam geometry for a fiber collimator and the power fraction of a Gaussian beam
passing a circular aperture. Diameters are 1/e^2 intensity diameters in meters.
"""
import math
from dataclasses import dataclass

from scipy import integrate, special


@dataclass(frozen=True)
class CollimatorSpec:
    """Fiber collimator: fiber mode field diameter, focal length, clear aperture, fiber coupling."""
    mode_field_diameter: float
    focal_length: float
    clear_aperture_diameter: float
    coupling_transmission: float = 1.0

    def __post_init__(self) -> None:
        for name in ("mode_field_diameter", "focal_length", "clear_aperture_diameter"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if not 0.0 < self.coupling_transmission <= 1.0:
            raise ValueError(f"coupling_transmission must lie in (0, 1], got {self.coupling_transmission}")


def divergence_full_angle(collimator: CollimatorSpec) -> float:
    """Full-angle divergence MFD/f in radians."""
    return collimator.mode_field_diameter / collimator.focal_length


def divergence_full_angle_degrees(collimator: CollimatorSpec) -> float:
    return math.degrees(divergence_full_angle(collimator))


def beam_diameter_at(collimator: CollimatorSpec, wavelength: float, d: float) -> float:
    """
    1/e^2 beam diameter at distance d from the collimator's front focal plane:

        D = 4 lambda f / (pi MFD) + 2 d tan(theta / 2)
    """
    if d < 0:
        raise ValueError(f"Distance must be non-negative, got {d}")
    waist_diameter = 4.0 * wavelength * collimator.focal_length / (math.pi * collimator.mode_field_diameter)
    return waist_diameter + 2.0 * d * math.tan(divergence_full_angle(collimator) / 2.0)


def gaussian_clip_fraction(beam_diameter: float, aperture_diameter: float, center_offset: float = 0.0) -> float:
    """
    Fraction of a Gaussian beam's power passing a circular aperture.

    Centered beams use the closed form 1 - exp(-2 (A/D)^2). An offset beam is integrated
    radially over the aperture:

        P = int_0^a (4 r / w^2) exp(-2 (r^2 + s^2) / w^2) I0(4 r s / w^2) dr

    with w = D/2, a = A/2, s = center_offset; I0 is evaluated as i0e to stay finite.
    """
    if beam_diameter <= 0:
        raise ValueError(f"beam_diameter must be positive, got {beam_diameter}")
    if aperture_diameter < 0 or center_offset < 0:
        raise ValueError("aperture_diameter and center_offset must be non-negative")
    if aperture_diameter == 0.0:
        return 0.0
    if math.isinf(aperture_diameter):
        return 1.0
    if center_offset == 0.0:
        return -math.expm1(-2.0 * (aperture_diameter / beam_diameter) ** 2)

    w = beam_diameter / 2.0
    a = aperture_diameter / 2.0
    s = center_offset

    def integrand(r: float) -> float:
        return (4.0 * r / w ** 2) * math.exp(-2.0 * (r - s) ** 2 / w ** 2) * special.i0e(4.0 * r * s / w ** 2)

    # Split at the beam center so quad sees the peak of an offset ring.
    breakpoints = [s] if 0.0 < s < a else None
    fraction, _ = integrate.quad(integrand, 0.0, a, points=breakpoints, epsabs=1e-12, epsrel=1e-10, limit=200)
    return min(max(fraction, 0.0), 1.0)
