"""
Constants Module

Defines physical constants, unit conversion factors, channel identifiers,
and CLI exit codes.
"""
import math
from enum import IntEnum


class Constants:
    """Physical constants and conversion factors.

    Details:
        SPEED_OF_LIGHT is exact by SI definition. The group index of air is the
        value used for every delay <-> distance conversion in this package.

        Constants and their units:
            SPEED_OF_LIGHT: speed of light in vacuum (m/s)
            N_AIR: group index of air (dimensionless)
            PS_PER_S: picoseconds per second
            DB_PER_NEPER_POWER: 10*log10(e), converts a power attenuation
                coefficient in 1/m to dB/m
            DEFAULT_ATTENUATION_DB_PER_KM: clear-air attenuation used when the
                configuration does not set one (dB/km)
            DEFAULT_COUPLING_TRANSMISSION: fiber-to-collimator coupling
                (25-26% loss midpoint)
            DEFAULT_DARK_COUNT_RATE: detector dark counts (1/s)
            DEFAULT_TIMING_JITTER_PS: detector timing jitter, rms (ps)
    """
    SPEED_OF_LIGHT = 299_792_458.0  # m/s
    N_AIR = 1.00027
    PS_PER_S = 1.0e12
    DB_PER_NEPER_POWER = 10.0 / math.log(10.0)

    DEFAULT_ATTENUATION_DB_PER_KM = 0.1
    DEFAULT_COUPLING_TRANSMISSION = 0.745
    DEFAULT_DARK_COUNT_RATE = 100.0
    DEFAULT_TIMING_JITTER_PS = 350.0


class Channel(IntEnum):
    """Detector channels: D1 after the probe PBS, D2 after the reference PBS, D3 after the idler PBS."""
    PROBE = 1
    REFERENCE = 2
    IDLER = 3


class ExitCode(IntEnum):
    OK = 0
    FAILURE = 1
    USAGE = 2
    NO_PEAK = 3
    UNDEFINED_CORRELATION = 4
    INPUT_ERROR = 5
