"""
Unit Converter Module

Provides functions for parsing unit-suffixed quantities from the configuration
("5 um", "1 ns", "332 kHz", "0.1 dB/km", "22.5 deg").
Every quantity is converted to the base unit of its kind:

    length       -> m
    time         -> s
    rate         -> 1/s
    angle        -> deg
    attenuation  -> 1/m   (power attenuation coefficient of exp(-a L))
"""

import math
import re
from typing import Dict, Tuple

from PyQIRange.core.constants import Constants

# Factors that convert one unit of the key into the base unit of its kind.
UNIT_FACTORS: Dict[str, Dict[str, float]] = {
    "length": {
        "m": 1.0, "km": 1.0e3, "cm": 1.0e-2, "mm": 1.0e-3,
        "um": 1.0e-6, "µm": 1.0e-6, "nm": 1.0e-9, "in": 0.0254,
    },
    "time": {
        "s": 1.0, "ms": 1.0e-3, "us": 1.0e-6, "µs": 1.0e-6,
        "ns": 1.0e-9, "ps": 1.0e-12,
    },
    "rate": {
        "hz": 1.0, "1/s": 1.0, "/s": 1.0, "cps": 1.0,
        "khz": 1.0e3, "mhz": 1.0e6,
    },
    "angle": {
        "deg": 1.0, "rad": 180.0 / math.pi,
    },
    "attenuation": {
        "1/m": 1.0, "1/km": 1.0e-3,
        "db/m": 1.0 / Constants.DB_PER_NEPER_POWER,
        "db/km": 1.0e-3 / Constants.DB_PER_NEPER_POWER,
    },
}

_QUANTITY_PATTERN = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?:\s+(\S.*?)|([^\d\s.].*?))\s*$"
)


def _unit_kind(unit: str) -> Tuple[str, float]:
    """Return (kind, factor-to-base) for a unit symbol, case-insensitive."""
    unit_lower = unit.strip().lower()
    for kind, factors in UNIT_FACTORS.items():
        for symbol, factor in factors.items():
            if symbol.lower() == unit_lower:
                return kind, factor
    raise ValueError(f"Unknown unit '{unit}'")


def split_quantity(text: str) -> Tuple[float, str]:
    """
    Split a quantity string into its number and unit.

    Args:
        text: Quantity such as "808.049 nm" or "1e-4 1/m"

    Returns:
        Tuple of (value, unit)
    """
    match = _QUANTITY_PATTERN.match(str(text))
    if not match:
        raise ValueError(f"'{text}' is not a number followed by a unit")
    return float(match.group(1)), match.group(2) or match.group(3)


def parse_quantity(text: str, kind: str) -> float:
    """
    Parse a unit-suffixed quantity and return it in the base unit of `kind`.

    Raises:
        ValueError: if the text has no unit, an unknown unit, or a unit of another kind.
    """
    if kind not in UNIT_FACTORS:
        raise ValueError(f"Unknown quantity kind '{kind}'")
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        raise ValueError(f"{text!r} needs an explicit {kind} unit (e.g. one of {sorted(UNIT_FACTORS[kind])})")
    value, unit = split_quantity(text)
    unit_kind, factor = _unit_kind(unit)
    if unit_kind != kind:
        raise ValueError(f"'{text}' is a {unit_kind}, expected a {kind}")
    return value * factor


def seconds_to_ps(seconds: float) -> float:
    return seconds * Constants.PS_PER_S
