"""
Peak Finder Module

Locates the probe-idler coincidence peak in a delay histogram and converts its delay to
an object distance.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from PyQIRange.core.constants import Constants
from PyQIRange.core.extractors.coincidences import CoincidenceHistogram

DEFAULT_GUARD_BINS = 3
DEFAULT_MIN_SIGNIFICANCE = 5.0


@dataclass(frozen=True)
class RangeEstimate:
    """
    Attributes:
        peak_delay: Delay of the peak in picoseconds (bin center, or centroid when refined)
        roundtrip_length: Propagation length of the probe in meters
        object_distance: roundtrip_length / 2
        peak_counts: Counts in the maximum bin
        background_mean: Mean counts per bin outside the guard region
        background_std: Standard deviation of those bins
        significance: (peak_counts - background_mean) / max(sqrt(background_mean), 1)
        peak_index: Index of the maximum bin
        system_delay: Constant delay subtracted before converting to distance, in picoseconds
    """
    peak_delay: float
    roundtrip_length: float
    object_distance: float
    peak_counts: int
    background_mean: float
    background_std: float
    significance: float
    peak_index: int
    system_delay: float = 0.0


def delay_to_roundtrip(delay_ps: float) -> float:
    """Round-trip propagation length in meters for a delay in picoseconds in air."""
    return delay_ps / Constants.PS_PER_S * Constants.SPEED_OF_LIGHT / Constants.N_AIR


def find_peak(histogram: CoincidenceHistogram, min_significance: float = DEFAULT_MIN_SIGNIFICANCE,
              guard_bins: int = DEFAULT_GUARD_BINS, refine: bool = False,
              system_delay: float = 0.0) -> Optional[RangeEstimate]:
    """
    Find the maximum bin and judge it against the flat background.

    Args:
        histogram: Probe-idler delay histogram
        min_significance: Peaks below this z-score are reported as absent
        guard_bins: Bins on each side of the maximum excluded from the background
        refine: Replace the bin center by the background-subtracted centroid of peak +-1 bins
        system_delay: Non-propagation delay (fiber, electronics) in picoseconds

    Returns:
        RangeEstimate, or None when there is no significant peak
    """
    if histogram.n_bins == 0:
        raise ValueError("Cannot search an empty histogram")
    counts = histogram.counts
    peak_index = int(np.argmax(counts))
    peak_counts = int(counts[peak_index])

    outside = np.ones(counts.size, dtype=bool)
    outside[max(0, peak_index - guard_bins):peak_index + guard_bins + 1] = False
    background = counts[outside]
    background_mean = float(background.mean()) if background.size else 0.0
    background_std = float(background.std()) if background.size else 0.0

    significance = max(0.0, (peak_counts - background_mean) / max(np.sqrt(background_mean), 1.0))
    if significance < min_significance:
        logging.debug(f"No peak: maximum {peak_counts} counts, significance {significance:.2f} < {min_significance}")
        return None

    centers = histogram.bin_centers()
    peak_delay = float(centers[peak_index])
    if refine:
        lo, hi = max(0, peak_index - 1), min(counts.size, peak_index + 2)
        weights = np.clip(counts[lo:hi] - background_mean, 0.0, None)
        if weights.sum() > 0:
            peak_delay = float(np.average(centers[lo:hi], weights=weights))

    roundtrip = delay_to_roundtrip(peak_delay - system_delay)
    return RangeEstimate(
        peak_delay=peak_delay,
        roundtrip_length=roundtrip,
        object_distance=roundtrip / 2.0,
        peak_counts=peak_counts,
        background_mean=background_mean,
        background_std=background_std,
        significance=float(significance),
        peak_index=peak_index,
        system_delay=float(system_delay),
    )
