"""
Coincidence Extraction Module

Delay histograms and windowed coincidence counts between two sorted time-tag streams.
The delay of a tag pair is t_b - t_a, so with the idler as stream a and the probe as
stream b the ranging peak sits at positive delays.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from PyQIRange.core.models.time_tags import TimeTagStream

# Stream-a tags processed per vectorized block; bounds the size of the expanded pair arrays.
_CHUNK = 1 << 16


class UnsortedStreamError(ValueError):
    """A time-tag stream is not sorted by timestamp."""


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """
    Delay histogram with half-open bins [delay_offset + i*bin_width, delay_offset + (i+1)*bin_width).

    Attributes:
        bin_width: Bin width in picoseconds
        delay_offset: Delay of the first bin's lower edge in picoseconds
        counts: Pair counts per bin
        channel_pair: (channel of stream a, channel of stream b)
        integration_time: Total integration time behind the counts, in seconds
    """
    bin_width: int
    delay_offset: int
    counts: np.ndarray
    channel_pair: Tuple[int, int]
    integration_time: float

    def __post_init__(self) -> None:
        if self.bin_width <= 0:
            raise ValueError(f"bin_width must be positive, got {self.bin_width}")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or np.any(counts < 0):
            raise ValueError("counts must be a 1-D array of non-negative integers")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    def bin_edges(self) -> np.ndarray:
        return self.delay_offset + self.bin_width * np.arange(self.n_bins + 1, dtype=np.int64)

    def bin_centers(self) -> np.ndarray:
        return self.delay_offset + self.bin_width * (np.arange(self.n_bins) + 0.5)

    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if (self.bin_width, self.delay_offset, self.n_bins) != (other.bin_width, other.delay_offset, other.n_bins):
            raise ValueError("Cannot add histograms with different binning")
        return CoincidenceHistogram(self.bin_width, self.delay_offset, self.counts + other.counts,
                                    self.channel_pair, self.integration_time + other.integration_time)


def check_sorted(stream: TimeTagStream) -> None:
    """
    Raises:
        UnsortedStreamError: if timestamps decrease anywhere.
    """
    if stream.timestamps.size > 1:
        drops = np.flatnonzero(np.diff(stream.timestamps) < 0)
        if drops.size:
            raise UnsortedStreamError(
                f"Stream of channel {stream.channel} is not sorted (first decrease at index {drops[0] + 1})")


def _pair_delays(a: np.ndarray, b: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Delays b - a of all pairs with lo <= b - a < hi for a block of sorted a tags."""
    left = np.searchsorted(b, a + lo, side="left")
    right = np.searchsorted(b, a + hi, side="left")
    per_a = right - left
    n_pairs = int(per_a.sum())
    if n_pairs == 0:
        return np.zeros(0, dtype=np.int64)
    a_index = np.repeat(np.arange(a.size), per_a)
    group_start = np.repeat(np.cumsum(per_a) - per_a, per_a)
    b_index = np.repeat(left, per_a) + (np.arange(n_pairs) - group_start)
    return b[b_index] - a[a_index]


def coincidence_histogram(stream_a: TimeTagStream, stream_b: TimeTagStream, bin_width: float,
                          window_span: float, delay_offset: float = 0.0,
                          integration_time: float = 0.0) -> CoincidenceHistogram:
    """
    Histogram of every pair delay t_b - t_a inside [delay_offset, delay_offset + n_bins*bin_width).

    Args:
        stream_a: Start stream, sorted
        stream_b: Stop stream, sorted
        bin_width: Bin width in picoseconds
        window_span: Delay span to cover in picoseconds; rounded up to whole bins
        delay_offset: Lower edge of the first bin in picoseconds
        integration_time: Seconds of data behind the streams, carried into the result

    Raises:
        UnsortedStreamError: if either stream is unsorted.
    """
    bin_width = int(round(bin_width))
    if bin_width <= 0:
        raise ValueError(f"bin_width must be at least 1 ps, got {bin_width}")
    if window_span <= 0:
        raise ValueError(f"window_span must be positive, got {window_span}")
    check_sorted(stream_a)
    check_sorted(stream_b)

    n_bins = int(math.ceil(window_span / bin_width))
    lo = int(round(delay_offset))
    hi = lo + n_bins * bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    a, b = stream_a.timestamps, stream_b.timestamps
    for start in range(0, a.size, _CHUNK):
        delays = _pair_delays(a[start:start + _CHUNK], b, lo, hi)
        if delays.size:
            counts += np.bincount((delays - lo) // bin_width, minlength=n_bins)

    logging.debug(f"Histogram {stream_a.channel}->{stream_b.channel}: {int(counts.sum())} pairs in {n_bins} bins")
    return CoincidenceHistogram(bin_width, lo, counts, (stream_a.channel, stream_b.channel), integration_time)


def coincidences_in_window(stream_a: TimeTagStream, stream_b: TimeTagStream,
                           center_delay: float, half_width: float) -> int:
    """
    Number of pairs with center_delay - half_width <= t_b - t_a <= center_delay + half_width.

    Raises:
        UnsortedStreamError: if either stream is unsorted.
    """
    if half_width < 0:
        raise ValueError(f"half_width must be non-negative, got {half_width}")
    check_sorted(stream_a)
    check_sorted(stream_b)
    if not len(stream_a) or not len(stream_b):
        return 0
    lo = math.ceil(center_delay - half_width)
    hi = math.floor(center_delay + half_width)
    a, b = stream_a.timestamps, stream_b.timestamps
    left = np.searchsorted(b, a + lo, side="left")
    right = np.searchsorted(b, a + hi, side="right")
    return int((right - left).sum())


def brute_force_delays(stream_a: TimeTagStream, stream_b: TimeTagStream) -> np.ndarray:
    """All n*m pair delays; an O(n m) reference for small streams."""
    return (stream_b.timestamps[None, :] - stream_a.timestamps[:, None]).ravel()
