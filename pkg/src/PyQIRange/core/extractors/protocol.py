"""
Protocol Module

Analysis of a complete run: delay histograms of the probe-idler and reference-idler
channel pairs, the ranging peak, and a CHSH measurement for each pair taken in a
coincidence window around its peak.

The 16 coincidence numbers of a CHSH measurement come either from the recorded PBS
outcome flags of one run per setting, or from the transmitted ports of four runs per
setting over the orthogonal analyzer complements.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from PyQIRange.core.constants import Channel, Constants
from PyQIRange.core.extractors.chsh_estimator import (
    DEFAULT_K_SIGMA, ChshResult, SettingCounts, chsh_from_counts)
from PyQIRange.core.extractors.coincidences import (
    CoincidenceHistogram, coincidence_histogram, coincidences_in_window)
from PyQIRange.core.extractors.peak_finder import (
    DEFAULT_GUARD_BINS, DEFAULT_MIN_SIGNIFICANCE, RangeEstimate, find_peak)
from PyQIRange.core.models.time_tags import RunBundle, SettingRun, TimeTagStream
from PyQIRange.core.quantum.polarization import AnalyzerSetting, ChshSettings
from PyQIRange.core.runners.event_engine import ExperimentPlan, OutcomeConvention, simulate_run


@dataclass(frozen=True)
class AnalysisParameters:
    """
    Analysis settings; delays and widths in picoseconds.

    Attributes:
        bin_width: Histogram bin width
        histogram_start: Lower edge of the first probe histogram bin (the reference one is centered on its delay)
        histogram_span: Delay span covered by the histograms
        window_half_width: Half width of the coincidence window used for CHSH counts
        min_significance: Minimum peak z-score accepted as an object
        guard_bins: Bins around the peak excluded from the background
        refine_peak: Use the centroid of peak +-1 bins instead of the bin center
        k_sigma: Confidence factor of the CHSH detection verdict
        subtract_accidentals: Subtract the mean of two sideband windows from each count
        sideband_offset: Distance of the sideband windows from the peak center
    """
    bin_width: float = 1000.0
    histogram_start: float = 0.0
    histogram_span: float = 10_000_000.0
    window_half_width: float = 1500.0
    min_significance: float = DEFAULT_MIN_SIGNIFICANCE
    guard_bins: int = DEFAULT_GUARD_BINS
    refine_peak: bool = False
    k_sigma: float = DEFAULT_K_SIGMA
    subtract_accidentals: bool = False
    sideband_offset: float = 20_000.0

    def __post_init__(self) -> None:
        if self.bin_width < 1:
            raise ValueError(f"bin_width must be at least 1 ps, got {self.bin_width}")
        if self.histogram_span <= 0:
            raise ValueError(f"histogram_span must be positive, got {self.histogram_span}")
        if self.window_half_width < 0:
            raise ValueError(f"window_half_width must be non-negative, got {self.window_half_width}")
        if self.guard_bins < 0:
            raise ValueError(f"guard_bins must be non-negative, got {self.guard_bins}")
        if self.k_sigma < 0:
            raise ValueError(f"k_sigma must be non-negative, got {self.k_sigma}")
        if self.subtract_accidentals and self.sideband_offset <= 2 * self.window_half_width:
            raise ValueError("sideband_offset must exceed the full coincidence window")


@dataclass(frozen=True)
class ProtocolResult:
    """Everything derived from one run bundle."""
    probe_histogram: CoincidenceHistogram
    reference_histogram: CoincidenceHistogram
    range_estimate: Optional[RangeEstimate]
    probe_window_center: float
    reference_window_center: float
    probe_counts: Tuple[SettingCounts, ...] = ()
    reference_counts: Tuple[SettingCounts, ...] = ()
    probe_chsh: Optional[ChshResult] = None
    reference_chsh: Optional[ChshResult] = None
    singles_rates: Dict[int, float] = field(default_factory=dict)
    duration: float = 0.0


def centered_histogram_start(center: float, params: AnalysisParameters) -> float:
    """Lower histogram edge that puts `center` in the middle of the central bin of the span."""
    bin_width = int(round(params.bin_width))
    n_bins = int(math.ceil(params.histogram_span / bin_width))
    return float(int(round(center)) - bin_width // 2 - (n_bins // 2) * bin_width)


def summed_histogram(bundle: RunBundle, channel_a: Channel, channel_b: Channel,
                     params: AnalysisParameters, start: Optional[float] = None) -> CoincidenceHistogram:
    """
    Delay histogram of channel_b against channel_a accumulated over every setting run.
    The first bin starts at `start`, or at params.histogram_start when omitted.
    """
    start = params.histogram_start if start is None else start
    histogram = None
    for run in bundle:
        h = coincidence_histogram(run.stream(channel_a), run.stream(channel_b), params.bin_width,
                                  params.histogram_span, start, run.duration)
        histogram = h if histogram is None else histogram + h
    if histogram is None:
        raise ValueError("Run bundle contains no setting runs")
    return histogram


def _window_count(a: TimeTagStream, b: TimeTagStream, center: float, params: AnalysisParameters) -> float:
    count = coincidences_in_window(a, b, center, params.window_half_width)
    if not params.subtract_accidentals:
        return count
    sidebands = [coincidences_in_window(a, b, center + sign * params.sideband_offset, params.window_half_width)
                 for sign in (-1.0, 1.0)]
    return max(0.0, count - float(np.mean(sidebands)))


def _find_run(by_setting: Dict[Tuple[float, float], SettingRun], setting: AnalyzerSetting) -> SettingRun:
    run = by_setting.get(setting.key())
    if run is None:
        raise ValueError(f"Run bundle has no data for analyzer setting {setting.label()}")
    return run


def collect_setting_counts(bundle: RunBundle, signal_channel: Channel, center: float,
                           params: AnalysisParameters, chsh: ChshSettings,
                           convention: OutcomeConvention) -> Tuple[SettingCounts, ...]:
    """
    Coincidence numbers (ab, ab', a'b, a'b') for the four CHSH combinations.

    Raises:
        ValueError: if the bundle lacks a run the convention needs.
    """
    by_setting = bundle.by_setting()
    counts = []
    for setting in chsh.combinations():
        if OutcomeConvention(convention) is OutcomeConvention.FLAGS:
            run = _find_run(by_setting, setting)
            signal, idler = run.stream(signal_channel), run.stream(Channel.IDLER)
            numbers = [_window_count(idler.select(idler_flag), signal.select(signal_flag), center, params)
                       for signal_flag, idler_flag in ((0, 0), (0, 1), (1, 0), (1, 1))]
        else:
            numbers = []
            for complement in (setting, setting.orthogonal(idler=True),
                               setting.orthogonal(signal=True), setting.orthogonal(signal=True, idler=True)):
                run = _find_run(by_setting, complement)
                numbers.append(_window_count(run.stream(Channel.IDLER).select(0),
                                             run.stream(signal_channel).select(0), center, params))
        counts.append(SettingCounts(setting, *numbers))
    return tuple(counts)


def _singles_rates(bundle: RunBundle) -> Tuple[Dict[int, float], float]:
    duration = sum(run.duration for run in bundle)
    rates = {}
    for channel in Channel:
        n_tags = sum(len(run.stream(channel)) for run in bundle)
        rates[int(channel)] = n_tags / duration if duration > 0 else 0.0
    return rates, duration


def analyze_bundle(bundle: RunBundle, params: AnalysisParameters,
                   convention: OutcomeConvention = OutcomeConvention.FLAGS,
                   chsh: Optional[ChshSettings] = None,
                   probe_system_delay: float = 0.0, reference_system_delay: float = 0.0,
                   nominal_probe_delay: Optional[float] = None,
                   probe_window_center: Optional[float] = None,
                   with_chsh: bool = True) -> ProtocolResult:
    """
    Range and CHSH analysis of a run bundle.

    Args:
        bundle: Per-setting streams
        params: Analysis settings
        convention: How the bundle's runs encode the 16 coincidence numbers
        chsh: CHSH angles; defaults to the canonical ones
        probe_system_delay: Non-propagation part of the probe-idler delay, in picoseconds
        reference_system_delay: Reference-idler delay, in picoseconds; the reference histogram is centered on it
        nominal_probe_delay: Probe window center used when no peak is found
        probe_window_center: Explicit probe window center, bypassing the peak search
        with_chsh: Skip the CHSH measurements when False

    Raises:
        UndefinedCorrelationError: if a CHSH setting has no coincidences.
    """
    chsh = chsh or ChshSettings()
    probe_hist = summed_histogram(bundle, Channel.IDLER, Channel.PROBE, params)
    # The reference peak sits near zero delay; both of its flanks must be inside the histogram.
    reference_hist = summed_histogram(bundle, Channel.IDLER, Channel.REFERENCE, params,
                                      centered_histogram_start(reference_system_delay, params))

    range_estimate = find_peak(probe_hist, params.min_significance, params.guard_bins,
                               params.refine_peak, probe_system_delay)
    if range_estimate is not None:
        logging.info(f"Probe-idler peak at {range_estimate.peak_delay:.0f} ps "
                     f"({range_estimate.peak_counts} counts, z = {range_estimate.significance:.1f}): "
                     f"object at {range_estimate.object_distance:.3f} m")
    else:
        logging.warning("No significant probe-idler coincidence peak")

    if probe_window_center is None:
        if range_estimate is not None:
            probe_window_center = range_estimate.peak_delay
        elif nominal_probe_delay is not None:
            logging.warning(f"Using the nominal probe delay {nominal_probe_delay:.0f} ps for the CHSH window")
            probe_window_center = nominal_probe_delay
        else:
            probe_window_center = float(probe_system_delay)

    reference_peak = find_peak(reference_hist, params.min_significance, params.guard_bins, params.refine_peak)
    if reference_peak is not None:
        reference_window_center = reference_peak.peak_delay
    else:
        logging.warning("No reference-idler peak; using the configured reference delay")
        reference_window_center = float(reference_system_delay)

    singles, duration = _singles_rates(bundle)
    result = ProtocolResult(
        probe_histogram=probe_hist,
        reference_histogram=reference_hist,
        range_estimate=range_estimate,
        probe_window_center=probe_window_center,
        reference_window_center=reference_window_center,
        singles_rates=singles,
        duration=duration,
    )
    if not with_chsh:
        return result
    return measure_chsh(result, bundle, params, convention, chsh)


def measure_chsh(result: ProtocolResult, bundle: RunBundle, params: AnalysisParameters,
                 convention: OutcomeConvention = OutcomeConvention.FLAGS,
                 chsh: Optional[ChshSettings] = None) -> ProtocolResult:
    """
    Add probe and reference CHSH results, counted in the windows chosen by analyze_bundle.

    Raises:
        UndefinedCorrelationError: if a CHSH setting has no coincidences.
    """
    chsh = chsh or ChshSettings()
    reference_counts = collect_setting_counts(bundle, Channel.REFERENCE, result.reference_window_center,
                                              params, chsh, convention)
    probe_counts = collect_setting_counts(bundle, Channel.PROBE, result.probe_window_center,
                                          params, chsh, convention)
    reference_chsh = chsh_from_counts(reference_counts, chsh, params.k_sigma)
    probe_chsh = chsh_from_counts(probe_counts, chsh, params.k_sigma)
    logging.info(f"S_probe = {probe_chsh.s_value:.4f} +- {probe_chsh.s_uncertainty:.4f}, "
                 f"S_reference = {reference_chsh.s_value:.4f} +- {reference_chsh.s_uncertainty:.4f}")
    return replace(result, probe_counts=probe_counts, reference_counts=reference_counts,
                   probe_chsh=probe_chsh, reference_chsh=reference_chsh)


def analyze_plan_bundle(bundle: RunBundle, plan: ExperimentPlan, params: AnalysisParameters,
                        peak_window: Optional[Tuple[float, float]] = None,
                        with_chsh: bool = True) -> ProtocolResult:
    """analyze_bundle with delays, convention and angles taken from the plan that produced the bundle."""
    if peak_window is not None:
        center, half_width = peak_window
        params = replace(params, window_half_width=half_width)
    else:
        center = None
    return analyze_bundle(
        bundle, params,
        convention=plan.outcome_convention,
        chsh=plan.chsh,
        probe_system_delay=plan.delays.probe_system_delay,
        reference_system_delay=plan.delays.reference_system_delay,
        nominal_probe_delay=float(plan.expected_probe_delay()),
        probe_window_center=center,
        with_chsh=with_chsh,
    )


def run_chsh_protocol(plan: ExperimentPlan, params: Optional[AnalysisParameters] = None,
                      peak_window: Optional[Tuple[float, float]] = None) -> Tuple[ChshResult, ChshResult]:
    """
    Simulate the plan and measure S on the probe-idler and reference-idler pairs.

    Args:
        plan: Plan whose settings cover the CHSH combinations for its outcome convention
        params: Analysis settings
        peak_window: Optional (center, half_width) in picoseconds for the probe window

    Returns:
        Tuple of (probe result, reference result)
    """
    params = params or AnalysisParameters()
    result = analyze_plan_bundle(simulate_run(plan), plan, params, peak_window)
    return result.probe_chsh, result.reference_chsh


def delay_from_distance(distance: float) -> float:
    """Round-trip delay in picoseconds for an object at `distance` meters."""
    return 2.0 * distance * Constants.N_AIR / Constants.SPEED_OF_LIGHT * Constants.PS_PER_S
