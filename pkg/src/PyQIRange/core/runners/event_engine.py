"""
Event Engine Module

Monte-Carlo generation of detector time tags for the probe (D1), reference (D2) and
idler (D3) channels.

For each analyzer setting the engine draws pair emissions as a homogeneous Poisson
process, routes every signal photon through the non-polarizing beam splitter, samples
the joint PBS outcome of the signal-idler pair from the source state, propagates the
probe photon over the link and finally applies each detector's efficiency, jitter, dark
counts and dead time. Every setting owns an independent random stream spawned from the
plan seed, so settings can be simulated in any order with identical results.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from PyQIRange.core.channel.link_budget import (
    LinkModel, end_to_end_transmission, sample_pointing_offsets)
from PyQIRange.core.constants import Channel, Constants
from PyQIRange.core.models.time_tags import RunBundle, SettingRun, TimeTagStream
from PyQIRange.core.quantum.polarization import (
    AnalyzerSetting, ChshSettings, SourceModel, coincidence_probabilities)


class OutcomeConvention(str, Enum):
    """How the 16 coincidence numbers of a CHSH measurement are collected."""
    # One run per setting; the recorded PBS flag separates the four outcome pairings.
    FLAGS = "flags"
    # Four runs per setting over the orthogonal complements; transmitted ports only.
    TRANSMITTED_ONLY = "transmitted_only"


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector. Jitter and dead time are in picoseconds."""
    efficiency: float = 1.0
    dark_count_rate: float = Constants.DEFAULT_DARK_COUNT_RATE
    timing_jitter_rms: float = Constants.DEFAULT_TIMING_JITTER_PS
    dead_time: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        for name in ("dark_count_rate", "timing_jitter_rms", "dead_time"):
            value = getattr(self, name)
            if value < 0.0 or not math.isfinite(value):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class DetectorSet:
    probe: DetectorModel = field(default_factory=DetectorModel)
    reference: DetectorModel = field(default_factory=DetectorModel)
    idler: DetectorModel = field(default_factory=DetectorModel)

    def for_channel(self, channel: Channel) -> DetectorModel:
        return {Channel.PROBE: self.probe, Channel.REFERENCE: self.reference, Channel.IDLER: self.idler}[channel]

    @classmethod
    def uniform(cls, detector: DetectorModel) -> "DetectorSet":
        return cls(probe=detector, reference=detector, idler=detector)


@dataclass(frozen=True)
class FiberDelays:
    """Fixed fiber and electronic delays per channel, in picoseconds."""
    probe: float = 0.0
    reference: float = 0.0
    idler: float = 0.0

    def __post_init__(self) -> None:
        for name in ("probe", "reference", "idler"):
            value = getattr(self, name)
            if value < 0.0 or not math.isfinite(value):
                raise ValueError(f"{name} delay must be finite and non-negative, got {value}")

    @property
    def probe_system_delay(self) -> int:
        """Constant part of the probe-idler delay that is not propagation."""
        return int(round(self.probe)) - int(round(self.idler))

    @property
    def reference_system_delay(self) -> int:
        return int(round(self.reference)) - int(round(self.idler))


@dataclass(frozen=True)
class ExperimentPlan:
    """
    Everything one simulated experiment needs.

    Attributes:
        duration_per_setting: Integration time per analyzer setting in seconds
        settings: Analyzer settings, simulated in this order
        seed: Root seed of all random streams
        bs_probe_fraction: Probability that a signal photon enters the probe path
        chsh: CHSH angles the settings were expanded from, when the plan measures S
    """
    duration_per_setting: float
    settings: Tuple[AnalyzerSetting, ...]
    seed: int
    source: SourceModel
    link: LinkModel
    detectors: DetectorSet = field(default_factory=DetectorSet)
    bs_probe_fraction: float = 0.5
    delays: FiberDelays = field(default_factory=FiberDelays)
    outcome_convention: OutcomeConvention = OutcomeConvention.FLAGS
    chsh: Optional[ChshSettings] = None

    def __post_init__(self) -> None:
        if not (self.duration_per_setting > 0.0 and math.isfinite(self.duration_per_setting)):
            raise ValueError(f"duration_per_setting must be > 0, got {self.duration_per_setting}")
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.settings:
            raise ValueError("settings must not be empty")
        if not 0.0 < self.bs_probe_fraction < 1.0:
            raise ValueError(f"bs_probe_fraction must lie in (0, 1), got {self.bs_probe_fraction}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "outcome_convention", OutcomeConvention(self.outcome_convention))

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_per_setting * Constants.PS_PER_S))

    @property
    def roundtrip_ps(self) -> int:
        return int(round(self.link.roundtrip_time() * Constants.PS_PER_S))

    def expected_probe_delay(self) -> int:
        """Probe-idler delay at which the ranging peak should sit, in picoseconds."""
        return self.roundtrip_ps + self.delays.probe_system_delay


def expand_chsh_settings(chsh: ChshSettings, convention: OutcomeConvention = OutcomeConvention.FLAGS
                         ) -> Tuple[AnalyzerSetting, ...]:
    """
    Analyzer settings a CHSH measurement has to visit.

    The flags convention needs the four canonical combinations. The transmitted-only
    convention needs every combination together with its orthogonal complements, in
    the order (a, b), (a, b+90), (a+90, b), (a+90, b+90).
    """
    combinations = chsh.combinations()
    if OutcomeConvention(convention) is OutcomeConvention.FLAGS:
        return combinations
    expanded = []
    for setting in combinations:
        expanded.extend((
            setting,
            setting.orthogonal(idler=True),
            setting.orthogonal(signal=True),
            setting.orthogonal(signal=True, idler=True),
        ))
    return tuple(expanded)


def singles_rate(stream: TimeTagStream, duration: float) -> float:
    """Counts per second of a stream integrated over `duration` seconds."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return len(stream) / duration


def launched_probe_rate(plan: ExperimentPlan) -> float:
    """
    Probe photons/s entering the link, referred to the probe detector.

    This is the rate the probe detector would register with a lossless link, which is
    the normalization under which link predictions compare to D1 singles.
    """
    return plan.source.pair_rate * plan.bs_probe_fraction * plan.detectors.probe.efficiency


def launched_rate_from_reference(reference_rate: float, bs_probe_fraction: float) -> float:
    """Probe launch rate inferred from reference singles through the beam-splitter ratio."""
    return reference_rate * bs_probe_fraction / (1.0 - bs_probe_fraction)


def _dead_time_mask(timestamps: np.ndarray, dead_time: int) -> np.ndarray:
    """
    Non-paralyzable dead time: a tag is kept if it is at least `dead_time` after the last kept tag.

    A tag at least `dead_time` after its predecessor is always kept, so only tags closer than
    that to their predecessor are resolved one by one.
    """
    keep = np.ones(timestamps.size, dtype=bool)
    close = np.flatnonzero(np.diff(timestamps) < dead_time) + 1
    last = 0
    for i in close.tolist():
        # keep[i - 1] is final here; when it was dropped, `last` still holds the last kept tag.
        if keep[i - 1]:
            last = int(timestamps[i - 1])
        keep[i] = int(timestamps[i]) - last >= dead_time
    return keep


def _detect(rng: np.random.Generator, channel: Channel, arrivals: np.ndarray, flags: np.ndarray,
            detector: DetectorModel, duration: float, duration_ps: int) -> TimeTagStream:
    keep = rng.random(arrivals.size) < detector.efficiency
    times = arrivals[keep]
    flags = flags[keep]

    if detector.timing_jitter_rms > 0.0:
        jitter = np.rint(rng.normal(0.0, detector.timing_jitter_rms, size=times.size)).astype(np.int64)
        times = times + jitter

    n_dark = rng.poisson(detector.dark_count_rate * duration)
    dark_times = rng.integers(0, duration_ps, size=n_dark, dtype=np.int64)
    dark_flags = rng.integers(0, 2, size=n_dark).astype(np.uint32)

    times = np.maximum(np.concatenate((times, dark_times)), 0)
    flags = np.concatenate((flags, dark_flags))
    order = np.argsort(times, kind="stable")
    times, flags = times[order], flags[order]

    if detector.dead_time > 0.0 and times.size:
        alive = _dead_time_mask(times, int(round(detector.dead_time)))
        times, flags = times[alive], flags[alive]

    logging.debug(f"Channel {channel.name}: {times.size} tags ({n_dark} dark counts drawn)")
    return TimeTagStream(int(channel), times, flags)


def simulate_setting(plan: ExperimentPlan, setting_index: int,
                     seed_sequence: Optional[np.random.SeedSequence] = None) -> SettingRun:
    """
    Simulate one analyzer setting of the plan.

    Args:
        plan: Experiment plan
        setting_index: Index into plan.settings
        seed_sequence: Random stream of this setting; spawned from the plan seed if omitted
    """
    if seed_sequence is None:
        seed_sequence = np.random.SeedSequence(plan.seed).spawn(len(plan.settings))[setting_index]
    rng = np.random.default_rng(seed_sequence)
    setting = plan.settings[setting_index]
    duration = plan.duration_per_setting
    duration_ps = plan.duration_ps

    offsets = sample_pointing_offsets(rng, plan.link.pointing_rms)
    transmission = end_to_end_transmission(plan.link, offsets).total_transmission

    n_pairs = rng.poisson(plan.source.pair_rate * duration)
    emissions = np.sort(rng.integers(0, duration_ps, size=n_pairs, dtype=np.int64))

    probabilities = coincidence_probabilities(plan.source.state(), setting).as_array()
    # Outcome index encodes (signal_flag << 1) | idler_flag over (HH, HV, VH, VV).
    outcomes = rng.choice(4, size=n_pairs, p=probabilities)
    signal_flags = (outcomes >> 1).astype(np.uint32)
    idler_flags = (outcomes & 1).astype(np.uint32)

    to_probe = rng.random(n_pairs) < plan.bs_probe_fraction
    idler_collected = rng.random(n_pairs) < plan.source.heralding_efficiency
    probe_survives = rng.random(int(to_probe.sum())) < transmission

    probe_emissions = emissions[to_probe][probe_survives]
    probe_flags = signal_flags[to_probe][probe_survives]
    arrivals = {
        Channel.PROBE: (probe_emissions + plan.roundtrip_ps + int(round(plan.delays.probe)), probe_flags),
        Channel.REFERENCE: (emissions[~to_probe] + int(round(plan.delays.reference)), signal_flags[~to_probe]),
        Channel.IDLER: (emissions[idler_collected] + int(round(plan.delays.idler)), idler_flags[idler_collected]),
    }

    streams: Dict[int, TimeTagStream] = {}
    for channel in (Channel.PROBE, Channel.REFERENCE, Channel.IDLER):
        times, flags = arrivals[channel]
        streams[int(channel)] = _detect(rng, channel, times, flags, plan.detectors.for_channel(channel),
                                        duration, duration_ps)

    logging.debug(
        f"Setting {setting.label()}: {n_pairs} pairs, link transmission {transmission:.4e}, "
        f"probe/reference/idler tags {len(streams[Channel.PROBE])}/"
        f"{len(streams[Channel.REFERENCE])}/{len(streams[Channel.IDLER])}"
    )
    return SettingRun(setting=setting, duration=duration, streams=streams, setting_index=setting_index)


def simulate_run(plan: ExperimentPlan) -> RunBundle:
    """
    Simulate every setting of the plan.

    Returns:
        RunBundle with one SettingRun per setting, in plan order
    """
    seed_sequences = np.random.SeedSequence(plan.seed).spawn(len(plan.settings))
    runs = tuple(simulate_setting(plan, i, seq) for i, seq in enumerate(seed_sequences))
    total = sum(len(s) for run in runs for s in run.streams.values())
    logging.info(f"Simulated {len(runs)} setting(s) of {plan.duration_per_setting:g} s: {total} tags")
    return RunBundle(runs=runs, seed=plan.seed)
