import math
from dataclasses import replace

import numpy as np
import pytest

from PyQIRange.core.config.config_manager import ConfigManager
from PyQIRange.core.extractors.chsh_estimator import TSIRELSON_BOUND, UndefinedCorrelationError, analytic_chsh
from PyQIRange.core.extractors.protocol import (
    AnalysisParameters, analyze_plan_bundle, centered_histogram_start, delay_from_distance, run_chsh_protocol,
    summed_histogram)
from PyQIRange.core.constants import Channel
from PyQIRange.core.extractors.coincidences import coincidences_in_window
from PyQIRange.core.models.time_tags import RunBundle
from PyQIRange.core.quantum.polarization import AnalyzerSetting, noisy_state
from PyQIRange.core.runners.event_engine import DetectorModel, DetectorSet, OutcomeConvention, simulate_run

from conftest import LAB_DISTANCES, build_plan, make_identity_link

SOURCE_S = analytic_chsh(noisy_state(0.995, 0.984))


def test_ideal_identity_link_reaches_tsirelson(make_plan):
    probe, reference = run_chsh_protocol(make_plan(pair_rate=2e4, duration=0.1))
    for result in (probe, reference):
        assert abs(result.s_value - TSIRELSON_BOUND) <= 5 * result.s_uncertainty
        assert result.detected


def test_transmitted_only_convention_agrees(make_plan):
    plan = make_plan(pair_rate=2e4, duration=0.1, convention=OutcomeConvention.TRANSMITTED_ONLY)
    assert len(plan.settings) == 16
    probe, reference = run_chsh_protocol(plan)
    assert abs(probe.s_value - TSIRELSON_BOUND) <= 5 * probe.s_uncertainty
    assert abs(reference.s_value - TSIRELSON_BOUND) <= 5 * reference.s_uncertainty


def test_mirror_at_500_m(lab_mapping):
    lab_mapping["plan"]["duration_per_setting"] = "1 s"
    config = ConfigManager.from_mapping(lab_mapping).config
    plan = config.plan()
    result = analyze_plan_bundle(simulate_run(plan), plan, config.analysis)

    assert result.range_estimate is not None
    assert result.range_estimate.object_distance == pytest.approx(500.0, abs=0.15)
    assert result.probe_chsh.s_value > 2.6
    assert result.probe_chsh.detected
    assert result.reference_chsh.s_value == pytest.approx(SOURCE_S, abs=0.03)
    assert result.singles_rates[int(Channel.REFERENCE)] == pytest.approx(153e3, rel=0.02)


@pytest.mark.parametrize("distance", LAB_DISTANCES)
def test_range_recovers_object_distance(make_plan, distance):
    plan = make_plan(pair_rate=1e5, duration=0.01, link=make_identity_link(object_distance=distance),
                     settings=(AnalyzerSetting(0, 0),))
    result = analyze_plan_bundle(simulate_run(plan), plan, AnalysisParameters(), with_chsh=False)
    assert result.range_estimate.object_distance == pytest.approx(distance, abs=0.15)
    assert result.probe_chsh is None


def test_delay_from_distance():
    assert delay_from_distance(500.0) == pytest.approx(3_336_542, abs=1)
    assert delay_from_distance(0.0) == 0.0


def test_no_object_has_no_peak(make_plan):
    plan = make_plan(link=make_identity_link(reflectivity=0.0))
    bundle = simulate_run(plan)
    result = analyze_plan_bundle(bundle, plan, AnalysisParameters(), with_chsh=False)
    assert result.range_estimate is None
    assert result.probe_window_center == plan.expected_probe_delay()
    with pytest.raises(UndefinedCorrelationError):
        analyze_plan_bundle(bundle, plan, AnalysisParameters())


def test_no_object_with_dark_counts_is_not_detected(make_plan):
    detector = DetectorModel(efficiency=1.0, dark_count_rate=1e5, timing_jitter_rms=350.0)
    plan = make_plan(link=make_identity_link(reflectivity=0.0), detector=detector, duration=0.5)
    bundle = simulate_run(plan)
    result = analyze_plan_bundle(bundle, plan, AnalysisParameters(histogram_span=200_000.0))
    assert result.range_estimate is None
    assert not result.probe_chsh.detected
    assert result.reference_chsh.detected


def test_low_count_regime_still_violates(make_plan):
    """Around 45 coincidences per outcome number in 5 s still give a confident S > 2.4."""
    detector = DetectorModel(efficiency=1.0, dark_count_rate=100.0, timing_jitter_rms=350.0)
    link = make_identity_link(reflectivity=0.0036)
    params = AnalysisParameters()
    passed = 0
    per_number = []
    for seed in range(50):
        plan = make_plan(pair_rate=2e4, duration=5.0, visibility_hv=0.995, visibility_ad=0.984,
                         link=link, detector=detector, seed=seed)
        result = analyze_plan_bundle(simulate_run(plan), plan, params)
        per_number.append(np.mean([n for c in result.probe_counts for n in c.as_tuple()]))
        probe = result.probe_chsh
        passed += probe.s_value > 2.4 and probe.detected
    assert 30 <= np.mean(per_number) <= 60
    assert passed >= 45


LINK_ETAS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)


@pytest.fixture(scope="module")
def lossy_link_results():
    """Probe analysis per link transmission, darks off, about 1000 probe coincidences per setting."""
    params = AnalysisParameters(histogram_span=200_000.0)
    results = {}
    for eta in LINK_ETAS:
        plan = build_plan(pair_rate=1e6, duration=1.1e-3 / eta, visibility_hv=0.995, visibility_ad=0.984,
                          link=make_identity_link(reflectivity=eta), seed=17, bs_probe_fraction=0.9)
        results[eta] = analyze_plan_bundle(simulate_run(plan), plan, params)
    return results


@pytest.mark.parametrize("eta", LINK_ETAS)
def test_link_loss_cancels_in_s(lossy_link_results, eta):
    result = lossy_link_results[eta]
    assert result.range_estimate is not None
    assert 3000 <= sum(c.total for c in result.probe_counts) <= 5000
    probe = result.probe_chsh
    assert abs(probe.s_value - SOURCE_S) <= 3 * probe.s_uncertainty


def test_s_agrees_between_successive_link_losses(lossy_link_results):
    results = [lossy_link_results[eta].probe_chsh for eta in LINK_ETAS]
    for a, b in zip(results, results[1:]):
        assert abs(a.s_value - b.s_value) <= 3 * math.hypot(a.s_uncertainty, b.s_uncertainty)


def test_sideband_subtraction_removes_accidentals(make_plan):
    clean = DetectorModel(efficiency=1.0, dark_count_rate=0.0, timing_jitter_rms=0.0)
    noisy = DetectorModel(efficiency=1.0, dark_count_rate=1e6, timing_jitter_rms=0.0)
    plan = make_plan(pair_rate=1e4, duration=2.0, link=make_identity_link(reflectivity=0.02))
    plan = replace(plan, detectors=DetectorSet(probe=noisy, reference=clean, idler=clean))
    bundle = simulate_run(plan)
    raw_params = AnalysisParameters(histogram_span=200_000.0)
    raw = analyze_plan_bundle(bundle, plan, raw_params)
    subtracted = analyze_plan_bundle(bundle, plan, replace(raw_params, subtract_accidentals=True))
    assert raw.probe_chsh.s_value < 2.5
    assert subtracted.probe_chsh.s_value > raw.probe_chsh.s_value + 0.3
    assert subtracted.probe_chsh.s_value == pytest.approx(TSIRELSON_BOUND, abs=0.5)
    with pytest.raises(ValueError):
        AnalysisParameters(subtract_accidentals=True, sideband_offset=2000.0)


def test_reference_window_is_centered_on_zero_delay(make_plan):
    detector = DetectorModel(efficiency=1.0, dark_count_rate=0.0, timing_jitter_rms=350.0)
    plan = make_plan(pair_rate=2e4, duration=0.1, detector=detector)
    bundle = simulate_run(plan)
    result = analyze_plan_bundle(bundle, plan, AnalysisParameters())

    histogram = result.reference_histogram
    assert histogram.delay_offset < -histogram.bin_width
    assert result.reference_window_center == 0.0
    assert histogram.bin_centers()[np.argmax(histogram.counts)] == 0.0

    # +-1.5 ns holds about 3 sigma of the combined 495 ps jitter on both flanks.
    in_window = sum(c.total for c in result.reference_counts)
    all_pairs = sum(coincidences_in_window(run.stream(Channel.IDLER), run.stream(Channel.REFERENCE), 0.0, 10_000.0)
                    for run in bundle)
    assert in_window / all_pairs > 0.99


def test_centered_histogram_start():
    params = AnalysisParameters(bin_width=1000.0, histogram_span=10_000.0)
    assert centered_histogram_start(0.0, params) == -5500.0
    assert centered_histogram_start(2_000.0, params) == -3500.0


def test_explicit_peak_window(make_plan):
    plan = make_plan(pair_rate=2e4, duration=0.05)
    automatic, _ = run_chsh_protocol(plan)
    explicit, _ = run_chsh_protocol(plan, peak_window=(plan.expected_probe_delay(), 1500.0))
    assert explicit.s_value == automatic.s_value
    with pytest.raises(UndefinedCorrelationError):
        run_chsh_protocol(plan, peak_window=(plan.expected_probe_delay() + 5_000_000, 1500.0))


def test_missing_setting_run_is_reported(make_plan):
    plan = make_plan(settings=(AnalyzerSetting(0, 67.5),))
    with pytest.raises(ValueError, match="no data"):
        analyze_plan_bundle(simulate_run(plan), plan, AnalysisParameters())


def test_empty_bundle_has_no_histogram():
    with pytest.raises(ValueError):
        summed_histogram(RunBundle(runs=(), seed=0), Channel.IDLER, Channel.PROBE, AnalysisParameters())
