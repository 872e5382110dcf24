import math

import numpy as np
import pytest

from PyQIRange.core.extractors.chsh_estimator import (
    CLASSICAL_BOUND, TSIRELSON_BOUND, ChshResult, Correlation, SettingCounts, UndefinedCorrelationError,
    analytic_chsh, chsh_from_counts, chsh_s, correlation_from_counts, detect_object, sample_setting_counts)
from PyQIRange.core.quantum.polarization import (
    AnalyzerSetting, ChshSettings, bell_state_psi_plus, ideal_correlation, noisy_state)

SETTING = AnalyzerSetting(0.0, 22.5)


def _result(s_value, s_uncertainty, k_sigma=3.0):
    settings = ChshSettings()
    correlations = tuple(Correlation(s, 0.0, 0.0) for s in settings.combinations())
    return ChshResult(settings, correlations, s_value, s_uncertainty,
                      s_value - k_sigma * s_uncertainty > 2, (s_value - 2) / s_uncertainty, k_sigma)


def _sampled_chsh(rng, state, n_per_setting, settings=None):
    settings = settings or ChshSettings()
    counts = [sample_setting_counts(rng, state, s, n_per_setting) for s in settings.combinations()]
    return chsh_from_counts(counts, settings)


def test_correlation_examples():
    assert correlation_from_counts(SettingCounts(SETTING, 50, 0, 0, 50)) == (1.0, 0.0)
    value, uncertainty = correlation_from_counts(SettingCounts(SETTING, 25, 25, 25, 25))
    assert value == 0.0
    assert uncertainty == pytest.approx(0.1)


def test_zero_counts_are_undefined():
    with pytest.raises(UndefinedCorrelationError) as excinfo:
        correlation_from_counts(SettingCounts(SETTING, 0, 0, 0, 0))
    assert excinfo.value.setting == SETTING
    assert "22.5" in str(excinfo.value)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        SettingCounts(SETTING, -1, 0, 0, 0)


def test_sampled_correlation_of_psi_plus():
    rng = np.random.default_rng(12)
    value, uncertainty = correlation_from_counts(sample_setting_counts(rng, bell_state_psi_plus(), SETTING, 10_000))
    assert abs(value - (-math.sqrt(2) / 2)) <= 3 * uncertainty


def test_scaling_counts_leaves_correlation_unchanged():
    counts = SettingCounts(SETTING, 13, 87, 91, 9)
    for factor in (1, 10, 1000, 10 ** 6):
        assert correlation_from_counts(counts.scaled(factor))[0] == correlation_from_counts(counts)[0]


def test_ideal_s_values():
    assert analytic_chsh(bell_state_psi_plus()) == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert analytic_chsh(noisy_state(0.995, 0.984)) == pytest.approx(2.80, abs=0.01)


def test_dephased_state_never_violates():
    state = noisy_state(1.0, 0.0)
    grid = np.arange(0.0, 180.0, 15.0)
    best = max(analytic_chsh(state, ChshSettings(a, a2, b, b2))
               for a in grid for a2 in grid for b in grid for b2 in grid)
    assert best <= CLASSICAL_BOUND + 1e-12


def test_chsh_s_combination_and_uncertainty():
    settings = ChshSettings()
    values = (0.7, -0.7, 0.7, 0.7)
    correlations = [Correlation(s, v, 0.01) for s, v in zip(settings.combinations(), values)]
    result = chsh_s(correlations, settings, k_sigma=3)
    assert result.s_value == pytest.approx(2.8)
    assert result.s_uncertainty == pytest.approx(0.02)
    assert result.detected
    assert result.sigma_above_2 == pytest.approx(40.0)


def test_chsh_s_checks_settings():
    settings = ChshSettings()
    wrong = [Correlation(AnalyzerSetting(1, 1), 0.0, 0.0)] * 4
    with pytest.raises(ValueError):
        chsh_s(wrong, settings)
    with pytest.raises(ValueError):
        chsh_s([Correlation(s, 0.0, 0.0) for s in settings.combinations()[:3]], settings)


def test_s_is_bounded_by_four_for_any_counts():
    rng = np.random.default_rng(8)
    settings = ChshSettings()
    for _ in range(200):
        counts = [SettingCounts(s, *rng.integers(0, 50, size=4) + np.array([1, 0, 0, 0]))
                  for s in settings.combinations()]
        assert chsh_from_counts(counts, settings).s_value <= 4.0


def test_detection_verdicts():
    assert detect_object(_result(2.80, 0.002), 3).detected
    assert not detect_object(_result(1.0, 0.1), 3).detected
    assert not detect_object(_result(2.6, 0.25), 3).detected
    assert detect_object(_result(2.6, 0.25), 1).detected
    assert detect_object(_result(2.6, 0.002), 3).detected
    assert "DETECTED" in detect_object(_result(2.80, 0.002)).describe()


def test_source_s_value_by_monte_carlo():
    rng = np.random.default_rng(2802)
    state = noisy_state(0.995, 0.984)
    result = _sampled_chsh(rng, state, 250_000)
    assert abs(result.s_value - analytic_chsh(state)) <= 3 * result.s_uncertainty


def test_sampled_s_respects_tsirelson_bound():
    rng = np.random.default_rng(2828)
    for _ in range(100):
        result = _sampled_chsh(rng, bell_state_psi_plus(), 1000)
        assert result.s_value <= TSIRELSON_BOUND + 5 * result.s_uncertainty


def test_estimate_converges_with_sample_size():
    rng = np.random.default_rng(31)
    state = noisy_state(0.995, 0.984)
    target = analytic_chsh(state)
    uncertainties = []
    for n in (1_000, 10_000, 100_000):
        result = _sampled_chsh(rng, state, n)
        assert abs(result.s_value - target) <= 4 * result.s_uncertainty
        uncertainties.append(result.s_uncertainty)
    assert uncertainties[0] > uncertainties[1] > uncertainties[2]


def test_propagated_uncertainty_matches_replica_spread():
    rng = np.random.default_rng(77)
    state = noisy_state(0.995, 0.984)
    values, uncertainties = [], []
    for _ in range(300):
        value, uncertainty = correlation_from_counts(sample_setting_counts(rng, state, SETTING, 1000))
        values.append(value)
        uncertainties.append(uncertainty)
    assert np.std(values, ddof=1) == pytest.approx(np.mean(uncertainties), rel=0.2)


def test_loss_cancels_in_expected_correlations():
    """Binomial thinning of every coincidence by the same link transmission leaves E unbiased."""
    rng = np.random.default_rng(404)
    state = noisy_state(0.995, 0.984)
    expected = ideal_correlation(state, SETTING)
    estimates = []
    for eta in (1.0, 1e-1, 1e-2, 1e-3, 1e-4):
        n_emitted = int(4000 / eta)
        counts = sample_setting_counts(rng, state, SETTING, n_emitted)
        thinned = SettingCounts(SETTING, *(rng.binomial(int(n), eta) for n in counts.as_tuple()))
        estimates.append(correlation_from_counts(thinned))
    for value, uncertainty in estimates:
        assert abs(value - expected) <= 4 * uncertainty
    for (v1, u1), (v2, u2) in zip(estimates, estimates[1:]):
        assert abs(v1 - v2) <= 3 * math.hypot(u1, u2)
