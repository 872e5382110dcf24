import math

import numpy as np
import pytest

from PyQIRange.core.extractors.chsh_estimator import analytic_chsh
from PyQIRange.core.quantum.polarization import (
    AnalyzerSetting, ChshSettings, SourceModel, TwoQubitPolarizationState, basis_visibilities,
    bell_state_psi_plus, coincidence_probabilities, correlation_observable, ideal_correlation,
    maximally_mixed_state, noisy_state)

ANGLE_GRID = np.arange(-90.0, 181.0, 22.5)


def test_bell_state_psi_plus_entries():
    rho = bell_state_psi_plus().rho
    expected = np.zeros((4, 4))
    expected[1:3, 1:3] = 0.5
    assert np.allclose(rho, expected, atol=0.0)
    state = bell_state_psi_plus()
    assert state.trace() == pytest.approx(1.0, abs=1e-12)
    assert state.purity() == pytest.approx(1.0, abs=1e-12)


def test_invalid_density_operator_rejected():
    with pytest.raises(ValueError):
        TwoQubitPolarizationState(np.eye(4))
    with pytest.raises(ValueError):
        TwoQubitPolarizationState(np.diag([1.5, -0.5, 0.0, 0.0]))
    with pytest.raises(ValueError):
        TwoQubitPolarizationState(np.eye(3) / 3.0)


def test_noisy_state_without_noise_is_psi_plus():
    assert np.allclose(noisy_state(1.0, 1.0).rho, bell_state_psi_plus().rho, atol=1e-15)


def test_noisy_state_rejects_unrepresentable_visibilities():
    with pytest.raises(ValueError):
        noisy_state(0.9, 0.95)
    with pytest.raises(ValueError):
        SourceModel(pair_rate=1e3, visibility_hv=0.9, visibility_ad=0.95)


@pytest.mark.parametrize("v_hv,v_ad", [(0.995, 0.984), (1.0, 0.5), (0.8, 0.8), (0.5, 0.1)])
def test_visibility_round_trip(v_hv, v_ad):
    recovered = basis_visibilities(noisy_state(v_hv, v_ad))
    assert recovered == pytest.approx((v_hv, v_ad), abs=1e-9)


def test_fully_dephased_correlation():
    state = noisy_state(1.0, 0.0)
    for alpha in ANGLE_GRID:
        for beta in ANGLE_GRID:
            expected = -math.cos(math.radians(2 * alpha)) * math.cos(math.radians(2 * beta))
            assert ideal_correlation(state, AnalyzerSetting(alpha, beta)) == pytest.approx(expected, abs=1e-12)


def test_coincidence_probabilities_examples():
    psi = bell_state_psi_plus()
    assert coincidence_probabilities(psi, AnalyzerSetting(0, 0)) == pytest.approx((0.0, 0.5, 0.5, 0.0), abs=1e-12)
    assert coincidence_probabilities(psi, AnalyzerSetting(0, 45)) == pytest.approx((0.25,) * 4, abs=1e-12)
    assert coincidence_probabilities(maximally_mixed_state(), AnalyzerSetting(13.0, 71.0)) == pytest.approx(
        (0.25,) * 4, abs=1e-12)


def test_probabilities_normalized_for_every_state():
    states = [bell_state_psi_plus(), noisy_state(0.995, 0.984), noisy_state(1.0, 0.0), maximally_mixed_state()]
    for state in states:
        for alpha in ANGLE_GRID:
            for beta in ANGLE_GRID:
                p = coincidence_probabilities(state, AnalyzerSetting(alpha, beta)).as_array()
                assert np.all(p >= 0.0)
                assert abs(p.sum() - 1.0) <= 1e-12


def test_ideal_correlation_of_psi_plus():
    psi = bell_state_psi_plus()
    assert ideal_correlation(psi, AnalyzerSetting(0, 0)) == pytest.approx(-1.0, abs=1e-12)
    assert ideal_correlation(psi, AnalyzerSetting(0, 22.5)) == pytest.approx(-math.sqrt(2) / 2, abs=1e-12)
    assert ideal_correlation(maximally_mixed_state(), AnalyzerSetting(30, 10)) == pytest.approx(0.0, abs=1e-12)
    for alpha in ANGLE_GRID:
        for beta in ANGLE_GRID:
            expected = -math.cos(math.radians(2 * (alpha + beta)))
            assert ideal_correlation(psi, AnalyzerSetting(alpha, beta)) == pytest.approx(expected, abs=1e-12)


def test_correlation_invariant_under_opposite_shifts():
    psi = bell_state_psi_plus()
    for alpha in ANGLE_GRID:
        for beta in ANGLE_GRID:
            shifted = AnalyzerSetting(alpha + 90.0, beta - 90.0)
            assert ideal_correlation(psi, shifted) == pytest.approx(
                ideal_correlation(psi, AnalyzerSetting(alpha, beta)), abs=1e-12)


def test_correlation_agrees_with_product_observable():
    for state in (bell_state_psi_plus(), noisy_state(0.995, 0.984), noisy_state(0.7, 0.3)):
        for alpha in ANGLE_GRID:
            for beta in ANGLE_GRID:
                setting = AnalyzerSetting(alpha, beta)
                assert correlation_observable(state, setting) == pytest.approx(
                    ideal_correlation(state, setting), abs=1e-12)


def test_angles_are_axis_like():
    setting = AnalyzerSetting(200.0, -22.5)
    assert setting.normalized() == AnalyzerSetting(20.0, 157.5)
    assert setting.key() == AnalyzerSetting(20.0, 157.5).key()
    assert setting.theta_signal == pytest.approx(100.0)
    assert AnalyzerSetting(10.0, 20.0).orthogonal(signal=True) == AnalyzerSetting(100.0, 20.0)


def test_canonical_settings_reach_tsirelson_bound():
    assert analytic_chsh(bell_state_psi_plus(), ChshSettings()) == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_source_state_s_value():
    s_value = analytic_chsh(SourceModel(332e3, 0.995, 0.984).state())
    assert 2.78 <= s_value <= 2.82
    assert s_value == pytest.approx(2.79873, abs=1e-5)
