"""
CHSH Estimator Module

Correlation parameters and the CHSH S-value from setting-resolved coincidence counts.

For one analyzer setting (alpha, beta) the four coincidence numbers give

    E = (N(a,b) + N(a',b') - N(a,b') - N(a',b)) / (N(a,b) + N(a',b') + N(a,b') + N(a',b))

where primes denote the orthogonal analyzer outcome. Counts are treated as independent
Poisson variables and propagated to first order, so with P and M the sums of the equal-
and opposite-outcome counts, dE = 2 sqrt(P M / N^3).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from PyQIRange.core.quantum.polarization import (
    AnalyzerSetting, ChshSettings, TwoQubitPolarizationState,
    coincidence_probabilities, ideal_correlation)

CLASSICAL_BOUND = 2.0
TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
DEFAULT_K_SIGMA = 3.0


class UndefinedCorrelationError(ValueError):
    """No coincidences were recorded for an analyzer setting, so E is undefined."""

    def __init__(self, setting: AnalyzerSetting, detail: str = "") -> None:
        self.setting = setting
        message = f"Correlation undefined at setting alpha={setting.alpha:g} deg, beta={setting.beta:g} deg: zero coincidences"
        super().__init__(f"{message} ({detail})" if detail else message)


@dataclass(frozen=True)
class SettingCounts:
    """
    Coincidence counts of the four outcome combinations at one setting.

    Counts are usually integers; accidental subtraction can make them non-integer.
    """
    setting: AnalyzerSetting
    n_ab: float
    n_ab_perp: float
    n_aperp_b: float
    n_aperp_bperp: float

    def __post_init__(self) -> None:
        for name in ("n_ab", "n_ab_perp", "n_aperp_b", "n_aperp_bperp"):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be a finite non-negative count, got {value}")

    @property
    def total(self) -> float:
        return self.n_ab + self.n_ab_perp + self.n_aperp_b + self.n_aperp_bperp

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.n_ab, self.n_ab_perp, self.n_aperp_b, self.n_aperp_bperp)

    def scaled(self, factor: float) -> "SettingCounts":
        return SettingCounts(self.setting, *(n * factor for n in self.as_tuple()))


@dataclass(frozen=True)
class Correlation:
    setting: AnalyzerSetting
    value: float
    uncertainty: float


@dataclass(frozen=True)
class ChshResult:
    """
    Attributes:
        settings: The four CHSH angles
        correlations: E(a,b), E(a,b'), E(a',b), E(a',b') with uncertainties
        s_value: |E(a,b) - E(a,b') + E(a',b) + E(a',b')|
        s_uncertainty: Root-sum-square of the four dE
        detected: s_value - k_sigma * s_uncertainty > 2
        sigma_above_2: (s_value - 2) / s_uncertainty
        k_sigma: Confidence factor used for the verdict
    """
    settings: ChshSettings
    correlations: Tuple[Correlation, ...]
    s_value: float
    s_uncertainty: float
    detected: bool
    sigma_above_2: float
    k_sigma: float = DEFAULT_K_SIGMA


@dataclass(frozen=True)
class DetectionVerdict:
    detected: bool
    s_value: float
    s_uncertainty: float
    k_sigma: float
    lower_bound: float
    sigma_above_2: float

    def describe(self) -> str:
        state = "DETECTED" if self.detected else "not detected"
        return (f"Object {state}: S = {self.s_value:.4f} +- {self.s_uncertainty:.4f}, "
                f"S - {self.k_sigma:g} dS = {self.lower_bound:.4f} (classical bound 2)")


def correlation_from_counts(counts: SettingCounts) -> Tuple[float, float]:
    """
    Returns:
        Tuple of (E, dE)

    Raises:
        UndefinedCorrelationError: if all four counts are zero.
    """
    total = counts.total
    if total <= 0:
        raise UndefinedCorrelationError(counts.setting)
    same = counts.n_ab + counts.n_aperp_bperp
    opposite = counts.n_ab_perp + counts.n_aperp_b
    value = (same - opposite) / total
    uncertainty = 2.0 * math.sqrt(same * opposite / total ** 3)
    return float(np.clip(value, -1.0, 1.0)), uncertainty


def _sigma_above(s_value: float, s_uncertainty: float) -> float:
    if s_uncertainty > 0:
        return (s_value - CLASSICAL_BOUND) / s_uncertainty
    if s_value == CLASSICAL_BOUND:
        return 0.0
    return math.copysign(math.inf, s_value - CLASSICAL_BOUND)


def chsh_s(correlations: Sequence[Correlation], settings: Optional[ChshSettings] = None,
           k_sigma: float = DEFAULT_K_SIGMA) -> ChshResult:
    """
    Combine the four canonical correlations into S.

    Args:
        correlations: E at (a,b), (a,b'), (a',b), (a',b') in this order
        settings: Angles the correlations were measured at; checked against each correlation
        k_sigma: Confidence factor of the detection verdict
    """
    settings = settings or ChshSettings()
    if len(correlations) != 4:
        raise ValueError(f"CHSH needs exactly four correlations, got {len(correlations)}")
    for expected, corr in zip(settings.combinations(), correlations):
        if expected.key() != corr.setting.key():
            raise ValueError(f"Correlation at {corr.setting.label()} does not match CHSH setting {expected.label()}")

    s_value = abs(sum(sign * corr.value for sign, corr in zip(ChshSettings.SIGNS, correlations)))
    s_uncertainty = math.sqrt(sum(corr.uncertainty ** 2 for corr in correlations))
    detected = s_value - k_sigma * s_uncertainty > CLASSICAL_BOUND
    return ChshResult(
        settings=settings,
        correlations=tuple(correlations),
        s_value=s_value,
        s_uncertainty=s_uncertainty,
        detected=detected,
        sigma_above_2=_sigma_above(s_value, s_uncertainty),
        k_sigma=k_sigma,
    )


def chsh_from_counts(counts: Sequence[SettingCounts], settings: Optional[ChshSettings] = None,
                     k_sigma: float = DEFAULT_K_SIGMA) -> ChshResult:
    correlations = []
    for c in counts:
        value, uncertainty = correlation_from_counts(c)
        correlations.append(Correlation(c.setting, value, uncertainty))
    return chsh_s(correlations, settings, k_sigma)


def detect_object(result: ChshResult, k_sigma: float = DEFAULT_K_SIGMA) -> DetectionVerdict:
    """An S-value more than k_sigma uncertainties above 2 confirms the object."""
    lower_bound = result.s_value - k_sigma * result.s_uncertainty
    verdict = DetectionVerdict(
        detected=lower_bound > CLASSICAL_BOUND,
        s_value=result.s_value,
        s_uncertainty=result.s_uncertainty,
        k_sigma=k_sigma,
        lower_bound=lower_bound,
        sigma_above_2=_sigma_above(result.s_value, result.s_uncertainty),
    )
    logging.debug(verdict.describe())
    return verdict


def analytic_chsh(state: TwoQubitPolarizationState, settings: Optional[ChshSettings] = None) -> float:
    """Exact S of a state at the given angles."""
    settings = settings or ChshSettings()
    values = [ideal_correlation(state, s) for s in settings.combinations()]
    return abs(sum(sign * v for sign, v in zip(ChshSettings.SIGNS, values)))


def sample_setting_counts(rng: np.random.Generator, state: TwoQubitPolarizationState,
                          setting: AnalyzerSetting, n_total: int) -> SettingCounts:
    """Multinomial sample of n_total coincidences over the four outcomes of `setting`."""
    probabilities = coincidence_probabilities(state, setting).as_array()
    n_hh, n_hv, n_vh, n_vv = rng.multinomial(n_total, probabilities)
    return SettingCounts(setting, int(n_hh), int(n_hv), int(n_vh), int(n_vv))
