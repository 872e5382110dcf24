"""
Polarization Module

Two-qubit polarization states of the signal-idler pair and exact measurement statistics
for half-wave-plate + PBS analyzers.

Basis ordering of every density operator is (HH, HV, VH, VV); the first qubit is the
signal photon (probe or reference path), the second the idler. An analyzer setting
(alpha, beta) puts the signal HWP at alpha/2 and the idler HWP at beta/2, after which a
PBS transmits H and reflects V. All functions here are pure and safe to share between
threads.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

BASIS_LABELS = ("HH", "HV", "VH", "VV")
STATE_TOLERANCE = 1e-12

_PAULI_Z = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class AnalyzerSetting:
    """Polarization rotation angles in degrees, measured from horizontal."""
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError(f"Analyzer angles must be finite, got ({self.alpha}, {self.beta})")

    @property
    def theta_signal(self) -> float:
        """Signal half-wave plate angle in degrees."""
        return self.alpha / 2.0

    @property
    def theta_idler(self) -> float:
        """Idler half-wave plate angle in degrees."""
        return self.beta / 2.0

    def normalized(self) -> "AnalyzerSetting":
        # Polarization is axis-like: angles only matter modulo 180 degrees.
        return AnalyzerSetting(_mod180(self.alpha), _mod180(self.beta))

    def key(self) -> Tuple[float, float]:
        """Hashable, rounding-tolerant identity used to match settings across runs."""
        norm = self.normalized()
        return (round(norm.alpha, 9) % 180.0, round(norm.beta, 9) % 180.0)

    def orthogonal(self, signal: bool = False, idler: bool = False) -> "AnalyzerSetting":
        """Return the setting with the signal and/or idler angle moved to the orthogonal polarization."""
        return AnalyzerSetting(self.alpha + (90.0 if signal else 0.0), self.beta + (90.0 if idler else 0.0))

    def label(self) -> str:
        return f"a{self.alpha:g}_b{self.beta:g}"


def _mod180(angle: float) -> float:
    return math.fmod(math.fmod(angle, 180.0) + 180.0, 180.0)


@dataclass(frozen=True, eq=False)
class TwoQubitPolarizationState:
    """
    Density operator over (HH, HV, VH, VV).

    Construction validates Hermiticity, unit trace and positivity within 1e-12.
    """
    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"Density operator must be 4x4, got shape {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=STATE_TOLERANCE, rtol=0.0):
            raise ValueError("Density operator is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > STATE_TOLERANCE:
            raise ValueError(f"Density operator trace is {trace!r}, expected 1")
        min_eigenvalue = np.linalg.eigvalsh(rho).min()
        if min_eigenvalue < -STATE_TOLERANCE:
            raise ValueError(f"Density operator has negative eigenvalue {min_eigenvalue!r}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def trace(self) -> float:
        return float(np.trace(self.rho).real)


class CoincidenceProbabilities(NamedTuple):
    """Joint PBS outcome probabilities; H = transmitted port, V = reflected port."""
    p_hh: float
    p_hv: float
    p_vh: float
    p_vv: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class SourceModel:
    """Entangled-pair source: pair rate in pairs/s plus the two measured visibilities."""
    pair_rate: float
    visibility_hv: float = 1.0
    visibility_ad: float = 1.0
    heralding_efficiency: float = 1.0

    def __post_init__(self) -> None:
        if self.pair_rate < 0 or not math.isfinite(self.pair_rate):
            raise ValueError(f"pair_rate must be a finite non-negative rate, got {self.pair_rate}")
        for name in ("visibility_hv", "visibility_ad", "heralding_efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.visibility_ad > self.visibility_hv:
            raise ValueError(
                f"visibility_ad ({self.visibility_ad}) > visibility_hv ({self.visibility_hv}) "
                "cannot be represented by the white-noise + dephasing model")

    def state(self) -> TwoQubitPolarizationState:
        return noisy_state(self.visibility_hv, self.visibility_ad)


def _psi_plus_projector() -> np.ndarray:
    psi = np.array([0.0, 1.0, 1.0, 0.0]) / math.sqrt(2.0)
    return np.outer(psi, psi.conj())


def bell_state_psi_plus() -> TwoQubitPolarizationState:
    """(|HV> + |VH>)/sqrt(2) as a pure-state density operator."""
    return TwoQubitPolarizationState(_psi_plus_projector())


def noisy_state(visibility_hv: float, visibility_ad: float) -> TwoQubitPolarizationState:
    """
    White noise + dephasing mixture reproducing two measured visibilities.

        rho = eps*I/4 + (1-eps)*[p*|Psi+><Psi+| + (1-p)*(|HV><HV| + |VH><VH|)/2]

    with eps = 1 - V_HV and p = V_AD / V_HV.

    Raises:
        ValueError: if the visibilities are outside [0, 1] or V_AD > V_HV.
    """
    if not (0.0 <= visibility_ad <= 1.0 and 0.0 <= visibility_hv <= 1.0):
        raise ValueError(f"Visibilities must lie in [0, 1], got ({visibility_hv}, {visibility_ad})")
    if visibility_ad > visibility_hv:
        raise ValueError(
            f"visibility_ad ({visibility_ad}) > visibility_hv ({visibility_hv}) is not representable")
    if visibility_hv == 0.0:
        return TwoQubitPolarizationState(np.eye(4) / 4.0)

    eps = 1.0 - visibility_hv
    p = visibility_ad / visibility_hv
    dephased = np.diag([0.0, 0.5, 0.5, 0.0])
    rho = eps * np.eye(4) / 4.0 + (1.0 - eps) * (p * _psi_plus_projector() + (1.0 - p) * dephased)
    return TwoQubitPolarizationState(rho)


def maximally_mixed_state() -> TwoQubitPolarizationState:
    return TwoQubitPolarizationState(np.eye(4) / 4.0)


def waveplate_matrix(angle: float) -> np.ndarray:
    """Jones matrix of a HWP at angle/2, which maps H onto the linear polarization at `angle` degrees."""
    a = math.radians(angle)
    return np.array([[math.cos(a), math.sin(a)],
                     [math.sin(a), -math.cos(a)]])


def analyzer_unitary(setting: AnalyzerSetting) -> np.ndarray:
    return np.kron(waveplate_matrix(setting.alpha), waveplate_matrix(setting.beta))


def coincidence_probabilities(state: TwoQubitPolarizationState, setting: AnalyzerSetting) -> CoincidenceProbabilities:
    """Exact probabilities of the four joint PBS outcomes after both wave plates."""
    unitary = analyzer_unitary(setting)
    rotated = unitary @ state.rho @ unitary.conj().T
    probs = np.clip(np.real(np.diag(rotated)), 0.0, 1.0)
    probs = probs / probs.sum()
    return CoincidenceProbabilities(*(float(p) for p in probs))


def ideal_correlation(state: TwoQubitPolarizationState, setting: AnalyzerSetting) -> float:
    """E = P_HH + P_VV - P_HV - P_VH."""
    p = coincidence_probabilities(state, setting)
    return p.p_hh + p.p_vv - p.p_hv - p.p_vh


def correlation_observable(state: TwoQubitPolarizationState, setting: AnalyzerSetting) -> float:
    """E as the expectation of the product observable A(alpha) x B(beta); independent of the probability route."""
    a = waveplate_matrix(setting.alpha)
    b = waveplate_matrix(setting.beta)
    observable = np.kron(a @ _PAULI_Z @ a, b @ _PAULI_Z @ b)
    return float(np.trace(state.rho @ observable).real)


def fringe_visibility(state: TwoQubitPolarizationState, idler_angle: float) -> float:
    """
    Coincidence-fringe visibility with the idler analyzer fixed at `idler_angle`.

    The signal analyzer is swept between the extremes of the |Psi+> fringe,
    alpha = -beta (minimum) and alpha = 90 - beta (maximum) of the transmitted-transmitted rate.
    """
    p_max = coincidence_probabilities(state, AnalyzerSetting(90.0 - idler_angle, idler_angle)).p_hh
    p_min = coincidence_probabilities(state, AnalyzerSetting(-idler_angle, idler_angle)).p_hh
    total = p_max + p_min
    if total <= 0.0:
        return 0.0
    return abs(p_max - p_min) / total


def basis_visibilities(state: TwoQubitPolarizationState) -> Tuple[float, float]:
    """(V_HV, V_AD): fringe visibilities with the idler in the H/V and in the A/D basis."""
    return fringe_visibility(state, 0.0), fringe_visibility(state, 45.0)


@dataclass(frozen=True)
class ChshSettings:
    """
    The four analyzer angles of a CHSH measurement, in degrees. The defaults maximize
    S for |Psi+>, where E(alpha, beta) = -cos 2(alpha + beta).
    """
    alpha: float = 0.0
    alpha_prime: float = 45.0
    beta: float = 67.5
    beta_prime: float = 22.5

    # S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|
    SIGNS = (1.0, -1.0, 1.0, 1.0)

    def combinations(self) -> Tuple[AnalyzerSetting, AnalyzerSetting, AnalyzerSetting, AnalyzerSetting]:
        return (
            AnalyzerSetting(self.alpha, self.beta),
            AnalyzerSetting(self.alpha, self.beta_prime),
            AnalyzerSetting(self.alpha_prime, self.beta),
            AnalyzerSetting(self.alpha_prime, self.beta_prime),
        )
