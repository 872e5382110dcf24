"""
Table Parser Module

Reads the CSV tables written by the data exporter back into analysis objects.
"""
import math
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from PyQIRange.core.extractors.chsh_estimator import ChshResult, Correlation, DEFAULT_K_SIGMA
from PyQIRange.core.extractors.coincidences import CoincidenceHistogram
from PyQIRange.core.quantum.polarization import AnalyzerSetting, ChshSettings

SUMMARY_ROW = "S"


def read_table(file_path: Path) -> pd.DataFrame:
    """Read any exported table with exact float round trip."""
    return pd.read_csv(file_path, float_precision="round_trip")


def read_histogram_csv(file_path: Path, channel_pair: Tuple[int, int] = (0, 0),
                       integration_time: float = 0.0, bin_width: Optional[float] = None) -> CoincidenceHistogram:
    """
    Rebuild a histogram from its (delay_ps, counts) table; delay_ps is the lower bin edge.

    The bin width is taken from the spacing of consecutive rows unless given.
    """
    frame = read_table(file_path)
    if list(frame.columns[:2]) != ["delay_ps", "counts"]:
        raise ValueError(f"{file_path}: expected columns delay_ps,counts, got {list(frame.columns)}")
    delays = frame["delay_ps"].to_numpy(np.int64)
    if bin_width is None:
        if delays.size < 2:
            raise ValueError(f"{file_path}: bin width cannot be inferred from fewer than two rows")
        spacing = np.unique(np.diff(delays))
        if spacing.size != 1 or spacing[0] <= 0:
            raise ValueError(f"{file_path}: delay_ps is not evenly spaced")
        bin_width = int(spacing[0])
    return CoincidenceHistogram(int(bin_width), int(delays[0]) if delays.size else 0,
                                frame["counts"].to_numpy(np.int64), channel_pair, integration_time)


def _is_true(value: object) -> bool:
    return str(value).strip().lower() == "true"


def read_chsh_csv(file_path: Path, k_sigma: float = DEFAULT_K_SIGMA) -> ChshResult:
    """Rebuild a ChshResult from its per-setting rows and the trailing summary row."""
    frame = read_table(file_path)
    frame["setting"] = frame["setting"].astype(str)
    summary = frame[frame["setting"] == SUMMARY_ROW]
    rows = frame[frame["setting"] != SUMMARY_ROW]
    if len(summary) != 1 or len(rows) != 4:
        raise ValueError(f"{file_path}: expected four setting rows and one summary row")

    correlations = tuple(
        Correlation(AnalyzerSetting(float(r.alpha_deg), float(r.beta_deg)), float(r.E), float(r.dE))
        for r in rows.itertuples(index=False)
    )
    settings = ChshSettings(
        alpha=correlations[0].setting.alpha,
        alpha_prime=correlations[2].setting.alpha,
        beta=correlations[0].setting.beta,
        beta_prime=correlations[1].setting.beta,
    )
    s_row = summary.iloc[0]
    s_value, s_uncertainty = float(s_row["E"]), float(s_row["dE"])
    sigma = (s_value - 2.0) / s_uncertainty if s_uncertainty > 0 else math.copysign(math.inf, s_value - 2.0)
    return ChshResult(
        settings=settings,
        correlations=correlations,
        s_value=s_value,
        s_uncertainty=s_uncertainty,
        detected=_is_true(s_row["detected"]),
        sigma_above_2=sigma,
        k_sigma=k_sigma,
    )
