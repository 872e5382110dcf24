"""
Run Report Module

Formatted console reports (range verdict, CHSH tables, link budget and sweep tables)
and the structured report.yaml written next to the tables.
"""
import logging
import math
from typing import Any, Dict, List, Optional, Sequence

from PyQIRange.core.constants import Channel
from PyQIRange.core.extractors.chsh_estimator import ChshResult, SettingCounts, detect_object
from PyQIRange.core.extractors.peak_finder import RangeEstimate
from PyQIRange.core.extractors.protocol import ProtocolResult

# Create a separate logger for summary that uses a simple formatter.
summary_logger = logging.getLogger("summary_logger")
if not summary_logger.handlers:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(message)s"))
    summary_logger.addHandler(handler)
    summary_logger.propagate = False
    summary_logger.setLevel(logging.INFO)

UNCERTAINTY_NOTE = "uncertainties: independent Poisson counts, first-order propagation"


def _banner(title: str, char: str = "-") -> None:
    boundary_line = char * 60
    summary_logger.info(f"\n{boundary_line}")
    summary_logger.info(f"{' ' * 8}{title}")
    summary_logger.info(boundary_line)


def print_range_report(estimate: Optional[RangeEstimate], min_significance: float) -> None:
    _banner("RANGING")
    if estimate is None:
        summary_logger.info(f"    No probe-idler peak above {min_significance:g} sigma: object absent")
        return
    summary_logger.info(f"    Peak delay      : {estimate.peak_delay:.1f} ps")
    summary_logger.info(f"    Peak counts     : {estimate.peak_counts} (background {estimate.background_mean:.3f}/bin)")
    summary_logger.info(f"    Significance    : {estimate.significance:.1f}")
    summary_logger.info(f"    Round trip      : {estimate.roundtrip_length:.3f} m")
    summary_logger.info(f"    Object distance : {estimate.object_distance:.3f} m")


def print_chsh_report(label: str, result: ChshResult, counts: Sequence[SettingCounts] = ()) -> None:
    _banner(f"CHSH: {label}")
    format_str = "{:<16} | {:>9} | {:>9} | {:>9} | {:>9} | {:>8} | {:>7}"
    summary_logger.info(format_str.format("Setting", "N(a,b)", "N(a,b')", "N(a',b)", "N(a',b')", "E", "dE"))
    for i, corr in enumerate(result.correlations):
        c = counts[i].as_tuple() if i < len(counts) else ("",) * 4
        summary_logger.info(format_str.format(
            corr.setting.label(), *(f"{n:g}" if n != "" else "" for n in c),
            f"{corr.value:+.4f}", f"{corr.uncertainty:.4f}"))
    verdict = detect_object(result, result.k_sigma)
    summary_logger.info(f"\n    S = {result.s_value:.4f} +- {result.s_uncertainty:.4f} "
                        f"({result.sigma_above_2:.1f} sigma above 2)")
    summary_logger.info(f"    {verdict.describe()}")
    summary_logger.info(f"    ({UNCERTAINTY_NOTE})")


def print_table(title: str, rows: List[Dict[str, Any]], columns: Sequence[str]) -> None:
    """Fixed-width table of selected columns."""
    _banner(title, "=")
    widths = [max(len(col), 12) for col in columns]
    summary_logger.info(" | ".join(f"{col:>{w}}" for col, w in zip(columns, widths)))
    for row in rows:
        cells = []
        for col, w in zip(columns, widths):
            value = row.get(col)
            if isinstance(value, float):
                text = "nan" if math.isnan(value) else f"{value:.6g}"
            else:
                text = "" if value is None else str(value)
            cells.append(f"{text:>{w}}")
        summary_logger.info(" | ".join(cells))


def _chsh_dict(result: Optional[ChshResult]) -> Optional[Dict[str, Any]]:
    if result is None:
        return None
    return {
        "s_value": float(result.s_value),
        "s_uncertainty": float(result.s_uncertainty),
        "sigma_above_2": float(result.sigma_above_2) if math.isfinite(result.sigma_above_2) else str(result.sigma_above_2),
        "k_sigma": float(result.k_sigma),
        "detected": bool(result.detected),
        "correlations": [
            {"alpha_deg": float(c.setting.alpha), "beta_deg": float(c.setting.beta),
             "E": float(c.value), "dE": float(c.uncertainty)}
            for c in result.correlations
        ],
    }


def build_report(result: ProtocolResult, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Structured report of an analysis, YAML-ready."""
    estimate = result.range_estimate
    report: Dict[str, Any] = {
        "duration_s": float(result.duration),
        "singles_rates_hz": {Channel(c).name.lower(): float(r) for c, r in sorted(result.singles_rates.items())},
        "range": None if estimate is None else {
            "peak_delay_ps": float(estimate.peak_delay),
            "peak_counts": int(estimate.peak_counts),
            "background_mean": float(estimate.background_mean),
            "significance": float(estimate.significance),
            "roundtrip_length_m": float(estimate.roundtrip_length),
            "object_distance_m": float(estimate.object_distance),
        },
        "probe_window_center_ps": float(result.probe_window_center),
        "reference_window_center_ps": float(result.reference_window_center),
        "chsh_probe": _chsh_dict(result.probe_chsh),
        "chsh_reference": _chsh_dict(result.reference_chsh),
        "uncertainty_model": UNCERTAINTY_NOTE,
    }
    if extra:
        report.update(extra)
    return report
