"""
Data Exporter Module

Pure file writers:
- write_csv_data: Generic CSV writer with configurable data type for logging
- write_tag_file / write_tag_csv: QTT1 and CSV time-tag files
- write_yaml_data: Manifests and reports

Row builders turn analysis objects into CSV-ready dictionaries. Every writer is atomic
and logs failures instead of raising.
"""
import io
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd
import yaml

from PyQIRange.core.extractors.chsh_estimator import ChshResult, SettingCounts
from PyQIRange.core.extractors.coincidences import CoincidenceHistogram
from PyQIRange.core.parsers.tag_parser import QTT1_HEADER, QTT1_MAGIC, QTT1_RECORD, TAG_CSV_COLUMNS
from PyQIRange.core.parsers.table_parser import SUMMARY_ROW
from PyQIRange.core.utils.file_utils import write_atomic, write_text


def write_csv_data(data_list: Union[List[Dict[str, Any]], pd.DataFrame], file_path: Path, data_type: str = "data",
                   columns: Sequence[str] = ()) -> bool:
    """
    Write data to CSV file with generic data type support.

    Args:
        data_list: List of data dictionaries (CSV-ready) or a DataFrame
        file_path: Output CSV file path
        data_type: Type of data for logging (e.g., "histogram", "chsh", "sweep")
        columns: Column order; required to write a header-only table from an empty list

    Returns:
        True if successful, False otherwise
    """
    if len(data_list) == 0 and not columns:
        logging.warning(f"No {data_type} data to write")
        return False

    try:
        df = data_list if isinstance(data_list, pd.DataFrame) else pd.DataFrame(data_list, columns=list(columns) or None)
        buffer = io.StringIO()
        df.to_csv(buffer, index=False, lineterminator="\n")
        write_atomic(file_path, buffer.getvalue())
        logging.info(f"Saved {len(df)} {data_type} rows to {file_path}")
        return True

    except Exception as e:
        logging.error(f"Failed to write {data_type} CSV file {file_path}: {e}")
        return False


def encode_qtt1(channels: np.ndarray, flags: np.ndarray, timestamps: np.ndarray) -> bytes:
    """Serialize records to QTT1 bytes; records are written in the given order."""
    if np.any(np.asarray(timestamps) < 0):
        raise ValueError("QTT1 timestamps must be non-negative")
    header = np.zeros(1, dtype=QTT1_HEADER)
    header["magic"] = QTT1_MAGIC
    header["count"] = len(timestamps)
    records = np.zeros(len(timestamps), dtype=QTT1_RECORD)
    records["channel"] = channels
    records["flags"] = flags
    records["timestamp"] = timestamps
    return header.tobytes() + records.tobytes()


def write_tag_file(file_path: Path, channels: np.ndarray, flags: np.ndarray, timestamps: np.ndarray) -> bool:
    """
    Write one QTT1 file atomically.

    Returns:
        True if successful, False otherwise
    """
    try:
        write_atomic(file_path, encode_qtt1(channels, flags, timestamps))
        logging.debug(f"Written {len(timestamps)} tags to {file_path}")
        return True
    except Exception as e:
        logging.error(f"Failed to write tag file {file_path}: {e}")
        return False


def write_tag_csv(file_path: Path, channels: np.ndarray, flags: np.ndarray, timestamps: np.ndarray) -> bool:
    rows = pd.DataFrame({
        TAG_CSV_COLUMNS[0]: np.asarray(channels, dtype=np.uint32),
        TAG_CSV_COLUMNS[1]: np.asarray(flags, dtype=np.uint32),
        TAG_CSV_COLUMNS[2]: np.asarray(timestamps, dtype=np.int64),
    })
    return write_csv_data(rows, file_path, "tag", columns=TAG_CSV_COLUMNS)


def write_yaml_data(data: Dict[str, Any], file_path: Path, data_type: str = "report") -> bool:
    content = yaml.safe_dump(data, sort_keys=False, default_flow_style=False)
    if write_text(file_path, content):
        logging.info(f"Saved {data_type} to {file_path}")
        return True
    return False


def histogram_rows(histogram: CoincidenceHistogram) -> List[Dict[str, Any]]:
    """(delay_ps, counts) rows; delay_ps is the lower edge of each bin."""
    edges = histogram.bin_edges()[:-1]
    return [{"delay_ps": int(d), "counts": int(c)} for d, c in zip(edges, histogram.counts)]


def chsh_rows(result: ChshResult, counts: Sequence[SettingCounts] = ()) -> List[Dict[str, Any]]:
    """One row per setting (E, dE, raw counts) followed by the S summary row."""
    rows = []
    for i, corr in enumerate(result.correlations):
        c = counts[i] if i < len(counts) else None
        rows.append({
            "setting": corr.setting.label(),
            "alpha_deg": corr.setting.alpha,
            "beta_deg": corr.setting.beta,
            "n_ab": c.n_ab if c else None,
            "n_ab_perp": c.n_ab_perp if c else None,
            "n_aperp_b": c.n_aperp_b if c else None,
            "n_aperp_bperp": c.n_aperp_bperp if c else None,
            "E": corr.value,
            "dE": corr.uncertainty,
            "detected": None,
        })
    rows.append({
        "setting": SUMMARY_ROW, "alpha_deg": None, "beta_deg": None,
        "n_ab": None, "n_ab_perp": None, "n_aperp_b": None, "n_aperp_bperp": None,
        "E": result.s_value, "dE": result.s_uncertainty, "detected": bool(result.detected),
    })
    return rows


CHSH_COLUMNS = ("setting", "alpha_deg", "beta_deg", "n_ab", "n_ab_perp", "n_aperp_b",
                "n_aperp_bperp", "E", "dE", "detected")
HISTOGRAM_COLUMNS = ("delay_ps", "counts")
