"""
Run Builder Module

Constructs the output directory of a run and reads it back. A run directory is
structured as follows:

    {output_dir}/
    ├── manifest.yaml            # config hash, seeds, settings, full resolved config
    ├── report.yaml              # structured results of the last analysis
    ├── tags/
    │   ├── setting_00_a0_b67.5.qtt
    │   ├── setting_01_a0_b22.5.qtt
    │   └── ...
    └── tables/
        ├── histogram_probe_idler.csv
        ├── histogram_reference_idler.csv
        ├── chsh_probe.csv
        ├── chsh_reference.csv
        ├── linkbudget.csv
        └── sweep.csv

Manifests hold no timestamps or host data, so a (config, seed) pair always produces
the same tree byte for byte.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from PyQIRange import __version__
from PyQIRange.core.config.config_manager import ConfigManager
from PyQIRange.core.constants import Channel
from PyQIRange.core.exporters.data_exporter import write_tag_csv, write_tag_file, write_yaml_data
from PyQIRange.core.models.time_tags import RunBundle, SettingRun
from PyQIRange.core.parsers.tag_parser import read_tag_streams
from PyQIRange.core.quantum.polarization import AnalyzerSetting
from PyQIRange.core.runners.event_engine import ExperimentPlan
from PyQIRange.core.utils.file_utils import sanitize_filename

MANIFEST_NAME = "manifest.yaml"
REPORT_NAME = "report.yaml"
MANIFEST_FORMAT = "pyqirange-run"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class RunLayout:
    root: Path

    @property
    def manifest(self) -> Path:
        return self.root / MANIFEST_NAME

    @property
    def report(self) -> Path:
        return self.root / REPORT_NAME

    @property
    def tags_dir(self) -> Path:
        return self.root / "tags"

    @property
    def tables_dir(self) -> Path:
        return self.root / "tables"

    def table(self, name: str) -> Path:
        return self.tables_dir / f"{name}.csv"


def tag_file_name(run: SettingRun, suffix: str = ".qtt") -> str:
    return f"setting_{run.setting_index:02d}_{sanitize_filename(run.setting.label())}{suffix}"


def build_manifest(config_manager: ConfigManager, plan: ExperimentPlan, bundle: RunBundle,
                   tag_files: List[str]) -> Dict[str, Any]:
    """Manifest dictionary; settings are listed in plan order with their spawned seed keys."""
    settings = []
    for run, file_name in zip(bundle, tag_files):
        settings.append({
            "index": run.setting_index,
            "alpha_deg": float(run.setting.alpha),
            "beta_deg": float(run.setting.beta),
            "spawn_key": [run.setting_index],
            "file": f"tags/{file_name}",
            "tags": {Channel(c).name.lower(): len(s) for c, s in sorted(run.streams.items())},
        })
    return {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "generator": f"PyQIRange {__version__}",
        "config_hash": config_manager.config_hash(),
        "seed": int(plan.seed),
        "duration_per_setting_s": float(plan.duration_per_setting),
        "outcome_convention": plan.outcome_convention.value,
        "expected_probe_delay_ps": int(plan.expected_probe_delay()),
        "settings": settings,
        "config": config_manager.to_mapping(),
    }


def write_run(out_dir: Path, bundle: RunBundle, config_manager: ConfigManager, plan: ExperimentPlan,
              csv_tags: bool = False) -> bool:
    """
    Write tag files and the manifest of a simulated run.

    Returns:
        True if every file was written
    """
    layout = RunLayout(Path(out_dir))
    ok = True
    tag_files = []
    for run in bundle:
        channels, flags, stamps = run.merged_records()
        name = tag_file_name(run)
        ok &= write_tag_file(layout.tags_dir / name, channels, flags, stamps)
        if csv_tags:
            ok &= write_tag_csv(layout.tags_dir / tag_file_name(run, ".csv"), channels, flags, stamps)
        tag_files.append(name)
    ok &= write_yaml_data(build_manifest(config_manager, plan, bundle, tag_files), layout.manifest, "manifest")
    logging.info(f"Wrote {len(tag_files)} tag file(s) to {layout.tags_dir}")
    return bool(ok)


def read_manifest(run_dir: Path) -> Dict[str, Any]:
    """
    Raises:
        FileNotFoundError: if the directory has no manifest.
        ValueError: if the manifest is not a PyQIRange run manifest.
    """
    layout = RunLayout(Path(run_dir))
    if not layout.manifest.is_file():
        raise FileNotFoundError(f"No {MANIFEST_NAME} in {run_dir}")
    manifest = yaml.safe_load(layout.manifest.read_text(encoding="utf-8"))
    if not isinstance(manifest, dict) or manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{layout.manifest} is not a {MANIFEST_FORMAT} manifest")
    for key in ("config", "settings", "duration_per_setting_s"):
        if key not in manifest:
            raise ValueError(f"{layout.manifest}: missing '{key}'")
    return manifest


def load_run(run_dir: Path, config_manager: Optional[ConfigManager] = None
             ) -> Tuple[ConfigManager, ExperimentPlan, RunBundle]:
    """
    Load a run directory written by write_run, or any directory of QTT1 files listed in a manifest.

    Args:
        run_dir: Run directory
        config_manager: Configuration to analyze with; the manifest's own config when omitted

    Raises:
        TagFileError: if a tag file is malformed.
    """
    layout = RunLayout(Path(run_dir))
    manifest = read_manifest(run_dir)
    recorded = ConfigManager.from_mapping(manifest["config"])
    if manifest.get("config_hash") and manifest["config_hash"] != recorded.config_hash():
        logging.warning(f"{layout.manifest}: config hash does not match the recorded config")
    config_manager = config_manager or recorded
    plan = config_manager.config.plan(seed=int(manifest.get("seed", config_manager.config.seed)))

    duration = float(manifest["duration_per_setting_s"])
    runs = []
    for i, entry in enumerate(manifest["settings"]):
        streams = read_tag_streams(layout.root / entry["file"], channels=[int(c) for c in Channel])
        runs.append(SettingRun(
            setting=AnalyzerSetting(float(entry["alpha_deg"]), float(entry["beta_deg"])),
            duration=duration,
            streams=streams,
            setting_index=int(entry.get("index", i)),
        ))
    bundle = RunBundle(runs=tuple(runs), seed=plan.seed)
    logging.info(f"Loaded {len(runs)} setting run(s) from {layout.root}")
    return config_manager, plan, bundle
