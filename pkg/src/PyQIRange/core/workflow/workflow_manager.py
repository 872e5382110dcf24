"""
WorkflowManager

Orchestrates the PyQIRange subcommands: link budget, simulation, analysis of a run
directory, the in-process CHSH protocol, ranging and distance sweeps. Every method
writes its tables and report under the output directory and returns an ExitCode.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from PyQIRange.core.config.config_manager import ConfigError, ConfigManager
from PyQIRange.core.constants import Channel, ExitCode


class WorkflowManager:
    def __init__(self, config_manager: Optional[ConfigManager], args=None) -> None:
        self.config_manager = config_manager
        self.args = args

    @property
    def output_dir(self) -> Path:
        return Path(self.config_manager.config.output_dir)

    def _require_config(self, command: str) -> ConfigManager:
        if self.config_manager is None:
            raise ConfigError("--config", f"the {command} command needs a configuration file")
        return self.config_manager

    def _overrides(self) -> Dict[str, Any]:
        if self.args is None:
            return {}
        return {
            "seed": getattr(self.args, "seed", None),
            "output_dir": getattr(self.args, "out", None),
            "workers": getattr(self.args, "workers", None),
            "bin_width": getattr(self.args, "bin_width", None),
            "k_sigma": getattr(self.args, "k_sigma", None),
        }

    def _run_config(self, run_dir: Path) -> ConfigManager:
        """The configuration given on the command line, or the one recorded in the run manifest."""
        if self.config_manager is not None:
            return self.config_manager
        from PyQIRange.core.builders.run_builder import read_manifest

        manager = ConfigManager.from_mapping(read_manifest(run_dir)["config"])
        manager.apply_overrides(**self._overrides())
        return manager

    # ------------------------------------------------------------------ commands

    def linkbudget(self) -> ExitCode:
        """
        Stage-by-stage transmission and predicted received rate at every sweep distance,
        or at the configured object distance when the file has no sweep section.
        """
        from PyQIRange.core.builders.run_builder import RunLayout
        from PyQIRange.core.channel.link_budget import STAGE_NAMES, end_to_end_transmission
        from PyQIRange.core.exporters.data_exporter import write_csv_data
        from PyQIRange.core.runners.sweep_runner import linkbudget_row
        from PyQIRange.core.status.run_report import print_table

        config = self._require_config("linkbudget").config
        distances = config.sweep.distances if config.sweep is not None else (config.link.object_distance,)

        rows: List[Dict[str, Any]] = []
        for distance in sorted(distances):
            row = linkbudget_row(config, distance)
            breakdown = end_to_end_transmission(config.link.with_distance(distance))
            row.update({stage: breakdown.factor(stage) for stage in STAGE_NAMES})
            rows.append(row)

        columns = ("distance_m", "beam_diameter_mm", *STAGE_NAMES, "total_transmission",
                   "transmitted_rate", "predicted_rate")
        print_table("LINK BUDGET", rows, ("distance_m", "beam_diameter_mm", "total_transmission", "predicted_rate"))
        ok = write_csv_data(rows, RunLayout(self.output_dir).table("linkbudget"), "link budget", columns)
        return ExitCode.OK if ok else ExitCode.FAILURE

    def simulate(self) -> ExitCode:
        """Simulate every setting of the configured plan and write tag files plus manifest."""
        from PyQIRange.core.builders.run_builder import write_run
        from PyQIRange.core.runners.event_engine import simulate_run

        manager = self._require_config("simulate")
        plan = manager.config.plan()
        bundle = simulate_run(plan)
        csv_tags = bool(getattr(self.args, "csv_tags", False)) if self.args else False
        ok = write_run(self.output_dir, bundle, manager, plan, csv_tags)
        return ExitCode.OK if ok else ExitCode.FAILURE

    def analyze(self, run_dir: Optional[str] = None, with_chsh: bool = True) -> ExitCode:
        """
        Histogram, range and (unless with_chsh is False) CHSH analysis of a run directory.

        Exits with NO_PEAK when the probe-idler histogram has no significant peak.
        """
        from PyQIRange.core.builders.run_builder import load_run
        from PyQIRange.core.extractors.protocol import analyze_plan_bundle, measure_chsh

        run_path = Path(run_dir) if run_dir else self.output_dir
        manager = self._run_config(run_path)
        manager, plan, bundle = load_run(run_path, manager)
        params = manager.config.analysis

        result = analyze_plan_bundle(bundle, plan, params, with_chsh=False)
        if result.range_estimate is not None and with_chsh:
            result = measure_chsh(result, bundle, params, plan.outcome_convention, plan.chsh)
        return self._report(run_path, manager, plan, result)

    def range(self, run_dir: Optional[str] = None) -> ExitCode:
        """Ranging only; simulates the configured plan in-process when no run directory is given."""
        if run_dir:
            return self.analyze(run_dir, with_chsh=False)

        from PyQIRange.core.extractors.protocol import analyze_plan_bundle
        from PyQIRange.core.runners.event_engine import simulate_run

        manager = self._require_config("range")
        plan = manager.config.plan()
        result = analyze_plan_bundle(simulate_run(plan), plan, manager.config.analysis, with_chsh=False)
        return self._report(self.output_dir, manager, plan, result)

    def chsh(self) -> ExitCode:
        """Simulate and analyze in-process, without writing tag files."""
        from PyQIRange.core.extractors.protocol import analyze_plan_bundle
        from PyQIRange.core.runners.event_engine import simulate_run

        manager = self._require_config("chsh")
        plan = manager.config.plan()
        result = analyze_plan_bundle(simulate_run(plan), plan, manager.config.analysis)
        return self._report(self.output_dir, manager, plan, result)

    def sweep(self) -> ExitCode:
        """One simulate-and-analyze row per sweep distance."""
        from PyQIRange.core.builders.run_builder import RunLayout
        from PyQIRange.core.exporters.data_exporter import write_csv_data
        from PyQIRange.core.runners.sweep_runner import SWEEP_COLUMNS, run_sweep
        from PyQIRange.core.status.run_report import print_table

        manager = self._require_config("sweep")
        config = manager.config
        if config.sweep is None:
            raise ConfigError("sweep", "the sweep command needs a sweep section with distances")

        rows = run_sweep(config, config.sweep.distances, manager.workers, config.sweep.simulate)
        print_table("DISTANCE SWEEP", rows, ("distance_m", "predicted_rate", "simulated_rate",
                                             "s_probe", "ds_probe", "recovered_distance_m", "detected"))
        ok = write_csv_data(rows, RunLayout(self.output_dir).table("sweep"), "sweep", SWEEP_COLUMNS)
        return ExitCode.OK if ok else ExitCode.FAILURE

    # ------------------------------------------------------------------ reporting

    def _report(self, out_dir: Path, manager: ConfigManager, plan, result) -> ExitCode:
        from PyQIRange.core.builders.run_builder import RunLayout
        from PyQIRange.core.exporters.data_exporter import (
            CHSH_COLUMNS, HISTOGRAM_COLUMNS, chsh_rows, histogram_rows, write_csv_data, write_yaml_data)
        from PyQIRange.core.status.run_report import build_report, print_chsh_report, print_range_report

        layout = RunLayout(Path(out_dir))
        params = manager.config.analysis
        ok = write_csv_data(histogram_rows(result.probe_histogram), layout.table("histogram_probe_idler"),
                            "histogram", HISTOGRAM_COLUMNS)
        ok &= write_csv_data(histogram_rows(result.reference_histogram), layout.table("histogram_reference_idler"),
                             "histogram", HISTOGRAM_COLUMNS)
        print_range_report(result.range_estimate, params.min_significance)

        for label, chsh, counts in (("probe", result.probe_chsh, result.probe_counts),
                                    ("reference", result.reference_chsh, result.reference_counts)):
            if chsh is None:
                continue
            print_chsh_report(f"{label}-idler", chsh, counts)
            ok &= write_csv_data(chsh_rows(chsh, counts), layout.table(f"chsh_{label}"), "chsh", CHSH_COLUMNS)

        extra = {"config_hash": manager.config_hash(), "seed": int(plan.seed)}
        reflectivity = _reflectivity_report(plan, result)
        if reflectivity is not None:
            extra["reflectivity"] = reflectivity
        ok &= write_yaml_data(build_report(result, extra), layout.report, "report")

        if not ok:
            return ExitCode.FAILURE
        return ExitCode.OK if result.range_estimate is not None else ExitCode.NO_PEAK


def _reflectivity_report(plan, result) -> Optional[Dict[str, Any]]:
    """
    Reflectivity of the ranged object: dark-subtracted probe rate against the launch rate
    inferred from the reference singles, over the link at the recovered distance with every
    pointing stage offset by pointing_rms.
    """
    from PyQIRange.core.channel.link_budget import InvalidInputError, infer_reflectivity, static_pointing_offsets
    from PyQIRange.core.runners.event_engine import launched_rate_from_reference

    estimate = result.range_estimate
    if estimate is None or estimate.object_distance <= 0:
        return None
    probe, reference = plan.detectors.probe, plan.detectors.reference
    if reference.efficiency <= 0:
        return None
    probe_rate = max(0.0, result.singles_rates[int(Channel.PROBE)] - probe.dark_count_rate)
    reference_rate = max(0.0, result.singles_rates[int(Channel.REFERENCE)] - reference.dark_count_rate)
    launched = (launched_rate_from_reference(reference_rate, plan.bs_probe_fraction)
                * probe.efficiency / reference.efficiency)
    link = plan.link.with_distance(estimate.object_distance)
    offsets = static_pointing_offsets(link)
    try:
        inferred = infer_reflectivity(probe_rate, launched, link, offsets)
    except InvalidInputError as e:
        logging.warning(f"Reflectivity not inferred: {e}")
        return None
    return {
        "value": float(inferred.value),
        "raw_value": float(inferred.raw_value),
        "clamped": bool(inferred.clamped),
        "launched_rate_hz": float(launched),
        "received_rate_hz": float(probe_rate),
        "pointing_offsets_m": [float(o) for o in offsets],
    }
