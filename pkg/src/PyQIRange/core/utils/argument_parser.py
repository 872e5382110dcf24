"""
Argument Parser Module

Parses command-line arguments for PyQIRange.
"""

import argparse
from typing import Optional, Sequence

COMMANDS = ("linkbudget", "simulate", "analyze", "chsh", "range", "sweep")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=str, default=None,
                        help="Path to the experiment configuration YAML file\n"
                             "(optional for analyze/range with a run directory: the manifest's config is used)")
    common.add_argument("--seed", type=int, default=None, help="Override the root seed")
    common.add_argument("--out", type=str, default=None, help="Override the output directory")
    common.add_argument("--workers", type=_positive_int, default=None, help="Worker processes for sweeps")
    common.add_argument("--bin-width", type=str, default=None,
                        help="Override the histogram bin width, with unit (e.g. '1 ns')")
    common.add_argument("--k-sigma", type=float, default=None,
                        help="Override the confidence factor of the detection verdict")
    common.add_argument("-l", "--log", type=str, default="info",
                        choices=["debug", "info", "warning", "error", "critical"],
                        help="Logging level")

    parser = argparse.ArgumentParser(
        prog="pyqirange",
        description="PyQIRange: Quantum illumination and ranging with polarization-entangled photons",
        formatter_class=argparse.RawTextHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    sub.add_parser("linkbudget", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                   help="Predicted transmission and received rate per distance")
    simulate = sub.add_parser("simulate", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                              help="Simulate every analyzer setting and write QTT1 tag files")
    simulate.add_argument("--csv-tags", action="store_true", help="Also write each tag file as CSV")
    analyze = sub.add_parser("analyze", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                             help="Histograms, range and CHSH of a run directory")
    analyze.add_argument("run_dir", nargs="?", default=None,
                         help="Run directory written by simulate (defaults to the output directory)")
    sub.add_parser("chsh", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                   help="Simulate and measure S on both channel pairs in-process")
    ranging = sub.add_parser("range", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                             help="Object distance from the probe-idler coincidence peak")
    ranging.add_argument("run_dir", nargs="?", default=None,
                         help="Run directory to analyze; simulates in-process when omitted")
    sub.add_parser("sweep", parents=[common], formatter_class=argparse.RawTextHelpFormatter,
                   help="Link budget, simulation and analysis at every sweep distance")
    return parser


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)
