from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Callable, Sequence

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.text import Text

from geodesic_js.cli.config import CliConfig
from geodesic_js.cli.render import event_style, render_event, results_table
from geodesic_js.geometry.core import GeometryError
from geodesic_js.harness.demos import demo_circle, demo_tripod
from geodesic_js.harness.experiments import ExperimentResult, ExperimentSpec, run_spd_bayes, run_spd_freq, run_table1
from geodesic_js.harness.output import write_csv, write_json, write_plots
from geodesic_js.harness.report import ExperimentError
from geodesic_js.harness.validate import SPACES, run_validation

console = Console()

EXIT_OK = 0
EXIT_FAILED_CHECKS = 1
EXIT_ERROR = 2

RUNNERS: dict[str, Callable[[ExperimentSpec], ExperimentResult]] = {
    "table1": run_table1,
    "spd-bayes": run_spd_bayes,
    "spd-freq": run_spd_freq,
    "demo-tripod": demo_tripod,
    "demo-circle": demo_circle,
    "validate": run_validation,
}

DESCRIPTIONS = {
    "table1": "Bayes risk ratios for two lazy-walk groups on the 3-regular tree.",
    "spd-bayes": "Bayes risk against n for log-Euclidean SPD groups.",
    "spd-freq": "Share of scale-matrix draws where James-Stein beats X, against n.",
    "demo-tripod": "Tower rule failing for Fréchet means on a tripod.",
    "demo-circle": "Shrinkage toward the antipode on the circle.",
    "validate": "Randomized property suites for every geodesic space.",
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = CliConfig(
            command=args.command,
            config=args.config,
            reps=args.reps,
            oracle_reps=args.oracle_reps,
            seed=args.seed,
            workers=args.workers,
            out=args.out,
            plots=args.plots,
            spaces=getattr(args, "space", None) or [],
            cases=getattr(args, "cases", None),
            verbosity=args.verbose,
        )
        spec = config.resolve()
        console.print(Panel.fit(DESCRIPTIONS[spec.experiment], title=spec.experiment, border_style="magenta"))
        result = RUNNERS[spec.experiment](spec)
    except (GeometryError, ExperimentError, ValidationError) as exc:
        console.print(Text(f"Error: {exc}", style="bold red"))
        return EXIT_ERROR

    _print_report(result)
    _write_outputs(result)
    if not result.report.passed:
        failed = len(result.report.failures())
        console.print(Text(f"{failed} check(s) failed.", style="bold red"))
        return EXIT_FAILED_CHECKS
    return EXIT_OK


def _print_report(result: ExperimentResult) -> None:
    console.print(Text(result.report.title, style="bold"))
    for event in result.report.events:
        console.print(Text(render_event(event), style=event_style(event)))
    if result.rows:
        console.print(results_table(result.spec.experiment, result.rows))
    console.print("")


def _write_outputs(result: ExperimentResult) -> None:
    if not result.rows:
        return
    spec = result.spec
    config = spec.model_dump(mode="json", exclude={"workers", "out"})
    written = [
        write_csv(spec.out / f"{spec.experiment}.csv", result.rows, config),
        write_json(spec.out / f"{spec.experiment}.json", result.rows, config),
    ]
    if spec.plots:
        written.extend(write_plots(spec.out / "plots", spec.experiment, result.rows))
    for path in written:
        console.print(Text(f"Wrote {path}", style="dim"))


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of experiment settings")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates")
    common.add_argument("--oracle-reps", type=int, help="Draws per conditional-moment oracle (at least 10000)")
    common.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    common.add_argument("--workers", type=int, help="Worker processes; results do not depend on it")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--plots", action="store_true", help="Also write SVG plots (needs matplotlib)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")

    parser = argparse.ArgumentParser(
        prog="geodesic-js", description="Geodesic James-Stein shrinkage experiments."
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, description in DESCRIPTIONS.items():
        sub = commands.add_parser(name, parents=[common], help=description, description=description)
        if name == "validate":
            sub.add_argument("--space", action="append", choices=SPACES, help="Restrict to a space (repeatable)")
            sub.add_argument("--cases", type=int, help="Random cases per suite")
    return parser.parse_args(argv)


if __name__ == "__main__":
    raise SystemExit(main())
