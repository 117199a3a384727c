#!/usr/bin/env python3
import sys
import time
from pathlib import Path
from typing import List, NamedTuple, Optional

from .cli_args import parse_args
from .cli_interface import CLIInterface
from .config import ExperimentConfig, parse_config
from .dynamics import run
from .hierarchy import HierarchyError, SymbolicOperator, generate_hierarchy, parse_flow, render
from .suite import CHECKS, RunReport, run_acceptance_suite
from .utils import read_golden, write_csv, write_json

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_ERROR = 2


def _load(path: str, seed: Optional[int]) -> ExperimentConfig:
    overrides = {"experiment": {"seed": str(seed)}} if seed is not None else None
    return parse_config(path, overrides)


def cmd_simulate(config: ExperimentConfig, out_dir: Path) -> RunReport:
    """Integrate the configured experiment; the CSV and JSON are written only after the run completes"""
    started = time.perf_counter()
    grid = config.build_grid()
    record = run(config.equation, config.initial_state(grid), config.dynamics_parameters(grid), config.integrator, config.monitored(grid))
    report = RunReport("simulate", config.as_dict(), drift=record.drift)
    report.wall_time = time.perf_counter() - started

    write_csv(out_dir / config.output.csv, record.times, record.series)
    write_json(out_dir / config.output.json, report.to_dict())
    return report


def cmd_check(kind: str, config: ExperimentConfig, out_dir: Optional[Path] = None) -> RunReport:
    if kind not in CHECKS:
        raise ValueError(f"unknown check {kind!r}; expected one of {', '.join(sorted(CHECKS))}")
    started = time.perf_counter()
    report = CHECKS[kind](config, config.seed)
    report.wall_time = time.perf_counter() - started
    if out_dir is not None:
        write_json(out_dir / f"check-{kind}.json", report.to_dict())
    return report


class HierarchyListing(NamedTuple):
    """Rendered flows, the 1-based levels that did not localize, and the golden comparison (True when none is given)"""

    flows: List[str]
    nonlocal_levels: List[int]
    matched: bool


def cmd_hierarchy(operator: str, seed: str, depth: int, golden: Optional[Path] = None) -> HierarchyListing:
    op = SymbolicOperator.from_name(operator)
    generated = generate_hierarchy(op, parse_flow(seed), depth)
    flows = [render(flow) for flow in generated]
    nonlocal_levels = [n for n, flow in enumerate(generated, 1) if not flow.is_local]
    matched = golden is None or read_golden(golden) == flows
    return HierarchyListing(flows, nonlocal_levels, matched)


def cmd_report(seed: int, out_dir: Path, on_criterion=None) -> RunReport:
    report = run_acceptance_suite(seed, on_criterion)
    write_json(out_dir / "report.json", report.to_dict())
    return report


class Laboratory:
    def __init__(self):
        self.cli = CLIInterface()

    def _show_report(self, report: RunReport) -> int:
        if report.drift:
            self.cli.display_section("Drift")
            self.cli.display_drift(report.drift)
        labels = report.involution.get("functionals", [])
        for name, matrix in report.involution.items():
            if name != "functionals":
                self.cli.display_matrix(f"Relative brackets under {name}", labels, matrix)
        if report.checks:
            self.cli.display_section("Checks")
            self.cli.display_checks(report.checks)
            self.cli.display_verdict(report)
        self.cli.display_wall_time(report.wall_time)
        return EXIT_OK if report.passed else EXIT_THRESHOLD

    def _simulate(self, args) -> int:
        config = _load(args.config, args.seed)
        self.cli.display_info(f"Simulating {config.equation.value} with {config.integrator.scheme.value}, dt = {config.integrator.dt}, {config.integrator.steps} steps")
        report = cmd_simulate(config, Path(args.out))
        self.cli.display_success(f"Wrote {Path(args.out) / config.output.csv} and {Path(args.out) / config.output.json}")
        return self._show_report(report)

    def _check(self, args) -> int:
        config = _load(args.config, args.seed)
        self.cli.display_info(f"Running the {args.kind} check with seed {config.seed}")
        return self._show_report(cmd_check(args.kind, config, Path(args.out)))

    def _hierarchy(self, args) -> int:
        flows, nonlocal_levels, matched = cmd_hierarchy(args.operator, args.seed, args.depth, Path(args.golden) if args.golden else None)
        self.cli.display_flows(args.operator, args.seed, flows, nonlocal_levels)
        if nonlocal_levels:
            self.cli.display_warning(f"Nonlocal flows at level {', '.join(map(str, nonlocal_levels))}: D^-1 did not localize")
        if not matched:
            self.cli.display_error(f"Flows differ from the golden listing {args.golden}")
            return EXIT_THRESHOLD
        if args.golden:
            self.cli.display_success(f"Flows match {args.golden}")
        return EXIT_OK

    def _report(self, args) -> int:
        seed = 0 if args.seed is None else args.seed
        self.cli.display_info(f"Running the reproduction suite with seed {seed}")
        report = cmd_report(seed, Path(args.out), lambda name, seconds: self.cli.display_success(f"{name} ({seconds:.2f} s)"))
        self.cli.display_success(f"Wrote {Path(args.out) / 'report.json'}")
        return self._show_report(report)

    def run(self, args) -> int:
        """Main execution flow; returns the exit status"""
        try:
            self.cli.display_welcome()
            handler = {"simulate": self._simulate, "check": self._check, "hierarchy": self._hierarchy, "report": self._report}[args.command]
            return handler(args)

        except KeyboardInterrupt:
            self.cli.display_warning("Operation cancelled by user.")
            return EXIT_ERROR
        except (ValueError, RuntimeError, OSError, HierarchyError) as e:
            self.cli.display_error(str(e))
            return EXIT_ERROR


def cli():
    try:
        args = parse_args()
        sys.exit(Laboratory().run(args))
    except Exception as e:
        # Other runtime errors
        CLIInterface.display_error(str(e))
        sys.exit(EXIT_ERROR)
