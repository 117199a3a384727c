import argparse
import sys
from typing import List, Optional

from .__version__ import VERSION
from .cli_interface import WELCOME_MESSAGE
from .suite import CHECKS

_OPTIONS = {"-h", "--help", "-v", "--version", "--config", "--seed", "--out", "--golden"}


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be at least 0, got {value}")
    return value


def _protect_seeds(argv: List[str]) -> List[str]:
    """Keep hierarchy seeds such as ``-iψ`` positional; argparse treats tokens containing a space as positional"""
    if "hierarchy" not in argv:
        return argv
    start = argv.index("hierarchy") + 1
    protected = list(argv)
    for i in range(start, len(protected)):
        token = protected[i]
        if token.startswith("-") and token.split("=", 1)[0] not in _OPTIONS and protected[i - 1] not in ("--golden", "--out", "--config", "--seed"):
            protected[i] = " " + token
    return protected


def parse_args(args: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments for the laboratory."""
    parser = argparse.ArgumentParser(
        prog="schrolab",
        description="=" * 58 + "\n" + WELCOME_MESSAGE + "\n" + "=" * 58,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--version", action="version", version=VERSION)

    # Shared flags
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=non_negative_int, metavar="N", help="Random seed (overrides [experiment] seed)")
    common.add_argument("--out", default=".", metavar="DIR", help="Output directory (default: current directory)")

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    simulate = commands.add_parser("simulate", parents=[common], help="Integrate an experiment and write CSV and JSON")
    simulate.add_argument("--config", required=True, metavar="PATH", help="Experiment file")

    check = commands.add_parser("check", parents=[common], help="Run one numerical check over seeded states")
    check.add_argument("kind", choices=sorted(CHECKS), help="Which check to run")
    check.add_argument("--config", required=True, metavar="PATH", help="Experiment file")

    hierarchy = commands.add_parser("hierarchy", help="Generate flows of a symbolic hierarchy")
    hierarchy.add_argument("operator", help="Operator name: T, TG, TK or TN")
    hierarchy.add_argument("seed", help="Seed flow, e.g. -iψ, psi_x or 'I*(psi_xx + psi^2*conj(psi))'")
    hierarchy.add_argument("depth", type=positive_int, help="Number of flows to generate (at least 1)")
    hierarchy.add_argument("--golden", metavar="PATH", help="Compare the listing with a text file, one flow per line")

    commands.add_parser("report", parents=[common], help="Run the full reproduction suite and write report.json")

    # Parse args
    namespace = parser.parse_args(_protect_seeds(list(sys.argv[1:] if args is None else args)))
    if namespace.command == "hierarchy":
        namespace.seed = namespace.seed.strip()

    return namespace
