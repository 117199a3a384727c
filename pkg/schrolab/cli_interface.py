from typing import Dict, List, Sequence

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from .__version__ import VERSION
from .utils import format_value

console = Console()

# Constants
WELCOME_MESSAGE = f"schrolab v{VERSION}\nBi-Hamiltonian laboratory for the linear and nonlinear Schrödinger equations"


class CLIInterface:
    def display_welcome(self):
        """Display welcome message"""
        console.print(
            Panel.fit(
                "[bold blue]" + WELCOME_MESSAGE + "[/bold blue]",
                border_style="blue",
            )
        )

    @classmethod
    def display_info(cls, message: str):
        """Display information message"""
        console.print(f"[bold blue]{escape(message)}[/bold blue]")

    @classmethod
    def display_error(cls, message: str):
        """Display error message"""
        console.print(f"[bold red]Error:[/bold red] {escape(message)}")

    @classmethod
    def display_success(cls, message: str):
        """Display success message"""
        console.print(f"[bold green]✓[/bold green] {escape(message)}")

    @classmethod
    def display_warning(cls, message: str):
        """Display warning message"""
        console.print(f"[bold yellow]⚠️[/bold yellow] {escape(message)}")

    def display_section(self, title: str):
        console.print(f"\n[cyan]━━━ {escape(title)} ━━━[/cyan]")

    def display_drift(self, drift: Dict[str, float]):
        """Display relative drift per monitored functional"""
        table = Table(show_header=True, header_style="bold magenta", padding=(0, 1), expand=False)
        table.add_column("Functional", style="cyan")
        table.add_column("Relative drift", justify="right")
        for name, value in drift.items():
            table.add_row(escape(name), format_value(value))
        console.print(table)

    def display_checks(self, checks: Sequence):
        """Display thresholded checks with their verdicts"""
        table = Table(show_header=True, header_style="bold magenta", padding=(0, 1), expand=False)
        table.add_column("Check", style="cyan")
        table.add_column("Value", justify="right")
        table.add_column("Bound", justify="right")
        table.add_column("Result", justify="center")
        for check in checks:
            status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(escape(check.name), format_value(check.value), f"{check.comparison} {format_value(check.threshold)}", status)
        console.print(table)

    def display_matrix(self, title: str, labels: List[str], matrix: List[List[float]]):
        """Display an involution matrix of relative bracket values"""
        table = Table(title=escape(title), show_header=True, header_style="bold magenta", padding=(0, 1), expand=False)
        table.add_column("")
        for label in labels:
            table.add_column(escape(label), justify="right")
        for label, row in zip(labels, matrix):
            table.add_row(escape(label), *(format_value(value) for value in row))
        console.print(table)

    def display_flows(self, operator: str, seed: str, flows: List[str], nonlocal_levels: Sequence[int] = ()):
        """Display generated hierarchy flows, one per line; levels that did not localize are marked nonlocal"""
        console.print(f"[bold]{escape(operator)}[/bold] hierarchy from [bold]{escape(seed)}[/bold]")
        for n, flow in enumerate(flows, 1):
            marker = "  [yellow](nonlocal)[/yellow]" if n in nonlocal_levels else ""
            console.print(f"  [cyan]{n}[/cyan]  {escape(flow)}{marker}")

    def display_wall_time(self, seconds: float):
        console.print(f"[dim]wall time {seconds:.2f} s[/dim]")

    def display_verdict(self, report):
        """Display the overall pass/fail line of a report"""
        if report.passed:
            self.display_success(f"{report.title}: all {len(report.checks)} checks passed")
        else:
            failed = ", ".join(check.name for check in report.failures)
            self.display_error(f"{report.title}: {len(report.failures)} of {len(report.checks)} checks failed ({failed})")
