"""
Console runner shared by the test modules' `run_test_suite()` entry points.

pytest collects the same test functions; this runner only exists so a module
can be executed directly and print a rich summary table.
"""

import inspect
import logging
import time
from typing import Callable, Dict, Iterable, Optional, Tuple

from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

console = Console()


def setup_logging(level: int = logging.WARNING) -> logging.Logger:
    """Configure logging for a directly executed test module"""
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    return logging.getLogger('fso_link_lab.tests')


def collect_tests(namespace: Dict[str, object]) -> Iterable[Tuple[str, Callable]]:
    """test_* functions of a module namespace that take no arguments, in definition order."""
    for name, obj in namespace.items():
        if name.startswith("test_") and inspect.isfunction(obj) and not inspect.signature(obj).parameters:
            yield name, obj


def run_suite(title: str, namespace: Dict[str, object], pattern: Optional[str] = None) -> bool:
    load_dotenv()
    setup_logging()
    console.print(Panel.fit(f"[bold cyan]{title}[/bold cyan]"))

    table = Table(title=f"{title} results")
    table.add_column("Test", style="cyan")
    table.add_column("Status")
    table.add_column("Time (s)", justify="right")
    table.add_column("Detail")

    passed = failed = 0
    for name, test in collect_tests(namespace):
        if pattern and pattern not in name:
            continue
        start = time.time()
        try:
            test()
            status, detail = "[green]PASS[/green]", ""
            passed += 1
        except Exception as e:
            status, detail = "[red]FAIL[/red]", f"{type(e).__name__}: {e}"[:120]
            failed += 1
        table.add_row(name, status, f"{time.time() - start:.2f}", detail)

    console.print(table)
    colour = "green" if failed == 0 else "red"
    console.print(f"\n[bold {colour}]{passed} passed, {failed} failed[/bold {colour}]")
    return failed == 0
