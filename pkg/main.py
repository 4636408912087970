import argparse
import logging
import os
import sys

from dotenv import load_dotenv
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from graph.analysis_graph import analysis_app
from models.recipes import FIGURE_ALIASES, METRICS, RECIPES, SCOPES
from models.scenario import HETERODYNE, IMDD

SEED_ENV = "FSO_LINK_LAB_SEED"
DETECTIONS = {"heterodyne": HETERODYNE, "imdd": IMDD}
RANDOMIZED = ("curve", "figure", "selfcheck", "calibrate")

console = Console(stderr=True)


def parse_grid(text: str):
    """'start:stop:step' in dB."""
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 0:60:5, got {text!r}")
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"grid {text!r} needs step > 0 and stop >= start")
    return [start, stop, step]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="FSO link lab: OGS -> HAP -> OIRS -> user link statistics\n\nExample usage:\n"
                    "  python main.py params --config configs/reference.conf\n"
                    "  python main.py curve op e2e --grid 0:60:5 --samples 100000 --seed 7\n"
                    "  python main.py figure af-vs-df --out results/af-vs-df\n"
                    "  python main.py figure fig5 --strict\n"
                    "  python main.py selfcheck",
        formatter_class=argparse.RawTextHelpFormatter
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='Scenario file (key = value); defaults to the reference scenario')
    common.add_argument('--seed', type=int, default=None, help=f'Random seed (default ${SEED_ENV} or 0)')
    common.add_argument('--samples', '--mc', dest='samples', type=int, default=0, help='Monte Carlo samples per point (0 = analytic only)')
    common.add_argument('--out', type=str, default=None, help='Output directory for the curve tables')
    common.add_argument('--format', choices=('csv', 'json'), default='csv', help='Table format')
    common.add_argument('--detection', choices=sorted(DETECTIONS), default=None, help='Detection on both hops (sets r1 and r2)')
    common.add_argument('--relay-gain', dest='relay_gain', type=float, default=None, help='Fixed relay gain constant C')
    common.add_argument('--nk', dest='n_k', type=int, default=None, help='GML series truncation N_k')
    common.add_argument('--grid', type=parse_grid, default=[0.0, 60.0, 5.0], help='Average SNR grid start:stop:step in dB')
    common.add_argument('--workers', type=int, default=None, help='Monte Carlo worker threads')
    common.add_argument('--verbose', action='store_true', help='Debug logging')
    common.add_argument('--quiet', action='store_true', help='Warnings only, no progress bars')

    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('params', parents=[common], help='Print the assembled link parameters')

    curve = commands.add_parser('curve', parents=[common], help='Sweep one metric over the SNR grid')
    curve.add_argument('metric', choices=METRICS)
    curve.add_argument('scope', choices=SCOPES)
    curve.add_argument('--modulation', type=str, default=None, help='OOK, M-QAM or M-PSK (ber metric)')
    curve.add_argument('--s', type=float, default=1.0, help='Moment order (moment metric)')
    curve.add_argument('--asymptotic', action=argparse.BooleanOptionalAction, default=True,
                       help='Add the high-SNR expansion column (--no-asymptotic skips it)')

    figure = commands.add_parser('figure', parents=[common], help='Emit the data behind a named figure')
    figure.add_argument('figure', help=f'One of: {", ".join(list(RECIPES) + list(FIGURE_ALIASES))}')
    figure.add_argument('--strict', action='store_true',
                        help='Exit 4 when a value misses its published reference tolerance')

    commands.add_parser('selfcheck', parents=[common], help='Run the identity and cross-check suite')
    commands.add_parser('calibrate', parents=[common], help='Fit the relay gain C to a simulated outage run')
    return parser


def build_state(args: argparse.Namespace) -> dict:
    """Initial pipeline state for the analysis graph."""
    seed = args.seed if args.seed is not None else int(os.getenv(SEED_ENV, "0"))
    overrides = {'relay_gain': args.relay_gain, 'n_k': args.n_k}
    if args.detection:
        overrides['r1'] = overrides['r2'] = DETECTIONS[args.detection]
    out = args.out
    if args.command == 'figure' and not out:
        out = os.path.join('results', args.figure)
    request = {}
    if args.command == 'curve':
        request = {'metric': args.metric, 'scope': args.scope, 'modulation': args.modulation, 's': args.s}
    elif args.command == 'figure':
        request = {'figure': args.figure}
    return {
        'command': args.command,
        'config_path': args.config,
        'overrides': {k: v for k, v in overrides.items() if v is not None},
        'options': {
            'samples': args.samples,
            'seed': seed,
            'workers': args.workers,
            'progress': not args.quiet,
            'grid': args.grid,
            'asymptotic': getattr(args, 'asymptotic', True),
            'format': args.format,
            'out': out,
            'strict': getattr(args, 'strict', False),
        },
        'request': request,
    }


def render_report(state: dict) -> None:
    report = state.get('report') or {}
    command = state.get('command')
    header = f"command: {command}"
    if command in RANDOMIZED:
        header += f"   seed: {state['options']['seed']}   samples: {state['options']['samples']}"
    console.print(Panel(header, title="FSO link lab", border_style="cyan"))

    if command == 'params' and report.get('parameters'):
        table = Table(title="Link parameters", box=box.SIMPLE)
        table.add_column("Hop", style="cyan")
        table.add_column("Parameter")
        table.add_column("Value", justify="right")
        for row in report['parameters']:
            table.add_row(row['group'], row['name'], format(row['value'], '.6g'))
        console.print(table)
        diversity = report.get('diversity') or {}
        if diversity:
            console.print(f"Diversity order: {diversity['order']:.4g} (limited by {diversity['limited_by']})")

    if report.get('selfcheck'):
        table = Table(title="Self checks", box=box.SIMPLE)
        table.add_column("Check")
        table.add_column("Result")
        table.add_column("Detail")
        for row in report['selfcheck']:
            table.add_row(row['name'], "[green]PASS[/green]" if row['passed'] else "[red]FAIL[/red]", row['detail'])
        console.print(table)
        console.print(f"Degenerate-exponent perturbations: {len(report.get('perturbations') or [])}")

    if report.get('calibration'):
        cal = report['calibration']
        console.print(f"Calibrated relay gain C = {cal['relay_gain']:.6g} (mean squared log10 error {cal['mse_log10']:.3e})")

    acceptance = report.get('acceptance') or {}
    if acceptance.get('rows'):
        table = Table(title="Published reference values", box=box.SIMPLE)
        table.add_column("Table")
        table.add_column("SNR [dB]", justify="right")
        table.add_column("Value", justify="right")
        table.add_column("Reference", justify="right")
        table.add_column("Tolerance")
        table.add_column("Result")
        for row in acceptance['rows']:
            value = "-" if row['value'] is None else format(row['value'], '.4g')
            status = "[green]ok[/green]" if row['status'] == 'ok' else f"[red]{row['status']}[/red]"
            table.add_row(row['table'], format(row['x_db'], 'g'), value, row['reference'], row['tolerance'], status)
        console.print(table)
        console.print(f"Reference values out of tolerance: {acceptance['missed']} of {acceptance['checked']}")

    if report.get('tables'):
        console.print(f"Tables: {len(report['tables'])}, DISAGREE rows: {report.get('disagreements', 0)}")
    for path in state.get('written') or []:
        console.print(f"  wrote {path}")

    error = state.get('error')
    if error:
        console.print(f"[red]{error['kind']}: {error['message']}[/red]")


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    state = build_state(args)
    logging.info(f"[Main] Starting {args.command} pipeline (seed {state['options']['seed']})")
    result = analysis_app.invoke(state)

    for text in (result.get('rendered') or {}).values():
        sys.stdout.write(text)
    render_report(result)
    return int(result.get('exit_code', 1))


if __name__ == '__main__':
    sys.exit(main())
