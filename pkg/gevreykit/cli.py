import sys
from fractions import Fraction
from typing import List, Optional, Tuple

import click

from .analysis import analyze as run_analysis
from .analysis import compute_indices
from .equation import EquationError, load_equation_file, normalize
from .estimator import estimate as run_estimate
from .estimator import membership_grid, membership_test
from .export import ReportExporter
from .fixtures import run_verification, split_failures
from .series import SeriesError, format_rat, read_biseries_csv
from .solver import ResonanceError, check_residual, solve_formal
from .validation import InvariantBreach
from .visualization import TerminalVisualizer, render_polygon_svg

EXIT_CONDITION = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

BANNER = r"""
┏┓┏┓┓┏┳┓┏┓┓┏┓┏┓┳┏┳┓
┃┓┣ ┃┃┣┫┣ ┗┫┃┫ ┃ ┃
┗┛┗┛┗┛┛┗┗┛┗┛┛┗┛┻ ┻
"""

threads_option = click.option('--threads', type=int, default=0, envvar='GEVREY_THREADS', show_default=True,
                              help='Workers for grid checks (0 = one per CPU, env GEVREY_THREADS)')
banner_option = click.option('--no-banner', is_flag=True, help='Suppress ASCII banner display')
verbose_option = click.option('--verbose', '-v', is_flag=True, help='Show detailed information')


def _banner(no_banner: bool, subtitle: str):
    if no_banner:
        return
    click.echo(BANNER)
    click.echo("Formal Gevrey Index Tool")
    click.echo(subtitle)
    click.echo("=" * 50)


def _exit_code(error: Exception) -> int:
    if isinstance(error, InvariantBreach):
        return EXIT_INTERNAL
    if isinstance(error, ResonanceError):
        return EXIT_CONDITION
    if isinstance(error, (EquationError, SeriesError, click.BadParameter, ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_INTERNAL


def _fail(error: Exception):
    click.echo(f"Error: {str(error)}", err=True)
    sys.exit(_exit_code(error))


def _parse_axis(text: str, name: str) -> List[Fraction]:
    """'S±D' (or 'S+-D') to [S - D, S, S + D]; a bare 'S' to [S]."""
    text = text.strip().replace("+-", "±")
    try:
        if "±" in text:
            center, delta = (Fraction(part.strip()) for part in text.split("±", 1))
            if delta < 0:
                raise ValueError
            return [center - delta, center, center + delta] if delta else [center]
        return [Fraction(text)]
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"{name} must look like S±D, got '{text}'", param_hint='--grid')


def parse_grid(text: str) -> Tuple[List[Fraction], List[Fraction]]:
    parts = text.split(",")
    if len(parts) != 2:
        raise click.BadParameter(f"expected 'S±D,SIG±D', got '{text}'", param_hint='--grid')
    return _parse_axis(parts[0], "s"), _parse_axis(parts[1], "sigma")


def _load_solution(spec_path: str, kt: int, lx: int, from_csv: Optional[str], verbose: bool):
    spec = load_equation_file(spec_path)
    norm = normalize(spec)
    if from_csv:
        if verbose:
            click.echo(f"Reading coefficients from {from_csv}")
        return spec, norm, read_biseries_csv(from_csv)
    if verbose:
        click.echo(f"Solving {spec.name} through t^{kt}, x^{lx}...")
    return spec, norm, solve_formal(norm, kt, lx)


@click.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--grid-n', type=int, default=40, show_default=True,
              help='Grid bound K_N for the (N) check')
@click.option('--json', 'json_path', type=str, help='Write the JSON report to this path')
@click.option('--txt', 'txt_path', type=str, help='Write a text summary to this path')
@click.option('--svg', 'svg_path', type=str, help='Write the Newton polygon as SVG')
@click.option('--plot', '-p', is_flag=True, help='Show the Newton polygon in the terminal')
@threads_option
@banner_option
@verbose_option
def analyze(spec_file: str, grid_n: int, json_path: Optional[str], txt_path: Optional[str],
            svg_path: Optional[str], plot: bool, threads: int, no_banner: bool, verbose: bool):
    """
    Newton polygon, conditions (N), (GP), (R) and the indices sigma0, s0, s1.
    """
    try:
        _banner(no_banner, "Newton polygon and index analysis")
        spec = load_equation_file(spec_file)
        if verbose:
            click.echo(f"Analyzing {spec.name} (m = {spec.m}, trunc_x = {spec.trunc_x})...")
        report = run_analysis(spec, grid_n, threads)
        visualizer = TerminalVisualizer()

        if plot or verbose:
            click.echo(visualizer.create_polygon_plot(
                report.polygon,
                [p.as_tuple() for p in report.norm.lambda0],
                [p.as_tuple() for p in report.norm.lambda1]))
            click.echo()
        click.echo(visualizer.create_index_summary(report))

        for issue in report.diagnostics.issues:
            if verbose or issue['level'] != "info":
                click.echo(f"{issue['level'].capitalize()}: [{issue['category']}] {issue['message']}", err=True)

        exporter = ReportExporter()
        if json_path:
            click.echo(f"Report exported to: {exporter.export_analysis(report, json_path, 'json')}")
        if txt_path:
            click.echo(f"Summary exported to: {exporter.export_analysis(report, txt_path, 'txt')}")
        if svg_path:
            written = render_polygon_svg(report, svg_path)
            if written:
                click.echo(f"Polygon plot saved to: {written}")
            else:
                click.echo("Warning: matplotlib is not installed, SVG not written", err=True)

        if report.conditions.failed:
            sys.exit(EXIT_CONDITION)
    except Exception as e:
        _fail(e)


@click.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--kt', type=int, default=8, show_default=True, help='Last t-degree K_t')
@click.option('--lx', type=int, default=40, show_default=True, help='Last x-degree L_x')
@click.option('--out', '-o', type=str, help='Write coefficients as CSV (k,l,numerator,denominator)')
@click.option('--residual-check', is_flag=True, help='Substitute the solution back and require zero residual')
@click.option('--from-csv', type=click.Path(exists=True, dir_okay=False),
              help='Re-ingest a coefficient CSV instead of solving')
@banner_option
@verbose_option
def solve(spec_file: str, kt: int, lx: int, out: Optional[str], residual_check: bool,
          from_csv: Optional[str], no_banner: bool, verbose: bool):
    """
    Exact formal solution u(t, x) with u(0, x) = 0.
    """
    try:
        _banner(no_banner, "Exact formal solution")
        spec, norm, u = _load_solution(spec_file, kt, lx, from_csv, verbose)

        click.echo("\nSOLUTION")
        click.echo("=" * 50)
        click.echo(f"Equation: {spec.name}")
        click.echo(f"Rows: t^0 .. t^{u.trunc_t}, trusted through x^{min(r.trunc for r in u.rows)}")
        click.echo(f"Nonzero coefficients: {len(u.nonzero())}")
        if verbose and u.trunc_t >= 1:
            head = ", ".join(format_rat(v) for v in u.row(1).coeffs[:8])
            click.echo(f"u_1: {head}{', ...' if u.row(1).trunc >= 8 else ''}")

        if out:
            click.echo(f"Coefficients exported to: {ReportExporter().export_series(u, out)}")
        if residual_check:
            try:
                check_residual(norm, u, spec)
            except InvariantBreach as e:
                if not from_csv:
                    raise
                raise SeriesError(f"{from_csv} does not solve {spec.name}: {e}") from None
            click.echo("Residual: zero on the trusted region")
    except Exception as e:
        _fail(e)


def _print_fit(label: str, component, predicted: Optional[Fraction]):
    if component.value is None:
        click.echo(f"{label}: not enough data")
        return
    line = f"{label}: {component.value:.3f} ± {component.stderr:.3f}"
    if predicted is not None:
        line += f"   (predicted {format_rat(predicted)})"
    click.echo(line)
    for flag in component.flags:
        click.echo(f"  note: {flag}")


@click.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--kt', type=int, default=8, show_default=True, help='Last t-degree K_t')
@click.option('--lx', type=int, default=40, show_default=True, help='Last x-degree L_x')
@click.option('--s', 's_value', type=str, help='Test membership in G(s, sigma) at this s')
@click.option('--sigma', 'sigma_value', type=str, help='Test membership in G(s, sigma) at this sigma')
@click.option('--grid', type=str, help="Verdict grid 'S±D,SIG±D'")
@click.option('--rho', type=float, default=0.5, show_default=True, help='Root-test radius')
@click.option('--out', '-o', type=str, help='Write the verdict table as CSV')
@click.option('--from-csv', type=click.Path(exists=True, dir_okay=False),
              help='Read coefficients from CSV instead of solving')
@banner_option
@verbose_option
def estimate(spec_file: str, kt: int, lx: int, s_value: Optional[str], sigma_value: Optional[str],
             grid: Optional[str], rho: float, out: Optional[str], from_csv: Optional[str],
             no_banner: bool, verbose: bool):
    """
    Empirical Gevrey orders of the computed solution and membership verdicts.
    """
    try:
        _banner(no_banner, "Empirical Gevrey order")
        if rho <= 0:
            raise click.BadParameter(f"must be positive, got {rho}", param_hint='--rho')
        spec, norm, u = _load_solution(spec_file, kt, lx, from_csv, verbose)
        indices = compute_indices(norm)
        fit = run_estimate(u, rho)

        click.echo("\nESTIMATED ORDERS")
        click.echo("=" * 50)
        _print_fit("sigma_hat", fit.sigma, indices.sigma0)
        _print_fit("s_hat    ", fit.s, indices.s0)

        exporter = ReportExporter()
        if s_value is not None or sigma_value is not None:
            s = Fraction(s_value) if s_value is not None else indices.s0
            sigma = Fraction(sigma_value) if sigma_value is not None else indices.sigma0
            result = membership_test(u, s, sigma, rho)
            click.echo(f"\nG({format_rat(s)}, {format_rat(sigma)}): {result.verdict.value} "
                       f"(root estimate {result.root_estimate:.3g})")
        if grid:
            s_values, sigma_values = parse_grid(grid)
            table = membership_grid(u, s_values, sigma_values, rho)
            click.echo("\nMEMBERSHIP GRID")
            click.echo("=" * 50)
            click.echo(table.to_string(index=False))
            if out:
                click.echo(f"Verdict table exported to: {exporter.export_table(table, out)}")
        elif out:
            click.echo("Warning: --out needs --grid, nothing written", err=True)
    except Exception as e:
        _fail(e)


@click.command()
@click.option('--kt', type=int, default=8, show_default=True, help='Last t-degree K_t')
@click.option('--lx', type=int, default=40, show_default=True, help='Last x-degree L_x')
@click.option('--grid-n', type=int, default=40, show_default=True, help='Grid bound K_N for the (N) check')
@click.option('--grid', type=int, default=200, show_default=True,
              help='k, l bound for the polygon inequality checks')
@click.option('--out', '-o', type=str, help='Write the pass/fail table as CSV')
@threads_option
@banner_option
@verbose_option
def verify(kt: int, lx: int, grid_n: int, grid: int, out: Optional[str], threads: int,
           no_banner: bool, verbose: bool):
    """
    Run the built-in fixtures and print a pass/fail table with provenance tags.
    """
    try:
        _banner(no_banner, "Fixture verification")
        table = run_verification(K_t=kt, L_x=lx, grid_n=grid_n, grid=grid, threads=threads)
        shown = table if verbose else table[["fixture", "check", "provenance", "passed"]]
        click.echo(shown.to_string(index=False))
        failed, advisory = split_failures(table)
        click.echo("=" * 50)
        click.echo(f"{len(table) - len(failed) - len(advisory)}/{len(table)} checks passed")
        if out:
            click.echo(f"Table exported to: {ReportExporter().export_table(table, out)}")
        for _, row in advisory.iterrows():
            click.echo(f"WARNING {row['fixture']} {row['check']}: heuristic check did not pass "
                       f"(got {row['actual']})", err=True)
        if len(failed):
            for _, row in failed.iterrows():
                click.echo(f"FAILED {row['fixture']} {row['check']}: expected {row['expected']}, "
                           f"got {row['actual']}", err=True)
            sys.exit(EXIT_INTERNAL)
    except Exception as e:
        _fail(e)


@click.command()
@click.argument('spec_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--svg', 'svg_path', type=str, help='Write the Newton polygon as SVG')
@banner_option
def plot(spec_file: str, svg_path: Optional[str], no_banner: bool):
    """
    Newton polygon with the points of Lambda_0 and Lambda_1.
    """
    try:
        _banner(no_banner, "Newton polygon")
        spec = load_equation_file(spec_file)
        report = run_analysis(spec, grid_n=1)
        click.echo(TerminalVisualizer().create_polygon_plot(
            report.polygon,
            [p.as_tuple() for p in report.norm.lambda0],
            [p.as_tuple() for p in report.norm.lambda1]))
        if svg_path:
            written = render_polygon_svg(report, svg_path)
            if written:
                click.echo(f"Polygon plot saved to: {written}")
            else:
                click.echo("Warning: matplotlib is not installed, SVG not written", err=True)
    except Exception as e:
        _fail(e)
