"""
Main CLI entry point with one subcommand per task.
"""
import click

from .cli import analyze, estimate, plot, solve, verify


@click.group()
@click.version_option(version='0.1.0')
def cli():
    """
    GEVREYKIT - Formal Gevrey Index Tool

    Newton polygon analysis and exact formal solutions of nonlinear
    totally characteristic PDEs.

    Commands:
      analyze    Polygon, conditions (N)/(GP)/(R) and indices of an equation file
      solve      Exact formal solution coefficients
      estimate   Empirical Gevrey orders and membership verdicts
      verify     Run the built-in fixtures
      plot       Newton polygon in the terminal or as SVG
    """
    pass


cli.add_command(analyze, name='analyze')
cli.add_command(solve, name='solve')
cli.add_command(estimate, name='estimate')
cli.add_command(verify, name='verify')
cli.add_command(plot, name='plot')


if __name__ == '__main__':
    cli()
