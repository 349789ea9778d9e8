"""
sympb CLI - Main entry point.
Batch front end for symplectic billiard spectra and isospectral operators.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import click
from pydantic import BaseModel, Field, ValidationError, model_validator
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from src import __version__
from src.config.settings import Settings, reload_settings
from src.core.billiard_dynamics import trace_rows
from src.core.curve_geometry import ConvexDomainSpec, curve_rows
from src.core.deformation_lab import DeformationFamily
from src.core.engine import RigidityEngine
from src.core.errors import (
    ConsistencyError,
    DomainSpecError,
    NumericalError,
    SympbError,
)
from src.core.export import write_csv, write_json
from src.core.fourier_maps import EvenFourierMap
from src.core.orbit_solver import orbit_rows

EXIT_OK = 0
EXIT_ACCEPTANCE = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

OPERATOR_COMMANDS = {"operator", "verify"}

console = Console(stderr=True)


def print_error(message: str):
    """Print an error message."""
    console.print(f"[bold red]Error:[/bold red] {message}")


def print_success(message: str):
    """Print a success message."""
    console.print(f"[bold green]✓[/bold green] {message}")


def setup_logging(level: str):
    """Route module loggers through rich on stderr."""
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=False, show_path=False)],
        force=True,
    )


class RunConfig(BaseModel):
    """Validated options of one subcommand."""
    command: str
    spec: Optional[Path] = None
    q_min: int = Field(3, ge=2)
    q_max: int = Field(32, ge=2)
    gamma: Optional[float] = None
    grid: Optional[int] = Field(None, ge=16)
    out: Optional[Path] = None
    format: str = Field("csv", pattern="^(csv|json)$")

    @model_validator(mode="after")
    def _check(self):
        if self.q_max < self.q_min:
            raise ValueError(f"q_max ({self.q_max}) must be at least q_min ({self.q_min})")
        if self.command in OPERATOR_COMMANDS and self.gamma is not None and not 3.0 < self.gamma < 4.0:
            raise ValueError(f"gamma must lie in (3, 4), got {self.gamma}")
        return self

    def domain_spec(self) -> ConvexDomainSpec:
        """Spec from file (unit circle by default) with the grid override applied."""
        spec = ConvexDomainSpec.from_file(self.spec) if self.spec else ConvexDomainSpec()
        if self.grid is not None:
            spec = spec.model_copy(update={"grid_size": self.grid})
        return spec


def _settings_for(ctx: click.Context, config: RunConfig) -> Settings:
    settings: Settings = ctx.obj["settings"]
    updates = {}
    if config.grid is not None:
        updates["geometry"] = settings.geometry.model_copy(update={"grid_size": config.grid})
    if config.gamma is not None:
        updates["operator"] = settings.operator.model_copy(update={"gamma": config.gamma})
    return settings.model_copy(update=updates) if updates else settings


def _engine(ctx: click.Context, config: RunConfig) -> RigidityEngine:
    return RigidityEngine(_settings_for(ctx, config), ctx.obj["threads"])


def _run(ctx: click.Context, action):
    """Run a command body and map failures to the exit-code contract."""
    try:
        code = action()
    except ValidationError as e:
        print_error(f"invalid input:\n{e}")
        code = EXIT_INVALID
    except DomainSpecError as e:
        print_error(str(e))
        code = EXIT_INVALID
    except (NumericalError, ConsistencyError) as e:
        print_error(str(e))
        code = EXIT_NUMERICAL
    except SympbError as e:
        print_error(str(e))
        code = EXIT_NUMERICAL
    ctx.exit(code or EXIT_OK)


def _summary(title: str, values: Dict[str, object]):
    table = Table(show_header=False, box=None)
    for key, value in values.items():
        table.add_row(f"[bold]{key}[/bold]", f"{value}")
    console.print(Panel(table, title=f"[bold]{title}[/bold]", border_style="cyan"))


def _parse_modes(pairs: Tuple[str, ...]) -> Dict[int, float]:
    modes = {}
    for pair in pairs:
        try:
            p, coefficient = pair.split("=", 1)
            modes[int(p)] = float(coefficient)
        except ValueError as e:
            raise DomainSpecError(f"mode must look like p=coef, got {pair!r}") from e
    return modes


def common_options(func):
    """Flags shared by the domain-driven subcommands."""
    options = [
        click.option("--spec", "spec", type=click.Path(path_type=Path), help="Domain spec JSON"),
        click.option("--q-min", "q_min", type=int, default=3, show_default=True),
        click.option("--q-max", "q_max", type=int, default=32, show_default=True),
        click.option("--gamma", type=float, help="Regularity exponent in (3, 4)"),
        click.option("--grid", type=int, help="Affine arclength grid size"),
        click.option("--out", type=click.Path(path_type=Path), help="Output path (stdout when absent)"),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(command: str, **kwargs) -> RunConfig:
    kwargs["format"] = kwargs.pop("fmt")
    return RunConfig(command=command, **kwargs)


@click.group(invoke_without_command=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), help="Path to config.yaml")
@click.option("--threads", type=int, help="Worker cap (overrides SYMPB_THREADS)")
@click.option("--verbose", is_flag=True, help="Debug logging")
@click.option("--version", "-v", is_flag=True, help="Show version")
@click.pass_context
def cli(ctx, config_path, threads, verbose, version):
    """
    sympb - symplectic billiards, area spectra and isospectral operators.
    """
    if version:
        console.print(f"sympb version {__version__}")
        ctx.exit(EXIT_OK)
    settings = reload_settings(config_path)
    setup_logging("DEBUG" if verbose else settings.get_log_level())
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings
    ctx.obj["threads"] = threads
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


@cli.command()
@common_options
@click.pass_context
def domain(ctx, **kwargs):
    """Build a domain, report its affine invariants and write the curve table."""
    def _domain():
        config = _config("domain", **kwargs)
        report = _engine(ctx, config).domain(config.domain_spec())
        _summary("Domain", {
            "L": f"{report.affine_perimeter:.15g}",
            "k range": f"[{report.curvature_range[0]:.12g}, {report.curvature_range[1]:.12g}]",
            "deviation": f"{report.deviation:.3g}",
            "conic": report.conic.value,
            "frame": f"{report.residuals.unimodularity:.2e} / {report.residuals.structure:.2e}",
        })
        if config.format == "json":
            write_json(report.to_report(), config.out)
        else:
            write_csv(("t", "x", "y", "rho", "k"), curve_rows(report.curve), config.out)
    _run(ctx, _domain)


@cli.command()
@common_options
@click.option("--trace", "trace_steps", type=int, help="Iterate the billiard map this many steps instead")
@click.option("--start", type=float, default=0.0, show_default=True, help="Trace start parameter t0")
@click.option("--gap", type=float, default=0.1, show_default=True, help="Trace start gap t1 - t0")
@click.pass_context
def orbit(ctx, trace_steps, start, gap, **kwargs):
    """Maximal symmetric orbits for q in [q-min, q-max], or a billiard trace."""
    def _orbit():
        config = _config("orbit", **kwargs)
        engine = _engine(ctx, config)
        spec = config.domain_spec()
        if trace_steps is not None:
            if trace_steps < 1:
                raise DomainSpecError(f"trace needs at least one step, got {trace_steps}")
            trace = engine.trace(spec, start, gap, trace_steps)
            rows = trace_rows(engine.curve(spec), trace)
            if config.format == "json":
                write_json({"trace": [
                    {"step": i, "t": t, "x": x, "y": y, "eps": eps} for i, t, x, y, eps in rows
                ]}, config.out)
            else:
                write_csv(("step", "t", "x", "y", "eps"), rows, config.out)
            print_success(f"{trace_steps} bounces from ({start:.6g}, {start + gap:.6g})")
            return
        orbits = engine.orbits(spec, range(config.q_min, config.q_max + 1))
        if config.format == "json":
            write_json({"orbits": [
                {"q": o.q, "t": o.params, "action": o.action, "residual": o.residual,
                 "spacing_constant": o.spacing_constant, "method": o.method}
                for o in orbits
            ]}, config.out)
        else:
            curve = engine.curve(spec)
            rows = (row for o in orbits for row in orbit_rows(curve, o))
            write_csv(("q", "j", "t", "x", "y", "eps"), rows, config.out)
        print_success(f"{len(orbits)} orbits, worst residual {max(o.residual for o in orbits):.2e}")
    _run(ctx, _orbit)


@cli.command()
@common_options
@click.option("--fit/--no-fit", "fit_enabled", default=True, show_default=True,
              help="Fit the expansion A_q ~ c0 + c1/q^2 + c2/q^4")
@click.option("--fit-from", type=int, help="Fit over [fit-from, q-max] (q-min by default)")
@click.option("--fit-out", type=click.Path(path_type=Path), help="Fit report JSON path")
@click.pass_context
def spectrum(ctx, fit_enabled, fit_from, fit_out, **kwargs):
    """Area spectrum A_q and its asymptotic fit."""
    def _spectrum():
        config = _config("spectrum", **kwargs)
        start = None
        if fit_enabled:
            start = fit_from or config.q_min
            if config.q_max < 4 * start:
                raise DomainSpecError(
                    f"fit range [{start}, {config.q_max}] rejected: need q-max >= 4 * {start} (or --no-fit)"
                )
        table, fit = _engine(ctx, config).spectrum(config.domain_spec(), config.q_min, config.q_max, start)
        if config.format == "json":
            report = {"rows": [{"q": q, "action": a, "residual": r} for q, a, r in table.csv_rows()]}
            if fit is not None:
                report["fit"] = fit.to_report()
            write_json(report, config.out)
        else:
            write_csv(("q", "A_q", "residual"), table.csv_rows(), config.out)
        if fit is not None and fit_out:
            write_json(fit.to_report(), fit_out)
        if fit is not None:
            _summary("Asymptotic fit", {
                "c0": f"{fit.c0:.12g}",
                "c1": f"{fit.c1:.12g}",
                "c2": f"{fit.c2:.12g}",
                "kappa": fit.kappa,
                "area defect": f"{fit.area_defect:.2e}",
            })
    _run(ctx, _spectrum)


@cli.command()
@common_options
@click.option("--mode", "modes", multiple=True, help="Cosine mode as p=coef (repeatable)")
@click.pass_context
def xray(ctx, modes, **kwargs):
    """Discrete X-ray transform of an even map along the maximal orbits."""
    def _xray():
        config = _config("xray", **kwargs)
        n = EvenFourierMap.from_modes(_parse_modes(modes) or {0: 1.0})
        rows = _engine(ctx, config).xray(config.domain_spec(), n, config.q_min, config.q_max)
        if config.format == "json":
            write_json({"rows": [{"q": q, "xray": a, "ellipse": e} for q, a, e in rows]}, config.out)
        else:
            write_csv(("q", "xray", "ellipse"), rows, config.out)
    _run(ctx, _xray)


@cli.command()
@common_options
@click.option("--ellipse", is_flag=True, help="Closed-form ellipse operator instead of the domain operator")
@click.option("--modes", type=int, help="Fourier truncation N")
@click.option("--rows", type=int, help="Row truncation Q")
@click.option("--q0", type=int, help="Split index for the finite-rank split")
@click.option("--matrix-out", type=click.Path(path_type=Path), help="Operator matrix CSV path")
@click.pass_context
def operator(ctx, ellipse, modes, rows, q0, matrix_out, **kwargs):
    """Truncated isospectral operator: weighted SVD kernel and finite-rank split."""
    def _operator():
        config = _config("operator", **kwargs)
        spec = None if ellipse else config.domain_spec()
        report = _engine(ctx, config).operator(spec, modes, rows, config.gamma, q0)
        write_json(report.to_report(), config.out)
        if matrix_out:
            header = ("q",) + tuple(f"p{p}" for p in range(report.operator.modes + 1))
            write_csv(header, report.operator.csv_rows(), matrix_out)
        _summary("Operator", {
            "sigma_min": f"{report.kernel.sigma_min:.6g}",
            "sigma_max": f"{report.kernel.sigma_max:.6g}",
            "kernel": report.kernel.kernel_dim,
        })
    _run(ctx, _operator)


@cli.command()
@click.option("--family", "family_path", type=click.Path(path_type=Path), required=True,
              help="Deformation family JSON")
@click.option("--tau", type=float, default=0.0, show_default=True)
@click.option("--q-min", "q_min", type=int, default=3, show_default=True)
@click.option("--q-max", "q_max", type=int, default=16, show_default=True)
@click.option("--grid", type=int, help="Affine arclength grid size")
@click.option("--out", type=click.Path(path_type=Path), help="Output path (stdout when absent)")
@click.pass_context
def deform(ctx, family_path, tau, q_min, q_max, grid, out):
    """Deformation map and isospectral residuals of a family at tau."""
    def _deform():
        config = RunConfig(command="deform", q_min=q_min, q_max=q_max, grid=grid, out=out, format="json")
        family = DeformationFamily.from_file(family_path)
        if grid is not None:
            family = family.model_copy(update={"base": family.base.model_copy(update={"grid_size": grid})})
        sample, report = _engine(ctx, config).deform(family, tau, range(q_min, q_max + 1))
        payload = report.to_report()
        payload["n"] = sample.n.coefficients
        payload["order_estimate"] = sample.order_estimate
        payload["odd_defect"] = sample.odd_defect
        write_json(payload, out)
        status = "isospectral-consistent" if report.consistent else "not isospectral"
        console.print(f"[bold]{status}[/bold] at tau = {tau}")
    _run(ctx, _deform)


@cli.command()
@click.option("--only", multiple=True, type=int, help="Criterion id (repeatable)")
@click.option("--gamma", type=float, help="Regularity exponent in (3, 4)")
@click.option("--grid", type=int, help="Affine arclength grid size")
@click.option("--out", type=click.Path(path_type=Path), help="Output path (stdout when absent)")
@click.pass_context
def verify(ctx, only, gamma, grid, out):
    """Run the acceptance suite; exit 1 when a criterion fails."""
    def _verify():
        config = RunConfig(command="verify", gamma=gamma, grid=grid, out=out, format="json")
        results = _engine(ctx, config).verify(only or None)
        write_json({"criteria": [r.to_report() for r in results],
                    "passed": all(r.passed for r in results)}, out)
        table = Table(title="Acceptance")
        table.add_column("id", justify="right")
        table.add_column("criterion")
        table.add_column("result")
        for r in results:
            table.add_row(str(r.id), r.name, "[green]pass[/green]" if r.passed else "[red]FAIL[/red]")
        console.print(table)
        failed = [r.id for r in results if not r.passed]
        if failed:
            print_error(f"failing criteria: {', '.join(map(str, failed))}")
            return EXIT_ACCEPTANCE
        return EXIT_OK
    _run(ctx, _verify)


def main():
    """Main entry point."""
    cli()


if __name__ == "__main__":
    main()
