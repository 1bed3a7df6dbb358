"""Command line interface for pulse synthesis and robustness analysis."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from .acceptance import AcceptanceCheck, s_gate_checks
from .closure import XiSolution, resolve_x_gate_convention, solve_xi
from .config import FitWindow, RunConfig, load_run_config
from .error_geometry import ErrorChannel, error_curve_direct, error_curve_path
from .exporters import read_sweep, write_curve, write_filter, write_fit, write_json, write_solution, write_sweep
from .pulses import PulseSequence, PulseShape, bloch_path, load_sequence, propagate, save_sequence
from .robustness import (
    FitUndefinedError,
    SweepFit,
    beta_grid,
    compare_schemes,
    filter_function,
    fit_power_law,
    sweep_and_fit,
)
from .schemes import LevelSpec, build_dynamical_euler, build_geometric
from .su2 import InvalidArgumentError, configure_tolerances
from .targets import NAMED_GATES, GateTarget, parse_target

console = Console()
app = typer.Typer(add_completion=False, help="Sintetiza y analiza pulsos compuestos doblemente geométricos.")

EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_ACCEPTANCE = 4

CONFIG_HELP = "Archivo YAML de configuración."
LOG_HELP = "Nivel de logging (DEBUG, INFO, WARNING, ERROR)."


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
    )


@contextmanager
def _handled_errors() -> Iterator[None]:
    try:
        yield
    except (InvalidArgumentError, FileNotFoundError, ValidationError, FitUndefinedError) as exc:
        console.print(f"[red]Error:[/red] {exc}")
        raise typer.Exit(code=EXIT_USAGE) from exc


def _prepare(config_path: Optional[Path], log_level: str, output_dir: Optional[Path]) -> RunConfig:
    _setup_logging(log_level)
    config = load_run_config(config_path)
    configure_tolerances(config.numeric.tolerances())
    if output_dir is not None:
        config = config.model_copy(update={"output_dir": output_dir})
    return config


def _resolve_target(gate: Optional[str], target: Optional[str]) -> Tuple[str, GateTarget]:
    if gate and target:
        raise typer.BadParameter("Use --gate o --target, no ambos.")
    if gate:
        if gate.upper() not in NAMED_GATES:
            raise typer.BadParameter(f"La puerta '{gate}' no está definida ({', '.join(NAMED_GATES)}).")
        return gate.upper(), NAMED_GATES[gate.upper()]
    if target:
        try:
            return "custom", parse_target(target)
        except ValueError as exc:
            raise typer.BadParameter(str(exc), param_hint="target") from exc
    raise typer.BadParameter("Indique una puerta con --gate o un objetivo con --target.")


def _parse_channel(value: str) -> ErrorChannel:
    try:
        return ErrorChannel(value.lower())
    except ValueError as exc:
        raise typer.BadParameter("El canal debe ser rabi o detuning.", param_hint="channel") from exc


def _parse_shape(value: str) -> PulseShape:
    key = value.lower()
    if key == "square":
        return PulseShape.square()
    if key in {"sine-squared", "sin2"}:
        return PulseShape.sine_squared()
    raise typer.BadParameter("La forma debe ser square o sine-squared.", param_hint="shape")


def _parse_floats(value: str, count: int, name: str) -> List[float]:
    try:
        values = [float(item) for item in value.split(",")]
    except ValueError as exc:
        raise typer.BadParameter(f"{name} contiene valores no numéricos.", param_hint=name) from exc
    if len(values) != count:
        raise typer.BadParameter(f"{name} necesita {count} valores separados por comas.", param_hint=name)
    return values


def _z_rotation_angle(target: GateTarget) -> float:
    if abs(target.theta0) > 1e-12:
        raise typer.BadParameter("El esquema dinámico solo construye rotaciones alrededor de z.", param_hint="scheme")
    return -2.0 * target.gamma_g


def _level_from_options(
    level: int, xi: Optional[str], parities: Optional[str], target: GateTarget, config: RunConfig
) -> Tuple[LevelSpec, Optional[XiSolution]]:
    if level not in (1, 3, 5):
        raise typer.BadParameter("El nivel debe ser 1, 3 o 5.", param_hint="level")
    if level == 1:
        return LevelSpec.level1(), None
    free_count = 2 if level == 3 else 4
    if xi is None or xi.lower() == "solve":
        solution = solve_xi(target, level, config.solver)
        return solution.level_spec, solution
    free = _parse_floats(xi, free_count, "xi")
    pattern = [int(v) for v in _parse_floats(parities, 5, "parities")] if parities and level == 5 else None
    return LevelSpec.for_level(level, free, pattern), None


def _solution_distances(sequence: PulseSequence, config: RunConfig) -> Dict[str, float]:
    grid = config.grid.spec()
    return {
        channel.value: error_curve_direct(sequence, channel, grid).distance_bloch
        for channel in (ErrorChannel.RABI, ErrorChannel.DETUNING)
    }


def _render_sequence(sequence: PulseSequence) -> None:
    table = Table(title=f"Secuencia {sequence.scheme}")
    table.add_column("#", style="cyan", justify="right")
    table.add_column("Área", style="green", justify="right")
    table.add_column("Fase", style="magenta", justify="right")
    table.add_column("Duración", style="yellow", justify="right")
    table.add_column("Forma", style="white")
    for index, segment in enumerate(sequence.segments, start=1):
        table.add_row(
            str(index),
            f"{segment.area:.6f}",
            f"{segment.phase:.6f}",
            f"{segment.duration:.6f}",
            segment.shape.tag.value,
        )
    console.print(table)
    console.print(f"Área total: {sequence.total_area:.6f}  Duración total: {sequence.total_duration:.6f}")


def _render_solution(solution: XiSolution, distances: Dict[str, float]) -> None:
    table = Table(title=f"Solución de nivel {solution.level}")
    table.add_column("Campo", style="cyan")
    table.add_column("Valor", style="green")
    table.add_row("xi", ", ".join(f"{value:.10g}" for value in solution.xi))
    table.add_row("residuo", f"{solution.residual_norm:.3e}")
    table.add_row("convergido", "sí" if solution.converged else "no")
    if solution.parities:
        table.add_row("paridades", ",".join(str(p) for p in solution.parities))
    if solution.candidates:
        table.add_row("candidatos", str(len(solution.candidates)))
    for channel, value in distances.items():
        table.add_row(f"d ({channel})", f"{value:.3e}")
    console.print(table)


def _exit_if_not_converged(solution: Optional[XiSolution]) -> None:
    if solution is not None and not solution.converged:
        console.print(
            f"[yellow]El solver no convergió: mejor xi={solution.xi} con residuo {solution.residual_norm:.3e}.[/yellow]"
        )
        raise typer.Exit(code=EXIT_NOT_CONVERGED)


@app.command()
def synth(
    gate: Optional[str] = typer.Option(None, "--gate", "-g", help="Puerta con nombre (S, T, Z, X, H)."),
    target: Optional[str] = typer.Option(None, "--target", "-t", help="Objetivo theta0,phi0,gamma_g en radianes."),
    scheme: str = typer.Option("geometric", "--scheme", help="Esquema (geometric o dynamical)."),
    level: int = typer.Option(3, "--level", "-l", help="Nivel de la identidad (1, 3 o 5)."),
    xi: Optional[str] = typer.Option("solve", "--xi", help="Parámetros libres separados por comas o 'solve'."),
    parities: Optional[str] = typer.Option(None, "--parities", help="Paridades del nivel 5, p. ej. 0,0,0,0,1."),
    shape: str = typer.Option("square", "--shape", help="Forma del pulso (square o sine-squared)."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Archivo JSON de salida."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Construye una secuencia geométrica (o la referencia dinámica) y la guarda en JSON."""
    config = _prepare(config_path, log_level, output_dir)
    name, gate_target = _resolve_target(gate, target)
    pulse_shape = _parse_shape(shape)
    if scheme.lower() == "dynamical":
        with _handled_errors():
            sequence = build_dynamical_euler(_z_rotation_angle(gate_target), pulse_shape)
            path = output or config.output_dir / f"{name.lower()}-dynamical.json"
            save_sequence(sequence, path)
        _render_sequence(sequence)
        console.print(f"Secuencia guardada en {path}")
        return
    if scheme.lower() != "geometric":
        raise typer.BadParameter("El esquema debe ser geometric o dynamical.", param_hint="scheme")
    with _handled_errors():
        level_spec, solution = _level_from_options(level, xi, parities, gate_target, config)
        if solution is not None:
            _render_solution(solution, {})
        _exit_if_not_converged(solution)
        sequence = build_geometric(gate_target, level_spec, pulse_shape)
        path = output or config.output_dir / f"{name.lower()}-level{level}.json"
        save_sequence(sequence, path)
    _render_sequence(sequence)
    console.print(f"Secuencia guardada en {path}")


@app.command()
def solve(
    gate: Optional[str] = typer.Option(None, "--gate", "-g", help="Puerta con nombre (S, T, Z, X, H)."),
    target: Optional[str] = typer.Option(None, "--target", "-t", help="Objetivo theta0,phi0,gamma_g en radianes."),
    level: int = typer.Option(3, "--level", "-l", help="Nivel de la identidad (3 o 5)."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Archivo JSON de salida."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Resuelve los parámetros xi de la identidad y reporta las distancias de error."""
    config = _prepare(config_path, log_level, output_dir)
    name, gate_target = _resolve_target(gate, target)
    if level not in (3, 5):
        raise typer.BadParameter("Solo se resuelven los niveles 3 y 5.", param_hint="level")
    with _handled_errors():
        solution = solve_xi(gate_target, level, config.solver)
        sequence = build_geometric(gate_target, solution.level_spec)
        distances = _solution_distances(sequence, config)
        path = output or config.output_dir / f"{name.lower()}-level{level}-solve.json"
        write_solution(solution, path, distances)
    _render_solution(solution, distances)
    console.print(f"Solución guardada en {path}")
    _exit_if_not_converged(solution)


@app.command()
def curve(
    sequence_path: Path = typer.Argument(..., help="Secuencia JSON."),
    channel: str = typer.Option("detuning", "--channel", help="Canal de error (rabi o detuning)."),
    method: str = typer.Option("direct", "--method", help="Método de integración (direct o path)."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="CSV de salida t,x,y,z."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Calcula la curva de error de primer orden de una secuencia."""
    config = _prepare(config_path, log_level, output_dir)
    error_channel = _parse_channel(channel)
    if method not in {"direct", "path"}:
        raise typer.BadParameter("El método debe ser direct o path.", param_hint="method")
    with _handled_errors():
        sequence = load_sequence(sequence_path)
        grid = config.grid.spec()
        if method == "direct":
            result = error_curve_direct(sequence, error_channel, grid, max_refinements=config.grid.max_refinements)
        else:
            propagation = propagate(sequence, grid=grid)
            result = error_curve_path(bloch_path(propagation, config.numeric.pole_tol), sequence, error_channel, grid)
        path = output or config.output_dir / f"{sequence_path.stem}-{error_channel.value}-curve.csv"
        write_curve(result, path)
    console.print(
        f"Distancia de error ({error_channel.value}): {result.distance_bloch:.6g}  "
        f"extremo {np.array2string(result.endpoint, precision=6)}"
    )
    console.print(f"Curva guardada en {path}")


@app.command()
def sweep(
    sequence_path: Path = typer.Argument(..., help="Secuencia JSON."),
    channel: str = typer.Option("detuning", "--channel", help="Canal de error (rabi o detuning)."),
    beta_min: Optional[float] = typer.Option(None, "--beta-min", help="Extremo inferior de beta."),
    beta_max: Optional[float] = typer.Option(None, "--beta-max", help="Extremo superior de beta."),
    points: Optional[int] = typer.Option(None, "--points", help="Número de puntos logarítmicos."),
    symmetric: bool = typer.Option(True, "--symmetric/--one-sided", help="Promediar +beta y -beta."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="CSV de salida beta,infidelity."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Barre la intensidad de error y ajusta el orden de escalado."""
    config = _prepare(config_path, log_level, output_dir)
    error_channel = _parse_channel(channel)
    with _handled_errors():
        sequence = load_sequence(sequence_path)
        window = _window_for(sequence, config)
        betas = beta_grid(beta_min or window.beta_min, beta_max or window.beta_max, points or window.points)
        fit = sweep_and_fit(
            sequence,
            error_channel,
            betas,
            symmetric=symmetric,
            threads=config.threads,
            grid=config.grid.spec(),
        )
        stem = f"{sequence_path.stem}-{error_channel.value}"
        path = output or config.output_dir / f"{stem}-sweep.csv"
        write_sweep(fit, path)
        write_fit(fit, path.with_name(f"{stem}-fit.json"))
    _render_fits(sequence.scheme, [fit])
    console.print(f"Barrido guardado en {path}")


@app.command()
def fit(
    sweep_path: Path = typer.Argument(..., help="CSV beta,infidelity."),
    channel: str = typer.Option("detuning", "--channel", help="Canal de error (rabi o detuning)."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="JSON de salida."),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Ajusta una ley de potencias a un barrido existente."""
    _setup_logging(log_level)
    error_channel = _parse_channel(channel)
    with _handled_errors():
        columns = read_sweep(sweep_path)
        result = fit_power_law(error_channel, columns["beta"], columns["infidelity"])
        path = output or sweep_path.with_name(f"{sweep_path.stem}-fit.json")
        write_fit(result, path)
    _render_fits(sweep_path.stem, [result])
    console.print(f"Ajuste guardado en {path}")


@app.command("filter")
def filter_command(
    sequence_path: Path = typer.Argument(..., help="Secuencia JSON."),
    channel: str = typer.Option("detuning", "--channel", help="Canal de error (rabi o detuning)."),
    omega_min: float = typer.Option(0.0, "--omega-min", help="Frecuencia mínima (rad por unidad de tiempo)."),
    omega_max: float = typer.Option(5.0, "--omega-max", help="Frecuencia máxima."),
    points: int = typer.Option(201, "--points", help="Número de frecuencias."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="CSV de salida omega,F."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Calcula la función de filtro de primer orden."""
    config = _prepare(config_path, log_level, output_dir)
    error_channel = _parse_channel(channel)
    if points < 2 or omega_max <= omega_min:
        raise typer.BadParameter("La rejilla de frecuencias necesita omega_max > omega_min y al menos 2 puntos.")
    with _handled_errors():
        sequence = load_sequence(sequence_path)
        result = filter_function(
            sequence, error_channel, np.linspace(omega_min, omega_max, points), config.grid.spec()
        )
        path = output or config.output_dir / f"{sequence_path.stem}-{error_channel.value}-filter.csv"
        write_filter(result, path)
    console.print(f"F(omega_min) = {result.values[0]:.6g}")
    console.print(f"Función de filtro guardada en {path}")


@app.command()
def report(
    sequence_paths: List[Path] = typer.Argument(..., help="Una o más secuencias JSON."),
    check: bool = typer.Option(False, "--assert", help="Verifica los valores de referencia de la puerta S."),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="JSON de salida."),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Directorio de salida."),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help=CONFIG_HELP),
    log_level: str = typer.Option("INFO", "--log-level", help=LOG_HELP),
) -> None:
    """Compara esquemas: distancias de error, órdenes de escalado y F(0)."""
    config = _prepare(config_path, log_level, output_dir)
    grid = config.grid.spec()
    rows: List[dict] = []
    checks: List[AcceptanceCheck] = []
    with _handled_errors():
        sequences = [load_sequence(path) for path in sequence_paths]
        for sequence in sequences:
            window = _window_for(sequence, config)
            betas = beta_grid(window.beta_min, window.beta_max, window.points)
            comparison = compare_schemes([sequence], betas, grid, threads=config.threads)[0]
            document = comparison.to_document()
            document["f0"] = {
                channel.value: float(filter_function(sequence, channel, [0.0], grid).values[0])
                for channel in (ErrorChannel.RABI, ErrorChannel.DETUNING)
            }
            rows.append(document)
            checks.extend(s_gate_checks(sequence, comparison))
        x_gate = resolve_x_gate_convention()
        path = output or config.output_dir / "report.json"
        write_json(
            path,
            {
                "schemes": rows,
                "x_gate": {
                    "xi": list(x_gate.xi),
                    "target": x_gate.best.target.model_dump(),
                    "form": x_gate.best.form,
                    "residual_norm": x_gate.best.residual_norm,
                    "closed": x_gate.satisfied,
                },
                "checks": [item.describe() for item in checks],
            },
        )
    _render_report(rows)
    console.print(x_gate.describe())
    console.print(f"Informe guardado en {path}")
    if check:
        if not checks:
            console.print("[red]Ninguna secuencia de la puerta S para verificar.[/red]")
            raise typer.Exit(code=EXIT_ACCEPTANCE)
        for item in checks:
            console.print(item.describe())
        if not all(item.passed for item in checks):
            raise typer.Exit(code=EXIT_ACCEPTANCE)


def _window_for(sequence: PulseSequence, config: RunConfig) -> FitWindow:
    return config.level5_fit_window if sequence.scheme == "udog-level5" else config.fit_window


def _render_fits(title: str, fits: List[SweepFit]) -> None:
    table = Table(title=f"Ajustes de escalado: {title}")
    table.add_column("Canal", style="cyan")
    table.add_column("Pendiente", style="green", justify="right")
    table.add_column("Coeficiente", style="yellow", justify="right")
    table.add_column("R²", style="white", justify="right")
    for item in fits:
        table.add_row(item.channel.value, f"{item.slope:.4f}", f"{item.coefficient:.6g}", f"{item.r_squared:.6f}")
    console.print(table)


def _render_report(rows: List[dict]) -> None:
    table = Table(title="Comparación de esquemas")
    table.add_column("Esquema", style="cyan", no_wrap=True)
    table.add_column("Canal", style="magenta")
    table.add_column("Distancia", style="green", justify="right")
    table.add_column("Pendiente", style="yellow", justify="right")
    table.add_column("Coeficiente", style="yellow", justify="right")
    table.add_column("F(0)", style="white", justify="right")
    for row in rows:
        for channel in ("rabi", "detuning"):
            fit_row = row["fits"].get(channel)
            slope = f"{fit_row['slope']:.4f}" if fit_row else "-"
            coefficient = f"{fit_row['coefficient']:.6g}" if fit_row else "-"
            table.add_row(
                row["scheme"],
                channel,
                f"{row['distances'][channel]:.4g}",
                slope,
                coefficient,
                f"{row['f0'][channel]:.3e}",
            )
    console.print(table)


