"""Closure conditions for the free identity parameters and their multistart solver."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from joblib import Parallel, delayed
from scipy.stats import qmc

from .config import SolverSettings
from .error_geometry import ErrorChannel, _accumulate, pair_key
from .pulses import Substep
from .robustness import INFIDELITY_FLOOR, gate_infidelity
from .schemes import LevelSpec, build_geometric, dressed_frame
from .su2 import InvalidArgumentError, rotation_matrix
from .targets import GateTarget

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]
ResidualFunction = Callable[[FloatArray], FloatArray]

LEVEL3_NAMES: Tuple[str, ...] = ("rabi_x", "rabi_y", "det_x", "det_y")
LEVEL5_NAMES: Tuple[str, ...] = LEVEL3_NAMES + (
    "a2_rabi_x",
    "a2_rabi_y",
    "a2_rabi_z",
    "a2_det_x",
    "a2_det_y",
    "a2_det_z",
)
RESIDUAL_FORMS = ("printed", "dressed")
LEVEL5_REFINED_CANDIDATES = 8
LEVEL5_ORDER_BETAS = (1e-2, 2e-2)
LEVEL5_MIN_ORDER = 5.5


@dataclass(frozen=True)
class ResidualVector:
    names: Tuple[str, ...]
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise InvalidArgumentError("Cada residuo necesita un nombre.")
        if len(self.values) not in (4, 10):
            raise InvalidArgumentError(f"Longitud de residuo no soportada: {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise InvalidArgumentError("Los residuos deben ser finitos.")

    @property
    def array(self) -> FloatArray:
        return np.array(self.values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass
class XiSolution:
    level: int
    xi: Tuple[float, ...]
    residual_norm: float
    converged: bool
    multistart_seed: Dict[str, object]
    parities: Tuple[int, ...] = ()
    candidates: List[Tuple[float, ...]] = field(default_factory=list)

    @property
    def level_spec(self) -> LevelSpec:
        return LevelSpec.for_level(self.level, self.xi, self.parities or None)

    def to_document(self) -> dict:
        return {
            "level": self.level,
            "xi": [float(v) for v in self.xi],
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "parities": list(self.parities),
            "multistart_seed": self.multistart_seed,
        }


# --- level-3 closed forms ----------------------------------------------------------


def residuals_level3(target: GateTarget, xi1: float, xi2: float, form: str = "printed") -> ResidualVector:
    """Closed-form level-3 closure expressions.

    ``printed`` evaluates the published trigonometric sums as written.  ``dressed``
    flips the two ``sin(phi0)`` boundary terms; it then equals
    ``(-x_rabi, y_rabi, x_det, -y_det)`` of the dressed-frame curve endpoints.
    """
    if form not in RESIDUAL_FORMS:
        raise InvalidArgumentError(f"Forma de residuo desconocida: {form}")
    theta0, phi0, gamma = target.theta0, target.phi0, target.gamma_g
    sign = -1.0 if form == "dressed" else 1.0

    outer = 2 * gamma + phi0
    first = xi1 * gamma + phi0
    second = (1 + xi1 - xi2) * gamma + phi0
    third = (2 * xi1 - xi2) * gamma + phi0
    pi = math.pi
    cos_half = math.cos(theta0 / 2) ** 2
    sin_half = math.sin(theta0 / 2) ** 2

    rabi_x = (
        -(pi - theta0) * math.sin(outer)
        + sign * theta0 * math.sin(phi0)
        + pi * math.sin(first)
        - pi * math.sin(second)
        + pi * math.sin(third)
    ) / 2
    rabi_y = (
        -(pi - theta0) * math.cos(outer)
        - theta0 * math.cos(phi0)
        + pi * math.cos(first)
        - pi * math.cos(second)
        + pi * math.cos(third)
    ) / 2
    det_x = -cos_half * math.cos(outer) - math.cos(first) - sin_half * math.cos(phi0) + math.cos(second) + math.cos(third)
    det_y = (
        cos_half * math.sin(outer)
        + math.sin(first)
        - sign * sin_half * math.sin(phi0)
        - math.sin(second)
        - math.sin(third)
    )
    return ResidualVector(names=LEVEL3_NAMES, values=(rabi_x, rabi_y, det_x, det_y))


# --- numeric residuals -------------------------------------------------------------


def _square_steps(target: GateTarget, level: LevelSpec) -> List[Substep]:
    outer_phase = target.phi0 - math.pi / 2
    blocks: List[Tuple[float, float]] = []
    if target.theta0 > 0:
        blocks.append((target.theta0, outer_phase))
    blocks.extend((math.pi, phase) for phase in level.phases(target))
    if math.pi - target.theta0 > 0:
        blocks.append((math.pi - target.theta0, outer_phase))
    steps, start = [], 0.0
    for index, (area, phase) in enumerate(blocks):
        steps.append(Substep(start=start, duration=area, amplitude=1.0, phase=phase, segment=index))
        start += area
    return steps


def numeric_residuals(target: GateTarget, level: LevelSpec, a2_weight: float = 1.0) -> ResidualVector:
    """First-order endpoints of both channels plus weighted same-channel ``A2`` in the dressed frame."""
    accumulated = _accumulate(_square_steps(target, level))
    frame = rotation_matrix(dressed_frame(target))
    rabi = frame @ accumulated.r[ErrorChannel.RABI][-1]
    det = frame @ accumulated.r[ErrorChannel.DETUNING][-1]
    values = [-rabi[0], rabi[1], det[0], -det[1]]
    if level.n == 3:
        return ResidualVector(names=LEVEL3_NAMES, values=tuple(float(v) for v in values))
    for channel in (ErrorChannel.RABI, ErrorChannel.DETUNING):
        a2 = frame @ accumulated.a2[pair_key((channel, channel))][-1]
        values.extend(a2_weight * a2)
    return ResidualVector(names=LEVEL5_NAMES, values=tuple(float(v) for v in values))


# --- damped Gauss-Newton -----------------------------------------------------------


def _jacobian(fun: ResidualFunction, x: FloatArray, step: float = 1e-6) -> FloatArray:
    columns = []
    for index in range(x.size):
        offset = np.zeros_like(x)
        offset[index] = step
        columns.append((fun(x + offset) - fun(x - offset)) / (2 * step))
    return np.stack(columns, axis=1)


def gauss_newton(
    fun: ResidualFunction,
    x0: Sequence[float],
    max_iterations: int = 200,
    tol: float = 1e-12,
) -> Tuple[FloatArray, float]:
    """Least-squares Gauss-Newton; the step is halved while the residual grows."""
    x = np.asarray(x0, dtype=float)
    residual = fun(x)
    cost = float(np.linalg.norm(residual))
    damping = 1.0
    for _ in range(max_iterations):
        if cost < tol:
            break
        step, *_ = np.linalg.lstsq(_jacobian(fun, x), -residual, rcond=None)
        accepted = False
        while damping > 1e-10:
            candidate = x + damping * step
            candidate_residual = fun(candidate)
            candidate_cost = float(np.linalg.norm(candidate_residual))
            if candidate_cost < cost:
                x, residual, cost = candidate, candidate_residual, candidate_cost
                damping = min(1.0, 2 * damping)
                accepted = True
                break
            damping *= 0.5
        if not accepted or float(np.linalg.norm(step)) < 1e-15:
            break
    return x, cost


def _parallel_map(function: Callable, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads <= 1:
        return [function(item) for item in items]
    return Parallel(n_jobs=threads, prefer="threads")(delayed(function)(item) for item in items)


def _rounded(xi: Sequence[float]) -> Tuple[float, ...]:
    return tuple(round(float(v), 8) for v in xi)


def _tie_break_key(xi: Sequence[float]) -> Tuple[float, Tuple[float, ...]]:
    rounded = _rounded(xi)
    return (max(abs(v) for v in rounded), rounded)


def _distinct(points: Iterable[Sequence[float]]) -> List[FloatArray]:
    """One unrounded representative per 1e-8 cell, in tie-break order."""
    unique: Dict[Tuple[float, ...], FloatArray] = {}
    for point in points:
        unique.setdefault(_rounded(point), np.asarray(point, dtype=float))
    return [unique[key] for key in sorted(unique, key=_tie_break_key)]


def _grid_starts(settings: SolverSettings, dimension: int) -> List[Tuple[float, ...]]:
    axis = np.arange(-settings.grid_bound, settings.grid_bound + settings.grid_step / 2, settings.grid_step)
    return list(itertools.product(axis.tolist(), repeat=dimension))


def _quasi_random_starts(settings: SolverSettings, count: int) -> FloatArray:
    sampler = qmc.Halton(d=4, seed=settings.seed)
    bound = settings.grid_bound
    return qmc.scale(sampler.random(count), [-bound] * 4, [bound] * 4)


def _best_in_box(
    points: Iterable[FloatArray], norm_of: Callable[[FloatArray], float], bound: float
) -> Tuple[FloatArray, float]:
    """Best unconverged point after clipping to the start box, with its recomputed residual."""
    clipped = [np.clip(np.asarray(x, dtype=float), -bound, bound) for x in points]
    scored = [(x, norm_of(x)) for x in clipped]
    return min(scored, key=lambda item: item[1])


def _solve_level3(target: GateTarget, settings: SolverSettings) -> XiSolution:
    def fun(x: FloatArray) -> FloatArray:
        return residuals_level3(target, x[0], x[1], form="dressed").array

    def norm_of(x: FloatArray) -> float:
        return float(np.linalg.norm(fun(x)))

    starts = _grid_starts(settings, 2)
    results = _parallel_map(
        lambda start: gauss_newton(fun, start, settings.max_iterations, settings.level3_tol / 10),
        starts,
        settings.threads,
    )
    converged = [x for x, cost in results if cost < settings.level3_tol]
    record = {"grid_step": settings.grid_step, "grid_bound": settings.grid_bound, "starts": len(starts)}
    if converged:
        representatives = _distinct(converged)
        best = representatives[0]
        norm = norm_of(best)
        candidates = [_rounded(x) for x in representatives]
        logger.info("Nivel 3: %d soluciones distintas; se elige xi=%s", len(candidates), candidates[0])
        return XiSolution(
            level=3,
            xi=tuple(float(v) for v in best),
            residual_norm=norm,
            converged=norm < settings.level3_tol,
            multistart_seed=record,
            parities=(0, 0, 1),
            candidates=candidates,
        )
    x, cost = _best_in_box((x for x, _ in results), norm_of, settings.grid_bound)
    logger.warning("Nivel 3 sin convergencia para %s; mejor residuo %.3e", target.describe(), cost)
    return XiSolution(
        level=3,
        xi=tuple(float(v) for v in x),
        residual_norm=cost,
        converged=False,
        multistart_seed=record,
        parities=(0, 0, 1),
    )


def _solve_level5_pattern(
    target: GateTarget, settings: SolverSettings, parities: Tuple[int, ...]
) -> Tuple[List[Tuple[FloatArray, float]], int]:
    def weighted(weight: float) -> ResidualFunction:
        def fun(x: FloatArray) -> FloatArray:
            return numeric_residuals(target, LevelSpec.level5(x, parities), a2_weight=weight).array

        return fun

    starts = _quasi_random_starts(settings, settings.level5_starts)
    first = _parallel_map(
        lambda start: gauss_newton(
            weighted(settings.a2_initial_weight), start, settings.max_iterations, settings.level5_tol / 10
        ),
        list(starts),
        settings.threads,
    )
    first.sort(key=lambda item: item[1])
    final = weighted(1.0)
    refined = _parallel_map(
        lambda item: gauss_newton(final, item[0], settings.max_iterations, settings.level5_tol / 10),
        first[:LEVEL5_REFINED_CANDIDATES],
        settings.threads,
    )
    return refined, len(starts)


def measured_order(target: GateTarget, level: LevelSpec, betas: Tuple[float, float] = LEVEL5_ORDER_BETAS) -> float:
    """Smallest local slope of the symmetric infidelity over both error channels."""
    sequence = build_geometric(target, level)
    slopes = []
    for channel in ErrorChannel:
        samples = []
        for beta in betas:
            if channel == ErrorChannel.RABI:
                pair = (gate_infidelity(sequence, epsilon=beta), gate_infidelity(sequence, epsilon=-beta))
            else:
                pair = (gate_infidelity(sequence, delta=beta), gate_infidelity(sequence, delta=-beta))
            samples.append(max(0.5 * sum(pair), INFIDELITY_FLOOR))
        slopes.append(math.log(samples[1] / samples[0]) / math.log(betas[1] / betas[0]))
    return min(slopes)


def _solve_level5(target: GateTarget, settings: SolverSettings) -> XiSolution:
    """Pool the converged candidates of every parity pattern, keep the sixth-order ones, tie-break."""
    if not settings.parity_patterns:
        raise InvalidArgumentError("Se necesita al menos un patrón de paridades para el nivel 5.")
    pooled: List[Tuple[FloatArray, Tuple[int, ...]]] = []
    unconverged: List[Tuple[FloatArray, Tuple[int, ...]]] = []
    count = 0
    for pattern in settings.parity_patterns:
        parities = tuple(int(p) for p in pattern)
        refined, count = _solve_level5_pattern(target, settings, parities)
        converged = [x for x, cost in refined if cost < settings.level5_tol]
        if converged:
            logger.info("Nivel 5: %d candidatos convergidos con paridades %s", len(_distinct(converged)), parities)
            pooled.extend((x, parities) for x in _distinct(converged))
        else:
            logger.warning("Nivel 5 sin convergencia con paridades %s", parities)
            unconverged.extend((x, parities) for x, _ in refined)

    record: Dict[str, object] = {
        "seed": settings.seed,
        "starts": count,
        "sampler": "halton",
        "parity_patterns": [list(p) for p in settings.parity_patterns],
    }
    if pooled:
        orders = [measured_order(target, LevelSpec.level5(x, parities)) for x, parities in pooled]
        sixth = [item for item, order in zip(pooled, orders) if order >= LEVEL5_MIN_ORDER]
        if not sixth:
            logger.warning("Ningún candidato de nivel 5 alcanza orden %.1f; se usan todos.", LEVEL5_MIN_ORDER)
            sixth = pooled
        sixth.sort(key=lambda item: (_tie_break_key(item[0]), item[1]))
        xi, parities = sixth[0]
        norm = numeric_residuals(target, LevelSpec.level5(xi, parities)).norm()
        logger.info("Nivel 5: se elige xi=%s con paridades %s", _rounded(xi), parities)
        return XiSolution(
            level=5,
            xi=tuple(float(v) for v in xi),
            residual_norm=norm,
            converged=norm < settings.level5_tol,
            multistart_seed=record,
            parities=parities,
            candidates=[_rounded(x) for x, _ in sixth],
        )

    scored = [
        (np.clip(x, -settings.grid_bound, settings.grid_bound), parities) for x, parities in unconverged
    ]
    norms = [numeric_residuals(target, LevelSpec.level5(x, parities)).norm() for x, parities in scored]
    index = int(np.argmin(norms))
    xi, parities = scored[index]
    logger.warning("Nivel 5 sin convergencia para %s; mejor residuo %.3e", target.describe(), norms[index])
    return XiSolution(
        level=5,
        xi=tuple(float(v) for v in xi),
        residual_norm=norms[index],
        converged=False,
        multistart_seed=record,
        parities=parities,
    )


def solve_xi(target: GateTarget, level: int, options: Optional[SolverSettings] = None) -> XiSolution:
    """Multistart damped Gauss-Newton for the level-3 or level-5 free parameters."""
    settings = options or SolverSettings()
    if level == 3:
        return _solve_level3(target, settings)
    if level == 5:
        return _solve_level5(target, settings)
    raise InvalidArgumentError(f"Solo se resuelven los niveles 3 y 5; se recibió {level}.")


# --- X-gate sign convention ----------------------------------------------------------


@dataclass
class ConventionCheck:
    target: GateTarget
    form: str
    residual_norm: float


@dataclass
class XGateConvention:
    xi: Tuple[float, float]
    best: ConventionCheck
    scanned: List[ConventionCheck]
    tol: float = 1e-10

    @property
    def satisfied(self) -> bool:
        return self.best.residual_norm < self.tol

    def describe(self) -> str:
        state = "cerrada" if self.satisfied else "NO cerrada"
        return (
            f"Puerta X {state} en xi={self.xi}: mejor triple {self.best.target.describe()} "
            f"(forma {self.best.form}, residuo {self.best.residual_norm:.3e})"
        )


def resolve_x_gate_convention(xi: Tuple[float, float] = (-5.0 / 3.0, 5.0 / 3.0)) -> XGateConvention:
    """Scan the X-gate sign conventions at the given ``xi`` and keep the smallest residual."""
    scanned = []
    for phi0 in (0.0, math.pi):
        for gamma in (math.pi / 2, -math.pi / 2, 3 * math.pi / 2, -3 * math.pi / 2):
            target = GateTarget(theta0=math.pi / 2, phi0=phi0, gamma_g=gamma)
            for form in RESIDUAL_FORMS:
                norm = residuals_level3(target, xi[0], xi[1], form=form).norm()
                scanned.append(ConventionCheck(target=target, form=form, residual_norm=norm))
    best = min(scanned, key=lambda check: check.residual_norm)
    result = XGateConvention(xi=xi, best=best, scanned=scanned)
    logger.info(result.describe())
    return result
