import math

import numpy as np
import pytest

from udog_pulses.closure import (
    LEVEL5_MIN_ORDER,
    LEVEL5_NAMES,
    ResidualVector,
    gauss_newton,
    measured_order,
    numeric_residuals,
    residuals_level3,
    resolve_x_gate_convention,
    solve_xi,
)
from udog_pulses.config import SolverSettings
from udog_pulses.error_geometry import ErrorChannel, endpoint_in_dressed_frame, error_curve_direct, magnus_terms
from udog_pulses.schemes import LevelSpec, build_geometric
from udog_pulses.su2 import InvalidArgumentError
from udog_pulses.targets import NAMED_GATES, GateTarget


def _random_target(rng: np.random.Generator) -> GateTarget:
    return GateTarget(
        theta0=float(rng.uniform(0, math.pi)),
        phi0=float(rng.uniform(-math.pi, math.pi)),
        gamma_g=float(rng.uniform(-math.pi, math.pi)),
    )


@pytest.mark.parametrize("gamma", [-math.pi / 4, -math.pi / 8, -math.pi / 2, 0.3, 2.1])
@pytest.mark.parametrize("form", ["printed", "dressed"])
def test_z_rotation_closes_at_one_and_a_half(gamma, form):
    residuals = residuals_level3(GateTarget(gamma_g=gamma), 1.5, 1.0, form=form)
    assert residuals.names == ("rabi_x", "rabi_y", "det_x", "det_y")
    assert residuals.norm() < 1e-14


def test_degenerate_level3_does_not_close():
    residuals = residuals_level3(NAMED_GATES["S"], 0.0, 0.0)
    assert residuals.norm() > 0.5


def test_identity_gate_closes_for_every_xi():
    rng = np.random.default_rng(4)
    for _ in range(20):
        target = GateTarget(theta0=float(rng.uniform(0, math.pi)), phi0=float(rng.uniform(-3, 3)), gamma_g=0.0)
        xi1, xi2 = rng.uniform(-3, 3, size=2)
        assert residuals_level3(target, xi1, xi2, form="dressed").norm() < 1e-12
        printed = GateTarget(theta0=target.theta0, phi0=0.0, gamma_g=0.0)
        assert residuals_level3(printed, xi1, xi2, form="printed").norm() < 1e-12


def test_forms_coincide_without_sin_phi0():
    target = GateTarget(theta0=1.1, phi0=math.pi, gamma_g=0.7)
    printed = residuals_level3(target, 0.3, -0.4, form="printed").array
    dressed = residuals_level3(target, 0.3, -0.4, form="dressed").array
    assert printed == pytest.approx(dressed, abs=1e-15)


def test_unknown_form_is_rejected():
    with pytest.raises(InvalidArgumentError):
        residuals_level3(NAMED_GATES["S"], 1.5, 1.0, form="other")


def test_residual_vector_invariants():
    with pytest.raises(InvalidArgumentError):
        ResidualVector(names=("a", "b", "c"), values=(0.0, 0.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        ResidualVector(names=("a", "b", "c", "d"), values=(0.0, float("nan"), 0.0, 0.0))
    assert ResidualVector(names=("a", "b", "c", "d"), values=(3.0, 4.0, 0.0, 0.0)).norm() == pytest.approx(5.0)


def test_dressed_residuals_match_integrated_endpoints():
    rng = np.random.default_rng(21)
    for _ in range(100):
        target = _random_target(rng)
        xi1, xi2 = (float(v) for v in rng.uniform(-3, 3, size=2))
        terms = magnus_terms(build_geometric(target, LevelSpec.level3(xi1, xi2)))
        rabi = endpoint_in_dressed_frame(terms.a1_vectors[ErrorChannel.RABI], target)
        det = endpoint_in_dressed_frame(terms.a1_vectors[ErrorChannel.DETUNING], target)
        expected = [-rabi[0], rabi[1], det[0], -det[1]]
        assert residuals_level3(target, xi1, xi2, form="dressed").array == pytest.approx(expected, abs=1e-9)


def test_numeric_residuals_agree_with_closed_forms():
    target = NAMED_GATES["H"]
    closed = residuals_level3(target, 0.4, -0.9, form="dressed").array
    numeric = numeric_residuals(target, LevelSpec.level3(0.4, -0.9)).array
    assert numeric == pytest.approx(closed, abs=1e-12)


def test_level5_residual_vector_has_ten_entries():
    residuals = numeric_residuals(NAMED_GATES["S"], LevelSpec.level5([0.2, 0.4, -0.1, 0.3]), a2_weight=0.3)
    assert residuals.names == LEVEL5_NAMES
    assert len(residuals.values) == 10


def test_gauss_newton_solves_a_small_system():
    def fun(x):
        return np.array([x[0] ** 2 - 2.0, x[1] - x[0]])

    solution, cost = gauss_newton(fun, [1.0, 0.0], tol=1e-14)
    assert cost < 1e-12
    assert solution == pytest.approx([math.sqrt(2), math.sqrt(2)], abs=1e-10)


def test_solve_s_gate_level3():
    solution = solve_xi(NAMED_GATES["S"], 3)
    assert solution.converged
    assert solution.residual_norm < 1e-10
    assert solution.xi == pytest.approx((1.5, 1.0), abs=1e-8)
    assert (1.5, 1.0) in solution.candidates
    assert solution.multistart_seed["starts"] == 169


@pytest.mark.parametrize("gamma", [-math.pi / 4, -math.pi / 8, -math.pi / 2, 0.3])
def test_solve_z_rotations_finds_the_one_and_a_half_branch(gamma):
    solution = solve_xi(GateTarget(gamma_g=gamma), 3)
    assert solution.converged
    assert solution.residual_norm < 1e-10
    assert (1.5, 1.0) in solution.candidates


def test_one_and_a_half_branch_holds_for_all_gammas():
    for gamma in np.linspace(-math.pi, math.pi, 20):
        assert residuals_level3(GateTarget(gamma_g=float(gamma)), 1.5, 1.0).norm() < 1e-13


def test_candidates_are_tie_break_ordered():
    solution = solve_xi(GateTarget(gamma_g=-math.pi / 2), 3)
    norms = [max(abs(v) for v in candidate) for candidate in solution.candidates]
    assert norms == sorted(norms)
    assert solution.xi == pytest.approx(solution.candidates[0], abs=1e-8)


def test_level3_solution_keeps_full_precision():
    target = GateTarget(theta0=0.9, phi0=0.4, gamma_g=1.1)
    solution = solve_xi(target, 3)
    if not solution.converged:
        pytest.skip("sin solución de nivel 3 para este objetivo")
    recomputed = residuals_level3(target, *solution.xi, form="dressed").norm()
    assert recomputed == pytest.approx(solution.residual_norm, abs=1e-15)
    assert recomputed < 1e-10


@pytest.mark.parametrize("target", [NAMED_GATES["H"], GateTarget(theta0=0.9, phi0=0.4, gamma_g=1.1)])
def test_unconverged_level3_stays_in_the_start_box(target):
    settings = SolverSettings(max_iterations=20, grid_step=1.5, grid_bound=1.5, level3_tol=1e-300)
    solution = solve_xi(target, 3, settings)
    assert not solution.converged
    assert max(abs(v) for v in solution.xi) <= settings.grid_bound
    recomputed = residuals_level3(target, *solution.xi, form="dressed").norm()
    assert recomputed == pytest.approx(solution.residual_norm, abs=1e-15)


@pytest.mark.parametrize("target", [NAMED_GATES["S"], NAMED_GATES["H"], GateTarget(theta0=0.9, phi0=0.4, gamma_g=1.1)])
def test_converged_solutions_close_both_curves(target):
    solution = solve_xi(target, 3)
    if not solution.converged:
        pytest.xfail(f"sin solución de nivel 3 para {target.describe()}: residuo {solution.residual_norm:.3e}")
    sequence = build_geometric(target, solution.level_spec)
    for channel in ErrorChannel:
        assert error_curve_direct(sequence, channel).distance_bloch < 1e-7


def test_solve_rejects_unknown_level():
    with pytest.raises(InvalidArgumentError):
        solve_xi(NAMED_GATES["S"], 4)


def test_x_gate_convention_at_published_parameters():
    result = resolve_x_gate_convention()
    assert len(result.scanned) == 16
    assert result.best.residual_norm == min(check.residual_norm for check in result.scanned)
    assert result.best.target.theta0 == pytest.approx(math.pi / 2)
    if not result.satisfied:
        pytest.xfail(result.describe())
    assert result.best.residual_norm < 1e-10


def test_level5_solution_is_sixth_order(level5_s_solution, level5_s_sequence):
    solution = level5_s_solution
    assert solution.level == 5
    assert solution.converged
    assert solution.residual_norm < 1e-7
    assert solution.multistart_seed["sampler"] == "halton"
    assert solution.multistart_seed["starts"] == 200
    assert len(solution.xi) == 4
    assert max(abs(v) for v in solution.xi) <= 3.0
    assert solution.candidates[0] == pytest.approx(solution.xi, abs=1e-8)
    terms = magnus_terms(level5_s_sequence, order=2)
    assert np.linalg.norm(terms.a2_vectors["rabi-rabi"]) < 1e-7
    assert np.linalg.norm(terms.a2_vectors["detuning-detuning"]) < 1e-7
    assert measured_order(NAMED_GATES["S"], solution.level_spec) >= LEVEL5_MIN_ORDER


def test_level5_needs_a_parity_pattern():
    with pytest.raises(InvalidArgumentError):
        solve_xi(NAMED_GATES["S"], 5, SolverSettings(parity_patterns=[]))
