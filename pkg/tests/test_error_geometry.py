import math

import numpy as np
import pytest

from udog_pulses.error_geometry import (
    ErrorChannel,
    endpoint_in_dressed_frame,
    error_curve_direct,
    error_curve_path,
    magnus_terms,
)
from udog_pulses.pulses import GridSpec, PulseSequence, PulseShape, Segment, bloch_path, propagate
from udog_pulses.schemes import LevelSpec, build_dynamical_euler, build_geometric
from udog_pulses.su2 import InvalidArgumentError, is_hermitian, pauli_decompose
from udog_pulses.targets import NAMED_GATES, GateTarget

SQRT2 = math.sqrt(2.0)
GRID = GridSpec(samples_per_segment=257, shaped_substeps=64)

LEVEL1_S = build_geometric(NAMED_GATES["S"])
LEVEL3_S = build_geometric(NAMED_GATES["S"], LevelSpec.level3(1.5, 1.0))


def test_level1_s_detuning_curve():
    curve = error_curve_direct(LEVEL1_S, ErrorChannel.DETUNING, GRID)
    assert np.array_equal(curve.points[0], np.zeros(3))
    assert curve.endpoint == pytest.approx([-SQRT2 / 2, 1 + SQRT2 / 2, 0.0], abs=1e-12)
    assert curve.distance_bloch == pytest.approx(2 * math.sqrt(2 + SQRT2), abs=1e-12)
    assert curve.distance_bloch == pytest.approx(3.6955, abs=0.01)
    assert not curve.closed


def test_level1_s_rabi_curve():
    curve = error_curve_direct(LEVEL1_S, ErrorChannel.RABI, GRID)
    expected = (math.pi / 2) * np.array([SQRT2 / 2 - 1, SQRT2 / 2, 0.0])
    assert curve.endpoint == pytest.approx(expected, abs=1e-12)
    assert curve.distance_bloch == pytest.approx(math.pi * math.sqrt(2 - SQRT2), abs=1e-12)
    assert curve.distance_bloch == pytest.approx(2.4044, abs=0.01)


@pytest.mark.parametrize("channel", list(ErrorChannel))
def test_level3_s_curves_close(channel):
    curve = error_curve_direct(LEVEL3_S, channel, GRID)
    assert curve.distance_bloch < 1e-8
    assert curve.closed
    assert curve.summary()["channel"] == channel.value


def test_curve_samples_start_at_zero_and_grow_monotonically_in_time():
    curve = error_curve_direct(LEVEL3_S, ErrorChannel.DETUNING, GRID)
    assert np.all(np.diff(curve.times) >= 0)
    assert curve.times[-1] == pytest.approx(LEVEL3_S.total_duration)
    assert len(curve.times) == len(curve.points)


def _sequences():
    sequences = [LEVEL1_S, LEVEL3_S, build_dynamical_euler(math.pi / 2)]
    rng = np.random.default_rng(2)
    for _ in range(3):
        target = GateTarget(
            theta0=float(rng.uniform(0, math.pi)),
            phi0=float(rng.uniform(-math.pi, math.pi)),
            gamma_g=float(rng.uniform(-math.pi, math.pi)),
        )
        sequences.append(build_geometric(target, LevelSpec.level3(*rng.uniform(-3, 3, size=2).tolist())))
    sequences.append(build_geometric(NAMED_GATES["H"], LevelSpec.level3(1.5, 1.0), PulseShape.sine_squared()))
    return sequences


@pytest.mark.parametrize("sequence", _sequences(), ids=lambda seq: seq.scheme)
@pytest.mark.parametrize("channel", list(ErrorChannel))
def test_direct_and_path_methods_agree(sequence, channel):
    direct = error_curve_direct(sequence, channel, GRID)
    path = bloch_path(propagate(sequence, grid=GRID))
    via_path = error_curve_path(path, sequence, channel, GRID)
    assert via_path.distance_half == pytest.approx(direct.distance_half, abs=1e-8)


def test_rabi_curve_stays_in_plane_for_z_rotations():
    path = bloch_path(propagate(LEVEL3_S, grid=GRID))
    curve = error_curve_path(path, LEVEL3_S, ErrorChannel.RABI, GRID)
    assert np.max(np.abs(curve.points[:, 2])) < 1e-12


def test_path_curve_rejects_a_foreign_grid():
    path = bloch_path(propagate(LEVEL1_S, grid=GRID))
    with pytest.raises(InvalidArgumentError):
        error_curve_path(path, LEVEL3_S, ErrorChannel.DETUNING, GRID)


def test_detuning_endpoint_has_no_z_component_in_the_dressed_frame():
    rng = np.random.default_rng(8)
    for _ in range(20):
        target = GateTarget(
            theta0=float(rng.uniform(0, math.pi)),
            phi0=float(rng.uniform(-math.pi, math.pi)),
            gamma_g=float(rng.uniform(-math.pi, math.pi)),
        )
        sequence = build_geometric(target, LevelSpec.level3(*rng.uniform(-3, 3, size=2).tolist()))
        terms = magnus_terms(sequence)
        for channel in ErrorChannel:
            dressed = endpoint_in_dressed_frame(terms.a1_vectors[channel], target)
            assert abs(dressed[2]) < 1e-9


def test_single_pulse_a1_matches_the_curve_endpoint():
    sequence = PulseSequence(scheme="single", segments=(Segment.from_area(math.pi, 0.3),))
    terms = magnus_terms(sequence)
    curve = error_curve_direct(sequence, ErrorChannel.DETUNING, GRID)
    assert pauli_decompose(terms.a1[ErrorChannel.DETUNING]).vector == pytest.approx(curve.endpoint, abs=1e-14)
    assert is_hermitian(terms.a1[ErrorChannel.RABI], tol=1e-10)


def test_closed_sequences_have_vanishing_first_order():
    terms = magnus_terms(LEVEL3_S)
    for channel in ErrorChannel:
        assert np.max(np.abs(terms.a1[channel])) < 1e-8


def test_level3_s_second_order_terms():
    terms = magnus_terms(LEVEL3_S, order=2)
    assert set(terms.a2) == {"rabi-rabi", "detuning-detuning", "rabi-detuning"}
    for matrix in terms.a2.values():
        assert is_hermitian(matrix, tol=1e-9)
    detuning = terms.a2_vectors["detuning-detuning"]
    rabi = terms.a2_vectors["rabi-rabi"]
    assert 0.5 * np.dot(detuning, detuning) == pytest.approx(1 - 1 / SQRT2, rel=1e-9)
    assert 0.5 * np.dot(rabi, rabi) == pytest.approx((2 - SQRT2) * math.pi**4 / 32, rel=1e-9)
    assert np.linalg.norm(detuning[:2]) < 1e-9
    assert np.linalg.norm(rabi[:2]) < 1e-9


def test_magnus_terms_rejects_unknown_order():
    with pytest.raises(InvalidArgumentError):
        magnus_terms(LEVEL1_S, order=3)


def test_shaped_detuning_curve_refines_to_the_square_result():
    square = error_curve_direct(LEVEL1_S, ErrorChannel.DETUNING, GRID)
    shaped_sequence = build_geometric(NAMED_GATES["S"], shape=PulseShape.sine_squared())
    shaped = error_curve_direct(shaped_sequence, ErrorChannel.DETUNING, GRID)
    # el área y el eje coinciden, pero el tiempo de exposición a la desintonía es distinto
    assert shaped.distance_bloch > 0
    assert not np.allclose(shaped.endpoint, square.endpoint)
    rabi_square = error_curve_direct(LEVEL1_S, ErrorChannel.RABI, GRID)
    rabi_shaped = error_curve_direct(shaped_sequence, ErrorChannel.RABI, GRID)
    assert rabi_shaped.endpoint == pytest.approx(rabi_square.endpoint, abs=1e-12)
