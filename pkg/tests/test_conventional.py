import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import exhaustive_binary_gain
from risscat.conventional import (PhaseConfiguration, ReceivedSignalModel, binary_sweep,
                                  build_channels, optimal_phases, quantize_1bit, received_gain,
                                  reradiation_channels, steering_vector)
from risscat.geometry import ArrayLayout, PlaneWaveDirection, element_positions


complex_vec = st.integers(1, 10).flatmap(
    lambda n: st.lists(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3,
                                          allow_nan=False, allow_infinity=False),
                       min_size=n, max_size=n))


@given(complex_vec, st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
@settings(max_examples=60, deadline=None)
def test_binary_sweep_with_offset_is_exact(d, offset):
    d = np.array(d)
    s = binary_sweep(d, offset)
    assert set(np.unique(s)) <= {-1.0, 1.0}
    assert abs(offset + s @ d) == pytest.approx(exhaustive_binary_gain(d, offset), rel=1e-12, abs=1e-9)


@given(complex_vec)
@settings(max_examples=60, deadline=None)
def test_optimum_dominates_any_phase_choice(v):
    g = np.array(v)
    h = np.conj(g[::-1])
    best = abs(received_gain(h, g, optimal_phases(g, h)))
    rng = np.random.default_rng(len(v))
    for _ in range(20):
        phi = rng.uniform(0, 2 * np.pi, g.size)
        assert abs(received_gain(h, g, phi)) <= best * (1 + 1e-12)


@given(complex_vec, st.floats(-np.pi, np.pi))
@settings(max_examples=40, deadline=None)
def test_common_rotation_of_g_shifts_phases(v, alpha):
    g = np.array(v)
    h = g[::-1] * 1j
    p0 = optimal_phases(g, h).phases
    p1 = optimal_phases(g * np.exp(1j * alpha), h).phases
    diff = np.angle(np.exp(1j * (p1 - p0 + alpha)))
    np.testing.assert_allclose(diff, 0, atol=1e-9)


def test_n1_phase_example():
    # angle(h) - angle(g) co-phases the single term
    cfg = optimal_phases(np.array([np.exp(0.3j)]), np.array([np.exp(1.1j)]))
    assert cfg.phases[0] == pytest.approx(0.8)


def test_nearest_quantizer_snaps_and_breaks_ties_to_zero():
    g = np.ones(4, dtype=complex)
    h = np.exp(1j * np.array([0.2, 3.0, np.pi / 2, -np.pi / 2]))
    ph = quantize_1bit(g, h, "nearest").phases
    np.testing.assert_array_equal(ph, [0.0, np.pi, 0.0, 0.0])


def test_zero_channel_entry_rejected():
    with pytest.raises(ValueError, match="zero"):
        optimal_phases(np.array([1, 0j]), np.array([1, 1j]))
    with pytest.raises(ValueError, match="mode"):
        quantize_1bit(np.ones(2), np.ones(2), "round")


def test_length_mismatch_rejected():
    with pytest.raises(ValueError, match="length"):
        received_gain(np.ones(3), np.ones(2), np.zeros(2))


def test_phase_configuration_wraps():
    cfg = PhaseConfiguration([-np.pi, 2 * np.pi, -1e-18])
    assert np.all((cfg.phases >= 0) & (cfg.phases < 2 * np.pi))
    assert cfg.phases[0] == pytest.approx(np.pi)


def test_steering_vector_matches_plane_wave_phase():
    lay = ArrayLayout(4, 3, 0.5, 1.0)
    d = PlaneWaveDirection(25, -40)
    k = 2 * np.pi
    expect = np.exp(1j * k * element_positions(lay) @ d.unit_vector())
    np.testing.assert_allclose(steering_vector(lay, d), expect, atol=1e-12)


def test_channels_carry_pathloss():
    lay = ArrayLayout(2, 2, 0.5, 1.0)
    g, h = build_channels(lay, PlaneWaveDirection(0, 0), PlaneWaveDirection(30, 0), 0.25, 4.0)
    np.testing.assert_allclose(np.abs(g.gains), 0.5)
    np.testing.assert_allclose(np.abs(h.gains), 2.0)
    with pytest.raises(ValueError):
        build_channels(lay, PlaneWaveDirection(0, 0), PlaneWaveDirection(0, 0), 0.0, 1.0)


def test_reradiation_optimum_steers_toward_departure():
    lay = ArrayLayout(12, 1, 0.5, 1.0)
    aoa, aod = PlaneWaveDirection(-20, 0), PlaneWaveDirection(40, 0)
    g, h = reradiation_channels(lay, aoa, aod, 1.0, 1.0)
    phi = optimal_phases(g, h).phases
    pos = element_positions(lay)
    k = 2 * np.pi
    cur = np.exp(1j * (k * pos @ aoa.unit_vector() + phi))
    az = np.arange(-90, 91)
    level = [abs(np.sum(cur * np.exp(1j * k * pos @ PlaneWaveDirection(a, 0).unit_vector()))) for a in az]
    assert az[int(np.argmax(level))] == 40


def test_snr():
    m = ReceivedSignalModel(transmit_symbol=2.0, noise_power=0.5)
    assert m.snr(1j) == pytest.approx(8.0)
    assert ReceivedSignalModel(noise_power=0.0).snr(1.0) == np.inf
