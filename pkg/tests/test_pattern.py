import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import array_factor_direct
from risscat.constants import FREQUENCY_HZ, wavelength
from risscat.geometry import ArrayLayout, PlaneWaveDirection, element_positions
from risscat.impedance import ImpedanceSet, LoadModel
from risscat.pattern import (GridSpec, PatternGrid, RisConfiguration, Surrogate, detect_lobes,
                             induced_currents, scattered_pattern)
from risscat.scenario import parse_scenario, reference_document

LAM = wavelength(FREQUENCY_HZ)
K = 2 * np.pi / LAM


def small_scenario(n=6, **extra):
    doc = reference_document("small", (0, 0), (45, 0), "conventional", "one_bit_nearest")
    doc["array"].update(n_x=n, n_z=n)
    doc.update(extra)
    return parse_scenario(doc)


def test_grid_spec_validation_and_axes():
    g = GridSpec(step_deg=2.0, azimuth_range_deg=(-10, 10), elevation_range_deg=(0, 4))
    np.testing.assert_allclose(g.azimuth, np.arange(-10, 11, 2))
    assert g.elevation.size == 3
    with pytest.raises(ValueError, match="divide"):
        GridSpec(step_deg=0.7)
    with pytest.raises(ValueError):
        GridSpec(azimuth_range_deg=(10, -10))
    with pytest.raises(ValueError):
        GridSpec(step_deg=0.0)


def test_pattern_grid_invariants():
    with pytest.raises(ValueError, match="shape"):
        PatternGrid([0, 1], [0], np.zeros((2, 2)))
    with pytest.raises(ValueError, match="finite"):
        PatternGrid([0, 1], [0], [[0, np.nan]])


def test_rows_are_elevation_major():
    g = PatternGrid([-1, 0, 1], [5, 6], [[1, 2, 3], [4, 5, 6]])
    rows = g.rows()
    np.testing.assert_array_equal(rows[:3, 1], 5)
    np.testing.assert_array_equal(rows[:, 0], [-1, 0, 1, -1, 0, 1])
    np.testing.assert_array_equal(rows[:, 2], [1, 2, 3, 4, 5, 6])


def test_single_element_is_isotropic():
    lay = ArrayLayout(1, 1, 0.5, LAM)
    grid = scattered_pattern([0.3 - 2j], lay, GridSpec(step_deg=5.0))
    assert np.ptp(grid.values) < 1e-12


def test_uniform_aperture_first_sidelobe():
    lay = ArrayLayout(64, 1, 0.5, LAM)
    spec = GridSpec(step_deg=0.05, elevation_range_deg=(0, 0))
    grid = scattered_pattern(np.ones(64), lay, spec)
    cut = grid.values[0] - grid.values[0].max()
    assert grid.peak()[:2] == (0.0, 0.0)
    # local maxima of the cut; the largest one off the main lobe is the first sidelobe
    inner = (cut[1:-1] > cut[:-2]) & (cut[1:-1] > cut[2:])
    side = np.sort(cut[1:-1][inner])[-2]
    # ULA of N elements: first sidelobe -> -13.26 dB as N grows
    assert side == pytest.approx(-13.26, abs=0.05)


def test_conjugate_phasing_steers_peak():
    lay = ArrayLayout(16, 16, 0.5, LAM)
    u = PlaneWaveDirection(45, 0).unit_vector()
    cur = np.exp(-1j * K * element_positions(lay) @ u)
    az, el, _ = scattered_pattern(cur, lay, GridSpec(step_deg=1.0)).peak()
    assert abs(az - 45) <= 1 and abs(el) <= 1


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_peak_bounded_by_current_sum(seed):
    rng = np.random.default_rng(seed)
    lay = ArrayLayout(3, 2, 0.5, LAM)
    cur = rng.normal(size=6) + 1j * rng.normal(size=6)
    grid = scattered_pattern(cur, lay, GridSpec(step_deg=10.0), reference_db=3.0)
    assert grid.values.max() <= 20 * np.log10(np.abs(cur).sum()) - 3.0 + 1e-9
    # spot check against the explicit double sum
    assert grid.level_at(30, -20) == pytest.approx(
        20 * np.log10(array_factor_direct(cur, element_positions(lay), 30, -20, K)) - 3.0)


def _grid_with(fn, step=1.0):
    az = np.arange(-90, 90 + step, step)
    el = np.arange(-90, 90 + step, step)
    A, E = np.meshgrid(az, el)
    return PatternGrid(az, el, fn(A, E))


def test_detect_single_peak():
    grid = _grid_with(lambda a, e: -((a - 30) ** 2 + e**2) / 50)
    rep = detect_lobes(grid, PlaneWaveDirection(32, 1), PlaneWaveDirection(0, 0))
    assert (rep.intended.azimuth_deg, rep.intended.elevation_deg) == (30, 0)
    assert rep.gap_structural_minus_intended == pytest.approx(rep.specular.level_db - rep.intended.level_db)


def test_flat_grid_marks_mirror_present():
    grid = _grid_with(lambda a, e: np.zeros_like(a))
    rep = detect_lobes(grid, PlaneWaveDirection(45, 0), PlaneWaveDirection(0, 0))
    assert rep.intended.level_db == rep.specular.level_db == rep.mirror.level_db
    assert rep.mirror.present


def test_mirror_absent_when_six_db_down():
    def two_peaks(a, e):
        return np.maximum(-((a - 45) ** 2 + e**2), -6 - ((a + 45) ** 2 + e**2)) / 1.0
    rep = detect_lobes(_grid_with(two_peaks), PlaneWaveDirection(45, 0), PlaneWaveDirection(0, 0))
    assert rep.mirror.azimuth_deg == -45 and not rep.mirror.present
    assert rep.intended.level_db - rep.mirror.level_db == pytest.approx(6.0)


def test_window_outside_grid_rejected():
    grid = PatternGrid(np.arange(-10, 11), np.arange(-10, 11), np.zeros((21, 21)))
    with pytest.raises(ValueError, match="outside"):
        detect_lobes(grid, PlaneWaveDirection(45, 0), PlaneWaveDirection(0, 0))


def test_induced_currents_scalar_and_open_circuit():
    imps = ImpedanceSet(z_ss=[[2 + 3j]], z_st=[1j], z_rs=[1])
    assert induced_currents(imps, [4 - 1j])[0] == pytest.approx(-1j / (6 + 2j))
    big = induced_currents(imps, [1e12 * imps.z0])
    assert abs(big[0]) < 1e-12


def test_induced_currents_permutation_equivariant():
    rng = np.random.default_rng(1)
    n = 5
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    z = z + z.T + 10 * np.eye(n)
    zst = rng.normal(size=n) + 1j * rng.normal(size=n)
    loads = rng.uniform(1, 50, n) - 1j * rng.uniform(100, 200, n)
    perm = rng.permutation(n)
    base = induced_currents(ImpedanceSet(z, zst, zst), loads)
    permuted = induced_currents(ImpedanceSet(z[np.ix_(perm, perm)], zst[perm], zst[perm]), loads[perm])
    np.testing.assert_allclose(permuted, base[perm], rtol=1e-12)


def test_incidence_mismatch_detected():
    imps = ImpedanceSet(z_ss=[[2 + 3j]], z_st=[1j], z_rs=[1], meta={"incident": (0.0, 0.0)})
    with pytest.raises(ValueError, match="incidence"):
        induced_currents(imps, [50.0], PlaneWaveDirection(10, 0))


def test_phase_states_map_to_capacitance_bounds():
    m = LoadModel(5.2, 30e-12, 0.025e-12, 0.03e-12)
    cfg = RisConfiguration.from_phases([0, np.pi, 0.1, 3.0], m, FREQUENCY_HZ)
    np.testing.assert_array_equal(cfg.capacitances, [m.c_max, m.c_min, m.c_max, m.c_min])
    swapped = RisConfiguration.from_phases([0, np.pi], m, FREQUENCY_HZ, (m.c_min, m.c_max))
    np.testing.assert_array_equal(swapped.capacitances, [m.c_min, m.c_max])


def test_reflection_phase_of_open_and_matched_loads():
    cfg = RisConfiguration(loads=[complex(5, np.inf), 50.0, 50j])
    ph = cfg.reflection_phases(50.0)
    assert ph[0] == 0.0 and ph[1] == 0.0
    assert ph[2] == pytest.approx(np.pi / 2)


def test_matched_broadside_pattern_symmetric_in_azimuth():
    sc = small_scenario(6, grid={"step_deg": 2.0})
    sur = Surrogate(sc)
    b = PlaneWaveDirection(0, 0)
    imps = sur.impedance_set(b, b)
    grid = sur.pattern(np.full(imps.n, imps.z0, dtype=complex), b, b)
    v, mirrored = grid.values, grid.values[:, ::-1]
    # deep nulls sit at round-off level, where dB differences are meaningless
    live = np.minimum(v, mirrored) > -150
    np.testing.assert_allclose(v[live], mirrored[live], atol=1e-6)
    np.testing.assert_allclose(10 ** (v / 20), 10 ** (mirrored / 20), atol=1e-12)
    assert grid.peak()[2] == pytest.approx(0.0, abs=1e-12)
    assert grid.reference_db == sur.reference_db


def test_matched_pattern_peaks_at_specular_on_small_array():
    sc = small_scenario(8)
    sur = Surrogate(sc)
    inc = PlaneWaveDirection(-30, -60)
    imps = sur.impedance_set(inc, PlaneWaveDirection(45, 0))
    az, el, _ = sur.pattern(np.full(imps.n, imps.z0, dtype=complex), inc, PlaneWaveDirection(45, 0)).peak()
    assert abs(az - 30) <= 1 and abs(el - 60) <= 1
