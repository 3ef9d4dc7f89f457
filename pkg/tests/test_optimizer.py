import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import rlc_reactance
from risscat.constants import C_MAX_F, C_MIN_F, FREQUENCY_HZ, INDUCTANCE_H, R0_OHM
from risscat.impedance import (ImpedanceSet, LoadModel, ModelMismatchWarning, end_to_end_channel,
                               load_impedance_rlc)
from risscat.optimizer import (OptimizerCoefficients, compute_coefficients, optimal_loads,
                               optimize_loads, reactance_to_capacitance)

F = FREQUENCY_HZ
MODEL = LoadModel(R0_OHM, INDUCTANCE_H, C_MIN_F, C_MAX_F)
X_LO, X_HI = MODEL.reactance_range(F)


def random_diagonal_set(rng, n, z_rt=0j):
    z_ss = np.diag(rng.uniform(1, 30, n) + 1j * rng.uniform(100, 400, n))
    z_st = rng.normal(size=n) + 1j * rng.normal(size=n)
    z_rs = rng.normal(size=n) + 1j * rng.normal(size=n)
    return ImpedanceSet(z_ss=z_ss, z_st=z_st, z_rs=z_rs, z_rt=z_rt)


def test_coefficient_examples():
    zero = ImpedanceSet(z_ss=np.eye(3), z_st=np.zeros(3), z_rs=np.zeros(3), z_rt=0.7j)
    c = compute_coefficients(zero, 1.0)
    assert np.all(c.a == 0) and c.b == 0.7j
    one = ImpedanceSet(z_ss=[[0.3 + 5j]], z_st=[1.0], z_rs=[1.0], z_rt=2.0)
    c = compute_coefficients(one, 0.2)
    assert c.a[0] == pytest.approx(1.0) and c.b == pytest.approx(1.0)


def test_coefficients_use_real_part_of_self_impedance():
    imps = ImpedanceSet(z_ss=[[-3 + 50j]], z_st=[2j], z_rs=[1.0])
    c = compute_coefficients(imps, 1.0)
    assert c.a[0] == pytest.approx(2j / (2 * 2.0))


def test_coupled_matrix_rejected_or_reduced():
    imps = ImpedanceSet(z_ss=[[1, 0.1], [0.1, 1]], z_st=[1, 1], z_rs=[1, 1])
    with pytest.raises(ValueError, match="diagonal"):
        compute_coefficients(imps, 1.0)
    with pytest.warns(ModelMismatchWarning):
        c = compute_coefficients(imps, 1.0, strict=False)
    assert c.a == pytest.approx([0.25, 0.25])


def test_zero_denominator_rejected():
    imps = ImpedanceSet(z_ss=[[-1 + 1j]], z_st=[1], z_rs=[1])
    with pytest.raises(ValueError, match="vanishes"):
        compute_coefficients(imps, 1.0)


def test_coefficient_invariant_checked():
    with pytest.raises(ValueError, match="b must equal"):
        OptimizerCoefficients(a=[1.0, 2.0], b=0.0, z_rt=0.0)


def test_opposed_phase_gives_resonant_load():
    # angle(a) = angle(b) + pi makes 2 theta = 0 and the load |r0 + X| - z_ss
    z_ss = np.array([4 + 30j, 2 - 10j])
    coeffs = OptimizerCoefficients(a=[1 + 1j, 2 + 2j], b=-3 - 3j)
    loads = optimal_loads(coeffs, 1.0, z_ss)
    np.testing.assert_allclose(loads, np.abs(1.0 + z_ss.real) - z_ss)


def test_aligned_phase_is_unbounded():
    # angle(a) = angle(b): the optimum asks for an open circuit
    coeffs = OptimizerCoefficients(a=[1 + 0j], b=1 + 0j, z_rt=2 + 0j)
    loads = optimal_loads(coeffs, 2.0, [3 + 1j])
    assert np.isinf(loads[0].imag) and loads[0].real == pytest.approx(2.0)


def test_closed_form_reaches_bound():
    rng = np.random.default_rng(0)
    for n in (1, 3, 16):
        imps = random_diagonal_set(rng, n, z_rt=rng.normal() + 1j * rng.normal())
        c = compute_coefficients(imps, R0_OHM)
        loads = optimal_loads(c, R0_OHM, np.diag(imps.z_ss))
        np.testing.assert_allclose(loads.real, R0_OHM)
        assert abs(end_to_end_channel(imps, loads)) == pytest.approx(c.best_gain, rel=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 8))
@settings(max_examples=30, deadline=None)
def test_single_reactance_perturbation_never_helps(seed, n):
    rng = np.random.default_rng(seed)
    imps = random_diagonal_set(rng, n, z_rt=rng.normal())
    c = compute_coefficients(imps, R0_OHM)
    loads = optimal_loads(c, R0_OHM, np.diag(imps.z_ss))
    best = abs(end_to_end_channel(imps, loads))
    for i in range(n):
        for dx in (1j, -1j):
            trial = loads.copy()
            trial[i] += dx
            assert abs(end_to_end_channel(imps, trial)) <= best + 1e-9


def test_reactance_to_capacitance_examples():
    c = reactance_to_capacitance(-220.0, MODEL, F)
    assert c == pytest.approx(0.02704e-12, rel=5e-4)
    assert rlc_reactance(c, INDUCTANCE_H, F) == pytest.approx(-220.0, abs=1e-6)
    assert reactance_to_capacitance(-300.0, MODEL, F) == C_MIN_F
    assert reactance_to_capacitance(0.0, MODEL, F) == C_MAX_F
    # at or above 2 pi f L no capacitance works; the higher-reactance bound is closer
    w_l = 2 * np.pi * F * INDUCTANCE_H
    assert reactance_to_capacitance(w_l, MODEL, F) == C_MAX_F
    assert reactance_to_capacitance(np.inf, MODEL, F) == C_MAX_F
    assert reactance_to_capacitance(-np.inf, MODEL, F) == C_MIN_F
    with pytest.raises(ValueError):
        reactance_to_capacitance(-220.0, MODEL, 0.0)


@given(st.floats(X_LO, X_HI))
def test_round_trip_on_realizable_branch(x):
    c = reactance_to_capacitance(x, MODEL, F)
    assert load_impedance_rlc(c, MODEL, F).imag == pytest.approx(x, abs=1e-6)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_clipping_monotone_and_idempotent(x1, x2):
    lo, hi = sorted((x1, x2))
    c_lo = reactance_to_capacitance(lo, MODEL, F)
    c_hi = reactance_to_capacitance(hi, MODEL, F)
    w_l = 2 * np.pi * F * INDUCTANCE_H
    if hi < w_l:
        assert c_lo <= c_hi
    x_c = load_impedance_rlc(c_lo, MODEL, F).imag
    assert reactance_to_capacitance(x_c, MODEL, F) == pytest.approx(c_lo, rel=1e-12)


def _endpoint_terms(imps):
    zd = np.diag(imps.z_ss)
    c = imps.z_st * imps.z_rs
    return [-c / (zd + R0_OHM + 1j * x) for x in (X_LO, X_HI)]


def test_one_bit_sweep_is_exhaustive_optimum():
    rng = np.random.default_rng(4)
    for n in range(1, 9):
        imps = random_diagonal_set(rng, n, z_rt=0.3 * rng.normal())
        t_lo, t_hi = _endpoint_terms(imps)
        best = max(abs(imps.z_rt + sum(np.where(np.array(p), t_lo, t_hi)))
                   for p in itertools.product((True, False), repeat=n))
        sol = optimize_loads(imps, MODEL, F, "one_bit_sweep")
        assert abs(sol.h_diagonal) == pytest.approx(best, rel=1e-12)
        assert set(np.round(sol.capacitances / 1e-15, 6)) <= {25.0, 30.0}


def test_quantizer_ordering_and_feasibility():
    rng = np.random.default_rng(8)
    for _ in range(10):
        imps = random_diagonal_set(rng, 12)
        got = {q: optimize_loads(imps, MODEL, F, q) for q in
               ("ideal", "one_bit_nearest", "one_bit_sweep", "capacitance_range")}
        clip = optimize_loads(imps, MODEL, F, "capacitance_range", range_rule="clip")
        h = {q: abs(s.h_diagonal) for q, s in got.items()}
        assert h["ideal"] >= h["capacitance_range"] - 1e-15
        assert h["capacitance_range"] >= max(h["one_bit_sweep"], abs(clip.h_diagonal)) - 1e-15
        assert h["one_bit_sweep"] >= h["one_bit_nearest"] - 1e-15
        for s in (got["capacitance_range"], clip, got["one_bit_sweep"]):
            assert np.all((s.capacitances >= C_MIN_F * (1 - 1e-12)) & (s.capacitances <= C_MAX_F * (1 + 1e-12)))
            np.testing.assert_allclose(s.loads, load_impedance_rlc(s.capacitances, MODEL, F), rtol=1e-9)
            assert s.h_diagonal == pytest.approx(end_to_end_channel(imps, s.loads), rel=1e-12)


def test_range_quantizer_close_to_dense_grid_for_two_elements():
    rng = np.random.default_rng(21)
    xs = np.linspace(X_LO, X_HI, 401)
    for _ in range(10):
        imps = random_diagonal_set(rng, 2, z_rt=0.2 * rng.normal())
        zd = np.diag(imps.z_ss)
        t = [-imps.z_st[i] * imps.z_rs[i] / (zd[i] + R0_OHM + 1j * xs) for i in range(2)]
        dense = np.abs(imps.z_rt + t[0][:, None] + t[1][None, :]).max()
        got = abs(optimize_loads(imps, MODEL, F, "capacitance_range").h_diagonal)
        assert got >= dense * (1 - 1e-6)


def test_clip_rule_realises_clipped_optimum():
    rng = np.random.default_rng(2)
    imps = random_diagonal_set(rng, 5)
    c = compute_coefficients(imps, R0_OHM)
    ideal = optimal_loads(c, R0_OHM, np.diag(imps.z_ss))
    sol = optimize_loads(imps, MODEL, F, "capacitance_range", range_rule="clip")
    np.testing.assert_allclose(sol.capacitances, reactance_to_capacitance(ideal.imag, MODEL, F), rtol=1e-12)


def test_coupled_input_warns():
    imps = ImpedanceSet(z_ss=[[10 + 200j, 1], [1, 10 + 200j]], z_st=[1, 1j], z_rs=[1, 1])
    with pytest.warns(ModelMismatchWarning):
        optimize_loads(imps, MODEL, F, "one_bit_sweep")


def test_unknown_selectors():
    imps = ImpedanceSet(z_ss=[[10 + 200j]], z_st=[1], z_rs=[1])
    with pytest.raises(ValueError, match="quantizer"):
        optimize_loads(imps, MODEL, F, "two_bit")
    with pytest.raises(ValueError, match="range rule"):
        optimize_loads(imps, MODEL, F, range_rule="round")
