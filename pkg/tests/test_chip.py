import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants

from kinetic_cpw.chip import (
    MAX_REJECTIONS,
    ChipDesign,
    Resonance,
    ThicknessModel,
    _draw_thicknesses,
    chip_resonances,
    linear_fit_mse,
    optimize_geometry,
    run_monte_carlo,
    segmented_grid,
    synthesize_s21,
)
from kinetic_cpw.em import CpwGeometry, Material
from kinetic_cpw.errors import DomainError
from kinetic_cpw.fit.resonance import S21Trace, find_dips

TARGETS_MHZ = [6595, 6625, 6655, 6685, 6715, 6745, 6775, 6805]


def brute_force_mse(y, n_grid=401):
    """Grid search over (slope, intercept) around a coarse bracket."""
    x = np.arange(len(y), dtype=float)
    slopes = np.linspace(-3 * np.ptp(y) - 1, 3 * np.ptp(y) + 1, n_grid)
    best = (np.inf, None, None)
    for _ in range(4):  # successive refinement
        intercepts = np.linspace(np.min(y) - np.ptp(y) * 3 - 1, np.max(y) + np.ptp(y) * 3 + 1, n_grid) if best[1] is None else \
            np.linspace(best[2] - span_b, best[2] + span_b, n_grid)
        pred = slopes[:, None, None] * x + intercepts[None, :, None]
        mse = ((pred - y) ** 2).mean(axis=-1)
        i, j = np.unravel_index(np.argmin(mse), mse.shape)
        best = (mse[i, j], slopes[i], intercepts[j])
        span_a = 4 * (slopes[1] - slopes[0])
        span_b = 4 * (intercepts[1] - intercepts[0])
        slopes = np.linspace(best[1] - span_a, best[1] + span_a, n_grid)
    return best


@pytest.fixture
def chip(tantalum):
    return ChipDesign(8, 6.7e9, 30e6, CpwGeometry(w=16e-6, s=16e-6, d=100e-9), tantalum)


def test_linear_targets_have_zero_mse():
    slope, intercept, mse = linear_fit_mse(TARGETS_MHZ)
    assert mse == pytest.approx(0.0, abs=1e-18)
    assert slope == pytest.approx(30.0, rel=1e-14)
    assert intercept == pytest.approx(6595.0, rel=1e-14)


def test_hand_worked_example():
    slope, intercept, mse = linear_fit_mse([0, 0, 3, 0])
    assert slope == pytest.approx(0.3, rel=1e-14)
    assert intercept == pytest.approx(0.3, rel=1e-14)
    assert mse == pytest.approx(1.575, rel=1e-14)
    b_mse, b_slope, b_int = brute_force_mse(np.array([0, 0, 3, 0.0]))
    assert b_mse == pytest.approx(1.575, rel=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_mse_matches_brute_force(seed):
    y = np.random.default_rng(seed).normal(0, 5, 8)
    slope, intercept, mse = linear_fit_mse(y)
    b_mse, b_slope, b_int = brute_force_mse(y)
    assert mse <= b_mse + 1e-12
    assert b_mse == pytest.approx(mse, rel=1e-6, abs=1e-9)
    assert b_slope == pytest.approx(slope, abs=1e-3)


@settings(max_examples=100, deadline=None)
@given(
    y=st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=20),
    c=st.floats(-1e4, 1e4),
)
def test_mse_shift_invariant(y, c):
    y = np.array(y)
    _, b1, m1 = linear_fit_mse(y)
    _, b2, m2 = linear_fit_mse(y + c)
    assert m2 == pytest.approx(m1, rel=1e-6, abs=1e-6)
    assert b2 - b1 == pytest.approx(c, rel=1e-9, abs=1e-6)
    assert m1 >= 0


def test_mse_rejects_short_input():
    with pytest.raises(ValueError):
        linear_fit_mse([1.0])


def test_target_frequencies_and_validation(chip, tantalum):
    assert np.allclose(chip.target_frequencies / 1e6, TARGETS_MHZ, rtol=0, atol=1e-9)
    with pytest.raises(DomainError):
        ChipDesign(1, 6.7e9, 30e6, chip.geom, tantalum)
    with pytest.raises(DomainError):
        ChipDesign(8, 6.7e9, 0.0, chip.geom, tantalum)


def test_design_hits_targets(chip):
    f = chip.frequencies(chip.geom.d)
    assert np.allclose(f, chip.target_frequencies, rtol=1e-12, atol=0)
    assert linear_fit_mse(f / 1e6)[2] == pytest.approx(0.0, abs=1e-12)


def test_no_disorder_gives_zero(chip):
    res = run_monte_carlo(chip, ThicknessModel(100e-9), 50, seed=1)
    assert np.all(res.mse_samples < 1e-12)
    assert np.all(np.abs(res.delta_f_samples) < 1e-9)


def test_determinism_and_parallel_equivalence(chip):
    tm = ThicknessModel.relative(100e-9, 0.02)
    a = run_monte_carlo(chip, tm, 300, seed=42)
    b = run_monte_carlo(chip, tm, 300, seed=42)
    c = run_monte_carlo(chip, tm, 300, seed=42, workers=3)
    assert np.array_equal(a.mse_samples, b.mse_samples)
    assert np.array_equal(a.mse_samples, c.mse_samples)
    assert np.array_equal(a.delta_f_samples, c.delta_f_samples)
    d = run_monte_carlo(chip, tm, 300, seed=43)
    assert not np.array_equal(a.mse_samples, d.mse_samples)


def test_trial_prefix_is_stable(chip):
    tm = ThicknessModel.relative(100e-9, 0.02)
    short = run_monte_carlo(chip, tm, 10, seed=7)
    long = run_monte_carlo(chip, tm, 100, seed=7)
    assert np.array_equal(short.mse_samples, long.mse_samples[:10])


def test_gradient_only_is_deterministic(chip):
    tm = ThicknessModel(100e-9, sigma_d=0.0, gradient_d=1e-9)
    res = run_monte_carlo(chip, tm, 10_000, seed=3)
    f = chip.frequencies(tm.mean_profile(8))
    _, _, mse = linear_fit_mse(f / 1e6)
    shift = np.mean((f - chip.target_frequencies) / 1e6)
    assert np.all(res.mse_samples == mse)
    assert np.all(res.delta_f_samples == shift)


def test_uniform_thickness_offset_keeps_comb_linear(chip):
    # every frequency scales by the same factor, so the comb stays linear
    f = chip.frequencies(110e-9)
    assert linear_fit_mse(f / 1e6)[2] == pytest.approx(0.0, abs=1e-9)
    assert np.all(f > chip.target_frequencies)


def test_mse_decreases_with_thickness(chip):
    means = []
    for d in (100e-9, 200e-9, 300e-9):
        res = run_monte_carlo(chip, ThicknessModel.relative(d, 0.02), 2000, seed=11)
        means.append(res.mean_mse)
    assert means[0] > means[1] > means[2]


def test_rejection_sampling_bounds():
    rng = np.random.default_rng(0)
    d = _draw_thicknesses(rng, np.full(1000, 50e-9), 40e-9, 1e-6)
    assert np.all(d > 0) and np.all(d < 1e-6)
    with pytest.raises(DomainError):
        _draw_thicknesses(np.random.default_rng(0), np.array([-1.0]), 1e-12, 1e-6)
    assert MAX_REJECTIONS == 100


def test_optimizer_ranks_path(tantalum):
    ranked = optimize_geometry(16e-6, 100e-9, tantalum, grid_step=1e-6, s_min=3e-6, s_max=7e-6)
    pairs = [(round(s * 1e6), round(w * 1e6)) for s, w, _ in ranked]
    assert pairs == [(3, 10), (4, 8), (5, 6), (6, 4), (7, 2)]


def test_optimizer_single_point(tantalum):
    ranked = optimize_geometry(16e-6, 100e-9, tantalum, grid_step=1e-6, s_min=5e-6, s_max=5e-6)
    assert len(ranked) == 1 and ranked[0][0] == pytest.approx(5e-6)


def test_optimizer_ranking_independent_of_mu0(tantalum, monkeypatch):
    base = [(s, w) for s, w, _ in optimize_geometry(16e-6, 100e-9, tantalum, 1e-6, 1e-6)]
    monkeypatch.setattr(constants, "mu_0", constants.mu_0 * 3.7)
    scaled = [(s, w) for s, w, _ in optimize_geometry(16e-6, 100e-9, tantalum, 1e-6, 1e-6)]
    assert base == scaled


def test_optimizer_no_feasible_point(tantalum):
    with pytest.raises(DomainError):
        optimize_geometry(16e-6, 100e-9, tantalum, 1e-6, s_min=9e-6)


def test_empty_product_is_unity():
    f = np.linspace(6e9, 7e9, 11)
    assert np.array_equal(synthesize_s21(None, f, resonances=[]), np.ones(11, dtype=complex))


def test_on_resonance_depth():
    r = Resonance(6.636e9, 2.5e6, 0.7e6, 0.0)
    z = synthesize_s21(None, [r.f0], resonances=[r])
    q = 1 / (1 / 2.5e6 + 1 / 0.7e6)
    assert z[0] == pytest.approx(1 - q / 0.7e6, rel=1e-14)
    assert z[0] == pytest.approx(1 - 2.5e6 / (2.5e6 + 0.7e6), rel=1e-12)


def test_eight_dips(chip):
    res = chip_resonances(chip, qi=2.5e6, phi=0.1)
    f = segmented_grid(res, 20, 201, background=np.linspace(6.55e9, 6.85e9, 2000))
    trace = S21Trace(f, synthesize_s21(None, f, res))
    dips = find_dips(trace)
    assert len(dips) == 8
    assert np.allclose([d[0] for d in dips], chip.target_frequencies, rtol=2e-6)


def test_close_resonances_warn():
    a, b = Resonance(6e9, 1e5, 1e5), Resonance(6e9 + 1e5, 1e5, 1e5)
    with pytest.warns(RuntimeWarning):
        synthesize_s21(None, np.linspace(5.99e9, 6.01e9, 100), resonances=[a, b])


def test_noise_is_seeded(chip):
    f = np.linspace(6.5e9, 6.9e9, 500)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = synthesize_s21(chip, f, qi=1e6, noise_sigma=0.01, seed=5)
        b = synthesize_s21(chip, f, qi=1e6, noise_sigma=0.01, seed=5)
    assert np.array_equal(a, b)
