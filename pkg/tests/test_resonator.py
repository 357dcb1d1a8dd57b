import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants

from kinetic_cpw.em import CpwGeometry, Material, transmission_line_params
from kinetic_cpw.errors import DomainError
from kinetic_cpw.resonator import (
    ResonatorModel,
    frequency_shift,
    quarter_wave_frequency,
    solve_length,
    thickness_sensitivity,
)

PATH = [(7, 2), (6, 4), (5, 6), (4, 8), (3, 10)]


def test_length_without_kinetic(geom_3_10, tantalum):
    model = ResonatorModel.from_target(geom_3_10, tantalum, 6.7e9, kinetic=False)
    closed_form = constants.c / (4 * 6.7e9 * math.sqrt(5.775))
    assert model.geom.l == pytest.approx(closed_form, rel=1e-12)
    assert model.geom.l == pytest.approx(4.6549e-3, rel=1e-4)
    assert model.f_full == model.f_geometric == pytest.approx(6.7e9, rel=1e-12)
    assert frequency_shift(model) == 0.0


def test_kinetic_aware_length_shrinks_by_root_of_complement(tantalum):
    x = 0.145
    tl = transmission_line_params(CpwGeometry(w=10e-6, s=3e-6, d=3e-7), tantalum, kinetic=False)
    ltot = tl.lm_per_len / (1 - x)
    ratio = solve_length(6.7e9, tl.c_per_len, ltot) / solve_length(6.7e9, tl.c_per_len, tl.lm_per_len)
    assert ratio == pytest.approx(math.sqrt(1 - x), rel=1e-12)
    assert ratio == pytest.approx(0.9247, abs=1e-4)


def test_shift_for_minus_500_mhz():
    x = 1 - (6.2 / 6.7) ** 2
    assert x == pytest.approx(0.14368, abs=1e-5)
    assert 6.7e9 * math.sqrt(1 - x) - 6.7e9 == pytest.approx(-500e6, rel=1e-12)


def test_doubling_length_halves_frequency():
    f1 = quarter_wave_frequency(4e-3, 1.7e-10, 4.4e-7)
    f2 = quarter_wave_frequency(8e-3, 1.7e-10, 4.4e-7)
    assert f2 == pytest.approx(f1 / 2, rel=1e-15)


@settings(max_examples=200, deadline=None)
@given(f=st.floats(1e8, 5e10), c=st.floats(1e-11, 1e-9), ltot=st.floats(1e-8, 1e-5))
def test_solve_length_round_trip(f, c, ltot):
    assert quarter_wave_frequency(solve_length(f, c, ltot), c, ltot) == pytest.approx(f, rel=1e-12)


def test_non_positive_inputs():
    with pytest.raises(DomainError):
        solve_length(-1.0, 1e-10, 1e-7)
    with pytest.raises(DomainError):
        quarter_wave_frequency(0.0, 1e-10, 1e-7)


def test_build_requires_length(geom_3_10, tantalum):
    with pytest.raises(DomainError):
        ResonatorModel.build(geom_3_10, tantalum)


@pytest.mark.parametrize("s,w", PATH + [(16, 16)])
@pytest.mark.parametrize("d", [100e-9, 200e-9, 300e-9])
def test_full_over_geometric_ratio(tantalum, s, w, d):
    model = ResonatorModel.from_target(CpwGeometry(w=w * 1e-6, s=s * 1e-6, d=d), tantalum, 6.7e9)
    assert model.f_full / model.f_geometric == pytest.approx(math.sqrt(1 - model.kinetic_fraction), rel=1e-12)
    assert model.f_full < model.f_geometric
    assert model.f_geometric == pytest.approx(1 / (4 * model.geom.l * math.sqrt(model.tl.c_per_len * model.tl.lm_per_len)), rel=1e-15)


def test_kinetic_aware_design_hits_target(geom_3_10, tantalum):
    model = ResonatorModel.from_target(geom_3_10, tantalum, 6.7e9, kinetic_aware=True)
    assert model.f_full == pytest.approx(6.7e9, rel=1e-12)


def test_optimized_shift_much_smaller(tantalum):
    before = ResonatorModel.from_target(CpwGeometry(w=2e-6, s=7e-6, d=100e-9), tantalum, 6.7e9)
    after = ResonatorModel.from_target(CpwGeometry(w=10e-6, s=3e-6, d=300e-9), tantalum, 6.7e9)
    assert abs(frequency_shift(after)) < abs(frequency_shift(before)) / 5


def test_sensitivity_zero_without_kinetic(geom_3_10, tantalum):
    model = ResonatorModel.from_target(geom_3_10, tantalum, 6.7e9, kinetic=False)
    assert thickness_sensitivity(model) == 0.0


def test_sensitivity_larger_for_thin_film(tantalum):
    thin = ResonatorModel.from_target(CpwGeometry(w=16e-6, s=16e-6, d=100e-9), tantalum, 6.7e9)
    thick = ResonatorModel.from_target(CpwGeometry(w=16e-6, s=16e-6, d=300e-9), tantalum, 6.7e9)
    assert thickness_sensitivity(thin) > thickness_sensitivity(thick) > 0


def test_sensitivity_against_five_point_stencil(geom_3_10, tantalum):
    model = ResonatorModel.from_target(geom_3_10.with_thickness(100e-9), tantalum, 6.7e9)
    d, h = model.geom.d, 1e-3 * model.geom.d
    f = [model.at_thickness(d + k * h).f_full for k in (-2, -1, 1, 2)]
    oracle = (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    assert thickness_sensitivity(model) == pytest.approx(oracle, rel=1e-4)


def _curvature(tantalum, s, w, d_grid):
    geom = CpwGeometry(w=w * 1e-6, s=s * 1e-6, d=d_grid[0])
    model = ResonatorModel.from_target(geom, tantalum, 6.7e9)
    slopes = np.array([thickness_sensitivity(model.at_thickness(d)) for d in d_grid])
    return slopes, np.diff(slopes)


@pytest.mark.parametrize("s,w", [(4, 8), (3, 10), (16, 16)])
def test_frequency_concave_in_thickness(tantalum, s, w):
    slopes, change = _curvature(tantalum, s, w, np.linspace(50e-9, 300e-9, 26))
    assert np.all(slopes > 0)
    assert np.all(change < 0)


@pytest.mark.xfail(strict=True, reason="kinetic-dominated lines give f ~ d^1.5 at small d, which is convex")
@pytest.mark.parametrize("s,w", [(7, 2), (6, 4), (5, 6)])
def test_frequency_concave_in_thickness_kinetic_dominated(tantalum, s, w):
    slopes, change = _curvature(tantalum, s, w, np.linspace(50e-9, 300e-9, 26))
    assert np.all(slopes > 0)
    assert np.all(change < 0)
