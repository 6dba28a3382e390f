"""Geometry, material laws, and interlayer resistance variants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermomesh.exceptions import DomainError, ValidationError
from thermomesh.mesh import (CERAMIC_RANGE, EPSILON_0, LINEAR_RANGE, VO2_RANGE,
                             ConstantR, IdealSwitch, MaterialSet, MeshSpec,
                             NoInterlayer, Ntc, OperatingRange, Vo2Piecewise,
                             Vo2Segment, ceramic_ntc, interlayer_resistance,
                             linear_interlayer, rc_time_constant,
                             vo2_interlayer)


# ---------------------------------------------------------------------------
# MeshSpec


def test_mesh_derived_counts():
    mesh = MeshSpec(rows=4, cols=7)
    assert mesh.n_pixels == 28
    assert mesh.n_channels == 22
    assert mesh.pixel_area == pytest.approx(mesh.pitch ** 2)
    assert mesh.sensing_area == pytest.approx(28 * mesh.pitch ** 2)


@pytest.mark.parametrize("kwargs", [
    dict(rows=1, cols=4),
    dict(rows=4, cols=1),
    dict(rows=4, cols=4, pitch=0.0),
    dict(rows=4, cols=4, wire_cross_section=-1e-12),
    dict(rows=4, cols=4, interlayer_thickness=0.0),
    dict(rows=4, cols=4, lead_length_fraction=1.5),
])
def test_mesh_rejects_bad_geometry(kwargs):
    with pytest.raises(ValidationError):
        MeshSpec(**kwargs)


# ---------------------------------------------------------------------------
# MaterialSet and OperatingRange


def test_pair_seebeck_and_validation():
    mats = MaterialSet()
    assert mats.pair_seebeck == pytest.approx(21.7e-6 + 17.3e-6)
    with pytest.raises(ValidationError):
        MaterialSet(seebeck_leg_a=-20e-6, seebeck_leg_b=20e-6)
    with pytest.raises(ValidationError):
        MaterialSet(resistivity_leg_a=0.0)


def test_operating_range_allows_ambient_below_t_min():
    rng = OperatingRange(t_min=973.0, t_max=1273.0, t_amb=298.0)
    assert rng.event_t_min == 973.0
    rng2 = OperatingRange(t_min=250.0, t_max=373.0, t_amb=298.0)
    assert rng2.event_t_min == 298.0
    with pytest.raises(ValidationError):
        OperatingRange(t_min=400.0, t_max=300.0, t_amb=298.0)
    with pytest.raises(ValidationError):
        OperatingRange(t_min=200.0, t_max=300.0, t_amb=350.0)


# ---------------------------------------------------------------------------
# interlayer variants


def test_constant_r_and_none():
    mesh = MeshSpec(rows=2, cols=2)
    assert interlayer_resistance(NoInterlayer(), mesh, 300.0) == 0.0
    assert interlayer_resistance(ConstantR(42.0), mesh, 300.0) == 42.0
    assert interlayer_resistance(ConstantR(42.0), mesh, 1200.0) == 42.0
    with pytest.raises(ValidationError):
        ConstantR(0.0)


def test_ntc_law_matches_closed_form():
    ntc = Ntc(rho0=1e-4, beta=6500.0, t0=1273.0)
    for t in (298.0, 973.0, 1273.0):
        expect = 1e-4 * math.exp(6500.0 * (1.0 / t - 1.0 / 1273.0))
        assert ntc.resistivity(t) == pytest.approx(expect, rel=1e-15)
    assert ntc.resistivity(1273.0) == pytest.approx(1e-4)
    with pytest.raises(DomainError):
        ntc.resistivity(-5.0)
    with pytest.raises(ValidationError):
        Ntc(rho0=-1.0, beta=6500.0, t0=1273.0)


@given(t1=st.floats(min_value=250.0, max_value=1400.0),
       t2=st.floats(min_value=250.0, max_value=1400.0))
@settings(max_examples=50, deadline=None)
def test_ntc_resistivity_monotone_decreasing(t1, t2):
    ntc = ceramic_ntc()
    if t1 < t2:
        assert ntc.resistivity(t1) >= ntc.resistivity(t2)
    elif t2 < t1:
        assert ntc.resistivity(t2) >= ntc.resistivity(t1)


def test_ideal_switch_threshold_and_ratio():
    sw = IdealSwitch(t_threshold=340.0)
    mesh = MeshSpec(rows=2, cols=2)
    assert interlayer_resistance(sw, mesh, 339.999) == sw.r_open
    assert interlayer_resistance(sw, mesh, 340.0) == sw.r_closed
    assert interlayer_resistance(sw, mesh, 500.0) == sw.r_closed
    with pytest.raises(ValidationError):
        IdealSwitch(t_threshold=340.0, r_closed=1.0, r_open=10.0)


def test_vo2_piecewise_continuity_enforced():
    ok = vo2_interlayer()
    join = ok.segments[0].t_high
    ra = ok.segments[0].resistivity(join)
    rb = ok.segments[1].resistivity(join)
    assert abs(ra - rb) <= 0.01 * max(ra, rb)
    bad_high = Vo2Segment(t_low=341.0, t_high=500.0, rho0=1e-3, beta=27500.0,
                          t0=341.0)
    with pytest.raises(ValidationError):
        Vo2Piecewise(segments=(ok.segments[0], bad_high))
    gap = Vo2Segment(t_low=350.0, t_high=500.0, rho0=ok.segments[1].rho0,
                     beta=27500.0, t0=341.0)
    with pytest.raises(ValidationError):
        Vo2Piecewise(segments=(ok.segments[0], gap))


def test_vo2_out_of_coverage_raises():
    model = vo2_interlayer()
    with pytest.raises(DomainError):
        model.resistivity(200.0)
    with pytest.raises(DomainError):
        model.resistivity(600.0)


def test_vo2_transition_drops_orders_of_magnitude():
    model = vo2_interlayer()
    drop = model.resistivity(298.0) / model.resistivity(373.0)
    assert drop > 1e2


def test_parallel_plate_geometry_scaling():
    mesh = MeshSpec(rows=2, cols=2)
    mesh_thick = MeshSpec(rows=2, cols=2, interlayer_thickness=2e-6)
    ntc = ceramic_ntc()
    r1 = interlayer_resistance(ntc, mesh, 1000.0)
    r2 = interlayer_resistance(ntc, mesh_thick, 1000.0)
    assert r2 == pytest.approx(2.0 * r1)


# ---------------------------------------------------------------------------
# RC time constant


def test_rc_time_constant_is_rho_eps():
    mats = MaterialSet(interlayer=ceramic_ntc())
    t = 1100.0
    rho = mats.interlayer.resistivity(t)
    expect = rho * EPSILON_0 * mats.interlayer_rel_permittivity
    assert rc_time_constant(mats, t) == pytest.approx(expect, rel=1e-15)


def test_rc_time_constant_requires_geometry_for_lumped_variants():
    mats = MaterialSet(interlayer=ConstantR(100.0))
    with pytest.raises(ValidationError):
        rc_time_constant(mats, 300.0)
    mesh = MeshSpec(rows=2, cols=2)
    tau = rc_time_constant(mats, 300.0, geometry=mesh)
    rho = 100.0 * mesh.interlayer_area / mesh.interlayer_thickness
    assert tau == pytest.approx(rho * EPSILON_0 * 10.0)


def test_rc_below_microsecond_over_operating_ranges():
    cer = MaterialSet(interlayer=ceramic_ntc())
    for t in np.linspace(CERAMIC_RANGE.t_min, CERAMIC_RANGE.t_max, 7):
        assert rc_time_constant(cer, t) < 1e-6
    vo2 = MaterialSet(interlayer=vo2_interlayer())
    for t in np.linspace(VO2_RANGE.t_min, VO2_RANGE.t_max, 7):
        assert rc_time_constant(vo2, t) < 1e-6


# ---------------------------------------------------------------------------
# shipped presets


def test_shipped_presets_are_consistent():
    assert LINEAR_RANGE.t_amb == 298.0
    assert CERAMIC_RANGE.t_min == 973.0 and CERAMIC_RANGE.t_max == 1273.0
    assert linear_interlayer().resistance == 100.0
    assert ceramic_ntc().t0 == 1273.0
    assert isinstance(vo2_interlayer(), Vo2Piecewise)
