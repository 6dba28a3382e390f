"""Network assembly, gauged solves, and the measurement model.

The heavyweight entrywise comparison against the independent dense oracle
across all variants is part of the acceptance suite; here a few spot checks
plus the structural invariants keep the unit loop fast.
"""

import numpy as np
import pytest

from oracle import oracle_matrix
from thermomesh.exceptions import StalenessError, ValidationError
from thermomesh.mesh import (ConstantR, IdealSwitch, MaterialSet, MeshSpec,
                             NoInterlayer, ceramic_ntc)
from thermomesh.network import (assemble, boundary_voltages, channel_map,
                                mirror_channel_permutation,
                                mirror_pixel_permutation,
                                raw_sensitivity_matrix, sensitivity_column,
                                sensitivity_matrix, sensitivity_rows)


def test_channel_map_order_and_counts(mesh4x5):
    table = channel_map(mesh4x5)
    assert len(table) == mesh4x5.n_channels
    sides = [side for side, _, _ in table]
    assert sides == (["top"] * 5 + ["right"] * 4 + ["bottom"] * 5 +
                     ["left"] * 4)
    # each boundary channel touches a perimeter pixel
    for side, line, pix in table:
        i, j = divmod(pix, mesh4x5.cols)
        assert {"top": i == 0, "bottom": i == mesh4x5.rows - 1,
                "left": j == 0, "right": j == mesh4x5.cols - 1}[side]


def test_merged_variant_has_one_node_per_pixel(mesh4x5, merged_materials):
    system = assemble(mesh4x5, merged_materials)
    assert system.n_nodes == mesh4x5.n_pixels


def test_two_layer_variant_has_two_nodes_per_pixel(mesh4x5, linear_materials):
    system = assemble(mesh4x5, linear_materials)
    assert system.n_nodes == 2 * mesh4x5.n_pixels


def test_temperature_dependent_assembly_needs_state(mesh4x5,
                                                    ceramic_materials):
    with pytest.raises(ValidationError):
        assemble(mesh4x5, ceramic_materials)
    with pytest.raises(ValidationError):
        assemble(mesh4x5, ceramic_materials, t_state=np.ones(3))


def test_stale_state_rejected(mesh4x5, ceramic_materials):
    state = np.full(mesh4x5.n_pixels, 1000.0)
    system = assemble(mesh4x5, ceramic_materials, t_state=state)
    other = state.copy()
    other[0] = 1100.0
    with pytest.raises(StalenessError):
        boundary_voltages(system, other)


# ---------------------------------------------------------------------------
# oracle spot checks (full sweep lives in the acceptance suite)


def test_matches_oracle_constant_r(mesh4x5, linear_materials):
    a = sensitivity_matrix(assemble(mesh4x5, linear_materials)).entries
    ao = oracle_matrix(mesh4x5, linear_materials)
    assert np.max(np.abs(a - ao)) <= 1e-12 * np.max(np.abs(ao))


def test_matches_oracle_merged(mesh4x5, merged_materials):
    a = sensitivity_matrix(assemble(mesh4x5, merged_materials)).entries
    ao = oracle_matrix(mesh4x5, merged_materials)
    assert np.max(np.abs(a - ao)) <= 1e-12 * np.max(np.abs(ao))


def test_matches_oracle_extreme_conductance_spread(mesh4x5):
    mats = MaterialSet(interlayer=IdealSwitch(t_threshold=340.0))
    state = np.full(mesh4x5.n_pixels, 298.0)
    state[10] = 360.0
    a = sensitivity_matrix(assemble(mesh4x5, mats, t_state=state)).entries
    ao = oracle_matrix(mesh4x5, mats, t_abs=state, precision=50)
    assert np.max(np.abs(a - ao)) <= 1e-9 * np.max(np.abs(ao))


# ---------------------------------------------------------------------------
# structural invariants


def test_zero_field_gives_exactly_zero(mesh4x5, linear_materials):
    system = assemble(mesh4x5, linear_materials)
    v = boundary_voltages(system, np.zeros(mesh4x5.n_pixels))
    assert np.all(v == 0.0)


def test_gauge_invariance_of_differences(mesh16, linear_materials):
    system = assemble(mesh16, linear_materials)
    a0 = sensitivity_matrix(system, datum=0).entries
    a5 = sensitivity_matrix(system, datum=5).entries
    # all voltage differences between channel pairs agree across gauges
    d0 = a0[:, None, :] - a0[None, :, :]
    d5 = a5[:, None, :] - a5[None, :, :]
    assert np.max(np.abs(d0 - d5)) <= 1e-12 * np.max(np.abs(a0))
    assert np.all(a5[5] == 0.0)


def test_superposition_linear(mesh4x5, linear_materials):
    rng = np.random.default_rng(3)
    system = assemble(mesh4x5, linear_materials)
    t1 = rng.normal(size=mesh4x5.n_pixels)
    t2 = rng.normal(size=mesh4x5.n_pixels)
    v12 = boundary_voltages(system, t1 + 2.5 * t2)
    v = boundary_voltages(system, t1) + 2.5 * boundary_voltages(system, t2)
    scale = np.max(np.abs(v12))
    assert np.max(np.abs(v12 - v)) <= 1e-12 * scale


def test_mirror_symmetry_permutation(mesh16, linear_materials):
    a = sensitivity_matrix(assemble(mesh16, linear_materials)).entries
    cperm = mirror_channel_permutation(mesh16)
    pperm = mirror_pixel_permutation(mesh16)
    mirrored = a[cperm][:, pperm]
    mirrored = mirrored - mirrored[0]  # re-gauge after permuting channels
    assert np.max(np.abs(a - mirrored)) <= 1e-10 * np.max(np.abs(a))


def test_ungauged_conductance_nullity_one(mesh16, linear_materials):
    g = assemble(mesh16, linear_materials).conductance.toarray()
    w = np.linalg.eigvalsh(g)
    null = np.sum(np.abs(w) <= 1e-8 * w.max())
    assert null == 1
    # constant vector spans the null space (pure row-sum Laplacian)
    assert np.max(np.abs(g.sum(axis=1))) <= 1e-9 * g.max()


# ---------------------------------------------------------------------------
# solve-path consistency


def test_adjoint_and_column_paths_agree(mesh4x5, linear_materials):
    system = assemble(mesh4x5, linear_materials)
    a_cols = raw_sensitivity_matrix(system, method="columns")
    a_adj = raw_sensitivity_matrix(system, method="adjoint")
    scale = np.max(np.abs(a_cols))
    assert np.max(np.abs(a_cols - a_adj)) <= 1e-11 * scale


def test_adjoint_and_column_paths_agree_temperature_dependent(mesh4x5):
    mats = MaterialSet(interlayer=ceramic_ntc())
    state = np.full(mesh4x5.n_pixels, 298.0)
    state[7] = 1273.0
    system = assemble(mesh4x5, mats, t_state=state)
    a_cols = raw_sensitivity_matrix(system, method="columns")
    a_adj = raw_sensitivity_matrix(system, method="adjoint")
    scale = np.max(np.abs(a_cols))
    assert np.max(np.abs(a_cols - a_adj)) <= 1e-10 * scale


def test_streaming_rows_match_dense(mesh4x5, linear_materials):
    system = assemble(mesh4x5, linear_materials)
    a = raw_sensitivity_matrix(system, method="adjoint")
    for c, row in sensitivity_rows(system):
        assert np.allclose(row, a[c], rtol=0, atol=1e-18)


def test_sensitivity_column_matches_matrix(mesh4x5, linear_materials):
    system = assemble(mesh4x5, linear_materials)
    a = sensitivity_matrix(system).entries
    col = sensitivity_column(system, pixel=7)
    assert np.allclose(col, a[:, 7], rtol=0, atol=1e-16)


def test_measurement_equals_matrix_times_field(mesh4x5, linear_materials):
    rng = np.random.default_rng(11)
    system = assemble(mesh4x5, linear_materials)
    a = sensitivity_matrix(system).entries
    t = rng.normal(size=mesh4x5.n_pixels) * 10
    v = boundary_voltages(system, t)
    assert np.max(np.abs(v - a @ t)) <= 1e-12 * np.max(np.abs(v))
