"""Dataset generation, 1-sparse recovery, uniqueness, and evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermomesh.exceptions import ValidationError
from thermomesh.mesh import (LINEAR_RANGE, ConstantR, MaterialSet, MeshSpec,
                             OperatingRange, vo2_interlayer)
from thermomesh.network import assemble, sensitivity_matrix
from thermomesh.recovery import (SUCCESS_AMPLITUDE_RTOL, BoundaryReading,
                                 LinearResponder, NonlinearResponder,
                                 RecoveryResult, ResponseDictionary,
                                 TemperatureField, d_norm, evaluate,
                                 export_dataset_csv, export_eval_csv,
                                 generate_dataset, recover_matched_filter,
                                 recover_omp, recover_omp_dictionary,
                                 verify_one_sparse_uniqueness)


@pytest.fixture(scope="module")
def small_a():
    mesh = MeshSpec(6, 6)
    return sensitivity_matrix(
        assemble(mesh, MaterialSet(interlayer=ConstantR(100.0))))


# ---------------------------------------------------------------------------
# dataset generation


def test_dataset_is_deterministic(small_a):
    resp = LinearResponder(small_a)
    d1 = generate_dataset(resp, LINEAR_RANGE, 20, snr_db=30.0, seed=42)
    d2 = generate_dataset(resp, LINEAR_RANGE, 20, snr_db=30.0, seed=42)
    for (t1, r1), (t2, r2) in zip(d1, d2):
        assert np.array_equal(t1.values, t2.values)
        assert np.array_equal(r1.voltages, r2.voltages)


def test_dataset_samples_are_counter_indexed(small_a):
    # a shorter run is an exact prefix of a longer one
    resp = LinearResponder(small_a)
    d_long = generate_dataset(resp, LINEAR_RANGE, 10, snr_db=30.0, seed=9)
    d_short = generate_dataset(resp, LINEAR_RANGE, 4, snr_db=30.0, seed=9)
    for (tl, rl), (ts, rs) in zip(d_long, d_short):
        assert np.array_equal(tl.values, ts.values)
        assert np.array_equal(rl.voltages, rs.voltages)


def test_dataset_amplitudes_in_range(small_a):
    resp = LinearResponder(small_a)
    ds = generate_dataset(resp, LINEAR_RANGE, 200, seed=1)
    lo = LINEAR_RANGE.event_t_min - LINEAR_RANGE.t_amb
    hi = LINEAR_RANGE.t_max - LINEAR_RANGE.t_amb
    for tf, reading in ds:
        assert tf.sparsity == 1
        assert lo < tf.amplitude <= hi
        assert reading.noise_std == 0.0


def test_dataset_noise_modes(small_a):
    resp = LinearResponder(small_a)
    per = generate_dataset(resp, LINEAR_RANGE, 30, snr_db=20.0, seed=5,
                           noise_mode="sample")
    shared = generate_dataset(resp, LINEAR_RANGE, 30, snr_db=20.0, seed=5,
                              noise_mode="dataset")
    per_stds = {r.noise_std for _, r in per}
    shared_stds = {r.noise_std for _, r in shared}
    assert len(per_stds) > 1
    assert len(shared_stds) == 1
    with pytest.raises(ValidationError):
        generate_dataset(resp, LINEAR_RANGE, 5, snr_db=20.0,
                         noise_mode="bogus")
    with pytest.raises(ValidationError):
        generate_dataset(resp, LINEAR_RANGE, 5, snr_db=20.0,
                         noise_mode="full_scale")


# ---------------------------------------------------------------------------
# recovery


def test_noise_free_omp_recovers_exactly(small_a):
    resp = LinearResponder(small_a)
    ds = generate_dataset(resp, LINEAR_RANGE, 50, seed=3)
    for tf, reading in ds:
        r = recover_omp(small_a, reading)
        assert r.pixel_index == tf.hot_pixel
        assert r.amplitude == pytest.approx(tf.amplitude, rel=1e-10)
        assert r.residual_norm <= 1e-12 * np.linalg.norm(reading.voltages)


def test_matched_filter_agrees_with_omp_support(small_a):
    resp = LinearResponder(small_a)
    ds = generate_dataset(resp, LINEAR_RANGE, 20, snr_db=30.0, seed=8)
    for tf, reading in ds:
        o = recover_omp(small_a, reading)
        m = recover_matched_filter(small_a, reading)
        assert m.pixel_index == o.pixel_index
        assert m.method == "matched_filter"


def test_nonlinear_dictionary_recovery():
    mesh = MeshSpec(4, 4)
    mats = MaterialSet(interlayer=vo2_interlayer())
    rng = OperatingRange(t_min=298.0, t_max=373.0, t_amb=298.0)
    resp = NonlinearResponder(mesh, mats, t_amb=298.0)
    dictionary = ResponseDictionary.build(resp, rng, n_grid=24)
    ds = generate_dataset(resp, rng, 10, seed=2)
    for tf, reading in ds:
        r = recover_omp_dictionary(dictionary, reading)
        assert r.pixel_index == tf.hot_pixel
        assert r.amplitude == pytest.approx(tf.amplitude, rel=5e-3)


# ---------------------------------------------------------------------------
# uniqueness


def test_uniqueness_certificate_small_linear(small_a):
    rep = verify_one_sparse_uniqueness(small_a)
    assert rep["spark_gt_2"] is True
    assert rep["nsp_order_1"] is True
    assert 0.0 < rep["max_coherence"] < 1.0


def test_uniqueness_rejects_duplicate_columns():
    col = np.linspace(0.0, 1.0, 8)
    entries = np.stack([col, 2.0 * col, np.ones(8)], axis=1)
    rep = verify_one_sparse_uniqueness(entries)
    assert rep["spark_gt_2"] is False


def test_uniqueness_rejects_zero_column():
    entries = np.ones((8, 3))
    entries[:, 1] = np.linspace(0, 1, 8)
    entries[:, 2] = entries[:, 1] ** 2
    entries[:, 0] = entries[:, 0].mean()  # centered to exactly zero
    rep = verify_one_sparse_uniqueness(entries)
    assert rep["spark_gt_2"] is False
    assert rep["reason"] == "zero column"


# ---------------------------------------------------------------------------
# metrics


def test_d_norm_corner_to_corner_is_one():
    for rows, cols in [(16, 16), (4, 5), (200, 200)]:
        assert d_norm(0, rows * cols - 1, rows, cols) == 1.0


def test_d_norm_neighbors():
    assert d_norm(0, 1, 16, 16) == pytest.approx(1.0 / np.hypot(15, 15))


@given(rows=st.integers(2, 30), cols=st.integers(2, 30),
       a=st.integers(0, 899), b=st.integers(0, 899))
@settings(max_examples=80, deadline=None)
def test_d_norm_symmetric_and_bounded(rows, cols, a, b):
    a %= rows * cols
    b %= rows * cols
    d_ab = d_norm(a, b, rows, cols)
    assert d_ab == d_norm(b, a, rows, cols)
    assert 0.0 <= d_ab <= 1.0
    assert (d_ab == 0.0) == (a == b)


def test_evaluate_bookkeeping():
    truths = [TemperatureField(2, 2, np.array([5.0, 0, 0, 0])),
              TemperatureField(2, 2, np.array([0, 4.0, 0, 0]))]
    results = [RecoveryResult(0, 5.0, 0.0, "omp"),
               RecoveryResult(2, 4.5, 0.0, "omp")]
    rep = evaluate(results, truths)
    assert rep.accuracy == 0.5
    assert rep.success_rate == 0.5
    assert rep.mae == pytest.approx(0.25)
    assert len(rep.d_norm) == 1 and rep.d_norm[0] == 1.0
    assert rep.mae_localized == 0.0
    with pytest.raises(ValidationError):
        evaluate(results, truths[:1])
    with pytest.raises(ValidationError):
        evaluate([], [])


def test_success_tolerance_applied():
    truth = [TemperatureField(2, 2, np.array([10.0, 0, 0, 0]))]
    near = [RecoveryResult(0, 10.0 * (1 + 0.5 * SUCCESS_AMPLITUDE_RTOL),
                           0.0, "omp")]
    far = [RecoveryResult(0, 10.0 * (1 + 2.0 * SUCCESS_AMPLITUDE_RTOL),
                          0.0, "omp")]
    assert evaluate(near, truth).success_rate == 1.0
    assert evaluate(far, truth).success_rate == 0.0
    assert evaluate(far, truth).accuracy == 1.0


# ---------------------------------------------------------------------------
# CSV interfaces


def test_dataset_csv_roundtrip_values(tmp_path, small_a):
    resp = LinearResponder(small_a)
    ds = generate_dataset(resp, LINEAR_RANGE, 5, snr_db=25.0, seed=4)
    p = tmp_path / "ds.csv"
    export_dataset_csv(ds, p, config_hash="h1")
    lines = p.read_text().splitlines()
    assert lines[0] == "# config_hash=h1"
    header = lines[1].split(",")
    assert header[:4] == ["sample", "pixel_index", "delta_t_k", "snr_db"]
    assert len(lines) == 2 + len(ds)
    first = lines[2].split(",")
    assert int(first[1]) == ds[0][0].hot_pixel
    assert float(first[2]) == pytest.approx(ds[0][0].amplitude, rel=1e-11)


def test_eval_csv_layout(tmp_path):
    truths = [TemperatureField(2, 2, np.array([0, 3.0, 0, 0]))]
    results = [RecoveryResult(3, 2.9, 0.0, "omp")]
    p = tmp_path / "ev.csv"
    export_eval_csv(results, truths, p)
    rows = p.read_text().splitlines()
    assert rows[0] == "sample,true_pixel,pred_pixel,true_t,pred_t,d_norm"
    sample = rows[1].split(",")
    assert sample[1] == "1" and sample[2] == "3"
    assert float(sample[5]) > 0
