"""Synthetic 1-sparse datasets, uniqueness checks, OMP and matched-filter
recovery, and accuracy metrics.

Noise conventions. Every reading can carry white Gaussian channel noise at a
target SNR. Two references for the signal power are supported:

  "sample"     P_s is the mean-square of that sample's own clean voltage
               vector, so every sample sees the same relative noise.
  "dataset"    P_s is the mean-square over the whole clean dataset, so weak
               sources are noisier in relative terms.
  "full_scale" P_s is the mean-square of a fixed full-scale reference
               response (readout dynamic-range convention); the caller
               supplies the resulting absolute noise std directly.

"sample" is the default for generated datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .exceptions import DegenerateResponseError, ValidationError
from .mesh import ConstantR, MaterialSet, MeshSpec, NoInterlayer, OperatingRange
from .network import (NetworkSystem, SensitivityMatrix, assemble,
                      boundary_voltages)

#: Relative amplitude tolerance defining a successful recovery.
SUCCESS_AMPLITUDE_RTOL = 0.0014


@dataclass(frozen=True)
class TemperatureField:
    """Relative temperature-rise field over the pixel grid."""

    rows: int
    cols: int
    values: np.ndarray  # length rows*cols, K above ambient

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.values))

    @property
    def hot_pixel(self) -> int:
        return int(np.argmax(np.abs(self.values)))

    @property
    def amplitude(self) -> float:
        return float(self.values[self.hot_pixel])


@dataclass(frozen=True)
class BoundaryReading:
    """One measured boundary-voltage vector plus its noise bookkeeping."""

    voltages: np.ndarray
    noise_std: float = 0.0
    snr_db: Optional[float] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class RecoveryResult:
    pixel_index: int
    amplitude: float
    residual_norm: float
    method: str


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    mae: float
    d_norm: tuple
    n_samples: int
    snr_db: Optional[float]
    success_rate: float
    mae_localized: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError("accuracy must lie in [0, 1]")
        for d in self.d_norm:
            if not 0.0 < d <= 1.0:
                raise ValidationError("each d_norm must lie in (0, 1]")


# ---------------------------------------------------------------------------
# dataset generation


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.Philox(key=(seed ^ index) & 0xFFFFFFFFFFFFFFFF))


class LinearResponder:
    """Clean boundary response of a linear (constant-A) configuration."""

    def __init__(self, a: SensitivityMatrix):
        self.a = a
        self.rows, self.cols = a.rows, a.cols

    def response(self, pixel: int, delta_t: float) -> np.ndarray:
        return self.a.entries[:, pixel] * delta_t


class NonlinearResponder:
    """Clean boundary response assembled at each one-hot event state."""

    def __init__(self, mesh: MeshSpec, materials: MaterialSet,
                 t_amb: float | None = None):
        self.mesh, self.materials = mesh, materials
        self.rows, self.cols = mesh.rows, mesh.cols
        self.t_amb = (materials.reference_temperature
                      if t_amb is None else float(t_amb))

    def response(self, pixel: int, delta_t: float) -> np.ndarray:
        tf = np.full(self.mesh.n_pixels, self.t_amb)
        tf[pixel] = self.t_amb + delta_t
        system = assemble(self.mesh, self.materials, t_state=tf)
        return boundary_voltages(system, tf)


def make_responder(a_or_system, mesh: MeshSpec | None = None,
                   materials: MaterialSet | None = None):
    if isinstance(a_or_system, SensitivityMatrix):
        return LinearResponder(a_or_system)
    return NonlinearResponder(mesh, materials)


def generate_dataset(responder, op_range: OperatingRange, n_samples: int,
                     snr_db: Optional[float] = None, seed: int = 0,
                     noise_mode: str = "sample",
                     noise_std: Optional[float] = None,
                     ) -> list[tuple[TemperatureField, BoundaryReading]]:
    """Draw 1-sparse events and their (optionally noisy) boundary readings.

    The hot pixel is uniform over the grid; the hot temperature is uniform
    over (event_t_min, t_max], stored as a rise above ambient. Per-sample
    randomness comes from a counter-based generator keyed by seed XOR index,
    so samples are independent and the dataset is reproducible.
    """
    if noise_mode not in ("sample", "dataset", "full_scale"):
        raise ValidationError(f"unknown noise_mode {noise_mode!r}")
    if noise_mode == "full_scale" and snr_db is not None and noise_std is None:
        raise ValidationError("full_scale mode needs an explicit noise_std")
    rows, cols = responder.rows, responder.cols
    n_pix = rows * cols
    span = op_range.t_max - op_range.event_t_min
    base = op_range.event_t_min - op_range.t_amb
    clean = []
    for i in range(n_samples):
        rng = _sample_rng(seed, i)
        pixel = int(rng.integers(n_pix))
        # (0, 1] transform keeps the amplitude strictly positive
        dt = base + span * (1.0 - rng.random())
        values = np.zeros(n_pix)
        values[pixel] = dt
        tf = TemperatureField(rows=rows, cols=cols, values=values)
        clean.append((tf, responder.response(pixel, dt)))

    if snr_db is None and noise_std is None:
        return [(tf, BoundaryReading(voltages=v, noise_std=0.0))
                for tf, v in clean]

    factor = None
    if snr_db is not None:
        factor = 10 ** (snr_db / 10.0)
    if noise_mode == "dataset":
        p_s = float(np.mean([np.mean(v ** 2) for _, v in clean]))
        if p_s <= 0:
            raise DegenerateResponseError("clean dataset is identically zero")
        shared_std = np.sqrt(p_s / factor)

    out = []
    for i, (tf, v) in enumerate(clean):
        rng = _sample_rng(seed, i)
        rng.integers(n_pix)  # skip the draws used for the event itself
        rng.random()
        if noise_mode == "sample":
            p_s = float(np.mean(v ** 2))
            if p_s <= 0:
                raise DegenerateResponseError(
                    f"clean signal is zero at sample {i}; SNR undefined")
            std = np.sqrt(p_s / factor)
        elif noise_mode == "dataset":
            std = shared_std
        else:
            std = float(noise_std)
        noisy = v + rng.normal(0.0, std, size=v.shape)
        out.append((tf, BoundaryReading(voltages=noisy, noise_std=std,
                                        snr_db=snr_db, seed=seed ^ i)))
    return out


# ---------------------------------------------------------------------------
# uniqueness


def _centered(entries: np.ndarray) -> np.ndarray:
    return entries - entries.mean(axis=0, keepdims=True)


def verify_one_sparse_uniqueness(a: SensitivityMatrix | np.ndarray,
                                 tol: float = 1e-8,
                                 nsp: str = "auto") -> dict:
    """Check that 1-sparse recovery is well-posed for a matrix.

    Always checks spark > 2 (no zero column, no parallel column pair) on
    gauge-centered columns. The order-1 null-space property is certified by
    linear programming when requested ("lp") or, under "auto", when the
    matrix is small enough for that to be cheap.
    """
    entries = a.entries if isinstance(a, SensitivityMatrix) else np.asarray(a)
    c = _centered(entries)
    norms = np.linalg.norm(c, axis=0)
    report = {"n_pixels": c.shape[1], "tol": tol}
    if np.any(norms <= tol * norms.max()):
        report.update(spark_gt_2=False, reason="zero column")
        return report
    g = np.abs((c / norms).T @ (c / norms))
    np.fill_diagonal(g, 0.0)
    max_coh = float(g.max())
    report["max_coherence"] = max_coh
    report["spark_gt_2"] = max_coh < 1.0 - tol
    do_lp = nsp == "lp" or (nsp == "auto" and c.shape[1] <= 256)
    if do_lp and report["spark_gt_2"]:
        report["nsp_order_1"] = _nsp_order_1_lp(c)
    return report


def _nsp_order_1_lp(c: np.ndarray) -> bool:
    """Certify min ||h||_1 over null(A) with h_i = 1 exceeds 2 for every i."""
    _, s, vt = np.linalg.svd(c, full_matrices=True)
    rank = int(np.sum(s > s[0] * 1e-12))
    basis = vt[rank:].T  # columns span null(A)
    n, k = basis.shape
    if k == 0:
        return True
    # variables: z (k), t (n); minimize sum(t) s.t. -t <= B z <= t, (B z)_i = 1
    cost = np.concatenate([np.zeros(k), np.ones(n)])
    a_ub = np.block([[basis, -np.eye(n)], [-basis, -np.eye(n)]])
    b_ub = np.zeros(2 * n)
    for i in range(n):
        a_eq = np.concatenate([basis[i], np.zeros(n)]).reshape(1, -1)
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(None, None)] * (k + n), method="highs")
        if not res.success or res.fun <= 2.0:
            return False
    return True


# ---------------------------------------------------------------------------
# recovery


def recover_omp(a: SensitivityMatrix, reading: BoundaryReading) -> RecoveryResult:
    """1-sparse orthogonal matching pursuit on a linear matrix."""
    v = np.asarray(reading.voltages, dtype=float)
    entries = a.entries
    norms = np.linalg.norm(entries, axis=0)
    scores = np.abs(entries.T @ v) / norms
    pixel = int(np.argmax(scores))
    amp = float(entries[:, pixel] @ v / norms[pixel] ** 2)
    resid = float(np.linalg.norm(v - entries[:, pixel] * amp))
    return RecoveryResult(pixel_index=pixel, amplitude=amp,
                          residual_norm=resid, method="omp")


def recover_matched_filter(a_amb: SensitivityMatrix,
                           reading: BoundaryReading) -> RecoveryResult:
    """Normalized correlation against ambient-state atoms, LS amplitude."""
    r = recover_omp(a_amb, reading)
    return RecoveryResult(pixel_index=r.pixel_index, amplitude=r.amplitude,
                          residual_norm=r.residual_norm,
                          method="matched_filter")


@dataclass
class ResponseDictionary:
    """Precomputed response atoms b_j(dT) on a rise grid, for nonlinear
    recovery by residual minimization plus 1-D refinement."""

    responder: object
    dt_grid: np.ndarray
    atoms: np.ndarray  # (n_pixels, n_grid, n_channels)

    @classmethod
    def build(cls, responder, op_range: OperatingRange,
              n_grid: int = 64) -> "ResponseDictionary":
        lo = max(op_range.event_t_min - op_range.t_amb, 1e-3)
        hi = op_range.t_max - op_range.t_amb
        dt_grid = np.geomspace(lo, hi, n_grid)
        n_pix = responder.rows * responder.cols
        probe = responder.response(0, dt_grid[0])
        atoms = np.empty((n_pix, n_grid, probe.shape[0]))
        for j in range(n_pix):
            for g, dt in enumerate(dt_grid):
                atoms[j, g] = responder.response(j, dt)
        return cls(responder=responder, dt_grid=dt_grid, atoms=atoms)


def recover_omp_dictionary(dictionary: ResponseDictionary,
                           reading: BoundaryReading,
                           refine: bool = True) -> RecoveryResult:
    """Nonlinear 1-sparse recovery: grid search over response atoms, then
    golden-section refinement of the rise on the winning pixel."""
    v = np.asarray(reading.voltages, dtype=float)
    diffs = dictionary.atoms - v  # broadcast over (pixel, grid, channel)
    resid = np.linalg.norm(diffs, axis=2)
    j, g = np.unravel_index(np.argmin(resid), resid.shape)
    dt_grid = dictionary.dt_grid
    best_dt = float(dt_grid[g])
    best_res = float(resid[j, g])
    if refine:
        lo = dt_grid[max(g - 1, 0)]
        hi = dt_grid[min(g + 1, len(dt_grid) - 1)]
        if hi > lo:
            best_dt, best_res = _golden_section(
                lambda dt: float(np.linalg.norm(
                    dictionary.responder.response(int(j), dt) - v)),
                float(lo), float(hi))
    return RecoveryResult(pixel_index=int(j), amplitude=best_dt,
                          residual_norm=best_res, method="omp")


def _golden_section(f: Callable[[float], float], lo: float, hi: float,
                    tol: float = 1e-4, max_iter: int = 60) -> tuple[float, float]:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol * max(abs(a), abs(b), 1.0):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# ---------------------------------------------------------------------------
# evaluation


def d_norm(true_pixel: int, pred_pixel: int, rows: int, cols: int) -> float:
    """Euclidean pixel distance normalized by the grid diagonal."""
    tr, tc = divmod(true_pixel, cols)
    pr, pc = divmod(pred_pixel, cols)
    return float(np.hypot(pr - tr, pc - tc) /
                 np.hypot(rows - 1, cols - 1))


def evaluate(results: Sequence[RecoveryResult],
             truths: Sequence[TemperatureField],
             snr_db: Optional[float] = None,
             success_rtol: float = SUCCESS_AMPLITUDE_RTOL) -> EvalReport:
    """Accuracy, MAE, miss distances, and banded success rate.

    A sample counts as a success when the support is exact and the
    amplitude's relative error is within success_rtol.
    """
    if len(results) != len(truths):
        raise ValidationError("results and truths must align")
    if not results:
        raise ValidationError("nothing to evaluate")
    hits = 0
    successes = 0
    abs_err = []
    loc_err = []
    misses = []
    for r, t in zip(results, truths):
        err = abs(r.amplitude - t.amplitude)
        abs_err.append(err)
        if r.pixel_index == t.hot_pixel:
            hits += 1
            loc_err.append(err)
            if err <= success_rtol * abs(t.amplitude):
                successes += 1
        else:
            misses.append(d_norm(t.hot_pixel, r.pixel_index, t.rows, t.cols))
    n = len(results)
    return EvalReport(accuracy=hits / n, mae=float(np.mean(abs_err)),
                      d_norm=tuple(misses), n_samples=n, snr_db=snr_db,
                      success_rate=successes / n,
                      mae_localized=float(np.mean(loc_err)) if loc_err
                      else float("nan"))


# ---------------------------------------------------------------------------
# CSV interfaces


def export_dataset_csv(dataset, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        n_ch = len(dataset[0][1].voltages)
        head = ",".join(f"v_{i}" for i in range(n_ch))
        fh.write(f"sample,pixel_index,delta_t_k,snr_db,{head}\n")
        for i, (tf, reading) in enumerate(dataset):
            snr = "" if reading.snr_db is None else f"{reading.snr_db:g}"
            volts = ",".join(f"{v:.12e}" for v in reading.voltages)
            fh.write(f"{i},{tf.hot_pixel},{tf.amplitude:.12e},{snr},{volts}\n")


def export_eval_csv(results, truths, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("sample,true_pixel,pred_pixel,true_t,pred_t,d_norm\n")
        for i, (r, t) in enumerate(zip(results, truths)):
            d = (0.0 if r.pixel_index == t.hot_pixel else
                 d_norm(t.hot_pixel, r.pixel_index, t.rows, t.cols))
            fh.write(f"{i},{t.hot_pixel},{r.pixel_index},"
                     f"{t.amplitude:.12e},{r.amplitude:.12e},{d:.6f}\n")
