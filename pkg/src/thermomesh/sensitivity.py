"""Sensitivity metrics, resistance/size sweeps, super-linearity, and NET.

Per-junction sensitivity sigma_j is the boundary-voltage swing (max minus
min over channels) produced by a unit temperature rise at junction j. The
swing is invariant under adding any constant to all channels, so maps can be
built from ungauged rows without fixing a datum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .exceptions import DegenerateResponseError, ValidationError
from .mesh import ConstantR, MaterialSet, MeshSpec, NoInterlayer
from .network import (NetworkSystem, SensitivityMatrix, assemble,
                      boundary_voltages, pixel_index, sensitivity_column,
                      sensitivity_matrix, sensitivity_rows)


@dataclass(frozen=True)
class SensitivityMap:
    """Per-pixel sensitivity in V/K with its minimum and argmin."""

    sigma: np.ndarray          # length MN
    rows: int
    cols: int
    interlayer_tag: str
    state_label: str           # "linear", "ambient", or "event(T)"

    @property
    def sigma_min(self) -> float:
        return float(np.min(self.sigma))

    @property
    def argmin_pixel(self) -> int:
        return int(np.argmin(self.sigma))


@dataclass(frozen=True)
class SweepResult:
    """Ordered (x, value) samples from a one-dimensional sweep."""

    x: tuple
    values: tuple
    variant: str
    label: str
    baseline: Optional[float] = None

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        if len(xs) != len(self.values):
            raise ValidationError("sweep x and values must align")
        if np.any(np.diff(xs) <= 0):
            raise ValidationError("sweep samples must be strictly ordered")


def sensitivity_map(a: SensitivityMatrix,
                    state_label: str = "linear") -> SensitivityMap:
    """Per-column boundary swing of a dense sensitivity matrix."""
    sigma = a.entries.max(axis=0) - a.entries.min(axis=0)
    return SensitivityMap(sigma=sigma, rows=a.rows, cols=a.cols,
                          interlayer_tag=a.interlayer_tag,
                          state_label=state_label)


def streaming_sensitivity_map(system: NetworkSystem,
                              state_label: str = "linear") -> SensitivityMap:
    """Swing map accumulated channel-by-channel without storing A.

    Uses one adjoint solve per boundary channel, so it is the right tool
    for large meshes where the dense MN-column matrix is unaffordable.
    """
    hi = np.full(system.mesh.n_pixels, -np.inf)
    lo = np.full(system.mesh.n_pixels, np.inf)
    for _, row in sensitivity_rows(system):
        np.maximum(hi, row, out=hi)
        np.minimum(lo, row, out=lo)
    from .network import _interlayer_tag
    return SensitivityMap(sigma=hi - lo, rows=system.mesh.rows,
                          cols=system.mesh.cols,
                          interlayer_tag=_interlayer_tag(system.materials.interlayer),
                          state_label=state_label)


def pixel_sensitivity(system: NetworkSystem, pixel: int) -> float:
    """Boundary swing of one pixel's column (single sparse solve)."""
    col = sensitivity_column(system, pixel)
    return float(col.max() - col.min())


def center_pixel(mesh: MeshSpec) -> int:
    return pixel_index(mesh.rows // 2, mesh.cols // 2, mesh.cols)


def nonlinear_sensitivity_map(mesh: MeshSpec, materials: MaterialSet,
                              base_t: np.ndarray,
                              state_label: str = "state") -> SensitivityMap:
    """Full swing map of A assembled at an absolute temperature field."""
    system = assemble(mesh, materials, t_state=np.asarray(base_t, dtype=float))
    return streaming_sensitivity_map(system, state_label=state_label)


def ambient_sensitivity_map(mesh: MeshSpec, materials: MaterialSet,
                            t_amb: float | None = None) -> SensitivityMap:
    """Preset: every junction at ambient; sigma_min is the ambient minimum."""
    if t_amb is None:
        t_amb = materials.reference_temperature
    base = np.full(mesh.n_pixels, float(t_amb))
    return nonlinear_sensitivity_map(mesh, materials, base,
                                     state_label="ambient")


def event_minimum_sensitivity(mesh: MeshSpec, materials: MaterialSet,
                              t_hot: float, t_amb: float | None = None,
                              hot_pixel: int | None = None) -> float:
    """Preset: one hot junction; returns that junction's sensitivity.

    The event-state figure of merit is the sensitivity of the junction that
    actually carries the event, evaluated on the system assembled at the
    event temperature field. Only the hot pixel's column is needed, so this
    stays cheap at large mesh sizes.
    """
    if t_amb is None:
        t_amb = materials.reference_temperature
    if hot_pixel is None:
        hot_pixel = center_pixel(mesh)
    base = np.full(mesh.n_pixels, float(t_amb))
    base[hot_pixel] = float(t_hot)
    system = assemble(mesh, materials, t_state=base)
    return pixel_sensitivity(system, hot_pixel)


def event_sensitivity_map(mesh: MeshSpec, materials: MaterialSet,
                          t_hot: float, t_amb: float | None = None,
                          hot_pixel: int | None = None) -> SensitivityMap:
    """Full swing map at the one-hot-junction event state."""
    if t_amb is None:
        t_amb = materials.reference_temperature
    if hot_pixel is None:
        hot_pixel = center_pixel(mesh)
    base = np.full(mesh.n_pixels, float(t_amb))
    base[hot_pixel] = float(t_hot)
    return nonlinear_sensitivity_map(mesh, materials, base,
                                     state_label=f"event({t_hot:g})")


# ---------------------------------------------------------------------------
# sweeps


def _linear_sigma_min(mesh: MeshSpec, materials: MaterialSet) -> float:
    system = assemble(mesh, materials)
    return streaming_sensitivity_map(system).sigma_min


def sweep_interlayer_R(mesh: MeshSpec, materials: MaterialSet,
                       r_grid: Sequence[float]) -> SweepResult:
    """sigma_min versus constant interlayer resistance.

    The merged-junction (no-interlayer) sigma_min is attached as the
    baseline datum.
    """
    r_grid = [float(r) for r in r_grid]
    if any(r <= 0 for r in r_grid) or any(
            b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValidationError("r_grid must be positive and ascending")
    base_mats = _with_interlayer(materials, NoInterlayer())
    baseline = _linear_sigma_min(mesh, base_mats)
    values = []
    for r in r_grid:
        mats = _with_interlayer(materials, ConstantR(r))
        values.append(_linear_sigma_min(mesh, mats))
    return SweepResult(x=tuple(r_grid), values=tuple(values),
                       variant="ConstantR", label="sigma_min_vs_R",
                       baseline=baseline)


def plateau_resistance(sweep: SweepResult, tol: float = 0.10) -> float:
    """Smallest grid R whose sigma_min is within tol of the high-R limit.

    The sweep rises monotonically from the merged-junction value toward a
    high-resistance plateau; the last grid value stands in for that limit.
    """
    vals = np.asarray(sweep.values)
    limit = vals[-1]
    if limit <= 0:
        raise DegenerateResponseError("degenerate high-R limit in sweep")
    for x, v in zip(sweep.x, vals):
        if abs(v - limit) <= tol * limit:
            return float(x)
    raise DegenerateResponseError("no plateau found within the sweep grid")


DEFAULT_R_GRID = tuple(np.logspace(-2, 6, 33))


def sweep_mesh_size(sizes: Sequence[tuple[int, int]], materials: MaterialSet,
                    variant: str = "plateau",
                    r_grid: Sequence[float] = DEFAULT_R_GRID,
                    t_hot: float | None = None,
                    fixed_r: float | None = None) -> SweepResult:
    """sigma_min (and improvement over the merged-junction baseline) by size.

    variant:
      "plateau" - constant-R at each size's own detected high-R plateau
      "fixed"   - constant-R at one shipped resistance (fixed_r)
      "event"   - temperature-dependent interlayer at its one-hot event state
    """
    counts = [m * n for m, n in sizes]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValidationError("sizes must ascend in pixel count")
    values = []
    for m, n in sizes:
        mesh = MeshSpec(m, n)
        if variant == "plateau":
            sw = sweep_interlayer_R(mesh, materials, r_grid)
            r = plateau_resistance(sw)
            values.append(sw.values[sw.x.index(r)])
        elif variant == "fixed":
            if fixed_r is None:
                raise ValidationError("variant 'fixed' needs fixed_r")
            mats = _with_interlayer(materials, ConstantR(fixed_r))
            values.append(_linear_sigma_min(mesh, mats))
        elif variant == "event":
            if t_hot is None:
                raise ValidationError("variant 'event' needs t_hot")
            values.append(event_minimum_sensitivity(mesh, materials, t_hot))
        else:
            raise ValidationError(f"unknown size-sweep variant {variant!r}")
    return SweepResult(x=tuple(counts), values=tuple(values),
                       variant=variant, label="sigma_min_vs_size")


def improvement_factors(sizes: Sequence[tuple[int, int]],
                        materials: MaterialSet,
                        sweep: SweepResult) -> tuple[float, ...]:
    """Per-size ratio of swept sigma_min to the merged-junction baseline."""
    factors = []
    for (m, n), v in zip(sizes, sweep.values):
        base_mats = _with_interlayer(materials, NoInterlayer())
        baseline = _linear_sigma_min(MeshSpec(m, n), base_mats)
        factors.append(v / baseline)
    return tuple(factors)


def _with_interlayer(materials: MaterialSet, model) -> MaterialSet:
    from dataclasses import replace
    return replace(materials, interlayer=model)


# ---------------------------------------------------------------------------
# super-linearity


def superlinearity_kappa(mesh: MeshSpec, materials: MaterialSet,
                         t_amb: float, dt_grid: Sequence[float],
                         hot_pixel: int | None = None) -> SweepResult:
    """Log-log slope of the center-junction boundary swing versus rise.

    kappa(dT) = d ln(swing) / d ln(dT), central differences on the interior
    grid points and one-sided differences at the two ends.
    """
    dt = np.asarray([float(v) for v in dt_grid])
    if np.any(dt <= 0) or np.any(np.diff(dt) <= 0):
        raise ValidationError("dt_grid must be positive and ascending")
    if hot_pixel is None:
        hot_pixel = center_pixel(mesh)
    swings = []
    needs_state = not isinstance(materials.interlayer, (NoInterlayer, ConstantR))
    uniform = np.full(mesh.n_pixels, float(t_amb))
    # the hot-spot response is measured against the uniform-background
    # response, otherwise a background far above the cold junction
    # dominates the swing and flattens the slope
    if needs_state:
        bg_system = assemble(mesh, materials, t_state=uniform)
        v_bg = boundary_voltages(bg_system, uniform)
    else:
        lin_system = assemble(mesh, materials)
        v_bg = boundary_voltages(
            lin_system, uniform - materials.reference_temperature)
    for d in dt:
        field = uniform.copy()
        field[hot_pixel] = t_amb + d
        if needs_state:
            system = assemble(mesh, materials, t_state=field)
            v = boundary_voltages(system, field)
        else:
            # linear systems take the rise field directly
            v = boundary_voltages(
                lin_system, field - materials.reference_temperature)
        rel = v - v_bg
        swing = float(rel.max() - rel.min())
        if swing <= 0:
            raise DegenerateResponseError(
                f"non-positive boundary swing at dT={d}")
        swings.append(swing)
    lx = np.log(dt)
    ly = np.log(np.asarray(swings))
    kappa = np.gradient(ly, lx)
    return SweepResult(x=tuple(dt), values=tuple(kappa),
                       variant=type(materials.interlayer).__name__,
                       label="kappa_vs_dT")


def power_law_kappa(dt_grid: Sequence[float], c: float, p: float) -> np.ndarray:
    """Finite-difference kappa of a synthetic swing = c * dT**p (calibration)."""
    dt = np.asarray(dt_grid, dtype=float)
    return np.gradient(np.log(c * dt ** p), np.log(dt))


# ---------------------------------------------------------------------------
# channel efficiency and NET


def channel_efficiency(mesh: MeshSpec) -> tuple[int, float]:
    """(readout channel count, pixel-to-channel reduction factor)."""
    n_read = mesh.n_channels
    return n_read, mesh.n_pixels / n_read


def net(a: SensitivityMatrix | np.ndarray, noise_std: float,
        ) -> tuple[np.ndarray, float, float]:
    """Noise-equivalent temperature per pixel: noise_std / column 2-norm.

    Columns are mean-centered first so the result does not depend on the
    gauge (datum channel) the matrix was exported with. A zero-norm column
    maps to +inf as the flagged sentinel.
    """
    if noise_std <= 0:
        raise ValidationError("noise_std must be positive")
    entries = a.entries if isinstance(a, SensitivityMatrix) else np.asarray(a)
    centered = entries - entries.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(centered, axis=0)
    with np.errstate(divide="ignore"):
        per_pixel = np.where(norms > 0, noise_std / np.where(norms > 0, norms, 1.0),
                             np.inf)
    finite = per_pixel[np.isfinite(per_pixel)]
    if finite.size == 0:
        raise DegenerateResponseError("all columns have zero norm")
    return per_pixel, float(finite.min()), float(finite.max())


def full_scale_noise_std(mesh: MeshSpec, materials: MaterialSet,
                         t_max: float, snr_db: float = 40.0,
                         hot_pixel: int | None = None) -> float:
    """Noise floor implied by an SNR quoted against the full-scale signal.

    The full-scale reference is the boundary response to the center junction
    held at the top of the operating range; noise std is its rms divided by
    10^(snr/20). This is the convention a fixed-range readout chain uses to
    quote its dynamic range.
    """
    if hot_pixel is None:
        hot_pixel = center_pixel(mesh)
    field = np.full(mesh.n_pixels, materials.reference_temperature)
    field[hot_pixel] = float(t_max)
    needs_state = not isinstance(materials.interlayer, (NoInterlayer, ConstantR))
    if needs_state:
        system = assemble(mesh, materials, t_state=field)
        v = boundary_voltages(system, field)
    else:
        system = assemble(mesh, materials)
        v = boundary_voltages(system, field - materials.reference_temperature)
    rms = float(np.sqrt(np.mean(v ** 2)))
    if rms <= 0:
        raise DegenerateResponseError("full-scale reference response is zero")
    return rms / 10 ** (snr_db / 20.0)


# ---------------------------------------------------------------------------
# CSV export


def export_map_csv(smap: SensitivityMap, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("pixel_index,row,col,sigma_v_per_k\n")
        for j, s in enumerate(smap.sigma):
            fh.write(f"{j},{j // smap.cols},{j % smap.cols},{s:.12e}\n")


def export_sweep_csv(sweep: SweepResult, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("x,value,variant,label\n")
        for x, v in zip(sweep.x, sweep.values):
            fh.write(f"{x:.12e},{v:.12e},{sweep.variant},{sweep.label}\n")
        if sweep.baseline is not None:
            fh.write(f"0,{sweep.baseline:.12e},{sweep.variant},baseline\n")


def export_net_csv(per_pixel: np.ndarray, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("pixel_index,net_k\n")
        for j, v in enumerate(per_pixel):
            fh.write(f"{j},{v:.12e}\n")
