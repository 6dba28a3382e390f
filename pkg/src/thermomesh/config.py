"""TOML run-configuration loading, validation, and content hashing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .exceptions import ValidationError
from .mesh import (ConstantR, IdealSwitch, MaterialSet, MeshSpec, NoInterlayer,
                   Ntc, OperatingRange, Vo2Piecewise, Vo2Segment,
                   ceramic_ntc, linear_interlayer, vo2_interlayer)


@dataclass(frozen=True)
class RunConfig:
    mesh: MeshSpec
    materials: MaterialSet
    op_range: OperatingRange
    config_hash: str
    dataset: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    rare_event: dict = field(default_factory=dict)
    label: str = ""


def _build_interlayer(spec: Any):
    if spec is None or spec == "none":
        return NoInterlayer()
    if isinstance(spec, str):
        presets = {"ceramic": ceramic_ntc, "vo2": vo2_interlayer,
                   "linear": linear_interlayer}
        if spec not in presets:
            raise ValidationError(f"unknown interlayer preset {spec!r}")
        return presets[spec]()
    if not isinstance(spec, dict) or "type" not in spec:
        raise ValidationError("interlayer must be a preset name or a table "
                              "with a 'type' key")
    kind = spec["type"]
    args = {k: v for k, v in spec.items() if k != "type"}
    try:
        if kind == "none":
            return NoInterlayer()
        if kind == "constant_r":
            return ConstantR(**args)
        if kind == "ntc":
            return Ntc(**args)
        if kind == "ideal_switch":
            return IdealSwitch(**args)
        if kind == "vo2_piecewise":
            segments = tuple(Vo2Segment(**seg) for seg in args.pop("segments"))
            return Vo2Piecewise(segments=segments, **args)
    except TypeError as exc:
        raise ValidationError(f"bad interlayer parameters: {exc}") from exc
    raise ValidationError(f"unknown interlayer type {kind!r}")


def _take(table: dict, cls, **extra):
    try:
        return cls(**table, **extra)
    except TypeError as exc:
        raise ValidationError(f"bad {cls.__name__} fields: {exc}") from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    raw = path.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config is not valid TOML: {exc}") from exc

    if "mesh" not in data:
        raise ValidationError("config needs a [mesh] table")
    mesh = _take(dict(data["mesh"]), MeshSpec)

    mat_table = dict(data.get("materials", {}))
    interlayer = _build_interlayer(mat_table.pop("interlayer", None))
    materials = _take(mat_table, MaterialSet, interlayer=interlayer)

    range_table = dict(data.get("range", {"t_min": 298.0, "t_max": 373.0,
                                          "t_amb": 298.0}))
    op_range = _take(range_table, OperatingRange)

    known = {"mesh", "materials", "range", "dataset", "sweep", "rare_event",
             "label"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")

    return RunConfig(mesh=mesh, materials=materials, op_range=op_range,
                     config_hash=digest,
                     dataset=dict(data.get("dataset", {})),
                     sweep=dict(data.get("sweep", {})),
                     rare_event=dict(data.get("rare_event", {})),
                     label=str(data.get("label", "")))
