"""Sensor geometry, material laws, and interlayer resistance variants.

All quantities are SI; temperatures are absolute kelvin unless a value is
explicitly a rise relative to the cold junction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .exceptions import DomainError, ValidationError

#: Vacuum permittivity (CODATA 2018), F/m.
EPSILON_0 = 8.8541878128e-12


# ---------------------------------------------------------------------------
# interlayer variants


@dataclass(frozen=True)
class NoInterlayer:
    """Direct metal-metal crossing: the two wire planes short at each
    junction and the crossing nodes merge into one electrical node."""


@dataclass(frozen=True)
class ConstantR:
    """Temperature-independent resistive interlayer."""

    resistance: float  # ohm

    def __post_init__(self):
        if not self.resistance > 0:
            raise ValidationError("ConstantR resistance must be positive")


@dataclass(frozen=True)
class Ntc:
    """Exponential NTC thermistor law rho(T) = rho0 * exp(beta*(1/T - 1/T0))."""

    rho0: float  # ohm*m at reference temperature t0
    beta: float  # K
    t0: float    # K

    def __post_init__(self):
        if not (self.rho0 > 0 and self.beta > 0 and self.t0 > 0):
            raise ValidationError("Ntc requires rho0 > 0, beta > 0, t0 > 0")

    def resistivity(self, t: float) -> float:
        if t <= 0:
            raise DomainError(f"absolute temperature must be positive, got {t}")
        return self.rho0 * math.exp(self.beta * (1.0 / t - 1.0 / self.t0))


@dataclass(frozen=True)
class Vo2Segment:
    """One NTC branch of a piecewise resistivity fit, valid on [t_low, t_high)."""

    t_low: float
    t_high: float
    rho0: float
    beta: float
    t0: float

    def resistivity(self, t: float) -> float:
        return self.rho0 * math.exp(self.beta * (1.0 / t - 1.0 / self.t0))


@dataclass(frozen=True)
class Vo2Piecewise:
    """Piecewise-NTC fit of a metal-insulator transition.

    Segments must be contiguous and ordered, and the resistivity must be
    continuous at every join to within 1% relative (checked on construction).
    """

    segments: tuple[Vo2Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("Vo2Piecewise needs at least one segment")
        for seg in self.segments:
            if not (seg.rho0 > 0 and seg.t0 > 0 and seg.t_low < seg.t_high):
                raise ValidationError(f"bad segment {seg}")
        for a, b in zip(self.segments, self.segments[1:]):
            if a.t_high != b.t_low:
                raise ValidationError(
                    f"segments not contiguous at {a.t_high} vs {b.t_low}"
                )
            ra = a.resistivity(a.t_high)
            rb = b.resistivity(b.t_low)
            if abs(ra - rb) > 0.01 * max(ra, rb):
                raise ValidationError(
                    f"resistivity discontinuous at join T={a.t_high}: {ra} vs {rb}"
                )

    @property
    def t_min(self) -> float:
        return self.segments[0].t_low

    @property
    def t_max(self) -> float:
        return self.segments[-1].t_high

    def resistivity(self, t: float) -> float:
        if not (self.t_min <= t <= self.t_max):
            raise DomainError(
                f"T={t} K outside piecewise coverage [{self.t_min}, {self.t_max}]"
            )
        for seg in self.segments:
            if t < seg.t_high:
                return seg.resistivity(t)
        return self.segments[-1].resistivity(t)


@dataclass(frozen=True)
class IdealSwitch:
    """Idealized thermal switch: closed at or above the threshold, open below."""

    t_threshold: float
    r_closed: float = 1e-3
    r_open: float = 1e12

    def __post_init__(self):
        if not (self.r_closed > 0 and self.r_open > 0):
            raise ValidationError("switch resistances must be positive")
        if self.r_open / self.r_closed < 1e6:
            raise ValidationError("IdealSwitch needs r_open/r_closed >= 1e6")


InterlayerModel = Union[NoInterlayer, ConstantR, Ntc, Vo2Piecewise, IdealSwitch]


# ---------------------------------------------------------------------------
# geometry and materials


@dataclass(frozen=True)
class MeshSpec:
    """Pixel-lattice geometry of the sensor.

    The pixel count rows*cols and the boundary channel count
    2*rows + 2*cols are derived, never stored.
    """

    rows: int
    cols: int
    pitch: float = 50e-6                 # m
    wire_cross_section: float = 5e-12    # m^2
    interlayer_area: float = 1e-10       # m^2
    interlayer_thickness: float = 1e-6   # m
    lead_length_fraction: float = 0.5

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValidationError("mesh needs rows >= 2 and cols >= 2")
        for name in ("pitch", "wire_cross_section", "interlayer_area",
                     "interlayer_thickness"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be strictly positive")
        if not 0.0 <= self.lead_length_fraction <= 1.0:
            raise ValidationError("lead_length_fraction must be in [0, 1]")

    @property
    def n_pixels(self) -> int:
        return self.rows * self.cols

    @property
    def n_channels(self) -> int:
        return 2 * self.rows + 2 * self.cols

    @property
    def pixel_area(self) -> float:
        return self.pitch ** 2

    @property
    def sensing_area(self) -> float:
        return (self.rows * self.pitch) * (self.cols * self.pitch)


@dataclass(frozen=True)
class MaterialSet:
    """Thermocouple legs plus the interlayer model.

    Leg a runs along rows (layer 1), leg b along columns (layer 2).
    Seebeck coefficients are treated as temperature-independent constants.
    """

    seebeck_leg_a: float = 21.7e-6     # V/K (Chromel-like)
    seebeck_leg_b: float = -17.3e-6    # V/K (Alumel-like)
    resistivity_leg_a: float = 7.06e-7  # ohm*m
    resistivity_leg_b: float = 2.9e-7   # ohm*m
    interlayer: InterlayerModel = field(default_factory=NoInterlayer)
    interlayer_rel_permittivity: float = 10.0
    reference_temperature: float = 298.0  # K, cold-junction datum

    def __post_init__(self):
        if not self.seebeck_leg_a - self.seebeck_leg_b > 0:
            raise ValidationError("net pair Seebeck coefficient must be positive")
        if not (self.resistivity_leg_a > 0 and self.resistivity_leg_b > 0):
            raise ValidationError("leg resistivities must be strictly positive")

    @property
    def pair_seebeck(self) -> float:
        return self.seebeck_leg_a - self.seebeck_leg_b


@dataclass(frozen=True)
class OperatingRange:
    """Characterized event-temperature interval [t_min, t_max] and the
    ambient (cold-junction) temperature.

    High-temperature interlayers are characterized for events well above
    ambient, so t_amb may sit below t_min; it must always sit below t_max.
    """

    t_min: float
    t_max: float
    t_amb: float

    def __post_init__(self):
        if not (self.t_min < self.t_max and self.t_amb < self.t_max):
            raise ValidationError("require t_min < t_max and t_amb < t_max")

    @property
    def event_t_min(self) -> float:
        """Lower end of the event-amplitude range (absolute K)."""
        return max(self.t_min, self.t_amb)


# ---------------------------------------------------------------------------
# operations


def interlayer_resistance(model: InterlayerModel, geometry: MeshSpec,
                          t: float) -> float:
    """Electrical resistance of one crossing's interlayer element at
    absolute temperature ``t``.

    Parallel-plate form R = rho(T) * thickness / area for resistivity-law
    variants. ``NoInterlayer`` returns exactly 0.0 as the merged-node marker.
    """
    if isinstance(model, NoInterlayer):
        return 0.0
    if isinstance(model, ConstantR):
        return model.resistance
    if isinstance(model, IdealSwitch):
        return model.r_closed if t >= model.t_threshold else model.r_open
    rho = model.resistivity(t)
    return rho * geometry.interlayer_thickness / geometry.interlayer_area


def rc_time_constant(materials: MaterialSet, t: float,
                     geometry: MeshSpec | None = None) -> float:
    """Junction RC time constant, rho(T) * eps0 * eps_r.

    Independent of pixel dimensions and interlayer geometry, except that a
    ConstantR interlayer only implies a resistivity through the parallel-plate
    geometry, so ``geometry`` is required for that variant.
    """
    model = materials.interlayer
    if isinstance(model, NoInterlayer):
        return 0.0
    if isinstance(model, ConstantR):
        if geometry is None:
            raise ValidationError(
                "ConstantR needs geometry to materialize a resistivity")
        rho = model.resistance * geometry.interlayer_area / geometry.interlayer_thickness
    elif isinstance(model, IdealSwitch):
        if geometry is None:
            raise ValidationError(
                "IdealSwitch needs geometry to materialize a resistivity")
        r = model.r_closed if t >= model.t_threshold else model.r_open
        rho = r * geometry.interlayer_area / geometry.interlayer_thickness
    else:
        rho = model.resistivity(t)
    return rho * EPSILON_0 * materials.interlayer_rel_permittivity


# ---------------------------------------------------------------------------
# shipped parameter sets
#
# The resistivity constants below are design defaults chosen so that the
# ceramic layer is effectively open at room temperature and a few ohms at
# its hot operating point, and so that the VO2 fit drops by about three
# orders of magnitude across its transition near 341 K. They are fitted
# design values, not measured properties of a specific film.

CERAMIC_RANGE = OperatingRange(t_min=973.0, t_max=1273.0, t_amb=298.0)
VO2_RANGE = OperatingRange(t_min=298.0, t_max=373.0, t_amb=298.0)
LINEAR_RANGE = OperatingRange(t_min=298.0, t_max=373.0, t_amb=298.0)


def ceramic_ntc() -> Ntc:
    """High-temperature perovskite-style NTC interlayer default."""
    return Ntc(rho0=1e-4, beta=6500.0, t0=1273.0)


def vo2_interlayer() -> Vo2Piecewise:
    """Two-branch piecewise NTC fit of a VO2-style transition at 341 K.

    The lower branch is the insulating phase; the upper branch carries the
    steep drop across the transition. rho0 of the upper branch is set from
    the lower branch's value at the join so the fit is exactly continuous.
    """
    low = Vo2Segment(t_low=250.0, t_high=341.0, rho0=0.1, beta=2600.0, t0=298.0)
    rho_join = low.resistivity(341.0)
    high = Vo2Segment(t_low=341.0, t_high=500.0, rho0=rho_join, beta=27500.0,
                      t0=341.0)
    return Vo2Piecewise(segments=(low, high))


def linear_interlayer(resistance: float = 100.0) -> ConstantR:
    """Default constant-R interlayer used by the shipped linear configs."""
    return ConstantR(resistance=resistance)
