"""Poisson rare-event occupancy model and operating-envelope calculations.

A measurement window of duration tau_m is treated as K = tau_m/tau_e
statistically independent snapshots, each carrying a Poisson number of
ongoing events with mean s = P_e * A_s * tau_e. The window is violated when
any snapshot holds more than q_t_max simultaneous events. A continuous-time
Monte-Carlo simulator is included so the error of the independent-snapshot
approximation can be quantified directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError, ValidationError


@dataclass(frozen=True)
class EventStatistics:
    """Rates, timescales, and geometry of the rare-event operating point."""

    areal_rate: float              # P_e, events / (m^2 s)
    event_duration: float          # tau_e, s
    window_duration: float         # tau_m, s
    sensing_area: float            # A_s, m^2
    pixel_area: float              # A_p, m^2
    q_t_max: int = 1
    tolerance: float = 0.01        # delta
    event_footprint: Optional[float] = None   # A_e, m^2
    pixel_time_constant: Optional[float] = None  # tau_s, s

    def __post_init__(self):
        for name in ("areal_rate", "event_duration", "window_duration",
                     "sensing_area", "pixel_area"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 < self.tolerance < 1.0:
            raise ValidationError("tolerance must lie in (0, 1)")
        if self.q_t_max < 0:
            raise ValidationError("q_t_max must be >= 0")

    @property
    def snapshot_mean(self) -> float:
        """s = P_e * A_s * tau_e, expected simultaneous ongoing events."""
        return self.areal_rate * self.sensing_area * self.event_duration

    @property
    def snapshot_count(self) -> float:
        """K = tau_m / tau_e."""
        return self.window_duration / self.event_duration


def snapshot_pmf(s: float, n: int) -> float:
    """Poisson pmf e^-s s^n / n!, evaluated in the log domain."""
    if s < 0:
        raise ValidationError("s must be nonnegative")
    if n < 0:
        raise ValidationError("n must be nonnegative")
    if s == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-s + n * math.log(s) - math.lgamma(n + 1))


def _log_snapshot_cdf(s: float, q: int) -> float:
    """log P{N <= q} for one Poisson(s) snapshot, stable for small s."""
    if s == 0.0:
        return 0.0
    # tail = P{N > q}; for small s the head is ~1, so compute the tail
    # directly and use log1p.
    log_terms = [-s + n * math.log(s) - math.lgamma(n + 1)
                 for n in range(q + 1)]
    m = max(log_terms)
    log_head = m + math.log(sum(math.exp(t - m) for t in log_terms))
    if log_head < math.log(0.5):
        return log_head
    # head is close to 1: evaluate the tail as an explicit series instead
    # of 1 - exp(log_head), which would round at machine precision
    tail = 0.0
    n = q + 1
    term = math.exp(-s + n * math.log(s) - math.lgamma(n + 1))
    while term > tail * 1e-18 and n < q + 400:
        tail += term
        n += 1
        term *= s / n
    return math.log1p(-tail)


def window_violation_probability(s: float, k: float, q_t_max: int) -> float:
    """1 - P{every snapshot holds <= q_t_max events}, K independent snapshots.

    Evaluated as -expm1(K * log(cdf)) so tiny probabilities survive the
    exponentiation without cancellation.
    """
    if s < 0:
        raise ValidationError("s must be nonnegative")
    if k < 1:
        raise ValidationError("K must be >= 1")
    log_cdf = _log_snapshot_cdf(s, q_t_max)
    return -math.expm1(k * log_cdf)


def occupancy_decomposition(s: float, k: float) -> tuple[float, float, float]:
    """(P_0, P_1, P_ge2): all snapshots empty, at most one event everywhere
    with at least one somewhere, and any multi-event overlap."""
    p0 = math.exp(-k * s)
    p_le1 = math.exp(k * _log_snapshot_cdf(s, 1))
    return p0, p_le1 - p0, -math.expm1(k * _log_snapshot_cdf(s, 1))


def max_admissible_rate(stats: EventStatistics,
                        delta: Optional[float] = None,
                        s_bracket: tuple[float, float] = (1e-16, 1e2),
                        rtol: float = 1e-12) -> float:
    """Largest areal event rate whose violation probability stays at delta.

    Inverts window_violation_probability in s by bisection on a log scale
    (the probability is monotone increasing in s), then converts back via
    P_e = s / (A_s * tau_e).
    """
    if delta is None:
        delta = stats.tolerance
    if not 0.0 < delta < 1.0:
        raise ValidationError("delta must lie in (0, 1)")
    k, q = stats.snapshot_count, stats.q_t_max
    lo, hi = s_bracket
    f_lo = window_violation_probability(lo, k, q) - delta
    f_hi = window_violation_probability(hi, k, q) - delta
    if f_lo > 0 or f_hi < 0:
        raise DomainError("delta is not bracketed by the s search interval")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if window_violation_probability(mid, k, q) > delta:
            hi = mid
        else:
            lo = mid
        if hi / lo - 1.0 < rtol:
            break
    s_star = math.sqrt(lo * hi)
    return s_star / (stats.sensing_area * stats.event_duration)


def fill_factor(pixel_area: float, sensing_area: float,
                rows: int, cols: int) -> float:
    """Active-absorber area fraction A_p / (A_s / (M*N)).

    For sub-pixel events this ratio is also the capture probability that an
    arriving event lands on an active absorber.
    """
    if pixel_area <= 0 or sensing_area <= 0:
        raise ValidationError("areas must be positive")
    return pixel_area * rows * cols / sensing_area


def sensing_area_for_fill(pixel_area: float, fill: float,
                          rows: int, cols: int) -> float:
    """Invert fill_factor: total sensing area holding MN pixels at a fill."""
    if not 0.0 < fill <= 1.0:
        raise ValidationError("fill must lie in (0, 1]")
    return rows * cols * pixel_area / fill


def regime_check(stats: EventStatistics, ratio_min: float = 10.0,
                 pixel_count: Optional[int] = None) -> dict:
    """Advisory check of the timescale and area separations the model needs.

    Verifies tau_m >> tau_e, tau_e >> tau_s (when tau_s is known), and
    A_s >> A_p. Each entry is "pass", "warn", or "skipped".
    """
    report = {}
    report["window_vs_event"] = (
        "pass" if stats.snapshot_count >= ratio_min else "warn")
    if stats.pixel_time_constant is None:
        report["event_vs_pixel"] = "skipped"
    else:
        report["event_vs_pixel"] = (
            "pass" if stats.event_duration / stats.pixel_time_constant
            >= ratio_min else "warn")
    area_floor = (pixel_count / 2.0) if pixel_count else ratio_min
    report["area_separation"] = (
        "pass" if stats.sensing_area / stats.pixel_area >= area_floor
        else "warn")
    if stats.event_footprint is not None:
        ratio = stats.event_footprint / stats.pixel_area
        report["footprint_regime"] = ("contact" if ratio >= 1.0
                                      else "bolometer")
    return report


# ---------------------------------------------------------------------------
# Monte-Carlo cross-check


def simulate_violation_probability(s: float, k: float, q_t_max: int,
                                   n_windows: int, seed: int = 0,
                                   independent_snapshots: bool = False,
                                   ) -> tuple[float, float]:
    """Estimate the violation probability by direct simulation.

    With independent_snapshots=True each window draws K iid Poisson(s)
    counts, matching the analytic model exactly. Otherwise events arrive as
    a homogeneous Poisson process in continuous time with fixed duration
    tau_e (warm-started so events straddling the window opening are
    counted), which probes the independence approximation itself.

    Returns (estimate, standard_error).
    """
    rng = np.random.default_rng(np.random.Philox(key=seed))
    k_int = int(round(k))
    violations = 0
    if independent_snapshots:
        for _ in range(n_windows):
            counts = rng.poisson(s, size=k_int)
            violations += bool(np.any(counts > q_t_max))
    else:
        # window [0, k) in units of tau_e; arrivals on [-1, k) each cover
        # [t, t+1), so concurrency at time x counts arrivals in (x-1, x]
        rate_total = s * (k + 1.0)
        for _ in range(n_windows):
            n = rng.poisson(rate_total)
            if n <= q_t_max:
                continue
            starts = np.sort(rng.uniform(-1.0, k, size=n))
            ends = starts + 1.0
            # sweep: concurrency exceeds q_t_max iff start[i + q] < end[i]
            q = q_t_max
            if np.any(starts[q:] < ends[:n - q] - 1e-15):
                # restrict to overlap intervals intersecting the window
                over = (starts[q:] < ends[:n - q]) & (ends[:n - q] > 0) \
                    & (starts[q:] < k)
                if np.any(over):
                    violations += 1
    p = violations / n_windows
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_windows ** 2) / n_windows)
    return p, se


# ---------------------------------------------------------------------------
# CSV interface


def export_occupancy_csv(s_grid, k_grid, path, config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("k,s,p0,p1,p_ge2\n")
        for k in k_grid:
            for s in s_grid:
                p0, p1, p2 = occupancy_decomposition(s, k)
                fh.write(f"{k:g},{s:.12e},{p0:.12e},{p1:.12e},{p2:.12e}\n")
