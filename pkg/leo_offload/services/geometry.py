"""
Satellite kinematics, visibility and the UE-satellite link model.

Angles are geocentric, measured clockwise from the UE's zenith line and
wrapped to [0, 2pi). All satellites share one orbital plane; satellite j sits
at anchor + j * spacing at t = 0 and moves at the scenario's angular speed.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from scipy.special import erfc

from ..models.scenario import ScenarioConfig

TWO_PI = 2.0 * math.pi
ENTRY_PAD_S = 1e-6  # keeps the entry instant strictly inside the visible arc


@dataclass(frozen=True)
class SatelliteState:
    """Position and server availability of one satellite at an instant."""
    index: int
    angle: float
    busy_until: float = 0.0


@dataclass(frozen=True)
class LinkState:
    """Link observations between the UE and one satellite at an instant."""
    angle: float
    distance_km: float
    gain: float
    snr: float
    rate: float
    ber: float


def wrap_angle(gamma: float) -> float:
    """Wrap an angle in radians to [0, 2pi)."""
    wrapped = gamma % TWO_PI
    if wrapped >= TWO_PI:
        return 0.0
    return wrapped


def distance(gamma: float, cfg: ScenarioConfig) -> float:
    """UE-satellite distance in km by the cosine law."""
    r = cfg.earth_radius_km
    orbit = cfg.orbit_radius_km
    return math.sqrt(r * r + orbit * orbit - 2.0 * r * orbit * math.cos(gamma))


def is_visible(gamma: float, cfg: ScenarioConfig) -> bool:
    """True iff the satellite lies on the (closed) visible arc."""
    a = wrap_angle(gamma)
    return min(a, TWO_PI - a) <= cfg.visibility_half_angle_rad


def channel_gain(s_km: float, cfg: ScenarioConfig) -> float:
    """Free-space gain G_sys * beta_o / s^2 with s in meters."""
    s_m = s_km * 1000.0
    return cfg.system_gain_linear * cfg.ref_gain_w / (s_m * s_m)


def snr(h: float, cfg: ScenarioConfig) -> float:
    """Linear SNR for channel gain h."""
    return cfg.ue_tx_power_w * h / cfg.noise_power_w


def data_rate(snr_value: float, cfg: ScenarioConfig) -> float:
    """Shannon rate in bits/s."""
    return cfg.bandwidth_hz * math.log2(1.0 + snr_value)


def ber(snr_value: float) -> float:
    """BPSK bit error rate erfc(sqrt(SNR)) / 2."""
    return float(erfc(math.sqrt(snr_value))) / 2.0


def satellite_angle(j: int, t: float, cfg: ScenarioConfig) -> float:
    """Geocentric angle of satellite j at time t."""
    direction = -1.0 if cfg.clockwise else 1.0
    return wrap_angle(cfg.initial_anchor_rad + j * cfg.sat_spacing_rad + direction * cfg.angular_speed * t)


def link_at(j: int, t: float, cfg: ScenarioConfig) -> LinkState:
    """Evaluate the full link chain to satellite j at time t."""
    gamma = satellite_angle(j, t, cfg)
    s = distance(gamma, cfg)
    h = channel_gain(s, cfg)
    ratio = snr(h, cfg)
    return LinkState(angle=gamma, distance_km=s, gain=h, snr=ratio, rate=data_rate(ratio, cfg), ber=ber(ratio))


def next_visible_time(j: int, t: float, cfg: ScenarioConfig) -> Optional[float]:
    """
    Earliest instant >= t at which satellite j is visible.

    Returns None when the satellite stays out of view for longer than the
    scenario's visibility horizon.
    """
    gamma = satellite_angle(j, t, cfg)
    if is_visible(gamma, cfg):
        return t

    half_angle = cfg.visibility_half_angle_rad
    if cfg.clockwise:
        wait = (gamma - half_angle) / cfg.angular_speed
    else:
        wait = (TWO_PI - half_angle - gamma) / cfg.angular_speed
    wait += ENTRY_PAD_S

    if wait > cfg.visibility_horizon_s:
        return None
    return t + wait


def migration_target(j: int, t: float, cfg: ScenarioConfig) -> Optional[Tuple[int, int]]:
    """
    Landing satellite and hop count for a result computed on satellite j at t.

    Results on a satellite at (0, pi) travel counterclockwise (towards lower
    indices), otherwise clockwise; indices wrap modulo M. Returns None when no
    satellite is visible at t.
    """
    gamma = satellite_angle(j, t, cfg)
    if is_visible(gamma, cfg):
        return j, 0

    step = -1 if 0.0 < gamma < math.pi else 1
    m = cfg.num_satellites
    for hops in range(1, m):
        k = (j + step * hops) % m
        if is_visible(satellite_angle(k, t, cfg), cfg):
            return k, hops
    return None


class Constellation:
    """Read-only view of the constellation of one scenario."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def __len__(self) -> int:
        return self.cfg.num_satellites

    def angle(self, j: int, t: float) -> float:
        return satellite_angle(j, t, self.cfg)

    def angles(self, t: float) -> List[float]:
        return [satellite_angle(j, t, self.cfg) for j in range(self.cfg.num_satellites)]

    def visible(self, t: float) -> List[int]:
        """Indices of satellites on the visible arc at t."""
        return [j for j, gamma in enumerate(self.angles(t)) if is_visible(gamma, self.cfg)]

    def states(self, t: float, busy_until: Optional[Sequence[float]] = None) -> List[SatelliteState]:
        busy = [0.0] * self.cfg.num_satellites if busy_until is None else list(busy_until)
        return [SatelliteState(index=j, angle=gamma, busy_until=busy[j]) for j, gamma in enumerate(self.angles(t))]
