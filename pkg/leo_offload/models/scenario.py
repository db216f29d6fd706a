"""
Scenario configuration for the offloading simulator.

A scenario file is a YAML mapping in human units (MB, MB/s, dBm, degrees,
km, GHz). ``ScenarioConfig`` keeps those raw values so that serialising a
loaded scenario reproduces it exactly; every consumer reads the SI-converted
values through the accessor properties instead of the raw fields.
"""

import hashlib
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from ..core.errors import ScenarioError

MB_BITS = 8e6                       # 1 MB = 10^6 bytes
MU_EARTH_KM3_S2 = 398600.4418       # standard gravitational parameter
RAW_CHANNEL_THRESHOLD = 1e-6        # uncalibrated threshold used when system_gain == 1


def mb_to_bits(size_mb: float) -> float:
    """Convert megabytes to bits."""
    return size_mb * MB_BITS


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power level to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


class ScenarioConfig(BaseModel):
    """All physical, workload and constraint parameters of one scenario"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Workload
    num_tasks: int = Field(default=15, ge=1)
    task_sizes: List[float] = Field(default_factory=list)
    task_size_pool: List[float] = Field(default_factory=lambda: [400.0, 800.0, 1000.0], min_length=1)

    # Constellation
    num_satellites: int = Field(default=25, ge=1)
    sat_compute_speed_mbps: Union[float, List[float]] = 45.0
    earth_radius_km: float = Field(default=6371.0, gt=0)
    orbit_altitude_km: float = Field(default=780.0, gt=0)
    sat_spacing_deg: float = Field(default=2.0, gt=0)
    initial_anchor_angle_deg: float = 344.0
    angular_speed_rad_s: Optional[float] = Field(default=None, gt=0)
    clockwise: bool = True
    isl_rate_mbps: float = Field(default=10000.0, gt=0)
    visibility_half_angle_deg: Optional[float] = Field(default=None, gt=0, le=90)
    visibility_horizon_s: float = Field(default=60.0, ge=0)

    # UE and link budget
    ue_tx_power_w: float = Field(default=5.0, gt=0)
    bandwidth_hz: float = Field(default=8e8, gt=0)
    noise_power_w: float = Field(default=1e-7, gt=0)
    ue_compute_speed_mbps: float = Field(default=30.0, gt=0)
    cpu_freq_ghz: float = Field(default=3.0, gt=0)
    hardware_factor: float = Field(default=0.2, gt=0)
    ref_gain_dbm: float = -50.0
    system_gain: Optional[float] = Field(default=None, gt=0)
    snr_calibration_db: float = 15.0
    channel_threshold: Optional[float] = Field(default=None, ge=0)
    channel_threshold_angle_deg: Optional[float] = Field(default=None, ge=0, le=180)

    # Sizes of returned results and privacy padding, as fractions of D_i
    result_size_ratio: float = Field(default=0.1, ge=0, le=1)
    redundancy_ratio: float = Field(default=0.1, ge=0, le=1)

    # Objective and constraints
    privacy_weight: float = Field(default=1.0, ge=0)
    energy_weight: float = Field(default=1.0, ge=0)
    time_threshold_s: float = Field(default=200.0, gt=0)
    failure_threshold: float = Field(default=0.01, gt=0, lt=1)
    privacy_threshold: float = Field(default=0.6, ge=0)
    reward_constant: float = 0.0

    rng_seed: int = 0

    _sizes: Tuple[float, ...] = PrivateAttr(default=())

    @model_validator(mode="after")
    def _check_cross_field(self) -> "ScenarioConfig":
        if self.task_sizes:
            if len(self.task_sizes) != self.num_tasks:
                raise ValueError(
                    f"task_sizes: expected {self.num_tasks} entries, got {len(self.task_sizes)}"
                )
            if any(size <= 0 for size in self.task_sizes):
                raise ValueError("task_sizes: every size must be strictly positive")
        if any(size <= 0 for size in self.task_size_pool):
            raise ValueError("task_size_pool: every size must be strictly positive")
        speeds = self.sat_compute_speed_mbps
        if isinstance(speeds, list):
            if len(speeds) != self.num_satellites:
                raise ValueError(
                    f"sat_compute_speed_mbps: expected {self.num_satellites} entries, got {len(speeds)}"
                )
            if any(speed <= 0 for speed in speeds):
                raise ValueError("sat_compute_speed_mbps: every speed must be strictly positive")
        elif speeds <= 0:
            raise ValueError("sat_compute_speed_mbps: must be strictly positive")
        return self

    def model_post_init(self, __context: Any) -> None:
        if self.task_sizes:
            self._sizes = tuple(float(size) for size in self.task_sizes)
            return
        # Equal shares of the pool, shuffled per seed
        pool = self.task_size_pool
        cycled = np.array([pool[i % len(pool)] for i in range(self.num_tasks)], dtype=float)
        order = np.random.default_rng(self.rng_seed).permutation(self.num_tasks)
        self._sizes = tuple(float(size) for size in cycled[order])

    # ------------------------------------------------------------------
    # Derived copies
    # ------------------------------------------------------------------
    def with_overrides(self, **fields: Any) -> "ScenarioConfig":
        """Return a new validated scenario with some raw fields replaced."""
        data = self.model_dump()
        data.update(fields)
        return _validate(data)

    def reseeded(self, seed: int) -> "ScenarioConfig":
        """Return the same scenario with another seed (re-draws generated task sizes)."""
        return self.with_overrides(rng_seed=int(seed))

    # ------------------------------------------------------------------
    # SI accessors
    # ------------------------------------------------------------------
    @property
    def sizes_mb(self) -> Tuple[float, ...]:
        return self._sizes

    @property
    def ref_gain_w(self) -> float:
        return dbm_to_watts(self.ref_gain_dbm)

    @property
    def earth_radius_m(self) -> float:
        return self.earth_radius_km * 1000.0

    @property
    def orbit_altitude_m(self) -> float:
        return self.orbit_altitude_km * 1000.0

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.orbit_altitude_km

    @property
    def sat_spacing_rad(self) -> float:
        return math.radians(self.sat_spacing_deg)

    @property
    def initial_anchor_rad(self) -> float:
        return math.radians(self.initial_anchor_angle_deg)

    @property
    def angular_speed(self) -> float:
        """Angular speed in rad/s; Keplerian circular-orbit value unless given."""
        if self.angular_speed_rad_s is not None:
            return self.angular_speed_rad_s
        return math.sqrt(MU_EARTH_KM3_S2 / self.orbit_radius_km ** 3)

    @property
    def visibility_half_angle_rad(self) -> float:
        """Half-width of the visible arc; horizon-limited line of sight unless given."""
        if self.visibility_half_angle_deg is not None:
            return math.radians(self.visibility_half_angle_deg)
        return math.acos(self.earth_radius_km / self.orbit_radius_km)

    @property
    def compute_power_w(self) -> float:
        """UE computing power kappa * f^3 with f in GHz."""
        return self.hardware_factor * self.cpu_freq_ghz ** 3

    @property
    def system_gain_linear(self) -> float:
        """Aggregate link-budget gain; calibrated to the target zenith SNR unless given."""
        if self.system_gain is not None:
            return self.system_gain
        target_snr = 10.0 ** (self.snr_calibration_db / 10.0)
        return target_snr * self.noise_power_w * self.orbit_altitude_m ** 2 / (
            self.ue_tx_power_w * self.ref_gain_w
        )

    @property
    def channel_threshold_angle_rad(self) -> float:
        if self.channel_threshold_angle_deg is not None:
            return math.radians(self.channel_threshold_angle_deg)
        return self.visibility_half_angle_rad / 2.0

    @property
    def channel_threshold_linear(self) -> float:
        """Good/poor channel threshold omega in calibrated gain units."""
        if self.channel_threshold is not None:
            return self.channel_threshold
        if self.system_gain_linear == 1.0:
            return RAW_CHANNEL_THRESHOLD
        from ..services.geometry import channel_gain, distance

        return channel_gain(distance(self.channel_threshold_angle_rad, self), self)

    def sat_speed_mbps(self, j: int) -> float:
        """Compute speed of satellite j in MB/s."""
        speeds = self.sat_compute_speed_mbps
        if isinstance(speeds, list):
            return float(speeds[j])
        return float(speeds)


def _validate(data: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first.get("loc", ())) or None
        message = first.get("msg", str(e))
        label = field or "scenario"
        raise ScenarioError(f"Invalid scenario field {label}: {message}", field=field) from e


def load_scenario(source: str) -> ScenarioConfig:
    """
    Parse and validate scenario text.

    Args:
        source: YAML scenario document

    Returns:
        ScenarioConfig: validated, immutable configuration

    Raises:
        ScenarioError: if the text does not parse or a field is invalid
    """
    try:
        data = yaml.safe_load(source)
    except yaml.YAMLError as e:
        raise ScenarioError(f"Scenario does not parse: {e}") from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("Scenario must be a mapping of field names to values")

    return _validate(data)


def load_scenario_file(path: Union[str, Path]) -> ScenarioConfig:
    """Load a scenario from disk; a missing file raises FileNotFoundError."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    cfg = load_scenario(text)
    logger.info(
        f"Loaded scenario {path.name}: N={cfg.num_tasks}, M={cfg.num_satellites}, "
        f"hash={scenario_hash(cfg)[:12]}"
    )
    return cfg


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Serialise a scenario to canonical YAML text."""
    return yaml.safe_dump(cfg.model_dump(), sort_keys=True, default_flow_style=False)


def scenario_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical serialisation, used for provenance headers."""
    return hashlib.sha256(dump_scenario(cfg).encode("utf-8")).hexdigest()
