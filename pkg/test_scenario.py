"""
Tests for scenario parsing, validation and unit conversion.
"""

import math

import pytest

from leo_offload.core.errors import ScenarioError
from leo_offload.models.scenario import (
    ScenarioConfig,
    dbm_to_watts,
    dump_scenario,
    load_scenario,
    load_scenario_file,
    mb_to_bits,
    scenario_hash,
)
from leo_offload.services.geometry import channel_gain, distance, snr


def test_reference_parameters_convert_to_si(table2_cfg):
    cfg = table2_cfg
    assert cfg.num_tasks == 15
    assert cfg.num_satellites == 25
    assert cfg.earth_radius_m == 6_371_000.0
    assert cfg.orbit_altitude_m == 780_000.0
    assert cfg.orbit_radius_km == 7151.0
    assert cfg.bandwidth_hz == 8e8
    assert cfg.ref_gain_w == pytest.approx(1e-8, rel=1e-12)
    assert cfg.compute_power_w == pytest.approx(5.4, rel=1e-12)
    assert cfg.sat_spacing_rad == pytest.approx(math.radians(2.0))
    assert cfg.initial_anchor_rad == pytest.approx(math.radians(344.0))
    assert cfg.visibility_half_angle_rad == pytest.approx(math.acos(6371.0 / 7151.0))
    assert cfg.angular_speed == pytest.approx(math.sqrt(398600.4418 / 7151.0 ** 3))
    assert cfg.angular_speed == pytest.approx(1.044e-3, rel=1e-3)


def test_unit_helpers():
    assert mb_to_bits(400.0) == 3.2e9
    assert dbm_to_watts(30.0) == 1.0
    assert dbm_to_watts(-50.0) == pytest.approx(1e-8, rel=1e-12)


def test_calibrated_zenith_snr(table2_cfg):
    """The derived system gain puts the zenith SNR at the calibration target."""
    zenith = snr(channel_gain(distance(0.0, table2_cfg), table2_cfg), table2_cfg)
    assert zenith == pytest.approx(10 ** 1.5, rel=1e-12)


def test_generated_sizes_are_equal_pool_shares(table2_cfg):
    assert sorted(table2_cfg.sizes_mb) == [400.0] * 5 + [800.0] * 5 + [1000.0] * 5

    reseeded = table2_cfg.reseeded(7)
    assert sorted(reseeded.sizes_mb) == sorted(table2_cfg.sizes_mb)
    assert table2_cfg.reseeded(7).sizes_mb == reseeded.sizes_mb


def test_explicit_sizes_are_kept(tiny_cfg):
    assert tiny_cfg.sizes_mb == (400.0, 800.0, 1000.0)
    assert tiny_cfg.reseeded(3).sizes_mb == (400.0, 800.0, 1000.0)


def test_dump_and_reload_is_identity(table2_cfg, tiny_cfg):
    for cfg in (table2_cfg, tiny_cfg):
        again = load_scenario(dump_scenario(cfg))
        assert again == cfg
        assert scenario_hash(again) == scenario_hash(cfg)


def test_scenario_hash_tracks_content(tiny_cfg):
    assert scenario_hash(tiny_cfg) == scenario_hash(tiny_cfg.with_overrides())
    assert scenario_hash(tiny_cfg) != scenario_hash(tiny_cfg.with_overrides(privacy_threshold=0.7))


def test_zero_tasks_is_rejected_with_field_name():
    with pytest.raises(ScenarioError) as excinfo:
        load_scenario("num_tasks: 0\n")
    assert excinfo.value.field == "num_tasks"


def test_unknown_field_is_rejected():
    with pytest.raises(ScenarioError) as excinfo:
        load_scenario("num_tasks: 3\nwarp_drive: true\n")
    assert excinfo.value.field == "warp_drive"


@pytest.mark.parametrize("text", [
    "num_tasks: [1,\n",
    "- 1\n- 2\n",
    "num_tasks: 2\ntask_sizes: [100.0]\n",
    "num_tasks: 1\ntask_sizes: [-5.0]\n",
    "num_satellites: 2\nsat_compute_speed_mbps: [45.0]\n",
    "failure_threshold: 1.5\n",
    "bandwidth_hz: 0\n",
])
def test_invalid_scenarios_raise(text):
    with pytest.raises(ScenarioError):
        load_scenario(text)


def test_empty_document_gives_defaults():
    assert load_scenario("") == ScenarioConfig()


def test_per_satellite_speeds():
    cfg = load_scenario("num_satellites: 2\nsat_compute_speed_mbps: [30.0, 60.0]\n")
    assert cfg.sat_speed_mbps(0) == 30.0
    assert cfg.sat_speed_mbps(1) == 60.0


def test_overrides_revalidate(tiny_cfg):
    cfg = tiny_cfg.with_overrides(num_tasks=4, task_sizes=[])
    assert len(cfg.sizes_mb) == 4
    assert sorted(cfg.sizes_mb) == [400.0, 400.0, 800.0, 1000.0]
    with pytest.raises(ScenarioError):
        tiny_cfg.with_overrides(num_tasks=4)


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario_file(tmp_path / "nope.scenario")
