from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leo_rsma import (ConfigError, SystemConfig, generate_realization,
                      load_config, noise_power, save_config)
from leo_rsma.model import channel_amplitude
from leo_rsma.pattern import first_null_angle


def test_noise_power_table_values():
    # -170 dBm/Hz over 10 MHz: -170 + 70 = -100 dBm = 1e-13 W
    cfg = SystemConfig(noise_density_dbm=-170.0, bandwidth_per_beam=10e6)
    assert noise_power(cfg) == pytest.approx(1e-13, rel=1e-12)
    cfg = SystemConfig(noise_density_dbm=-170.0, bandwidth_per_beam=1.0)
    assert noise_power(cfg) == pytest.approx(1e-20, rel=1e-12)
    cfg = SystemConfig(noise_density_dbm=0.0, bandwidth_per_beam=1.0)
    assert noise_power(cfg) == pytest.approx(1e-3, rel=1e-12)


def test_num_users_defaults_to_twice_beams():
    assert SystemConfig(num_beams=7, num_resource_blocks=7).num_users == 14


@pytest.mark.parametrize("kwargs", [
    dict(num_beams=5, num_users=3),           # fewer users than beams
    dict(total_power=0.0),
    dict(interference_threshold=-1.0),
    dict(bandwidth_per_beam=0.0),
    dict(step_size=0.0),
    dict(channel_mode="imaginary"),
    dict(block_pairing="checkerboard"),
    dict(geo_gain_lo=0.5, geo_gain_hi=0.1),
    dict(step_decay=0.0),
])
def test_invalid_configs_raise(kwargs):
    with pytest.raises(ConfigError):
        SystemConfig(**kwargs)


def test_realization_deterministic(cfg):
    a = generate_realization(cfg, 0)
    b = generate_realization(cfg, 0)
    assert np.array_equal(a.leo_gains, b.leo_gains)
    assert np.array_equal(a.leo_to_geo_gains, b.leo_to_geo_gains)
    assert np.array_equal(a.boresight_angles, b.boresight_angles)
    c = generate_realization(cfg, 1)
    assert not np.array_equal(a.leo_gains, c.leo_gains)


def test_normalized_amplitude_at_boresight_gives_g_max(cfg):
    amp = channel_amplitude(cfg, 0.0, 7e5)
    assert amp**2 == pytest.approx(cfg.g_max, rel=1e-12)


def test_physical_mode_inverse_square_law():
    cfg = SystemConfig(channel_mode="physical")
    a1 = channel_amplitude(cfg, 0.02, 6e5)
    a2 = channel_amplitude(cfg, 0.02, 12e5)
    assert a2**2 == pytest.approx(a1**2 / 4.0, rel=1e-12)


def test_generated_arrays_are_sane(cfg):
    real = generate_realization(cfg, 3)
    assert np.all(np.isfinite(real.power_gains))
    assert np.all(real.power_gains >= 0)
    assert np.all(real.boresight_angles >= 0)
    assert np.all(real.boresight_angles < np.pi / 2)
    assert np.all(real.boresight_angles < first_null_angle(cfg.theta_3db))
    assert np.all(real.leo_to_geo_gains >= cfg.geo_gain_lo)
    assert np.all(real.leo_to_geo_gains <= cfg.geo_gain_hi)


def test_normalized_gain_depends_only_on_geometry(cfg):
    """Changing power/rate knobs must not disturb the channel draws."""
    other = replace(cfg, total_power=123.0, min_rate=5e6, step_size=2e-3,
                    interference_threshold=7.0)
    a = generate_realization(cfg, 2)
    b = generate_realization(other, 2)
    assert np.array_equal(a.leo_gains, b.leo_gains)
    # the amplitude is a pure function of angle in normalized mode
    from leo_rsma.pattern import beam_gain
    expected = beam_gain(a.boresight_angles, cfg.theta_3db, cfg.g_max)
    assert np.allclose(a.power_gains, expected, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), trial=st.integers(0, 1000))
def test_realization_reproducible_property(seed, trial):
    cfg = SystemConfig(num_beams=2, num_resource_blocks=2, num_users=4, rng_seed=seed)
    a = generate_realization(cfg, trial)
    b = generate_realization(cfg, trial)
    assert np.array_equal(a.leo_gains, b.leo_gains)


def test_config_file_round_trip(tmp_path, cfg):
    path = tmp_path / "scenario.cfg"
    src = replace(cfg, total_power=42.5, num_beams=3, num_resource_blocks=3,
                  num_users=6, channel_mode="physical", rng_seed=99)
    save_config(src, path)
    back = load_config(path)
    assert back == src


def test_config_file_comments_and_errors(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text("# comment\nnum_beams = 3\nnum_resource_blocks = 3\n"
                    "num_users = 6  # inline comment\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.num_beams == 3 and cfg.num_users == 6

    path.write_text("not_a_key = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    path.write_text("just some words\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
