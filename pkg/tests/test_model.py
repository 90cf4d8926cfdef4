import math

import pytest

from urllc_ee import (ConfigError, SystemConfig, UserProfile, path_loss_gain,
                      parse_config_text, validate_config)
from urllc_ee.model import (db_to_linear, dbm_to_watts, frames_to_seconds,
                            linear_to_db, seconds_to_frames, watts_to_dbm)


class TestPathLoss:
    def test_one_meter_leaves_constant_term(self):
        assert path_loss_gain(1.0) == pytest.approx(10 ** -3.53, rel=1e-12)

    def test_cell_edge(self):
        # direct evaluation of the log-distance formula at 250 m
        expected = 10 ** (-(35.3 + 37.6 * math.log10(250.0)) / 10)
        assert path_loss_gain(250.0) == pytest.approx(expected, rel=1e-12)
        assert path_loss_gain(250.0) == pytest.approx(2.8428e-13, rel=1e-4)

    def test_ten_meters(self):
        assert path_loss_gain(10.0) == pytest.approx(10 ** -7.29, rel=1e-12)

    def test_attenuation_below_one(self):
        for d in (1.0, 5.0, 50.0, 500.0):
            assert 0 < path_loss_gain(d) < 1

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            path_loss_gain(0.0)
        with pytest.raises(ValueError):
            path_loss_gain(-3.0)


class TestUnitConversions:
    def test_db_roundtrip(self):
        for x in (1e-13, 0.5, 1.0, 123.4):
            assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)

    def test_dbm_roundtrip(self):
        for x in (1e-6, 1e-3, 10.0):
            assert dbm_to_watts(watts_to_dbm(x)) == pytest.approx(x, rel=1e-12)

    def test_frames_roundtrip(self):
        tf = 1e-4
        for t in (1e-4, 8e-4, 3.7e-3):
            assert frames_to_seconds(seconds_to_frames(t, tf), tf) == \
                pytest.approx(t, rel=1e-12)

    def test_reference_values(self):
        assert dbm_to_watts(40.0) == pytest.approx(10.0, rel=1e-12)
        assert dbm_to_watts(-173.0) == pytest.approx(10 ** -20.3, rel=1e-12)


class TestValidateConfig:
    def test_reference_queue_budget(self, cfg, single_user):
        # 1 ms end to end minus one UL and one DL frame leaves 0.8 ms
        qos = validate_config(cfg, [single_user])
        assert qos.queue_delay_frames == 8

    def test_equal_split(self, cfg, single_user):
        qos = validate_config(cfg, [single_user])
        assert qos.eps_c == qos.eps_q == qos.eps_h == pytest.approx(1e-7)
        assert qos.total_loss() <= cfg.loss_budget * (1 + 1e-12)

    def test_split_sums_within_budget(self, single_user):
        for eps_d in (1e-9, 3e-7, 1e-3, 0.3):
            cfg = SystemConfig(loss_budget=eps_d)
            qos = validate_config(cfg, [single_user])
            assert qos.total_loss() <= eps_d * (1 + 1e-12)

    def test_nonpositive_queue_budget_rejected(self, single_user):
        cfg = SystemConfig(e2e_delay=0.2e-3)
        with pytest.raises(ConfigError) as err:
            validate_config(cfg, [single_user])
        assert any("e2e_delay" in s or "queueing" in s
                   for s in err.value.violations)

    def test_zero_users_rejected(self, cfg):
        with pytest.raises(ConfigError) as err:
            validate_config(cfg, [])
        assert any("user" in s for s in err.value.violations)

    def test_violations_name_fields(self, single_user):
        cfg = SystemConfig(total_bandwidth=-1.0, amplifier_efficiency=1.5)
        with pytest.raises(ConfigError) as err:
            validate_config(cfg, [single_user])
        joined = " ".join(err.value.violations)
        assert "total_bandwidth" in joined
        assert "amplifier_efficiency" in joined

    def test_component_override(self, cfg, single_user):
        qos = validate_config(cfg, [single_user], eps_h=1e-4)
        assert qos.eps_h == 1e-4
        assert qos.eps_c == pytest.approx(1e-7)

    def test_default_split_over_budget_rejected(self, cfg, single_user):
        with pytest.raises(ConfigError):
            validate_config(cfg, [single_user], eps_c=0.5, eps_q=2.0)

    def test_bad_user_rejected(self, cfg):
        with pytest.raises(ConfigError):
            validate_config(cfg, [UserProfile(arrival_rate=-1.0, distance=100.0)])


class TestUserProfile:
    def test_gain_from_distance(self):
        u = UserProfile(arrival_rate=0.02, distance=250.0)
        assert u.gain == pytest.approx(path_loss_gain(250.0), rel=1e-15)

    def test_explicit_gain_wins(self):
        u = UserProfile(arrival_rate=0.02, distance=250.0,
                        large_scale_gain=1e-10)
        assert u.gain == 1e-10

    def test_from_nodes_aggregates(self, cfg):
        u = UserProfile.from_nodes(250.0, 20, 10.0, cfg)
        assert u.arrival_rate == pytest.approx(0.02, rel=1e-12)
        assert u.node_count == 20


class TestConfigFile:
    def test_default_text_parses(self):
        from urllc_ee import DEFAULT_CONFIG_TEXT
        cfg, users = parse_config_text(DEFAULT_CONFIG_TEXT)
        assert cfg.total_bandwidth == 20e6
        assert cfg.noise_psd == pytest.approx(10 ** -20.3, rel=1e-12)
        assert cfg.max_bs_power == pytest.approx(10.0, rel=1e-12)
        assert len(users) == 1
        assert users[0].arrival_rate == pytest.approx(0.02, rel=1e-12)

    def test_multiple_users(self):
        text = ("user_distances_m = 250, 120, 60\n"
                "nodes_per_user = 20\nnode_packet_rate_hz = 10\n")
        cfg, users = parse_config_text(text)
        assert [u.distance for u in users] == [250.0, 120.0, 60.0]

    def test_gain_users(self):
        text = ("user_gains = 1e-12, 3e-11\n"
                "user_arrival_rates_pps = 200, 400\n")
        cfg, users = parse_config_text(text)
        assert users[0].gain == 1e-12
        assert users[1].arrival_rate == pytest.approx(400 * cfg.frame_duration)

    def test_linear_power_keys(self):
        text = ("noise_psd = 5e-21\nmax_bs_power = 12.5\n"
                "user_distances_m = 100\nuser_arrival_rates_pps = 200\n")
        cfg, _users = parse_config_text(text)
        assert cfg.noise_psd == 5e-21
        assert cfg.max_bs_power == 12.5

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("frame_duration = 1e-4\nnot_a_key = 3\n")

    def test_bad_number_names_line(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("frame_duration = fast\n")

    def test_missing_users_rejected(self):
        with pytest.raises(ConfigError, match="user"):
            parse_config_text("frame_duration = 1e-4\n")

    def test_comments_and_blanks_ignored(self):
        text = ("# header\n\nuser_distances_m = 100  # inline\n"
                "user_arrival_rates_pps = 200\n")
        _cfg, users = parse_config_text(text)
        assert users[0].distance == 100.0
