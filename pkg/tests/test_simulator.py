import math
import os

import numpy as np
import pytest
from scipy import stats

from urllc_ee import (SimPolicy, gain_cdf, run_simulation, solve_allocation,
                      step_queue, validate_config)
from urllc_ee.simulator import (QueueState, UserPolicy, _advance,
                                _walk_chunk, draw_channel_gain)


@pytest.fixture
def solved(cfg, single_user):
    alloc = solve_allocation(cfg, [single_user])
    qos = validate_config(cfg, [single_user])
    return SimPolicy.from_allocation(alloc, cfg, [single_user], qos), alloc


def relaxed_policy(cfg, user, eps_h):
    alloc = solve_allocation(cfg, [user], eps_h=eps_h)
    qos = validate_config(cfg, [user], eps_h=eps_h)
    return SimPolicy.from_allocation(alloc, cfg, [user], qos), alloc


class TestChannelDraws:
    def test_mean_within_three_sigma(self):
        rng = np.random.default_rng(11)
        for n in (2, 4, 16):
            draws = rng.standard_gamma(n, size=1_000_000)
            se = math.sqrt(n) / math.sqrt(len(draws))
            assert abs(draws.mean() - n) < 3 * se

    def test_deep_fade_probability_matches_cdf(self):
        rng = np.random.default_rng(5)
        n, g_th = 4, 2.0
        draws = rng.standard_gamma(n, size=500_000)
        p_hat = float(np.mean(draws < g_th))
        p = gain_cdf(g_th, n)
        assert abs(p_hat - p) < 3 * math.sqrt(p * (1 - p) / len(draws))

    def test_single_antenna_is_exponential(self):
        rng = np.random.default_rng(3)
        draws = [draw_channel_gain(rng, 1) for _ in range(100_000)]
        _stat, pvalue = stats.kstest(draws, "expon")
        assert pvalue > 1e-4

    def test_rejects_bad_antennas(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            draw_channel_gain(rng, 0)


class TestQueueTransition:
    def _policy_user(self, cfg, g_th=1.0, eb=0.4, p_th=1.0):
        return UserPolicy(bandwidth=3e6, snr_target=1.0, gain_threshold=g_th,
                          power_cap=p_th, service_rate_nominal=eb,
                          alpha=3e-13, arrival_rate=0.02, eps_c=1e-7,
                          inversion_coeff=1e-7)

    def test_no_drop_without_deep_fade(self, cfg):
        up = self._policy_user(cfg, g_th=1e-9)
        state = QueueState()
        rng = np.random.default_rng(1)
        for frame in range(5000):
            g = 1.0 + float(rng.random())
            a = int(rng.poisson(0.1))
            _advance(state, g, a, up, 8, frame, cfg)
        assert state.drop_events == 0
        assert state.dropped == 0.0

    def test_good_frame_serves_nominal_rate(self, cfg):
        up = self._policy_user(cfg, eb=0.4)
        state = QueueState()
        _advance(state, 2.0, 1, up, 8, 0, cfg)
        assert state.served == pytest.approx(0.4)
        assert state.queue == pytest.approx(0.6)

    def test_deep_frame_drops_shortfall(self, cfg):
        # power cap so small the deep-fade rate clamps to zero: the whole
        # nominal service amount is dropped, bounded by the queue content
        up = self._policy_user(cfg, g_th=5.0, eb=0.4, p_th=1e-20)
        state = QueueState(queue=0.25)
        _advance(state, 0.01, 0, up, 8, 0, cfg)
        assert state.drop_events == 1
        assert state.dropped == pytest.approx(0.25)
        assert state.queue == 0.0

    def test_deep_frame_without_backlog_drops_nothing(self, cfg):
        up = self._policy_user(cfg, g_th=5.0, eb=0.4, p_th=1e-20)
        state = QueueState()
        _advance(state, 0.01, 2, up, 8, 0, cfg)
        assert state.dropped == 0.0
        assert state.queue == pytest.approx(2.0)

    def test_conservation_identity(self, cfg):
        up = self._policy_user(cfg, g_th=0.8, eb=0.3, p_th=1e-3)
        state = QueueState()
        rng = np.random.default_rng(9)
        for frame in range(20000):
            _advance(state, float(rng.standard_gamma(4)),
                     int(rng.poisson(0.2)), up, 8, frame, cfg)
        resid = state.arrivals - state.served - state.dropped - state.queue
        assert abs(resid) < 1e-9

    def test_step_queue_draws_arrivals(self, cfg, solved):
        policy, _alloc = solved
        state = QueueState()
        rng = np.random.default_rng(2)
        for frame in range(2000):
            g = draw_channel_gain(rng, policy.antennas)
            step_queue(state, g, policy, rng, frame=frame)
        assert state.arrivals > 0
        assert state.queue >= 0.0


def assert_states_equal(fast, slow):
    assert fast.arrivals == slow.arrivals
    assert fast.served == slow.served
    assert fast.dropped == slow.dropped
    assert fast.drop_events == slow.drop_events
    assert fast.deep_fades == slow.deep_fades
    assert fast.busy_frames == slow.busy_frames
    assert fast.departed == slow.departed
    assert fast.delay_violations == slow.delay_violations
    assert fast.queue == slow.queue


class TestFastPathEquivalence:
    def test_walk_matches_frame_by_frame(self, cfg, single_user):
        # identical draw arrays through the event-skip walk and the plain
        # per-frame loop must produce identical tallies
        policy, _ = relaxed_policy(cfg, single_user, eps_h=5e-2)
        up = policy.users[0]
        rng = np.random.default_rng(17)
        g = rng.standard_gamma(policy.antennas, size=200_000)
        a = rng.poisson(up.arrival_rate, size=200_000)

        fast = QueueState()
        _walk_chunk(fast, g, a, up, policy.queue_delay_frames, 0, cfg)
        slow = QueueState()
        for i in range(len(g)):
            _advance(slow, float(g[i]), int(a[i]), up,
                     policy.queue_delay_frames, i, cfg)
        assert_states_equal(fast, slow)

    def test_walk_matches_under_dense_events(self, cfg):
        # saturated regime: ~half the frames are deep fades with a starved
        # power cap, multi-packet arrivals, persistent backlog; the walk
        # must never skip wrongly
        up = UserPolicy(bandwidth=3e6, snr_target=1.0, gain_threshold=3.0,
                        power_cap=1e-18, service_rate_nominal=0.9,
                        alpha=3e-13, arrival_rate=0.8, eps_c=1e-7,
                        inversion_coeff=1e-7)
        rng = np.random.default_rng(23)
        g = rng.standard_gamma(3, size=50_000)
        a = rng.poisson(up.arrival_rate, size=50_000)
        fast = QueueState()
        _walk_chunk(fast, g, a, up, 8, 0, cfg)
        slow = QueueState()
        for i in range(len(g)):
            _advance(slow, float(g[i]), int(a[i]), up, 8, i, cfg)
        assert slow.drop_events > 1000  # both branches heavily exercised
        assert slow.delay_violations > 0
        assert_states_equal(fast, slow)


class TestRunSimulation:
    def test_rejects_bad_args(self, cfg, single_user, solved):
        policy, _ = solved
        with pytest.raises(ValueError):
            run_simulation(policy, cfg, [single_user], frames=0, seed=1)
        with pytest.raises(ValueError):
            run_simulation(policy, cfg, [single_user], frames=10, seed=1,
                           streams=0)
        with pytest.raises(ValueError):
            run_simulation(policy, cfg, [], frames=10, seed=1)

    def test_deterministic_reruns(self, cfg, single_user, solved):
        policy, _ = solved
        a = run_simulation(policy, cfg, [single_user], frames=300_000,
                           seed=42, streams=3)
        b = run_simulation(policy, cfg, [single_user], frames=300_000,
                           seed=42, streams=3)
        assert a.to_json() == b.to_json()

    def test_workers_do_not_change_results(self, cfg, single_user):
        policy, _ = relaxed_policy(cfg, single_user, eps_h=1e-2)
        seq = run_simulation(policy, cfg, [single_user], frames=400_000,
                             seed=5, streams=4, workers=1)
        par = run_simulation(policy, cfg, [single_user], frames=400_000,
                             seed=5, streams=4, workers=2)
        assert seq.to_json() == par.to_json()

    def test_seed_changes_results(self, cfg, single_user):
        policy, _ = relaxed_policy(cfg, single_user, eps_h=1e-2)
        a = run_simulation(policy, cfg, [single_user], frames=200_000, seed=1)
        b = run_simulation(policy, cfg, [single_user], frames=200_000, seed=2)
        assert a.to_json() != b.to_json()

    def test_conservation_report(self, cfg, single_user):
        policy, _ = relaxed_policy(cfg, single_user, eps_h=1e-2)
        rep = run_simulation(policy, cfg, [single_user], frames=1_000_000,
                             seed=7, streams=2)
        resid = rep.arrival_count - rep.served_count - rep.drop_count \
            - rep.final_queue
        assert abs(resid) < 1e-9 * max(1.0, rep.arrival_count)

    def test_mean_power_matches_closed_form(self, cfg, single_user):
        policy, alloc = relaxed_policy(cfg, single_user, eps_h=1e-2)
        rep = run_simulation(policy, cfg, [single_user], frames=2_000_000,
                             seed=11, streams=2)
        assert rep.empirical_mean_tx_power == pytest.approx(
            alloc.mean_tx_powers[0], rel=0.01)

    def test_dropping_bound_direction(self, cfg, single_user):
        policy, _ = relaxed_policy(cfg, single_user, eps_h=1e-2)
        rep = run_simulation(policy, cfg, [single_user], frames=2_000_000,
                             seed=11, streams=2)
        assert rep.drop_events >= 30
        assert rep.achieved_eps_h <= 1e-2

    def test_achieved_matches_drop_approximation(self, cfg, single_user):
        # the empirical dropping probability tracks the quadrature
        # approximation (which the threshold's closed-form bound dominates)
        from urllc_ee import drop_prob_B
        policy, alloc = relaxed_policy(cfg, single_user, eps_h=1e-2)
        rep = run_simulation(policy, cfg, [single_user], frames=10_000_000,
                             seed=99, streams=4)
        approx = drop_prob_B(alloc.gain_thresholds[0], alloc.snr_targets[0],
                             alloc.antennas)
        assert rep.drop_events > 300
        assert 0.6 * approx <= rep.achieved_eps_h <= 1.15 * approx
        assert rep.achieved_eps_h <= 1e-2

    def test_chunk_boundary_crossing(self, cfg, single_user):
        # frames straddling the internal chunk size keep every contract
        policy, _ = relaxed_policy(cfg, single_user, eps_h=1e-2)
        frames = (1 << 20) + 3
        a = run_simulation(policy, cfg, [single_user], frames=frames, seed=8)
        b = run_simulation(policy, cfg, [single_user], frames=frames, seed=8)
        assert a.to_json() == b.to_json()
        resid = a.arrival_count - a.served_count - a.drop_count - a.final_queue
        assert abs(resid) < 1e-9 * max(1.0, a.arrival_count)

    def test_deep_fade_rate_matches_gamma_cdf(self, cfg, single_user):
        policy, alloc = relaxed_policy(cfg, single_user, eps_h=1e-2)
        frames = 2_000_000
        rep = run_simulation(policy, cfg, [single_user], frames=frames,
                             seed=11, streams=2)
        p = gain_cdf(alloc.gain_thresholds[0], alloc.antennas)
        se = math.sqrt(p * (1 - p) * frames)
        assert abs(rep.deep_fade_count - p * frames) < 3 * se

    def test_delay_violation_within_budget(self, cfg, single_user):
        # scaled operating point where violations are measurable
        alloc = solve_allocation(cfg, [single_user], eps_c=1e-2, eps_q=1e-2,
                                 eps_h=1e-2)
        qos = validate_config(cfg, [single_user], eps_c=1e-2, eps_q=1e-2,
                              eps_h=1e-2)
        policy = SimPolicy.from_allocation(alloc, cfg, [single_user], qos)
        rep = run_simulation(policy, cfg, [single_user], frames=2_000_000,
                             seed=13, streams=2)
        assert rep.arrival_count > 10_000
        assert rep.empirical_delay_violation <= 1e-2

    def test_multi_user_aggregation(self, cfg):
        from urllc_ee import UserProfile
        users = [UserProfile.from_nodes(d, 20, 10.0, cfg)
                 for d in (250.0, 120.0)]
        alloc = solve_allocation(cfg, users, eps_h=1e-2)
        qos = validate_config(cfg, users, eps_h=1e-2)
        policy = SimPolicy.from_allocation(alloc, cfg, users, qos)
        rep = run_simulation(policy, cfg, users, frames=200_000, seed=3,
                             streams=2)
        assert len(rep.per_user) == 2
        assert rep.arrival_count == sum(pu["arrivals"] for pu in rep.per_user)
        total_power = sum(pu["power_sum"] for pu in rep.per_user) / 200_000
        assert rep.empirical_mean_tx_power == pytest.approx(total_power)

    def test_trace_csv(self, cfg, single_user, solved, tmp_path):
        policy, _ = solved
        path = os.fspath(tmp_path / "trace.csv")
        rep = run_simulation(policy, cfg, [single_user], frames=500, seed=9,
                             streams=1, trace_path=path)
        lines = open(path).read().splitlines()
        assert lines[0] == ("frame,user,gain,tx_power_w,arrivals,served,"
                            "dropped,queue_after")
        assert len(lines) == 501
        # trace mode must not change the tallies
        plain = run_simulation(policy, cfg, [single_user], frames=500, seed=9,
                               streams=1)
        assert plain.to_json() == rep.to_json()

    def test_trace_requires_single_stream(self, cfg, single_user, solved,
                                          tmp_path):
        policy, _ = solved
        with pytest.raises(ValueError):
            run_simulation(policy, cfg, [single_user], frames=10, seed=1,
                           streams=2, trace_path=os.fspath(tmp_path / "t.csv"))


class TestPolicyConstruction:
    def test_from_allocation_fields(self, cfg, single_user, solved):
        policy, alloc = solved
        up = policy.users[0]
        assert up.bandwidth == alloc.bandwidths[0]
        assert up.power_cap == alloc.power_caps[0]
        assert up.inversion_coeff == pytest.approx(
            cfg.noise_psd * alloc.bandwidths[0] * alloc.snr_targets[0]
            / single_user.gain, rel=1e-12)
        # at the threshold the inversion power equals the cap
        assert up.inversion_coeff / up.gain_threshold == pytest.approx(
            up.power_cap, rel=1e-9)

    def test_user_count_mismatch_rejected(self, cfg, single_user, solved):
        policy, alloc = solved
        qos = validate_config(cfg, [single_user])
        with pytest.raises(ValueError):
            SimPolicy.from_allocation(alloc, cfg, [single_user, single_user],
                                      qos)
