import cmath
import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamslot import radio
from beamslot.baselines import RandomPolicy, TdmaPolicy
from beamslot.env import (BeamSlotEnv, EnvConfig, Op, SlotAction, episode_metrics, normalize_power,
                          slot_reward, write_trace_csv)


def freeze(env, user, position=None):
    """Stop a user's motion, optionally moving it first."""
    u = env.users[user - 1]
    pose = replace(u.pose, v_linear=0.0, v_angular=0.0)
    if position is not None:
        pose = replace(pose, x=position[0], y=position[1])
    u.pose = pose
    return u


def optimum_at(env, position):
    d, theta = math.hypot(*position), math.atan2(position[1], position[0])
    return radio.best_beam_exhaustive(radio.channel_vector(d, theta, 1.0, env.link), env.codebook,
                                      env.link)


def scalar_powers(distance, theta, mt, pt):
    """Noiseless beam powers from the closed-form channel, one complex sum per beam."""
    out = []
    for i in range(1, mt + 1):
        acc = 0j
        for m in range(mt):
            h = math.sqrt(mt) / distance * cmath.exp(1j * math.pi * m * math.cos(theta)) / math.sqrt(mt)
            f = cmath.exp(-1j * math.pi * m * (2 * i - 1 - mt) / mt) / math.sqrt(mt)
            acc += h * f
        out.append(pt * abs(acc) ** 2)
    return out


class TestSlotAction:
    def test_index_round_trip(self):
        for u in (1, 3, 7):
            seen = {SlotAction.from_index(i, u) for i in range(3 * u)}
            assert len(seen) == 3 * u
            for a in seen:
                assert SlotAction.from_index(a.index(u), u) == a

    def test_layout(self):
        assert SlotAction.from_index(0, 3) == SlotAction(Op.SENSE, 1)
        assert SlotAction.from_index(4, 3) == SlotAction(Op.UL, 2)
        assert SlotAction.from_index(8, 3) == SlotAction(Op.DL, 3)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            SlotAction.from_index(9, 3)


class TestConfig:
    def test_defaults(self):
        c = EnvConfig()
        assert (c.mt, c.pt, c.snr_db, c.num_users) == (32, 5.0, 20.0, 3)
        assert c.p_arrival == (0.6, 0.4, 0.3)
        assert c.rho == (3.0, 0.0, -1.0)
        assert c.state_size == 12 and c.num_actions == 9

    def test_round_trip(self):
        c = EnvConfig(slots=77, p_arrival=(0.1, 0.2, 0.3), power_observation="last-sensed")
        assert EnvConfig.from_dict(c.to_dict()) == c

    @pytest.mark.parametrize("kw", [dict(num_users=2), dict(p_arrival=(1.5, 0, 0)), dict(slots=0),
                                    dict(p_dl=0.7), dict(power_observation="psychic"),
                                    dict(initial_positions=((0, 80), (0, 40), (0, 270)))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            EnvConfig(**kw)

    def test_unknown_field(self):
        with pytest.raises(ValueError, match="unknown"):
            EnvConfig.from_dict({"mtt": 4})


class TestReset:
    def test_deterministic_init(self):
        env = BeamSlotEnv(EnvConfig(deterministic_init=True))
        env.reset(0)
        u = env.users[0]
        assert u.pose.position == (0.0, 80.0)
        assert u.distance == 80.0 and u.theta == pytest.approx(math.pi / 2)
        # broadside sits exactly between beams 16 and 17; the tie goes to the lower index
        p = scalar_powers(80.0, math.pi / 2, 32, 5.0)
        assert p[15] == pytest.approx(p[16], rel=1e-12) and p[15] == pytest.approx(max(p), rel=1e-12)
        assert u.beam == 16

    def test_initial_beam_is_exhaustive_optimum(self):
        env = BeamSlotEnv()
        env.reset(5)
        assert [u.beam for u in env.users] == env.optimal_beams()

    def test_buffers_empty(self):
        env = BeamSlotEnv()
        obs = env.reset(1)
        assert np.all(obs[3:9] == 0.0)
        assert env.k == 0 and env.buffered() == 0

    def test_same_seed_identical(self):
        a, b = BeamSlotEnv(), BeamSlotEnv()
        assert a.reset(42).tobytes() == b.reset(42).tobytes()
        for k in range(50):
            oa, ra, _ = a.step(k % 9)
            ob, rb, _ = b.step(k % 9)
            assert oa.tobytes() == ob.tobytes() and ra == rb

    def test_different_seeds_differ(self):
        env = BeamSlotEnv()
        starts = {tuple(u.pose.position for u in (env.reset(s), env.users)[1]) for s in range(5)}
        assert len(starts) == 5

    def test_random_init_stays_in_scenario(self):
        env = BeamSlotEnv()
        for s in range(50):
            env.reset(s)
            for u in env.users:
                x, y = u.pose.position
                assert 0 <= x <= 100 and 0 <= y <= 100 and u.distance >= 1.0


class TestReward:
    def test_formula(self):
        assert slot_reward(6, 3, False, False, 0) == 1.0
        assert slot_reward(6, 3, True, True, 0) == 4.0
        assert slot_reward(5, 3, False, False, 2) == 5 / 6 - 2
        assert slot_reward(6, 3, True, False, 0) == 0.0

    def test_idle_slot_is_one(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0)))
        env.reset(0)
        _, out, _ = env.step(SlotAction(Op.DL, 2))
        assert out.reward == 1.0 and out.drops == 0 and out.delivered == 0

    def test_beam_change_is_four(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0), snr_db=200.0))
        env.reset(0)
        u = freeze(env, 1, (30.0, 40.0))
        opt = optimum_at(env, (30.0, 40.0))
        u.beam = opt - 1
        _, out, _ = env.step(SlotAction(Op.SENSE, 1))
        assert out.beam_changed and u.beam == opt
        assert out.reward == 4.0

    def test_sensing_unchanged_is_zero(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0), snr_db=200.0))
        env.reset(0)
        u = freeze(env, 1, (30.0, 40.0))
        u.beam = optimum_at(env, (30.0, 40.0))
        _, out, _ = env.step(SlotAction(Op.SENSE, 1))
        assert not out.beam_changed and out.reward == 0.0

    def test_two_drops_one_full(self):
        # user 1 gets a DL packet every slot into a full buffer; user 2 sends on a wrong beam
        cfg = EnvConfig(p_arrival=(1.0, 0.0, 0.0), p_dl=1.0, p_ul=0.0, snr_db=200.0)
        env = BeamSlotEnv(cfg)
        env.reset(0)
        env.users[0].dl.occupancy = 5
        u2 = freeze(env, 2, (30.0, 40.0))
        u2.ul.occupancy = 1
        u2.beam = (optimum_at(env, (30.0, 40.0)) + 15) % 32 + 1
        _, out, _ = env.step(SlotAction(Op.UL, 2))
        assert (out.overflow_drops, out.bad_beam_drops, out.delivered) == (1, 1, 0)
        assert out.reward == pytest.approx(-7 / 6, abs=1e-15)

    def test_aligned_delivery(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0), snr_db=200.0))
        env.reset(0)
        u = freeze(env, 3, (60.0, 20.0))
        u.beam = optimum_at(env, (60.0, 20.0))
        u.dl.occupancy = 2
        _, out, _ = env.step(SlotAction(Op.DL, 3))
        assert out.delivered == 1 and out.drops == 0 and u.dl.occupancy == 1

    def test_bounds_on_random_episodes(self):
        cfg = EnvConfig(slots=300)
        env = BeamSlotEnv(cfg)
        d_max = 2 * cfg.num_users + 1
        rng = np.random.default_rng(0)
        for seed in range(5):
            env.reset(seed)
            done = False
            while not done:
                obs, out, done = env.step(int(rng.integers(9)))
                assert -d_max - 1.0 <= out.reward <= 4.0
                assert np.all((obs >= 0.0) & (obs <= 1.0))
                assert out.delivered in (0, 1) and out.drops >= 0


class TestStep:
    def test_step_after_done(self):
        env = BeamSlotEnv(EnvConfig(slots=3))
        env.reset(0)
        assert [env.step(0)[2] for _ in range(3)] == [False, False, True]
        with pytest.raises(RuntimeError):
            env.step(0)

    def test_step_before_reset(self):
        with pytest.raises(RuntimeError):
            BeamSlotEnv().step(0)

    def test_bad_action(self):
        env = BeamSlotEnv()
        env.reset(0)
        with pytest.raises(ValueError):
            env.step(SlotAction(Op.UL, 4))
        with pytest.raises(ValueError):
            env.step(9)

    def test_sense_tracks_one_beam_per_slot(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0), snr_db=200.0))
        env.reset(0)
        u = freeze(env, 1, (30.0, 40.0))
        opt = optimum_at(env, (30.0, 40.0))
        u.beam = opt - 3
        beams = [env.step(SlotAction(Op.SENSE, 1))[1].beams[0] for _ in range(4)]
        assert beams == [opt - 2, opt - 1, opt, opt]

    def test_last_sensed_power_is_stale(self):
        env = BeamSlotEnv(EnvConfig(power_observation="last-sensed"))
        obs0 = env.reset(3)
        for _ in range(5):
            obs, *_ = env.step(SlotAction(Op.DL, 1))
        np.testing.assert_array_equal(obs[9:], obs0[9:])
        obs, *_ = env.step(SlotAction(Op.SENSE, 2))
        assert obs[9] == obs0[9] and obs[11] == obs0[11]

    def test_live_power_refreshes(self):
        env = BeamSlotEnv(EnvConfig(power_observation="live"))
        obs0 = env.reset(3)
        obs, *_ = env.step(SlotAction(Op.DL, 1))
        assert np.all(obs[9:] != obs0[9:])


class TestNormalizePower:
    def test_mapping(self):
        nv = 1e-3
        assert normalize_power(nv * 10 ** (-1.0), nv) == pytest.approx(0.0)
        assert normalize_power(nv * 10 ** 1.5, nv) == pytest.approx(0.5)
        assert normalize_power(nv * 10 ** 4.0, nv) == pytest.approx(1.0)
        assert normalize_power(nv * 1e9, nv) == 1.0
        assert normalize_power(0.0, nv) == 0.0

    @given(st.floats(0.0, 1e6))
    def test_unit_interval(self, p):
        assert 0.0 <= normalize_power(p, 6.4e-4) <= 1.0


class TestMetrics:
    def test_empty_traffic(self):
        env = BeamSlotEnv(EnvConfig(p_arrival=(0.0, 0.0, 0.0), slots=20))
        env.reset(0)
        trace = [env.step(k % 9)[1] for k in range(20)]
        m = episode_metrics(trace, env.generated, env.buffered())
        assert m.per == 0.0 and m.throughput == 0.0
        assert sum(m.slots.values()) == 20

    def test_per_arithmetic(self):
        env = BeamSlotEnv(EnvConfig(slots=1))
        env.reset(0)
        _, out, _ = env.step(0)
        fake = [replace(out, overflow_drops=1, bad_beam_drops=0, generated=5),
                replace(out, overflow_drops=0, bad_beam_drops=1, generated=5)]
        m = episode_metrics(fake)
        assert m.generated == 10 and m.lost == 2 and m.per == 0.2

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_conservation(self, seed):
        env = BeamSlotEnv(EnvConfig(slots=200))
        env.reset(seed)
        rng = np.random.default_rng(seed)
        trace, done = [], False
        while not done:
            _, out, done = env.step(int(rng.integers(9)))
            trace.append(out)
        m = episode_metrics(trace, env.generated, env.buffered())
        assert m.generated == m.delivered + m.lost + m.buffered
        assert m.throughput == m.delivered / 200

    def test_policies_conserve(self):
        for pol in (RandomPolicy(), TdmaPolicy(3, 3)):
            env = BeamSlotEnv(EnvConfig(slots=150))
            obs = env.reset(7)
            rng = np.random.default_rng(7)
            trace, done = [], False
            while not done:
                obs, out, done = env.step(pol.act(obs, env.k + 1, rng))
                trace.append(out)
            m = episode_metrics(trace, env.generated, env.buffered())
            assert m.generated == m.delivered + m.lost + m.buffered


def test_trace_csv(tmp_path):
    env = BeamSlotEnv(EnvConfig(slots=4))
    env.reset(0)
    trace = [env.step(a)[1] for a in (0, 4, 8, 1)]
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace, 3)
    rows = list(csv.DictReader(open(path)))
    assert [r["op"] for r in rows] == ["SENSE", "UL", "DL", "SENSE"]
    assert [int(r["user"]) for r in rows] == [1, 2, 3, 2]
    assert float(rows[0]["reward"]) == trace[0].reward
    assert int(rows[3]["beam_2"]) == trace[3].beams[1]
