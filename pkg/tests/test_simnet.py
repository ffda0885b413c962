from fractions import Fraction

import numpy as np
import pytest

from rpnc.baseband import OfdmParams, arrival_diff, estimate_csi, preamble_set
from rpnc.errors import ConfigError
from rpnc.simnet import Engine, HardwareClock, Network, load_config, parse_config, run, run_sync
from rpnc.simnet.channel import ChannelModel, LatencyModel, PerCurve, PerMode, packet_level_uplink, superpose_uplink
from rpnc.simnet.config import ChannelConfig, LatencyConfig
from rpnc.roles import Role
from rpnc.simnet.metrics import empirical_cdf, ewma, percentile
from oracles import ewma_scalar


def _small(**over):
    base = {"run": {"slots": 300}, "protocol": {"data_size": 64}, "traffic": {"payload_size": 64}}
    for k, v in over.items():
        base.setdefault(k, {}).update(v)
    return parse_config(base)


class TestEngine:
    def test_orders_by_time_node_insertion(self):
        e, seen = Engine(), []
        for t, node, tag in [(5, 1, "c"), (5, 0, "b"), (1, 2, "a"), (5, 1, "d")]:
            e.schedule(t, node, tag, seen.append, tag)
        e.run()
        assert seen == ["a", "b", "c", "d"] and e.processed == 4

    def test_rejects_past(self):
        e = Engine()
        e.schedule(10, 0, "x", lambda: None)
        e.run()
        with pytest.raises(ValueError):
            e.schedule(5, 0, "y", lambda: None)

    def test_until(self):
        e, seen = Engine(), []
        for t in (1, 2, 3):
            e.schedule(t, 0, "t", seen.append, t)
        e.run(until_ns=2)
        assert seen == [1, 2] and len(e) == 1


class TestClock:
    def test_exact_round_trip(self):
        c = HardwareClock(Fraction(-3, 1000), 5_000_000, 20)
        for tick in (0, 1, 50_000, 10**9 + 7):
            assert c.tick_at(c.true_time_of_tick(tick)) == tick
            assert c.tick_of_hw_time(c.hw_time_of_tick(tick)) == tick

    def test_drift_scales_rate(self):
        c = HardwareClock(0, 5_000_000, 20)
        assert c.true_rate == Fraction(5_000_100)
        assert c.ticks_at(1) == 5_000_100

    def test_ps_views_agree(self):
        c = HardwareClock(Fraction(1, 3), 5_000_000, Fraction(-37, 2))
        for tick in (0, 123, 10**8):
            exact = c.true_time_of_tick(tick) * 10**12
            assert abs(c.true_ps_of_tick(tick) - exact) <= Fraction(1, 2)
            assert c.tick_at_ps(c.true_ps_of_tick(tick) + 1) == tick


class TestChannel:
    def test_per_02(self):
        ch = ChannelModel(ChannelConfig(per_uplink=0.2), np.random.default_rng(5))
        raw = bytes(32)
        lost = sum(packet_level_uplink(raw, None, ch)[2] for _ in range(100_000))
        assert lost / 100_000 == pytest.approx(0.2, abs=0.01)

    @pytest.mark.parametrize("per,lost", [(0.0, False), (1.0, True)])
    def test_extremes(self, per, lost):
        ch = ChannelModel(ChannelConfig(per_uplink=per), np.random.default_rng(1))
        assert all(packet_level_uplink(b"ab", b"cd", ch)[2] is lost for _ in range(100))

    def test_erased_image_fails_crc(self):
        from rpnc.linkcodec import LinkHeader, decode_packet, encode_packet
        ch = ChannelModel(ChannelConfig(per_uplink=1.0), np.random.default_rng(2))
        raw = encode_packet(LinkHeader(slot_id_a=1), b"x", 32)
        _, got, erased = packet_level_uplink(raw, None, ch)
        assert erased and not decode_packet(got, 32).crc_ok

    def test_xor_needs_more_snr(self):
        c = PerCurve()
        assert c.per(PerMode.XOR, 8) > c.per(PerMode.SINGLE, 8)
        assert c.per(PerMode.SINGLE, 6) == pytest.approx(0.5)

    def test_latency_truncated_to_slot(self):
        lat = LatencyModel(LatencyConfig(delta_max=0.009, phi_max=0.009), 0.01, np.random.default_rng(3))
        draws = [lat.draw() for _ in range(5000)]
        assert all(d + p < 0.01 for d, p in draws)
        assert min(d for d, _ in draws) >= 0.0005

    def test_superpose_aligned_is_sum(self):
        pre = preamble_set(OfdmParams(), 7)
        one = np.ones(1)
        y = superpose_uplink(400, [(pre[Role.A].samples, 10, one), (pre[Role.B].samples, 10, one)], None,
                             np.random.default_rng(0))
        ref = np.zeros(400, complex)
        ref[10:10 + len(pre[Role.A].samples)] = pre[Role.A].samples + pre[Role.B].samples
        np.testing.assert_allclose(y.samples, ref, atol=1e-12)

    def test_two_sample_offset_recovered(self):
        p = OfdmParams()
        pre = preamble_set(p, 7)
        a, b = pre[Role.A], pre[Role.B]
        one = np.ones(1)
        y = superpose_uplink(400, [(a.samples, 52, one), (b.samples, 50, one)], 30.0,
                             np.random.default_rng(4)).samples
        region = lambda pr: y[50 + pr.lts_body_offset:50 + pr.lts_body_offset + p.n_subcarriers]
        d = arrival_diff(estimate_csi(region(a), a, p), estimate_csi(region(b), b, p))
        assert d == pytest.approx(2.0, abs=0.1)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({})
        assert cfg.protocol.window == 10 and cfg.clocks.drift_ppm_a == 20.0

    @pytest.mark.parametrize("bad", [
        {"protocol": {"window": 0}},
        {"protocol": {"bogus": 1}},
        {"latency": {"delta_min": 0.006, "phi_min": 0.005, "delta_max": 0.006, "phi_max": 0.005}},
        {"latency": {"delta_min": 0.003, "delta_max": 0.001}},
        {"traffic": {"payload_size": 2000}},
        {"channel": {"per_uplink": 1.5}},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")
        p = tmp_path / "list.yaml"
        p.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_overrides(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("protocol:\n  window: 5\n")
        cfg = load_config(p, {"run": {"slots": 7}})
        assert cfg.protocol.window == 5 and cfg.run.slots == 7
        assert cfg.with_overrides(protocol={"tx_gap": 3}).protocol.window == 5

    def test_slot_must_be_whole_samples(self):
        with pytest.raises(ConfigError):
            Network(_small(protocol={"slot_duration": 0.0100001}))


class TestMetrics:
    def test_ewma_matches_oracle(self):
        v = np.random.default_rng(0).normal(size=200)
        np.testing.assert_allclose(ewma(v, 0.01), ewma_scalar(v, 0.01))

    def test_cdf_and_percentile(self):
        v = [1.0, 2.0, np.inf, 3.0]
        assert list(empirical_cdf(v, [0, 1, 2.5, 10])) == [0, 0.25, 0.5, 0.75]
        assert percentile(v, 90) == np.inf and percentile([1, 2, 3, 4], 50) == 3


class TestNetwork:
    def test_deterministic_trace(self, tmp_path):
        paths = []
        for i in range(2):
            net = Network(_small(channel={"per_uplink": 0.1, "per_downlink": 0.1}), keep_trace=True)
            net.run()
            paths.append(tmp_path / f"t{i}.csv")
            net.write_trace(paths[-1])
        assert paths[0].read_bytes() == paths[1].read_bytes()
        assert len(paths[0].read_bytes()) > 1000

    def test_zero_drift_no_adjustments(self):
        cfg = _small(run={"slots": 10_000},
                     clocks={"drift_ppm_a": 0.0, "drift_ppm_b": 0.0},
                     channel={"per_uplink": 0.0, "per_downlink": 0.0})
        rep = run(cfg)
        assert rep.nonzero_adjustments() == 0
        assert sum(len(v) for v in rep.adjustments.values()) > 1500

    def test_seed_changes_outcome(self):
        a = run(_small(channel={"per_uplink": 0.3}))
        b = run(_small(run={"seed": 2}, channel={"per_uplink": 0.3}))
        assert a.delivered != b.delivered or a.retransmissions != b.retransmissions

    def test_ts_never_superposes(self):
        rep = run(_small(run={"scheme": "ts"}, protocol={"arq": False},
                         channel={"per_uplink": 0.0, "per_downlink": 0.0}))
        assert rep.uplink and all(r.kind != "xor" for r in rep.uplink)

    def test_reliable_ts_with_loss(self):
        rep = run(_small(run={"scheme": "ts", "slots": 4000}, traffic={"mode": "reliable", "payloads": 100},
                         channel={"per_uplink": 0.2, "per_downlink": 0.2}))
        assert rep.finished and rep.delivered == {"AB": 100, "BA": 100}
        assert not any(rep.order_errors.values())


class TestSyncSim:
    def test_zero_drift_small_error(self):
        cfg = _small(run={"slots": 200}, clocks={"drift_ppm_a": 0.0, "drift_ppm_b": 0.0})
        rep = run_sync(cfg)
        assert len(rep.records) > 150
        assert rep.percentile(90) <= 1.0
        assert rep.cp_violations == 0
