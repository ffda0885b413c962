"""Packet-level simulation of the two-way relay network.

Timeline of one exchange (relay slot numbers)::

    end node detects slot n  ->  transmits in uplink slot n+1
    relay receives slot n+1, decodes during slot n+2
    relay detects slot n+2   ->  transmits in downlink slot n+3
    end nodes receive slot n+3, decode during slot n+4

The relay's clock defines true slot boundaries. End nodes track them from
reference-packet arrivals, so their uplink transmissions land with an
offset that the relay checks against the cyclic-prefix budget.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..arq import ArqEndpoint
from ..linkcodec import DownlinkKind, classify_raw, decode_packet, verify_xor_packet
from ..mac import EndNodeMac, RelayMac, RxState, UplinkKind
from ..roles import Role
from ..slot_timing import TxDelayBound
from .channel import ChannelModel, LatencyModel, packet_level_uplink
from ..errors import ConfigError
from .clock import PS, HardwareClock
from .config import Scheme, SimConfig, TrafficMode
from .engine import Engine
from .metrics import MetricsReport, UplinkRecord
from .traffic import AppSink, PayloadFactory, PayloadKind

NS = 1_000_000_000
RELAY_ID, A_ID, B_ID = 0, 1, 2


def exact(x: float) -> Fraction:
    """Decimal value of a config float as an exact fraction (0.01 -> 1/100)."""
    return Fraction(repr(float(x)))


def to_ps(x) -> int:
    """Seconds (float or Fraction) to integer picoseconds."""
    return round(x * PS)


def ps_to_ns(t_ps: int) -> int:
    return (t_ps + 500) // 1000


@dataclass
class _EndNode:
    name: str
    node_id: int
    mac: EndNodeMac
    clock: HardwareClock
    arq: ArqEndpoint
    latency: LatencyModel
    factory: PayloadFactory
    epoch: int = 0
    current_slot: int = 0
    slot_offset: int = 0
    encoding: bool = False
    next_index: int = 0
    anchor_tick: int = 0
    pending_refs: list = field(default_factory=list)
    decode_times: list = field(default_factory=list)


class Network:
    """Event-driven network of two end nodes and a relay.

    True time is kept in integer picoseconds and each radio converts it to
    and from its own sample ticks exactly; the MAC sees hardware times as
    exact fractions of a second.
    """

    def __init__(self, cfg: SimConfig, keep_trace: bool = False):
        self.cfg = cfg
        p = cfg.protocol
        self.ts = cfg.run.scheme is Scheme.TS
        self.T_s = exact(p.slot_duration)
        self.B = exact(cfg.ofdm.bandwidth)
        self.period = 1 / self.B
        spt = self.T_s * self.B
        if spt.denominator != 1:
            raise ConfigError("slot duration must span a whole number of samples")
        self.slot_samples = int(spt)
        self.half_cp = cfg.ofdm.cp_len / 2
        self.cp = cfg.ofdm.cp_len
        self.tap_spread = len(cfg.channel.taps_db) - 1
        self.prop_ps = to_ps(exact(cfg.channel.propagation_delay))
        self.decode_after_ps = to_ps(exact(p.decode_latency) * self.T_s)
        self.encode_ns = round(exact(p.encode_latency) * NS)
        self.slots = cfg.run.slots
        self.mode = cfg.traffic.mode

        seeds = np.random.SeedSequence(cfg.run.seed).spawn(8)
        rngs = [np.random.default_rng(s) for s in seeds]
        self.channel = ChannelModel(cfg.channel, rngs[0])
        self.relay_latency = LatencyModel(cfg.latency, p.slot_duration, rngs[1])
        self.app_rng = rngs[7]

        c = cfg.clocks
        self.relay_clock = HardwareClock(exact(c.start_relay), self.B, exact(c.drift_ppm_relay), "R")
        self.relay = RelayMac(tx_gap=p.tx_gap, data_size=p.data_size)
        bounds = TxDelayBound(exact(cfg.latency.delta_max), exact(cfg.latency.phi_max), p.one_slot_ahead)
        self.trace_rows: list[tuple] | None = [] if keep_trace else None
        self.arq_trace: list | None = [] if keep_trace else None

        self.nodes: dict[str, _EndNode] = {}
        for name, nid, start, ppm, lat_rng, app_rng in (
            ("A", A_ID, c.start_a, c.drift_ppm_a, rngs[2], rngs[4]),
            ("B", B_ID, c.start_b, c.drift_ppm_b, rngs[3], rngs[5]),
        ):
            mac = EndNodeMac(Role(name), self.T_s, self.period, p.window, p.tx_gap, p.realign, bounds, p.data_size)
            arq = ArqEndpoint(name, float(self.T_s), reliable=p.arq, ack_delay=p.ack_delay,
                              alpha=p.alpha, beta=p.beta, max_window=p.max_window,
                              trace=self.arq_trace)
            self.nodes[name] = _EndNode(
                name, nid, mac, HardwareClock(exact(start), self.B, exact(ppm), name), arq,
                LatencyModel(cfg.latency, p.slot_duration, lat_rng),
                PayloadFactory(cfg.traffic.payload_size, app_rng),
            )
        self.sinks = {"AB": AppSink(ordered=p.arq), "BA": AppSink(ordered=p.arq)}
        self.offered = {"AB": 0, "BA": 0}
        self.rtt: list[float] = []
        self.uplink_slots: dict[int, dict[str, tuple[bytes, float]]] = {}
        self.uplink_records: list[UplinkRecord] = []
        self.downlink_records: list[tuple[int, str]] = []
        self.engine = Engine()
        self.end_ps = self.relay_boundary(self.slots)

    # helpers

    def relay_boundary(self, m: int) -> int:
        """True time (ps) of relay slot boundary m."""
        return self.relay_clock.true_ps_of_tick(m * self.slot_samples)

    def node_boundary_tick(self, node: _EndNode, n: int) -> int:
        """The node's boundary S_n as one of its own sample ticks."""
        return node.anchor_tick + n * self.slot_samples + node.mac.sched.adjust_for(n)

    def node_boundary(self, node: _EndNode, n: int) -> int:
        return node.clock.true_ps_of_tick(self.node_boundary_tick(node, n))

    def _at(self, t_ps: int, node: int, kind: str, handler, *payload) -> None:
        self.engine.schedule(ps_to_ns(t_ps), node, kind, handler, *payload)

    def _trace(self, node: int, kind: str, detail: str) -> None:
        if self.trace_rows is not None:
            self.trace_rows.append((self.engine.now, node, kind, detail))

    @property
    def now(self) -> float:
        return self.engine.now / NS

    def _payload_limit(self) -> int | None:
        if self.mode is TrafficMode.RELIABLE:
            return self.cfg.traffic.payloads or 10_000
        return None

    # relay

    def _relay_wake(self, m: int) -> None:
        res = self.relay.relay_on_slot(m)
        if res is not None:
            tx, beacon = res
            kind = "beacon" if beacon else classify_raw(tx.raw, Role.A).value
            self.downlink_records.append((tx.slot, kind))
            self._trace(RELAY_ID, "dl_schedule", f"{tx.slot}:{kind}")
            self._at(self.relay_boundary(tx.slot) + self.prop_ps, RELAY_ID, "dl_emit",
                     self._downlink_emit, tx.slot, tx.raw)
        if m + 1 < self.slots:
            d, _ = self.relay_latency.draw()
            self._at(self.relay_boundary(m + 1) + to_ps(d), RELAY_ID, "relay_wake", self._relay_wake, m + 1)

    def _downlink_emit(self, s: int, raw: bytes) -> None:
        t = self.relay_boundary(s) + self.prop_ps
        per = self.channel.downlink_per()
        done = self.relay_boundary(s + 1) + self.prop_ps + self.decode_after_ps
        for node in self.nodes.values():
            if self.channel.erased(per):
                self._trace(node.node_id, "dl_erased", str(s))
                continue
            tick = node.clock.tick_at_ps(t)
            node.pending_refs.append(tick)
            self._at(done, node.node_id, "dl_decode", self._node_decode, node, raw, tick, s)

    def _uplink_emit(self, node: _EndNode, raw: bytes, t_emit: int) -> None:
        num, den = self.relay_clock.ticks_at_ps(t_emit + self.prop_ps)
        span = den * self.slot_samples
        m = (2 * num + span) // (2 * span)
        offset = (num - m * span) / den
        slot = self.uplink_slots.setdefault(m, {})
        if not slot:
            self._at(self.relay_boundary(m + 1) + self.decode_after_ps, RELAY_ID, "ul_decode", self._uplink_rx, m)
        slot[node.name] = (raw, offset)
        self._trace(node.node_id, "ul_emit", f"{m}:{offset:.3f}")

    def _uplink_rx(self, m: int) -> None:
        users = self.uplink_slots.pop(m, {})
        offs = {k: v[1] for k, v in users.items()}
        seen = {k: v[0] for k, v in users.items() if abs(v[1]) <= self.half_cp}
        cp_violation = False
        if len(offs) == 2:
            lo = min(offs.values())
            hi = max(offs.values()) + self.tap_spread
            cp_violation = hi - lo > self.cp
        kind, img, erased = packet_level_uplink(seen.get("A"), seen.get("B"), self.channel)
        if cp_violation and kind is UplinkKind.XOR and not erased:
            img, erased = self.channel.corrupt(img), True
        self.relay.relay_on_uplink(kind, img)
        self.uplink_records.append(UplinkRecord(
            m, kind.value, offs.get("A", float("nan")), offs.get("B", float("nan")), cp_violation, erased,
        ))
        self._trace(RELAY_ID, "ul_rx", f"{m}:{kind.value}:{int(erased)}")

    # end nodes

    def _node_decode(self, node: _EndNode, raw: bytes, tick: int, s: int) -> None:
        mac = node.mac
        if mac.rx_state is RxState.INIT:
            kind = classify_raw(raw, mac.role)
            valid = verify_xor_packet(raw, mac.data_size) if kind is DownlinkKind.XOR else decode_packet(raw, mac.data_size).crc_ok
            if not valid:
                return
            mac.acquire(node.clock.hw_time_of_tick(tick))
            node.anchor_tick = tick
            node.slot_offset = s
            node.epoch += 1
            node.pending_refs = [r for r in node.pending_refs if r > tick]
            self._trace(node.node_id, "acquire", str(s))
            n = 1
            while ps_to_ns(self.node_boundary(node, n)) <= self.engine.now:
                n += 1
            self._schedule_wake(node, n)

        res = mac.endnode_on_downlink(raw)
        mac.rx_que_pkt.clear()
        if res.delivered is None:
            return
        node.decode_times.append(self.now)
        header, payload = res.delivered
        for _, p in node.arq.on_packet(header, payload, self.now, node.current_slot):
            self._app_receive(node, p)

    def _schedule_wake(self, node: _EndNode, n: int) -> None:
        d, _ = node.latency.draw()
        t = self.node_boundary(node, n) + to_ps(d)
        if t < self.end_ps:
            self._at(t, node.node_id, "wake", self._node_wake, node, n, node.epoch)

    def _node_wake(self, node: _EndNode, n: int, epoch: int) -> None:
        mac = node.mac
        if epoch != node.epoch or mac.rx_state is not RxState.SYNC:
            return
        s_n = self.node_boundary_tick(node, n)
        tol = self.half_cp
        arrival = None
        keep = []
        for tick in node.pending_refs:
            if abs(tick - s_n) <= tol:
                arrival = tick
            elif tick > s_n + tol:
                keep.append(tick)
        node.pending_refs = keep
        step = mac.endnode_rx_flowchart_step(n, None if arrival is None else node.clock.hw_time_of_tick(arrival))
        if step.lost_sync:
            node.epoch += 1
            self._trace(node.node_id, "sync_lost", str(n))
            return
        node.current_slot = n

        may_send = True
        if self.ts:
            relay_slot = n + 1 + node.slot_offset
            may_send = relay_slot % 2 == (0 if node.name == "A" else 1)
        if may_send:
            tx = mac.endnode_on_slot_detect(n)
            if tx is not None:
                t_emit = self.node_boundary(node, tx.slot)
                self._at(t_emit, node.node_id, "ul_emit", self._uplink_emit, node, tx.raw, t_emit)
        self._refill(node, n)
        self._schedule_wake(node, n + 1)

    def _refill(self, node: _EndNode, n: int) -> None:
        if node.mac.tx_que_sample or node.encoding:
            return
        direction = "AB" if node.name == "A" else "BA"
        if self.mode is TrafficMode.SATURATED and not node.arq.sender.queue:
            self._offer(node, direction, PayloadKind.DATA)
        out = node.arq.on_tick(self.now, n)
        if out is None:
            return
        header, payload = out
        raw = node.mac.build_uplink(header, payload)
        node.encoding = True
        self.engine.schedule(self.engine.now + self.encode_ns, node.node_id, "encoded", self._encoded, node, raw)

    def _encoded(self, node: _EndNode, raw: bytes) -> None:
        node.mac.tx_que_sample.append(raw)
        node.encoding = False

    # applications

    def _offer(self, node: _EndNode, direction: str, kind: PayloadKind, index: int | None = None, sent_ns: int | None = None) -> None:
        if index is None:
            index = node.next_index
            node.next_index += 1
        payload = node.factory.make(index, kind, self.engine.now if sent_ns is None else sent_ns)
        node.arq.submit(payload)
        if kind is not PayloadKind.ECHO_REPLY:
            self.offered[direction] += 1

    def _app_receive(self, node: _EndNode, payload: bytes) -> None:
        sender = self.nodes["B" if node.name == "A" else "A"]
        app, ok = sender.factory.parse(payload)
        direction = sender.name + node.name
        if app.kind is PayloadKind.ECHO_REPLY:
            self.rtt.append((self.engine.now - app.sent_ns) / NS)
            return
        self.sinks[direction].accept(app, ok, len(payload), self.engine.now)
        if app.kind is PayloadKind.ECHO_REQUEST:
            self._offer(node, node.name + sender.name, PayloadKind.ECHO_REPLY, app.index, app.sent_ns)

    def _ping(self, k: int) -> None:
        self._offer(self.nodes["A"], "AB", PayloadKind.ECHO_REQUEST)

    # driver

    def _done(self) -> bool:
        limit = self._payload_limit()
        if limit is None:
            return False
        return all(self.sinks[d].delivered >= limit for d in ("AB", "BA"))

    def run(self) -> MetricsReport:
        d, _ = self.relay_latency.draw()
        self._at(self.relay_boundary(0) + to_ps(d), RELAY_ID, "relay_wake", self._relay_wake, 0)

        limit = self._payload_limit()
        if limit is not None:
            for name, direction in (("A", "AB"), ("B", "BA")):
                for _ in range(limit):
                    self._offer(self.nodes[name], direction, PayloadKind.DATA)
        if self.mode is TrafficMode.ECHO:
            interval = self.cfg.traffic.echo_interval_slots
            start = 20
            k = 0
            while start + k * interval < self.slots - 40:
                t = self.relay_boundary(start + k * interval) + to_ps(self.app_rng.uniform(0, float(self.T_s)))
                self._at(t, 3, "ping", self._ping, k)
                k += 1

        self.engine.run(until_ns=ps_to_ns(self.end_ps), stop=self._done if limit is not None else None)
        return self._report()

    def _report(self) -> MetricsReport:
        finished = self._done() if self._payload_limit() is not None else True
        duration = min(self.now, self.end_ps / PS) if self._payload_limit() is not None else self.end_ps / PS
        rep = MetricsReport(
            scheme=self.cfg.run.scheme.value,
            slots=self.slots,
            duration_s=float(duration),
            slot_duration=float(self.T_s),
            finished=finished,
            events=self.engine.processed,
        )
        for d, sink in self.sinks.items():
            rep.delivered[d] = sink.delivered
            rep.delivered_bytes[d] = sink.delivered_bytes
            rep.order_errors[d] = sink.order_errors
            rep.integrity_errors[d] = sink.integrity_errors
            rep.offered[d] = self.offered[d]
        rep.rtt_s = list(self.rtt)
        for name, node in self.nodes.items():
            rep.decode_times_s[name] = list(node.decode_times)
            rep.adjustments[name] = list(node.mac.adjustments)
            rep.sync_losses[name] = node.mac.sync_losses
            rep.retransmissions[name] = node.arq.sender.retransmissions
        rep.uplink = list(self.uplink_records)
        rep.downlink = list(self.downlink_records)
        rep.relay = {
            "forwarded": self.relay.forwarded,
            "beacons": self.relay.beacons,
            "dropped": self.relay.dropped,
            "xor_received": self.relay.xor_received,
            "single_received": self.relay.single_received,
            "queued": len(self.relay.forward_queue),
        }
        return rep

    def write_trace(self, path: str | Path) -> None:
        if self.trace_rows is None:
            raise RuntimeError("network was built without keep_trace")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_ns", "node", "event", "detail"])
            w.writerows(self.trace_rows)


def run(cfg: SimConfig, keep_trace: bool = False) -> MetricsReport:
    return Network(cfg, keep_trace).run()


def ts_baseline(cfg: SimConfig, keep_trace: bool = False) -> MetricsReport:
    """Same configuration, but the relay schedules A and B in alternating uplink slots."""
    return Network(cfg.with_overrides(run={"scheme": Scheme.TS.value}), keep_trace).run()
