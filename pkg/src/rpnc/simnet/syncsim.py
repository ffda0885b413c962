"""Sample-level slot synchronization experiment.

The simulation steps through relay slots. In every reference slot the relay
sends its preamble on the downlink; each end node receives it as samples
(placed at the exact fractional tick its own clock sees it, through the
channel and noise), detects it and feeds the sample-counted arrival to its
MAC, which maintains and realigns the slot boundaries. In every uplink slot
both synchronized nodes send their preambles one slot ahead, and the relay
measures each user's arrival offset from the superposed samples: the
coarse start from a narrow cross-correlation, refined by the phase slope of
the user's LTS channel estimate. The per-slot difference between the two
users is the synchronization error of interest.

Host latencies are not modelled here: boundaries are hardware timestamps,
so latency only decides whether the one-slot-ahead schedule is feasible,
which the packet-level simulator covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..baseband import (
    OfdmParams,
    SampleStream,
    apply_taps,
    awgn,
    estimate_csi,
    phase_slope_offset,
    place,
    preamble_set,
    sync_narrow,
    sync_standard,
)
from ..errors import ConfigError, EstimationError, RangeError
from ..mac import EndNodeMac, RxState
from ..roles import END_NODES, Role
from ..slot_timing import TxDelayBound
from .channel import user_taps
from .clock import PS, HardwareClock
from .config import SimConfig
from .metrics import empirical_cdf, percentile
from .network import exact, to_ps


@dataclass
class SyncRecord:
    """Relay-side measurement of one uplink slot where both users transmitted."""

    slot: int
    true_a: float
    true_b: float
    est_a: float
    est_b: float
    cp_violation: bool

    @property
    def delta_d(self) -> float:
        return self.est_a - self.est_b

    @property
    def true_delta(self) -> float:
        return self.true_a - self.true_b


@dataclass
class SyncReport:
    window: int
    tx_gap: int
    realign: bool
    slots: int
    records: list[SyncRecord] = field(default_factory=list)
    adjustments: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    sync_losses: dict[str, int] = field(default_factory=dict)
    missed_references: dict[str, int] = field(default_factory=dict)

    def abs_delta(self) -> np.ndarray:
        """|Delta_d| per measured slot; a user the relay failed to detect counts as +inf."""
        return np.array([abs(r.delta_d) for r in self.records], dtype=float)

    def fraction_within(self, limit: float) -> float:
        d = self.abs_delta()
        return float(np.mean(d <= limit)) if len(d) else float("nan")

    def percentile(self, q: float = 90.0) -> float:
        return percentile(self.abs_delta(), q)

    def cdf(self, grid) -> np.ndarray:
        return empirical_cdf(self.abs_delta(), grid)

    @property
    def cp_violations(self) -> int:
        return sum(r.cp_violation for r in self.records)


@dataclass
class _Node:
    role: Role
    clock: HardwareClock
    mac: EndNodeMac
    taps_down: np.ndarray
    taps_up: np.ndarray
    offset: int = 0  # relay slot index of the node's slot 0
    anchor_tick: int = 0
    missed: int = 0


class SyncSimulation:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        o, p, c = cfg.ofdm, cfg.protocol, cfg.clocks
        self.params = OfdmParams(o.n_subcarriers, o.cp_len, o.sts_len, o.bandwidth)
        self.pre = preamble_set(self.params, o.preamble_seed)
        self.B = exact(o.bandwidth)
        spt = exact(p.slot_duration) * self.B
        if spt.denominator != 1:
            raise ConfigError("slot duration must span a whole number of samples")
        self.spt = int(spt)
        self.prop_ps = to_ps(exact(cfg.channel.propagation_delay))
        self.snr_db = cfg.channel.snr_db
        self.period = p.tx_gap + 1
        self.slots = cfg.run.slots

        seeds = np.random.SeedSequence([cfg.run.seed, 0x5C]).spawn(4)
        self.noise_rng = np.random.default_rng(seeds[0])
        self.search_rng = np.random.default_rng(seeds[1])
        tap_rng = np.random.default_rng(seeds[2])

        self.relay_clock = HardwareClock(exact(c.start_relay), self.B, exact(c.drift_ppm_relay), "R")
        bounds = TxDelayBound(exact(cfg.latency.delta_max), exact(cfg.latency.phi_max), p.one_slot_ahead)
        self.nodes: dict[Role, _Node] = {}
        for role, start, ppm in ((Role.A, c.start_a, c.drift_ppm_a), (Role.B, c.start_b, c.drift_ppm_b)):
            mac = EndNodeMac(role, exact(p.slot_duration), 1 / self.B, p.window, p.tx_gap, p.realign, bounds, p.data_size)
            self.nodes[role] = _Node(
                role, HardwareClock(exact(start), self.B, exact(ppm), role.value), mac,
                user_taps(cfg.channel, tap_rng), user_taps(cfg.channel, tap_rng),
            )
        self.tap_spread = len(cfg.channel.taps_db) - 1
        self.tap_rng = tap_rng

    def _taps(self, fixed: np.ndarray) -> np.ndarray:
        """Per-reception block fading when enabled, else the node's fixed taps."""
        return user_taps(self.cfg.channel, self.tap_rng) if self.cfg.channel.fading else fixed

    # clock helpers

    def _relay_ps(self, m: int) -> int:
        return self.relay_clock.true_ps_of_tick(m * self.spt)

    def _node_boundary_tick(self, node: _Node, n: int) -> int:
        return node.anchor_tick + n * self.spt + node.mac.sched.adjust_for(n)

    @staticmethod
    def _frac_tick(clock: HardwareClock, t_ps: int) -> float:
        num, den = clock.ticks_at_ps(t_ps)
        whole = num // den
        return whole + (num - whole * den) / den

    # downlink: reference reception at an end node

    def _receive_reference(self, node: _Node, m: int) -> None:
        pre = self.pre[Role.RELAY]
        C, L = self.params.cp_len, self.params.sts_len
        arrival = self._frac_tick(node.clock, self._relay_ps(m) + self.prop_ps)
        mac = node.mac

        if mac.rx_state is RxState.SYNC:
            n = m - node.offset
            expected = self._node_boundary_tick(node, n)
            origin = expected - C
        else:
            # Full search over a stretch that starts somewhere before the preamble.
            origin = math.floor(arrival) - C - int(self.search_rng.integers(0, 4 * L))
        length = len(pre.samples) + 4 * C + 4 * L
        y = apply_taps(place(length, pre.samples, arrival - origin), self._taps(node.taps_down))
        if self.snr_db is not None:
            y = y + awgn(self.noise_rng, length, self.snr_db)
        stream = SampleStream(y, origin)

        if mac.rx_state is RxState.SYNC:
            try:
                det, _ = sync_narrow(stream, pre, expected, self.params)
            except RangeError:
                det = None
            hw = None if det is None else node.clock.hw_time_of_tick(det.start_tick)
            if det is None:
                node.missed += 1
            step = mac.endnode_rx_flowchart_step(n, hw)
            if step.lost_sync:
                return
        else:
            dets, _ = sync_standard(stream, [pre], self.params)
            if not dets:
                node.missed += 1
                return
            tick = dets[0].start_tick
            mac.acquire(node.clock.hw_time_of_tick(tick))
            node.anchor_tick = tick
            node.offset = m

    def _idle_step(self, node: _Node, m: int) -> None:
        if node.mac.rx_state is RxState.SYNC:
            node.mac.endnode_rx_flowchart_step(m - node.offset, None)

    # uplink: relay measurement

    def _uplink_offset(self, node: _Node, m_next: int) -> float:
        """Offset (relay samples) of the node's transmission aimed at relay uplink slot m_next."""
        n_tx = m_next - node.offset
        t = node.clock.true_ps_of_tick(self._node_boundary_tick(node, n_tx)) + self.prop_ps
        return self._frac_tick(self.relay_clock, t) - m_next * self.spt

    def _measure(self, k: int, offsets: dict[Role, float]) -> SyncRecord:
        C = self.params.cp_len
        N = self.params.n_subcarriers
        length = len(self.pre[Role.A].samples) + 4 * C
        y = np.zeros(length, dtype=np.complex128)
        for role, e in offsets.items():
            node = self.nodes[role]
            y += apply_taps(place(length, self.pre[role].samples, C + e), self._taps(node.taps_up))
        if self.snr_db is not None:
            y += awgn(self.noise_rng, length, self.snr_db)
        stream = SampleStream(y, k * self.spt - C)
        expected = k * self.spt

        est = {}
        for role in END_NODES:
            pre = self.pre[role]
            try:
                det, _ = sync_narrow(stream, pre, expected, self.params)
            except RangeError:
                det = None
            if det is None:
                est[role] = math.inf
                continue
            body = det.start_tick + pre.lts_body_offset
            try:
                csi = estimate_csi(stream.window(body, N), pre, self.params)
                est[role] = (det.start_tick - expected) + phase_slope_offset(csi)
            except (RangeError, EstimationError):
                est[role] = math.inf
        lo = min(offsets.values())
        hi = max(offsets.values()) + self.tap_spread
        a, b = est[Role.A], est[Role.B]
        if math.isinf(a) or math.isinf(b):
            a, b = math.inf, 0.0
        return SyncRecord(k, offsets[Role.A], offsets[Role.B], a, b, hi - lo > C)

    def run(self) -> SyncReport:
        rep = SyncReport(self.cfg.protocol.window, self.cfg.protocol.tx_gap, self.cfg.protocol.realign, self.slots)
        for m in range(self.slots):
            for node in self.nodes.values():
                if m % self.period == 0:
                    self._receive_reference(node, m)
                else:
                    self._idle_step(node, m)
            synced = [n for n in self.nodes.values() if n.mac.rx_state is RxState.SYNC and m >= n.offset]
            if len(synced) == 2:
                offsets = {n.role: self._uplink_offset(n, m + 1) for n in synced}
                rep.records.append(self._measure(m + 1, offsets))
        for role, node in self.nodes.items():
            rep.adjustments[role.value] = list(node.mac.adjustments)
            rep.sync_losses[role.value] = node.mac.sync_losses
            rep.missed_references[role.value] = node.missed
        return rep


def run_sync(cfg: SimConfig) -> SyncReport:
    return SyncSimulation(cfg).run()


def measure_sync_cdf(cfg: SimConfig, sweep: str, values, grid) -> dict:
    """Empirical CDF of |Delta_d| for each value of ``window`` or ``tx_gap``.

    Returns {value: (report, cdf over grid)}.
    """
    if sweep not in ("window", "tx_gap"):
        raise ConfigError(f"cannot sweep {sweep!r}; choose window or tx_gap")
    out = {}
    for v in values:
        rep = run_sync(cfg.with_overrides(protocol={sweep: v}))
        out[v] = (rep, rep.cdf(grid))
    return out
