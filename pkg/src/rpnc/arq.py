"""End-to-end selective-repeat ARQ with cumulative ACK and SACK blocks.

Sequence numbers are unbounded integers internally and travel as one byte;
the receiver of a byte resolves it to the integer nearest a reference point
(the expected sequence for data, the window base for acknowledgements),
which is unambiguous while the window stays at or below 127.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import MeasurementError, ParameterError
from .linkcodec import MAX_SACK_BLOCKS, LinkHeader, SackBlock

SEQ_MODULUS = 256
MAX_WINDOW = 127
INITIAL_WINDOW = 8


def unwrap_seq(wire: int, reference: int) -> int:
    """Integer sequence congruent to ``wire`` mod 256 nearest to ``reference``."""
    d = (wire - reference + SEQ_MODULUS // 2) % SEQ_MODULUS - SEQ_MODULUS // 2
    return reference + d


@dataclass(frozen=True)
class RttEstimator:
    rtt_est: float
    rtt_dev: float
    alpha: float = Fraction(1, 8)
    beta: float = Fraction(1, 4)
    seeded: bool = False

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ParameterError("alpha and beta must lie in (0, 1)")
        if self.rtt_est < 0 or self.rtt_dev < 0:
            raise ParameterError("RTT estimate and deviation must be non-negative")

    @property
    def timeout(self):
        return self.rtt_est + 4 * self.rtt_dev

    @classmethod
    def initial(cls, t_s, alpha=Fraction(1, 8), beta=Fraction(1, 4)) -> "RttEstimator":
        """Seed with four slots (the shortest two-hop round trip) and an equal deviation.

        The first timeout is then 20 slots, above the round trip of the
        simulated pipeline, so the first packets are not retransmitted
        spuriously (which would leave Karn's rule with nothing to sample).
        """
        est = 4 * t_s
        return cls(est, est, alpha, beta, seeded=False)


def update_rtt(est: RttEstimator, sample) -> RttEstimator:
    """EWMA update; the deviation uses the estimate from before this sample."""
    if sample <= 0:
        raise MeasurementError(f"RTT sample {sample} is not positive")
    dev = (1 - est.beta) * est.rtt_dev + est.beta * abs(sample - est.rtt_est)
    new_est = (1 - est.alpha) * est.rtt_est + est.alpha * sample
    return RttEstimator(new_est, dev, est.alpha, est.beta, seeded=True)


def window_size(est: RttEstimator, t_s, cap: int = MAX_WINDOW) -> int:
    if t_s <= 0:
        raise ParameterError("slot duration must be positive")
    return max(1, min(cap, math.ceil(est.timeout / t_s)))


@dataclass
class InFlight:
    send_time: float
    payload: bytes
    retransmit_count: int = 0


@dataclass(frozen=True)
class Outgoing:
    seq: int
    payload: bytes
    retransmission: bool


@dataclass
class SendWindow:
    t_s: float
    rtt: RttEstimator = None
    base: int = 0
    next_seq: int = 0
    in_flight: dict[int, InFlight] = field(default_factory=dict)
    queue: deque = field(default_factory=deque)
    initial_window: int = INITIAL_WINDOW
    max_window: int = MAX_WINDOW
    reliable: bool = True
    retransmissions: int = 0
    high_acked: int = -1

    def __post_init__(self):
        if self.rtt is None:
            self.rtt = RttEstimator.initial(self.t_s)
        if not 1 <= self.max_window <= MAX_WINDOW:
            raise ParameterError(f"window cap must lie in [1, {MAX_WINDOW}]")

    @property
    def window_limit(self) -> int:
        if not self.rtt.seeded:
            return min(self.initial_window, self.max_window)
        return window_size(self.rtt, self.t_s, self.max_window)

    def submit(self, payload: bytes) -> None:
        self.queue.append(payload)

    @property
    def idle(self) -> bool:
        return not self.queue and not self.in_flight


def sender_on_tick(w: SendWindow, now, max_packets: int = 1) -> list[Outgoing]:
    """Retransmit expired packets first, then open new sequence numbers while the window allows."""
    out: list[Outgoing] = []
    if w.reliable:
        timeout = w.rtt.timeout
        for seq in sorted(w.in_flight):
            if len(out) >= max_packets:
                break
            pkt = w.in_flight[seq]
            if now - pkt.send_time > timeout:
                pkt.send_time = now
                pkt.retransmit_count += 1
                w.retransmissions += 1
                out.append(Outgoing(seq, pkt.payload, True))
    while len(out) < max_packets and w.queue:
        if w.reliable and w.next_seq - w.base >= w.window_limit:
            break
        seq = w.next_seq
        payload = w.queue.popleft()
        w.next_seq += 1
        if w.reliable:
            w.in_flight[seq] = InFlight(now, payload)
        else:
            w.base = w.next_seq
        out.append(Outgoing(seq, payload, False))
    return out


def sender_on_ack(w: SendWindow, ack_no: int, sack_blocks, now) -> tuple[list[int], list[int]]:
    """Apply a cumulative ACK plus SACK blocks (all given as integer sequences).

    Returns the newly acknowledged sequences and the fast-retransmit list,
    which is always empty because loss recovery is timeout driven.
    """
    if not w.reliable:
        return [], []
    if ack_no < w.base - 1 or ack_no >= w.next_seq:
        return [], []
    acked = [s for s in w.in_flight if s <= ack_no]
    for start, length in sack_blocks:
        for s in range(start, start + length):
            if s in w.in_flight and s > ack_no:
                acked.append(s)
    acked.sort()
    fresh = [s for s in acked if w.in_flight[s].retransmit_count == 0]
    # A sample is only trusted when the feedback is complete (the receiver had
    # room for all of its runs) and reaches past everything acknowledged
    # before; otherwise the newest packet may have been buffered for a long time.
    complete = len(sack_blocks) < MAX_SACK_BLOCKS
    if fresh and complete and max(fresh) > w.high_acked:
        sample = now - w.in_flight[max(fresh)].send_time
        if sample > 0:
            w.rtt = update_rtt(w.rtt, sample)
    if acked:
        w.high_acked = max(w.high_acked, acked[-1])
    for s in acked:
        del w.in_flight[s]
    w.base = min(w.in_flight) if w.in_flight else w.next_seq
    return acked, []


@dataclass
class RecvBuffer:
    expected: int = 0
    out_of_order: dict[int, bytes] = field(default_factory=dict)
    received_any: bool = False
    duplicates: int = 0

    @property
    def ack_no(self) -> int:
        return self.expected - 1

    def sack_runs(self, limit: int = MAX_SACK_BLOCKS) -> list[tuple[int, int]]:
        """Maximal runs of buffered sequences, nearest to the cumulative point first."""
        runs: list[tuple[int, int]] = []
        for s in sorted(self.out_of_order):
            if runs and s == runs[-1][0] + runs[-1][1] and runs[-1][1] < 255:
                runs[-1] = (runs[-1][0], runs[-1][1] + 1)
            else:
                if len(runs) == limit:
                    break
                runs.append((s, 1))
        return runs


def receiver_on_data(r: RecvBuffer, seq: int, payload: bytes) -> tuple[list[tuple[int, bytes]], int, list[tuple[int, int]]]:
    """Accept one data packet (integer sequence); returns (delivered, ack_no, sack runs)."""
    r.received_any = True
    delivered: list[tuple[int, bytes]] = []
    if seq < r.expected or seq in r.out_of_order:
        r.duplicates += 1
    elif seq == r.expected:
        delivered.append((seq, payload))
        r.expected += 1
        while r.expected in r.out_of_order:
            delivered.append((r.expected, r.out_of_order.pop(r.expected)))
            r.expected += 1
    else:
        r.out_of_order[seq] = payload
    return delivered, r.ack_no, r.sack_runs()


def build_feedback(r: RecvBuffer, pending_data: Outgoing | None, ack_due: bool = False) -> LinkHeader | None:
    """Header skeleton for the next packet.

    Data packets always piggyback the current acknowledgement once anything
    has been received. Without data, an ACK-only header is produced when
    ``ack_due`` says the feedback has waited long enough.
    """
    ack = {}
    if r.received_any:
        runs = r.sack_runs()
        ack = dict(
            ack_flag=True,
            ack_no=r.ack_no % SEQ_MODULUS,
            sack_blocks=tuple(SackBlock(s % SEQ_MODULUS, n) for s, n in runs),
        )
    if pending_data is not None:
        return LinkHeader(seq_flag=True, seq_no=pending_data.seq % SEQ_MODULUS, **ack)
    if ack_due and ack:
        return LinkHeader(**ack)
    return None


@dataclass
class ArqEvent:
    time: float
    direction: str
    event: str
    seq: int | None
    ack: int | None
    sack: str
    retransmit: bool


class ArqEndpoint:
    """Sender and receiver halves of one end node, exchanging link headers.

    With ``reliable=False`` packets are sent once and the receiver hands up
    whatever arrives.
    """

    def __init__(self, name: str, t_s: float, reliable: bool = True, ack_delay: int = 2,
                 alpha=Fraction(1, 8), beta=Fraction(1, 4), max_window: int = MAX_WINDOW,
                 trace: list | None = None):
        self.name = name
        self.t_s = t_s
        self.reliable = reliable
        self.ack_delay = ack_delay
        self.sender = SendWindow(t_s, RttEstimator.initial(t_s, alpha, beta), reliable=reliable, max_window=max_window)
        self.receiver = RecvBuffer()
        self.feedback_pending_since: int | None = None
        self.trace = trace

    def submit(self, payload: bytes) -> None:
        self.sender.submit(payload)

    def _log(self, now, event, seq=None, ack=None, sack="", retransmit=False):
        if self.trace is not None:
            self.trace.append(ArqEvent(float(now), self.name, event, seq, ack, sack, retransmit))

    def on_tick(self, now, slot: int) -> tuple[LinkHeader, bytes] | None:
        """Produce at most one packet for the next uplink opportunity."""
        out = sender_on_tick(self.sender, now, 1)
        data = out[0] if out else None
        due = (
            self.reliable
            and self.feedback_pending_since is not None
            and slot - self.feedback_pending_since >= self.ack_delay
        )
        header = build_feedback(self.receiver, data, ack_due=due) if self.reliable else (
            LinkHeader(seq_flag=True, seq_no=data.seq % SEQ_MODULUS) if data else None
        )
        if header is None:
            return None
        if header.ack_flag:
            self.feedback_pending_since = None
        if data is not None:
            self._log(now, "send", data.seq, self.receiver.ack_no if header.ack_flag else None,
                      _fmt_sack(header), data.retransmission)
            return header, data.payload
        self._log(now, "ack", None, self.receiver.ack_no, _fmt_sack(header))
        return header, b""

    def on_packet(self, header: LinkHeader, payload: bytes, now, slot: int) -> list[tuple[int, bytes]]:
        """Consume a packet from the peer; returns payloads delivered in order."""
        delivered: list[tuple[int, bytes]] = []
        if header.ack_flag and self.reliable:
            ack = unwrap_seq(header.ack_no, self.sender.base - 1)
            runs = [(unwrap_seq(b.start_seq, self.sender.base), b.length) for b in header.sack_blocks]
            acked, _ = sender_on_ack(self.sender, ack, runs, now)
            if acked:
                self._log(now, "acked", None, ack, ";".join(f"{s}+{n}" for s, n in runs))
        if header.seq_flag:
            seq = unwrap_seq(header.seq_no, self.receiver.expected)
            if self.reliable:
                delivered, _, _ = receiver_on_data(self.receiver, seq, payload)
                if self.feedback_pending_since is None:
                    self.feedback_pending_since = slot
            else:
                self.receiver.received_any = True
                self.receiver.expected = max(self.receiver.expected, seq + 1)
                delivered = [(seq, payload)]
            self._log(now, "recv", seq, None, "", False)
        return delivered


def _fmt_sack(h: LinkHeader) -> str:
    return ";".join(f"{b.start_seq}+{b.length}" for b in h.sack_blocks)
