from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def ewma(values, weight: float = 0.01) -> np.ndarray:
    """Exponentially weighted moving average seeded with the first value."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    acc = None
    for i, v in enumerate(values):
        acc = v if acc is None else (1 - weight) * acc + weight * v
        out[i] = acc
    return out


def empirical_cdf(values, grid) -> np.ndarray:
    """P(X <= g) for each g in grid; non-finite values count as never below."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        return np.zeros(len(grid))
    finite = np.sort(values[np.isfinite(values)])
    return np.searchsorted(finite, np.asarray(grid, dtype=float), side="right") / n


def percentile(values, q: float) -> float:
    """q-th percentile treating non-finite entries as +inf."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return float("nan")
    values = np.where(np.isfinite(values), values, np.inf)
    return float(np.percentile(values, q, method="higher"))


@dataclass
class UplinkRecord:
    slot: int
    kind: str
    offset_a: float
    offset_b: float
    cp_violation: bool
    erased: bool


@dataclass
class MetricsReport:
    scheme: str
    slots: int
    duration_s: float
    slot_duration: float
    delivered: dict[str, int] = field(default_factory=dict)
    delivered_bytes: dict[str, int] = field(default_factory=dict)
    offered: dict[str, int] = field(default_factory=dict)
    order_errors: dict[str, int] = field(default_factory=dict)
    integrity_errors: dict[str, int] = field(default_factory=dict)
    rtt_s: list[float] = field(default_factory=list)
    decode_times_s: dict[str, list[float]] = field(default_factory=dict)
    uplink: list[UplinkRecord] = field(default_factory=list)
    downlink: list[tuple[int, str]] = field(default_factory=list)
    adjustments: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    sync_losses: dict[str, int] = field(default_factory=dict)
    retransmissions: dict[str, int] = field(default_factory=dict)
    relay: dict[str, int] = field(default_factory=dict)
    finished: bool = True
    events: int = 0

    def goodput(self, direction: str) -> float:
        """Delivered application bytes per second in one direction ("AB" or "BA")."""
        return self.delivered_bytes.get(direction, 0) / self.duration_s if self.duration_s > 0 else 0.0

    def delivered_fraction(self, direction: str) -> float:
        offered = self.offered.get(direction, 0)
        return self.delivered.get(direction, 0) / offered if offered else float("nan")

    @property
    def cp_violations(self) -> int:
        return sum(r.cp_violation for r in self.uplink)

    def nonzero_adjustments(self) -> int:
        return sum(1 for v in self.adjustments.values() for _, d in v if d)

    def decode_gaps(self, node: str) -> np.ndarray:
        t = np.asarray(self.decode_times_s.get(node, []), dtype=float)
        return np.diff(t)

    def summary(self) -> dict:
        return {
            "scheme": self.scheme,
            "slots": self.slots,
            "duration_s": self.duration_s,
            "delivered_AB": self.delivered.get("AB", 0),
            "delivered_BA": self.delivered.get("BA", 0),
            "goodput_AB_Bps": self.goodput("AB"),
            "goodput_BA_Bps": self.goodput("BA"),
            "cp_violations": self.cp_violations,
            "retransmissions_A": self.retransmissions.get("A", 0),
            "retransmissions_B": self.retransmissions.get("B", 0),
            "rtt_samples": len(self.rtt_s),
            "finished": self.finished,
        }
