"""Experiment suite: each experiment returns CSV-ready tables and threshold checks."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .baseband import OfdmParams, SampleStream, place, preamble_set, sync_exhaustive_cross, sync_narrow, sync_standard
from .roles import Role
from .simnet.config import SimConfig
from .simnet.metrics import MetricsReport, ewma
from .simnet.network import Network, run, ts_baseline
from .simnet.syncsim import SyncReport, run_sync

WINDOWS = (1, 10, 100)
TX_GAPS = (0, 1, 5, 10)
CDF_GRID = tuple(round(0.25 * i, 2) for i in range(81))  # 0 .. 20 samples
SNR_POINTS = (4.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ExperimentResult:
    name: str
    tables: dict[str, list[dict]] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _map(fn: Callable, items: list, jobs: int) -> list:
    """Run independent configurations, in worker processes when jobs > 1; order is preserved."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _fmt(x: float, digits: int = 4) -> str:
    return "inf" if math.isinf(x) else f"{x:.{digits}f}"


# sync accuracy


def _sync_row(sweep: str, value: int, rep: SyncReport) -> dict:
    return {
        "sweep": sweep,
        "value": value,
        "window": rep.window,
        "tx_gap": rep.tx_gap,
        "measured_slots": len(rep.records),
        "p_within_2": rep.fraction_within(2.0),
        "p_within_2_5": rep.fraction_within(2.5),
        "p90_abs_delta": rep.percentile(90),
        "cp_violations": rep.cp_violations,
        "sync_losses": sum(rep.sync_losses.values()),
        "nonzero_adjustments": sum(1 for v in rep.adjustments.values() for _, d in v if d),
    }


def sync_accuracy(cfg: SimConfig, windows=WINDOWS, tx_gaps=TX_GAPS, grid=CDF_GRID, jobs: int = 1) -> ExperimentResult:
    """|Delta_d| CDFs over window sizes (at the configured tx_gap) and over tx_gap (at the configured window)."""
    base_w, base_g = cfg.protocol.window, cfg.protocol.tx_gap
    keys = sorted({(w, base_g) for w in windows} | {(base_w, g) for g in tx_gaps})
    cfgs = [cfg.with_overrides(protocol={"window": w, "tx_gap": g}) for w, g in keys]
    reports = dict(zip(keys, _map(run_sync, cfgs, jobs)))

    res = ExperimentResult("sync-accuracy")
    summary = []
    for sweep, values, key_of in (
        ("window", windows, lambda v: (v, base_g)),
        ("tx_gap", tx_gaps, lambda v: (base_w, v)),
    ):
        for v in values:
            rep = reports[key_of(v)]
            cdf = rep.cdf(grid)
            res.tables[f"sync_cdf_{sweep}_{v}.csv"] = [
                {"abs_delta_samples": g, "cdf": float(c)} for g, c in zip(grid, cdf)
            ]
            summary.append(_sync_row(sweep, v, rep))
    res.tables["sync_summary.csv"] = summary

    if 10 in windows:
        w10 = reports[(10, base_g)]
        p = w10.fraction_within(2.0)
        res.checks.append(Check("W=10 P(|dd|<=2)>=0.90", p >= 0.90, f"{p:.4f}"))
        if 1 in windows and 100 in windows:
            q = {w: reports[(w, base_g)].percentile(90) for w in (1, 10, 100)}
            ok = q[10] <= q[1] and q[10] <= q[100]
            res.checks.append(Check(
                "W=10 p90 <= W=1 and W=100", ok,
                ", ".join(f"W={w}: {_fmt(q[w])}" for w in (1, 10, 100)),
            ))
    if 10 in tx_gaps:
        p = reports[(base_w, 10)].fraction_within(2.5)
        res.checks.append(Check("tx_gap=10 P(|dd|<=2.5)>=0.90", p >= 0.90, f"{p:.4f}"))
    return res


# frame synchronization cost


def framesync_bench(cfg: SimConfig, slots: int = 6, seed: int | None = None) -> ExperimentResult:
    """Correlator operation counts per slot on noiseless streams with one preamble per slot.

    Two receiver views: an end node searching for the relay preamble, and
    the relay searching for A and B (alternating slots).
    """
    o = cfg.ofdm
    params = OfdmParams(o.n_subcarriers, o.cp_len, o.sts_len, o.bandwidth)
    pres = preamble_set(params, o.preamble_seed)
    N = round(cfg.protocol.slot_duration * o.bandwidth)
    C, L = params.cp_len, params.sts_len
    rng = np.random.default_rng(cfg.run.seed if seed is None else seed)

    views = {
        "end_node": ([pres[Role.RELAY]], [Role.RELAY]),
        "relay": ([pres[Role.A], pres[Role.B]], [Role.A, Role.B]),
    }
    res = ExperimentResult("framesync-bench")
    rows = []
    identical = True
    totals = {}
    for view, (searched, order) in views.items():
        agg = {"exhaustive": 0, "standard": 0, "narrow": 0}
        detections = 0
        for k in range(slots):
            role = order[k % len(order)]
            pre = pres[role]
            pos = int(rng.integers(2 * C, N - len(pre.samples) - 2 * C))
            origin = k * N
            stream = SampleStream(place(N, pre.samples, pos), origin)
            truth = {(role, origin + pos)}

            ex, c_ex = sync_exhaustive_cross(stream, searched, params)
            st, c_st = sync_standard(stream, searched, params)
            nr, c_nr = sync_narrow(stream, pre, origin + pos, params)
            found = [{(d.role, d.start_tick) for d in ex}, {(d.role, d.start_tick) for d in st},
                     set() if nr is None else {(nr.role, nr.start_tick)}]
            same = all(f == truth for f in found)
            identical &= same
            detections += len(st)
            agg["exhaustive"] += c_ex.complex_multiplies
            agg["standard"] += c_st.complex_multiplies
            agg["narrow"] += c_nr.complex_multiplies
            rows.append({
                "view": view, "slot": k, "role": role.value, "start_tick": origin + pos,
                "exhaustive_multiplies": c_ex.complex_multiplies,
                "standard_multiplies": c_st.complex_multiplies,
                "standard_cross_multiplies": c_st.cross_multiplies,
                "narrow_multiplies": c_nr.complex_multiplies,
                "detections_identical": same,
            })
        per_slot = {k: v / slots for k, v in agg.items()}
        totals[view] = (per_slot, detections / slots)
    res.tables["framesync_slots.csv"] = rows
    res.tables["framesync_summary.csv"] = [
        {
            "view": view, "N": N, "L": L, "C": C,
            "exhaustive_per_slot": ps["exhaustive"],
            "standard_per_slot": ps["standard"],
            "narrow_per_slot": ps["narrow"],
            "detections_per_slot": det,
            "exhaustive_over_narrow": ps["exhaustive"] / ps["narrow"],
            "n_over_c_plus_1": N / (C + 1),
        }
        for view, (ps, det) in totals.items()
    ]

    for view, (ps, det) in totals.items():
        res.checks.append(Check(f"{view}: narrow <= (C+1)L per slot", ps["narrow"] <= (C + 1) * L,
                                f"{ps['narrow']:.0f} <= {(C + 1) * L}"))
        bound = 2 * N + det * (C + 1) * L
        res.checks.append(Check(f"{view}: standard <= 2N + detections(C+1)L", ps["standard"] <= bound,
                                f"{ps['standard']:.0f} <= {bound:.0f}"))
        res.checks.append(Check(f"{view}: exhaustive >= 0.95 NL", ps["exhaustive"] >= 0.95 * N * L,
                                f"{ps['exhaustive']:.0f} >= {0.95 * N * L:.0f}"))
    ps, det = totals["end_node"]
    ratio = ps["exhaustive"] / ps["narrow"]
    res.checks.append(Check("exhaustive/narrow ~ N/(C+1) within 10%",
                            abs(ratio / (N / (C + 1)) - 1) <= 0.10, f"{ratio:.1f} vs {N / (C + 1):.1f}"))
    res.checks.append(Check("narrow < standard < exhaustive",
                            ps["narrow"] < ps["standard"] < ps["exhaustive"],
                            f"{ps['narrow']:.0f} < {ps['standard']:.0f} < {ps['exhaustive']:.0f}"))
    res.checks.append(Check("detections identical across algorithms", identical, str(identical)))
    return res


# throughput


def _lossless(cfg: SimConfig) -> SimConfig:
    return cfg.with_overrides(channel={"per_uplink": 0.0, "per_downlink": 0.0})


def _run_scheme(args: tuple[str, SimConfig]) -> MetricsReport:
    scheme, cfg = args
    return run(cfg) if scheme == "rpnc" else ts_baseline(cfg)


def _throughput_row(label: str, snr, arq: bool, rpnc: MetricsReport, ts: MetricsReport) -> dict:
    row = {"point": label, "snr_db": snr, "arq": arq}
    for d in ("AB", "BA"):
        row[f"rpnc_goodput_{d}_Bps"] = rpnc.goodput(d)
        row[f"ts_goodput_{d}_Bps"] = ts.goodput(d)
        row[f"ratio_{d}"] = rpnc.goodput(d) / ts.goodput(d) if ts.goodput(d) else float("nan")
    return row


def throughput(cfg: SimConfig, snr_points=SNR_POINTS, jobs: int = 1) -> ExperimentResult:
    """Saturated goodput per direction, RPNC against TS, with ARQ on and off.

    The first row is the lossless point; the others use the PER curves at each SNR.
    """
    base = cfg.with_overrides(traffic={"mode": "saturated"})
    points = [("per0", None, _lossless(base))]
    points += [(f"snr{s:g}", s, base.with_overrides(channel={"snr_db": s, "per_uplink": None, "per_downlink": None}))
               for s in snr_points]
    jobs_list = []
    for _, _, c in points:
        for arq in (False, True):
            cc = c.with_overrides(protocol={"arq": arq})
            jobs_list += [("rpnc", cc), ("ts", cc)]
    reports = _map(_run_scheme, jobs_list, jobs)

    res = ExperimentResult("throughput")
    rows = []
    it = iter(reports)
    for label, snr, _ in points:
        for arq in (False, True):
            rows.append(_throughput_row(label, snr, arq, next(it), next(it)))
    res.tables["throughput.csv"] = rows

    lossless = rows[0]
    ok = all(abs(lossless[f"ratio_{d}"] - 2.0) <= 0.02 for d in ("AB", "BA"))
    res.checks.append(Check("PER=0 RPNC/TS = 2.00 +- 0.02", ok,
                            f"AB {lossless['ratio_AB']:.4f}, BA {lossless['ratio_BA']:.4f}"))
    ideal = cfg.traffic.payload_size / cfg.protocol.slot_duration
    g = lossless["rpnc_goodput_AB_Bps"]
    res.checks.append(Check("lossless RPNC goodput ~ payload/T_s", abs(g / ideal - 1) <= 0.01,
                            f"{g:.0f} vs {ideal:.0f} B/s"))
    return res


# ARQ


def _reliable_cfg(cfg: SimConfig, per: float, payloads: int, arq: bool, slots: int) -> SimConfig:
    return cfg.with_overrides(
        run={"slots": slots},
        protocol={"arq": arq},
        channel={"per_uplink": per, "per_downlink": per},
        traffic={"mode": "reliable", "payloads": payloads},
    )


def _arq_row(label: str, per: float, arq: bool, mode: str, rep: MetricsReport, expected: float | None = None) -> dict:
    return {
        "case": label, "per_hop": per, "arq": arq, "mode": mode,
        "offered_AB": rep.offered.get("AB", 0), "offered_BA": rep.offered.get("BA", 0),
        "delivered_AB": rep.delivered.get("AB", 0), "delivered_BA": rep.delivered.get("BA", 0),
        "fraction_AB": rep.delivered_fraction("AB"), "fraction_BA": rep.delivered_fraction("BA"),
        "expected_fraction": float("nan") if expected is None else expected,
        "order_errors": sum(rep.order_errors.values()),
        "integrity_errors": sum(rep.integrity_errors.values()),
        "retransmissions": sum(rep.retransmissions.values()),
        "duration_s": rep.duration_s, "finished": rep.finished,
    }


def _exactly_once(rep: MetricsReport, payloads: int) -> bool:
    return (
        rep.finished
        and all(rep.delivered[d] == payloads for d in ("AB", "BA"))
        and sum(rep.order_errors.values()) == 0
        and sum(rep.integrity_errors.values()) == 0
    )


def arq_compare(cfg: SimConfig, per: float = 0.2, payloads: int = 10_000, stall_per: float = 0.3,
                stall_payloads: int = 500, jobs: int = 1) -> ExperimentResult:
    """Reliable transfer with ARQ, the ARQ-off delivered fraction, and the stall demonstration."""
    slots = max(cfg.run.slots, 8 * payloads)
    stall_slots = 8 * stall_payloads
    off_cfg = cfg.with_overrides(protocol={"arq": False}, channel={"per_uplink": per, "per_downlink": per},
                                 traffic={"mode": "saturated"})
    cases = [
        ("reliable_arq_on", _reliable_cfg(cfg, per, payloads, True, slots)),
        ("saturated_arq_off", off_cfg),
        ("stall_arq_off", _reliable_cfg(cfg, stall_per, stall_payloads, False, stall_slots)),
        ("stall_arq_on", _reliable_cfg(cfg, stall_per, stall_payloads, True, stall_slots)),
    ]
    reps = _map(run, [c for _, c in cases], jobs)
    on, off, stall_off, stall_on = reps
    expected = (1 - per) ** 2

    res = ExperimentResult("arq-compare")
    res.tables["arq_compare.csv"] = [
        _arq_row("reliable_arq_on", per, True, "reliable", on),
        _arq_row("saturated_arq_off", per, False, "saturated", off, expected),
        _arq_row("stall_arq_off", stall_per, False, "reliable", stall_off),
        _arq_row("stall_arq_on", stall_per, True, "reliable", stall_on),
    ]
    res.checks.append(Check(f"ARQ on, {per:.0%} loss: exactly-once in-order", _exactly_once(on, payloads),
                            f"delivered {on.delivered}, order errors {sum(on.order_errors.values())}"))
    fr = [off.delivered_fraction(d) for d in ("AB", "BA")]
    res.checks.append(Check("ARQ off: delivered fraction = (1-p)^2 +- 0.02",
                            all(abs(f - expected) <= 0.02 for f in fr),
                            f"AB {fr[0]:.4f}, BA {fr[1]:.4f} vs {expected:.4f}"))
    res.checks.append(Check(f"{stall_per:.0%} loss: ARQ off stalls, ARQ on completes",
                            not stall_off.finished and _exactly_once(stall_on, stall_payloads),
                            f"off finished={stall_off.finished}, on finished={stall_on.finished}"))
    return res


# RTT


def rtt(cfg: SimConfig, loss: float = 0.1, jobs: int = 1) -> ExperimentResult:
    """Echo round-trip times: RPNC against TS lossless, and ARQ on against off under loss."""
    echo = cfg.with_overrides(traffic={"mode": "echo"})
    lossless = _lossless(echo)
    lossy = echo.with_overrides(channel={"per_uplink": loss, "per_downlink": loss})
    cases = [
        ("rpnc_lossless", "rpnc", lossless),
        ("ts_lossless", "ts", lossless),
        ("rpnc_loss_arq_off", "rpnc", lossy.with_overrides(protocol={"arq": False})),
        ("rpnc_loss_arq_on", "rpnc", lossy.with_overrides(protocol={"arq": True})),
    ]
    reps = dict(zip([c[0] for c in cases[:-1]], _map(_run_scheme, [(s, c) for _, s, c in cases[:-1]], jobs)))
    traced = Network(cases[-1][2], keep_trace=True)
    reps[cases[-1][0]] = traced.run()

    res = ExperimentResult("rtt")
    samples = []
    summary = []
    for label, rep in reps.items():
        r = np.asarray(rep.rtt_s, dtype=float)
        samples += [{"case": label, "index": i, "rtt_s": float(v)} for i, v in enumerate(r)]
        summary.append({
            "case": label, "samples": len(r),
            "min_s": float(r.min()) if len(r) else float("nan"),
            "median_s": float(np.median(r)) if len(r) else float("nan"),
            "p90_s": float(np.percentile(r, 90)) if len(r) else float("nan"),
            "max_s": float(r.max()) if len(r) else float("nan"),
        })
    res.tables["rtt_samples.csv"] = samples
    res.tables["rtt_summary.csv"] = summary
    res.tables["arq_trace_rpnc_loss_arq_on.csv"] = [asdict(e) for e in traced.arq_trace]

    floor = 6 * cfg.protocol.slot_duration
    r = reps["rpnc_lossless"].rtt_s
    res.checks.append(Check("lossless RPNC RTT >= 6 T_s", bool(r) and min(r) >= floor,
                            f"min {min(r) if r else float('nan'):.4f} s, floor {floor:.4f} s"))
    med = {k: float(np.median(v.rtt_s)) if v.rtt_s else float("nan") for k, v in reps.items()}
    res.checks.append(Check("median TS RTT > median RPNC RTT", med["ts_lossless"] > med["rpnc_lossless"],
                            f"TS {med['ts_lossless']:.4f} s, RPNC {med['rpnc_lossless']:.4f} s"))
    res.checks.append(Check(f"median RTT ARQ on >= off at {loss:.0%} loss",
                            med["rpnc_loss_arq_on"] >= med["rpnc_loss_arq_off"],
                            f"on {med['rpnc_loss_arq_on']:.4f} s, off {med['rpnc_loss_arq_off']:.4f} s"))
    return res


# stability


def stability(cfg: SimConfig, weight: float = 0.01, packets: int = 10_000) -> ExperimentResult:
    """Smoothed gap between consecutive decoded downlink packets at each end node."""
    slots = max(cfg.run.slots, packets + 50)
    rep = run(_lossless(cfg).with_overrides(run={"slots": slots}, traffic={"mode": "saturated"}))
    t_s = cfg.protocol.slot_duration
    res = ExperimentResult("stability")
    rows = []
    for node in ("A", "B"):
        gaps = rep.decode_gaps(node)[:packets]
        smooth = ewma(gaps, weight)
        rows += [{"node": node, "packet": i + 1, "gap_s": float(g), "smoothed_gap_s": float(s)}
                 for i, (g, s) in enumerate(zip(gaps, smooth))]
        final = float(smooth[-1]) if len(smooth) else float("nan")
        res.checks.append(Check(f"node {node}: smoothed gap -> T_s +- 1%", abs(final / t_s - 1) <= 0.01,
                                f"{final * 1e3:.4f} ms after {len(gaps)} packets"))
        half = smooth[len(smooth) // 2:]
        monotone = len(half) > 1 and bool(np.all(np.diff(half) > 0))
        drift = float(half[-1] - half[0]) if len(half) else float("nan")
        res.checks.append(Check(f"node {node}: no monotone growth", not monotone and abs(drift) <= 0.01 * t_s,
                                f"second-half change {drift * 1e6:.3f} us"))
    res.tables["stability.csv"] = rows
    return res


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "sync-accuracy": sync_accuracy,
    "framesync-bench": framesync_bench,
    "throughput": throughput,
    "arq-compare": arq_compare,
    "rtt": rtt,
    "stability": stability,
}
