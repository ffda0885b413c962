"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import random
import time
from fractions import Fraction

import numpy as np
import pytest
from numpy.lib.stride_tricks import sliding_window_view

from oracles import crc32_bitserial
from rpnc.arq import RttEstimator, update_rtt, window_size
from rpnc.baseband import SampleStream, auto_correlate_stream
from rpnc.experiments import arq_compare, framesync_bench, rtt, stability
from rpnc.linkcodec import crc32_dot11, verify_xor_crc, xor_bytes
from rpnc.simnet import parse_config, run, run_sync, ts_baseline
from rpnc.slot_timing import (
    ArrivalRecord,
    TxDelayBound,
    check_sync_loss,
    init_boundaries,
    realign,
    record_arrival,
    sample_count_arrival,
    schedule_tx_slot,
    window_drift,
)

BASE = parse_config({})  # +-20 ppm opposing drifts, 10^4 slots


def _lossless(cfg):
    return cfg.with_overrides(channel={"per_uplink": 0.0, "per_downlink": 0.0})


def test_c01_factor_two_throughput(report_criterion):
    cfg = _lossless(BASE).with_overrides(traffic={"mode": "saturated"})
    t0 = time.perf_counter()
    rp, ts = run(cfg), ts_baseline(cfg)
    elapsed = time.perf_counter() - t0
    ratios = [rp.goodput(d) / ts.goodput(d) for d in ("AB", "BA")]
    ok = all(abs(r - 2.0) <= 0.02 for r in ratios) and elapsed < 10
    report_criterion(1, "factor-2 throughput", ok,
                     f"ratio AB {ratios[0]:.4f}, BA {ratios[1]:.4f}; {elapsed:.1f} s for both runs")
    assert ok


@pytest.fixture(scope="module")
def sync_runs():
    out, times = {}, {}
    for key, over in (("W1", {"window": 1}), ("W10", {"window": 10}), ("W100", {"window": 100}),
                      ("gap10", {"window": 10, "tx_gap": 10})):
        t0 = time.perf_counter()
        out[key] = run_sync(BASE.with_overrides(protocol=over))
        times[key] = time.perf_counter() - t0
    return out, times


def test_c02_sync_accuracy(sync_runs, report_criterion):
    reps, times = sync_runs
    p = reps["W10"].fraction_within(2.0)
    q = {k: reps[k].percentile(90) for k in ("W1", "W10", "W100")}
    elapsed = times["W1"] + times["W10"] + times["W100"]
    ok = p >= 0.90 and q["W10"] <= q["W1"] and q["W10"] <= q["W100"] and elapsed < 300
    report_criterion(2, "sync accuracy", ok,
                     f"W=10 P(|dd|<=2) {p:.4f}; p90 W=1 {q['W1']:.2f}, W=10 {q['W10']:.2f}, "
                     f"W=100 {q['W100']:.2f}; {elapsed:.0f} s")
    assert ok


def test_c03_tx_gap_robustness(sync_runs, report_criterion):
    reps, _ = sync_runs
    p = reps["gap10"].fraction_within(2.5)
    ok = p >= 0.90
    report_criterion(3, "tx_gap robustness", ok,
                     f"tx_gap=10 P(|dd|<=2.5) {p:.4f} over {len(reps['gap10'].records)} slots")
    assert ok


def test_c04_within_cp(report_criterion):
    cfg = _lossless(BASE).with_overrides(protocol={"arq": False})
    on = run(cfg)
    off = run(cfg.with_overrides(protocol={"realign": False}))
    ok = on.cp_violations == 0 and off.cp_violations >= 1 and len(on.uplink) >= 9_900
    report_criterion(4, "within-CP guarantee", ok,
                     f"realign on: {on.cp_violations} of {len(on.uplink)} slots; "
                     f"realign off: {off.cp_violations} of {len(off.uplink)}")
    assert ok


def test_c05_correlator_cost(report_criterion):
    res = framesync_bench(BASE)
    failed = [c.name for c in res.checks if not c.passed]
    summary = {r["view"]: r for r in res.tables["framesync_summary.csv"]}
    e = summary["end_node"]
    report_criterion(5, "correlator complexity", not failed,
                     f"end node per slot: narrow {e['narrow_per_slot']:.0f}, standard {e['standard_per_slot']:.0f}, "
                     f"exhaustive {e['exhaustive_per_slot']:.0f}; failed checks: {failed or 'none'}")
    assert not failed


def test_c06_incremental_autocorrelation(report_criterion):
    rng = np.random.default_rng(6)
    L = 32
    y = (rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)) / np.sqrt(2)
    ac = auto_correlate_stream(SampleStream(y), L)
    direct = sliding_window_view(y[:-L] * np.conj(y[L:]), L).sum(axis=1)
    dev = float(np.max(np.abs(ac.values - direct) / np.abs(direct)))
    ok = len(direct) == len(ac.values) and dev <= 1e-9
    report_criterion(6, "incremental autocorrelation", ok, f"max relative deviation {dev:.2e} over 10^5 samples")
    assert ok


def test_c07_xor_crc(report_criterion):
    rng = random.Random(7)
    n = 16 + 1516
    identity = flips = oracle = 0
    for _ in range(1000):
        pa, pb = rng.randbytes(n), rng.randbytes(n)
        x = xor_bytes(pa, pb)
        crc = crc32_dot11(pa) ^ crc32_dot11(pb)
        identity += verify_xor_crc(x, crc)
        bit = rng.randrange(8 * n + 32)
        if bit < 8 * n:
            bad = bytearray(x)
            bad[bit // 8] ^= 1 << (bit % 8)
            flips += not verify_xor_crc(bytes(bad), crc)
        else:
            flips += not verify_xor_crc(x, crc ^ (1 << (bit - 8 * n)))
    for _ in range(1000):
        data = rng.randbytes(rng.randrange(0, 200))
        oracle += crc32_dot11(data) == crc32_bitserial(data)
    ok = identity == flips == oracle == 1000
    report_criterion(7, "XOR-CRC identity", ok,
                     f"identity {identity}/1000, single-bit errors caught {flips}/1000, oracle agreement {oracle}/1000")
    assert ok


def test_c08_arq_reliability(report_criterion):
    res = arq_compare(BASE)
    rows = {r["case"]: r for r in res.tables["arq_compare.csv"]}
    on, off = rows["reliable_arq_on"], rows["saturated_arq_off"]
    ok = res.checks[0].passed and res.checks[1].passed
    report_criterion(8, "ARQ reliability", ok,
                     f"ARQ on delivered {on['delivered_AB']}/{on['delivered_BA']} with {on['order_errors']} order errors; "
                     f"ARQ off fraction AB {off['fraction_AB']:.4f}, BA {off['fraction_BA']:.4f} "
                     f"vs {off['expected_fraction']:.4f}")
    assert ok


def test_c09_rtt_ordering(report_criterion):
    res = rtt(BASE)
    med = {r["case"]: r["median_s"] for r in res.tables["rtt_summary.csv"]}
    mins = {r["case"]: r["min_s"] for r in res.tables["rtt_summary.csv"]}
    ok = res.passed
    report_criterion(9, "RTT ordering", ok,
                     f"lossless RPNC min {mins['rpnc_lossless'] * 1e3:.1f} ms (floor 60 ms); median RPNC "
                     f"{med['rpnc_lossless'] * 1e3:.1f} ms, TS {med['ts_lossless'] * 1e3:.1f} ms; "
                     f"10% loss ARQ on {med['rpnc_loss_arq_on'] * 1e3:.1f} ms, off {med['rpnc_loss_arq_off'] * 1e3:.1f} ms")
    assert ok


def test_c10_timing_vectors(report_criterion):
    ms, sp = Fraction(1, 1000), Fraction(1, 5_000_000)
    checks = []
    checks.append(sample_count_arrival(0, Fraction(5), 5_000_000) == 5)
    checks.append(sample_count_arrival(5_000_000, Fraction(0), 5_000_000) == 1)
    checks.append(sample_count_arrival(50_000, Fraction(2), 5_000_000) == Fraction(201, 100))
    s = init_boundaries(100 * ms, 10 * ms, sp, 10)
    checks.append(s.boundary(3) == 130 * ms)
    checks.append(window_drift(s) == 0)

    def offsets(values):
        t = s
        for slot, v in enumerate(values):
            t = record_arrival(t, ArrivalRecord(slot, t.boundary(slot) + Fraction(v) * sp))
        return t

    checks.append(window_drift(offsets(["1.2", "1.8", "1.5"])) == 1)
    checks.append(window_drift(offsets(["0.4", "0.5"])) == 0)
    s1 = realign(s, 1)
    checks.append(s1.boundary(10) - s.boundary(10) == sp and s1.boundary(9) == s.boundary(9))
    checks.append(realign(s1, 1).cumulative_adjust == 2)
    checks.append(schedule_tx_slot(7, TxDelayBound(), s) == 8)
    checks.append(schedule_tx_slot(7, TxDelayBound(2 * ms, 2 * ms, False), s) == 8)
    checks.append(schedule_tx_slot(7, TxDelayBound(7 * ms, 7 * ms, False), s) == 9)
    checks.append([check_sync_loss(a, 10) for a in (100, 101, 0)] == [False, True, False])
    e = update_rtt(RttEstimator(100 * ms, 0, seeded=True), 180 * ms)
    checks.append((e.rtt_est, e.rtt_dev, e.timeout) == (110 * ms, 20 * ms, 190 * ms))
    checks.append(update_rtt(RttEstimator(100 * ms, 0), 100 * ms).timeout == 100 * ms)
    checks.append([window_size(RttEstimator(t * ms, 0), 10 * ms) for t in (190, 100, 101)] == [19, 10, 11])
    ok = all(checks)
    report_criterion(10, "timing unit vectors", ok, f"{sum(checks)}/{len(checks)} hand-computed vectors exact")
    assert ok


def test_c11_stability(report_criterion):
    res = stability(BASE)
    rows = res.tables["stability.csv"]
    counts = {n: sum(r["node"] == n for r in rows) for n in ("A", "B")}
    final = {n: [r for r in rows if r["node"] == n][-1]["smoothed_gap_s"] for n in ("A", "B")}
    ok = res.passed and min(counts.values()) >= 10_000
    report_criterion(11, "stability", ok,
                     f"final smoothed gap A {final['A'] * 1e3:.4f} ms, B {final['B'] * 1e3:.4f} ms over "
                     f"{counts['A']}/{counts['B']} packets; " + "; ".join(c.detail for c in res.checks[1::2]))
    assert ok
