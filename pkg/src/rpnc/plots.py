"""Static figures rendered from an experiment's CSV output (matplotlib is optional)."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(rows: list[dict], key: str) -> list[float]:
    return [float(r[key]) for r in rows]


def render(name: str, out: Path) -> list[Path]:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise SystemExit("--plot needs matplotlib: pip install 'artifact[plot]'") from exc

    written = []

    def save(fig, fname: str) -> None:
        path = out / fname
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    if name == "sync-accuracy":
        for sweep, label in (("window", "W"), ("tx_gap", "tx_gap")):
            fig, ax = plt.subplots(figsize=(5, 3.5))
            for f in sorted(out.glob(f"sync_cdf_{sweep}_*.csv"), key=lambda p: int(p.stem.rsplit("_", 1)[1])):
                rows = _read(f)
                ax.step(_num(rows, "abs_delta_samples"), _num(rows, "cdf"), where="post",
                        label=f"{label}={f.stem.rsplit('_', 1)[1]}")
            ax.set_xlabel("|arrival difference| (samples)")
            ax.set_ylabel("CDF")
            ax.set_ylim(0, 1.02)
            ax.legend()
            save(fig, f"sync_cdf_{sweep}.png")
    elif name == "throughput":
        rows = [r for r in _read(out / "throughput.csv") if r["snr_db"]]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for arq in ("False", "True"):
            sel = [r for r in rows if r["arq"] == arq]
            tag = "ARQ on" if arq == "True" else "ARQ off"
            ax.plot(_num(sel, "snr_db"), [float(r["rpnc_goodput_AB_Bps"]) * 8e-3 for r in sel], "o-", label=f"RPNC {tag}")
            ax.plot(_num(sel, "snr_db"), [float(r["ts_goodput_AB_Bps"]) * 8e-3 for r in sel], "s--", label=f"TS {tag}")
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("goodput A to B (kbit/s)")
        ax.legend()
        save(fig, "throughput.png")
    elif name == "rtt":
        groups = defaultdict(list)
        for r in _read(out / "rtt_samples.csv"):
            groups[r["case"]].append(float(r["rtt_s"]))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for case, vals in groups.items():
            vals.sort()
            ax.step([v * 1e3 for v in vals], [(i + 1) / len(vals) for i in range(len(vals))], where="post", label=case)
        ax.set_xlabel("RTT (ms)")
        ax.set_ylabel("CDF")
        ax.legend()
        save(fig, "rtt_cdf.png")
    elif name == "stability":
        rows = _read(out / "stability.csv")
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for node in ("A", "B"):
            sel = [r for r in rows if r["node"] == node]
            ax.plot(_num(sel, "packet"), [float(r["smoothed_gap_s"]) * 1e3 for r in sel], label=f"node {node}")
        ax.set_xlabel("packet index")
        ax.set_ylabel("smoothed decode gap (ms)")
        ax.legend()
        save(fig, "stability.png")
    elif name == "framesync-bench":
        rows = _read(out / "framesync_summary.csv")
        fig, ax = plt.subplots(figsize=(5, 3.5))
        algs = ("narrow", "standard", "exhaustive")
        width = 0.35
        for i, r in enumerate(rows):
            ax.bar([j + i * width for j in range(3)], [float(r[f"{a}_per_slot"]) for a in algs], width, label=r["view"])
        ax.set_xticks([j + width / 2 for j in range(3)], algs)
        ax.set_yscale("log")
        ax.set_ylabel("complex multiplies per slot")
        ax.legend()
        save(fig, "framesync_cost.png")
    elif name == "arq-compare":
        rows = _read(out / "arq_compare.csv")
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar([r["case"] for r in rows], [float(r["fraction_AB"]) for r in rows])
        ax.set_ylabel("delivered fraction A to B")
        ax.tick_params(axis="x", labelrotation=20)
        save(fig, "arq_compare.png")
    return written
