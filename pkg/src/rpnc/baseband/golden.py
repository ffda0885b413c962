"""Golden sample files: little-endian interleaved float32 I/Q plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_golden(path: str | Path, samples: np.ndarray, manifest: dict) -> None:
    samples = np.asarray(samples, dtype=np.complex128)
    iq = np.empty(2 * len(samples), dtype="<f4")
    iq[0::2] = samples.real
    iq[1::2] = samples.imag
    Path(path).write_bytes(iq.tobytes())
    meta = dict(manifest)
    meta["n_samples"] = len(samples)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_golden(path: str | Path) -> tuple[np.ndarray, dict]:
    iq = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if len(iq) % 2:
        raise ValueError(f"{path}: odd number of float32 values")
    samples = iq[0::2].astype(np.float64) + 1j * iq[1::2].astype(np.float64)
    manifest = json.loads(sidecar_path(path).read_text())
    if manifest.get("n_samples", len(samples)) != len(samples):
        raise ValueError(f"{path}: manifest says {manifest['n_samples']} samples, file has {len(samples)}")
    return samples, manifest
