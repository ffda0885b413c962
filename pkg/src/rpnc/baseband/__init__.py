"""Baseband signal generation, frame synchronization and channel estimation."""

from .channel import apply_taps, awgn, fractional_delay, place, rayleigh_taps
from .correlate import AutoCorrelation, CrossResult, auto_correlate_stream, correlation_profile, cross_correlate
from .csi import Csi, arrival_diff, estimate_csi, phase_slope_offset, shift_csi
from .demap import bpsk, xor_demap_bpsk
from .golden import read_golden, write_golden
from .params import CorrelatorCost, OfdmParams, SampleStream
from .preamble import (
    FramePreamble,
    build_preamble,
    gen_preamble,
    lts_subcarrier_mask,
    ofdm_symbols,
    preamble_set,
    signed_subcarriers,
    used_mask,
)
from .sync import AUTO_THRESHOLD, CROSS_THRESHOLD, Detection, sync_exhaustive_cross, sync_narrow, sync_standard

__all__ = [
    "AUTO_THRESHOLD",
    "AutoCorrelation",
    "CROSS_THRESHOLD",
    "CorrelatorCost",
    "CrossResult",
    "Csi",
    "Detection",
    "FramePreamble",
    "OfdmParams",
    "SampleStream",
    "apply_taps",
    "arrival_diff",
    "auto_correlate_stream",
    "awgn",
    "bpsk",
    "build_preamble",
    "correlation_profile",
    "cross_correlate",
    "estimate_csi",
    "fractional_delay",
    "gen_preamble",
    "lts_subcarrier_mask",
    "ofdm_symbols",
    "phase_slope_offset",
    "place",
    "preamble_set",
    "rayleigh_taps",
    "read_golden",
    "shift_csi",
    "signed_subcarriers",
    "sync_exhaustive_cross",
    "sync_narrow",
    "sync_standard",
    "used_mask",
    "write_golden",
    "xor_demap_bpsk",
]
