"""Preamble construction.

End-node preamble (A shown; B is silent where A transmits and vice versa)::

    | 2STS slot of A (C + 2L) | 2STS slot of B (C + 2L) | LTS field (N_s CP + 2 N_s) |

Relay preamble::

    | 2STS (C + 2L) | LTS field (N_s CP + 2 N_s) |

A and the relay repeat their short sequence with the same sign. B's second
short symbol is negated, which makes B's lag-L autocorrelation negative and
lets an autocorrelation detector tell B's field from A's before any
cross-correlation is spent. The LTS of A occupies subcarriers with
k mod 4 in {0, 1} and B those with k mod 4 in {2, 3}, so the two users'
channels can be estimated from one superimposed reception.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..roles import Role
from .params import OfdmParams, SampleStream

_ROLE_CODE = {Role.A: 1, Role.B: 2, Role.RELAY: 3}


@dataclass(frozen=True)
class FramePreamble:
    role: Role
    params: OfdmParams
    samples: np.ndarray
    sts_sequence: np.ndarray
    sts_offset: int
    sts_negated: bool
    lts_offset: int
    lts_body: np.ndarray
    lts_freq: np.ndarray
    lts_mask: np.ndarray
    layout: tuple[tuple[str, int, int], ...]

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def lts_body_offset(self) -> int:
        """Offset of the first LTS body (after the LTS cyclic prefix)."""
        return self.lts_offset + self.params.n_subcarriers


def signed_subcarriers(n: int) -> np.ndarray:
    """Signed subcarrier index of each FFT bin."""
    return np.fft.fftfreq(n, d=1.0 / n).astype(int)


def used_mask(n: int) -> np.ndarray:
    k = signed_subcarriers(n)
    return (k != 0) & (k != -n // 2)


def lts_subcarrier_mask(role: Role, n: int) -> np.ndarray:
    k = signed_subcarriers(n)
    used = used_mask(n)
    if role is Role.A:
        return used & (k % 4 < 2)
    if role is Role.B:
        return used & (k % 4 >= 2)
    return used


def _qpsk(rng: np.random.Generator, n: int) -> np.ndarray:
    bits = rng.integers(0, 2, size=(2, n))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2)


def _sts_field(seq: np.ndarray, cp_len: int, negate_second: bool) -> np.ndarray:
    second = -seq if negate_second else seq
    block = np.concatenate([seq, second])
    return np.concatenate([block[-cp_len:], block])


def _lts_body(rng: np.random.Generator, mask: np.ndarray) -> np.ndarray:
    n = len(mask)
    freq = np.zeros(n, dtype=np.complex128)
    freq[mask] = _qpsk(rng, int(mask.sum()))
    return np.fft.ifft(freq) * n / np.sqrt(mask.sum())


def build_preamble(role: Role, params: OfdmParams = OfdmParams(), seed: int = 0) -> FramePreamble:
    role = Role(role)
    rng = np.random.default_rng([seed, _ROLE_CODE[role]])
    L, C, N = params.sts_len, params.cp_len, params.n_subcarriers
    sts_field_len = C + 2 * L

    sts = _qpsk(rng, L)
    mask = lts_subcarrier_mask(role, N)
    body = _lts_body(rng, mask)
    lts_field = np.concatenate([body[-N:], body, body])

    negated = role is Role.B
    field = _sts_field(sts, C, negated)
    if role is Role.RELAY:
        sts_offset = 0
        parts = [field, lts_field]
        layout = (("sts", 0, sts_field_len), ("lts", sts_field_len, len(lts_field)))
    else:
        silent = np.zeros(sts_field_len, dtype=np.complex128)
        sts_offset = 0 if role is Role.A else sts_field_len
        parts = [field, silent] if role is Role.A else [silent, field]
        parts.append(lts_field)
        layout = (
            ("sts_a", 0, sts_field_len),
            ("sts_b", sts_field_len, sts_field_len),
            ("lts", 2 * sts_field_len, len(lts_field)),
        )
    samples = np.concatenate(parts)
    lts_offset = layout[-1][1]
    return FramePreamble(
        role=role,
        params=params,
        samples=samples,
        sts_sequence=sts,
        sts_offset=sts_offset,
        sts_negated=negated,
        lts_offset=lts_offset,
        lts_body=body,
        lts_freq=np.fft.fft(body),
        lts_mask=mask,
        layout=layout,
    )


def gen_preamble(role: Role, params: OfdmParams = OfdmParams(), seed: int = 0) -> SampleStream:
    return SampleStream(build_preamble(role, params, seed).samples.copy(), 0)


def preamble_set(params: OfdmParams = OfdmParams(), seed: int = 0) -> dict[Role, FramePreamble]:
    return {role: build_preamble(role, params, seed) for role in Role}


def ofdm_symbols(rng: np.random.Generator, count: int, params: OfdmParams = OfdmParams()) -> np.ndarray:
    """Random QPSK OFDM data symbols with cyclic prefix, unit average power."""
    N, C = params.n_subcarriers, params.cp_len
    mask = used_mask(N)
    out = []
    for _ in range(count):
        body = _lts_body(rng, mask)
        out.append(np.concatenate([body[-C:], body]))
    if not out:
        return np.zeros(0, dtype=np.complex128)
    return np.concatenate(out)
