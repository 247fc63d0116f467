"""Correlated Rayleigh channel draws, one independent realization per block.

Each (AP, user) link has its own counter-based random sub-stream so draws are
reproducible per (seed, block, m, k) regardless of evaluation order, and a
whole batch of blocks can be drawn in one vectorized call with bit-identical
results to repeated single-block calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import SpatialCorrelationSet, _as_entropy

_CHANNEL_DOMAIN = 0x434841
_PILOT_NOISE_DOMAIN = 0x4E4F49


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block of channels; h[m, k] is the N-vector for link (m, k)."""

    h: np.ndarray  # (M, K, N) complex
    block_index: int


def correlation_factors(correlations, neg_tol: float = 1e-10) -> np.ndarray:
    """Eigen-factor F_mk with F F^H = R_mk, for sampling h = F x.

    Eigenvalues in [-neg_tol * lambda_max, 0] are clipped to zero so
    rank-deficient correlation matrices are handled; anything more negative
    means the input is not PSD and raises.
    """
    r = correlations.matrices if isinstance(correlations, SpatialCorrelationSet) else np.asarray(correlations)
    w, v = np.linalg.eigh(r)
    wmax = np.maximum(w[..., -1], 0.0)
    if np.any(w < -neg_tol * (wmax[..., None] + np.finfo(float).tiny)):
        raise ValueError("correlation matrix has a significantly negative eigenvalue")
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)[..., None, :]


def _link_rng(seed, m: int, k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_as_entropy(seed, _CHANNEL_DOMAIN) + (m, k)))


def draw_channel_blocks(correlations, seed, num_blocks: int, first_block: int = 0) -> np.ndarray:
    """Draw channels for blocks [first_block, first_block + num_blocks).

    Returns an array of shape (num_blocks, M, K, N).  Block b of the (m, k)
    sub-stream always consumes the same raw draws, so slicing a batch equals
    drawing the blocks one at a time.
    """
    factors = correlations if isinstance(correlations, np.ndarray) else correlation_factors(correlations)
    m_count, k_count, n, _ = factors.shape
    total = first_block + num_blocks
    out = np.empty((num_blocks, m_count, k_count, n), dtype=complex)
    for m in range(m_count):
        for k in range(k_count):
            rng = _link_rng(seed, m, k)
            raw = rng.standard_normal((total, n, 2))[first_block:]
            x = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)
            out[:, m, k, :] = x @ factors[m, k].T
    return out


def draw_channels(correlations, seed, block_index: int = 0) -> ChannelRealization:
    """Draw the single coherence block ``block_index``."""
    h = draw_channel_blocks(correlations, seed, num_blocks=1, first_block=block_index)[0]
    return ChannelRealization(h=h, block_index=block_index)


def draw_pilot_noise(num_aps: int, pilot_len: int, num_antennas: int, seed,
                     num_blocks: int, first_block: int = 0) -> np.ndarray:
    """Unit-variance complex AWGN at the antennas during pilot reception.

    Shape (num_blocks, M, tau_p, N); per-AP sub-streams with the same
    block-slicing convention as the channel draws.
    """
    total = first_block + num_blocks
    out = np.empty((num_blocks, num_aps, pilot_len, num_antennas), dtype=complex)
    for m in range(num_aps):
        rng = np.random.default_rng(
            np.random.SeedSequence(_as_entropy(seed, _PILOT_NOISE_DOMAIN) + (m,)))
        raw = rng.standard_normal((total, pilot_len, num_antennas, 2))[first_block:]
        out[:, m] = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)
    return out
