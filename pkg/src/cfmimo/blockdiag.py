"""Helpers for block-diagonal Hermitian matrices stored as (M, b, b) stacks.

All CPU-level covariance matrices in this simulator are block diagonal with
one N_RF x N_RF block per AP, so they are stored as stacked blocks and never
materialized as full M*N_RF square matrices unless explicitly requested.
"""

from __future__ import annotations

import numpy as np


def identity_blocks(num_blocks: int, block_size: int) -> np.ndarray:
    """Stacked identity blocks of shape (num_blocks, block_size, block_size)."""
    out = np.zeros((num_blocks, block_size, block_size), dtype=complex)
    idx = np.arange(block_size)
    out[:, idx, idx] = 1.0
    return out


def zero_blocks(num_blocks: int, block_size: int) -> np.ndarray:
    return np.zeros((num_blocks, block_size, block_size), dtype=complex)


def to_dense(blocks: np.ndarray) -> np.ndarray:
    """Expand (M, b, b) stacked blocks into the full (M*b, M*b) matrix."""
    m, b, b2 = blocks.shape
    if b != b2:
        raise ValueError("blocks must be square")
    dense = np.zeros((m * b, m * b), dtype=blocks.dtype)
    for i in range(m):
        dense[i * b:(i + 1) * b, i * b:(i + 1) * b] = blocks[i]
    return dense


def hermitize(a: np.ndarray) -> np.ndarray:
    """Symmetrize (..., n, n) against roundoff; input must be nearly Hermitian."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def trace_product(a: np.ndarray, b: np.ndarray) -> complex:
    """sum_m tr(A_m B_m) for two (M, b, b) stacks."""
    return np.einsum("mij,mji->", a, b)


def block_traces(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-block tr(A_m B_m), shape (M,)."""
    return np.einsum("mij,mji->m", a, b)


def apply_to_stacked(blocks: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multiply stacked blocks (M, b, b) onto vectors x of shape (..., M*b)."""
    m, b, _ = blocks.shape
    xs = x.reshape(x.shape[:-1] + (m, b))
    return np.einsum("mij,...mj->...mi", blocks, xs).reshape(x.shape)


def hermitian_inverse(a: np.ndarray, cond_threshold: float = 1e10,
                      rel_cutoff: float = 1e-12) -> np.ndarray:
    """Invert Hermitian PSD matrices, falling back to a truncated pseudo-inverse.

    Works on (..., n, n) stacks.  A matrix whose eigenvalue condition number
    exceeds ``cond_threshold`` (or that is outright singular) is inverted via
    eigenvalue truncation at ``rel_cutoff`` times its largest eigenvalue,
    which is the Moore-Penrose pseudo-inverse for PSD inputs.
    """
    w, v = np.linalg.eigh(hermitize(a))
    wmax = w[..., -1:]
    wmin = w[..., :1]
    ill = (wmin <= 0) | (wmin * cond_threshold < wmax)
    # well-conditioned matrices keep every eigenvalue; ill ones get truncated
    cutoff = np.where(ill, rel_cutoff * np.maximum(wmax, 0.0), -np.inf)
    inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return np.einsum("...ij,...j,...kj->...ik", v, inv_w, np.conj(v))
