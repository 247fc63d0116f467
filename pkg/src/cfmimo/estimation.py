"""Pilot transmission and LMMSE estimation of the effective channels.

The CPU estimates the N_RF-dimensional effective channels W_m^H h_mk from
linearly combined pilot observations.  Everything here works per AP: the
estimates of distinct APs are uncorrelated, so all covariance algebra stays
on tau_p*N_RF-sized blocks and the CPU-level covariances come out block
diagonal with one N_RF block per AP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockdiag import hermitian_inverse, hermitize
from .channel import draw_pilot_noise
from .scenario import PilotKind, ScenarioConfig, _as_entropy

_PILOT_DOMAIN = 0x50494C


@dataclass(frozen=True)
class PilotBook:
    """Pilot matrix with column k the length-tau_p sequence of user k.

    Every column has squared norm exactly tau_p.  Orthogonal books require
    tau_p >= K and satisfy Psi^H Psi = tau_p I.
    """

    psi: np.ndarray  # (tau_p, K) complex
    kind: PilotKind

    @property
    def pilot_len(self) -> int:
        return self.psi.shape[0]

    @property
    def num_users(self) -> int:
        return self.psi.shape[1]


@dataclass(frozen=True)
class EffectiveChannelEstimate:
    """LMMSE estimates for one coherence block; hhat[k, m] is the N_RF block
    of user k at AP m."""

    hhat: np.ndarray  # (K, M, N_RF) complex
    block_index: int = 0

    @property
    def stacked(self) -> np.ndarray:
        """Per-user stacked vectors of length M*N_RF, shape (K, M*N_RF)."""
        k, m, b = self.hhat.shape
        return self.hhat.reshape(k, m * b)


@dataclass(frozen=True)
class EffectiveChannelStatistics:
    """Second-order statistics of the stacked effective-channel estimates.

    All matrices are block diagonal with M blocks of size N_RF and stored as
    block stacks.  ``c[k]`` is the covariance of user k's estimate, ``c_cross``
    holds every pair (k, k'), ``r_e[k]`` the effective-channel correlation,
    ``cz`` the combined-noise covariance diag{W_m^H W_m} and ``d`` the uplink
    residual interference-plus-noise matrix at the construction powers.
    """

    c: np.ndarray            # (K, M, b, b)
    c_cross: np.ndarray      # (K, K, M, b, b)
    r_e: np.ndarray          # (K, M, b, b)
    cz: np.ndarray           # (M, b, b)
    d: np.ndarray            # (M, b, b)
    ul_powers_mw: np.ndarray  # (K,)
    pilot_power_mw: float

    @property
    def num_users(self) -> int:
        return self.c.shape[0]

    @property
    def num_aps(self) -> int:
        return self.c.shape[1]

    @property
    def block_size(self) -> int:
        return self.c.shape[2]

    @property
    def total_dim(self) -> int:
        return self.num_aps * self.block_size

    def residual_covariance(self, ul_powers_mw) -> np.ndarray:
        """Residual interference-plus-noise blocks for an arbitrary power vector."""
        p = np.asarray(ul_powers_mw, dtype=float)
        return hermitize(np.einsum("k,kmij->mij", p, self.r_e - self.c) + self.cz)


def generate_pilots(config: ScenarioConfig, seed) -> PilotBook:
    """Create the pilot book configured in ``config.pilot_kind``.

    Random pilots have i.i.d. unit-circle entries so the norm constraint holds
    exactly; orthogonal pilots are the first K columns of the tau_p-point DFT
    matrix (also constant envelope) and require tau_p >= K.
    """
    tau_p, k = config.pilot_len, config.num_users
    if config.pilot_kind is PilotKind.ORTHOGONAL:
        if tau_p < k:
            raise ValueError("orthogonal pilots require pilot_len >= num_users")
        t = np.arange(tau_p)
        psi = np.exp(-2j * np.pi * np.outer(t, np.arange(k)) / tau_p)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(_as_entropy(seed, _PILOT_DOMAIN)))
        psi = np.exp(2j * np.pi * rng.uniform(size=(tau_p, k)))
    return PilotBook(psi=psi, kind=config.pilot_kind)


def effective_channels(w: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Effective channels W_m^H h_mk; h is (..., M, K, N) -> (..., K, M, N_RF)."""
    return np.einsum("mni,...mkn->...kmi", np.conj(w), h)


def effective_inputs(correlations, precoder) -> tuple[np.ndarray, np.ndarray]:
    """Effective correlations R_emk = W^H R W and noise covariances W^H W.

    Returns (r_e, cz) with shapes (K, M, b, b) and (M, b, b).
    """
    w = precoder.w if hasattr(precoder, "w") else np.asarray(precoder)
    r = correlations.matrices if hasattr(correlations, "matrices") else np.asarray(correlations)
    r_e = hermitize(np.einsum("mni,mknl,mlj->kmij", np.conj(w), r, w))
    cz = hermitize(np.einsum("mni,mnj->mij", np.conj(w), w))
    return r_e, cz


def receive_pilots(precoder, channels, pilots: PilotBook, pilot_power_mw: float,
                   seed=None, noise: np.ndarray | None = None,
                   block_index: int = 0) -> np.ndarray:
    """Analog-combined pilot observations for one block, shape (M, tau_p*N_RF).

    The stacked vector per AP lists the N_RF combined samples of channel use
    0, then channel use 1, and so on.  ``noise`` may carry a precomputed
    (M, tau_p, N) antenna-noise array (e.g. zeros for noiseless tests);
    otherwise it is drawn from ``seed`` for the given block index.
    """
    h = channels.h if hasattr(channels, "h") else np.asarray(channels)
    w = precoder.w if hasattr(precoder, "w") else np.asarray(precoder)
    if noise is None:
        if seed is None:
            raise ValueError("either seed or noise must be provided")
        noise = draw_pilot_noise(w.shape[0], pilots.pilot_len, w.shape[1], seed,
                                 num_blocks=1, first_block=block_index)[0]
    return _combine_pilots(w, h, pilots.psi, pilot_power_mw, noise)


def receive_pilot_blocks(precoder, channel_blocks: np.ndarray, pilots: PilotBook,
                         pilot_power_mw: float, seed, first_block: int = 0) -> np.ndarray:
    """Batched pilot observations for a stack of blocks, (B, M, tau_p*N_RF)."""
    w = precoder.w if hasattr(precoder, "w") else np.asarray(precoder)
    noise = draw_pilot_noise(w.shape[0], pilots.pilot_len, w.shape[1], seed,
                             num_blocks=channel_blocks.shape[0], first_block=first_block)
    return _combine_pilots(w, channel_blocks, pilots.psi, pilot_power_mw, noise)


def _combine_pilots(w, h, psi, pilot_power_mw, noise):
    he = np.einsum("mni,...mkn->...mki", np.conj(w), h)
    sig = np.einsum("tk,...mki->...mti", psi, he)
    zn = np.einsum("mni,...mtn->...mti", np.conj(w), noise)
    y = np.sqrt(pilot_power_mw) * sig + zn
    return y.reshape(y.shape[:-2] + (y.shape[-2] * y.shape[-1],))


def _observation_gram_inverse(r_e, cz, psi, pilot_power_mw):
    """Inverse observation covariances, (M, tau_p*b, tau_p*b).

    The per-AP observation covariance is P_p sum_k (psi_k psi_k^H kron R_emk)
    plus I_{tau_p} kron W^H W; ill-conditioned cases fall back to the
    truncated-eigenvalue pseudo-inverse.
    """
    tau_p = psi.shape[0]
    m_count, b = cz.shape[0], cz.shape[1]
    pp = np.einsum("tk,sk->kts", psi, np.conj(psi))
    gram = pilot_power_mw * np.einsum("kts,kmij->mtisj", pp, r_e)
    gram = gram + np.einsum("ts,mij->mtisj", np.eye(tau_p), cz)
    gram = gram.reshape(m_count, tau_p * b, tau_p * b)
    return hermitian_inverse(gram)


def lmmse_filters(r_e: np.ndarray, cz: np.ndarray, pilots: PilotBook,
                  pilot_power_mw: float) -> np.ndarray:
    """Per-(AP, user) LMMSE filter matrices, shape (M, K, b, tau_p*b).

    Applying filter (m, k) to the stacked observation of AP m yields user k's
    estimated effective channel block at that AP.
    """
    m_count, b = cz.shape[0], cz.shape[1]
    tau_p = pilots.pilot_len
    ainv = _observation_gram_inverse(r_e, cz, pilots.psi, pilot_power_mw)
    proj = np.einsum("tk,mtiq->mkiq", np.conj(pilots.psi),
                     ainv.reshape(m_count, tau_p, b, tau_p * b))
    return np.sqrt(pilot_power_mw) * np.einsum("kmij,mkjq->mkiq", r_e, proj)


def apply_lmmse(filters: np.ndarray, y_e: np.ndarray) -> np.ndarray:
    """Apply precomputed filters to observations (..., M, tau_p*b) -> (..., K, M, b)."""
    return np.einsum("mkiq,...mq->...kmi", filters, y_e)


def lmmse_estimate(y_e: np.ndarray, r_e: np.ndarray, cz: np.ndarray,
                   pilots: PilotBook, pilot_power_mw: float,
                   block_index: int = 0) -> EffectiveChannelEstimate:
    """LMMSE-estimate one block of effective channels from observations y_e."""
    filters = lmmse_filters(r_e, cz, pilots, pilot_power_mw)
    hhat = apply_lmmse(filters, np.asarray(y_e))
    return EffectiveChannelEstimate(hhat=hhat, block_index=block_index)


def estimate_covariances(r_e: np.ndarray, cz: np.ndarray, pilots: PilotBook,
                         pilot_power_mw: float, ul_powers_mw) -> EffectiveChannelStatistics:
    """Analytic covariances of the estimates plus the residual matrix.

    c_cross[k, k'] holds the cross-covariance blocks of users k and k'
    (c is its diagonal k = k'); the residual matrix ``d`` combines the
    estimation-error covariances at the given uplink powers with the
    analog-combined noise covariance.
    """
    ul_powers_mw = np.asarray(ul_powers_mw, dtype=float)
    k_count, m_count, b = r_e.shape[0], r_e.shape[1], r_e.shape[2]
    tau_p = pilots.pilot_len
    if ul_powers_mw.shape != (k_count,):
        raise ValueError("ul_powers_mw must have one entry per user")
    ainv4 = _observation_gram_inverse(r_e, cz, pilots.psi, pilot_power_mw)
    ainv4 = ainv4.reshape(m_count, tau_p, b, tau_p, b)
    # q[m, k, l] = (psi_k^H kron I) A_m^+ (psi_l kron I), a (b, b) block
    q = np.einsum("tk,mtisj,sl->mklij", np.conj(pilots.psi), ainv4, pilots.psi)
    c_cross = pilot_power_mw * np.einsum("kmij,mkljs,lmso->klmio", r_e, q, r_e,
                                         optimize=True)
    c = hermitize(np.einsum("kkmio->kmio", c_cross))
    idx = np.arange(k_count)
    c_cross[idx, idx] = c
    d = hermitize(np.einsum("k,kmij->mij", ul_powers_mw, r_e - c) + cz)
    return EffectiveChannelStatistics(c=c, c_cross=c_cross, r_e=r_e, cz=cz, d=d,
                                      ul_powers_mw=ul_powers_mw,
                                      pilot_power_mw=float(pilot_power_mw))
