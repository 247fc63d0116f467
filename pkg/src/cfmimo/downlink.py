"""Downlink: RZF precoding with per-AP max-norm scaling, exact Monte Carlo
SINR, and the deterministic-equivalent approximation.

The CPU precodes with (sum_k hhat_k hhat_k^H + rho I)^-1 hhat_k and scales
each user's vector so the AP with the largest mean-square slice radiates at
unit gain; user powers then multiply the SINR terms directly.  The
approximation reproduces the Monte Carlo expectations from the estimate
covariances alone, via the fixed point at shift rho and two derivative
equivalents (Theta = I for the normalization, Theta = C_k' for each
interference term).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockdiag import zero_blocks, identity_blocks
from .channel import correlation_factors, draw_channel_blocks
from .estimation import (EffectiveChannelEstimate, EffectiveChannelStatistics,
                         PilotBook, apply_lmmse, effective_channels,
                         effective_inputs, lmmse_filters, receive_pilot_blocks)
from .report import spectral_efficiency
from .rmt import FixedPointSolution, resolvent, solve_derivative, solve_fixed_point
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class DlPrecoderSet:
    """RZF directions and their per-AP max-norm normalization.

    ``v = v_hat / nu[k]`` per user, so that max_m E|v_mk|^2 = 1 within the
    estimator tolerance of the empirical expectations.
    """

    v_hat: np.ndarray  # (B, K, M*N_RF) raw RZF directions per realization
    nu: np.ndarray     # (K,) normalization scalars
    v: np.ndarray      # (B, K, M*N_RF) normalized precoders
    rho: float


@dataclass(frozen=True)
class DlApproxTerms:
    """Deterministic-equivalent building blocks of the downlink SINR."""

    alpha: np.ndarray          # (K,) effective signal gains
    beta: np.ndarray           # (K, K) interference gains, [k, k'] from user k'
    nu_sq: np.ndarray          # (K,) squared normalization scalars
    fixed_point: FixedPointSolution
    s_prime: np.ndarray        # (K, M, b, b) per-user derivative equivalents at Theta = I


def default_rzf_rho(config: ScenarioConfig) -> float:
    """Regularizer commensurate with the Gram matrix load: K / (M N_RF P_d)."""
    return config.num_users / (config.total_rf_chains * config.dl_power_max_mw)


def full_dl_power(config: ScenarioConfig) -> np.ndarray:
    return np.full(config.num_users, config.dl_power_max_mw)


def rzf_precoder(estimates, rho: float) -> np.ndarray:
    """Raw RZF directions (Gram + rho I)^-1 hhat_k, shape (..., K, M*N_RF)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    hs = estimates.stacked if isinstance(estimates, EffectiveChannelEstimate) \
        else np.asarray(estimates)
    gram = np.einsum("...ka,...kb->...ab", hs, np.conj(hs))
    gram = gram + rho * np.eye(hs.shape[-1])
    return np.linalg.solve(gram, np.swapaxes(hs, -1, -2)).swapaxes(-1, -2)


def normalize_precoder(v_hat: np.ndarray, num_aps: int, rho: float = 0.0) -> DlPrecoderSet:
    """Scale each user's direction by its worst-AP rms norm over realizations.

    ``v_hat`` has shape (B, K, M*N_RF) with B >= 1 realizations; expectations
    are empirical means over that batch.
    """
    v_hat = np.asarray(v_hat)
    if v_hat.ndim == 2:
        v_hat = v_hat[None]
    b_count, k_count, n = v_hat.shape
    if n % num_aps:
        raise ValueError("precoder length is not divisible by the number of APs")
    slices = v_hat.reshape(b_count, k_count, num_aps, n // num_aps)
    mean_sq = np.mean(np.sum(np.abs(slices) ** 2, axis=-1), axis=0)  # (K, M)
    nu = np.sqrt(mean_sq.max(axis=1))
    if np.any(nu == 0):
        raise ValueError("cannot normalize an all-zero precoder")
    return DlPrecoderSet(v_hat=v_hat, nu=nu, v=v_hat / nu[:, None], rho=rho)


def downlink_sinr_exact_mc(correlations, precoder, pilots: PilotBook,
                           config: ScenarioConfig, dl_powers_mw, trials: int,
                           seed, rho: float | None = None,
                           perfect_csi: bool = False) -> np.ndarray:
    """Plug-in downlink SINR with all expectations over joint realizations.

    Each trial redraws channels and pilot noise, re-estimates, and rebuilds
    the RZF precoders; the signal mean, its variance, and every cross term
    are then empirical moments over the batch.  ``perfect_csi`` substitutes
    the true effective channels for the estimates (oracle mode).
    """
    if trials < 100:
        raise ValueError("downlink Monte Carlo needs at least 100 trials")
    p = np.asarray(dl_powers_mw, dtype=float)
    if rho is None:
        rho = default_rzf_rho(config)
    r_e, cz = effective_inputs(correlations, precoder)
    h = draw_channel_blocks(correlation_factors(correlations), seed, trials)
    he = effective_channels(precoder.w, h)
    he = he.reshape(trials, he.shape[1], -1)                         # (B, K, n)
    if perfect_csi:
        hhat = he
    else:
        y = receive_pilot_blocks(precoder, h, pilots, config.pilot_power_mw, seed)
        filters = lmmse_filters(r_e, cz, pilots, config.pilot_power_mw)
        hhat = apply_lmmse(filters, y).reshape(trials, he.shape[1], -1)
    pset = normalize_precoder(rzf_precoder(hhat, rho), config.num_aps, rho)
    inner = np.einsum("bka,bla->bkl", np.conj(he), pset.v)           # h_k^H v_l
    mean = inner.mean(axis=0)
    second = np.mean(np.abs(inner) ** 2, axis=0)
    signal = np.abs(np.einsum("kk->k", mean)) ** 2
    variance = np.einsum("kk->k", second) - signal
    interference = np.einsum("l,kl->k", p, second) - p * np.einsum("kk->k", second)
    return p * signal / (interference + p * variance + 1.0)


def downlink_approx_terms(stats: EffectiveChannelStatistics, rho: float, *,
                          exclude_self: bool = True, tol: float = 1e-8,
                          max_iter: int = 1000) -> DlApproxTerms:
    """Assemble the deterministic-equivalent signal/interference gains.

    Uses only the block-diagonal estimate covariances: the fixed point at
    shift rho gives the base resolvent, the derivative equivalent at
    Theta = I gives the per-AP normalization traces, and Theta = C_k' each
    interferer's quadratic term.  All terms are nonnegative by construction.

    The Gram matrix behind user k's precoder excludes user k itself (and the
    interference cross terms exclude both users of the pair), so by default
    each trace is taken on the correspondingly excluded resolvent, sharing
    one converged e vector.  ``exclude_self=False`` evaluates everything on
    the common resolvent; cheaper, but biased for users whose estimates
    dominate their own few effective dimensions.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    k_count, m_count, b = stats.c.shape[0], stats.c.shape[1], stats.c.shape[2]
    n = stats.total_dim
    ones = np.ones(k_count)
    base = zero_blocks(m_count, b)
    sol = solve_fixed_point(ones, stats.c, base, rho, tol=tol, max_iter=max_iter)
    eye = identity_blocks(m_count, b)

    def system(users):
        """Resolvent with the given users' deformation terms removed."""
        w = ones.copy()
        if not users:
            return w, sol
        w[list(users)] = 0.0
        t = resolvent(w, stats.c, base, rho, sol.e, n)
        return w, FixedPointSolution(e=sol.e, t=t, iterations=sol.iterations,
                                     residual=sol.residual)

    t_k = np.empty(k_count)
    peak = np.empty(k_count)
    s_prime = np.empty((k_count,) + sol.t.shape, dtype=complex)
    for k in range(k_count):
        w, sol_k = system((k,) if exclude_self else ())
        t_k[k] = np.einsum("mij,mji->", stats.c[k], sol_k.t).real     # tr(C_k S_(k))
        deriv = solve_derivative(sol_k, eye, w, stats.c)
        s_prime[k] = deriv.t_prime
        per_ap = np.einsum("mij,mji->m", stats.c[k], deriv.t_prime).real
        peak[k] = per_ap.max()                                        # max_m tr(C_k[m] S'[m])
    nu_sq = peak / (n + t_k) ** 2
    alpha = t_k ** 2 / peak

    beta = np.zeros((k_count, k_count))
    for l in range(k_count):
        if not exclude_self:
            common = solve_derivative(sol, stats.c[l], ones, stats.c)
        for k in range(k_count):
            if k == l:
                continue
            if exclude_self:
                w, sol_kl = system((k, l))
                deriv_l = solve_derivative(sol_kl, stats.c[l], w, stats.c)
            else:
                sol_kl, deriv_l = sol, common
            quad_true = np.einsum("mij,mji->", stats.r_e[k], deriv_l.t_prime).real
            quad_est = np.einsum("mij,mji->", stats.c[k], deriv_l.t_prime).real
            t_pair = np.einsum("mij,mji->", stats.c[k], sol_kl.t).real
            shrink = t_pair / (n + t_pair)
            beta[k, l] = (quad_true - (2.0 - shrink) * shrink * quad_est) / peak[l]
    return DlApproxTerms(alpha=alpha, beta=beta, nu_sq=nu_sq, fixed_point=sol,
                         s_prime=s_prime)


def downlink_sinr_approx(stats: EffectiveChannelStatistics, dl_powers_mw,
                         rho: float, *, exclude_self: bool = True,
                         tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Deterministic-equivalent downlink SINR from large-scale statistics only."""
    p = np.asarray(dl_powers_mw, dtype=float)
    terms = downlink_approx_terms(stats, rho, exclude_self=exclude_self,
                                  tol=tol, max_iter=max_iter)
    interference = terms.beta @ p - p * np.diag(terms.beta)
    return p * terms.alpha / (interference + 1.0)


def downlink_rate(sinr, config: ScenarioConfig) -> np.ndarray:
    """Downlink SE; the same prefactor and map as the uplink rate."""
    return spectral_efficiency(sinr, config)
