"""Uplink SINR: exact MMSE-combined values, two random-matrix approximations,
and max-min power optimization.

The exact per-realization SINR of user k is P_k hhat_k^H Omega_k^-1 hhat_k
with Omega_k the interference-plus-residual covariance excluding user k; it
equals the generalized Rayleigh quotient at the MMSE combiner.  Both
approximations depend only on the estimate covariances (large-scale
statistics), never on realizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockdiag import hermitian_inverse, to_dense
from .estimation import EffectiveChannelEstimate, EffectiveChannelStatistics
from .report import se_prefactor, spectral_efficiency
from .rmt import resolvent, solve_fixed_point
from .scenario import ScenarioConfig


@dataclass(frozen=True)
class PowerVector:
    """Per-user transmit powers in mW, elementwise in (0, p_max]."""

    p: np.ndarray
    p_max: float

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if np.any(self.p <= 0) or np.any(self.p > self.p_max * (1 + 1e-12)):
            raise ValueError("powers must satisfy 0 < p <= p_max")


@dataclass(frozen=True)
class MaxMinResult:
    powers: PowerVector
    sinr: np.ndarray
    iterations: int
    converged: bool


def full_power(config: ScenarioConfig) -> PowerVector:
    return PowerVector(np.full(config.num_users, config.ul_power_max_mw),
                       config.ul_power_max_mw)


def _stacked(estimates, stats: EffectiveChannelStatistics) -> np.ndarray:
    """Accept estimate objects or arrays, returning (..., K, M*N_RF)."""
    if isinstance(estimates, EffectiveChannelEstimate):
        return estimates.stacked
    arr = np.asarray(estimates)
    if arr.shape[-1] == stats.total_dim:
        return arr
    if arr.shape[-2:] == (stats.num_aps, stats.block_size):
        return arr.reshape(arr.shape[:-2] + (stats.total_dim,))
    raise ValueError(f"estimate array shape {arr.shape} does not match the statistics")


def _powers(powers) -> np.ndarray:
    return powers.p if isinstance(powers, PowerVector) else np.asarray(powers, dtype=float)


def mmse_combiner(estimates, stats: EffectiveChannelStatistics, powers) -> np.ndarray:
    """SINR-maximizing combiner v_k = Omega^-1 hhat_k, shape (..., K, M*N_RF).

    Omega sums every user's weighted outer product plus the residual matrix
    built from the same powers; near-singular Omega falls back to the
    truncated pseudo-inverse.
    """
    hs = _stacked(estimates, stats)
    p = _powers(powers)
    d = to_dense(stats.residual_covariance(p))
    omega = np.einsum("k,...ka,...kb->...ab", p, hs, np.conj(hs)) + d
    try:
        return np.linalg.solve(omega, np.swapaxes(hs, -1, -2)).swapaxes(-1, -2)
    except np.linalg.LinAlgError:
        return np.einsum("...ab,...kb->...ka", hermitian_inverse(omega), hs)


def uplink_sinr_exact(estimates, stats: EffectiveChannelStatistics, powers) -> np.ndarray:
    """Per-user maximum SINR for one (or a batch of) realizations.

    Returns shape (..., K) matching the leading batch dimensions of the
    estimates.  This is the direct evaluation of the closed form with the
    per-user exclusion matrix; see ``uplink_sinr_for_combiner`` for the
    generic Rayleigh-quotient path it must agree with.
    """
    hs = _stacked(estimates, stats)
    p = _powers(powers)
    d = to_dense(stats.residual_covariance(p))
    omega_all = np.einsum("k,...ka,...kb->...ab", p, hs, np.conj(hs)) + d
    sinr = np.empty(hs.shape[:-1])
    for k in range(hs.shape[-2]):
        hk = hs[..., k, :]
        omega_k = omega_all - p[k] * np.einsum("...a,...b->...ab", hk, np.conj(hk))
        try:
            x = np.linalg.solve(omega_k, hk[..., None])[..., 0]
        except np.linalg.LinAlgError:
            x = np.einsum("...ab,...b->...a", hermitian_inverse(omega_k), hk)
        sinr[..., k] = p[k] * np.einsum("...a,...a->...", np.conj(hk), x).real
    return sinr


def uplink_sinr_for_combiner(estimates, stats: EffectiveChannelStatistics,
                             powers, combiners) -> np.ndarray:
    """Generalized Rayleigh quotient SINR of arbitrary combining vectors."""
    hs = _stacked(estimates, stats)
    vs = _stacked(combiners, stats)
    p = _powers(powers)
    d = to_dense(stats.residual_covariance(p))
    omega_all = np.einsum("k,...ka,...kb->...ab", p, hs, np.conj(hs)) + d
    vh = np.einsum("...ka,...ka->...k", np.conj(vs), hs)
    signal = p * np.abs(vh) ** 2
    total = np.einsum("...ka,...ab,...kb->...k", np.conj(vs), omega_all, vs).real
    return signal / (total - signal)


def uplink_sinr_approx1(stats: EffectiveChannelStatistics, powers) -> np.ndarray:
    """First random-matrix approximation (trace expansion around D^-1).

    A truncated expansion: values may come out negative, and are reported
    as-is; the SE map clamps at zero.  Accurate when M*N_RF exceeds K.
    """
    p = _powers(powers)
    d_inv = hermitian_inverse(stats.residual_covariance(p))
    cd = stats.c @ d_inv                                    # (K, M, b, b)
    a = np.einsum("kmii->k", cd).real                       # tr(C_k D^-1)
    cross = np.einsum("kmij,lmji->kl", cd, cd).real         # tr(C_k D^-1 C_l D^-1)
    coupling = p * cross / (1.0 + p * a)                    # column l: weight of user l
    interference = coupling.sum(axis=1) - np.diag(coupling)
    return p * (a - interference)


def uplink_sinr_approx2(stats: EffectiveChannelStatistics, powers, *,
                        exclude_self: bool = True, tol: float = 1e-8,
                        max_iter: int = 1000) -> np.ndarray:
    """Second random-matrix approximation via the deterministic fixed point.

    The exact SINR excludes the user's own outer product from the inverted
    matrix, so by default each user's trace is evaluated on the resolvent
    with its own deformation term removed (the converged e vector is shared).
    ``exclude_self=False`` evaluates every user on the common resolvent
    instead; that collapsed form is cheaper but biased low whenever a user's
    SINR is large and its covariance occupies few effective dimensions.
    """
    p = _powers(powers)
    d = stats.residual_covariance(p)
    sol = solve_fixed_point(p, stats.c, d, 0.0, tol=tol, max_iter=max_iter)
    n = stats.total_dim
    if not exclude_self:
        return (p / n) * np.einsum("kmij,mji->k", stats.c, sol.t).real
    sinr = np.empty(len(p))
    for k in range(len(p)):
        weights = p.copy()
        weights[k] = 0.0
        t_k = resolvent(weights, stats.c, d, 0.0, sol.e, n)
        sinr[k] = (p[k] / n) * np.einsum("mij,mji->", stats.c[k], t_k).real
    return sinr


def uplink_rate(sinr, config: ScenarioConfig) -> np.ndarray:
    """Uplink SE in bits/s/Hz: (tau_c - tau_p)/(2 tau_c) log2(1 + SINR)."""
    return spectral_efficiency(sinr, config)


def maxmin_power(sinr_fn, p0: PowerVector, *, tol: float = 1e-6,
                 max_iter: int = 500) -> MaxMinResult:
    """Normalize-and-rescale iteration maximizing the minimum user SINR.

    ``sinr_fn`` maps a power vector in mW to per-user SINRs and must be one
    of the competitive utilities (exact averaged over a frozen batch, or
    either approximation).  Each step divides powers by their SINR and
    rescales so the largest equals p_max; at the fixed point all SINRs are
    equal.  Stops when max_k |delta p_k| / p_k < tol.
    """
    p_max = p0.p_max
    u = p0.p / p_max
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        s = np.asarray(sinr_fn(u * p_max), dtype=float)
        if np.any(s <= 0):
            raise ValueError("encountered SINR <= 0 at positive power; "
                             "max-min iteration requires strictly positive utilities")
        u_new = u / s
        u_new = u_new / u_new.max()
        step = float(np.max(np.abs(u_new - u) / u))
        u = u_new
        if step < tol:
            converged = True
            break
    powers = PowerVector(u * p_max, p_max)
    return MaxMinResult(powers=powers, sinr=np.asarray(sinr_fn(powers.p), dtype=float),
                        iterations=iterations, converged=converged)


def batched_exact_sinr_fn(estimates, stats: EffectiveChannelStatistics):
    """Deterministic power->SINR map: the exact SINR averaged over a frozen
    batch of realizations (common random numbers across iterations)."""
    hs = _stacked(estimates, stats)
    if hs.ndim == 2:
        hs = hs[None]

    def sinr_fn(powers):
        return uplink_sinr_exact(hs, stats, powers).mean(axis=0)

    return sinr_fn


def prefactor(config: ScenarioConfig) -> float:
    """Alias for the SE prefactor (tau_c - tau_p) / (2 tau_c)."""
    return se_prefactor(config)
