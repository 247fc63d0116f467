"""Deterministic-equivalent machinery: fixed-point and derivative solvers.

Shared by the uplink second approximation and the downlink approximation.
All operands are block diagonal (M blocks of size b, with n = M*b the
normalization dimension) and inverses are computed blockwise.

The fixed point solved here is

    T = ( (1/n) [ sum_k w_k C_k / (1 + e_k) + S0 + z I ] )^-1,
    e_k = (w_k / n) tr(C_k T),

iterated from e_k = 1, and the derivative quantities satisfy

    T' = T Theta T + T (1/n) sum_k w_k C_k e'_k / (1 + e_k)^2 T,
    e'  = (I - J)^-1 v,
    v_k = (w_k / n) tr(C_k T Theta T),
    J_kl = w_k w_l tr(C_k T C_l T) / (n^2 (1 + e_l)^2),

which is consistent in the sense e'_k = (w_k / n) tr(C_k T').
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blockdiag import hermitize, identity_blocks, trace_product


class FixedPointError(RuntimeError):
    """Fixed-point iteration failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class FixedPointSolution:
    e: np.ndarray          # (K,) nonnegative fixed-point scalars
    t: np.ndarray          # (M, b, b) block-diagonal Hermitian PSD
    iterations: int
    residual: float        # max_k |delta e_k| / (1 + e_k) at return


@dataclass(frozen=True)
class DerivativeEquivalent:
    t_prime: np.ndarray    # (M, b, b) block-diagonal Hermitian
    e_prime: np.ndarray    # (K,)
    j: np.ndarray          # (K, K) coupling matrix, spectral radius < 1
    v: np.ndarray          # (K,)


def resolvent(weights, covariances, base, z, e, n: int | None = None) -> np.ndarray:
    """Deterministic resolvent T = ((1/n)[sum_k w_k C_k/(1+e_k) + S0 + zI])^-1
    at a given e vector, inverted blockwise.

    Zeroing an entry of ``weights`` removes that user's deformation term,
    which is how the per-user excluded resolvents are built.
    """
    base = np.asarray(base, dtype=complex)
    m_count, b = base.shape[0], base.shape[1]
    if n is None:
        n = m_count * b
    a = base + z * identity_blocks(m_count, b)
    if len(weights):
        a = a + np.einsum("k,kmij->mij", np.asarray(weights) / (1.0 + np.asarray(e)),
                          np.asarray(covariances))
    return n * np.linalg.inv(hermitize(a))


def solve_fixed_point(weights, covariances, base, z: float = 0.0, *,
                      n: int | None = None, tol: float = 1e-8,
                      max_iter: int = 1000) -> FixedPointSolution:
    """Solve the deterministic-equivalent fixed point for (T, e).

    ``weights`` is the length-K coefficient vector (user powers, or ones),
    ``covariances`` the (K, M, b, b) block stacks, ``base`` the (M, b, b)
    deterministic part S0, and ``z`` a nonnegative shift with
    z + lambda_min(S0) > 0.  ``n`` defaults to M*b and must equal it.

    Convergence is declared when max_k |delta e_k| / (1 + e_k) < tol;
    non-convergence raises FixedPointError.  If the residual grows twice in
    a row the iteration switches to half-step averaging, which damps
    oscillation without moving the fixed point.
    """
    weights = np.asarray(weights, dtype=float)
    covariances = np.asarray(covariances, dtype=complex)
    base = np.asarray(base, dtype=complex)
    m_count, b = base.shape[0], base.shape[1]
    if n is None:
        n = m_count * b
    elif n != m_count * b:
        raise ValueError("n must equal num_blocks * block_size")
    if z < 0:
        raise ValueError("z must be nonnegative")
    k_count = len(weights)
    if covariances.shape[:1] != (k_count,):
        raise ValueError("one covariance stack per weight required")

    e = np.ones(k_count)
    t = resolvent(weights, covariances, base, z, e, n)
    if k_count == 0:
        return FixedPointSolution(e=e, t=hermitize(t), iterations=0, residual=0.0)

    residual = np.inf
    rises = 0
    damped = False
    for it in range(1, max_iter + 1):
        e_new = (weights / n) * np.einsum("kmij,mji->k", covariances, t).real
        if damped:
            e_new = 0.5 * (e + e_new)
        new_residual = float(np.max(np.abs(e_new - e) / (1.0 + e_new)))
        rises = rises + 1 if new_residual > residual else 0
        if rises >= 2:
            damped = True
        e, residual = e_new, new_residual
        t = resolvent(weights, covariances, base, z, e, n)
        if residual < tol:
            return FixedPointSolution(e=e, t=hermitize(t), iterations=it, residual=residual)
    raise FixedPointError(
        f"fixed point did not reach tol={tol:g} in {max_iter} iterations "
        f"(residual {residual:.3e})", residual=residual, iterations=max_iter)


def solve_derivative(solution: FixedPointSolution, theta, weights, covariances, *,
                     n: int | None = None) -> DerivativeEquivalent:
    """Solve the derivative deterministic equivalent (T', e') for a given Theta.

    Requires a converged fixed point and Hermitian ``theta`` (same block
    layout).  Raises if the coupling matrix J has spectral radius >= 1 or
    I - J is singular, since the linear system for e' is then invalid.
    """
    weights = np.asarray(weights, dtype=float)
    covariances = np.asarray(covariances, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    t = solution.t
    m_count, b = t.shape[0], t.shape[1]
    if n is None:
        n = m_count * b
    k_count = len(weights)

    ttheta_t = t @ theta @ t
    if k_count == 0:
        return DerivativeEquivalent(t_prime=hermitize(ttheta_t), e_prime=np.zeros(0),
                                    j=np.zeros((0, 0)), v=np.zeros(0))

    ct = covariances @ t                                    # (K, M, b, b)
    v = (weights / n) * np.einsum("kmij,mji->k", covariances, ttheta_t).real
    denom = (1.0 + solution.e) ** 2
    j = np.einsum("kmij,lmji->kl", ct, ct).real
    j *= np.outer(weights, weights / denom) / n ** 2
    if np.max(np.abs(np.linalg.eigvals(j))) >= 1.0:
        raise FixedPointError("derivative system rejected: spectral radius of J >= 1",
                              residual=float("nan"), iterations=solution.iterations)
    e_prime = np.linalg.solve(np.eye(k_count) - j, v)
    mid = np.einsum("k,kmij->mij", weights * e_prime / denom, covariances) / n
    t_prime = hermitize(ttheta_t + t @ mid @ t)
    return DerivativeEquivalent(t_prime=t_prime, e_prime=e_prime, j=j, v=v)


# --------------------------------------------------------------------------
# Oracle utilities for the concentration lemmas behind the approximations.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceLemmaDeviations:
    """Per-draw deviations of quadratic forms from their trace limits."""

    quadratic: np.ndarray  # |x^H A x - tr(A)/n| per draw
    cross: np.ndarray      # |x^H A y| per draw

    @property
    def max_quadratic(self) -> float:
        return float(self.quadratic.max())

    @property
    def median_quadratic(self) -> float:
        return float(np.median(self.quadratic))

    @property
    def max_cross(self) -> float:
        return float(self.cross.max())

    @property
    def median_cross(self) -> float:
        return float(np.median(self.cross))


def trace_lemma_oracle(a: np.ndarray, trials: int, seed=0) -> TraceLemmaDeviations:
    """Measure concentration of x^H A x around tr(A)/n and of x^H A y around 0.

    x, y are i.i.d. CN(0, I/n) with n the dimension of the Hermitian matrix a.
    """
    a = np.asarray(a)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((2, trials, n, 2))
    x = (draws[0, ..., 0] + 1j * draws[0, ..., 1]) / np.sqrt(2.0 * n)
    y = (draws[1, ..., 0] + 1j * draws[1, ..., 1]) / np.sqrt(2.0 * n)
    target = np.trace(a).real / n
    quad = np.abs(np.einsum("ti,ij,tj->t", np.conj(x), a, x).real - target)
    cross = np.abs(np.einsum("ti,ij,tj->t", np.conj(x), a, y))
    return TraceLemmaDeviations(quadratic=quad, cross=cross)


def rank_one_update_identity(u: np.ndarray, x: np.ndarray, c: complex):
    """Both sides of the rank-one inversion identity, as row vectors.

    Returns (x^H (U + c x x^H)^-1,  x^H U^-1 / (1 + c x^H U^-1 x)); the two
    agree exactly whenever both inverses exist.  Raises on singular input.
    """
    u = np.asarray(u, dtype=complex)
    x = np.asarray(x, dtype=complex)
    updated = u + c * np.outer(x, np.conj(x))
    lhs = np.linalg.solve(updated.T, np.conj(x))
    xhu = np.linalg.solve(u.T, np.conj(x))
    rhs = xhu / (1.0 + c * (xhu @ x))
    return lhs, rhs
