"""Analog beamforming: RF-chain allocation and unit-modulus eigen precoders.

Every RF chain is owned by one user; its analog column carries the phases of
an eigenvector of that user's spatial correlation matrix at the AP, scaled to
entries of modulus exactly 1/N.  The chain-to-user allocation greedily
maximizes the minimum per-user sum of captured eigenvalue energy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .blockdiag import hermitize
from .scenario import ScenarioConfig, SpatialCorrelationSet


@dataclass(frozen=True)
class RfAllocation:
    """Chain ownership map: chain i at AP m belongs to user owner[m, i] and
    uses eigenvector rank order[m, i] (0 = dominant) of that user's R."""

    owner: np.ndarray  # (M, N_RF) int
    order: np.ndarray  # (M, N_RF) int

    def chains_of(self, user: int):
        """(m, i) pairs of the chains owned by ``user``."""
        m_idx, i_idx = np.nonzero(self.owner == user)
        return list(zip(m_idx.tolist(), i_idx.tolist()))


@dataclass(frozen=True)
class AnalogPrecoder:
    """Per-AP analog precoding matrices, entries of modulus exactly 1/N."""

    w: np.ndarray          # (M, N, N_RF) complex
    allocation: RfAllocation

    @property
    def num_aps(self) -> int:
        return self.w.shape[0]

    @property
    def rf_chains(self) -> int:
        return self.w.shape[2]


def eigen_beamformer(r: np.ndarray, rank: int = 0) -> np.ndarray:
    """Unit-modulus beamformer from the (rank+1)-th dominant eigenvector of r.

    The eigenvector's global phase is fixed by rotating its largest-modulus
    entry (lowest index on ties) to be real positive, then each entry is
    mapped to (1/N) exp(j angle), with angle(0) defined as 0.  This keeps the
    output invariant to the arbitrary phase of the backend's eigenvectors.
    """
    r = np.asarray(r)
    n = r.shape[0]
    if not 0 <= rank < n:
        raise ValueError(f"rank must be in [0, {n}), got {rank}")
    _, vecs = np.linalg.eigh(hermitize(r))
    u = vecs[:, n - 1 - rank]
    pivot = int(np.argmax(np.abs(u)))
    if np.abs(u[pivot]) > 0:
        u = u * (np.conj(u[pivot]) / np.abs(u[pivot]))
    phases = np.where(np.abs(u) > 0, u / np.where(np.abs(u) > 0, np.abs(u), 1.0), 1.0)
    return phases / n


def allocate_rf_chains(correlations: SpatialCorrelationSet, config: ScenarioConfig,
                       require_full_coverage: bool = True) -> RfAllocation:
    """Greedily allocate the M*N_RF chains to users, max-min in captured energy.

    Phase 1 hands every user one chain, processing users in descending order
    of their best available dominant eigenvalue.  Phase 2 repeatedly gives the
    user with the smallest accumulated energy its best remaining (AP, next
    eigenvalue rank) slot.  Deterministic; ties break toward lower indices.

    With ``require_full_coverage`` (the default) K > M*N_RF is a configuration
    error since not every user can own a chain; pass False to allow
    oversubscribed scenarios, in which the lowest-gain users go unserved.
    """
    m_count, k_count = correlations.num_aps, correlations.num_users
    n_rf = config.rf_chains
    if require_full_coverage and k_count > m_count * n_rf:
        raise ValueError(
            f"{k_count} users cannot each own one of {m_count * n_rf} RF chains")

    eigvals = np.linalg.eigvalsh(hermitize(correlations.matrices))[..., ::-1]  # (M, K, N) desc
    owner = np.full((m_count, n_rf), -1, dtype=int)
    order = np.zeros((m_count, n_rf), dtype=int)
    free = np.full(m_count, n_rf, dtype=int)
    held = np.zeros((m_count, k_count), dtype=int)   # chains user k holds at AP m
    energy = np.zeros(k_count)

    def assign(m: int, k: int) -> None:
        i = n_rf - free[m]
        owner[m, i] = k
        order[m, i] = held[m, k]
        energy[k] += eigvals[m, k, held[m, k]]
        held[m, k] += 1
        free[m] -= 1

    top = eigvals[:, :, 0]                           # (M, K) dominant eigenvalues
    unserved = list(range(k_count))
    while unserved and free.sum() > 0:
        open_aps = free > 0
        best_gain = np.where(open_aps[:, None], top, -np.inf).max(axis=0)  # per user
        k = max(unserved, key=lambda u: (best_gain[u], -u))
        gains = np.where(open_aps, top[:, k], -np.inf)
        assign(int(np.argmax(gains)), k)
        unserved.remove(k)

    while free.sum() > 0:
        k = int(np.argmin(energy))
        open_aps = np.nonzero(free > 0)[0]
        slot_gain = eigvals[open_aps, k, held[open_aps, k]]
        assign(int(open_aps[np.argmax(slot_gain)]), k)

    return RfAllocation(owner=owner, order=order)


def build_precoder(correlations: SpatialCorrelationSet,
                   allocation: RfAllocation) -> AnalogPrecoder:
    """Assemble W_m column by column from the allocation map."""
    m_count, _, n = correlations.matrices.shape[:3]
    n_rf = allocation.owner.shape[1]
    w = np.empty((m_count, n, n_rf), dtype=complex)
    for m in range(m_count):
        for i in range(n_rf):
            k = allocation.owner[m, i]
            w[m, :, i] = eigen_beamformer(correlations.matrices[m, k], allocation.order[m, i])
    return AnalogPrecoder(w=w, allocation=allocation)


def effective_correlation(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Correlation of the effective channel after the analog stage: W^H R W."""
    return hermitize(np.conj(w).T @ np.asarray(r) @ w)


def dump_allocation_csv(path, allocation: RfAllocation,
                        correlations: SpatialCorrelationSet) -> None:
    """Debug dump of the allocation map with per-slot eigenvalue energies."""
    eigvals = np.linalg.eigvalsh(hermitize(correlations.matrices))[..., ::-1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ap", "chain", "owner", "order", "eigenvalue"])
        for m in range(allocation.owner.shape[0]):
            for i in range(allocation.owner.shape[1]):
                k, r = int(allocation.owner[m, i]), int(allocation.order[m, i])
                writer.writerow([m, i, k, r, repr(float(eigvals[m, k, r]))])
