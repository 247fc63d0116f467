"""Independent oracles: brute-force searches and closed forms used to check
the optimizer, the allocator, the fixed point, and the concentration lemmas.

Each oracle shares nothing with the code path it validates beyond elementary
arithmetic and the matrix inverse primitive, so agreement is evidence rather
than tautology.  The same battery backs the ``cfmimo validate`` subcommand.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .analog_bf import RfAllocation
from .rmt import rank_one_update_identity, solve_fixed_point, trace_lemma_oracle


@dataclass(frozen=True)
class OracleReport:
    """One oracle-vs-artifact comparison; pass means within tolerance."""

    name: str
    fingerprint: str
    oracle_value: float
    artifact_value: float
    tolerance: float
    passed: bool


def _report(name, fingerprint, oracle_value, artifact_value, tolerance,
            larger_ok: bool = False) -> OracleReport:
    if larger_ok:  # artifact only needs to reach oracle - tolerance
        ok = artifact_value >= oracle_value - tolerance
    else:
        ok = abs(oracle_value - artifact_value) <= tolerance
    return OracleReport(name=name, fingerprint=fingerprint,
                        oracle_value=float(oracle_value),
                        artifact_value=float(artifact_value),
                        tolerance=float(tolerance), passed=bool(ok))


# --------------------------------------------------------------------------
# Max-min power: exhaustive grid search
# --------------------------------------------------------------------------

def power_grid_oracle(sinr_fn, p_max: float, num_users: int,
                      resolution: int = 100):
    """Best min-SINR over the max-normalized power grid {1..R}^K / max.

    ``sinr_fn`` maps a power vector in mW to per-user SINRs, exactly as the
    iterative optimizer sees it.  Only tractable for K <= 3.
    """
    if num_users > 3:
        raise ValueError("power grid oracle is limited to K <= 3")
    best_value = -np.inf
    best_powers = None
    seen = set()
    for point in itertools.product(range(1, resolution + 1), repeat=num_users):
        arr = np.array(point, dtype=float)
        key = tuple(arr / arr.max())
        if key in seen:
            continue
        seen.add(key)
        p = np.array(key) * p_max
        value = float(np.min(sinr_fn(p)))
        if value > best_value:
            best_value, best_powers = value, p
    return best_value, best_powers


# --------------------------------------------------------------------------
# Fixed point: scalar closed form
# --------------------------------------------------------------------------

def scalar_fixed_point_oracle(p: float, c: float, d: float, n: int) -> float:
    """Positive root of e (d + p c / (1 + e)) = p c n, the K=1 fixed point
    with C = c I_n and S0 = d I_n."""
    if p <= 0 or c <= 0:
        return 0.0
    # d e^2 + (d + p c - p c n) e - p c n = 0
    b = d + p * c - p * c * n
    disc = b * b + 4.0 * d * p * c * n
    return (-b + np.sqrt(disc)) / (2.0 * d)


# --------------------------------------------------------------------------
# RF-chain allocation: exhaustive enumeration
# --------------------------------------------------------------------------

def allocation_min_energy(allocation: RfAllocation, eigenvalues: np.ndarray) -> float:
    """Min over users of summed eigenvalue energy under an allocation map.

    ``eigenvalues`` is (M, K, N) sorted descending along the last axis.
    Users holding no chain contribute energy zero.
    """
    k_count = eigenvalues.shape[1]
    energy = np.zeros(k_count)
    for m in range(allocation.owner.shape[0]):
        for i in range(allocation.owner.shape[1]):
            k = int(allocation.owner[m, i])
            energy[k] += eigenvalues[m, k, int(allocation.order[m, i])]
    return float(energy.min())


def exhaustive_allocation_oracle(eigenvalues: np.ndarray, n_rf: int):
    """Optimal min-sum-energy over every owner/order map (M*N_RF <= 8).

    Within one AP a user's chains always take successive eigenvalue ranks,
    which dominates any other rank choice, so it suffices to enumerate the
    multiset of owners per AP.
    """
    m_count, k_count, _ = eigenvalues.shape
    if m_count * n_rf > 8:
        raise ValueError("exhaustive allocation oracle is limited to M*N_RF <= 8")
    per_ap = list(itertools.combinations_with_replacement(range(k_count), n_rf))
    best_value = -np.inf
    best_map = None
    for combo in itertools.product(per_ap, repeat=m_count):
        energy = np.zeros(k_count)
        for m, owners in enumerate(combo):
            rank = {}
            for k in owners:
                r = rank.get(k, 0)
                energy[k] += eigenvalues[m, k, r]
                rank[k] = r + 1
        value = energy.min()
        if value > best_value:
            best_value, best_map = float(value), combo
    return best_value, best_map


# --------------------------------------------------------------------------
# Oracle battery for the validate subcommand
# --------------------------------------------------------------------------

def run_oracle_suite(seed: int = 0, trials: int = 10000) -> list[OracleReport]:
    """Self-contained oracle checks at configurable Monte Carlo size.

    The concentration checks use honest tolerances calibrated to the actual
    O(1/sqrt(n)) and O(1/n) rates of the statistics measured.
    """
    rng = np.random.default_rng(seed)
    reports = []

    # rank-one inversion identity on random PD instances
    worst = 0.0
    for _ in range(100):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        u = g @ g.conj().T + np.eye(4)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        lhs, rhs = rank_one_update_identity(u, x, 1.0)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    reports.append(_report("rank_one_identity", "4x4 PD x100", 0.0, worst, 1e-10))

    # quadratic-form concentration at n=256 (median deviation is ~0.67/sqrt(n))
    n = 256
    dev = trace_lemma_oracle(np.eye(n), trials=trials, seed=seed)
    reports.append(_report("trace_quadratic_median", f"A=I n={n}", 0.0,
                           dev.median_quadratic, 1.0 / np.sqrt(n)))
    reports.append(_report("trace_cross_median", f"A=I n={n}", 0.0,
                           dev.median_cross, 1.2 / np.sqrt(n)))

    # rank-one trace perturbation at n=64 with B >= I
    n = 64
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b_mat = g @ g.conj().T / n + np.eye(n)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = 0.5 * (a + a.conj().T)
    worst = 0.0
    for _ in range(200):
        v = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        diff = abs(np.trace(a @ np.linalg.inv(b_mat)).real / n
                   - np.trace(a @ np.linalg.inv(b_mat + np.outer(v, v.conj()))).real / n)
        worst = max(worst, diff)
    bound = 10.0 * float(np.linalg.norm(a, 2)) / n
    reports.append(_report("trace_rank_one_perturbation", f"n={n} B>=I", 0.0,
                           worst, bound))

    # fixed-point solver vs scalar closed form
    oracle = scalar_fixed_point_oracle(1.0, 1.0, 1.0, 2)
    eye2 = np.eye(2, dtype=complex)
    sol = solve_fixed_point(np.ones(1), eye2[None, None], eye2[None], 0.0, tol=1e-12)
    reports.append(_report("scalar_fixed_point", "P=c=d=1 n=2", oracle,
                           float(sol.e[0]), 1e-9))
    return reports


def write_oracle_csv(path, reports, append: bool = True) -> None:
    """Append oracle reports to a validation CSV (header written when new)."""
    import os
    new_file = not (append and os.path.exists(path))
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(["name", "fingerprint", "oracle_value",
                             "artifact_value", "tolerance", "passed"])
        for r in reports:
            writer.writerow([r.name, r.fingerprint, repr(r.oracle_value),
                             repr(r.artifact_value), repr(r.tolerance), r.passed])
