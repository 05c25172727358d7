"""Per-beneficiary call-slot learning under the weekly retry scheme.

Each beneficiary gets up to R call attempts per week, stopping at the first
pickup. A UCB learner treats the day's time slots as bandit arms (payoff =
call answered) and is compared against two uniform-random baselines: one that
never tracks outcomes and one that tracks per-slot means (used only by the
convergence metric). The pull counter advances per attempt, not per week, and
statistics update immediately after every attempt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .cohort import BeneficiaryGroundTruth


class SlotPolicyKind(Enum):
    UCB = "ucb"
    UNIFORM_NO_UPDATE = "uniform_no_update"
    UNIFORM_UPDATE = "uniform_update"


@dataclass(frozen=True)
class SlotStats:
    """Running per-slot statistics: empirical means, pull counts, total pulls."""

    means: tuple[float, ...]
    pulls: tuple[int, ...]
    total_pulls: int

    @classmethod
    def fresh(cls, n_slots: int) -> "SlotStats":
        return cls(means=(0.0,) * n_slots, pulls=(0,) * n_slots, total_pulls=0)

    @property
    def n_slots(self) -> int:
        return len(self.means)


def ucb_select(stats: SlotStats) -> int:
    """Pick the slot with the highest upper confidence bound.

    Untried slots (zero pulls) take priority over all tried ones; otherwise
    the bound is mean + sqrt(2 ln(total pulls) / pulls). Ties break toward
    the fewest pulls, then the lowest slot index.
    """
    untried = [j for j, n in enumerate(stats.pulls) if n == 0]
    if untried:
        return min(untried)
    log_tau = math.log(stats.total_pulls)
    bounds = [
        stats.means[j] + math.sqrt(2.0 * log_tau / stats.pulls[j])
        for j in range(stats.n_slots)
    ]
    best = max(bounds)
    candidates = [j for j, b in enumerate(bounds) if b == best]
    return min(candidates, key=lambda j: (stats.pulls[j], j))


def update(stats: SlotStats, slot: int, success: bool) -> SlotStats:
    """Record one attempt outcome; returns new stats with the running mean."""
    if not (0 <= slot < stats.n_slots):
        raise ValueError(f"slot {slot} out of range")
    pulls = list(stats.pulls)
    means = list(stats.means)
    pulls[slot] += 1
    means[slot] += (float(success) - means[slot]) / pulls[slot]
    return SlotStats(means=tuple(means), pulls=tuple(pulls), total_pulls=stats.total_pulls + 1)


def run_week(
    stats: SlotStats,
    truth: BeneficiaryGroundTruth,
    retries: int,
    policy: SlotPolicyKind,
    rng: np.random.Generator,
    _draws: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> tuple[int, bool, SlotStats]:
    """Attempt up to ``retries`` calls for one week, stopping at a pickup.

    A full week's randomness (pickup uniforms, then uniform slot choices) is
    drawn upfront so random-number consumption does not depend on how many
    attempts were needed. ``_draws`` lets a caller inject those arrays, which
    keeps this loop exactly reproducible against the vectorized cohort runner.
    """
    if retries < 1:
        raise ValueError("retries must be >= 1")
    n_slots = stats.n_slots
    if _draws is None:
        pick_us = rng.random(retries)
        slot_choices = rng.integers(0, n_slots, size=retries)
    else:
        pick_us, slot_choices = _draws
    rates = truth.true_pickup_rate_per_slot
    for k in range(retries):
        if policy is SlotPolicyKind.UCB:
            slot = ucb_select(stats)
        else:
            slot = int(slot_choices[k])
        success = bool(pick_us[k] < rates[slot])
        if policy is not SlotPolicyKind.UNIFORM_NO_UPDATE:
            stats = update(stats, slot, success)
        if success:
            return k + 1, True, stats
    return retries, False, stats


# ---------------------------------------------------------------------------
# Cohort-scale benchmark (vectorized over beneficiaries x repetitions)
# ---------------------------------------------------------------------------

@dataclass
class BenchRun:
    """Weekly results of one policy over beneficiaries x repetitions.

    ``attempts[w, i]`` is the number of calls run i used in week w+1;
    ``best_slot_abs_err[w, i]`` is |empirical mean - true rate| for the true
    best slot after week w+1 (inf while that slot is still untried).
    """

    policy: SlotPolicyKind
    attempts: np.ndarray
    best_slot_abs_err: np.ndarray


def run_cohort_bench(
    truths: Sequence[BeneficiaryGroundTruth],
    policy: SlotPolicyKind,
    weeks: int,
    retries: int,
    repetitions: int,
    seed: int,
) -> BenchRun:
    """Run the weekly retry scheme for a whole cohort, vectorized.

    Pickup randomness and slot-choice randomness come from two independent
    streams spawned from the seed, so all policies see identical pickup draws
    (paired comparison) and results are reproducible bit for bit.
    """
    n_slots = len(truths[0].true_pickup_rate_per_slot)
    rates = np.stack([t.true_pickup_rate_per_slot for t in truths])
    rates = np.tile(rates, (repetitions, 1))
    n_runs = rates.shape[0]
    rows = np.arange(n_runs)
    best_slot = rates.argmax(axis=1)  # ties resolve to the lowest index
    best_rate = rates[rows, best_slot]

    pick_ss, slot_ss = np.random.SeedSequence(seed).spawn(2)
    rng_pick = np.random.default_rng(pick_ss)
    rng_slot = np.random.default_rng(slot_ss)

    means = np.zeros((n_runs, n_slots))
    pulls = np.zeros((n_runs, n_slots), dtype=np.int64)
    total = np.zeros(n_runs, dtype=np.int64)
    slot_index = np.arange(n_slots)

    attempts = np.zeros((weeks, n_runs), dtype=np.int64)
    best_err = np.empty((weeks, n_runs))

    update_stats = policy is not SlotPolicyKind.UNIFORM_NO_UPDATE
    for w in range(weeks):
        pick_us = rng_pick.random((n_runs, retries))
        slot_choices = rng_slot.integers(0, n_slots, size=(n_runs, retries))
        active = np.ones(n_runs, dtype=bool)
        for k in range(retries):
            if policy is SlotPolicyKind.UCB:
                with np.errstate(divide="ignore"):
                    bound = means + np.sqrt(
                        2.0 * np.log(np.maximum(total, 1))[:, None] / np.maximum(pulls, 1)
                    )
                bound = np.where(pulls == 0, np.inf, bound)
                row_best = bound.max(axis=1, keepdims=True)
                tie_key = np.where(bound == row_best, pulls * n_slots + slot_index, np.iinfo(np.int64).max)
                slots = tie_key.argmin(axis=1)
            else:
                slots = slot_choices[:, k]
            success = pick_us[:, k] < rates[rows, slots]
            if update_stats:
                act = rows[active]
                sl = slots[active]
                pulls[act, sl] += 1
                total[active] += 1
                means[act, sl] += (success[active].astype(float) - means[act, sl]) / pulls[act, sl]
            attempts[w, active] += 1
            active &= ~success
        err = np.abs(means[rows, best_slot] - best_rate)
        best_err[w] = np.where(pulls[rows, best_slot] > 0, err, np.inf)

    return BenchRun(policy=policy, attempts=attempts, best_slot_abs_err=best_err)


def metric_avg_calls(run: BenchRun) -> np.ndarray:
    """Mean attempts per week over all beneficiaries and repetitions."""
    return run.attempts.mean(axis=1)


def metric_convergence_fraction(run: BenchRun, tolerance: float = 0.15) -> np.ndarray:
    """Fraction of runs whose best-slot empirical mean is within tolerance."""
    return (run.best_slot_abs_err <= tolerance).mean(axis=1)
