"""Weekly intervention assignment under per-intervention budgets.

Maximizes the sum of selected ranking indices subject to at most k_i arms per
intervention and at most one intervention per arm. The constraint matrix is
totally unimodular (a transportation structure), so the integer optimum is
found exactly without an external solver: a dynamic program over arms with
state (ASHA budget used, CALL budget used) enumerates the transportation
polytope's corners in O(N * k_ASHA * k_CALL) and reconstructs the
lexicographically-preferred optimal assignment (lower beneficiary id to ASHA,
then CALL). A brute-force enumerator verifies it on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Optional, Sequence

import numpy as np

from .cohort import ActionKind
from .arm_ranking import IndexTable

#: Weekly assignment: beneficiary id -> intervention. Unmapped arms are passive.
Allocation = dict

_NEG_INF = float("-inf")


class AllocationError(ValueError):
    """An allocation violates budgets, exclusivity, or cohort membership."""


@dataclass(frozen=True)
class Budgets:
    """Per-intervention weekly caps (number of arms)."""

    asha: int
    call: int

    def __post_init__(self):
        if self.asha < 0 or self.call < 0:
            raise ValueError("budgets must be non-negative")


def validate_allocation(
    allocation: Allocation,
    budgets: Budgets,
    valid_ids: Optional[Sequence] = None,
) -> None:
    """Raise AllocationError unless the allocation satisfies all invariants."""
    n_asha = sum(1 for a in allocation.values() if a is ActionKind.ASHA_VISIT)
    n_call = sum(1 for a in allocation.values() if a is ActionKind.CALL_REMINDER)
    if any(a is ActionKind.PASSIVE for a in allocation.values()):
        raise AllocationError("passive arms must be omitted, not mapped")
    if n_asha > budgets.asha:
        raise AllocationError(f"{n_asha} ASHA assignments exceed budget {budgets.asha}")
    if n_call > budgets.call:
        raise AllocationError(f"{n_call} CALL assignments exceed budget {budgets.call}")
    if valid_ids is not None:
        unknown = set(allocation) - set(valid_ids)
        if unknown:
            raise AllocationError(f"unknown beneficiary ids {sorted(unknown, key=str)!r}")


def objective_value(table: IndexTable, allocation: Allocation) -> float:
    """Sum of selected indices, accumulated in ascending-id order."""
    total = 0.0
    for k, benef_id in enumerate(table.ids):
        action = allocation.get(benef_id)
        if action is ActionKind.ASHA_VISIT:
            total += table.m_asha[k]
        elif action is ActionKind.CALL_REMINDER:
            total += table.m_call[k]
    return total


def _eligible_values(table: IndexTable, exclude_nonbeneficial: bool) -> tuple[np.ndarray, np.ndarray]:
    m_a = np.asarray(table.m_asha, dtype=float).copy()
    m_c = np.asarray(table.m_call, dtype=float).copy()
    if exclude_nonbeneficial:
        m_a[m_a <= 1.0] = _NEG_INF
        m_c[m_c <= 1.0] = _NEG_INF
    return m_a, m_c


def allocate_ilp(
    table: IndexTable,
    budgets: Budgets,
    exclude_nonbeneficial: bool = False,
) -> Allocation:
    """Exact optimum of the budgeted one-intervention-per-arm program.

    Backward pass builds suffix value tables over remaining budgets; the
    forward walk re-derives each arm's optimal choice, preferring ASHA, then
    CALL, then passive on exact value ties, which yields the
    lexicographically-preferred optimal assignment over ascending ids.
    """
    n = len(table)
    ka = min(budgets.asha, n)
    kc = min(budgets.call, n)
    if n == 0 or (ka == 0 and kc == 0):
        return {}
    m_a, m_c = _eligible_values(table, exclude_nonbeneficial)

    suffix = np.zeros((n + 1, ka + 1, kc + 1))
    for i in range(n - 1, -1, -1):
        base = suffix[i + 1]
        best = base.copy()
        if ka > 0:
            np.maximum(best[1:, :], m_a[i] + base[:-1, :], out=best[1:, :])
        if kc > 0:
            np.maximum(best[:, 1:], m_c[i] + base[:, :-1], out=best[:, 1:])
        suffix[i] = best

    allocation: Allocation = {}
    a, c = ka, kc
    for i in range(n):
        target = suffix[i][a, c]
        if a > 0 and m_a[i] + suffix[i + 1][a - 1, c] == target:
            allocation[table.ids[i]] = ActionKind.ASHA_VISIT
            a -= 1
        elif c > 0 and m_c[i] + suffix[i + 1][a, c - 1] == target:
            allocation[table.ids[i]] = ActionKind.CALL_REMINDER
            c -= 1
    return allocation


def allocate_greedy(
    table: IndexTable,
    budgets: Budgets,
    backfill: bool = True,
    exclude_nonbeneficial: bool = False,
) -> Allocation:
    """Top-k per intervention with conflict resolution by higher index.

    Arms claimed by both interventions go to the higher index (ties to ASHA);
    the loser backfills from its remaining ranked list, re-contesting as
    needed, until its budget is exhausted or candidates run out. Backfill can
    be disabled to ablate the budget-wasting variant.
    """
    n = len(table)
    m_a, m_c = _eligible_values(table, exclude_nonbeneficial)
    ranked = {
        ActionKind.ASHA_VISIT: sorted(
            (i for i in range(n) if m_a[i] > _NEG_INF), key=lambda i: (-m_a[i], table.ids[i])
        ),
        ActionKind.CALL_REMINDER: sorted(
            (i for i in range(n) if m_c[i] > _NEG_INF), key=lambda i: (-m_c[i], table.ids[i])
        ),
    }
    caps = {ActionKind.ASHA_VISIT: budgets.asha, ActionKind.CALL_REMINDER: budgets.call}
    pointer = {a: 0 for a in ranked}
    chosen = {a: set() for a in ranked}
    lost = {a: set() for a in ranked}

    def refill(action: ActionKind) -> None:
        rank = ranked[action]
        while len(chosen[action]) < caps[action] and pointer[action] < len(rank):
            i = rank[pointer[action]]
            pointer[action] += 1
            if i not in chosen[action] and i not in lost[action]:
                chosen[action].add(i)

    refill(ActionKind.ASHA_VISIT)
    refill(ActionKind.CALL_REMINDER)
    while True:
        conflicts = chosen[ActionKind.ASHA_VISIT] & chosen[ActionKind.CALL_REMINDER]
        if not conflicts:
            break
        for i in conflicts:
            loser = ActionKind.CALL_REMINDER if m_a[i] >= m_c[i] else ActionKind.ASHA_VISIT
            chosen[loser].discard(i)
            lost[loser].add(i)
        if not backfill:
            break
        refill(ActionKind.ASHA_VISIT)
        refill(ActionKind.CALL_REMINDER)

    allocation: Allocation = {}
    for action in (ActionKind.ASHA_VISIT, ActionKind.CALL_REMINDER):
        for i in chosen[action]:
            allocation[table.ids[i]] = action
    return allocation


def allocate_random(
    arms: int | Sequence,
    budgets: Budgets,
    rng: np.random.Generator,
) -> Allocation:
    """Uniform assignment without replacement across both interventions."""
    ids = list(range(arms)) if isinstance(arms, int) else list(arms)
    total = budgets.asha + budgets.call
    if total > len(ids):
        raise AllocationError(f"budgets sum {total} exceeds {len(ids)} arms")
    if total == 0:
        return {}
    picks = rng.permutation(len(ids))[:total]
    allocation: Allocation = {}
    for j, idx in enumerate(picks):
        allocation[ids[idx]] = (
            ActionKind.ASHA_VISIT if j < budgets.asha else ActionKind.CALL_REMINDER
        )
    return allocation


def brute_force_oracle(
    table: IndexTable, budgets: Budgets, max_arms: int = 12
) -> tuple[float, Allocation]:
    """Exhaustive optimum over all feasible assignments (small instances only).

    Enumerates action vectors in ASHA > CALL > passive order per arm and keeps
    the first strict maximum, matching the exact solver's tie preference.
    """
    n = len(table)
    if n > max_arms:
        raise ValueError(f"{n} arms exceed the enumeration bound {max_arms}")
    m_a = np.asarray(table.m_asha, dtype=float)
    m_c = np.asarray(table.m_call, dtype=float)
    choices = (ActionKind.ASHA_VISIT, ActionKind.CALL_REMINDER, ActionKind.PASSIVE)
    best_value = 0.0
    best_assign: tuple[ActionKind, ...] = (ActionKind.PASSIVE,) * n
    for assign in product(choices, repeat=n):
        n_asha = assign.count(ActionKind.ASHA_VISIT)
        if n_asha > budgets.asha:
            continue
        if assign.count(ActionKind.CALL_REMINDER) > budgets.call:
            continue
        value = 0.0
        for i, action in enumerate(assign):
            if action is ActionKind.ASHA_VISIT:
                value += m_a[i]
            elif action is ActionKind.CALL_REMINDER:
                value += m_c[i]
        if value > best_value:
            best_value = value
            best_assign = assign
    allocation = {
        table.ids[i]: a for i, a in enumerate(best_assign) if a is not ActionKind.PASSIVE
    }
    return best_value, allocation
