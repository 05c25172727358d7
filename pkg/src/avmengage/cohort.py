"""Beneficiary data model, call-log ingestion, and synthetic cohort generation.

A cohort is a set of program beneficiaries who each receive one automated
voice message (AVM) per week. Listenership is tracked as a weekly state in
[0, 1] (seconds listened divided by the AVM length, clipped at 1). Synthetic
cohorts carry known ground-truth parameters so that scheduling and
intervention policies can be scored against the truth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class ActionKind(Enum):
    """Weekly intervention applied to a beneficiary.

    PASSIVE is the zero-cost default; the two active interventions are a
    home visit by a community health worker (ASHA) and an automated
    reminder call.
    """

    ASHA_VISIT = "ASHA"
    CALL_REMINDER = "CALL"
    PASSIVE = "NONE"

    @classmethod
    def from_label(cls, label: str) -> "ActionKind":
        for kind in cls:
            if kind.value == label:
                return kind
        raise ValueError(f"unknown intervention label {label!r}")


#: The two budget-limited interventions, in priority order.
INTERVENTIONS = (ActionKind.ASHA_VISIT, ActionKind.CALL_REMINDER)


class CallLogError(ValueError):
    """Raised when a call-log CSV violates the schema; names the bad row."""


@dataclass(frozen=True)
class CallAttemptRecord:
    """One call attempt: (beneficiary, week, retry index, slot, outcome)."""

    beneficiary_id: object
    week: int
    attempt_index: int
    slot: int
    picked_up: bool
    seconds_listened: float
    intervention: ActionKind = ActionKind.PASSIVE

    def __post_init__(self):
        if self.seconds_listened < 0:
            raise ValueError("seconds_listened must be non-negative")
        if self.seconds_listened > 0 and not self.picked_up:
            raise ValueError("seconds_listened > 0 requires picked_up")


@dataclass
class Trajectory:
    """Weekly engagement history of one beneficiary.

    ``states``, ``actions`` and ``raw_seconds`` are parallel lists indexed by
    week (week 1 first). ``actions[t]`` is the intervention delivered in the
    same week as ``states[t]``; its effect on the state is contemporaneous.
    """

    beneficiary_id: object
    states: list[float]
    actions: list[ActionKind]
    raw_seconds: list[float]
    dropped_at_week: Optional[int] = None

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) == len(self.raw_seconds)):
            raise ValueError("states/actions/raw_seconds must be parallel")
        for s in self.states:
            if not (0.0 <= s <= 1.0):
                raise ValueError(f"state {s} outside [0, 1]")
        if self.dropped_at_week is not None and len(self.states) > self.dropped_at_week:
            raise ValueError("entries exist past the dropout week")

    def __len__(self) -> int:
        return len(self.states)


@dataclass
class BeneficiaryGroundTruth:
    """Latent parameters a synthetic beneficiary is generated from."""

    beneficiary_id: object
    true_pickup_rate_per_slot: np.ndarray
    engagement_mean: float
    persistence: float
    noise_sigma: float
    preferred_slot: int = 0

    def __post_init__(self):
        rates = np.asarray(self.true_pickup_rate_per_slot, dtype=float)
        if rates.min() < 0.0 or rates.max() > 1.0:
            raise ValueError("pickup rates must lie in [0, 1]")
        if not (0.0 <= self.engagement_mean <= 1.0):
            raise ValueError("engagement_mean must lie in [0, 1]")
        if not (0.0 <= self.persistence < 1.0):
            raise ValueError("persistence must lie in [0, 1)")
        self.true_pickup_rate_per_slot = rates


@dataclass
class CohortConfig:
    """Knobs for synthetic cohort generation.

    Slot pickup rates are a low Beta-distributed base per (beneficiary, slot)
    plus a Beta-distributed boost on one uniformly chosen preferred slot.
    Weekly engagement follows a mean-reverting process around a per-beneficiary
    engagement mean drawn from a two-component Beta mixture (an "at-risk"
    component near the dropout threshold and a healthier one above it).
    """

    n_beneficiaries: int = 4000
    n_slots: int = 7
    retries: int = 9
    avm_length_s: float = 120.0
    weeks_horizon: int = 72
    seed: int = 0
    history_weeks: int = 12
    # pickup-rate priors
    pickup_base_alpha: float = 1.8
    pickup_base_beta: float = 16.0
    preferred_boost_alpha: float = 6.0
    preferred_boost_beta: float = 3.0
    preferred_boost_scale: float = 0.5
    # engagement-dynamics priors
    at_risk_fraction: float = 0.30
    engagement_risk_alpha: float = 12.0
    engagement_risk_beta: float = 38.0
    engagement_healthy_alpha: float = 11.0
    engagement_healthy_beta: float = 9.0
    persistence: float = 0.70
    noise_sigma: float = 0.08
    # historical intervention exposure (teaches the forecaster action effects)
    hist_asha_rate: float = 0.01
    hist_call_rate: float = 0.01
    lift_asha: float = 1.16
    lift_call: float = 1.05

    def __post_init__(self):
        if self.n_slots < 1 or self.retries < 1 or self.weeks_horizon < 1:
            raise ValueError("n_slots, retries and weeks_horizon must be >= 1")
        if self.avm_length_s <= 0:
            raise ValueError("avm_length_s must be positive")


def normalize_listenership(seconds: float, avm_length_s: float) -> float:
    """Map weekly seconds listened to the [0, 1] engagement state."""
    if avm_length_s <= 0:
        raise ValueError("avm_length_s must be positive")
    if seconds < 0:
        raise ValueError("seconds must be non-negative")
    return min(seconds / avm_length_s, 1.0)


def estimate_pickup_rates(
    attempts: Sequence[CallAttemptRecord], n_slots: int
) -> list[Optional[float]]:
    """Per-slot pickup ratio (picked / made); slots with no attempts give None."""
    made = [0] * n_slots
    picked = [0] * n_slots
    for rec in attempts:
        if not (0 <= rec.slot < n_slots):
            raise ValueError(f"slot {rec.slot} outside [0, {n_slots - 1}]")
        made[rec.slot] += 1
        picked[rec.slot] += int(rec.picked_up)
    return [picked[j] / made[j] if made[j] > 0 else None for j in range(n_slots)]


# ---------------------------------------------------------------------------
# Call-log CSV schema
# ---------------------------------------------------------------------------

CALL_LOG_HEADER = [
    "beneficiary_id",
    "week",
    "attempt_index",
    "slot",
    "picked_up",
    "seconds_listened",
    "intervention",
]


def _parse_id(raw: str) -> object:
    return int(raw) if raw.lstrip("-").isdigit() else raw


def load_call_logs(
    path: str | Path,
    n_slots: int = 7,
    retries: int = 9,
    avm_length_s: float = 120.0,
) -> tuple[list[Trajectory], list[CallAttemptRecord]]:
    """Read a call-log CSV into trajectories plus the raw attempt records.

    Weekly state is the week's total seconds listened normalized by the AVM
    length. Weeks with no logged attempt are filled in as zero-listening
    passive weeks so each trajectory is consecutive from week 1.
    Malformed rows raise :class:`CallLogError` naming the row number
    (header = row 1).
    """
    records: list[CallAttemptRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CallLogError("row 1: missing header") from None
        if header != CALL_LOG_HEADER:
            raise CallLogError(f"row 1: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CALL_LOG_HEADER):
                raise CallLogError(f"row {lineno}: expected {len(CALL_LOG_HEADER)} fields")
            try:
                week = int(row[1])
                attempt_index = int(row[2])
                slot = int(row[3])
                picked_raw = int(row[4])
                seconds = float(row[5])
            except ValueError:
                raise CallLogError(f"row {lineno}: non-numeric field") from None
            if week < 1:
                raise CallLogError(f"row {lineno}: week must be >= 1")
            if not (1 <= attempt_index <= retries):
                raise CallLogError(f"row {lineno}: attempt_index {attempt_index} outside [1, {retries}]")
            if not (0 <= slot < n_slots):
                raise CallLogError(f"row {lineno}: slot {slot} outside [0, {n_slots - 1}]")
            if picked_raw not in (0, 1):
                raise CallLogError(f"row {lineno}: picked_up must be 0 or 1")
            try:
                intervention = ActionKind.from_label(row[6])
            except ValueError:
                raise CallLogError(f"row {lineno}: unknown intervention {row[6]!r}") from None
            try:
                rec = CallAttemptRecord(
                    beneficiary_id=_parse_id(row[0]),
                    week=week,
                    attempt_index=attempt_index,
                    slot=slot,
                    picked_up=bool(picked_raw),
                    seconds_listened=seconds,
                    intervention=intervention,
                )
            except ValueError as exc:
                raise CallLogError(f"row {lineno}: {exc}") from None
            records.append(rec)

    # Group into per-beneficiary weekly trajectories.
    by_benef: dict[object, dict[int, list[CallAttemptRecord]]] = {}
    for rec in records:
        by_benef.setdefault(rec.beneficiary_id, {}).setdefault(rec.week, []).append(rec)

    trajectories = []
    for benef_id in sorted(by_benef, key=str):
        weeks = by_benef[benef_id]
        last_week = max(weeks)
        states, actions, seconds_per_week = [], [], []
        for w in range(1, last_week + 1):
            recs = weeks.get(w, [])
            total = sum(r.seconds_listened for r in recs)
            action = ActionKind.PASSIVE
            for kind in INTERVENTIONS:
                if any(r.intervention is kind for r in recs):
                    action = kind
                    break
            seconds_per_week.append(total)
            states.append(normalize_listenership(total, avm_length_s))
            actions.append(action)
        trajectories.append(
            Trajectory(
                beneficiary_id=benef_id,
                states=states,
                actions=actions,
                raw_seconds=seconds_per_week,
            )
        )
    return trajectories, records


def write_call_logs(records: Sequence[CallAttemptRecord], path: str | Path) -> None:
    """Write attempt records back to the call-log CSV schema (lossless)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CALL_LOG_HEADER)
        for rec in records:
            writer.writerow(
                [
                    rec.beneficiary_id,
                    rec.week,
                    rec.attempt_index,
                    rec.slot,
                    int(rec.picked_up),
                    format(rec.seconds_listened, ".17g"),
                    rec.intervention.value,
                ]
            )


# ---------------------------------------------------------------------------
# Synthetic cohorts
# ---------------------------------------------------------------------------

def _step_engagement(prev: np.ndarray, mu: np.ndarray, alpha: float,
                     sigma: float, eps: np.ndarray, lift: np.ndarray) -> np.ndarray:
    """One week of the mean-reverting engagement process with action lift."""
    raw = (alpha * prev + (1.0 - alpha) * mu + sigma * eps) * lift
    return np.clip(raw, 0.0, 1.0)


def generate_synthetic_cohort(
    config: CohortConfig,
) -> tuple[list[BeneficiaryGroundTruth], list[Trajectory]]:
    """Generate ground truths and engagement-history prefixes for a cohort.

    Deterministic for a fixed config (a single seeded generator drives all
    draws). History weeks include sparse random interventions at the
    configured rates so a forecaster fitted on the prefixes can learn action
    effects. Pickup-rate priors are calibrated so that, under uniform random
    retries, roughly a quarter of the cohort is unreached in a given week.
    """
    rng = np.random.default_rng(config.seed)
    n, s = config.n_beneficiaries, config.n_slots

    rates = rng.beta(config.pickup_base_alpha, config.pickup_base_beta, size=(n, s))
    preferred = rng.integers(0, s, size=n)
    boost = config.preferred_boost_scale * rng.beta(
        config.preferred_boost_alpha, config.preferred_boost_beta, size=n
    )
    rates[np.arange(n), preferred] = np.clip(
        rates[np.arange(n), preferred] + boost, 0.0, 1.0
    )

    at_risk = rng.random(n) < config.at_risk_fraction
    mu = np.where(
        at_risk,
        rng.beta(config.engagement_risk_alpha, config.engagement_risk_beta, size=n),
        rng.beta(config.engagement_healthy_alpha, config.engagement_healthy_beta, size=n),
    )

    alpha, sigma = config.persistence, config.noise_sigma
    stationary_sd = sigma / math.sqrt(1.0 - alpha * alpha)
    state = np.clip(mu + stationary_sd * rng.standard_normal(n), 0.0, 1.0)

    lift_of = {
        ActionKind.ASHA_VISIT: config.lift_asha,
        ActionKind.CALL_REMINDER: config.lift_call,
        ActionKind.PASSIVE: 1.0,
    }
    states = np.empty((config.history_weeks, n))
    actions = np.empty((config.history_weeks, n), dtype=object)
    for w in range(config.history_weeks):
        u = rng.random(n)
        week_actions = np.full(n, ActionKind.PASSIVE, dtype=object)
        week_actions[u < config.hist_asha_rate] = ActionKind.ASHA_VISIT
        week_actions[
            (u >= config.hist_asha_rate)
            & (u < config.hist_asha_rate + config.hist_call_rate)
        ] = ActionKind.CALL_REMINDER
        lifts = np.array([lift_of[a] for a in week_actions])
        state = _step_engagement(state, mu, alpha, sigma, rng.standard_normal(n), lifts)
        states[w] = state
        actions[w] = week_actions

    truths, trajectories = [], []
    for i in range(n):
        truths.append(
            BeneficiaryGroundTruth(
                beneficiary_id=i,
                true_pickup_rate_per_slot=rates[i].copy(),
                engagement_mean=float(mu[i]),
                persistence=alpha,
                noise_sigma=sigma,
                preferred_slot=int(preferred[i]),
            )
        )
        week_states = [float(x) for x in states[:, i]]
        trajectories.append(
            Trajectory(
                beneficiary_id=i,
                states=week_states,
                actions=list(actions[:, i]),
                raw_seconds=[x * config.avm_length_s for x in week_states],
            )
        )
    return truths, trajectories


def train_test_split(
    trajectories: Sequence[Trajectory], ratio: float, seed: int
) -> tuple[list[Trajectory], list[Trajectory]]:
    """Disjoint, exhaustive partition by beneficiary; deterministic per seed.

    The train size is n * ratio rounded half-up, so a lone beneficiary at
    ratio 0.5 lands in the train split.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie strictly between 0 and 1")
    order = np.random.default_rng(seed).permutation(len(trajectories))
    n_train = int(math.floor(len(trajectories) * ratio + 0.5))
    train_idx = sorted(order[:n_train])
    test_idx = sorted(order[n_train:])
    return (
        [trajectories[i] for i in train_idx],
        [trajectories[i] for i in test_idx],
    )
