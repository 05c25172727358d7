"""Rollout-based arm ranking: predicted weeks-to-threshold with vs without help.

For each beneficiary the fitted forecaster is rolled forward twice: once
purely passive, giving v = weeks until predicted engagement first falls below
the threshold, and once acting a single time in the first predicted week,
giving u per intervention. The ranking index m = u / v measures how many
threshold-free weeks one intervention buys relative to doing nothing; the
weekly allocator maximizes the sum of selected indices under budgets.

Rollouts that never cross within the horizon cap are censored at cap + 1, so
u, v >= 1 always and the ratio is well defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cohort import ActionKind, Trajectory
from .forecaster import ForecastModel, ForecastWindow


@dataclass(frozen=True)
class IndexConfig:
    """Threshold and horizon for weeks-to-threshold rollouts.

    The default threshold matches the program dropout rule (25% of the AVM);
    the 40-week cap bounds compute while staying far beyond the evaluation
    horizon.
    """

    threshold: float = 0.25
    horizon_cap: int = 40

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must lie strictly between 0 and 1")
        if self.horizon_cap < 1:
            raise ValueError("horizon_cap must be >= 1")


@dataclass
class IndexTable:
    """Per-arm rollout lengths and ranking indices, ordered by beneficiary id."""

    ids: list
    u_asha: np.ndarray
    u_call: np.ndarray
    v: np.ndarray
    m_asha: np.ndarray
    m_call: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def m(self, action: ActionKind) -> np.ndarray:
        if action is ActionKind.ASHA_VISIT:
            return self.m_asha
        if action is ActionKind.CALL_REMINDER:
            return self.m_call
        raise ValueError("no index for the passive action")

    def index_of(self, beneficiary_id, action: ActionKind) -> float:
        return float(self.m(action)[self.ids.index(beneficiary_id)])


def history_window(
    states: Sequence[float], actions: Sequence[ActionKind], h: int
) -> ForecastWindow:
    """Build a rollout-ready window from an observed history.

    Histories shorter than h are left-padded with the earliest observed state
    and passive actions so new enrollees are rankable immediately. The final
    action slot is a passive placeholder: it stands for the not-yet-decided
    action of the first predicted week and is overwritten by the rollout.
    """
    if not states:
        raise ValueError("history must contain at least one state")
    recent = list(states[-h:])
    recent = [states[0]] * (h - len(recent)) + recent
    tail = list(actions[-(h - 1):]) if h > 1 else []
    padded = [ActionKind.PASSIVE] * (h - 1 - len(tail)) + tail
    return ForecastWindow(
        states=tuple(recent), actions=tuple(padded + [ActionKind.PASSIVE])
    )


def rollout_weeks_to_threshold(
    model: ForecastModel,
    history: ForecastWindow,
    first_action: ActionKind,
    threshold: float,
    cap: int,
) -> int:
    """Weeks until the predicted state first drops below the threshold.

    Step 1 applies ``first_action``; every later step is passive. Each
    prediction is appended to the rolling window. Returns the first week t
    with prediction < threshold, or cap + 1 if no crossing occurs within cap.
    """
    h = model.history_length
    if len(history.states) != h:
        raise ValueError(f"history length {len(history.states)} != model h {h}")
    states = list(history.states)
    actions = list(history.actions)
    actions[-1] = first_action
    predict = model.predict
    for week in range(1, cap + 1):
        s = predict(ForecastWindow(states, actions))
        if s < threshold:
            return week
        states = states[1:] + [s]
        actions = actions[1:] + [ActionKind.PASSIVE]
    return cap + 1


def compute_indices(
    model: ForecastModel,
    histories: Mapping[object, tuple[Sequence[float], Sequence[ActionKind]]] | Sequence[Trajectory],
    config: IndexConfig = IndexConfig(),
) -> IndexTable:
    """Rank every arm: v from the all-passive rollout, u per intervention.

    Arms are independent; each row of the table is a pure function of
    (model, that arm's history, config).
    """
    if not isinstance(histories, Mapping):
        histories = {t.beneficiary_id: (t.states, t.actions) for t in histories}
    ids = sorted(histories)
    h = model.history_length
    u_asha = np.empty(len(ids), dtype=np.int64)
    u_call = np.empty(len(ids), dtype=np.int64)
    v = np.empty(len(ids), dtype=np.int64)
    theta, cap = config.threshold, config.horizon_cap
    for k, benef_id in enumerate(ids):
        states, actions = histories[benef_id]
        window = history_window(states, actions, h)
        v[k] = rollout_weeks_to_threshold(model, window, ActionKind.PASSIVE, theta, cap)
        u_asha[k] = rollout_weeks_to_threshold(model, window, ActionKind.ASHA_VISIT, theta, cap)
        u_call[k] = rollout_weeks_to_threshold(model, window, ActionKind.CALL_REMINDER, theta, cap)
    return IndexTable(
        ids=ids,
        u_asha=u_asha,
        u_call=u_call,
        v=v,
        m_asha=u_asha / v,
        m_call=u_call / v,
    )


def write_index_csv(table: IndexTable, path: str | Path) -> None:
    """Dump the table as beneficiary_id,u_asha,u_call,v,m_asha,m_call."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beneficiary_id", "u_asha", "u_call", "v", "m_asha", "m_call"])
        for k, benef_id in enumerate(table.ids):
            writer.writerow(
                [
                    benef_id,
                    int(table.u_asha[k]),
                    int(table.u_call[k]),
                    int(table.v[k]),
                    format(table.m_asha[k], ".17g"),
                    format(table.m_call[k], ".17g"),
                ]
            )
