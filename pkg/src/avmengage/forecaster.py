"""One-step listenership forecasting from recent (state, action) history.

The model contract is a pure function from a history window to next week's
state in [0, 1]. A closed-form linear autoregressive baseline with action
indicator features covers desk-scale experiments; anything richer can plug in
behind the same ``predict`` contract.

Window convention: ``states`` holds the last h observed states, oldest first.
``actions[i]`` is the intervention delivered in the week *entered from*
``states[i]``; the final entry is therefore the action for the week being
predicted. Training windows built by :func:`make_windows` follow the same
alignment, so a fitted action weight measures the one-week effect of
intervening on the predicted week.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Protocol, Sequence

import numpy as np

from .cohort import ActionKind, Trajectory


class ForecastWindow(NamedTuple):
    states: tuple[float, ...]
    actions: tuple[ActionKind, ...]


class ForecastModel(Protocol):
    """Behavioral contract: a deterministic map from window to next state."""

    history_length: int

    def predict(self, window: ForecastWindow) -> float: ...


def make_windows(trajectory: Trajectory, h: int) -> list[tuple[ForecastWindow, float]]:
    """Sliding (window, next-state target) samples from one trajectory.

    A trajectory of length L yields L - h samples; shorter trajectories
    yield none.
    """
    if h < 1:
        raise ValueError("history length must be >= 1")
    states, actions = trajectory.states, trajectory.actions
    samples = []
    for j in range(h, len(states)):
        window = ForecastWindow(
            states=tuple(states[j - h : j]),
            actions=tuple(actions[j - h + 1 : j + 1]),
        )
        samples.append((window, states[j]))
    return samples


@dataclass
class LinearARModel:
    """Least-squares linear forecaster: h state lags + action indicators.

    By default the two action indicators (ASHA visit, call reminder) apply to
    the final window slot only, i.e. the action of the predicted week. With
    ``per_lag_actions`` every lag gets its own pair. Predictions clip to
    [0, 1]; states are bounded physical quantities, so no renormalization.
    """

    history_length: int
    state_weights: np.ndarray
    action_weights: np.ndarray
    intercept: float
    per_lag_actions: bool = False
    ridge_applied: bool = False

    def __post_init__(self):
        self.state_weights = np.asarray(self.state_weights, dtype=float)
        self.action_weights = np.asarray(self.action_weights, dtype=float)
        h = self.history_length
        if self.state_weights.shape != (h,):
            raise ValueError("state_weights must have one entry per lag")
        expected = 2 * h if self.per_lag_actions else 2
        if self.action_weights.shape != (expected,):
            raise ValueError(f"expected {expected} action weights")
        if not np.all(np.isfinite(self.state_weights)) or not np.all(
            np.isfinite(self.action_weights)
        ):
            raise ValueError("weights must be finite")
        # plain-float copies keep scalar prediction cheap in rollout loops
        self._sw = [float(w) for w in self.state_weights]
        self._aw = [float(w) for w in self.action_weights]
        self._b = float(self.intercept)

    def predict(self, window: ForecastWindow) -> float:
        h = self.history_length
        if len(window.states) != h or len(window.actions) != h:
            raise ValueError(f"window length {len(window.states)} != model h {h}")
        raw = self._b
        sw, states = self._sw, window.states
        for i in range(h):
            raw += sw[i] * states[i]
        if self.per_lag_actions:
            aw = self._aw
            for i, a in enumerate(window.actions):
                if a is ActionKind.ASHA_VISIT:
                    raw += aw[i]
                elif a is ActionKind.CALL_REMINDER:
                    raw += aw[h + i]
        else:
            a = window.actions[-1]
            if a is ActionKind.ASHA_VISIT:
                raw += self._aw[0]
            elif a is ActionKind.CALL_REMINDER:
                raw += self._aw[1]
        return min(max(raw, 0.0), 1.0)


def _design_row(window: ForecastWindow, h: int, per_lag: bool) -> list[float]:
    row = list(window.states)
    if per_lag:
        row += [1.0 if a is ActionKind.ASHA_VISIT else 0.0 for a in window.actions]
        row += [1.0 if a is ActionKind.CALL_REMINDER else 0.0 for a in window.actions]
    else:
        last = window.actions[-1]
        row.append(1.0 if last is ActionKind.ASHA_VISIT else 0.0)
        row.append(1.0 if last is ActionKind.CALL_REMINDER else 0.0)
    row.append(1.0)
    return row


def fit_linear_ar(
    samples: Sequence[tuple[ForecastWindow, float]],
    h: int,
    per_lag_actions: bool = False,
    ridge: float = 1e-6,
) -> LinearARModel:
    """Least-squares fit of next state on lagged states + action indicators.

    A rank-deficient design (e.g. an action never observed) falls back to a
    small ridge penalty, recorded on the returned model.
    """
    if not samples:
        raise ValueError("no training samples")
    n_params = (3 * h if per_lag_actions else h + 2) + 1
    if len(samples) < n_params:
        raise ValueError(
            f"{len(samples)} samples cannot identify {n_params} parameters; "
            "provide more trajectories"
        )
    x = np.array([_design_row(w, h, per_lag_actions) for w, _ in samples])
    y = np.array([t for _, t in samples])
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    ridge_applied = rank < n_params
    if ridge_applied:
        gram = x.T @ x + ridge * np.eye(n_params)
        coef = np.linalg.solve(gram, x.T @ y)
    n_action = 2 * h if per_lag_actions else 2
    return LinearARModel(
        history_length=h,
        state_weights=coef[:h],
        action_weights=coef[h : h + n_action],
        intercept=float(coef[-1]),
        per_lag_actions=per_lag_actions,
        ridge_applied=ridge_applied,
    )


def predict_next(model: ForecastModel, window: ForecastWindow) -> float:
    """One-step prediction through the model contract (always in [0, 1])."""
    return model.predict(window)


def evaluate_mae(model: ForecastModel, trajectories: Sequence[Trajectory]) -> float:
    """Mean absolute error of one-step predictions over all test windows."""
    errors = []
    for traj in trajectories:
        for window, target in make_windows(traj, model.history_length):
            errors.append(abs(model.predict(window) - target))
    if not errors:
        raise ValueError("no evaluation windows; trajectories too short")
    return float(np.mean(errors))


# ---------------------------------------------------------------------------
# Flat text serialization: h, state weights, action weights, intercept
# ---------------------------------------------------------------------------

def save_model(model: LinearARModel, path: str | Path) -> None:
    lines = [str(model.history_length)]
    lines += [format(w, ".17g") for w in model.state_weights]
    lines += [format(w, ".17g") for w in model.action_weights]
    lines.append(format(model.intercept, ".17g"))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LinearARModel:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if len(lines) < 4:
        raise ValueError("model file too short")
    h = int(lines[0])
    values = [float(v) for v in lines[1:]]
    n_action = len(values) - h - 1
    if n_action == 2 * h and h > 1:
        per_lag = True
    elif n_action == 2:
        per_lag = False
    else:
        raise ValueError(f"cannot infer action encoding from {n_action} action weights")
    return LinearARModel(
        history_length=h,
        state_weights=np.array(values[:h]),
        action_weights=np.array(values[h : h + n_action]),
        intercept=values[-1],
        per_lag_actions=per_lag,
    )
