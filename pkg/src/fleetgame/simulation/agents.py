"""Inference and dispatch policies used by both fleets."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .._validation import N_STRATEGIES, check_mask, mask_to_indices
from ..errors import DomainError
from .fleet import MODULAR
from .records import INTELLIGENT, STOCHASTIC, BattleRecord


def _own_view(record: BattleRecord, fleet: str) -> tuple[str, int, int, bool]:
    """(own role, own strategy, adversary strategy, own win) from one fleet's side."""
    if fleet == MODULAR:
        return (record.modular_role, record.modular_strategy,
                record.conventional_strategy, record.modular_won)
    return (record.conventional_role, record.conventional_strategy,
            record.modular_strategy, not record.modular_won)


def infer_adversary(history: Sequence[BattleRecord], own_fleet: str, role: str, window: int) -> np.ndarray:
    """Add-one smoothed frequency of the adversary's strategies.

    Only the last ``window`` records in which ``own_fleet`` held ``role`` count.
    """
    if window < 1:
        raise DomainError("window must be >= 1")
    adv = [a for r in history for (rl, _, a, _) in [_own_view(r, own_fleet)] if rl == role]
    counts = np.ones(N_STRATEGIES)
    for a in adv[-window:]:
        counts[a - 1] += 1
    return counts / counts.sum()


class RunningPayoffs:
    """Running win counts per (role, own strategy, adversary strategy) for one fleet."""

    def __init__(self, fleet: str):
        self.fleet = fleet
        self.wins = {r: np.zeros((N_STRATEGIES, N_STRATEGIES)) for r in ("attacker", "defender")}
        self.counts = {r: np.zeros((N_STRATEGIES, N_STRATEGIES)) for r in ("attacker", "defender")}

    def update(self, record: BattleRecord) -> None:
        role, own, adv, won = _own_view(record, self.fleet)
        self.counts[role][own - 1, adv - 1] += 1
        self.wins[role][own - 1, adv - 1] += won

    def estimate(self, role: str) -> np.ndarray:
        """Laplace-smoothed own-win probability; 0.5 where nothing was observed."""
        return (self.wins[role] + 1) / (self.counts[role] + 2)


def select_strategy(phase: str, mask, rng: np.random.Generator,
                    adversary_dist: np.ndarray | None = None,
                    win_estimates: np.ndarray | None = None) -> int:
    """Pick a strategy index among those set in ``mask``.

    Stochastic phase: uniform over the available strategies. Intelligent phase:
    the available strategy with the highest expected win probability against
    the inferred adversary distribution; ties go to the lowest index.
    """
    available = mask_to_indices(check_mask(mask))
    if len(available) == 1:
        return available[0]
    if phase == STOCHASTIC:
        return int(available[rng.integers(len(available))])
    if phase != INTELLIGENT:
        raise DomainError(f"unknown phase {phase!r}")
    if adversary_dist is None or win_estimates is None:
        raise DomainError("intelligent selection needs an adversary distribution and win estimates")
    expected = np.asarray(win_estimates, dtype=float) @ np.asarray(adversary_dist, dtype=float)
    best = max(available, key=lambda i: (expected[i - 1], -i))
    return int(best)
