"""Attack and defense strategy bands and classification of convoy safety levels.

A safety level is the ratio between a convoy's realized attribute (firepower or
capacity) and the demand's requirement. Each strategy is a half-open band of
safety levels; the attacker is constrained on firepower only, the defender on
both firepower and capacity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ._validation import N_STRATEGIES, check_nonnegative, check_strategy_index
from .errors import DomainError

INF = math.inf


@dataclass(frozen=True)
class SafetyBand:
    """Half-open interval ``lo <= x < hi`` of safety levels."""

    lo: float
    hi: float = INF

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi > self.lo):
            raise DomainError(f"invalid band [{self.lo}, {self.hi})")

    def __contains__(self, x: float) -> bool:
        return self.lo <= x < self.hi

    def __str__(self) -> str:
        hi = "inf" if math.isinf(self.hi) else f"{self.hi:g}"
        return f"[{self.lo:g}, {hi})"


@dataclass(frozen=True)
class AttackStrategy:
    index: int
    firepower_band: SafetyBand


@dataclass(frozen=True)
class DefenseStrategy:
    index: int
    firepower_band: SafetyBand
    capacity_band: SafetyBand


@dataclass(frozen=True)
class SafetyLevel:
    firepower: float
    capacity: float

    def __post_init__(self):
        check_nonnegative(self.firepower, "firepower safety level")
        check_nonnegative(self.capacity, "capacity safety level")


ATTACK_STRATEGIES: tuple[AttackStrategy, ...] = tuple(
    AttackStrategy(i + 1, SafetyBand(0.5 * i, 0.5 * (i + 1) if i < 9 else INF))
    for i in range(N_STRATEGIES)
)

_FP_TIERS = (SafetyBand(1.0, 1.5), SafetyBand(1.5, 2.0), SafetyBand(2.0))
_CAP_CYCLE = (SafetyBand(1.0, 1.5), SafetyBand(1.5, 2.0), SafetyBand(2.0))

# d1 is the give-up strategy; d2..d10 cycle capacity within each firepower tier.
DEFENSE_STRATEGIES: tuple[DefenseStrategy, ...] = (
    DefenseStrategy(1, SafetyBand(0.0, 1.0), SafetyBand(0.0, 1.0)),
    *(
        DefenseStrategy(2 + 3 * t + c, fp, cap)
        for t, fp in enumerate(_FP_TIERS)
        for c, cap in enumerate(_CAP_CYCLE)
    ),
)


def attack_band(index: int) -> SafetyBand:
    return ATTACK_STRATEGIES[check_strategy_index(index) - 1].firepower_band


def defense_bands(index: int) -> tuple[SafetyBand, SafetyBand]:
    """Return the ``(firepower_band, capacity_band)`` of a defense strategy."""
    d = DEFENSE_STRATEGIES[check_strategy_index(index) - 1]
    return d.firepower_band, d.capacity_band


def classify_attack(firepower_safety: float) -> int:
    x = check_nonnegative(firepower_safety, "firepower safety level")
    for s in ATTACK_STRATEGIES:
        if x in s.firepower_band:
            return s.index
    raise AssertionError("attack bands must tile [0, inf)")  # pragma: no cover


def classify_defense(level: SafetyLevel | tuple[float, float]) -> int:
    """Map a (firepower, capacity) safety level to a defense strategy.

    Table gaps are closed by the give-up rule: any level with firepower < 1 or
    capacity < 1 is strategy 1.
    """
    if not isinstance(level, SafetyLevel):
        level = SafetyLevel(*level)
    fp, cap = level.firepower, level.capacity
    if fp < 1.0 or cap < 1.0:
        return 1
    for s in DEFENSE_STRATEGIES[1:]:
        if fp in s.firepower_band and cap in s.capacity_band:
            return s.index
    raise AssertionError("defense bands must cover [1, inf)^2")  # pragma: no cover


def format_strategy_table() -> str:
    """Tab-separated audit dump of both strategy tables."""
    lines = ["role\tindex\tfirepower\tcapacity"]
    for s in ATTACK_STRATEGIES:
        lines.append(f"attack\t{s.index}\t{s.firepower_band}\t-")
    for s in DEFENSE_STRATEGIES:
        lines.append(f"defense\t{s.index}\t{s.firepower_band}\t{s.capacity_band}")
    return "\n".join(lines) + "\n"
