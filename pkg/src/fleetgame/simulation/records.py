"""Battle records and the line-delimited battle-log format.

One engagement per line, tab separated, UTF-8, no header. Field order is
``LOG_FIELDS``. Masks are 10-character 0/1 strings with strategy 1 leftmost,
booleans are ``1``/``0``.
"""
from __future__ import annotations

import io
import os
import tempfile
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from .._validation import check_strategy_index, mask_from_string, mask_to_string
from ..errors import DataError, DomainError

STOCHASTIC = "stochastic"
INTELLIGENT = "intelligent"
ATTACKER = "attacker"
DEFENDER = "defender"
PHASES = (STOCHASTIC, INTELLIGENT)
ROLES = (ATTACKER, DEFENDER)

LOG_FIELDS = (
    "engagement_index",
    "phase",
    "stage_in_window",
    "modular_role",
    "modular_strategy",
    "conventional_strategy",
    "modular_won",
    "modular_avail_mask",
    "conventional_avail_mask",
    "modular_next_mask",
    "conventional_next_mask",
)


def other_role(role: str) -> str:
    return DEFENDER if role == ATTACKER else ATTACKER


@dataclass(frozen=True)
class BattleRecord:
    engagement_index: int
    phase: str
    stage_in_window: int
    modular_role: str
    modular_strategy: int
    conventional_strategy: int
    modular_won: bool
    modular_avail_mask: int
    conventional_avail_mask: int
    modular_next_mask: int
    conventional_next_mask: int

    def __post_init__(self):
        if self.engagement_index < 0:
            raise DomainError("engagement_index must be >= 0")
        if self.phase not in PHASES:
            raise DomainError(f"unknown phase {self.phase!r}")
        if self.stage_in_window not in (1, 2, 3):
            raise DomainError("stage_in_window must be 1, 2 or 3")
        if self.modular_role not in ROLES:
            raise DomainError(f"unknown role {self.modular_role!r}")
        check_strategy_index(self.modular_strategy)
        check_strategy_index(self.conventional_strategy)
        if not self.modular_avail_mask >> (self.modular_strategy - 1) & 1:
            raise DomainError("modular strategy is not in its availability mask")
        if not self.conventional_avail_mask >> (self.conventional_strategy - 1) & 1:
            raise DomainError("conventional strategy is not in its availability mask")

    @property
    def conventional_role(self) -> str:
        return other_role(self.modular_role)

    @property
    def profile(self) -> tuple[int, int]:
        return self.modular_strategy, self.conventional_strategy

    @property
    def avail_class(self) -> tuple[int, int]:
        return self.modular_avail_mask, self.conventional_avail_mask

    @property
    def next_class(self) -> tuple[int, int]:
        return self.modular_next_mask, self.conventional_next_mask

    def to_line(self) -> str:
        return "\t".join(
            (
                str(self.engagement_index),
                self.phase,
                str(self.stage_in_window),
                self.modular_role,
                str(self.modular_strategy),
                str(self.conventional_strategy),
                "1" if self.modular_won else "0",
                mask_to_string(self.modular_avail_mask),
                mask_to_string(self.conventional_avail_mask),
                mask_to_string(self.modular_next_mask),
                mask_to_string(self.conventional_next_mask),
            )
        )

    @classmethod
    def from_line(cls, line: str) -> BattleRecord:
        parts = line.rstrip("\n").split("\t")
        if len(parts) != len(LOG_FIELDS):
            raise DataError(f"expected {len(LOG_FIELDS)} fields, got {len(parts)}")
        try:
            won = {"1": True, "0": False}[parts[6]]
            return cls(
                engagement_index=int(parts[0]),
                phase=parts[1],
                stage_in_window=int(parts[2]),
                modular_role=parts[3],
                modular_strategy=int(parts[4]),
                conventional_strategy=int(parts[5]),
                modular_won=won,
                modular_avail_mask=mask_from_string(parts[7]),
                conventional_avail_mask=mask_from_string(parts[8]),
                modular_next_mask=mask_from_string(parts[9]),
                conventional_next_mask=mask_from_string(parts[10]),
            )
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed battle-log line: {line!r}") from exc


def format_log(records: Iterable[BattleRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


def parse_log(text: str) -> list[BattleRecord]:
    return [BattleRecord.from_line(line) for line in io.StringIO(text) if line.strip()]


def atomic_write_text(path, text: str) -> None:
    """Write to a sibling temp file and rename, so readers never see partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_log(path, records: Iterable[BattleRecord]) -> None:
    atomic_write_text(path, format_log(records))


def read_log(path) -> list[BattleRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh.read())
