"""Payoff-matrix and transition estimation from battle logs, and the stage-game tree.

Rows are always modular strategies, columns conventional strategies. A cell's
modular payoff is the percentage of observed engagements with that strategy
profile that the modular fleet won.
"""
from __future__ import annotations

import io
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    N_STRATEGIES,
    check_mask,
    mask_from_string,
    mask_to_bool,
    mask_to_string,
)
from .errors import DataError, DomainError
from .simulation.records import ATTACKER, DEFENDER, INTELLIGENT, BattleRecord

FALLBACK_PAYOFF = 50.0
FLAG_OK, FLAG_NO_DATA, FLAG_UNAVAILABLE = "ok", "no_data", "unavailable"


@dataclass
class PayoffMatrix:
    """10x10 grid of (modular, conventional) win percentages.

    ``no_data`` marks available cells never observed (they hold the fallback
    pair); unavailable cells hold (0, 0).
    """

    r_mod: np.ndarray
    r_conv: np.ndarray
    support_counts: np.ndarray
    modular_mask: int
    conventional_mask: int
    no_data: np.ndarray
    modular_role: str | None = None

    @property
    def available(self) -> np.ndarray:
        return np.outer(mask_to_bool(self.modular_mask), mask_to_bool(self.conventional_mask))

    @property
    def populated(self) -> bool:
        return bool(self.support_counts.sum() > 0)

    def flag(self, i: int, j: int) -> str:
        """Flag of the cell for 1-based strategies ``i`` (modular), ``j`` (conventional)."""
        if not self.available[i - 1, j - 1]:
            return FLAG_UNAVAILABLE
        return FLAG_NO_DATA if self.no_data[i - 1, j - 1] else FLAG_OK

    def with_payoffs(self, r_mod: np.ndarray, r_conv: np.ndarray) -> PayoffMatrix:
        return PayoffMatrix(r_mod, r_conv, self.support_counts, self.modular_mask,
                            self.conventional_mask, self.no_data, self.modular_role)

    def render(self) -> str:
        """Table-style rendering: one ``(r_mod,r_conv)`` pair per cell, ``--`` if unavailable."""
        head = "     " + "".join(f"{f'd{j}' if self.modular_role == ATTACKER else f'c{j}':>12}"
                                 for j in range(1, N_STRATEGIES + 1))
        lines = [head]
        for i in range(1, N_STRATEGIES + 1):
            label = f"a{i}" if self.modular_role == ATTACKER else (f"d{i}" if self.modular_role else f"m{i}")
            cells = []
            for j in range(1, N_STRATEGIES + 1):
                flag = self.flag(i, j)
                if flag == FLAG_UNAVAILABLE:
                    cells.append("--")
                else:
                    txt = f"({self.r_mod[i-1, j-1]:.0f},{self.r_conv[i-1, j-1]:.0f})"
                    cells.append(txt + ("*" if flag == FLAG_NO_DATA else ""))
            lines.append(f"{label:<5}" + "".join(f"{c:>12}" for c in cells))
        lines.append("(* = no data, fallback value; -- = unavailable)")
        return "\n".join(lines) + "\n"


def fallback_matrix(modular_mask: int, conventional_mask: int, modular_role: str | None = None) -> PayoffMatrix:
    """Matrix for an availability class with no observations."""
    avail = np.outer(mask_to_bool(modular_mask), mask_to_bool(conventional_mask))
    r = np.where(avail, FALLBACK_PAYOFF, 0.0)
    return PayoffMatrix(r.copy(), r.copy(), np.zeros((N_STRATEGIES, N_STRATEGIES), dtype=np.int64),
                        modular_mask, conventional_mask, avail.copy(), modular_role)


class PayoffMatrixEstimator(BaseEstimator):
    """Estimate a payoff matrix from observed strategy profiles and outcomes.

    ``fit(X, y)`` takes ``X`` of shape (n, 2) with 1-based (modular,
    conventional) strategy indices and ``y`` the modular-win indicator.
    Masks default to every strategy available.
    """

    def __init__(self, modular_mask=None, conventional_mask=None, modular_role=None,
                 fallback=FALLBACK_PAYOFF):
        self.modular_mask = modular_mask
        self.conventional_mask = conventional_mask
        self.modular_role = modular_role
        self.fallback = fallback

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.int64).reshape(-1, 2)
        y = np.asarray(y, dtype=bool).ravel()
        if len(X) == 0:
            raise DomainError("cannot estimate a payoff matrix from zero records")
        if len(X) != len(y):
            raise DomainError("X and y differ in length")
        if X.min() < 1 or X.max() > N_STRATEGIES:
            raise DomainError("strategy indices must lie in 1..10")
        full = (1 << N_STRATEGIES) - 1
        mm = full if self.modular_mask is None else check_mask(self.modular_mask)
        cm = full if self.conventional_mask is None else check_mask(self.conventional_mask)
        n = np.zeros((N_STRATEGIES, N_STRATEGIES), dtype=np.int64)
        w = np.zeros((N_STRATEGIES, N_STRATEGIES), dtype=np.int64)
        np.add.at(n, (X[:, 0] - 1, X[:, 1] - 1), 1)
        np.add.at(w, (X[:, 0] - 1, X[:, 1] - 1), y.astype(np.int64))
        avail = np.outer(mask_to_bool(mm), mask_to_bool(cm))
        if np.any(n[~avail]):
            raise DataError("observed profile uses an unavailable strategy")
        with np.errstate(invalid="ignore", divide="ignore"):
            r_mod = np.where(n > 0, 100.0 * w / np.maximum(n, 1), self.fallback)
        r_mod = np.where(avail, r_mod, 0.0)
        r_conv = np.where(avail, 100.0 - r_mod, 0.0)
        r_conv = np.where(avail & (n == 0), 100.0 - self.fallback, r_conv)
        self.payoff_matrix_ = PayoffMatrix(r_mod, r_conv, n, mm, cm, avail & (n == 0), self.modular_role)
        return self

    def predict_proba(self, X):
        """Estimated modular win probability for each (i, j) profile."""
        check_is_fitted(self, "payoff_matrix_")
        X = np.asarray(X, dtype=np.int64).reshape(-1, 2)
        return self.payoff_matrix_.r_mod[X[:, 0] - 1, X[:, 1] - 1] / 100.0


def _select(records: Iterable[BattleRecord], modular_role: str | None, avail_class, phase: str | None):
    out = []
    for r in records:
        if phase is not None and r.phase != phase:
            continue
        if modular_role is not None and r.modular_role != modular_role:
            continue
        if avail_class is not None and r.avail_class != tuple(avail_class):
            continue
        out.append(r)
    return out


def estimate_payoff_matrix(records: Iterable[BattleRecord], modular_role: str | None = None,
                           avail_class: tuple[int, int] | None = None,
                           phase: str | None = INTELLIGENT) -> PayoffMatrix:
    """Payoff matrix of the records matching the filter.

    With ``avail_class`` the class masks define availability; without it the
    matrix pools all classes and a strategy counts as available if any
    matching record had it available.
    """
    if modular_role not in (None, ATTACKER, DEFENDER):
        raise DomainError(f"unknown role {modular_role!r}")
    chosen = _select(records, modular_role, avail_class, phase)
    if not chosen:
        raise DomainError("no records match the payoff-matrix filter")
    if avail_class is not None:
        mm, cm = avail_class
    else:
        mm = cm = 0
        for r in chosen:
            mm |= r.modular_avail_mask
            cm |= r.conventional_avail_mask
    est = PayoffMatrixEstimator(mm, cm, modular_role).fit(
        [r.profile for r in chosen], [r.modular_won for r in chosen])
    return est.payoff_matrix_


# ---------------------------------------------------------------------------
# Availability classes and transitions


@dataclass(frozen=True)
class AvailabilityClass:
    id: int
    modular_mask: int
    conventional_mask: int

    def __post_init__(self):
        check_mask(self.modular_mask, "modular mask")
        check_mask(self.conventional_mask, "conventional mask")


def intern_classes(records: Iterable[BattleRecord]) -> dict[tuple[int, int], AvailabilityClass]:
    """Number every distinct (modular mask, conventional mask) pair, current or next."""
    pairs = set()
    for r in records:
        pairs.add(r.avail_class)
        pairs.add(r.next_class)
    return {p: AvailabilityClass(k, *p) for k, p in enumerate(sorted(pairs))}


@dataclass
class TransitionTable:
    """Empirical p(next class | stage, class, modular strategy, conventional strategy).

    Conditionals never observed fall back to staying in the same class.
    """

    counts: dict[tuple[int, int, int, int], Counter] = field(default_factory=dict)

    def add(self, stage: int, k: int, i: int, j: int, k_next: int, n: int = 1) -> None:
        self.counts.setdefault((stage, k, i, j), Counter())[k_next] += n

    def observed(self, stage: int, k: int, i: int, j: int) -> bool:
        return (stage, k, i, j) in self.counts

    def distribution(self, stage: int, k: int, i: int, j: int) -> dict[int, float]:
        c = self.counts.get((stage, k, i, j))
        if not c:
            return {k: 1.0}
        total = sum(c.values())
        return {k2: n / total for k2, n in sorted(c.items())}

    @property
    def probabilities(self) -> dict[tuple[int, int, int, int], dict[int, float]]:
        return {key: self.distribution(*key) for key in sorted(self.counts)}

    def successors(self, stage: int, k: int) -> set[int]:
        return {k2 for (s, kk, _, _), c in self.counts.items() if s == stage and kk == k for k2 in c}


def estimate_transitions(records: Iterable[BattleRecord],
                         classes: Mapping[tuple[int, int], AvailabilityClass] | None = None) -> TransitionTable:
    """Count class transitions keyed by (stage in window, class, i, j)."""
    records = list(records)
    if not records:
        raise DomainError("cannot estimate transitions from zero records")
    classes = classes or intern_classes(records)
    table = TransitionTable()
    for r in records:
        try:
            k, k2 = classes[r.avail_class].id, classes[r.next_class].id
        except KeyError as exc:
            raise DataError(f"record class {exc} is not interned") from exc
        table.add(r.stage_in_window, k, r.modular_strategy, r.conventional_strategy, k2)
    return table


def propagate_stage_payoffs(stage_matrices: Mapping[int, PayoffMatrix], transitions: TransitionTable,
                            continuation_values: Mapping[int, tuple[float, float]],
                            stage: int) -> dict[int, PayoffMatrix]:
    """Add expected next-stage values to every available cell of each class matrix.

    Cell (i, j) of class k gains ``sum_k' p(k' | stage, k, i, j) * value(k')``
    per player. Unavailable cells stay (0, 0).
    """
    out = {}
    for k, M in stage_matrices.items():
        add_mod = np.zeros((N_STRATEGIES, N_STRATEGIES))
        add_conv = np.zeros((N_STRATEGIES, N_STRATEGIES))
        avail = M.available
        for i, j in zip(*np.nonzero(avail)):
            for k2, p in transitions.distribution(stage, k, i + 1, j + 1).items():
                if p <= 0:
                    continue
                if k2 not in continuation_values:
                    raise DomainError(f"no continuation value for reachable class {k2}")
                v_mod, v_conv = continuation_values[k2]
                add_mod[i, j] += p * v_mod
                add_conv[i, j] += p * v_conv
        out[k] = M.with_payoffs(np.where(avail, M.r_mod + add_mod, 0.0),
                                np.where(avail, M.r_conv + add_conv, 0.0))
    return out


# ---------------------------------------------------------------------------
# Stage-game tree


def check_schedule(schedule: str) -> str:
    schedule = schedule.upper()
    if not 1 <= len(schedule) <= 3 or set(schedule) - {"A", "D"}:
        raise DomainError(f"role schedule must be 1-3 characters over A/D, got {schedule!r}")
    return schedule


def schedule_role(schedule: str, stage: int) -> str:
    return ATTACKER if schedule[stage - 1] == "A" else DEFENDER


@dataclass
class StageGameTree:
    role_schedule: str
    classes: dict[int, AvailabilityClass]
    matrices: dict[tuple[int, int], PayoffMatrix]
    transitions: TransitionTable
    initial: dict[int, int]

    @property
    def n_stages(self) -> int:
        return len(self.role_schedule)

    def stage_classes(self, stage: int) -> list[int]:
        return sorted(k for s, k in self.matrices if s == stage)

    def stage_matrices(self, stage: int) -> dict[int, PayoffMatrix]:
        return {k: self.matrices[(stage, k)] for k in self.stage_classes(stage)}

    def unpopulated(self) -> list[tuple[int, int]]:
        return sorted(key for key, M in self.matrices.items() if not M.populated)

    def truncate(self, horizon: int) -> StageGameTree:
        if not 1 <= horizon <= self.n_stages:
            raise DomainError(f"horizon must lie in 1..{self.n_stages}")
        return StageGameTree(
            self.role_schedule[:horizon], self.classes,
            {key: M for key, M in self.matrices.items() if key[0] <= horizon},
            self.transitions, self.initial,
        )

    def validate(self) -> StageGameTree:
        check_schedule(self.role_schedule)
        for t in range(1, self.n_stages):
            for k in self.stage_classes(t):
                M = self.matrices[(t, k)]
                for i, j in zip(*np.nonzero(M.available)):
                    for k2 in self.transitions.distribution(t, k, i + 1, j + 1):
                        if (t + 1, k2) not in self.matrices:
                            raise DomainError(f"class {k2} reachable at stage {t + 1} has no matrix")
        for M in self.matrices.values():
            if M.r_mod.shape != (N_STRATEGIES, N_STRATEGIES):
                raise DomainError("every stage matrix must be 10x10")
        return self

    # -- text format ------------------------------------------------------

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("# fleetgame stage-game tree\n")
        buf.write(f"schedule\t{self.role_schedule}\n")
        for k in sorted(self.classes):
            c = self.classes[k]
            buf.write(f"class\t{k}\t{mask_to_string(c.modular_mask)}\t{mask_to_string(c.conventional_mask)}\n")
        for k in sorted(self.initial):
            buf.write(f"initial\t{k}\t{self.initial[k]}\n")
        for (t, k) in sorted(self.matrices):
            M = self.matrices[(t, k)]
            for i in range(1, N_STRATEGIES + 1):
                for j in range(1, N_STRATEGIES + 1):
                    buf.write(f"cell\t{t}\t{k}\t{i}\t{j}\t{float(M.r_mod[i-1, j-1])!r}\t{float(M.r_conv[i-1, j-1])!r}"
                              f"\t{M.support_counts[i-1, j-1]}\t{M.flag(i, j)}\n")
        for key in sorted(self.transitions.counts):
            dist = self.transitions.distribution(*key)
            for k2, n in sorted(self.transitions.counts[key].items()):
                buf.write("trans\t" + "\t".join(map(str, key)) + f"\t{k2}\t{float(dist[k2])!r}\t{n}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> StageGameTree:
        schedule, classes, initial = None, {}, {}
        cells: dict[tuple[int, int], list] = {}
        transitions = TransitionTable()
        try:
            for line in text.splitlines():
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                kind = parts[0]
                if kind == "schedule":
                    schedule = check_schedule(parts[1])
                elif kind == "class":
                    k = int(parts[1])
                    classes[k] = AvailabilityClass(k, mask_from_string(parts[2]), mask_from_string(parts[3]))
                elif kind == "initial":
                    initial[int(parts[1])] = int(parts[2])
                elif kind == "cell":
                    t, k, i, j = map(int, parts[1:5])
                    cells.setdefault((t, k), []).append(
                        (i, j, float(parts[5]), float(parts[6]), int(parts[7]), parts[8]))
                elif kind == "trans":
                    t, k, i, j, k2 = map(int, parts[1:6])
                    transitions.add(t, k, i, j, k2, int(parts[7]))
                else:
                    raise DataError(f"unknown line kind {kind!r}")
        except (IndexError, ValueError) as exc:
            raise DataError(f"malformed game file: {exc}") from exc
        if schedule is None:
            raise DataError("game file lacks a schedule line")
        matrices = {}
        for (t, k), rows in cells.items():
            if len(rows) != N_STRATEGIES ** 2 or k not in classes:
                raise DataError(f"incomplete matrix for stage {t}, class {k}")
            shape = (N_STRATEGIES, N_STRATEGIES)
            r_mod, r_conv = np.zeros(shape), np.zeros(shape)
            support, no_data = np.zeros(shape, dtype=np.int64), np.zeros(shape, dtype=bool)
            for i, j, a, b, n, flag in rows:
                r_mod[i-1, j-1], r_conv[i-1, j-1], support[i-1, j-1] = a, b, n
                no_data[i-1, j-1] = flag == FLAG_NO_DATA
            c = classes[k]
            matrices[(t, k)] = PayoffMatrix(r_mod, r_conv, support, c.modular_mask,
                                            c.conventional_mask, no_data, schedule_role(schedule, t))
        return cls(schedule, classes, matrices, transitions, initial).validate()


def stage_windows(records: Sequence[BattleRecord], n_stages: int = 3) -> list[tuple[BattleRecord, ...]]:
    """Consecutive non-overlapping windows of ``n_stages`` intelligent engagements.

    A window starts at a record with ``stage_in_window == 1`` and continues
    through consecutive engagement indices; logs may be concatenated.
    """
    out = []
    records = list(records)
    for a in range(len(records) - n_stages + 1):
        first = records[a]
        if first.stage_in_window != 1:
            continue
        window = tuple(records[a:a + n_stages])
        if all(r.phase == INTELLIGENT for r in window) and all(
            r.stage_in_window == s + 1 and r.engagement_index == first.engagement_index + s
            for s, r in enumerate(window)
        ):
            out.append(window)
    return out


def build_three_stage_game(records: Sequence[BattleRecord], role_schedule: str = "AAD") -> StageGameTree:
    """Assemble the stage-game tree from windows whose modular roles follow the schedule.

    Classes reachable at a later stage but never observed there get flagged
    fallback matrices.
    """
    schedule = check_schedule(role_schedule)
    n_stages = len(schedule)
    windows = stage_windows(records, n_stages)
    if not windows:
        raise DomainError("no complete intelligent-phase window in the records")
    roles = tuple(schedule_role(schedule, t) for t in range(1, n_stages + 1))
    windows = [w for w in windows if tuple(r.modular_role for r in w) == roles]
    if not windows:
        raise DomainError(f"no window matches the role schedule {schedule}")
    flat = [r for w in windows for r in w]
    interned = intern_classes(flat)
    classes = {c.id: c for c in interned.values()}

    matrices: dict[tuple[int, int], PayoffMatrix] = {}
    for t in range(1, n_stages + 1):
        stage_records = [w[t - 1] for w in windows]
        for pair in sorted({r.avail_class for r in stage_records}):
            M = estimate_payoff_matrix(stage_records, roles[t - 1], pair)
            matrices[(t, interned[pair].id)] = M

    transitions = TransitionTable()
    for w in windows:
        for t in range(1, n_stages):
            r = w[t - 1]
            transitions.add(t, interned[r.avail_class].id, r.modular_strategy,
                            r.conventional_strategy, interned[r.next_class].id)

    for t in range(1, n_stages):
        for k in sorted(k for s, k in matrices if s == t):
            reach = transitions.successors(t, k) | {k}
            for k2 in sorted(reach):
                if (t + 1, k2) not in matrices:
                    c = classes[k2]
                    matrices[(t + 1, k2)] = fallback_matrix(c.modular_mask, c.conventional_mask, roles[t])

    initial = Counter(interned[w[0].avail_class].id for w in windows)
    return StageGameTree(schedule, classes, matrices, transitions, dict(sorted(initial.items()))).validate()


def read_game(path) -> StageGameTree:
    with open(path, encoding="utf-8") as fh:
        return StageGameTree.from_text(fh.read())
