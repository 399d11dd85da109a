"""Entropy-minimizing binary decision trees over battle outcomes.

Cases are described by three ordinal features (own strategy, adversary
strategy, stage in window) and a win/loss label. Splits are ``feature <= t``
conditions; the split with the lowest case-weighted child entropy wins.
"""
from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data

from .errors import DomainError
from .simulation.fleet import CONVENTIONAL, MODULAR
from .simulation.records import ATTACKER, DEFENDER, INTELLIGENT, BattleRecord

FEATURES = ("own_strategy", "adversary_strategy", "stage_in_window")
SUBSETS = (
    ("modular_defender", MODULAR, DEFENDER),
    ("conventional_defender", CONVENTIONAL, DEFENDER),
    ("modular_attacker", MODULAR, ATTACKER),
    ("conventional_attacker", CONVENTIONAL, ATTACKER),
)
_TIE_EPS = 1e-12


def entropy(win_count: int, loss_count: int) -> float:
    """Two-class Shannon entropy in bits, with 0 * log2(0) taken as 0."""
    if win_count < 0 or loss_count < 0:
        raise DomainError("counts must be non-negative")
    n = win_count + loss_count
    if n < 1:
        raise DomainError("entropy of an empty set is undefined")
    h = 0.0
    for c in (win_count, loss_count):
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


@dataclass(frozen=True)
class LabeledCase:
    features: Mapping[str, int]
    label: int

    def __post_init__(self):
        missing = set(FEATURES) - set(self.features)
        if missing:
            raise DomainError(f"case lacks features {sorted(missing)}")
        if self.label not in (0, 1):
            raise DomainError("label must be 0 or 1")


@dataclass
class DecisionNode:
    win_count: int
    loss_count: int
    split: tuple[str, int] | None = None
    left: DecisionNode | None = None
    right: DecisionNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def n(self) -> int:
        return self.win_count + self.loss_count

    @property
    def entropy(self) -> float:
        return entropy(self.win_count, self.loss_count)

    @property
    def win_fraction(self) -> float:
        return self.win_count / self.n

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def nodes(self):
        yield self
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()

    def leaves(self):
        return [node for node in self.nodes() if node.is_leaf]


def _as_arrays(cases: Sequence[LabeledCase]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[c.features[f] for f in FEATURES] for c in cases], dtype=np.int64).reshape(-1, len(FEATURES))
    y = np.array([c.label for c in cases], dtype=np.int64)
    return X, y


def _best_split_arrays(X: np.ndarray, y: np.ndarray, names: Sequence[str]):
    n = len(y)
    wins = int(y.sum())
    parent = entropy(wins, n - wins)
    best = None
    for col in sorted(range(X.shape[1]), key=lambda c: names[c]):
        values = np.unique(X[:, col])
        for t in values[:-1]:
            left = X[:, col] <= t
            nl = int(left.sum())
            wl = int(y[left].sum())
            nr, wr = n - nl, wins - wl
            h = (nl * entropy(wl, nl - wl) + nr * entropy(wr, nr - wr)) / n
            if best is None or h < best[2] - _TIE_EPS:
                best = (names[col], int(t), h)
    if best is None or not best[2] < parent - _TIE_EPS:
        return None
    return best


def best_split(cases: Sequence[LabeledCase]) -> tuple[str, int, float] | None:
    """The (feature, threshold, weighted child entropy) of the best admissible split.

    Returns ``None`` when no split strictly lowers the weighted entropy. Ties
    go to the alphabetically first feature, then the smallest threshold.
    """
    if not cases:
        raise DomainError("best_split needs at least one case")
    X, y = _as_arrays(cases)
    return _best_split_arrays(X, y, FEATURES)


def _grow(X, y, names, purity, min_samples, max_depth, depth) -> DecisionNode:
    wins = int(y.sum())
    node = DecisionNode(wins, len(y) - wins)
    if node.entropy <= purity or len(y) < min_samples or depth >= max_depth:
        return node
    split = _best_split_arrays(X, y, names)
    if split is None:
        return node
    feature, t, _ = split
    left = X[:, list(names).index(feature)] <= t
    node.split = (feature, t)
    node.left = _grow(X[left], y[left], names, purity, min_samples, max_depth, depth + 1)
    node.right = _grow(X[~left], y[~left], names, purity, min_samples, max_depth, depth + 1)
    return node


def fit_tree(cases: Sequence[LabeledCase], purity_threshold: float = 0.2,
             min_samples: int = 5, max_depth: int = 6) -> DecisionNode:
    if not cases:
        raise DomainError("cannot fit a tree to an empty case set")
    X, y = _as_arrays(cases)
    return EntropyTreeClassifier(purity_threshold, min_samples, max_depth).fit(X, y).tree_


def classify(tree: DecisionNode, features: Mapping[str, int]) -> float:
    """Win probability at the leaf reached by ``features``."""
    node = tree
    while not node.is_leaf:
        name, t = node.split
        if name not in features:
            raise DomainError(f"missing feature {name!r}")
        node = node.left if features[name] <= t else node.right
    return node.win_fraction


class EntropyTreeClassifier(ClassifierMixin, BaseEstimator):
    """Binary tree classifier with entropy splits on ordinal features.

    Parameters
    ----------
    purity_threshold : float
        A node whose entropy is at or below this value is not split further.
    min_samples : int
        Nodes with fewer cases become leaves.
    max_depth : int
        Maximum depth of the tree.
    feature_names : sequence of str, optional
        Column names used in split conditions and tie-breaking; defaults to
        ``FEATURES``.
    """

    def __init__(self, purity_threshold=0.2, min_samples=5, max_depth=6, feature_names=None):
        self.purity_threshold = purity_threshold
        self.min_samples = min_samples
        self.max_depth = max_depth
        self.feature_names = feature_names

    def _names(self, n_features):
        names = tuple(self.feature_names) if self.feature_names is not None else FEATURES
        if len(names) != n_features:
            raise DomainError(f"expected {len(names)} feature columns, got {n_features}")
        return names

    def fit(self, X, y):
        if not 0 <= self.purity_threshold <= 1:
            raise DomainError("purity_threshold must lie in [0, 1]")
        if self.min_samples < 1 or self.max_depth < 1:
            raise DomainError("min_samples and max_depth must be >= 1")
        X, y = check_X_y(X, y, dtype=np.int64)
        self.n_features_in_ = X.shape[1]
        if set(np.unique(y)) - {0, 1}:
            raise DomainError("labels must be 0/1")
        self.classes_ = np.array([0, 1])
        self.feature_names_ = self._names(X.shape[1])
        self.tree_ = _grow(X, y, self.feature_names_, self.purity_threshold,
                           self.min_samples, self.max_depth, 0)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        X = validate_data(self, X, dtype=np.int64, reset=False)
        p = np.array([classify(self.tree_, dict(zip(self.feature_names_, row))) for row in X])
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def records_to_cases(records: Iterable[BattleRecord], fleet: str, role: str) -> list[LabeledCase]:
    cases = []
    for r in records:
        if r.phase != INTELLIGENT:
            continue
        own_role = r.modular_role if fleet == MODULAR else r.conventional_role
        if own_role != role:
            continue
        if fleet == MODULAR:
            own, adv, won = r.modular_strategy, r.conventional_strategy, r.modular_won
        else:
            own, adv, won = r.conventional_strategy, r.modular_strategy, not r.modular_won
        cases.append(LabeledCase(
            {"own_strategy": own, "adversary_strategy": adv, "stage_in_window": r.stage_in_window},
            int(won),
        ))
    return cases


def partition_by_role(records: Iterable[BattleRecord]) -> dict[str, list[LabeledCase]]:
    """Intelligent-phase cases split by fleet and role, labeled from that fleet's side.

    Keys, in order: modular_defender, conventional_defender, modular_attacker,
    conventional_attacker.
    """
    records = list(records)
    return {name: records_to_cases(records, fleet, role) for name, fleet, role in SUBSETS}


# ---------------------------------------------------------------------------
# Rendering


def _condition(node: DecisionNode, left: bool) -> str:
    name, t = node.split
    return f"{name} <= {t}" if left else f"{name} > {t}"


def render_outline(tree: DecisionNode) -> str:
    """Indented outline, one node per line: condition, win/loss counts, entropy."""
    lines = []

    def walk(node, cond, depth):
        lines.append(f"{'  ' * depth}{cond} [win={node.win_count} loss={node.loss_count} "
                     f"entropy={node.entropy:.6f}]")
        if not node.is_leaf:
            walk(node.left, _condition(node, True), depth + 1)
            walk(node.right, _condition(node, False), depth + 1)

    walk(tree, "root", 0)
    return "\n".join(lines) + "\n"


def render_dot(tree: DecisionNode, name: str = "tree") -> str:
    """Graphviz description of the tree."""
    lines = [f"digraph {name} {{", "  node [shape=box];"]
    counter = iter(range(10**9))

    def walk(node):
        k = next(counter)
        label = f"win={node.win_count}\\nloss={node.loss_count}\\nentropy={node.entropy:.3f}"
        lines.append(f'  n{k} [label="{label}"];')
        if not node.is_leaf:
            left, right = walk(node.left), walk(node.right)
            lines.append(f'  n{k} -> n{left} [label="{_condition(node, True)}"];')
            lines.append(f'  n{k} -> n{right} [label="{_condition(node, False)}"];')
        return k

    walk(tree)
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_tree(tree: DecisionNode, name: str = "tree") -> tuple[str, str]:
    return render_outline(tree), render_dot(tree, name)


_OUTLINE_LINE = re.compile(r"^( *)(\S.*?) \[win=(\d+) loss=(\d+) entropy=[0-9.]+\]$")


def parse_outline(text: str) -> DecisionNode:
    """Rebuild a tree from :func:`render_outline` output."""
    stack: list[tuple[int, DecisionNode]] = []
    root = None
    for line in text.splitlines():
        m = _OUTLINE_LINE.match(line)
        if not m:
            raise DomainError(f"unparseable outline line: {line!r}")
        depth = len(m.group(1)) // 2
        node = DecisionNode(int(m.group(3)), int(m.group(4)))
        cond = m.group(2)
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if depth == 0:
            root = node
        else:
            parent = stack[-1][1]
            if cond.split()[1] == "<=":
                name, _, t = cond.split()
                parent.split = (name, int(t))
                parent.left = node
            else:
                parent.right = node
        stack.append((depth, node))
    if root is None:
        raise DomainError("empty outline")
    return root
