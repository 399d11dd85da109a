import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import exhaustive_split, h2
from sklearn.base import clone

from fleetgame.errors import DomainError
from fleetgame.simulation.records import (
    ATTACKER,
    DEFENDER,
    INTELLIGENT,
    STOCHASTIC,
    BattleRecord,
)
from fleetgame.trees import (
    FEATURES,
    DecisionNode,
    EntropyTreeClassifier,
    LabeledCase,
    best_split,
    classify,
    entropy,
    fit_tree,
    parse_outline,
    partition_by_role,
    render_dot,
    render_outline,
)


def case(own, adv=1, stage=1, label=1):
    return LabeledCase({"own_strategy": own, "adversary_strategy": adv, "stage_in_window": stage}, label)


def random_cases(rng, n):
    return [case(rng.randint(1, 10), rng.randint(1, 10), rng.randint(1, 3), rng.randint(0, 1))
            for _ in range(n)]


SEPARABLE = [case(own, label=int(own <= 3)) for own in range(1, 11) for _ in range(2)]


def hp_entropy(w, l):
    mpmath.mp.dps = 40
    n = mpmath.mpf(w + l)
    return float(-sum(c / n * mpmath.log(c / n, 2) for c in (w, l) if c))


# -- entropy ------------------------------------------------------------------

def test_entropy_fixed_points():
    assert entropy(1, 1) == 1.0
    assert entropy(7, 0) == 0.0
    assert entropy(0, 3) == 0.0


def test_entropy_against_high_precision():
    assert abs(entropy(89, 11) - hp_entropy(89, 11)) < 1e-6
    assert entropy(89, 11) == pytest.approx(0.499916, abs=1e-6)


@given(st.integers(0, 500), st.integers(0, 500))
def test_entropy_bounds(w, l):
    if w + l == 0:
        with pytest.raises(DomainError):
            entropy(w, l)
        return
    h = entropy(w, l)
    assert 0.0 <= h <= 1.0
    assert (h == 0.0) == (w == 0 or l == 0)
    assert (abs(h - 1.0) < 1e-15) == (w == l)
    assert h == pytest.approx(hp_entropy(w, l), abs=1e-12)


# -- best split -----------------------------------------------------------------

def oracle_best(cases):
    rows = [tuple(c.features[f] for f in FEATURES) for c in cases]
    labels = [c.label for c in cases]
    cuts = exhaustive_split(rows, labels, FEATURES)
    parent = h2(sum(labels), len(labels) - sum(labels))
    if not cuts:
        return None
    h_min = min(h for h, _, _ in cuts)
    if not h_min < parent - 1e-12:
        return None
    name, t = min((name, t) for h, name, t in cuts if h <= h_min + 1e-12)
    return name, t, h_min


def test_pure_set_has_no_split():
    assert best_split([case(k, label=1) for k in range(1, 8)]) is None


def test_separable_split():
    assert best_split(SEPARABLE) == ("own_strategy", 3, 0.0)


def test_forty_case_set_matches_oracle():
    cases = random_cases(random.Random(40), 40)
    got, want = best_split(cases), oracle_best(cases)
    assert got[:2] == want[:2] and got[2] == pytest.approx(want[2], abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_best_split_matches_exhaustive_scan(seed):
    rng = random.Random(seed)
    cases = random_cases(rng, rng.randint(1, 200))
    got, want = best_split(cases), oracle_best(cases)
    if want is None:
        assert got is None
    else:
        assert got[:2] == want[:2]
        assert got[2] == pytest.approx(want[2], abs=1e-12)


def test_empty_split_input():
    with pytest.raises(DomainError):
        best_split([])


# -- fitting ---------------------------------------------------------------------

def check_tree_invariants(tree):
    for node in tree.nodes():
        if node.is_leaf:
            continue
        assert node.win_count == node.left.win_count + node.right.win_count
        assert node.loss_count == node.left.loss_count + node.right.loss_count
        weighted = (node.left.n * node.left.entropy + node.right.n * node.right.entropy) / node.n
        assert weighted < node.entropy


def test_pure_input_is_a_leaf():
    tree = fit_tree([case(k, label=0) for k in range(1, 9)])
    assert tree.is_leaf and tree.n == 8


def test_separable_input_depth_one():
    tree = fit_tree(SEPARABLE, purity_threshold=0.0, min_samples=1)
    assert tree.depth() == 1
    assert tree.split == ("own_strategy", 3)
    assert [leaf.entropy for leaf in tree.leaves()] == [0.0, 0.0]
    assert classify(tree, {"own_strategy": 2}) == 1.0


@pytest.mark.parametrize("seed", range(20))
def test_random_fits_decrease_entropy(seed):
    cases = random_cases(random.Random(1000 + seed), 200)
    tree = fit_tree(cases, purity_threshold=0.3, min_samples=5)
    check_tree_invariants(tree)
    assert tree.n == 200
    assert tree.depth() <= 6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_fit_is_order_independent(seed):
    rng = random.Random(seed)
    cases = random_cases(rng, 80)
    shuffled = cases[:]
    rng.shuffle(shuffled)
    a = fit_tree(cases, purity_threshold=0.1, min_samples=2)
    b = fit_tree(shuffled, purity_threshold=0.1, min_samples=2)
    assert render_outline(a) == render_outline(b)


def test_leaf_probability_matches_routed_cases():
    cases = random_cases(random.Random(5), 150)
    tree = fit_tree(cases)
    routed = {}
    for c in cases:
        node = tree
        while not node.is_leaf:
            name, t = node.split
            node = node.left if c.features[name] <= t else node.right
        routed.setdefault(id(node), []).append(c.label)
    for c in cases:
        p = classify(tree, c.features)
        assert any(abs(p - np.mean(v)) < 1e-15 for v in routed.values())


def test_classify_missing_feature():
    tree = fit_tree(SEPARABLE, purity_threshold=0.0, min_samples=1)
    with pytest.raises(DomainError):
        classify(tree, {"adversary_strategy": 1})
    assert classify(DecisionNode(3, 0), {}) == 1.0


def test_fit_rejects_empty():
    with pytest.raises(DomainError):
        fit_tree([])


def test_case_validation():
    with pytest.raises(DomainError):
        LabeledCase({"own_strategy": 1}, 1)
    with pytest.raises(DomainError):
        case(1, label=2)


# -- partition ---------------------------------------------------------------------

def rec(e, role, phase=INTELLIGENT, won=True):
    return BattleRecord(e, phase, e % 3 + 1, role, 4, 6, won, 1023, 1023, 1023, 1023)


def test_all_stochastic_partition_is_empty():
    parts = partition_by_role([rec(e, ATTACKER, STOCHASTIC) for e in range(5)])
    assert list(parts) == ["modular_defender", "conventional_defender",
                           "modular_attacker", "conventional_attacker"]
    assert all(v == [] for v in parts.values())


def test_single_record_partition():
    parts = partition_by_role([rec(0, ATTACKER)])
    assert parts["modular_attacker"] == [case(4, 6, 1, 1)]
    assert parts["conventional_defender"] == [case(6, 4, 1, 0)]
    assert parts["modular_defender"] == [] and parts["conventional_attacker"] == []


def test_partition_counts():
    records = [rec(e, ATTACKER if e % 2 else DEFENDER, won=e % 3 == 0) for e in range(30)]
    parts = partition_by_role(records)
    assert len(parts["modular_attacker"]) == len(parts["conventional_defender"]) == 15
    wins = sum(c.label for c in parts["modular_attacker"])
    assert wins + sum(c.label for c in parts["conventional_defender"]) == 15


# -- rendering -----------------------------------------------------------------------

def test_outline_shapes():
    assert render_outline(DecisionNode(2, 1)).count("\n") == 1
    tree = fit_tree(SEPARABLE, purity_threshold=0.0, min_samples=1)
    lines = render_outline(tree).splitlines()
    assert lines == [
        "root [win=6 loss=14 entropy=0.881291]",
        "  own_strategy <= 3 [win=6 loss=0 entropy=0.000000]",
        "  own_strategy > 3 [win=0 loss=14 entropy=0.000000]",
    ]
    assert render_dot(tree).startswith("digraph tree {")


@pytest.mark.parametrize("seed", range(10))
def test_outline_round_trip(seed):
    tree = fit_tree(random_cases(random.Random(seed), 120), purity_threshold=0.1, min_samples=3)
    back = parse_outline(render_outline(tree))
    assert render_outline(back) == render_outline(tree)
    assert [(n.win_count, n.loss_count, n.split) for n in back.nodes()] == \
        [(n.win_count, n.loss_count, n.split) for n in tree.nodes()]


# -- estimator API ---------------------------------------------------------------------

def test_sklearn_estimator_contract():
    clf = EntropyTreeClassifier(purity_threshold=0.0, min_samples=1)
    assert clone(clf).get_params()["purity_threshold"] == 0.0
    X = np.array([[c.features[f] for f in FEATURES] for c in SEPARABLE])
    y = np.array([c.label for c in SEPARABLE])
    clf.fit(X, y)
    assert clf.n_features_in_ == 3
    np.testing.assert_array_equal(clf.predict(X), y)
    assert clf.score(X, y) == 1.0
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    with pytest.raises(ValueError):
        clf.predict_proba(X[:, :2])
