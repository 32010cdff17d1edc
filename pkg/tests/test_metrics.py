"""
Tests for recovery tallies, matched label agreement and the adjusted Rand index
"""

import itertools
from math import comb

import numpy as np
import pytest

from bcv.errors import BcvError
from bcv.graph_core import LabelVector
from bcv.metrics import (
    MAX_MATCHED_CLUSTERS,
    RecoveryTally,
    adjusted_rand_index,
    confusion_matrix,
    label_agreement,
    tally_recovery,
)
from bcv.selection import SelectionResult


def pair_count_ari(a, b):
    """Adjusted Rand index from pair counts."""
    n = len(a)
    index = sum(comb(int(np.sum((a == x) & (b == y))), 2) for x in set(a) for y in set(b))
    sum_a = sum(comb(int(np.sum(a == x)), 2) for x in set(a))
    sum_b = sum(comb(int(np.sum(b == y)), 2) for y in set(b))
    expected = sum_a * sum_b / comb(n, 2)
    maximum = (sum_a + sum_b) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def permutation_agreement(a, b):
    """Best agreement over every relabelling of b."""
    values_a, values_b = sorted(set(a)), sorted(set(b))
    L = max(len(values_a), len(values_b))
    best = 0
    for perm in itertools.permutations(range(L)):
        mapping = {vb: perm[i] for i, vb in enumerate(values_b)}
        index_a = {va: i for i, va in enumerate(values_a)}
        hits = sum(1 for x, y in zip(a, b) if index_a[x] == mapping[y])
        best = max(best, hits)
    return best / len(a)


def test_ari_of_identical_and_permuted_labels():
    labels = [0, 0, 1, 1, 2, 2]
    assert adjusted_rand_index(labels, labels) == 1.0
    assert adjusted_rand_index(labels, [2, 2, 0, 0, 1, 1]) == 1.0


def test_ari_matches_pair_counts():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        a = rng.integers(0, int(rng.integers(1, 7)), size=n)
        b = rng.integers(0, int(rng.integers(1, 7)), size=n)
        assert adjusted_rand_index(a, b) == pytest.approx(pair_count_ari(a, b), abs=1e-10)


def test_ari_accepts_label_vectors():
    a = LabelVector([0, 1, 1, 0], 2)
    assert adjusted_rand_index(a, [1, 0, 0, 1]) == 1.0


def test_ari_rejects_bad_input():
    with pytest.raises(BcvError):
        adjusted_rand_index([0, 1], [0, 1, 1])
    with pytest.raises(BcvError):
        adjusted_rand_index([0], [0])


def test_agreement_matches_permutation_search():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(1, 15))
        a = rng.integers(0, int(rng.integers(1, 6)), size=n)
        b = rng.integers(0, int(rng.integers(1, 6)), size=n)
        assert label_agreement(a, b) == pytest.approx(permutation_agreement(list(a), list(b)))


def test_agreement_examples():
    assert label_agreement([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert label_agreement([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5
    assert label_agreement([3, 3, 3], [9, 9, 9]) == 1.0


def test_agreement_against_constant_is_majority_share():
    a = [0, 0, 0, 1, 1, 2, 2, 2, 2, 2]
    assert label_agreement(a, [0] * 10) == 0.5


def test_agreement_rejects_too_many_clusters():
    labels = list(range(MAX_MATCHED_CLUSTERS + 1))
    with pytest.raises(BcvError):
        label_agreement(labels, labels)
    with pytest.raises(BcvError):
        label_agreement([0, 1], [0])


def test_confusion_matrix_is_padded_square():
    table = confusion_matrix([0, 0, 1], [5, 6, 7])
    assert table.shape == (3, 3)
    assert table.sum() == 3
    np.testing.assert_array_equal(table[:2], [[1, 1, 0], [0, 0, 1]])


def test_tally_from_pairs():
    tally = tally_recovery([(3, 3), (3, 4), (2, 3), (3, 3)], (3, 3))
    assert tally == RecoveryTally(4, 3, 3)
    assert tally.rates == (0.75, 0.75)


def test_tally_from_selection_results():
    results = [SelectionResult(3, 4, {}), SelectionResult(3, 5, {}), SelectionResult(2, 4, {})]
    tally = tally_recovery(results, (3, 4))
    assert (tally.hits1, tally.hits2) == (2, 2)
    assert tally.rate1 == pytest.approx(2 / 3)


def test_tally_edge_cases():
    with pytest.raises(BcvError):
        tally_recovery([], (3, 3))
    assert RecoveryTally(0, 0, 0).rates == (0.0, 0.0)
    with pytest.raises(BcvError):
        RecoveryTally(2, 3, 0)
