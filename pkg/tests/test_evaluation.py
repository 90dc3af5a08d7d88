import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pim import acc_partition, class_count_error, hungarian, labeled_acc


def brute_force_total(cost, sense):
    """Exhaustive optimum over all matchings of min(R, C) pairs."""
    r, c = cost.shape
    best = None
    if r <= c:
        for perm in itertools.permutations(range(c), r):
            t = sum(cost[i, perm[i]] for i in range(r))
            best = t if best is None else (min(best, t) if sense == "min" else max(best, t))
    else:
        for perm in itertools.permutations(range(r), c):
            t = sum(cost[perm[j], j] for j in range(c))
            best = t if best is None else (min(best, t) if sense == "min" else max(best, t))
    return best


def brute_force_lex_mapping(cost, sense):
    """Lexicographically smallest optimal row-to-column mapping."""
    r, c = cost.shape
    best_total = brute_force_total(cost, sense)
    best_map = None
    if r <= c:
        combos = ((tuple(range(r)), perm) for perm in itertools.permutations(range(c), r))
    else:
        combos = ((perm, tuple(range(c))) for perm in itertools.permutations(range(r), c))
    for rows, cols in combos:
        t = sum(cost[i, j] for i, j in zip(rows, cols))
        if t != best_total:
            continue
        mapping = tuple(
            dict(zip(rows, cols)).get(i, c + 1) for i in range(r)
        )
        if best_map is None or mapping < best_map:
            best_map = mapping
    return best_map


class TestHungarian:
    def test_identity_cost(self):
        cost = np.ones((3, 3)) - np.eye(3)
        assert hungarian(cost, "min") == [(0, 0), (1, 1), (2, 2)]

    def test_three_by_three_example(self):
        cost = np.array([[4, 1, 3], [2, 0, 5], [3, 2, 2]], float)
        pairs = hungarian(cost, "min")
        assert pairs == [(0, 1), (1, 0), (2, 2)]
        assert sum(cost[i, j] for i, j in pairs) == 5

    def test_rectangular_max_matches_brute_force(self):
        rng = np.random.default_rng(0)
        cost = rng.integers(0, 10, (4, 2)).astype(float)
        pairs = hungarian(cost, "max")
        assert len(pairs) == 2
        total = sum(cost[i, j] for i, j in pairs)
        assert total == brute_force_total(cost, "max")

    @pytest.mark.parametrize("sense", ["min", "max"])
    def test_random_squares_match_brute_force(self, sense):
        rng = np.random.default_rng(1)
        for _ in range(150):
            n = int(rng.integers(1, 7))
            cost = rng.integers(0, 20, (n, n)).astype(float)
            pairs = hungarian(cost, sense)
            assert len(pairs) == n
            total = sum(cost[i, j] for i, j in pairs)
            assert total == brute_force_total(cost, sense)

    @pytest.mark.parametrize("sense", ["min", "max"])
    def test_random_rectangles_match_brute_force(self, sense):
        rng = np.random.default_rng(2)
        for _ in range(100):
            r = int(rng.integers(1, 7))
            c = int(rng.integers(1, 5))
            cost = rng.integers(0, 12, (r, c)).astype(float)
            pairs = hungarian(cost, sense)
            assert len(pairs) == min(r, c)
            total = sum(cost[i, j] for i, j in pairs)
            assert total == brute_force_total(cost, sense)

    def test_lexicographic_tie_break(self):
        # small integer ranges force many equal-total assignments
        rng = np.random.default_rng(3)
        for _ in range(200):
            r = int(rng.integers(1, 5))
            c = int(rng.integers(1, 5))
            cost = rng.integers(0, 3, (r, c)).astype(float)
            for sense in ("min", "max"):
                pairs = hungarian(cost, sense)
                got = tuple(dict(pairs).get(i, c + 1) for i in range(r))
                assert got == brute_force_lex_mapping(cost, sense)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            hungarian(np.array([[1.0, np.inf], [0.0, 1.0]]))

    def test_rejects_bad_sense(self):
        with pytest.raises(ValueError, match="sense"):
            hungarian(np.eye(2), "best")


class TestAccPartition:
    def test_permutation_of_truth_is_perfect(self):
        rng = np.random.default_rng(4)
        truth = rng.integers(0, 5, 60)
        perm = np.array([3, 4, 0, 1, 2])
        rep = acc_partition(perm[truth], truth, k_old=2)
        assert rep.acc_all == rep.acc_old == rep.acc_new == 1.0

    def test_small_example(self):
        truth = np.array([0, 0, 1, 1])
        pred = np.array([1, 1, 1, 0])
        rep = acc_partition(pred, truth, k_old=1)
        assert rep.acc_all == 0.75

    def test_single_cluster_balanced(self):
        k = 4
        truth = np.repeat(np.arange(k), 10)
        pred = np.zeros_like(truth)
        rep = acc_partition(pred, truth, k_old=2)
        assert rep.acc_all == pytest.approx(1 / k)

    def test_weighted_combination_identity(self):
        rng = np.random.default_rng(5)
        truth = rng.integers(0, 4, 200)
        pred = rng.integers(0, 4, 200)
        k_old = 2
        rep = acc_partition(pred, truth, k_old)
        n_old = int((truth < k_old).sum())
        n_new = truth.size - n_old
        combo = (n_old * rep.acc_old + n_new * rep.acc_new) / truth.size
        assert rep.acc_all == pytest.approx(combo, abs=1e-12)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_invariant_under_cluster_relabeling(self, seed):
        rng = np.random.default_rng(seed)
        truth = rng.integers(0, 4, 50)
        pred = rng.integers(0, 4, 50)
        perm = rng.permutation(4)
        a = acc_partition(pred, truth, k_old=2)
        b = acc_partition(perm[pred], truth, k_old=2)
        assert a.acc_all == pytest.approx(b.acc_all, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal-length"):
            acc_partition(np.array([0, 1]), np.array([0]), 1)


class TestLabeledAcc:
    def test_identity(self):
        labels = np.array([0, 1, 0, 1])
        assert labeled_acc(labels, labels) == 1.0

    def test_extra_cluster_unused(self):
        # three clusters, two classes: the best two clusters align perfectly
        pred = np.array([2, 2, 0, 0])
        labels = np.array([0, 0, 1, 1])
        assert labeled_acc(pred, labels, k=3) == 1.0

    def test_collapsed_clusters(self):
        pred = np.array([0, 0, 0, 0])
        labels = np.array([0, 0, 1, 1])
        assert labeled_acc(pred, labels, k=2) == 0.5

    def test_matches_exhaustive_selection(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            k, k_old, n = 5, 3, 40
            pred = rng.integers(0, k, n)
            labels = rng.integers(0, k_old, n)
            table = np.zeros((k, k_old))
            np.add.at(table, (pred, labels), 1)
            best = max(
                sum(table[i, j] for i, j in zip(rows, range(k_old)))
                for rows in itertools.permutations(range(k), k_old)
            )
            assert labeled_acc(pred, labels, k=k) == pytest.approx(best / n)


class TestClassCountError:
    def test_reported_rounding_case(self):
        assert class_count_error(227, 200) == pytest.approx(0.135)

    def test_exact_match(self):
        assert class_count_error(10, 10) == 0.0

    @given(st.integers(1, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_identity_property(self, k):
        assert class_count_error(k, k) == 0.0

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            class_count_error(5, 0)
