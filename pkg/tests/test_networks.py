"""Tests for comparator-network construction, pruning, and verification."""

import itertools
import math

import numpy as np
import pytest

from tilemedian.networks import (
    CE,
    Claim,
    ComparatorNetwork,
    OutputRequest,
    batcher_sort,
    load_network_file,
    make_sorter,
    multiway_merge,
    oddeven_merge,
    pairwise_sort,
    prune,
    save_network_file,
    verify_zero_one,
)


class TestSortConstruction:
    def test_known_sizes(self):
        # classic odd-even mergesort comparator counts
        assert batcher_sort(0).size() == 0
        assert batcher_sort(1).size() == 0
        assert batcher_sort(2).size() == 1
        assert batcher_sort(4).size() == 5
        assert batcher_sort(8).size() == 19

    def test_sorts_exhaustively_small(self):
        for n in range(0, 8):
            net = batcher_sort(n)
            for perm in itertools.permutations(range(n)):
                assert net.apply(list(perm)) == sorted(perm), (n, perm)

    def test_zero_one_up_to_12(self):
        for n in range(0, 13):
            assert verify_zero_one(batcher_sort(n), "sorted").ok, n

    def test_oblivious_op_count_is_input_independent(self):
        net = batcher_sort(6)

        class Counter:
            total = 0

            def add(self, label, k):
                self.total += k

        c1, c2 = Counter(), Counter()
        net.apply([1, 2, 3, 4, 5, 6], counter=c1)
        net.apply([6, 5, 4, 3, 2, 1], counter=c2)
        assert c1.total == c2.total == net.size()

    def test_apply_to_rows_matches_apply(self):
        rng = np.random.default_rng(11)
        net = batcher_sort(9)
        rows = rng.integers(0, 100, size=(64, 9))
        out = net.apply_to_rows(rows)
        for r in range(rows.shape[0]):
            assert list(out[r]) == net.apply(list(rows[r]))
        # input untouched
        assert rows.max() < 100

    def test_depth_reasonable(self):
        # odd-even mergesort depth for 8 wires is 6
        assert batcher_sort(8).depth() == 6

    def test_median_apply_example(self):
        net = batcher_sort(5)
        assert net.apply([5, 1, 4, 2, 3]) == [1, 2, 3, 4, 5]
        assert net.apply([5, 1, 4, 2, 3])[2] == 3


class TestPairwiseSort:
    def test_small_sizes(self):
        assert pairwise_sort(2).size() == 1
        # agrees with odd-even mergesort at 8 wires
        assert pairwise_sort(8).size() == 19 == batcher_sort(8).size()

    def test_beats_batcher_on_padded_sizes(self):
        # the pairwise construction degrades more gracefully off powers of two
        assert pairwise_sort(9).size() <= batcher_sort(9).size()

    def test_zero_one_exhaustive(self):
        for n in (3, 5, 9, 16):
            assert verify_zero_one(pairwise_sort(n), "sorted").ok, n

    def test_large_width_random(self):
        res = verify_zero_one(pairwise_sort(96), "sorted", random_trials=2000, seed=3)
        assert res.ok and res.mode == "random"


class TestMakeSorter:
    def test_policy(self):
        assert make_sorter(16).ops == batcher_sort(16).ops
        assert make_sorter(81).ops == pairwise_sort(81).ops

    def test_library_override(self):
        custom = ComparatorNetwork(2, ((CE, 0, 1),))
        assert make_sorter(2, {2: custom}) is custom
        with pytest.raises(ValueError):
            make_sorter(3, {3: custom})


class TestOddEvenMerge:
    def test_known_sizes(self):
        assert oddeven_merge(1, 1).size() == 1
        assert oddeven_merge(2, 2).size() == 3
        assert oddeven_merge(4, 4).size() == 9
        assert oddeven_merge(8, 8).size() == 25

    def test_empty_runs(self):
        assert oddeven_merge(0, 5).size() == 0
        assert oddeven_merge(5, 0).size() == 0

    def test_merges_all_sorted_run_pairs(self):
        for p in range(0, 9):
            for q in range(0, 9):
                res = verify_zero_one(oddeven_merge(p, q), Claim.merged(p, q))
                assert res.ok, (p, q, res)

    def test_unequal_runs_with_values(self):
        rng = np.random.default_rng(5)
        for p, q in [(3, 5), (1, 7), (6, 2), (5, 5)]:
            net = oddeven_merge(p, q)
            for _ in range(200):
                a = np.sort(rng.integers(0, 30, size=p))
                b = np.sort(rng.integers(0, 30, size=q))
                merged = net.apply(list(a) + list(b))
                assert merged == sorted(list(a) + list(b))

    def test_size_bound_and_monotone(self):
        # at most (p+q) * ceil(log2(p+q)) comparators, and growing a run
        # never shrinks the network
        sizes = {}
        for p in range(0, 25):
            for q in range(0, 25):
                sizes[p, q] = oddeven_merge(p, q).size()
                if p + q >= 2 and p and q:
                    bound = (p + q) * math.ceil(math.log2(p + q))
                    assert sizes[p, q] <= bound, (p, q)
        for p in range(1, 25):
            for q in range(0, 25):
                assert sizes[p, q] >= sizes[p - 1, q]
                assert sizes[q, p] >= sizes[q, p - 1]


class TestMultiwayMerge:
    def test_three_singletons_is_three_comparator_sorter(self):
        net = multiway_merge((1, 1, 1))
        assert net.size() == 3
        assert all(kind == CE for kind, _, _ in net.ops)
        for perm in itertools.permutations([10, 20, 30]):
            assert net.apply(list(perm)) == [10, 20, 30]

    def test_two_runs_reduces_to_oddeven_merge(self):
        for p, q in [(1, 1), (3, 4), (8, 8), (5, 2)]:
            assert multiway_merge((p, q)).ops == oddeven_merge(p, q).ops

    def test_zero_one_families(self):
        for sizes in [(1, 1, 1), (2, 3, 2), (4, 4, 4), (1, 5, 2, 3), (2, 2, 2, 2, 2)]:
            res = verify_zero_one(multiway_merge(sizes), Claim.merged(*sizes))
            assert res.ok, (sizes, res)

    def test_skips_empty_runs(self):
        net = multiway_merge((2, 0, 3))
        res = verify_zero_one(net, Claim.merged(2, 0, 3))
        assert res.ok

    def test_random_values_many_runs(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            sizes = tuple(int(s) for s in rng.integers(1, 7, size=int(rng.integers(2, 6))))
            net = multiway_merge(sizes)
            vals = []
            for s in sizes:
                vals.extend(sorted(rng.integers(0, 40, size=s)))
            assert net.apply(vals) == sorted(vals), sizes


class TestPrune:
    def test_median_of_five(self):
        full = batcher_sort(5)
        med = prune(full, OutputRequest.of([2]))
        assert med.size() < full.size()
        assert med.instruction_count() < full.instruction_count()
        for perm in itertools.permutations(range(5)):
            assert med.apply(list(perm))[2] == 2, perm
        assert verify_zero_one(med, Claim.of_ranks({2: 2})).ok

    def test_all_outputs_requested_is_identity(self):
        net = batcher_sort(7)
        assert prune(net, OutputRequest.of(range(7))).ops == net.ops

    def test_contiguous_window_request(self):
        # keep ranks 3..5 of 9: the forgetful-selection workhorse case
        net = batcher_sort(9)
        window = prune(net, OutputRequest.of([3, 4, 5]))
        assert window.size() < net.size()
        res = verify_zero_one(window, Claim.of_ranks({3: 3, 4: 4, 5: 5}))
        assert res.ok

    def test_random_nets_random_requests(self):
        rng = np.random.default_rng(7)
        for trial in range(40):
            n = int(rng.integers(3, 12))
            ops = tuple(
                (CE, *sorted(int(w) for w in rng.choice(n, size=2, replace=False)))
                for _ in range(int(rng.integers(5, 40)))
            )
            net = ComparatorNetwork(n, ops)
            req = sorted(int(w) for w in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
            pruned = prune(net, OutputRequest.of(req))
            assert pruned.size() <= net.size()
            rows = rng.integers(0, 50, size=(250, n))
            assert np.array_equal(
                net.apply_to_rows(rows)[:, req], pruned.apply_to_rows(rows)[:, req]
            ), (trial, req)

    def test_rejects_out_of_range_request(self):
        with pytest.raises(ValueError):
            prune(batcher_sort(4), OutputRequest.of([4]))


class TestVerification:
    def test_detects_flipped_comparator(self):
        net = batcher_sort(8)
        kind, i, j = net.ops[-1]
        broken = ComparatorNetwork(8, net.ops[:-1] + ((kind, j, i),))
        res = verify_zero_one(broken, "sorted")
        assert not res.ok
        assert res.counterexample is not None
        replay = broken.apply(list(res.counterexample))
        assert replay != sorted(replay)

    def test_detects_dropped_merge_comparator(self):
        net = oddeven_merge(4, 4)
        broken = ComparatorNetwork(8, net.ops[:-1])
        res = verify_zero_one(broken, Claim.merged(4, 4))
        assert not res.ok
        # counterexample respects the sorted-run input family
        a, b = res.counterexample[:4], res.counterexample[4:]
        assert list(a) == sorted(a) and list(b) == sorted(b)
        out = broken.apply(list(res.counterexample))
        assert out != sorted(out)

    def test_detects_wrong_rank_claim(self):
        net = batcher_sort(5)
        res = verify_zero_one(net, Claim.of_ranks({2: 3}))
        assert not res.ok

    def test_budget_forces_random_mode(self):
        res = verify_zero_one(batcher_sort(16), "sorted", max_evaluations=1 << 10,
                              random_trials=500, seed=1)
        assert res.ok and res.mode == "random"

    def test_random_mode_still_refutes(self):
        net = batcher_sort(16)
        kind, i, j = net.ops[-1]
        broken = ComparatorNetwork(16, net.ops[:-1] + ((kind, j, i),))
        res = verify_zero_one(broken, "sorted", max_evaluations=1 << 10,
                              random_trials=20000, seed=2)
        assert not res.ok and res.mode == "random"

    def test_rank_claim_over_merged_family(self):
        # median of a merge of two sorted runs
        net = multiway_merge((5, 4))
        med = prune(net, OutputRequest.of([4]))
        res = verify_zero_one(med, Claim.of_ranks({4: 4}, runs=(5, 4)))
        assert res.ok

    def test_large_random_permutations(self):
        res = verify_zero_one(pairwise_sort(80), "sorted",
                              random_trials=100_000, seed=9)
        assert res.ok and res.inputs_checked == 100_000


class TestNetworkFiles:
    def test_round_trip(self, tmp_path):
        net = prune(batcher_sort(5), OutputRequest.of([2]))
        path = tmp_path / "median5.net"
        save_network_file(net, path)
        assert load_network_file(path) == net
        text = path.read_text()
        assert text.startswith("WIRES 5\n")

    def test_parses_comments_and_blanks(self, tmp_path):
        path = tmp_path / "net.txt"
        path.write_text("# three-sorter\nWIRES 3\n\nCE 0 1\nCE 0 2\nMIN 1 2\n")
        net = load_network_file(path)
        assert net.wire_count == 3 and net.size() == 3

    def test_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("CE 0 1\n")
        with pytest.raises(ValueError):
            load_network_file(path)
        path.write_text("WIRES 2\nSWAP 0 1\n")
        with pytest.raises(ValueError):
            load_network_file(path)

    def test_rejects_bad_wires(self):
        with pytest.raises(ValueError):
            ComparatorNetwork(2, ((CE, 0, 2),))
        with pytest.raises(ValueError):
            ComparatorNetwork(2, ((CE, 1, 1),))
