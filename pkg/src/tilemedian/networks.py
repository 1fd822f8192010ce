"""Comparator networks: construction, pruning, and verification.

Networks are immutable op lists over a fixed wire count. Three op kinds
exist: a compare-exchange writes min to its first wire and max to its second;
the min-only and max-only forms appear when pruning specialises a
compare-exchange whose other output is dead.

Constructions: Batcher's odd-even mergesort and its arbitrary-size merge
(both realised by padding to powers of two and dropping the comparators that
provably never move a pad), a multiway merge by binary reduction of pairwise
merges, and the pairwise sorting network for large widths. The zero-one
verifier packs every 0/1 input into machine words so that a compare-exchange
becomes one AND plus one OR over the whole input family at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CE = 0
MIN_ONLY = 1
MAX_ONLY = 2

_KIND_NAMES = {CE: "CE", MIN_ONLY: "MIN", MAX_ONLY: "MAX"}
_KIND_BY_NAME = {v: k for k, v in _KIND_NAMES.items()}


@dataclass(frozen=True)
class ComparatorNetwork:
    """A fixed sequence of min/max ops over ``wire_count`` wires."""

    wire_count: int
    ops: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        if self.wire_count < 0:
            raise ValueError("wire_count must be non-negative")
        for kind, i, j in self.ops:
            if kind not in _KIND_NAMES:
                raise ValueError(f"unknown op kind {kind}")
            if i == j or not (0 <= i < self.wire_count and 0 <= j < self.wire_count):
                raise ValueError(f"bad wires ({i}, {j}) for {self.wire_count} wires")

    def size(self) -> int:
        """Number of ops."""
        return len(self.ops)

    def depth(self) -> int:
        """Longest chain of ops sharing a wire."""
        level = [0] * self.wire_count
        deepest = 0
        for _, i, j in self.ops:
            d = max(level[i], level[j]) + 1
            level[i] = level[j] = d
            deepest = max(deepest, d)
        return deepest

    def instruction_count(self) -> int:
        """Min/max instruction count: a compare-exchange needs one of each."""
        return sum(2 if kind == CE else 1 for kind, _, _ in self.ops)

    def apply(self, values: Sequence, counter=None) -> list:
        """Run the network over a value list; returns a new list.

        Performs exactly ``size()`` comparator applications no matter what the
        values are, which is what keeps the selection programs data-oblivious.
        """
        if len(values) != self.wire_count:
            raise ValueError(f"expected {self.wire_count} values, got {len(values)}")
        v = list(values)
        for kind, i, j in self.ops:
            a, b = v[i], v[j]
            if kind == CE:
                if b < a:
                    v[i], v[j] = b, a
            elif kind == MIN_ONLY:
                if b < a:
                    v[i] = b
            else:
                if a > b:
                    v[j] = a
        if counter is not None:
            counter.add("network", len(self.ops))
        return v

    def apply_to_rows(self, rows: np.ndarray, counter=None) -> np.ndarray:
        """Vectorised ``apply`` where axis 1 is the wire axis."""
        if rows.shape[-1] != self.wire_count:
            raise ValueError(f"expected {self.wire_count} columns, got {rows.shape[-1]}")
        out = rows.copy()
        for kind, i, j in self.ops:
            a = out[..., i].copy()
            b = out[..., j]
            if kind == CE:
                np.minimum(a, b, out=out[..., i])
                np.maximum(a, b, out=out[..., j])
            elif kind == MIN_ONLY:
                np.minimum(a, b, out=out[..., i])
            else:
                np.maximum(a, b, out=out[..., j])
        if counter is not None:
            counter.add("network", len(self.ops) * int(np.prod(rows.shape[:-1])))
        return out

    def stats(self) -> dict:
        return {
            "wires": self.wire_count,
            "size": self.size(),
            "depth": self.depth(),
            "instructions": self.instruction_count(),
        }


def apply(net: ComparatorNetwork, values: Sequence, counter=None) -> list:
    """Functional alias for :meth:`ComparatorNetwork.apply`."""
    return net.apply(values, counter=counter)


# ---------------------------------------------------------------------------
# construction
#
# The pad-and-drop device: append imaginary +inf pads after the real wires
# (or prepend -inf pads before them). Every comparator generated below goes
# from a lower position to a higher one, so a comparator that touches a pad
# has the -inf on its min side or the +inf on its max side and never moves
# anything; dropping those leaves a valid network on the real wires.


def _pow2_merge(idx: list) -> Iterable[tuple]:
    """Odd-even merge of two sorted halves of ``idx`` (len is a power of two)."""
    n = len(idx)
    if n == 2:
        yield (idx[0], idx[1])
        return
    yield from _pow2_merge(idx[0::2])
    yield from _pow2_merge(idx[1::2])
    for a, b in zip(idx[1::2], idx[2::2]):
        yield (a, b)


def _pow2_sort(idx: list) -> Iterable[tuple]:
    n = len(idx)
    if n <= 1:
        return
    yield from _pow2_sort(idx[: n // 2])
    yield from _pow2_sort(idx[n // 2 :])
    yield from _pow2_merge(idx)


def _drop_pads(pairs: Iterable[tuple]) -> tuple[tuple[int, int, int], ...]:
    return tuple((CE, a, b) for a, b in pairs if a is not None and b is not None)


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@lru_cache(maxsize=None)
def batcher_sort(n: int) -> ComparatorNetwork:
    """Odd-even mergesort network for any ``n >= 0`` inputs."""
    if n < 0:
        raise ValueError("n must be non-negative")
    idx: list = list(range(n)) + [None] * (_next_pow2(n) - n)
    return ComparatorNetwork(n, _drop_pads(_pow2_sort(idx)))


@lru_cache(maxsize=None)
def oddeven_merge(p: int, q: int) -> ComparatorNetwork:
    """Merge network for a sorted p-run on wires [0,p) and q-run on [p,p+q).

    Arbitrary sizes are handled by padding the first run in front with -inf
    and the second behind with +inf up to a common power of two.
    """
    if p < 0 or q < 0:
        raise ValueError("run lengths must be non-negative")
    if p == 0 or q == 0:
        return ComparatorNetwork(p + q, ())
    half = _next_pow2(max(p, q))
    idx: list = (
        [None] * (half - p)
        + list(range(p))
        + list(range(p, p + q))
        + [None] * (half - q)
    )
    return ComparatorNetwork(p + q, _drop_pads(_pow2_merge(idx)))


def _embed(net: ComparatorNetwork, wires: Sequence[int]) -> Iterable[tuple[int, int, int]]:
    for kind, i, j in net.ops:
        yield (kind, wires[i], wires[j])


@lru_cache(maxsize=None)
def multiway_merge(sizes: tuple[int, ...]) -> ComparatorNetwork:
    """Merge k pre-sorted runs laid out back to back on the wires.

    Built as a balanced binary reduction of two-way odd-even merges; with two
    runs this is exactly ``oddeven_merge``. Size stays within the
    O(total * log k * log total) envelope of the dedicated multiway
    constructions for the run shapes the engines use.
    """
    sizes = tuple(int(s) for s in sizes)
    if any(s < 0 for s in sizes):
        raise ValueError("run sizes must be non-negative")
    total = sum(sizes)
    runs = []  # (offset, length) of each still-unmerged run
    offset = 0
    for s in sizes:
        if s:
            runs.append((offset, s))
        offset += s
    ops: list[tuple[int, int, int]] = []
    while len(runs) > 1:
        merged = []
        for a in range(0, len(runs) - 1, 2):
            (off1, len1), (off2, len2) = runs[a], runs[a + 1]
            if off1 + len1 != off2:
                raise AssertionError("runs must be adjacent")
            net = oddeven_merge(len1, len2)
            ops.extend(_embed(net, range(off1, off2 + len2)))
            merged.append((off1, len1 + len2))
        if len(runs) % 2:
            merged.append(runs[-1])
        runs = merged
    return ComparatorNetwork(total, tuple(ops))


def _pairwise(idx: list) -> Iterable[tuple]:
    """Pairwise sorting network over ``idx`` (len a power of two).

    Phase 1 orders adjacent pairs, phase 2 sorts the even- and odd-position
    subsequences with identical networks (which preserves the pairwise
    dominance), and phase 3 fixes the remaining displacement with halving
    strides between odd and even positions.
    """
    n = len(idx)
    if n <= 1:
        return
    for i in range(0, n, 2):
        yield (idx[i], idx[i + 1])
    yield from _pairwise(idx[0::2])
    yield from _pairwise(idx[1::2])
    s = n // 4
    while s >= 1:
        for j in range(0, n // 2 - s):
            yield (idx[2 * j + 1], idx[2 * (j + s)])
        s //= 2


@lru_cache(maxsize=None)
def pairwise_sort(n: int) -> ComparatorNetwork:
    """Pairwise sorting network; the preferred construction above 64 wires."""
    if n < 0:
        raise ValueError("n must be non-negative")
    idx: list = list(range(n)) + [None] * (_next_pow2(n) - n)
    return ComparatorNetwork(n, _drop_pads(_pairwise(idx)))


def make_sorter(
    n: int, library: Mapping[int, ComparatorNetwork] | None = None
) -> ComparatorNetwork:
    """Pick a full-sort network for ``n`` wires.

    ``library`` may supply hand-optimised networks (for example loaded from a
    network-description file); otherwise Batcher's construction serves up to
    64 wires and the pairwise network above that.
    """
    if library is not None and n in library:
        net = library[n]
        if net.wire_count != n:
            raise ValueError(f"library network for {n} has {net.wire_count} wires")
        return net
    return batcher_sort(n) if n <= 64 else pairwise_sort(n)


# ---------------------------------------------------------------------------
# pruning


@dataclass(frozen=True)
class OutputRequest:
    """The set of output wires whose final values must be preserved."""

    needed: frozenset[int]

    @classmethod
    def of(cls, wires: Iterable[int]) -> "OutputRequest":
        return cls(frozenset(int(w) for w in wires))


def prune(net: ComparatorNetwork, request: OutputRequest | Iterable[int]) -> ComparatorNetwork:
    """Drop ops that cannot influence the requested outputs.

    Two rewrites, applied in one backward dataflow pass: remove an op when
    neither written wire is live, and turn a compare-exchange into its
    min-only or max-only half when just one side is. Requested wires carry
    values identical to the unpruned network for every input.
    """
    needed = request.needed if isinstance(request, OutputRequest) else frozenset(request)
    for w in needed:
        if not 0 <= w < net.wire_count:
            raise ValueError(f"requested wire {w} out of range")
    live = set(needed)
    kept: list[tuple[int, int, int]] = []
    for kind, i, j in reversed(net.ops):
        if kind == CE:
            lo_live, hi_live = i in live, j in live
            if not (lo_live or hi_live):
                continue
            new_kind = CE if (lo_live and hi_live) else (MIN_ONLY if lo_live else MAX_ONLY)
        elif kind == MIN_ONLY:
            if i not in live:
                continue
            new_kind = MIN_ONLY
        else:
            if j not in live:
                continue
            new_kind = MAX_ONLY
        kept.append((new_kind, i, j))
        live.add(i)
        live.add(j)
    return ComparatorNetwork(net.wire_count, tuple(reversed(kept)))


def live_input_wires(net: ComparatorNetwork, outputs: Iterable[int]) -> frozenset[int]:
    """Wires whose initial values can influence the given output wires."""
    live = set(outputs)
    for kind, i, j in reversed(net.ops):
        writes = {i, j} if kind == CE else ({i} if kind == MIN_ONLY else {j})
        if writes & live:
            live -= writes
            live.add(i)
            live.add(j)
    return frozenset(live)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class Claim:
    """What a network is supposed to compute.

    kind 'sorted': all outputs ascending, over every 0/1 input.
    kind 'merged': all outputs ascending, over 0/1 inputs whose runs (of the
    given sizes, laid out back to back) are each ascending.
    kind 'ranks': wire w carries the rank[w]-th smallest input (0-based),
    over every 0/1 input, or over sorted-run inputs when runs is given.
    """

    kind: str
    runs: tuple[int, ...] | None = None
    ranks: tuple[tuple[int, int], ...] | None = None

    @classmethod
    def sorted(cls) -> "Claim":
        return cls("sorted")

    @classmethod
    def merged(cls, *sizes: int) -> "Claim":
        return cls("merged", runs=tuple(int(s) for s in sizes))

    @classmethod
    def of_ranks(cls, ranks: Mapping[int, int], runs: Sequence[int] | None = None) -> "Claim":
        return cls(
            "ranks",
            runs=None if runs is None else tuple(int(s) for s in runs),
            ranks=tuple(sorted((int(w), int(r)) for w, r in ranks.items())),
        )


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    mode: str
    inputs_checked: int
    counterexample: tuple[int, ...] | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _eval_bitmasks(net: ComparatorNetwork, masks: np.ndarray) -> np.ndarray:
    """Run the network on word-packed 0/1 inputs: min is AND, max is OR."""
    out = masks.copy()
    for kind, i, j in net.ops:
        a = out[i].copy()
        b = out[j]
        if kind == CE:
            np.bitwise_and(a, b, out=out[i])
            np.bitwise_or(a, b, out=out[j])
        elif kind == MIN_ONLY:
            np.bitwise_and(a, b, out=out[i])
        else:
            np.bitwise_or(a, b, out=out[j])
    return out


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (wires, inputs) 0/1 matrix into (wires, words) uint64 rows."""
    wires, n = bits.shape
    words = (n + 63) // 64
    padded = np.zeros((wires, words * 64), dtype=np.uint8)
    padded[:, :n] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(np.uint64)


def _binary_family(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All 2**n 0/1 inputs: wire masks plus per-input count of ones."""
    count = 1 << n
    inputs = np.arange(count, dtype=np.uint64)
    bits = np.empty((n, count), dtype=np.uint8)
    for w in range(n):
        bits[w] = (inputs >> np.uint64(w)) & np.uint64(1)
    ones = bits.sum(axis=0).astype(np.int64)
    return _pack_bits(bits), ones


def _merged_family(sizes: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All 0/1 inputs whose runs are each sorted ascending.

    A run of length s contributes s+1 shapes (number of leading zeros), so the
    family has prod(s_i + 1) members. Returns wire masks, per-input total
    zeros, and the mixed-radix zero counts for counterexample reconstruction.
    """
    sizes = [int(s) for s in sizes]
    total = sum(sizes)
    counts = [s + 1 for s in sizes]
    n_inputs = math.prod(counts)
    zero_counts = np.empty((len(sizes), n_inputs), dtype=np.int64)
    scale = 1
    for r, c in enumerate(counts):
        zero_counts[r] = (np.arange(n_inputs) // scale) % c
        scale *= c
    bits = np.empty((total, n_inputs), dtype=np.uint8)
    wire = 0
    for r, s in enumerate(sizes):
        for pos in range(s):
            bits[wire] = (pos >= zero_counts[r]).astype(np.uint8)
            wire += 1
    zeros_total = zero_counts.sum(axis=0)
    return _pack_bits(bits), zeros_total, zero_counts


def _first_violation(mask: np.ndarray, n_inputs: int) -> int | None:
    nz = np.flatnonzero(mask)
    if nz.size == 0:
        return None
    word = int(nz[0])
    bit = int(mask[word])
    offset = (bit & -bit).bit_length() - 1
    idx = word * 64 + offset
    return idx if idx < n_inputs else None


def _expected_rank_masks(
    zeros: np.ndarray, ranks: Sequence[int]
) -> dict[int, np.ndarray]:
    """Bitmask of the expected output value for each requested rank."""
    expected = {}
    for r in set(ranks):
        bits = (np.asarray(zeros) <= r).astype(np.uint8)  # 0-based rank r is 1 iff zeros <= r
        expected[r] = _pack_bits(bits[np.newaxis, :])[0]
    return expected


def _reconstruct_binary(idx: int, n: int) -> tuple[int, ...]:
    return tuple((idx >> w) & 1 for w in range(n))


def _reconstruct_merged(idx: int, sizes: Sequence[int], zero_counts: np.ndarray) -> tuple[int, ...]:
    values: list[int] = []
    for r, s in enumerate(sizes):
        z = int(zero_counts[r, idx])
        values.extend([0] * z + [1] * (s - z))
    return tuple(values)


def verify_zero_one(
    net: ComparatorNetwork,
    claim: Claim | str = "sorted",
    max_evaluations: int = 1 << 20,
    random_trials: int = 100_000,
    seed: int = 0,
) -> VerifyResult:
    """Check a sortedness/merge/rank claim against the zero-one principle.

    Exhausts the 0/1 input family when it fits in ``max_evaluations``
    (hard-capped at 2**24); otherwise falls back to ``random_trials`` random
    permutations, which can only ever refute. Returns the first failing input
    as a counterexample.
    """
    if isinstance(claim, str):
        claim = Claim(claim)
    max_evaluations = min(int(max_evaluations), 1 << 24)
    n = net.wire_count

    if claim.kind in ("sorted", "ranks") and claim.runs is None:
        n_inputs = 1 << n
        if n_inputs <= max_evaluations:
            masks, ones = _binary_family(n)
            zeros = n - ones
            out = _eval_bitmasks(net, masks)
            if claim.kind == "sorted":
                for w in range(n - 1):
                    bad = out[w] & ~out[w + 1]
                    idx = _first_violation(bad, n_inputs)
                    if idx is not None:
                        return VerifyResult(
                            False, "exhaustive", n_inputs,
                            _reconstruct_binary(idx, n),
                            f"wires {w},{w + 1} out of order",
                        )
            else:
                expected = _expected_rank_masks(zeros, [r for _, r in claim.ranks])
                for w, r in claim.ranks:
                    bad = out[w] ^ expected[r]
                    idx = _first_violation(bad, n_inputs)
                    if idx is not None:
                        return VerifyResult(
                            False, "exhaustive", n_inputs,
                            _reconstruct_binary(idx, n),
                            f"wire {w} is not rank {r}",
                        )
            return VerifyResult(True, "exhaustive", n_inputs)
        return _verify_random(net, claim, random_trials, seed)

    # sorted-run input families (merges, or ranks over merges)
    sizes = claim.runs or ()
    if sum(sizes) != n:
        raise ValueError(f"run sizes {sizes} do not cover {n} wires")
    n_inputs = math.prod(s + 1 for s in sizes)
    if n_inputs <= max_evaluations:
        masks, zeros, zero_counts = _merged_family(sizes)
        out = _eval_bitmasks(net, masks)
        if claim.kind in ("merged", "sorted"):
            for w in range(n - 1):
                bad = out[w] & ~out[w + 1]
                idx = _first_violation(bad, n_inputs)
                if idx is not None:
                    return VerifyResult(
                        False, "exhaustive", n_inputs,
                        _reconstruct_merged(idx, sizes, zero_counts),
                        f"wires {w},{w + 1} out of order",
                    )
        else:
            expected = _expected_rank_masks(zeros, [r for _, r in claim.ranks])
            for w, r in claim.ranks:
                bad = out[w] ^ expected[r]
                idx = _first_violation(bad, n_inputs)
                if idx is not None:
                    return VerifyResult(
                        False, "exhaustive", n_inputs,
                        _reconstruct_merged(idx, sizes, zero_counts),
                        f"wire {w} is not rank {r}",
                    )
        return VerifyResult(True, "exhaustive", n_inputs)
    return _verify_random(net, claim, random_trials, seed)


def _verify_random(net: ComparatorNetwork, claim: Claim, trials: int, seed: int) -> VerifyResult:
    rng = np.random.default_rng(seed)
    n = net.wire_count
    batch = max(1, min(trials, (1 << 22) // max(n, 1)))
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        if claim.runs is None:
            rows = rng.permuted(np.tile(np.arange(n, dtype=np.int64), (m, 1)), axis=1)
        else:
            rows = rng.integers(0, 1 << 20, size=(m, n), dtype=np.int64)
            off = 0
            for s in claim.runs:
                rows[:, off : off + s] = np.sort(rows[:, off : off + s], axis=1)
                off += s
        out = net.apply_to_rows(rows)
        if claim.kind in ("sorted", "merged"):
            ok_rows = np.all(out[:, :-1] <= out[:, 1:], axis=1)
        else:
            ref = np.sort(rows, axis=1)
            ok_rows = np.ones(m, dtype=bool)
            for w, r in claim.ranks:
                ok_rows &= out[:, w] == ref[:, r]
        if not ok_rows.all():
            bad = int(np.flatnonzero(~ok_rows)[0])
            return VerifyResult(
                False, "random", done + bad + 1, tuple(int(v) for v in rows[bad])
            )
        done += m
    return VerifyResult(True, "random", trials)


# ---------------------------------------------------------------------------
# network-description files
#
#   WIRES <n>
#   CE <i> <j>      (min to i, max to j)
#   MIN <i> <j>     (i = min(i, j))
#   MAX <i> <j>     (j = max(i, j))
# Blank lines and lines starting with '#' are ignored.


def load_network_file(path: str | Path) -> ComparatorNetwork:
    """Parse a network-description file."""
    wires = None
    ops: list[tuple[int, int, int]] = []
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "WIRES":
            if wires is not None or len(parts) != 2:
                raise ValueError(f"{path}:{ln}: malformed WIRES line")
            wires = int(parts[1])
        elif parts[0] in _KIND_BY_NAME:
            if wires is None:
                raise ValueError(f"{path}:{ln}: op before WIRES")
            if len(parts) != 3:
                raise ValueError(f"{path}:{ln}: expected '{parts[0]} i j'")
            ops.append((_KIND_BY_NAME[parts[0]], int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"{path}:{ln}: unknown directive {parts[0]!r}")
    if wires is None:
        raise ValueError(f"{path}: missing WIRES line")
    return ComparatorNetwork(wires, tuple(ops))


def save_network_file(net: ComparatorNetwork, path: str | Path) -> None:
    lines = [f"WIRES {net.wire_count}"]
    lines += [f"{_KIND_NAMES[kind]} {i} {j}" for kind, i, j in net.ops]
    Path(path).write_text("\n".join(lines) + "\n")
