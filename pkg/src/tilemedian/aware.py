"""Data-aware multi-pass median filter.

The network engine keeps every tile independent and data-oblivious.  This
engine instead sweeps the whole image a few times over shared sorted buffers:
sorted row runs (shared by vertically adjacent tiles), sorted column runs
(shared horizontally), and one trimmed candidate window per tile.  Each pass
fuses one horizontal and one vertical split, so the tile side halves per pass
and every merge is plain linear-merge work on sorted inputs.

Comparison accounting follows the sequential model: a network sort charges
its comparator count per run, and merging two sorted runs of lengths p and q
charges p + q - 1 no matter how the merge is executed.  Totals therefore
depend only on the image shape, the kernel, and the root tile - never on
pixel values.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .geometry import retention_window, root_tile_size
from .networks import make_sorter

MIN_KERNEL = 9


class ComparisonCounter:
    """Accumulates model comparison counts, grouped by operation label."""

    def __init__(self):
        self.total = 0
        self.by_label: dict[str, int] = {}

    def add(self, label: str, n) -> None:
        n = int(n)
        self.total += n
        self.by_label[label] = self.by_label.get(label, 0) + n

    def absorb(self, other: "ComparisonCounter") -> None:
        for label, n in other.by_label.items():
            self.add(label, n)


def transpose(image: np.ndarray) -> np.ndarray:
    """Column-major copy: row i of the result is column i of ``image``."""
    return np.ascontiguousarray(np.asarray(image).T)


@dataclass(frozen=True)
class MergePathSplit:
    """Split of merged prefix length ``d`` into ``i`` from A and ``j`` from B."""

    d: int
    i: int
    j: int


def merge_path_partition(a, b, d, counter=None) -> MergePathSplit:
    """Binary-search the merge diagonal: A[:i] and B[:j] are the d smallest.

    Ties go to A, matching a stable merge that prefers the first run.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if not 0 <= d <= len(a) + len(b):
        raise ValueError(f"diagonal {d} out of range 0..{len(a) + len(b)}")
    lo, hi = max(0, d - len(b)), min(d, len(a))
    probes = 0
    while lo < hi:
        probes += 1
        i = (lo + hi) // 2
        j = d - i
        if i < len(a) and j > 0 and b[j - 1] >= a[i]:
            lo = i + 1  # a[i] ties or beats a chosen b, must join the prefix
        elif i > 0 and j < len(b) and a[i - 1] > b[j]:
            hi = i - 1
        else:
            lo = hi = i
    if counter is not None:
        counter.add("partition", probes)
    return MergePathSplit(d, lo, d - lo)


def _merge_values(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact stable merge of two sorted arrays via rank arithmetic."""
    if not len(a):
        return b.copy()
    if not len(b):
        return a.copy()
    out = np.empty(len(a) + len(b), dtype=np.result_type(a, b))
    out[np.arange(len(a)) + np.searchsorted(b, a, side="left")] = a
    out[np.arange(len(b)) + np.searchsorted(a, b, side="right")] = b
    return out


def kway_merge_binary(runs, workers: int = 1, counter=None) -> np.ndarray:
    """Merge sorted runs pairwise, halving the number of runs each round.

    With ``workers`` > 1 every pairwise merge is cut into equal output
    segments by merge-path partition; the concatenated segments are identical
    to the unpartitioned merge, so the worker count never shows in the result.
    """
    level = [np.asarray(r) for r in runs]
    if not level:
        return np.empty(0)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(_merge_pair(level[i], level[i + 1], workers, counter))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _merge_pair(a, b, workers, counter):
    if counter is not None and len(a) and len(b):
        counter.add("merge", len(a) + len(b) - 1)
    total = len(a) + len(b)
    if workers <= 1 or total < 2 * workers:
        return _merge_values(a, b)
    pieces = []
    prev = MergePathSplit(0, 0, 0)
    for w in range(1, workers + 1):
        cut = merge_path_partition(a, b, total * w // workers, counter)
        pieces.append(_merge_values(a[prev.i : cut.i], b[prev.j : cut.j]))
        prev = cut
    return np.concatenate(pieces)


def _trimmed_merge_cost(p: int, q: int, out: int) -> int:
    """Merge of sorted p- and q-runs emitting only ``out`` retained ranks.

    A merge-path partition finds the window start in log probes, then one
    comparison per emitted value walks the window; never worse than the full
    linear merge.
    """
    probes = (min(p, q) + 1).bit_length()
    return min(p + q - 1, out + probes)


def _kway_cost(sizes) -> int:
    """Model cost of a binary-reduction merge of runs with these lengths."""
    sizes = list(sizes)
    total = 0
    while len(sizes) > 1:
        nxt = []
        for i in range(0, len(sizes) - 1, 2):
            p, q = sizes[i], sizes[i + 1]
            if p and q:
                total += p + q - 1
            nxt.append(p + q)
        if len(sizes) % 2:
            nxt.append(sizes[-1])
        sizes = nxt
    return total


def _network_sort(block: np.ndarray, counter, label: str) -> np.ndarray:
    """Sort the last axis of ``block`` with a sorting network."""
    width = block.shape[-1]
    if width <= 1:
        return block.copy()
    net = make_sorter(width)
    flat = block.reshape(-1, width)
    out = net.apply_to_rows(flat)
    if counter is not None:
        counter.add(label, net.size() * flat.shape[0])
    return out.reshape(block.shape)


@dataclass
class PassBuffers:
    """Sorted shared state between passes for one band of root-tile rows.

    ``rows[cx, y - row_base]`` is the sorted run of the image row ``y``
    restricted to the core x-range of tile column ``cx``; every vertically
    adjacent tile in that column reads the same run.  ``cols[cy, x]`` is the
    sorted column run at the core y-range of tile row ``cy``.  ``cand`` holds
    one retention-trimmed sorted window per tile with the scalar bookkeeping
    ``d_lo`` (values proven too small) shared across tiles of the level.
    """

    k: int
    root: int
    side: int  # current tile side; halves every pass
    level: int  # 0 after init
    grid: tuple[int, int]  # (n_cy, n_cx)
    py0: int  # first output pixel row of the band
    d_lo: int
    n_seen: int
    cand: np.ndarray  # (n_cy, n_cx, C)
    rows: np.ndarray  # (n_cx, n_y, core)
    cols: np.ndarray  # (n_cy, W, core)
    row_base: int  # image row stored at rows[:, 0]
    image: np.ndarray
    image_t: np.ndarray

    @property
    def core(self) -> int:
        return self.k - self.side + 1

    @property
    def d_hi(self) -> int:
        return self.n_seen - self.d_lo - self.cand.shape[2]

    def validate(self) -> None:
        """Debug invariants: runs sorted, bookkeeping consistent."""
        assert self.d_lo >= 0 and self.d_hi >= 0
        assert self.d_lo + self.cand.shape[2] + self.d_hi == self.n_seen
        assert self.n_seen == self.core * self.core
        for arr in (self.cand, self.rows, self.cols):
            flat = arr.reshape(-1, arr.shape[-1])
            assert bool(np.all(flat[:, 1:] >= flat[:, :-1]))

    def checksum(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        for arr in (self.cand, self.rows, self.cols):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr((self.side, self.d_lo, self.n_seen)).encode())
        return h.hexdigest()


def _validate_kernel_root(k: int, root) -> int:
    if k % 2 == 0 or k < MIN_KERNEL:
        raise ValueError(
            f"data-aware engine handles odd k >= {MIN_KERNEL}; "
            f"got {k} (small kernels belong to the oblivious engine)")
    t = max(root_tile_size(k), 2) if root is None else int(root)
    if t < 2 or t & (t - 1) or t > k:
        raise ValueError(f"root tile side must be a power of two in [2, {k}], got {t}")
    return t


def pass_init(image, k, root=None, counter=None, ty_range=None) -> PassBuffers:
    """Sort rows and extra columns, then merge each tile's core rows.

    Row runs are sorted with small sorting networks applied across the whole
    band at once; the core candidate window comes from a k-way merge of the
    core rows followed by a retention trim.
    """
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2-D image")
    k = int(k)
    t = _validate_kernel_root(k, root)
    H, W = img.shape
    half = k // 2
    c = k - t + 1
    n_tx = -(-W // t)
    ty0, ty1 = (0, -(-H // t)) if ty_range is None else ty_range
    py0 = ty0 * t
    n_cy = ty1 - ty0
    img_t = transpose(img)

    y_lo = max(0, py0 - half)
    y_hi = min(H - 1, ty1 * t - 1 + half)
    n_y = y_hi - y_lo + 1

    core_x0 = np.arange(n_tx) * t + (t - 1) - half
    xs = np.clip(core_x0[:, None] + np.arange(c)[None, :], 0, W - 1)
    rows = img[(y_lo + np.arange(n_y))[None, :, None], xs[:, None, :]]
    rows = _network_sort(rows, counter, "rowsort")

    core_y0 = py0 + np.arange(n_cy) * t + (t - 1) - half
    ys = np.clip(core_y0[:, None] + np.arange(c)[None, :], 0, H - 1)
    cols = img_t[np.arange(W)[None, :, None], ys[:, None, :]]
    cols = _network_sort(cols, counter, "colsort")

    rel = np.clip(core_y0[:, None] + np.arange(c)[None, :], 0, H - 1) - y_lo
    block = rows[np.arange(n_tx)[None, :, None], rel[:, None, :], :]
    cand = np.sort(block.reshape(n_cy, n_tx, c * c), axis=-1)
    if counter is not None:
        counter.add("core", _kway_cost((c,) * c) * n_cy * n_tx)

    n_seen = c * c
    w = retention_window(k * k, n_seen)
    cand = np.ascontiguousarray(cand[:, :, w.lo - 1 : w.hi])
    return PassBuffers(k=k, root=t, side=t, level=0, grid=(n_cy, n_tx),
                       py0=py0, d_lo=w.lo - 1, n_seen=n_seen, cand=cand,
                       rows=rows, cols=cols, row_base=y_lo,
                       image=img, image_t=img_t)


def pass_extend_level(bufs: PassBuffers, counter=None) -> PassBuffers:
    """Fused split: halve tiles horizontally then vertically in one sweep.

    Per child tile the candidate window absorbs the gained column runs, then
    the gained (freshly extended) row runs, re-trimming after each merge.
    Surviving row runs grow sideways by corner cells read straight from the
    image; surviving column runs grow the same way vertically.
    """
    if bufs.side < 4:
        raise ValueError("tiles are already 2x2; call pass_finalize")
    k, s = bufs.k, bufs.side
    half = k // 2
    g = s // 2
    c = bufs.core
    c2 = c + g
    n_cy, n_cx = bufs.grid
    H, W = bufs.image.shape
    img, img_t = bufs.image, bufs.image_t
    n_total = k * k
    n_y = bufs.rows.shape[1]
    y_lo = bufs.row_base

    # children: even index grows toward lower coordinates, odd toward higher
    pcore_x0 = (np.arange(2 * n_cx) // 2) * s + (s - 1) - half
    gain_x0 = np.where(np.arange(2 * n_cx) % 2 == 0, pcore_x0 - g, pcore_x0 + c)
    gx = np.clip(gain_x0[:, None] + np.arange(g)[None, :], 0, W - 1)

    pcore_y0 = bufs.py0 + (np.arange(2 * n_cy) // 2) * s + (s - 1) - half
    gain_y0 = np.where(np.arange(2 * n_cy) % 2 == 0, pcore_y0 - g, pcore_y0 + c)
    gy = np.clip(gain_y0[:, None] + np.arange(g)[None, :], 0, H - 1)

    # horizontal absorb: pack the gained column runs, merge, trim
    cpack = bufs.cols[:, gx, :].reshape(n_cy, 2 * n_cx, g * c)
    cpack = np.sort(cpack, axis=-1)
    if counter is not None:
        counter.add("pack", _kway_cost((c,) * g) * n_cy * 2 * n_cx)
    cand = np.repeat(bufs.cand, 2, axis=1)
    seen_h = c2 * c
    w = retention_window(n_total, seen_h)
    lo_rel = w.lo - 1 - bufs.d_lo
    assert lo_rel >= 0
    merged = np.sort(np.concatenate([cand, cpack], axis=-1), axis=-1)
    if counter is not None:
        counter.add("cand", _trimmed_merge_cost(cand.shape[2], g * c, w.count)
                    * n_cy * 2 * n_cx)
    cand = merged[:, :, lo_rel : w.hi - bufs.d_lo]
    d_lo = w.lo - 1

    # row extension: corner packs widen every run to the child core width
    ext = img[(y_lo + np.arange(n_y))[None, :, None], gx[:, None, :]]
    ext = _network_sort(ext, counter, "cornerpack")
    rows = np.repeat(bufs.rows, 2, axis=0)
    rows = np.sort(np.concatenate([rows, ext], axis=-1), axis=-1)
    if counter is not None:
        counter.add("extend", (c + g - 1) * 2 * n_cx * n_y)

    # vertical absorb: gained rows arrive already extended
    rel_gy = gy - y_lo
    assert rel_gy.min() >= 0 and rel_gy.max() < n_y
    rpack = rows[np.arange(2 * n_cx)[None, :, None], rel_gy[:, None, :], :]
    rpack = np.sort(rpack.reshape(2 * n_cy, 2 * n_cx, g * c2), axis=-1)
    if counter is not None:
        counter.add("pack", _kway_cost((c2,) * g) * 2 * n_cy * 2 * n_cx)
    cand = np.repeat(cand, 2, axis=0)
    seen_v = c2 * c2
    w2 = retention_window(n_total, seen_v)
    lo_rel = w2.lo - 1 - d_lo
    assert lo_rel >= 0
    merged = np.sort(np.concatenate([cand, rpack], axis=-1), axis=-1)
    if counter is not None:
        counter.add("cand", _trimmed_merge_cost(cand.shape[2], g * c2, w2.count)
                    * 2 * n_cy * 2 * n_cx)
    cand = np.ascontiguousarray(merged[:, :, lo_rel : w2.hi - d_lo])

    # column extension for the next level
    extc = img_t[np.arange(W)[None, :, None], gy[:, None, :]]
    extc = _network_sort(extc, counter, "cornerpack")
    cols = np.repeat(bufs.cols, 2, axis=0)
    cols = np.sort(np.concatenate([cols, extc], axis=-1), axis=-1)
    if counter is not None:
        counter.add("extend", (c + g - 1) * 2 * n_cy * W)

    return replace(bufs, side=g, level=bufs.level + 1,
                   grid=(2 * n_cy, 2 * n_cx), d_lo=w2.lo - 1, n_seen=seen_v,
                   cand=cand, rows=rows, cols=cols)


def pass_finalize(bufs: PassBuffers, counter=None) -> np.ndarray:
    """Complete the last two splits per pixel and write rank-r values.

    At 2x2 tiles each pixel still misses one column run, one row run and one
    corner cell (2k-1 values).  Those are gathered straight from the buffers,
    so no next-level extras are ever materialised.
    """
    if bufs.side != 2:
        raise ValueError(f"finalize expects 2x2 tiles, got side {bufs.side}")
    k = bufs.k
    half = k // 2
    c = bufs.core  # k - 1
    H, W = bufs.image.shape
    n_cy, n_cx = bufs.grid
    py0 = bufs.py0
    out_h = min(n_cy * 2, H - py0)
    img = bufs.image

    px = np.arange(W)
    py = py0 + np.arange(out_h)
    xg = np.clip(np.where(px % 2 == 0, px - half, px + half), 0, W - 1)
    yg = np.clip(np.where(py % 2 == 0, py - half, py + half), 0, H - 1)

    candpix = bufs.cand.repeat(2, axis=0)[: out_h].repeat(2, axis=1)[:, :W]
    colpix = bufs.cols[((py - py0) // 2)[:, None], xg[None, :], :]
    rowpix = bufs.rows[(px // 2)[None, :], (yg - bufs.row_base)[:, None], :]
    corner = img[yg[:, None], xg[None, :]][..., None]

    block = np.concatenate([candpix, colpix, rowpix, corner], axis=-1)
    n_cand = bufs.cand.shape[2]
    rank = (k * k + 1) // 2 - 1 - bufs.d_lo
    assert 0 <= rank < block.shape[-1]
    if counter is not None:
        # fused merge chain per pixel: column, corner into row, then the rest
        counter.add("finalize",
                    (n_cand + c - 1 + c + n_cand + 2 * c) * out_h * W)
    out = np.partition(block, rank, axis=-1)[:, :, rank]
    return np.ascontiguousarray(out)


def _peak_bytes(k: int, t: int, W: int, band_rows: int, itemsize: int) -> int:
    """Rough upper bound on buffer bytes for a band of root-tile rows."""
    H_band = band_rows * t
    n_cx = -(-W // t)
    n_cy = band_rows
    n_y = H_band + k
    peak = 0
    s = t
    while s >= 2:
        c = k - s + 1
        wdw = retention_window(k * k, c * c)
        level = (n_cx * n_y * c + n_cy * W * c
                 + n_cy * n_cx * wdw.count)
        if s == 2:
            level += H_band * W * (wdw.count + 2 * k - 1)  # finalize gather
        peak = max(peak, level)
        n_cx, n_cy = 2 * n_cx, 2 * n_cy
        s //= 2
    return peak * itemsize


def filter_image_aware(image, k, workers: int = 1, slice_budget=None,
                       root=None, counter=None, checksums=None) -> np.ndarray:
    """Median-filter with the multi-pass engine.

    ``slice_budget`` caps intermediate-buffer bytes: when a full-image run
    would exceed it, horizontal bands of root-tile rows run independently
    (each reads the original image, so stitching is exact by construction).
    ``workers`` spreads bands over a thread pool; results are bit-identical
    for any worker count and any slicing.
    """
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty 2-D image")
    k = int(k)
    t = _validate_kernel_root(k, root)
    H, W = img.shape
    n_ty = -(-H // t)

    band_rows = n_ty
    if slice_budget is not None:
        band_rows = 1
        while (band_rows < n_ty
               and _peak_bytes(k, t, W, band_rows + 1, img.itemsize) <= slice_budget):
            band_rows += 1
    if workers > 1:
        band_rows = min(band_rows, max(1, -(-n_ty // workers)))
    bands = [(a, min(a + band_rows, n_ty)) for a in range(0, n_ty, band_rows)]

    out = np.empty_like(img)

    def run_band(band):
        ty0, ty1 = band
        sub = ComparisonCounter() if counter is not None else None
        bufs = pass_init(img, k, root=t, counter=sub, ty_range=band)
        lines = [f"pass=init level=0 checksum={bufs.checksum()}"]
        while bufs.side > 2:
            bufs = pass_extend_level(bufs, counter=sub)
            lines.append(f"pass=extend level={bufs.level} checksum={bufs.checksum()}")
        res = pass_finalize(bufs, counter=sub)
        digest = hashlib.blake2b(res.tobytes(), digest_size=8).hexdigest()
        lines.append(f"pass=finalize level={bufs.level + 1} checksum={digest}")
        return res, sub, lines

    if workers > 1 and len(bands) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_band, bands))
    else:
        results = [run_band(b) for b in bands]

    for (ty0, _), (res, sub, lines) in zip(bands, results):
        out[ty0 * t : ty0 * t + res.shape[0]] = res
        if counter is not None:
            counter.absorb(sub)
        if checksums is not None:
            checksums.extend(lines)
    return out


def comparison_count(k, shape=(128, 128), root=None) -> dict:
    """Model comparisons per pixel on a given image shape.

    The counter only sees shapes, so a zero image gives the same numbers as
    any other input.
    """
    counter = ComparisonCounter()
    img = np.zeros(shape, dtype=np.uint8)
    filter_image_aware(img, k, root=root, counter=counter)
    per_px = counter.total / (shape[0] * shape[1])
    return {"k": int(k), "comparisons_per_pixel": per_px,
            "by_label": dict(counter.by_label), "total": counter.total}
