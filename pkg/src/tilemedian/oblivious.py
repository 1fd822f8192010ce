"""Data-oblivious tiled median engine.

``compile_plan`` turns a kernel size and a root tile shape into a straight-
line selection program: a sequence of comparator-network stages over virtual
value slots, with every slot written exactly once. Running the program on a
tile's footprint pixels produces the median for every pixel of the tile; the
comparison sequence never depends on the data.

The program follows the tile hierarchy. Footprint columns are sorted once at
core height, the core columns merge into a candidate pool that is immediately
trimmed to the ranks that can still become the median, and each recursive
tile split then merges the runs that join the smaller tile's core, re-trims
the candidate window, and extends the surviving runs with the corner cells
they absorb. At the 1x1 leaves the window has shrunk to a single slot, the
median. A final backward pass over the whole program prunes every network to
the wires later stages actually read; column sorts are exempt because the
image driver shares them between horizontally adjacent tiles.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .geometry import (
    KernelSpec,
    Rect,
    TileDims,
    TileGeometry,
    region_partition,
    retention_window,
    root_tile_size,
    split_map,
    tile_schedule,
)
from .networks import (
    ComparatorNetwork,
    OutputRequest,
    live_input_wires,
    make_sorter,
    multiway_merge,
    oddeven_merge,
    prune,
)

MAX_TILE_AREA = 256
DRIVER_ROOT_CAP = 16


@dataclass(frozen=True)
class Stage:
    """One comparator-network step of a selection program.

    The network runs over ``in_slots`` (wire i reads in_slots[i]); the wires
    in the inclusive ``keep`` range are copied to ``out_slots``. Candidate
    stages carry the running sample count and the absolute rank window that
    survives them.
    """

    label: str
    group: str  # colsort rowsort core pack cand cornersort extend
    in_slots: tuple[int, ...]
    net: ComparatorNetwork
    keep: tuple[int, int]
    out_slots: tuple[int, ...]
    seen: int | None = None
    window: tuple[int, int] | None = None

    def describe(self) -> str:
        lo, hi = self.keep
        line = (f"stage {self.label}: in={len(self.in_slots)} "
                f"net_ops={self.net.size()} keep=[{lo},{hi}]")
        if self.window is not None:
            line += f" window=[{self.window[0]},{self.window[1]}] seen={self.seen}"
        return line


@dataclass(frozen=True)
class SelectionProgram:
    """A compiled, data-independent median program for one tile shape."""

    kernel: KernelSpec
    root: TileDims
    n_slots: int
    stages: tuple[Stage, ...]
    footprint: Rect  # anchor-relative
    output_slots: tuple[tuple[int, ...], ...]  # [t_h][t_w]
    colsort_stages: tuple[int, ...]  # stage indices, one per footprint column

    def dump(self) -> list[str]:
        head = (f"plan k={self.kernel.k_w} tile={self.root.t_w}x{self.root.t_h} "
                f"slots={self.n_slots} stages={len(self.stages)}")
        return [head] + [st.describe() for st in self.stages]

    def stage_breakdown(self) -> dict[str, tuple[int, int]]:
        """Per group: (stage count, network ops) for one tile."""
        out: dict[str, tuple[int, int]] = {}
        for st in self.stages:
            n, ops = out.get(st.group, (0, 0))
            out[st.group] = (n + 1, ops + st.net.size())
        return out


class _Builder:
    def __init__(self, n_pixels: int):
        self.n_slots = n_pixels
        self.stages: list[Stage] = []

    def alloc(self, n: int) -> tuple[int, ...]:
        out = tuple(range(self.n_slots, self.n_slots + n))
        self.n_slots += n
        return out

    def add(self, label, group, in_slots, net, keep, *, seen=None, window=None):
        out = self.alloc(keep[1] - keep[0] + 1)
        self.stages.append(Stage(label, group, tuple(in_slots), net, keep, out,
                                 seen=seen, window=window))
        return out


def _compile(kern: KernelSpec, dims: TileDims, library) -> SelectionProgram:
    geo = region_partition((0, 0), dims, kern)
    fp = geo.footprint
    n_total = kern.count

    def pixel_slot(cell):
        x, y = cell
        return (y - fp.y0) * fp.w + (x - fp.x0)

    b = _Builder(fp.area)

    # one full-height column sort per footprint column; these stay unpruned
    # so the driver can substitute shared presorted columns
    col_runs: dict[int, tuple[int, ...]] = {}
    colsort_idx = []
    col_sorter = make_sorter(geo.core.h, library)
    for x in fp.xs():
        ins = [pixel_slot((x, y)) for y in geo.core.ys()]
        colsort_idx.append(len(b.stages))
        col_runs[x] = b.add(f"column sort x={x}", "colsort", ins, col_sorter,
                            (0, geo.core.h - 1))

    row_runs: dict[int, tuple[int, ...]] = {}
    row_sorter = make_sorter(geo.core.w, library)
    for y in geo.extra_row_ys:
        ins = [pixel_slot(c) for c in geo.row_cells(y)]
        row_runs[y] = b.add(f"row sort y={y}", "rowsort", ins, row_sorter,
                            (0, geo.core.w - 1))

    corners = {c: pixel_slot(c) for c in geo.corner_cells}

    # core pool: merge the core columns, keep only ranks that can still win
    n_seen = geo.core.area
    w = retention_window(n_total, n_seen)
    core_runs = [col_runs[x] for x in geo.core.xs()]
    net = prune(multiway_merge((geo.core.h,) * geo.core.w),
                OutputRequest.of(range(w.lo - 1, w.hi)))
    cand = b.add("core merge", "core",
                 [s for run in core_runs for s in run], net,
                 (w.lo - 1, w.hi - 1), seen=n_seen, window=(w.lo, w.hi))

    outputs = {}

    def descend(geo, col_runs, row_runs, corners, cand, d_lo, n_seen):
        if geo.dims.is_leaf:
            assert n_seen == n_total and len(cand) == 1
            assert not col_runs and not row_runs and not corners
            outputs[geo.anchor] = cand[0]
            return
        sm = split_map(geo)
        for tr in sm.children:
            child = tr.child
            tag = f"{child.dims.t_w}x{child.dims.t_h}@{child.anchor}"

            runs = ([col_runs[x] for x in tr.merged_into_core] if sm.axis == "h"
                    else [row_runs[y] for y in tr.merged_into_core])
            if len(runs) == 1:
                pack = runs[0]
            else:
                sizes = tuple(len(r) for r in runs)
                pack = b.add(f"pack merge {tag}", "pack",
                             [s for r in runs for s in r],
                             multiway_merge(sizes), (0, sum(sizes) - 1))

            p, q = len(cand), len(pack)
            seen2 = n_seen + q
            w = retention_window(n_total, seen2)
            rel = (w.lo - 1 - d_lo, w.hi - 1 - d_lo)
            assert 0 <= rel[0] <= rel[1] < p + q
            net = prune(oddeven_merge(p, q), OutputRequest.of(range(rel[0], rel[1] + 1)))
            child_cand = b.add(f"candidate merge {tag}", "cand",
                               list(cand) + list(pack), net, rel,
                               seen=seen2, window=(w.lo, w.hi))

            # surviving runs of the split axis pass through untouched;
            # runs of the other axis absorb the corners over the wider core
            if sm.axis == "h":
                new_cols = {x: col_runs[x] for x in child.extra_col_xs}
                old_other, key_name = row_runs, "y"
            else:
                new_rows = {y: row_runs[y] for y in child.extra_row_ys}
                old_other, key_name = col_runs, "x"
            extended = {}
            for key, cells in tr.extended_runs:
                add_slots = [corners[c] for c in cells]
                if len(add_slots) > 1:
                    add_slots = b.add(f"corner sort {key_name}={key} {tag}",
                                      "cornersort", add_slots,
                                      make_sorter(len(add_slots), library),
                                      (0, len(add_slots) - 1))
                run = old_other[key]
                merged = b.add(f"run extend {key_name}={key} {tag}", "extend",
                               list(run) + list(add_slots),
                               oddeven_merge(len(run), len(add_slots)),
                               (0, len(run) + len(add_slots) - 1))
                extended[key] = merged
            if sm.axis == "h":
                new_rows = extended
            else:
                new_cols = extended

            descend(child, new_cols, new_rows,
                    {c: corners[c] for c in tr.kept_corners},
                    child_cand, w.lo - 1, seen2)

    descend(geo, {x: col_runs[x] for x in geo.extra_col_xs}, row_runs,
            corners, cand, w.lo - 1, n_seen)

    out_grid = tuple(
        tuple(outputs[(x, y)] for x in range(dims.t_w)) for y in range(dims.t_h)
    )
    stages = _prune_program(b.stages, out_grid)
    return SelectionProgram(kern, dims, b.n_slots, stages, fp, out_grid,
                            tuple(colsort_idx))


def _prune_program(stages: list[Stage], out_grid) -> tuple[Stage, ...]:
    """Backward pass: trim every network to the wires later stages read."""
    live = {s for row in out_grid for s in row}
    pruned: list[Stage] = []
    for st in reversed(stages):
        lo, _ = st.keep
        if st.group == "colsort":
            req = range(st.net.wire_count)
        else:
            req = [lo + i for i, s in enumerate(st.out_slots) if s in live]
            assert req, f"dead stage {st.label}"
        net = prune(st.net, OutputRequest.of(req))
        live.update(st.in_slots[w] for w in live_input_wires(net, req))
        pruned.append(replace(st, net=net))
    pruned.reverse()
    return tuple(pruned)


def compile_plan(k, root=None, library=None) -> SelectionProgram:
    """Build the selection program for kernel ``k`` and a square root tile."""
    kern = k if isinstance(k, KernelSpec) else KernelSpec.square(int(k))
    if root is None:
        root = root_tile_size(max(kern.k_w, kern.k_h))
    dims = root if isinstance(root, TileDims) else TileDims(int(root), int(root))
    if dims.area > MAX_TILE_AREA:
        raise ValueError(f"tile {dims.t_w}x{dims.t_h} exceeds {MAX_TILE_AREA} outputs")
    if library is None:
        return _compile_cached(kern, dims)
    return _compile(kern, dims, library)


@lru_cache(maxsize=32)
def _compile_cached(kern: KernelSpec, dims: TileDims) -> SelectionProgram:
    return _compile(kern, dims, None)


# ---------------------------------------------------------------------------
# execution


def _run_stages(program: SelectionProgram, scratch: np.ndarray, skip=()):
    skip = frozenset(skip)
    for idx, st in enumerate(program.stages):
        if idx in skip:
            continue
        vals = scratch[:, st.in_slots]
        out = st.net.apply_to_rows(vals)
        scratch[:, st.out_slots] = out[:, st.keep[0] : st.keep[1] + 1]


def run_tile(program: SelectionProgram, footprint: np.ndarray) -> np.ndarray:
    """Run one tile from its footprint pixel block (shape fp.h x fp.w)."""
    fp = program.footprint
    footprint = np.asarray(footprint)
    if footprint.shape != (fp.h, fp.w):
        raise ValueError(f"expected footprint {fp.h}x{fp.w}, got {footprint.shape}")
    scratch = np.empty((1, program.n_slots), dtype=footprint.dtype)
    scratch[0, : fp.area] = footprint.reshape(-1)
    _run_stages(program, scratch)
    rows = [scratch[0, list(row)] for row in program.output_slots]
    return np.stack(rows)


def op_count(program: SelectionProgram) -> dict:
    """Comparator and instruction counts, per tile and amortised per pixel.

    Amortisation models the steady state of a tile row: every footprint
    column sort is shared with the horizontally adjacent tiles, so advancing
    one tile costs only t_w fresh column sorts.
    """
    t_w, t_h = program.root.t_w, program.root.t_h
    per_col = program.stages[program.colsort_stages[0]].net.size()
    per_col_mm = program.stages[program.colsort_stages[0]].net.instruction_count()
    n_cols = len(program.colsort_stages)
    total = sum(st.net.size() for st in program.stages)
    minmax = sum(st.net.instruction_count() for st in program.stages)
    shared = total - n_cols * per_col + t_w * per_col
    shared_mm = minmax - n_cols * per_col_mm + t_w * per_col_mm
    return {
        "k": program.kernel.k_w,
        "tile": (t_w, t_h),
        "ops_per_tile": total,
        "ops_per_tile_shared": shared,
        "ops_per_pixel": shared / (t_w * t_h),
        "minmax_per_pixel": shared_mm / (t_w * t_h),
        "breakdown": program.stage_breakdown(),
    }


def filter_image_oblivious(image: np.ndarray, k, root=None, workers=1,
                           library=None) -> np.ndarray:
    """Median-filter a 2-D image with the compiled oblivious engine.

    Tiles are processed a tile row at a time; within a band every stage runs
    vectorised across all tiles at once, and the per-column sorts are computed
    once per band and injected into every footprint that uses them. Borders
    replicate edge pixels. ``workers`` only splits bands across threads; each
    band writes a disjoint output region, so results are identical for any
    worker count.
    """
    kern = k if isinstance(k, KernelSpec) else KernelSpec.square(int(k))
    if root is None:
        root = min(root_tile_size(max(kern.k_w, kern.k_h)), DRIVER_ROOT_CAP)
    program = compile_plan(kern, root, library)
    dims = program.root
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    h, w = img.shape
    result = np.empty_like(img)
    fp = program.footprint
    anchors = tile_schedule((w, h), dims)
    bands: dict[int, list[int]] = {}
    for x0, y0 in anchors:
        bands.setdefault(y0, []).append(x0)

    core_dy0 = dims.t_h - 1 - kern.half_h  # core top relative to anchor
    core_h = kern.k_h - dims.t_h + 1

    def do_band(y0: int):
        xs0 = bands[y0]
        n_t = len(xs0)
        scratch = np.empty((n_t, program.n_slots), dtype=img.dtype)
        ys = np.clip(y0 + np.arange(fp.y0, fp.y0 + fp.h), 0, h - 1)
        xs = np.clip(np.asarray(xs0)[:, None] + np.arange(fp.x0, fp.x0 + fp.w)[None, :],
                     0, w - 1)
        scratch[:, : fp.area] = img[ys[None, :, None], xs[:, None, :]].reshape(n_t, -1)

        # shared column sorts: adjacent tiles reuse all but t_w columns
        band_xs = np.clip(xs0[0] + fp.x0 + np.arange((n_t - 1) * dims.t_w + fp.w),
                          0, w - 1)
        core_ys = np.clip(y0 + core_dy0 + np.arange(core_h), 0, h - 1)
        sorted_cols = np.sort(img[core_ys[:, None], band_xs[None, :]], axis=0)
        for ci, st_idx in enumerate(program.colsort_stages):
            st = program.stages[st_idx]
            cols = np.arange(n_t) * dims.t_w + ci
            scratch[:, st.out_slots] = sorted_cols[:, cols].T

        _run_stages(program, scratch, skip=program.colsort_stages)

        out_rows = min(dims.t_h, h - y0)
        for dy in range(out_rows):
            row_slots = list(program.output_slots[dy])
            vals = scratch[:, row_slots]  # (n_t, t_w)
            for i, x0 in enumerate(xs0):
                result[y0 + dy, x0 : min(x0 + dims.t_w, w)] = vals[i, : min(dims.t_w, w - x0)]

    band_ys = sorted(bands)
    if workers <= 1:
        for y0 in band_ys:
            do_band(y0)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(do_band, band_ys))
    return result
