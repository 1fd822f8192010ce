"""Tile geometry for hierarchically tiled median filtering.

Pure coordinate arithmetic shared by both filtering engines: footprint
partitions, the tile-splitting recursion, retention windows for forgetful
median selection, and tile scheduling over an image grid. Everything here is
side-effect free and safe to call concurrently.

Conventions: pixel (x, y) has x growing rightwards and y downwards. A tile
anchored at (X0, Y0) with dims t_w x t_h owns the pixels
[X0, X0+t_w) x [Y0, Y0+t_h). A "horizontal" split halves t_w, a "vertical"
split halves t_h. Coordinates may be negative; image-space clamping is the
callers' concern.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache


def _is_pow2(v: int) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


@dataclass(frozen=True)
class KernelSpec:
    """Odd rectangular kernel. The engines and CLI only expose square ones."""

    k_w: int
    k_h: int

    def __post_init__(self) -> None:
        for side in (self.k_w, self.k_h):
            if side < 3 or side % 2 == 0:
                raise ValueError(
                    f"kernel sides must be odd and >= 3, got {self.k_w}x{self.k_h}"
                )

    @classmethod
    def square(cls, k: int) -> "KernelSpec":
        return cls(k, k)

    @property
    def half_w(self) -> int:
        return (self.k_w - 1) // 2

    @property
    def half_h(self) -> int:
        return (self.k_h - 1) // 2

    @property
    def count(self) -> int:
        return self.k_w * self.k_h

    @property
    def median_rank(self) -> int:
        """1-based rank of the median among ``count`` values."""
        return (self.count + 1) // 2


@dataclass(frozen=True)
class TileDims:
    """Tile width/height (each a power of two) plus its depth in the split tree."""

    t_w: int
    t_h: int
    depth: int = 0

    def __post_init__(self) -> None:
        if not (_is_pow2(self.t_w) and _is_pow2(self.t_h)):
            raise ValueError(f"tile sides must be powers of two, got {self.t_w}x{self.t_h}")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")

    @property
    def area(self) -> int:
        return self.t_w * self.t_h

    @property
    def is_leaf(self) -> bool:
        return self.t_w == 1 and self.t_h == 1


def split_axis(dims: TileDims) -> str:
    """Which side the next split halves: 'h' (width) when t_w >= t_h, else 'v'."""
    return "h" if dims.t_w >= dims.t_h else "v"


def root_tile_size(k: int) -> int:
    """Default root tile side for a square k x k kernel.

    Uses the power-of-two heuristic t = 2**(floor(log2 k) - 1), which keeps
    k/4 < t < k/2 so that tile cores stay a little over half the kernel.
    """
    if k < 3 or k % 2 == 0:
        raise ValueError(f"kernel side must be odd and >= 3, got {k}")
    return 1 << (k.bit_length() - 2)


def tile_dims_at_depth(root: TileDims, i: int) -> TileDims:
    """Dims after ``i`` splits of ``root``, halving t_w first whenever t_w >= t_h."""
    max_depth = (root.t_w * root.t_h - 1).bit_length()
    if not 0 <= i <= max_depth:
        raise ValueError(f"depth {i} outside [0, {max_depth}] for {root.t_w}x{root.t_h}")
    t_w, t_h = root.t_w, root.t_h
    for _ in range(i):
        if t_w >= t_h:
            t_w //= 2
        else:
            t_h //= 2
    return TileDims(t_w, t_h, depth=root.depth + i)


@dataclass(frozen=True)
class Rect:
    """Half-open integer rectangle [x0, x0+w) x [y0, y0+h)."""

    x0: int
    y0: int
    w: int
    h: int

    @property
    def x1(self) -> int:
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        return self.y0 + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def xs(self) -> range:
        return range(self.x0, self.x1)

    def ys(self) -> range:
        return range(self.y0, self.y1)

    def cells(self) -> list[tuple[int, int]]:
        return [(x, y) for y in self.ys() for x in self.xs()]

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class TileGeometry:
    """Partition of one tile's footprint into core, extras, and corners.

    The footprint is the union of all kernel windows of the tile's pixels,
    the core their intersection. Extra columns flank the core left/right at
    core height, extra rows above/below at core width, and the four corner
    rectangles fill what remains.
    """

    anchor: tuple[int, int]
    dims: TileDims
    kernel: KernelSpec
    footprint: Rect
    core: Rect
    left_cols: tuple[int, ...]
    right_cols: tuple[int, ...]
    top_rows: tuple[int, ...]
    bottom_rows: tuple[int, ...]

    @property
    def extra_col_xs(self) -> tuple[int, ...]:
        return self.left_cols + self.right_cols

    @property
    def extra_row_ys(self) -> tuple[int, ...]:
        return self.top_rows + self.bottom_rows

    def col_cells(self, x: int) -> list[tuple[int, int]]:
        """Cells of the extra column at ``x`` (core height)."""
        return [(x, y) for y in self.core.ys()]

    def row_cells(self, y: int) -> list[tuple[int, int]]:
        """Cells of the extra row at ``y`` (core width)."""
        return [(x, y) for x in self.core.xs()]

    @property
    def corner_cells(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (x, y) for y in self.extra_row_ys for x in self.extra_col_xs
        )

    @property
    def corner_rects(self) -> tuple[Rect, ...]:
        c, f = self.core, self.footprint
        cw = self.dims.t_w - 1
        ch = self.dims.t_h - 1
        return (
            Rect(f.x0, f.y0, cw, ch),
            Rect(c.x1, f.y0, cw, ch),
            Rect(f.x0, c.y1, cw, ch),
            Rect(c.x1, c.y1, cw, ch),
        )


def region_partition(
    anchor: tuple[int, int], dims: TileDims, kernel: KernelSpec
) -> TileGeometry:
    """Compute footprint/core/extras/corners for one tile.

    Requires tile sides not exceeding the kernel sides, otherwise the kernel
    windows of the tile's pixels have an empty intersection.
    """
    if dims.t_w > kernel.k_w or dims.t_h > kernel.k_h:
        raise ValueError(
            f"tile {dims.t_w}x{dims.t_h} larger than kernel {kernel.k_w}x{kernel.k_h}"
        )
    x0, y0 = anchor
    hw, hh = kernel.half_w, kernel.half_h
    footprint = Rect(x0 - hw, y0 - hh, kernel.k_w + dims.t_w - 1, kernel.k_h + dims.t_h - 1)
    core = Rect(
        x0 + dims.t_w - 1 - hw,
        y0 + dims.t_h - 1 - hh,
        kernel.k_w - dims.t_w + 1,
        kernel.k_h - dims.t_h + 1,
    )
    left = tuple(range(footprint.x0, core.x0))
    right = tuple(range(core.x1, footprint.x1))
    top = tuple(range(footprint.y0, core.y0))
    bottom = tuple(range(core.y1, footprint.y1))
    return TileGeometry(anchor, dims, kernel, footprint, core, left, right, top, bottom)


@dataclass(frozen=True)
class RetentionWindow:
    """Seen-rank window that must be retained for the median to stay reachable.

    With n_seen of n_total values seen and m = n_total - n_seen still unseen,
    the overall median can only be one of the seen values whose 1-based rank
    among the seen lies in [lo, hi]; at most m+1 ranks survive. d_lo/d_hi are
    the counts safely discarded below/above the window.
    """

    n_total: int
    n_seen: int
    lo: int
    hi: int

    @property
    def count(self) -> int:
        return self.hi - self.lo + 1

    @property
    def d_lo(self) -> int:
        return self.lo - 1

    @property
    def d_hi(self) -> int:
        return self.n_seen - self.hi


def retention_window(n_total: int, n_seen: int) -> RetentionWindow:
    """Median retention window after seeing ``n_seen`` of ``n_total`` values."""
    if n_total < 1 or n_total % 2 == 0:
        raise ValueError(f"n_total must be odd and positive, got {n_total}")
    if not 1 <= n_seen <= n_total:
        raise ValueError(f"n_seen must be in [1, {n_total}], got {n_seen}")
    r = (n_total + 1) // 2
    m = n_total - n_seen
    lo = max(1, r - m)
    hi = min(n_seen, r)
    return RetentionWindow(n_total, n_seen, lo, hi)


@dataclass(frozen=True)
class ChildTransfer:
    """Where one child's footprint data comes from within its parent.

    ``merged_into_core`` lists the parent extra-column x's (horizontal split)
    or extra-row y's (vertical split) whose runs merge into the child core.
    ``extended_runs`` maps each surviving run of the *other* orientation to
    the parent corner cells appended to it. ``kept_corners`` are the parent
    corner cells that stay corners of the child.
    """

    child: TileGeometry
    merged_into_core: tuple[int, ...]
    extended_runs: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]
    kept_corners: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SplitMap:
    parent: TileGeometry
    axis: str
    children: tuple[ChildTransfer, ChildTransfer]


def split_map(parent: TileGeometry) -> SplitMap:
    """Split one tile into its two children and map parent data to each child.

    The split halves t_w when t_w >= t_h (horizontal), else t_h (vertical).
    Per child, the innermost half of the extra columns (rows) on the child's
    side joins the core, each surviving extra row (column) absorbs the corner
    cells that now sit over the widened core, and the remaining corners carry
    over unchanged. Everything else of the parent footprint is dropped.
    """
    dims = parent.dims
    if dims.is_leaf:
        raise ValueError("cannot split a 1x1 tile")
    axis = split_axis(dims)
    x0, y0 = parent.anchor
    if axis == "h":
        cd = TileDims(dims.t_w // 2, dims.t_h, depth=dims.depth + 1)
        anchors = [(x0, y0), (x0 + cd.t_w, y0)]
    else:
        cd = TileDims(dims.t_w, dims.t_h // 2, depth=dims.depth + 1)
        anchors = [(x0, y0), (x0, y0 + cd.t_h)]

    transfers = []
    for ca in anchors:
        child = region_partition(ca, cd, parent.kernel)
        if axis == "h":
            merged = tuple(x for x in child.core.xs() if x not in parent.core.xs())
            extended = tuple(
                (y, tuple((x, y) for x in merged)) for y in child.extra_row_ys
            )
        else:
            merged = tuple(y for y in child.core.ys() if y not in parent.core.ys())
            extended = tuple(
                (x, tuple((x, y) for y in merged)) for x in child.extra_col_xs
            )
        kept = tuple(
            (x, y) for y in child.extra_row_ys for x in child.extra_col_xs
        )
        transfers.append(ChildTransfer(child, merged, extended, kept))

    half = (dims.t_w if axis == "h" else dims.t_h) // 2
    for tr in transfers:
        assert len(tr.merged_into_core) == half
    return SplitMap(parent, axis, (transfers[0], transfers[1]))


@lru_cache(maxsize=None)
def _schedule_ranges(size: int, step: int) -> tuple[int, ...]:
    return tuple(range(0, size, step))


def tile_schedule(
    image_dims: tuple[int, int], root: TileDims
) -> list[tuple[int, int]]:
    """Row-major root-tile anchors covering a width x height image.

    Anchors are multiples of the root tile sides; tiles overhanging the image
    edge stay in the schedule and rely on clamped reads plus masked writes.
    """
    width, height = image_dims
    if width < 1 or height < 1:
        raise ValueError(f"image dims must be positive, got {width}x{height}")
    return [
        (x, y)
        for y in _schedule_ranges(height, root.t_h)
        for x in _schedule_ranges(width, root.t_w)
    ]
