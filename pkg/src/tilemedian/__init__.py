"""Exact median filtering with data-oblivious selection networks.

The package is organised around a tile hierarchy: a median window is filtered
for a whole tile of output pixels at once, and the tile is recursively split
while provably irrelevant samples are discarded. Two engines share that
geometry — a compiled slot-program engine and a batched in-place engine —
plus a brute-force reference, comparator-network tooling, and a CLI.
"""

from .geometry import (
    KernelSpec,
    RetentionWindow,
    TileDims,
    TileGeometry,
    region_partition,
    retention_window,
    root_tile_size,
    split_map,
    tile_dims_at_depth,
    tile_schedule,
)
from .networks import (
    Claim,
    ComparatorNetwork,
    OutputRequest,
    VerifyResult,
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
from .reference import (
    ImageComparison,
    TestImageSpec,
    compare_images,
    generate,
    oracle_median_filter,
)
from .oblivious import (
    SelectionProgram,
    Stage,
    compile_plan,
    filter_image_oblivious,
    op_count,
    run_tile,
)
from .aware import (
    ComparisonCounter,
    MergePathSplit,
    PassBuffers,
    comparison_count,
    filter_image_aware,
    kway_merge_binary,
    merge_path_partition,
    pass_extend_level,
    pass_finalize,
    pass_init,
    transpose,
)
from .engine import filter_image, filter_planes, pick_variant
from .pnm import read_image, write_image

__version__ = "0.1.0"

__all__ = [
    "KernelSpec",
    "RetentionWindow",
    "TileDims",
    "TileGeometry",
    "region_partition",
    "retention_window",
    "root_tile_size",
    "split_map",
    "tile_dims_at_depth",
    "tile_schedule",
    "Claim",
    "ComparatorNetwork",
    "OutputRequest",
    "VerifyResult",
    "batcher_sort",
    "load_network_file",
    "make_sorter",
    "multiway_merge",
    "oddeven_merge",
    "pairwise_sort",
    "prune",
    "save_network_file",
    "verify_zero_one",
    "ImageComparison",
    "TestImageSpec",
    "compare_images",
    "generate",
    "oracle_median_filter",
    "SelectionProgram",
    "Stage",
    "compile_plan",
    "filter_image_oblivious",
    "op_count",
    "run_tile",
    "ComparisonCounter",
    "MergePathSplit",
    "PassBuffers",
    "comparison_count",
    "filter_image_aware",
    "kway_merge_binary",
    "merge_path_partition",
    "pass_extend_level",
    "pass_finalize",
    "pass_init",
    "transpose",
    "filter_image",
    "filter_planes",
    "pick_variant",
    "read_image",
    "write_image",
    "__version__",
]
