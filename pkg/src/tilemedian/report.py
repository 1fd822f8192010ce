"""Operation-count sweeps and oracle-equivalence matrices, with CSV/figures.

Everything here is pure bookkeeping over the engines: sweep kernel sizes and
tabulate per-pixel work, or run images through engine and oracle and compare
bit-for-bit. The CLI feeds these tables to CSV files and renders a companion
figure next to each one.
"""

import csv
from pathlib import Path

import numpy as np

from .aware import comparison_count
from .engine import filter_image
from .geometry import root_tile_size
from .oblivious import compile_plan, op_count
from .reference import TestImageSpec, compare_images, generate, oracle_median_filter

OPCOUNT_FIELDS = ("k", "t", "variant", "ops_per_pixel", "comparisons_per_pixel",
                  "stage_breakdown", "doubling_ratio")
CHECK_FIELDS = ("pattern", "width", "height", "depth", "k", "variant",
                "equal", "mismatches", "first_diff")


def _breakdown_str(parts: dict) -> str:
    return ";".join(f"{label}={value:g}" if isinstance(value, float)
                    else f"{label}={value}"
                    for label, value in sorted(parts.items()))


def opcount_sweep(ks, variant: str) -> list[dict]:
    """One row of per-pixel operation counts for each kernel diameter.

    ``doubling_ratio`` on row k compares against the sweep's row for
    (k-1)/2 — the kernel that k doubles — and is empty when that kernel
    is not part of the sweep.
    """
    rows = []
    per_pixel: dict[int, float] = {}
    for k in ks:
        if variant == "oblivious":
            counts = op_count(compile_plan(k))
            t = counts["tile"][0]
            ops = counts["ops_per_pixel"]
            breakdown = {label: n_ops for label, (_n, n_ops) in counts["breakdown"].items()}
        elif variant == "aware":
            counts = comparison_count(k)
            t = max(root_tile_size(k), 2)
            ops = counts["comparisons_per_pixel"]
            px = counts["total"] / counts["comparisons_per_pixel"]
            breakdown = {label: n / px for label, n in counts["by_label"].items()}
        else:
            raise ValueError(f"no op model for variant {variant!r}")
        per_pixel[k] = ops
        half = (k - 1) // 2
        ratio = f"{ops / per_pixel[half]:.3f}" if half in per_pixel else ""
        rows.append({
            "k": k, "t": t, "variant": variant,
            "ops_per_pixel": f"{ops:.4f}",
            "comparisons_per_pixel": f"{ops:.4f}",
            "stage_breakdown": _breakdown_str(breakdown),
            "doubling_ratio": ratio,
        })
    return rows


def write_csv(rows: list[dict], fieldnames, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def figure_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def render_opcount_figure(rows: list[dict], path) -> None:
    """Log-log per-pixel cost against kernel diameter, saved to ``path``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for variant in sorted({r["variant"] for r in rows}):
        ks = [r["k"] for r in rows if r["variant"] == variant]
        ops = [float(r["ops_per_pixel"]) for r in rows if r["variant"] == variant]
        ax.plot(ks, ops, marker="o", label=variant)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("kernel diameter k")
    ax.set_ylabel("operations per pixel")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# oracle-equivalence matrix

MATRIX_PATTERNS = (("constant", 0.0), ("gradient", 0.0), ("random", 0.0),
                   ("impulse", 0.3))
FULL_SIZES = ((64, 64), (97, 61))
FULL_DEPTHS = (8, 16, 32)
FULL_KERNELS = {"oblivious": (3, 5, 7, 9, 11, 15), "aware": (9, 11, 15, 25, 31)}
SMALL_SIZES = ((64, 64),)
SMALL_DEPTHS = (8,)
SMALL_KERNELS = {"oblivious": (3, 9), "aware": (9, 25)}
MATRIX_SEED = 42


def matrix_cells(matrix: str = "small", variants=("oblivious", "aware")):
    """Enumerate (spec, k, variant) cells of the equivalence matrix."""
    if matrix == "full":
        sizes, depths, kernels = FULL_SIZES, FULL_DEPTHS, FULL_KERNELS
    elif matrix == "small":
        sizes, depths, kernels = SMALL_SIZES, SMALL_DEPTHS, SMALL_KERNELS
    else:
        raise ValueError(f"unknown matrix {matrix!r} (expected 'small' or 'full')")
    for pattern, density in MATRIX_PATTERNS:
        for width, height in sizes:
            for depth in depths:
                spec = TestImageSpec(pattern, width, height, depth,
                                     seed=MATRIX_SEED, density=density or 0.3)
                for variant in variants:
                    for k in kernels[variant]:
                        yield spec, k, variant


def run_matrix(matrix: str = "small", variants=("oblivious", "aware")) -> list[dict]:
    """Filter every matrix cell with engine and oracle; report per-cell equality."""
    rows = []
    images: dict[TestImageSpec, np.ndarray] = {}
    oracles: dict[tuple, np.ndarray] = {}
    for spec, k, variant in matrix_cells(matrix, variants):
        if spec not in images:
            images[spec] = generate(spec)
        img = images[spec]
        key = (spec, k)
        if key not in oracles:
            oracles[key] = oracle_median_filter(img, k)
        got = filter_image(img, k, variant)
        cmp = compare_images(got, oracles[key])
        rows.append({
            "pattern": spec.pattern, "width": spec.width, "height": spec.height,
            "depth": spec.depth, "k": k, "variant": variant,
            "equal": cmp.equal, "mismatches": cmp.mismatches,
            "first_diff": "" if cmp.first_diff is None else "%d,%d" % cmp.first_diff,
        })
    return rows


def render_check_figure(rows: list[dict], path) -> None:
    """Pass/fail grid over (image case, kernel/variant), saved to ``path``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cases = sorted({(r["pattern"], r["width"], r["height"], r["depth"]) for r in rows})
    cols = sorted({(r["variant"], r["k"]) for r in rows})
    grid = np.full((len(cases), len(cols)), np.nan)
    for r in rows:
        i = cases.index((r["pattern"], r["width"], r["height"], r["depth"]))
        j = cols.index((r["variant"], r["k"]))
        grid[i, j] = 1.0 if r["equal"] else 0.0

    fig, ax = plt.subplots(figsize=(1 + 0.5 * len(cols), 1 + 0.4 * len(cases)))
    ax.imshow(grid, cmap="RdYlGn", vmin=0, vmax=1, aspect="auto")
    ax.set_xticks(range(len(cols)),
                  [f"{v[:2]}:{k}" for v, k in cols], rotation=90, fontsize=7)
    ax.set_yticks(range(len(cases)),
                  [f"{p} {w}x{h}/{d}" for p, w, h, d in cases], fontsize=7)
    ax.set_title("engine vs oracle (green = bit-identical)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
