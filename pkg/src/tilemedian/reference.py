"""Brute-force reference filter and deterministic test images.

The reference path computes every output pixel independently with a rank
selection over the clamped window — no tiling, no shared work — so the tiled
engines can be checked against it bit for bit. Image generation uses a
counter-based generator keyed by the seed, which keeps patterns reproducible
across platforms and numpy versions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import KernelSpec


def _as_kernel(k) -> KernelSpec:
    if isinstance(k, KernelSpec):
        return k
    return KernelSpec.square(int(k))


def oracle_median_filter(image: np.ndarray, k) -> np.ndarray:
    """Exact median filter with edge-replicated borders.

    ``image`` is a 2-D array indexed [y, x]; ``k`` is an odd window width or a
    kernel spec. Each output pixel is the rank-(n+1)/2 value of its window,
    which for odd window sizes is the standard median.
    """
    kern = _as_kernel(k)
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    padded = np.pad(img, ((kern.half_h, kern.half_h), (kern.half_w, kern.half_w)),
                    mode="edge")
    windows = sliding_window_view(padded, (kern.k_h, kern.k_w))
    flat = windows.reshape(img.shape[0], img.shape[1], kern.count)
    rank = kern.median_rank - 1  # 0-based
    part = np.partition(flat, rank, axis=2)
    return np.ascontiguousarray(part[:, :, rank])


_DTYPES = {8: np.uint8, 16: np.uint16, 32: np.uint32}
PATTERNS = ("constant", "gradient", "random", "impulse")


@dataclass(frozen=True)
class TestImageSpec:
    """Recipe for a reproducible test image."""

    __test__ = False  # keep pytest from collecting this as a test case

    pattern: str
    width: int
    height: int
    depth: int = 8
    seed: int = 0
    density: float = 0.3  # impulse only: fraction of pixels replaced

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown pattern {self.pattern!r} (expected one of {PATTERNS})")
        if self.depth not in _DTYPES:
            raise ValueError(f"unsupported depth {self.depth} (expected 8, 16, or 32)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError("density must be within [0, 1]")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def generate(spec: TestImageSpec) -> np.ndarray:
    """Render ``spec`` to a (height, width) array of the requested depth."""
    dtype = _DTYPES[spec.depth]
    max_val = np.iinfo(dtype).max
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width]

    if spec.pattern == "constant":
        return np.full((spec.height, spec.width), 1 << (spec.depth - 1), dtype=dtype)
    if spec.pattern == "gradient":
        return ((xs + ys) & max_val).astype(dtype)
    if spec.pattern == "random":
        rng = _rng(spec.seed)
        return rng.integers(0, max_val, size=(spec.height, spec.width),
                            endpoint=True, dtype=dtype)
    # impulse: salt-and-pepper noise over the gradient base
    rng = _rng(spec.seed)
    img = ((xs + ys) & max_val).astype(dtype)
    hit = rng.random(size=img.shape) < spec.density
    salt = rng.random(size=img.shape) < 0.5
    img[hit & salt] = max_val
    img[hit & ~salt] = 0
    return img


@dataclass(frozen=True)
class ImageComparison:
    equal: bool
    mismatches: int
    max_abs_diff: int
    first_diff: tuple[int, int] | None  # (y, x)

    def __bool__(self) -> bool:
        return self.equal


def compare_images(a: np.ndarray, b: np.ndarray) -> ImageComparison:
    """Pixel-exact comparison with a useful summary on mismatch."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.int64) - b.astype(np.int64)
    bad = diff != 0
    n_bad = int(bad.sum())
    if n_bad == 0:
        return ImageComparison(True, 0, 0, None)
    ys, xs = np.nonzero(bad)
    return ImageComparison(False, n_bad, int(np.abs(diff).max()),
                           (int(ys[0]), int(xs[0])))
