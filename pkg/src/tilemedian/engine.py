"""Variant selection and the top-level filtering entry point.

Both engines produce exactly the same pixels; they differ in how they spend
their work. The compiled slot-program engine ("oblivious") wins for small
kernels, the multi-pass run-merging engine ("aware") for large ones. The
measured crossover on this implementation sits in the low twenties, so
``auto`` switches at k = 23.
"""

import numpy as np

from .aware import MIN_KERNEL as AWARE_MIN_KERNEL
from .aware import filter_image_aware
from .geometry import KernelSpec
from .oblivious import filter_image_oblivious
from .reference import oracle_median_filter

VARIANTS = ("auto", "oblivious", "aware", "oracle")
AUTO_CROSSOVER = 23


def pick_variant(k) -> str:
    """Resolve ``auto`` to a concrete engine for kernel diameter k."""
    if isinstance(k, KernelSpec):
        return "oblivious"  # the aware engine only handles square kernels
    return "oblivious" if k < AUTO_CROSSOVER else "aware"


def filter_image(image, k, variant="auto", *, root=None, workers=1,
                 slice_budget=None, counter=None, checksums=None):
    """Median-filter ``image`` with the requested engine.

    ``k`` is an odd kernel diameter (or a KernelSpec for rectangular
    kernels, oblivious engine only). Borders replicate edge pixels.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r} (expected one of {VARIANTS})")
    if variant == "auto":
        variant = pick_variant(k)
    if variant == "oracle":
        return oracle_median_filter(image, k)
    if variant == "aware":
        if isinstance(k, KernelSpec):
            raise ValueError("rectangular kernels need the oblivious engine")
        if k < AWARE_MIN_KERNEL:
            raise ValueError(
                f"k={k} is below the aware engine's minimum of {AWARE_MIN_KERNEL}; "
                "use the oblivious engine for small kernels")
        return filter_image_aware(image, k, workers=workers,
                                  slice_budget=slice_budget, root=root,
                                  counter=counter, checksums=checksums)
    return filter_image_oblivious(image, k, root=root, workers=workers)


def filter_planes(image, k, variant="auto", **kwargs) -> np.ndarray:
    """Filter a 2-D image, or each channel of an (H, W, C) image, exactly."""
    image = np.asarray(image)
    if image.ndim == 2:
        return filter_image(image, k, variant, **kwargs)
    if image.ndim == 3:
        planes = [filter_image(image[..., c], k, variant, **kwargs)
                  for c in range(image.shape[2])]
        return np.stack(planes, axis=-1)
    raise ValueError(f"expected a 2-D or (H, W, C) image, got shape {image.shape}")
