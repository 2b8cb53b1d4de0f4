"""Raster preprocessing: joint crop, resize/grayscale, histogram
equalization, and the float encoding fed to the network.

The crop skip rule is evaluated on the padded, squared candidate box: with
100 px padding the re-applied pipeline always skips, which keeps the whole
preprocessing pass idempotent on already-processed records.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .records import SampleRecord


class EmptyMaskError(ValueError):
    pass


def _grow(lo: int, hi: int, need: int, size: int) -> tuple[int, int]:
    """Widen the inclusive range [lo, hi] by ``need``, clamped to [0, size);
    overflow on one side is pushed to the other while room remains."""
    lo -= need // 2
    hi += need - need // 2
    if lo < 0:
        hi = min(size - 1, hi - lo)
        lo = 0
    if hi > size - 1:
        lo = max(0, lo - (hi - (size - 1)))
        hi = size - 1
    return lo, hi


def crop_to_mask(image: np.ndarray, doodle: np.ndarray, mask: np.ndarray,
                 padding: int = 100, skip_fraction: float = 0.5):
    """Crop all three rasters to a square window around the mask.

    The window is the mask's bounding box expanded by ``padding`` on every
    side, clamped to the image, with the shorter side extended to square.
    If that window already covers ``skip_fraction`` of the image the inputs
    are returned unchanged.
    """
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise EmptyMaskError("crop_to_mask: mask has no non-zero pixels")
    h, w = mask.shape
    r0, r1 = int(ys.min()), int(ys.max())
    c0, c1 = int(xs.min()), int(xs.max())

    r0, r1 = max(0, r0 - padding), min(h - 1, r1 + padding)
    c0, c1 = max(0, c0 - padding), min(w - 1, c1 + padding)
    bh, bw = r1 - r0 + 1, c1 - c0 + 1
    if bh < bw:
        r0, r1 = _grow(r0, r1, bw - bh, h)
    elif bw < bh:
        c0, c1 = _grow(c0, c1, bh - bw, w)

    if (r1 - r0 + 1) * (c1 - c0 + 1) >= skip_fraction * h * w:
        return image, doodle, mask
    sl = (slice(r0, r1 + 1), slice(c0, c1 + 1))
    return image[sl].copy(), doodle[sl].copy(), mask[sl].copy()


def resize_and_gray(raster: np.ndarray, side: int = 256,
                    labels: bool = False) -> np.ndarray:
    """Resize to side x side grayscale: bilinear for images, nearest for
    label rasters (doodles, masks) so values never interpolate."""
    if raster.size == 0:
        raise ValueError(f"resize_and_gray: empty raster {raster.shape}")
    if raster.ndim == 2 and raster.shape == (side, side):
        return raster.copy()
    im = Image.fromarray(raster.astype(np.uint8))
    if im.mode != "L":
        im = im.convert("L")
    resample = Image.NEAREST if labels else Image.BILINEAR
    return np.asarray(im.resize((side, side), resample), dtype=np.uint8)


def equalize_histogram(image: np.ndarray) -> np.ndarray:
    """Cumulative-distribution intensity remap over 256 bins."""
    hist = np.bincount(image.reshape(-1), minlength=256)
    cdf = hist.cumsum()
    n = int(cdf[-1])
    cdf_min = int(cdf[np.flatnonzero(hist)[0]])
    if n == cdf_min:
        return image.copy()
    lut = np.round(255.0 * (cdf - cdf_min) / (n - cdf_min)).clip(0, 255).astype(np.uint8)
    return lut[image]


def preprocess_record(rec: SampleRecord, side: int = 256, crop: bool = True,
                      padding: int = 100, skip_fraction: float = 0.5) -> SampleRecord:
    """Full pipeline for one record: joint crop (training only, needs the
    mask), resize, grayscale, image histogram equalization."""
    image, doodle, mask = rec.image, rec.doodle, rec.mask
    if crop:
        image, doodle, mask = crop_to_mask(image, doodle, mask,
                                           padding=padding,
                                           skip_fraction=skip_fraction)
    image = equalize_histogram(resize_and_gray(image, side))
    doodle = resize_and_gray(doodle, side, labels=True)
    mask = resize_and_gray(mask, side, labels=True)
    out = SampleRecord(rec.id, rec.class_id, image, doodle,
                       (mask > 0).astype(np.uint8))
    out.validate()
    return out


def doodle_class_value(class_id: int, num_classes: int) -> float:
    """Dense (0, 1] encoding: one unique value per class."""
    if not 0 <= class_id < num_classes:
        raise ValueError(f"class_id {class_id} out of range [0, {num_classes})")
    return (class_id + 1) / num_classes


def encode_and_normalize(rec: SampleRecord, num_classes: int):
    """Float rasters for the network: image scaled to [0,1], doodle's
    non-zero pixels set to the class value, mask as float {0,1}."""
    image = rec.image.astype(np.float32) / 255.0
    value = doodle_class_value(rec.class_id, num_classes)
    doodle = np.where(rec.doodle > 0, np.float32(value), np.float32(0.0))
    mask = rec.mask.astype(np.float32)
    return image, doodle, mask


def encode_arrays(image: np.ndarray, doodle: np.ndarray, class_id: int,
                  num_classes: int):
    """Same encoding for a bare (image, doodle) pair at inference time."""
    img = image.astype(np.float32) / 255.0
    value = doodle_class_value(class_id, num_classes)
    doo = np.where(doodle > 0, np.float32(value), np.float32(0.0))
    return img, doo
