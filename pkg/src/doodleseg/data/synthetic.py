"""Desk-scale synthetic dataset: noisy backgrounds, 2-4 non-overlapping
shapes (ellipse / rectangle / ring), and a seeded scribble drawn fully
inside the target shape.

Only the doodle identifies which shape is wanted: distractors may share the
target's class, so a model that ignores the prompt cannot solve the task.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .records import SampleRecord, DatasetManifest
from .sampling import split_and_fold

CLASS_NAMES = ("ellipse", "rectangle", "ring")

_DISK2 = (lambda g: (g[0] ** 2 + g[1] ** 2) <= 4)(np.mgrid[-2:3, -2:3])


class PlacementError(RuntimeError):
    pass


@dataclass
class Shape:
    class_id: int
    mask: np.ndarray          # bool, full-frame
    bbox: tuple[int, int, int, int]   # r0, r1, c0, c1 inclusive


@dataclass
class Scene:
    """Full generation record for one sample; distractor masks let the
    evaluation measure what the model should NOT have segmented."""
    target: Shape
    distractors: list[Shape]
    image: np.ndarray


def doodle_pixel_value(class_id: int, num_classes: int = len(CLASS_NAMES)) -> int:
    return int(round(255 * (class_id + 1) / num_classes))


def _shape_mask(class_id: int, side: int, rng: np.random.Generator):
    """Random instance of one shape class; returns (bool mask, bbox)."""
    yy, xx = np.mgrid[0:side, 0:side]
    base = side * rng.uniform(0.13, 0.20)
    cy = rng.uniform(base + 2, side - base - 2)
    cx = rng.uniform(base + 2, side - base - 2)
    if class_id == 0:      # ellipse, distinctly non-circular
        ry = base * rng.uniform(0.65, 0.9)
        rx = base
        if rng.random() < 0.5:
            rx, ry = ry, rx
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    elif class_id == 1:    # rectangle
        hy = base * rng.uniform(0.7, 1.0)
        hx = base * rng.uniform(0.7, 1.0)
        mask = (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
    else:                  # ring (annulus), kept thick enough to scribble in
        ro = max(base, 0.15 * side)
        ri = ro * rng.uniform(0.35, 0.48)
        rr = (yy - cy) ** 2 + (xx - cx) ** 2
        mask = (rr <= ro ** 2) & (rr >= ri ** 2)
    ys, xs = np.nonzero(mask)
    bbox = (int(ys.min()), int(ys.max()), int(xs.min()), int(xs.max()))
    return mask, bbox


def _bboxes_clear(a, b, gap=2) -> bool:
    ar0, ar1, ac0, ac1 = a
    br0, br1, bc0, bc1 = b
    return (ar1 + gap < br0 or br1 + gap < ar0 or
            ac1 + gap < bc0 or bc1 + gap < ac0)


def _scribble(mask: np.ndarray, class_id: int, value: int,
              rng: np.random.Generator, tries: int = 40) -> np.ndarray:
    """Seeded polyline of 3-6 segments, 2 px stroke, fully inside ``mask``.

    Convex shapes sample vertices from the eroded interior (chords stay
    inside); rings walk the annulus at mid-band radius. Every candidate is
    rasterized and verified for containment before it is accepted.
    """
    side = mask.shape[0]
    eroded = ndimage.binary_erosion(mask, structure=_DISK2)
    ys, xs = np.nonzero(eroded)
    for _ in range(tries):
        n_vertices = int(rng.integers(4, 8))    # 3..6 segments
        if class_id == 2:
            pts = _ring_walk(mask, n_vertices, rng)
        elif ys.size >= 4:
            idx = rng.integers(0, ys.size, size=n_vertices)
            pts = [(int(xs[i]), int(ys[i])) for i in idx]
        else:
            break
        canvas = Image.new("L", (side, side), 0)
        draw = ImageDraw.Draw(canvas)
        draw.line(pts, fill=value, width=2, joint="curve")
        for x, y in (pts[0], pts[-1]):
            draw.ellipse([x - 1, y - 1, x + 1, y + 1], fill=value)
        doodle = np.asarray(canvas, dtype=np.uint8)
        drawn = doodle > 0
        if drawn.any() and bool(mask[drawn].all()):
            return doodle
    raise PlacementError("could not fit a scribble inside the target")


def _ring_walk(mask, n_vertices, rng):
    """Angular walk in the annulus band; small steps keep chords inside."""
    ys, xs = np.nonzero(mask)
    cy, cx = ys.mean(), xs.mean()
    radii = np.hypot(ys - cy, xs - cx)
    r_lo, r_hi = radii.min() + 2.5, radii.max() - 2.5
    if r_hi <= r_lo:
        mid = (radii.min() + radii.max()) / 2.0
        r_lo, r_hi = mid - 0.4, mid + 0.4
    theta = rng.uniform(0, 2 * np.pi)
    step = rng.uniform(0.18, 0.32) * rng.choice([-1.0, 1.0])
    pts = []
    for _ in range(n_vertices):
        r = rng.uniform(r_lo, r_hi)
        pts.append((int(round(cx + r * np.cos(theta))),
                    int(round(cy + r * np.sin(theta)))))
        theta += step
    return pts


def generate_scene(class_id: int, side: int, rng: np.random.Generator,
                   layout_tries: int = 30) -> Scene:
    num_classes = len(CLASS_NAMES)
    for _ in range(layout_tries):
        shapes: list[Shape] = []
        n_distract = int(rng.integers(1, 4))
        wanted = [class_id] + [int(rng.integers(0, num_classes))
                               for _ in range(n_distract)]
        ok = True
        for cid in wanted:
            placed = False
            for _ in range(40):
                mask, bbox = _shape_mask(cid, side, rng)
                if all(_bboxes_clear(bbox, s.bbox) for s in shapes):
                    shapes.append(Shape(cid, mask, bbox))
                    placed = True
                    break
            if not placed:
                ok = False
                break
        if not ok or len(shapes) < 2:
            continue

        image = rng.uniform(20, 60) + rng.normal(0, 8, size=(side, side))
        for shape in shapes:
            level = rng.uniform(110, 220)
            fill = level + rng.normal(0, 6, size=(side, side))
            image = np.where(shape.mask, fill, image)
        image = np.clip(image, 0, 255).astype(np.uint8)
        return Scene(target=shapes[0], distractors=shapes[1:], image=image)
    raise PlacementError(f"no valid layout after {layout_tries} attempts")


def generate_record(class_id: int, index: int, side: int, seed: int
                    ) -> tuple[SampleRecord, Scene]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, class_id, index]))
    value = doodle_pixel_value(class_id)
    doodle = None
    for _ in range(12):    # a fresh layout usually fixes a hopeless scribble
        scene = generate_scene(class_id, side, rng)
        try:
            doodle = _scribble(scene.target.mask, class_id, value, rng)
            break
        except PlacementError:
            continue
    if doodle is None:
        raise PlacementError(
            f"class {class_id} index {index}: no scribbleable layout found")
    rec = SampleRecord(
        id=f"{CLASS_NAMES[class_id]}-{index:04d}",
        class_id=class_id,
        image=scene.image,
        doodle=doodle,
        mask=scene.target.mask.astype(np.uint8),
    )
    rec.validate()
    return rec, scene


def generate_synthetic(n_per_class: int, side: int = 64, seed: int = 0,
                       split: bool = True, oversample: bool = True,
                       n_folds: int = 5, n_classes: int = len(CLASS_NAMES)
                       ) -> tuple[DatasetManifest, dict[str, Scene]]:
    """Seeded dataset of ``n_per_class`` records per shape class, with the
    stratified split and fold labels already assigned (unless ``split`` is
    off, in which case everything lands in trainval fold None)."""
    if side % 16:
        raise ValueError(f"side {side} must be divisible by 16")
    if not 1 <= n_classes <= len(CLASS_NAMES):
        raise ValueError(f"n_classes must be 1..{len(CLASS_NAMES)}")
    class_names = list(CLASS_NAMES[:n_classes])
    records, scenes = [], {}
    for cid in range(n_classes):
        for i in range(n_per_class):
            rec, scene = generate_record(cid, i, side, seed)
            records.append(rec)
            scenes[rec.id] = scene
    if split:
        manifest = split_and_fold(records, class_names, seed,
                                  n_folds=n_folds, oversample=oversample)
    else:
        from .records import ManifestEntry
        manifest = DatasetManifest([ManifestEntry(r, "trainval") for r in records],
                                   class_names, seed=seed)
    return manifest, scenes
