"""Sketch augmentation pipeline.

A raster sketch is thinned to its centerline, partitioned into a square grid
of patches, and the dominant stroke of each patch is refit as one cubic
Bezier.  The interior control points are then jittered by a displacement
bound that scales with the sketch's size, and the perturbed curves are
rasterized back into a mask.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.draw import line as draw_line
from skimage.morphology import thin

from .bezier import BezierFit, CubicBezier, eval_bezier, fit_cubic_bezier
from .errors import ParameterError
from .raster import check_mask

# 8-neighborhood in fixed scan order; traversals depend on this order being stable
_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs of the augmentation pipeline.

    n: patch count, must be a perfect square (grid is sqrt(n) x sqrt(n)).
    C: number of sketch rows per displacement unit.
    K: displacement increment (pixels) per unit.
    min_pixels: strokes with fewer pixels than this are dropped before fitting.
    thickness: stroke width of the output raster.
    perturb_endpoints: also jitter p0/p3 (off by default; keeps strokes anchored).
    """

    n: int = 64
    C: int = 64
    K: float = 8.0
    min_pixels: int = 8
    thickness: int = 1
    seed: int = 0
    perturb_endpoints: bool = False

    def __post_init__(self):
        g = math.isqrt(self.n)
        if self.n < 1 or g * g != self.n:
            raise ParameterError(f"n must be a perfect square >= 1, got {self.n}")
        if self.C < 1:
            raise ParameterError(f"C must be >= 1, got {self.C}")
        if not (self.K >= 0.0 and math.isfinite(self.K)):
            raise ParameterError(f"K must be finite and >= 0, got {self.K}")
        if self.min_pixels < 2:
            raise ParameterError(f"min_pixels must be >= 2, got {self.min_pixels}")
        if self.thickness < 1:
            raise ParameterError(f"thickness must be >= 1, got {self.thickness}")

    @property
    def grid(self) -> int:
        return math.isqrt(self.n)


@dataclass(frozen=True)
class SketchVector:
    """Per-patch cubic Bezier representation of a sketch raster."""

    height: int
    width: int
    curves: tuple[tuple[int, CubicBezier], ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        def fmt(v: float) -> str:
            return format(v, ".17g")

        parts = []
        for patch, c in self.curves:
            pts = ",".join(
                f'"p{i}":[{fmt(p[0])},{fmt(p[1])}]'
                for i, p in enumerate((c.p0, c.p1, c.p2, c.p3))
            )
            parts.append(f'{{"patch":{patch},{pts}}}')
        return (
            f'{{"height":{self.height},"width":{self.width},'
            f'"curves":[{",".join(parts)}]}}'
        )

    @classmethod
    def from_json(cls, text: str) -> "SketchVector":
        obj = json.loads(text)
        curves = tuple(
            (
                int(c["patch"]),
                CubicBezier(tuple(c["p0"]), tuple(c["p1"]), tuple(c["p2"]), tuple(c["p3"])),
            )
            for c in obj["curves"]
        )
        return cls(height=int(obj["height"]), width=int(obj["width"]), curves=curves)


def skeletonize(mask) -> np.ndarray:
    """Thin a sketch raster to its 1-pixel-wide centerline.

    The result is a subset of the input foreground, contains no 2x2
    all-foreground block, and preserves the Euler number (foreground-8 /
    background-4 convention).
    """
    arr = check_mask(mask)
    if not arr.any():
        return np.zeros_like(arr)
    return thin(arr)


def partition(skeleton, n: int) -> list[np.ndarray]:
    """Assign skeleton pixels to a sqrt(n) x sqrt(n) grid of rectangular tiles.

    Remainder rows/columns are absorbed by the last tile of each axis.
    Returns one (k, 2) array of (y, x) pixel coordinates per patch, in
    row-major tile order; patches are disjoint and cover every pixel.
    """
    arr = check_mask(skeleton)
    g = math.isqrt(n)
    if n < 1 or g * g != n:
        raise ParameterError(f"n must be a perfect square >= 1, got {n}")
    h, w = arr.shape
    ys, xs = np.nonzero(arr)
    ty = np.minimum(ys // max(h // g, 1), g - 1)
    tx = np.minimum(xs // max(w // g, 1), g - 1)
    tile = ty * g + tx
    return [np.stack([ys[tile == i], xs[tile == i]], axis=1) for i in range(n)]


def _components_of(pixels: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-connected components of a pixel set, each listed in discovery order."""
    pixel_set = {tuple(p) for p in pixels}
    ordered = sorted(pixel_set)  # scan order
    seen: set[tuple[int, int]] = set()
    comps = []
    for start in ordered:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = [start]
        while queue:
            y, x = queue.pop(0)
            for dy, dx in _NEIGHBORS:
                q = (y + dy, x + dx)
                if q in pixel_set and q not in seen:
                    seen.add(q)
                    comp.append(q)
                    queue.append(q)
        comps.append(comp)
    return comps


def _farthest_bfs(start, pixel_set):
    """BFS over the 8-adjacency graph; returns (farthest pixel, parent map)."""
    parent = {start: None}
    queue = [start]
    last = start
    while queue:
        nxt = []
        for y, x in queue:
            for dy, dx in _NEIGHBORS:
                q = (y + dy, x + dx)
                if q in pixel_set and q not in parent:
                    parent[q] = (y, x)
                    nxt.append(q)
        if nxt:
            nxt.sort()  # deterministic tie-break on the farthest pixel
            last = nxt[0]
        queue = nxt
    return last, parent


def principal_curve(patch_pixels, min_pixels: int = 8):
    """Order the dominant stroke of a patch as an open pixel path.

    Selects the largest 8-connected component (ties go to the component seen
    first in scan order) and traverses the longest BFS path between two of
    its extremal pixels.  Returns an (L, 2) int array of (x, y) points, or
    None when the component has fewer than ``min_pixels`` pixels.
    """
    pixels = np.asarray(patch_pixels).reshape(-1, 2)
    if len(pixels) == 0:
        return None
    comps = _components_of(pixels)
    comp = max(comps, key=len)  # max() keeps the first of equal-size components
    if len(comp) < min_pixels:
        return None
    comp_set = set(comp)
    u, _ = _farthest_bfs(comp[0], comp_set)
    v, parent = _farthest_bfs(u, comp_set)
    path = []
    node = v
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()  # runs from u to v
    return np.array([(x, y) for y, x in path], dtype=np.int64)


def compute_delta(row: int, C: int, K: float) -> float:
    """Displacement bound floor(row / C) * K, with row the sketch's bounding-box rows."""
    if C < 1:
        raise ParameterError(f"C must be >= 1, got {C}")
    if K < 0:
        raise ParameterError(f"K must be >= 0, got {K}")
    if row < 0:
        raise ParameterError(f"row must be >= 0, got {row}")
    return float(math.floor(row / C) * K)


def patch_rng(seed: int, patch_index: int) -> np.random.Generator:
    """Per-patch RNG stream; independent of the order patches are processed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, patch_index])))


def perturb_curve(
    curve: CubicBezier,
    delta: float,
    rng: np.random.Generator,
    perturb_endpoints: bool = False,
) -> CubicBezier:
    """Displace control points by independent uniform samples in [-delta, +delta].

    Only the interior points p1/p2 move by default; endpoints stay anchored.
    """
    if delta < 0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    if delta == 0.0:
        return curve
    p1 = tuple(np.asarray(curve.p1) + rng.uniform(-delta, delta, size=2))
    p2 = tuple(np.asarray(curve.p2) + rng.uniform(-delta, delta, size=2))
    p0, p3 = curve.p0, curve.p3
    if perturb_endpoints:
        p0 = tuple(np.asarray(curve.p0) + rng.uniform(-delta, delta, size=2))
        p3 = tuple(np.asarray(curve.p3) + rng.uniform(-delta, delta, size=2))
    return CubicBezier(p0, p1, p2, p3)


def rasterize_curves(vector: SketchVector, height: int, width: int, thickness: int = 1) -> np.ndarray:
    """Stroke every curve of a sketch vector onto a fresh canvas.

    Each curve is sampled at max(2, ceil(4 * control-polygon length)) points,
    consecutive samples are joined with integer line segments, and the result
    is dilated to the requested thickness and clipped to the canvas.
    """
    if height < 1 or width < 1:
        raise ParameterError("canvas dimensions must be positive")
    if thickness < 1:
        raise ParameterError(f"thickness must be >= 1, got {thickness}")
    canvas = np.zeros((height, width), dtype=bool)
    for _, curve in vector.curves:
        n_samples = max(2, math.ceil(4.0 * curve.control_polygon_length()))
        pts = eval_bezier(curve, np.linspace(0.0, 1.0, n_samples))
        xs = np.rint(pts[:, 0]).astype(np.int64)
        ys = np.rint(pts[:, 1]).astype(np.int64)
        for i in range(len(xs) - 1):
            ry, rx = draw_line(ys[i], xs[i], ys[i + 1], xs[i + 1])
            keep = (ry >= 0) & (ry < height) & (rx >= 0) & (rx < width)
            canvas[ry[keep], rx[keep]] = True
    if thickness > 1:
        canvas = ndimage.binary_dilation(canvas, structure=np.ones((thickness, thickness), bool))
    return canvas


@dataclass(frozen=True)
class AugmentResult:
    raster: np.ndarray
    vector: SketchVector
    delta: float
    empty: bool  # True when no patch yielded a fit-eligible stroke


def fit_patches(skeleton, config: AugmentConfig) -> list[tuple[int, BezierFit]]:
    """Partition a skeleton and fit one cubic per fit-eligible patch."""
    fits = []
    for i, pixels in enumerate(partition(skeleton, config.n)):
        path = principal_curve(pixels, min_pixels=config.min_pixels)
        if path is None:
            continue
        fits.append((i, fit_cubic_bezier(path.astype(np.float64))))
    return fits


def augment(sketch, config: AugmentConfig = AugmentConfig()) -> AugmentResult:
    """Full pipeline: thin, partition, fit, perturb, re-rasterize.

    Deterministic for a given config; RNG streams are split per patch index
    so results do not depend on processing order.
    """
    arr = check_mask(sketch)
    h, w = arr.shape
    skeleton = skeletonize(arr)
    ys = np.nonzero(skeleton)[0]
    if ys.size:
        rows = int(ys.max() - ys.min() + 1)
    else:
        rows = 0
    delta = compute_delta(rows, config.C, config.K)
    curves = []
    for i, fit in fit_patches(skeleton, config):
        rng = patch_rng(config.seed, i)
        curves.append((i, perturb_curve(fit.curve, delta, rng, config.perturb_endpoints)))
    vector = SketchVector(height=h, width=w, curves=tuple(curves))
    raster = rasterize_curves(vector, h, w, thickness=config.thickness)
    return AugmentResult(raster=raster, vector=vector, delta=delta, empty=not curves)
