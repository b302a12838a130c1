"""Mask evaluation at desk scale: MAE, IoU, F-beta, boundary F1, aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .losses import boundary_f1
from .raster import check_mask, check_probmap

BINARIZE_THRESHOLD = 0.5  # fixed operating point for IoU / F-beta / boundary


@dataclass(frozen=True)
class ImageMetrics:
    mae: float
    iou: float
    f_beta: float
    boundary_f1: float

    def to_dict(self) -> dict:
        return {"mae": self.mae, "iou": self.iou, "f_beta": self.f_beta,
                "boundary_f1": self.boundary_f1}


@dataclass(frozen=True)
class MetricReport:
    mae: float
    iou: float
    f_beta: float
    boundary_f1: float
    count: int
    per_image: tuple[ImageMetrics, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {"mae": self.mae, "iou": self.iou, "f_beta": self.f_beta,
                "boundary_f1": self.boundary_f1, "count": self.count,
                "per_image": [m.to_dict() for m in self.per_image]}


def _check_pair(pred, gt):
    p = check_probmap(pred)
    g = check_mask(gt)
    if p.shape != g.shape:
        raise ParameterError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return p, g


def region_metrics(pred, gt, beta2: float = 0.3) -> dict:
    """MAE on the soft map; IoU and F-beta on the 0.5-thresholded prediction."""
    p, g = _check_pair(pred, gt)
    mae = float(np.abs(p - g).mean())
    pb = p >= BINARIZE_THRESHOLD
    inter = float((pb & g).sum())
    union = float((pb | g).sum())
    iou = inter / union if union > 0 else 1.0
    n_pred = float(pb.sum())
    n_gt = float(g.sum())
    precision = inter / n_pred if n_pred > 0 else 0.0
    recall = inter / n_gt if n_gt > 0 else 0.0
    den = beta2 * precision + recall
    f_beta = (1.0 + beta2) * precision * recall / den if den > 0 else 0.0
    return {"mae": mae, "iou": iou, "f_beta": f_beta}


def boundary_metric(pred, gt, theta1: int = 3, theta2: int = 3) -> float:
    """Boundary F1 of the thresholded prediction; 1 - boundary loss."""
    p, g = _check_pair(pred, gt)
    pb = (p >= BINARIZE_THRESHOLD).astype(np.float64)
    return boundary_f1(pb, g, theta1, theta2).bf1


def evaluate_pair(pred, gt, beta2: float = 0.3, theta1: int = 3, theta2: int = 3) -> ImageMetrics:
    region = region_metrics(pred, gt, beta2)
    return ImageMetrics(boundary_f1=boundary_metric(pred, gt, theta1, theta2), **region)


def aggregate(reports) -> MetricReport:
    """Unweighted mean of per-image metrics; order-independent."""
    reports = list(reports)
    if not reports:
        raise ParameterError("cannot aggregate an empty report list")
    return MetricReport(
        mae=float(np.mean([r.mae for r in reports])),
        iou=float(np.mean([r.iou for r in reports])),
        f_beta=float(np.mean([r.f_beta for r in reports])),
        boundary_f1=float(np.mean([r.boundary_f1 for r in reports])),
        count=len(reports),
        per_image=tuple(reports),
    )


# ---------------------------------------------------------------------------
# Pixel-set distances used to quantify sketch deformation.


def _distance_to(mask: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean distance to the nearest foreground pixel."""
    return ndimage.distance_transform_edt(~mask)


def chamfer_distance(mask_a, mask_b) -> float:
    """Symmetric mean nearest-neighbor distance between two pixel sets."""
    a = check_mask(mask_a)
    b = check_mask(mask_b)
    if not a.any() or not b.any():
        raise ParameterError("chamfer distance needs two non-empty pixel sets")
    d_ab = _distance_to(b)[a].mean()
    d_ba = _distance_to(a)[b].mean()
    return float(0.5 * (d_ab + d_ba))


def hausdorff_distance(mask_a, mask_b) -> float:
    """Symmetric maximum nearest-neighbor distance between two pixel sets."""
    a = check_mask(mask_a)
    b = check_mask(mask_b)
    if not a.any() or not b.any():
        raise ParameterError("hausdorff distance needs two non-empty pixel sets")
    return float(max(_distance_to(b)[a].max(), _distance_to(a)[b].max()))
