"""Training-signal math: boundary refinement, focal variants, BCE/Dice, totals.

Boundary maps are computed on soft probability maps so every term stays
differentiable; the analytic gradients below route subgradients through the
max-pooling to the window argmax (first in scan order on ties).

Conventions:
  * probabilities are clamped to [eps, 1-eps] before any log;
  * zero-denominator precision/recall ratios evaluate to 0, and P+R=0 gives
    BF1=0 (loss 1), with the report flagged degenerate;
  * the adaptive focusing statistic is detached: gradients never flow
    through it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError
from .raster import check_mask, check_probmap, maxpool, maxpool_argmax

GRADIENT_TARGETS = ("bce", "dice", "focal", "afl", "boundary", "total")


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 2.0
    alpha: float = 0.25
    theta1: int = 3
    theta2: int = 3
    lambda_mask: float = 2.0
    lambda_dice: float = 5.0
    lambda_adaptive: float = 5e-4
    lambda_boundary: float = 1.0
    eps: float = 1e-7

    def __post_init__(self):
        for name in ("theta1", "theta2"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ParameterError(f"{name} must be odd and >= 1, got {v}")
        if not (0.0 < self.eps <= 1e-3):
            raise ParameterError(f"eps must lie in (0, 1e-3], got {self.eps}")
        for name in ("gamma", "alpha", "lambda_mask", "lambda_dice",
                     "lambda_adaptive", "lambda_boundary"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ParameterError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class LossReport:
    bce: float
    dice: float
    focal: float
    afl: float
    gamma_a: float
    bf1_precision: float
    bf1_recall: float
    bf1: float
    boundary_loss: float
    total: float
    degenerate: bool

    def to_dict(self, config: LossConfig | None = None) -> dict:
        out = asdict(self)
        if config is not None:
            out["config"] = asdict(config)
        return out


def clamp_probs(pred, eps: float) -> np.ndarray:
    return np.clip(check_probmap(pred), eps, 1.0 - eps)


def _check_pair(pred, gt):
    p = check_probmap(pred)
    g = check_mask(gt)
    if p.shape != g.shape:
        raise ParameterError(f"shape mismatch: pred {p.shape} vs gt {g.shape}")
    return p, g


def extract_boundary(pmap, theta1: int = 3) -> np.ndarray:
    """Soft boundary: maxpool(1 - M, theta1) - (1 - M), clamped to [0, 1].

    Pixels outside the image count as background, so objects cropped by the
    frame produce a boundary at the frame edge.
    """
    m = check_probmap(pmap)
    out = maxpool(1.0 - m, theta1, pad=1.0) - (1.0 - m)
    return np.clip(out, 0.0, 1.0)


def extend_boundary(boundary, theta2: int = 3) -> np.ndarray:
    """Supporting map of the extended boundary: maxpool(boundary, theta2)."""
    return maxpool(check_probmap(boundary), theta2, pad=0.0)


@dataclass(frozen=True)
class BoundaryF1:
    precision: float
    recall: float
    bf1: float
    loss: float
    degenerate: bool


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0.0 else 0.0


def boundary_f1(pred, gt, theta1: int = 3, theta2: int = 3) -> BoundaryF1:
    """Boundary precision/recall/F1 of a soft prediction against a binary gt."""
    p, g = _check_pair(pred, gt)
    gf = g.astype(np.float64)
    b_pd = extract_boundary(p, theta1)
    b_gt = extract_boundary(gf, theta1)
    ext_pd = extend_boundary(b_pd, theta2)
    ext_gt = extend_boundary(b_gt, theta2)
    sum_pd = float(b_pd.sum())
    sum_gt = float(b_gt.sum())
    precision = _safe_ratio(float((b_pd * ext_gt).sum()), sum_pd)
    recall = _safe_ratio(float((b_gt * ext_pd).sum()), sum_gt)
    pr = precision + recall
    bf1 = 2.0 * precision * recall / pr if pr > 0.0 else 0.0
    degenerate = sum_pd == 0.0 or sum_gt == 0.0 or pr == 0.0
    return BoundaryF1(precision=precision, recall=recall, bf1=bf1,
                      loss=1.0 - bf1, degenerate=degenerate)


def _pt(pred_clamped: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.where(gt, pred_clamped, 1.0 - pred_clamped)


@dataclass(frozen=True)
class FocalResult:
    total: float
    mean: float


def focal_loss(pred, gt, gamma: float = 2.0, eps: float = 1e-7) -> FocalResult:
    """Plain focal loss: sum_i -(1 - P_t)^gamma log(P_t)."""
    p, g = _check_pair(pred, gt)
    pt = _pt(np.clip(p, eps, 1.0 - eps), g)
    per_pixel = -((1.0 - pt) ** gamma) * np.log(pt)
    return FocalResult(total=float(per_pixel.sum()), mean=float(per_pixel.mean()))


@dataclass(frozen=True)
class AdaptiveFocalResult:
    gamma_a: float
    total: float
    mean: float
    degenerate: bool


def adaptive_gamma(pred, gt, eps: float = 1e-7) -> tuple[float, bool]:
    """Focusing offset 1 - mean foreground confidence; 0 (degenerate) if gt is empty."""
    p, g = _check_pair(pred, gt)
    if not g.any():
        return 0.0, True
    pt_fg = np.clip(p, eps, 1.0 - eps)[g]
    return float(1.0 - pt_fg.mean()), False


def adaptive_focal_loss(
    pred,
    gt,
    gamma: float = 2.0,
    alpha: float = 0.25,
    eps: float = 1e-7,
    gamma_a_override: float | None = None,
) -> AdaptiveFocalResult:
    """Focal loss with a global difficulty offset added to the exponent.

    loss = sum_i [-(1-P_t)^(gamma+gamma_a) log(P_t) + alpha (1-P_t)^(gamma+gamma_a+1)]

    ``gamma_a_override`` pins the offset (test hook; also how gradients treat
    it, since the statistic is detached).
    """
    p, g = _check_pair(pred, gt)
    if gamma_a_override is None:
        gamma_a, degenerate = adaptive_gamma(p, g, eps)
    else:
        gamma_a, degenerate = float(gamma_a_override), False
    pt = _pt(np.clip(p, eps, 1.0 - eps), g)
    e = gamma + gamma_a
    per_pixel = -((1.0 - pt) ** e) * np.log(pt) + alpha * (1.0 - pt) ** (e + 1.0)
    return AdaptiveFocalResult(gamma_a=gamma_a, total=float(per_pixel.sum()),
                               mean=float(per_pixel.mean()), degenerate=degenerate)


def bce_dice(pred, gt, eps: float = 1e-7) -> tuple[float, float]:
    """Mean binary cross-entropy and smoothed Dice loss (smoothing 1)."""
    p, g = _check_pair(pred, gt)
    pc = np.clip(p, eps, 1.0 - eps)
    y = g.astype(np.float64)
    bce = float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).mean())
    num = 2.0 * float((pc * y).sum()) + 1.0
    den = float(pc.sum()) + float(y.sum()) + 1.0
    dice = 1.0 - num / den
    return bce, dice


def total_loss(pred, gt, config: LossConfig = LossConfig()) -> LossReport:
    """Weighted total of BCE, Dice, adaptive focal, and boundary terms."""
    p, g = _check_pair(pred, gt)
    bce, dice = bce_dice(p, g, config.eps)
    fl = focal_loss(p, g, config.gamma, config.eps)
    afl = adaptive_focal_loss(p, g, config.gamma, config.alpha, config.eps)
    bf = boundary_f1(p, g, config.theta1, config.theta2)
    total = (
        config.lambda_mask * bce
        + config.lambda_dice * dice
        + config.lambda_adaptive * afl.total
        + config.lambda_boundary * bf.loss
    )
    return LossReport(
        bce=bce,
        dice=dice,
        focal=fl.total,
        afl=afl.total,
        gamma_a=afl.gamma_a,
        bf1_precision=bf.precision,
        bf1_recall=bf.recall,
        bf1=bf.bf1,
        boundary_loss=bf.loss,
        total=total,
        degenerate=afl.degenerate or bf.degenerate,
    )


# ---------------------------------------------------------------------------
# Analytic gradients with respect to the predicted probabilities.
# Precondition: pred strictly inside (eps, 1-eps) so the clamp is an identity.


def _grad_bce(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    y = g.astype(np.float64)
    return (p - y) / (p * (1.0 - p)) / p.size


def _grad_dice(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    y = g.astype(np.float64)
    num = 2.0 * float((p * y).sum()) + 1.0
    den = float(p.sum()) + float(y.sum()) + 1.0
    return -(2.0 * y * den - num) / den ** 2


def _grad_focal_like(pt: np.ndarray, dpt_dp: np.ndarray, exponent: float,
                     alpha: float = 0.0) -> np.ndarray:
    """d/dp of sum[-(1-pt)^e log(pt) + alpha (1-pt)^(e+1)]."""
    one_m = 1.0 - pt
    if exponent == 0.0:
        d = -1.0 / pt
    else:
        d = exponent * one_m ** (exponent - 1.0) * np.log(pt) - one_m ** exponent / pt
    if alpha != 0.0:
        d = d - alpha * (exponent + 1.0) * one_m ** exponent
    return d * dpt_dp


def _scatter(grad_out: np.ndarray, idx: np.ndarray, shape) -> np.ndarray:
    """Accumulate pooled-output gradients back onto their argmax sources."""
    out = np.zeros(shape[0] * shape[1], dtype=np.float64)
    flat_idx = idx.ravel()
    flat_g = grad_out.ravel()
    valid = flat_idx >= 0
    np.add.at(out, flat_idx[valid], flat_g[valid])
    return out.reshape(shape)


def _grad_boundary(p: np.ndarray, g: np.ndarray, theta1: int, theta2: int) -> np.ndarray:
    gf = g.astype(np.float64)
    inv = 1.0 - p
    pooled1, idx1 = maxpool_argmax(inv, theta1, pad=1.0)
    b_pd = pooled1 - inv
    _, idx2 = maxpool_argmax(b_pd, theta2, pad=0.0)
    ext_pd = maxpool(b_pd, theta2, pad=0.0)
    b_gt = extract_boundary(gf, theta1)
    ext_gt = extend_boundary(b_gt, theta2)

    sum_pd = float(b_pd.sum())
    sum_gt = float(b_gt.sum())
    num_p = float((b_pd * ext_gt).sum())
    precision = _safe_ratio(num_p, sum_pd)
    recall = _safe_ratio(float((b_gt * ext_pd).sum()), sum_gt)
    pr = precision + recall
    if pr == 0.0 or sum_pd == 0.0 or sum_gt == 0.0:
        # convention branches are locally constant
        return np.zeros_like(p)

    # loss = 1 - 2PR/(P+R)
    dP = -2.0 * recall ** 2 / pr ** 2
    dR = -2.0 * precision ** 2 / pr ** 2
    g_bpd = dP * (ext_gt * sum_pd - num_p) / sum_pd ** 2
    g_extpd = dR * b_gt / sum_gt
    g_bpd = g_bpd + _scatter(g_extpd, idx2, p.shape)
    # b_pd = maxpool(1-p) - (1-p); d(1-p)/dp = -1
    g_inv = _scatter(g_bpd, idx1, p.shape) - g_bpd
    return -g_inv


def loss_gradient(pred, gt, config: LossConfig = LossConfig(), which: str = "total") -> np.ndarray:
    """Analytic per-pixel d(loss)/d(pred) for one of GRADIENT_TARGETS.

    Reductions match the reported values: BCE is a mean, focal and adaptive
    focal are sums, Dice and boundary are scalars already.
    """
    if which not in GRADIENT_TARGETS:
        raise ParameterError(f"unknown gradient target {which!r}; expected one of {GRADIENT_TARGETS}")
    p, g = _check_pair(pred, gt)
    if p.min() <= config.eps or p.max() >= 1.0 - config.eps:
        raise ParameterError("pred must lie strictly inside (eps, 1-eps) for gradients")
    pt = _pt(p, g)
    dpt_dp = np.where(g, 1.0, -1.0)
    if which == "bce":
        return _grad_bce(p, g)
    if which == "dice":
        return _grad_dice(p, g)
    if which == "focal":
        return _grad_focal_like(pt, dpt_dp, config.gamma)
    if which == "afl":
        gamma_a, _ = adaptive_gamma(p, g, config.eps)
        return _grad_focal_like(pt, dpt_dp, config.gamma + gamma_a, config.alpha)
    if which == "boundary":
        return _grad_boundary(p, g, config.theta1, config.theta2)
    gamma_a, _ = adaptive_gamma(p, g, config.eps)
    return (
        config.lambda_mask * _grad_bce(p, g)
        + config.lambda_dice * _grad_dice(p, g)
        + config.lambda_adaptive * _grad_focal_like(pt, dpt_dp, config.gamma + gamma_a, config.alpha)
        + config.lambda_boundary * _grad_boundary(p, g, config.theta1, config.theta2)
    )
