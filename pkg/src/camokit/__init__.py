"""camokit: sketch-guided camouflage segmentation toolkit.

Raster topology utilities, Bezier-based sketch augmentation, boundary and
focal segmentation losses with analytic gradients, toy fusion/adapter
blocks, evaluation metrics, and a deterministic synthetic data generator.
"""

__version__ = "0.1.0"

from .augment import (AugmentConfig, AugmentResult, SketchVector, augment,
                      compute_delta, fit_patches, partition, perturb_curve,
                      principal_curve, rasterize_curves, skeletonize)
from .bezier import BezierFit, CubicBezier, chord_parameters, eval_bezier, fit_cubic_bezier
from .errors import CamokitError, FormatError, ParameterError
from .estimators import SketchAugmenter
from .fusion import (AdapterParams, FusionParams, adapter_forward, cross_attention,
                     film_gate, fusion_forward, grad_check, highpass_fft, patch_embed)
from .losses import (LossConfig, LossReport, adaptive_focal_loss, bce_dice,
                     boundary_f1, extend_boundary, extract_boundary, focal_loss,
                     loss_gradient, total_loss)
from .metrics import (MetricReport, aggregate, boundary_metric, chamfer_distance,
                      evaluate_pair, hausdorff_distance, region_metrics)
from .raster import (connected_components, euler_number, load_pf32, load_pgm,
                     load_raster, maxpool, save_pf32, save_pgm, save_raster)
from .synth import SynthConfig, SynthSample, gen_sample, gt_sketch, value_noise
