"""Command-line interface.

Subcommands: synth, augment, loss, eval, fusion-demo, gradcheck.
Exit codes: 0 success, 1 validation/usage error, 2 I/O or format error.
All randomness derives from --seed; reruns with identical argv produce
byte-identical output files.  Batch work parallelizes across up to
``CAMOKIT_THREADS`` workers with per-item seeds derived from (seed, index),
so results never depend on scheduling.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentConfig, SketchVector, augment
from .errors import CamokitError, FormatError, ParameterError
from .fusion import (FusionParams, GRADCHECK_TARGETS, attention_weights,
                     film_gate, fusion_forward, grad_check)
from .losses import LossConfig, total_loss
from .metrics import aggregate, evaluate_pair
from .raster import load_pgm, load_raster, save_pgm, save_raster
from .synth import SynthConfig, gen_sample


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _thread_count() -> int:
    raw = os.environ.get("CAMOKIT_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError as exc:
            raise ParameterError(f"CAMOKIT_THREADS must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ParameterError("CAMOKIT_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def _write_json(path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(path, subcommand: str, config: dict, seed, inputs, outputs,
                    started: float) -> None:
    _write_json(path, {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "tool_version": __version__,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": time.perf_counter() - started,
    })


def _apply_config_file(args: argparse.Namespace) -> None:
    """Values from --config <json> take precedence over flags."""
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read config file {args.config}: {exc}") from exc
    if not isinstance(overrides, dict):
        raise FormatError(f"config file {args.config} must hold a JSON object")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ParameterError(f"config file {args.config}: unknown key {key!r}")
        setattr(args, attr, value)


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _item_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Subcommands.


def _cmd_synth(args) -> int:
    started = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = dict(height=args.height, width=args.width, blob_count=args.blob_count,
                contrast=args.contrast, noise_scale=args.noise_scale)
    SynthConfig(seed=0, **base)  # fail fast on bad parameters

    def one(i: int):
        cfg = SynthConfig(seed=_item_seed(args.seed, i), **base)
        sample = gen_sample(cfg, AugmentConfig(K=args.K, seed=cfg.seed))
        stem = f"{i:04d}"
        save_raster(sample.image, out_dir / f"{stem}_img.pf32")
        save_pgm(sample.mask, out_dir / f"{stem}_gt.pgm")
        save_pgm(sample.sketch, out_dir / f"{stem}_sketch.pgm")
        return [f"{stem}_img.pf32", f"{stem}_gt.pgm", f"{stem}_sketch.pgm"]

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        produced = [name for names in pool.map(one, range(args.count)) for name in names]
    _write_manifest(out_dir / "manifest.json", "synth",
                    {**base, "count": args.count, "K": args.K},
                    args.seed, [], produced, started)
    _say(args, f"wrote {args.count} samples to {out_dir}")
    return 0


def _cmd_augment(args) -> int:
    started = time.perf_counter()
    config = AugmentConfig(n=args.n, C=args.C, K=args.K, min_pixels=args.min_pixels,
                           thickness=args.thickness, seed=args.seed)
    sketch = load_pgm(args.in_path)
    result = augment(sketch, config)
    save_pgm(result.raster, args.out)
    outputs = [args.out]
    if args.emit_json:
        Path(args.emit_json).write_text(result.vector.to_json() + "\n", encoding="utf-8")
        outputs.append(args.emit_json)
    _write_manifest(args.out + ".manifest.json", "augment", asdict(config),
                    args.seed, [args.in_path], outputs, started)
    if result.empty:
        _say(args, "warning: no fit-eligible strokes; output raster is empty")
    _say(args, f"augmented {args.in_path} -> {args.out} (delta={result.delta})")
    return 0


def _loss_config(args) -> LossConfig:
    return LossConfig(gamma=args.gamma, alpha=args.alpha,
                      theta1=args.theta1, theta2=args.theta2,
                      lambda_mask=args.lambda_mask, lambda_dice=args.lambda_dice,
                      lambda_adaptive=args.lambda_adaptive,
                      lambda_boundary=args.lambda_boundary)


def _as_probmap(raster: np.ndarray) -> np.ndarray:
    return raster.astype(np.float64) if raster.dtype == bool else raster


def _cmd_loss(args) -> int:
    started = time.perf_counter()
    config = _loss_config(args)
    pred = _as_probmap(load_raster(args.pred))
    gt = load_pgm(args.gt)
    report = total_loss(pred, gt, config)
    _write_json(args.report, report.to_dict(config))
    _write_manifest(args.report + ".manifest.json", "loss", asdict(config),
                    args.seed, [args.pred, args.gt], [args.report], started)
    _say(args, f"total={report.total:.6f} boundary={report.boundary_loss:.6f}")
    return 0


_PAIR_SUFFIXES = ("_img", "_gt", "_pred", "_sketch")


def _pair_key(path: Path) -> str:
    stem = path.stem
    for suffix in _PAIR_SUFFIXES:
        if stem.endswith(suffix):
            return stem[: -len(suffix)]
    return stem


def _cmd_eval(args) -> int:
    started = time.perf_counter()
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    preds = {_pair_key(p): p for p in sorted(pred_dir.iterdir())
             if p.suffix in (".pf32", ".pgm")}
    gts = {_pair_key(p): p for p in sorted(gt_dir.glob("*.pgm")) if "_sketch" not in p.stem}
    keys = sorted(set(preds) & set(gts))
    if not keys:
        raise ParameterError(f"no name-matched pairs between {pred_dir} and {gt_dir}")

    def one(key: str):
        pred = _as_probmap(load_raster(preds[key]))
        gt = load_pgm(gts[key])
        return evaluate_pair(pred, gt, beta2=args.beta2,
                             theta1=args.theta1, theta2=args.theta2)

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        per_image = list(pool.map(one, keys))
    report = aggregate(per_image)
    payload = report.to_dict()
    payload["pairs"] = keys
    _write_json(args.report, payload)
    _write_manifest(args.report + ".manifest.json", "eval",
                    {"beta2": args.beta2, "theta1": args.theta1, "theta2": args.theta2},
                    args.seed, [str(pred_dir), str(gt_dir)], [args.report], started)
    _say(args, f"{report.count} pairs: mae={report.mae:.4f} iou={report.iou:.4f} "
               f"f_beta={report.f_beta:.4f} bf1={report.boundary_f1:.4f}")
    return 0


def _cmd_fusion_demo(args) -> int:
    started = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed, 3])))
    params = FusionParams.init(d_model=args.d_model, n_heads=args.n_heads, seed=args.seed)
    fi = rng.normal(size=(args.tokens, args.d_model))
    fs = rng.normal(size=(args.tokens, args.d_model))
    fused = fusion_forward(fi, fs, params)
    attn = attention_weights(fi, fs, params)
    row_sum_err = float(np.abs(attn.sum(axis=-1) - 1.0).max())
    perm = rng.permutation(args.tokens)
    perm_err = float(np.abs(fusion_forward(fi, fs[perm], params) - fused).max())
    gamma, beta, alpha = film_gate(fs, params)
    check = grad_check("fusion", seed=args.seed, tol=args.tol,
                       d_model=args.d_model, n_heads=args.n_heads)
    payload = {
        "op": "fusion-demo",
        "seed": args.seed,
        "max_rel_err": check.max_rel_err,
        "pass": check.passed and row_sum_err < 1e-12 and perm_err < 1e-12,
        "softmax_row_sum_err": row_sum_err,
        "kv_permutation_err": perm_err,
        "gate_norms": {"gamma": float(np.abs(gamma).max()),
                       "beta": float(np.abs(beta).max()),
                       "alpha": float(np.abs(alpha).max())},
        "output_shape": list(fused.shape),
    }
    _write_json(args.report, payload)
    _write_manifest(args.report + ".manifest.json", "fusion-demo",
                    {"d_model": args.d_model, "n_heads": args.n_heads,
                     "tokens": args.tokens, "tol": args.tol},
                    args.seed, [], [args.report], started)
    _say(args, f"fusion-demo pass={payload['pass']} max_rel_err={check.max_rel_err:.2e}")
    return 0 if payload["pass"] else 1


def _cmd_gradcheck(args) -> int:
    started = time.perf_counter()
    report = grad_check(args.target, seed=args.seed, h=args.h, tol=args.tol)
    _write_json(args.report, report.to_dict())
    _write_manifest(args.report + ".manifest.json", "gradcheck",
                    {"target": args.target, "h": args.h, "tol": args.tol},
                    args.seed, [], [args.report], started)
    _say(args, f"gradcheck {args.target}: max_rel_err={report.max_rel_err:.2e} "
               f"pass={report.passed}")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="camokit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"camokit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--quiet", action="store_true",
                       help="suppress human-readable output (never manifests)")
        p.add_argument("--config", help="JSON file whose keys override flags")

    p = sub.add_parser("synth", help="generate synthetic camouflage samples")
    common(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--blob-count", type=int, default=3)
    p.add_argument("--contrast", type=float, default=0.1)
    p.add_argument("--noise-scale", type=int, default=8)
    p.add_argument("--K", type=float, default=8.0, help="sketch perturbation increment")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("augment", help="augment a sketch raster")
    common(p)
    p.add_argument("--in", dest="in_path", required=True, metavar="IN")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-json", help="also write the fitted curve set as JSON")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--C", type=int, default=64)
    p.add_argument("--K", type=float, default=8.0)
    p.add_argument("--min-pixels", type=int, default=8)
    p.add_argument("--thickness", type=int, default=1)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("loss", help="score a prediction against a gt mask")
    common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--theta1", type=int, default=3)
    p.add_argument("--theta2", type=int, default=3)
    p.add_argument("--lambda-mask", type=float, default=2.0)
    p.add_argument("--lambda-dice", type=float, default=5.0)
    p.add_argument("--lambda-adaptive", type=float, default=5e-4)
    p.add_argument("--lambda-boundary", type=float, default=1.0)
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("eval", help="evaluate a directory of predictions")
    common(p)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--beta2", type=float, default=0.3)
    p.add_argument("--theta1", type=int, default=3)
    p.add_argument("--theta2", type=int, default=3)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("fusion-demo", help="run the gated fusion block on toy inputs")
    common(p)
    p.add_argument("--report", required=True)
    p.add_argument("--d-model", type=int, default=16)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--tokens", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_fusion_demo)

    p = sub.add_parser("gradcheck", help="verify analytic gradients of a block")
    common(p)
    p.add_argument("--target", required=True, choices=GRADCHECK_TARGETS)
    p.add_argument("--report", required=True)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config_file(args)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (FormatError, OSError) as exc:
        print(f"camokit: error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, CamokitError, ValueError) as exc:
        print(f"camokit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
