"""Toy-scale forward passes for the architectural blocks, with gradient checks.

Everything runs on plain float64 numpy arrays at small sizes.  Each forward
pass has a hand-written backward pass for the scalarization sum(output); the
``grad_check`` entry point compares those against central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ParameterError


def seeded_uniform(shape, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


@dataclass
class FusionParams:
    """Projections for gated cross-attention: Q/K/V/O plus the per-channel
    scale/shift/gate head applied to pooled reference features."""

    d_model: int
    n_heads: int
    W_q: np.ndarray
    b_q: np.ndarray
    W_k: np.ndarray
    b_k: np.ndarray
    W_v: np.ndarray
    b_v: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    W_film: np.ndarray  # (d, 3d)
    b_film: np.ndarray  # (3d,)

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ParameterError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        d = self.d_model
        expected = {"W_q": (d, d), "b_q": (d,), "W_k": (d, d), "b_k": (d,),
                    "W_v": (d, d), "b_v": (d,), "W_o": (d, d), "b_o": (d,),
                    "W_film": (d, 3 * d), "b_film": (3 * d,)}
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ParameterError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)

    @classmethod
    def init(cls, d_model: int = 32, n_heads: int = 4, seed: int = 0) -> "FusionParams":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
        d = d_model
        return cls(
            d_model=d, n_heads=n_heads,
            W_q=seeded_uniform((d, d), rng), b_q=seeded_uniform((d,), rng),
            W_k=seeded_uniform((d, d), rng), b_k=seeded_uniform((d,), rng),
            W_v=seeded_uniform((d, d), rng), b_v=seeded_uniform((d,), rng),
            W_o=seeded_uniform((d, d), rng), b_o=seeded_uniform((d,), rng),
            W_film=seeded_uniform((d, 3 * d), rng), b_film=seeded_uniform((3 * d,), rng),
        )


def _check_tokens(x, d: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ParameterError(f"{name} must have shape (tokens, {d}), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def _softmax(s: np.ndarray) -> np.ndarray:
    z = s - s.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)  # (h, n, dh)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def cross_attention(queries, references, params: FusionParams, return_cache: bool = False):
    """Multi-head scaled dot-product attention; queries from the image stream,
    keys/values from the reference (sketch) stream."""
    d = params.d_model
    fi = _check_tokens(queries, d, "queries")
    fs = _check_tokens(references, d, "references")
    q = fi @ params.W_q + params.b_q
    k = fs @ params.W_k + params.b_k
    v = fs @ params.W_v + params.b_v
    qh, kh, vh = (_split_heads(x, params.n_heads) for x in (q, k, v))
    scale = 1.0 / math.sqrt(d // params.n_heads)
    scores = np.einsum("hnd,hmd->hnm", qh, kh) * scale
    attn = _softmax(scores)
    heads = np.einsum("hnm,hmd->hnd", attn, vh)
    concat = _merge_heads(heads)
    out = concat @ params.W_o + params.b_o
    if return_cache:
        cache = dict(fi=fi, fs=fs, q=qh, k=kh, v=vh, attn=attn, concat=concat, scale=scale)
        return out, cache
    return out


def attention_weights(queries, references, params: FusionParams) -> np.ndarray:
    """Softmax attention matrices, shape (heads, queries, references)."""
    _, cache = cross_attention(queries, references, params, return_cache=True)
    return cache["attn"]


def film_gate(references, params: FusionParams):
    """Mean-pool the reference tokens and regress per-channel scale, shift, gate."""
    fs = _check_tokens(references, params.d_model, "references")
    pooled = fs.mean(axis=0)
    z = pooled @ params.W_film + params.b_film
    gamma, beta, alpha = np.split(z, 3)
    return gamma, beta, alpha


def fusion_forward(queries, references, params: FusionParams) -> np.ndarray:
    """Gated residual fusion: F_I + alpha * (O * (1 + gamma) + beta)."""
    o = cross_attention(queries, references, params)
    gamma, beta, alpha = film_gate(references, params)
    fi = _check_tokens(queries, params.d_model, "queries")
    return fi + alpha * (o * (1.0 + gamma) + beta)


def _attention_backward(g_out: np.ndarray, cache: dict, params: FusionParams):
    """Gradients of sum-scalarized attention output w.r.t. inputs and params."""
    fi, fs = cache["fi"], cache["fs"]
    qh, kh, vh, attn = cache["q"], cache["k"], cache["v"], cache["attn"]
    scale = cache["scale"]
    g_concat = g_out @ params.W_o.T
    g_W_o = cache["concat"].T @ g_out
    g_b_o = g_out.sum(axis=0)
    g_heads = _split_heads(g_concat, params.n_heads)
    g_attn = np.einsum("hnd,hmd->hnm", g_heads, vh)
    g_vh = np.einsum("hnm,hnd->hmd", attn, g_heads)
    # softmax backward per row
    g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
    g_scores *= scale
    g_qh = np.einsum("hnm,hmd->hnd", g_scores, kh)
    g_kh = np.einsum("hnm,hnd->hmd", g_scores, qh)
    g_q, g_k, g_v = (_merge_heads(x) for x in (g_qh, g_kh, g_vh))
    grads = {
        "W_q": fi.T @ g_q, "b_q": g_q.sum(axis=0),
        "W_k": fs.T @ g_k, "b_k": g_k.sum(axis=0),
        "W_v": fs.T @ g_v, "b_v": g_v.sum(axis=0),
        "W_o": g_W_o, "b_o": g_b_o,
    }
    g_fi = g_q @ params.W_q.T
    g_fs = g_k @ params.W_k.T + g_v @ params.W_v.T
    return g_fi, g_fs, grads


def fusion_backward(queries, references, params: FusionParams):
    """Gradients of sum(fusion_forward) w.r.t. queries, references, and params."""
    o, cache = cross_attention(queries, references, params, return_cache=True)
    fs = cache["fs"]
    pooled = fs.mean(axis=0)
    z = pooled @ params.W_film + params.b_film
    gamma, beta, alpha = np.split(z, 3)
    n = cache["fi"].shape[0]
    m = fs.shape[0]

    g_fu = np.ones_like(o)  # scalarization: sum of outputs
    inner = o * (1.0 + gamma) + beta
    g_fi = g_fu.copy()
    g_alpha = (g_fu * inner).sum(axis=0)
    g_inner = g_fu * alpha
    g_o = g_inner * (1.0 + gamma)
    g_gamma = (g_inner * o).sum(axis=0)
    g_beta = g_inner.sum(axis=0)

    g_z = np.concatenate([g_gamma, g_beta, g_alpha])
    g_W_film = np.outer(pooled, g_z)
    g_b_film = g_z
    g_pooled = params.W_film @ g_z
    g_fs = np.tile(g_pooled / m, (m, 1))

    g_fi_attn, g_fs_attn, grads = _attention_backward(g_o, cache, params)
    grads["W_film"] = g_W_film
    grads["b_film"] = g_b_film
    return g_fi + g_fi_attn, g_fs + g_fs_attn, grads


# ---------------------------------------------------------------------------
# High-frequency extraction, patch embedding, adapter.


@dataclass
class AdapterParams:
    """High-pass ratio, patch size, and the embedding/adapter projections."""

    tau: float
    patch: int
    W_pe: np.ndarray  # (patch*patch, d)
    b_pe: np.ndarray
    W_mlp: np.ndarray  # (d, hidden)
    b_mlp: np.ndarray
    W_up: np.ndarray  # (hidden, d)
    b_up: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.tau < 1.0):
            raise ParameterError(f"tau must lie in [0, 1), got {self.tau}")
        if self.patch < 1:
            raise ParameterError(f"patch must be >= 1, got {self.patch}")
        for name in ("W_pe", "b_pe", "W_mlp", "b_mlp", "W_up", "b_up"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @classmethod
    def init(cls, tau: float = 0.25, patch: int = 4, d: int = 32,
             hidden: int = 16, seed: int = 0) -> "AdapterParams":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
        return cls(
            tau=tau, patch=patch,
            W_pe=seeded_uniform((patch * patch, d), rng), b_pe=seeded_uniform((d,), rng),
            W_mlp=seeded_uniform((d, hidden), rng), b_mlp=seeded_uniform((hidden,), rng),
            W_up=seeded_uniform((hidden, d), rng), b_up=seeded_uniform((d,), rng),
        )


def highpass_fft(image, tau: float) -> np.ndarray:
    """Zero the centered low-frequency square of side ceil(tau * min(H, W))."""
    if not (0.0 <= tau < 1.0):
        raise ParameterError(f"tau must lie in [0, 1), got {tau}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ParameterError(f"image must be 2-D, got shape {img.shape}")
    h, w = img.shape
    side = math.ceil(tau * min(h, w))
    if side == 0:
        return img.copy()
    spec = np.fft.fftshift(np.fft.fft2(img))
    y0 = h // 2 - side // 2
    x0 = w // 2 - side // 2
    spec[y0:y0 + side, x0:x0 + side] = 0.0
    return np.fft.ifft2(np.fft.ifftshift(spec)).real


def patch_embed(image, params: AdapterParams) -> np.ndarray:
    """Flatten non-overlapping patches row-major and project to tokens x d."""
    img = np.asarray(image, dtype=np.float64)
    p = params.patch
    h, w = img.shape
    if h % p or w % p:
        raise ParameterError(f"patch {p} must divide image sides {img.shape}")
    gh, gw = h // p, w // p
    patches = img.reshape(gh, p, gw, p).transpose(0, 2, 1, 3).reshape(gh * gw, p * p)
    return patches @ params.W_pe + params.b_pe


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU: x * Phi(x) with the Gaussian CDF."""
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    return cdf + x * phi


def adapter_forward(hf_tokens, pe_tokens, params: AdapterParams) -> np.ndarray:
    """Up-projected MLP over the summed high-frequency and patch tokens."""
    a = np.asarray(hf_tokens, dtype=np.float64)
    b = np.asarray(pe_tokens, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"token shapes differ: {a.shape} vs {b.shape}")
    pre = (a + b) @ params.W_mlp + params.b_mlp
    return gelu(pre) @ params.W_up + params.b_up


def adapter_backward(hf_tokens, pe_tokens, params: AdapterParams):
    """Gradients of sum(adapter_forward) w.r.t. both inputs and params."""
    a = np.asarray(hf_tokens, dtype=np.float64)
    b = np.asarray(pe_tokens, dtype=np.float64)
    x = a + b
    pre = x @ params.W_mlp + params.b_mlp
    act = gelu(pre)
    g_out = np.ones((x.shape[0], params.W_up.shape[1]))
    g_act = g_out @ params.W_up.T
    g_pre = g_act * gelu_grad(pre)
    g_x = g_pre @ params.W_mlp.T
    grads = {
        "W_mlp": x.T @ g_pre, "b_mlp": g_pre.sum(axis=0),
        "W_up": act.T @ g_out, "b_up": g_out.sum(axis=0),
    }
    return g_x, g_x.copy(), grads


def decode_stub(fused_tokens, threshold: float = 0.0) -> np.ndarray:
    """Threshold a linear read-out of the fused tokens; end-to-end smoke only."""
    x = np.asarray(fused_tokens, dtype=np.float64)
    return x.mean(axis=1) > threshold


# ---------------------------------------------------------------------------
# Finite-difference gradient verification.


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _finite_difference(f, arrays: dict[str, np.ndarray], h: float) -> dict[str, np.ndarray]:
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr, dtype=np.float64)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            fp = f()
            arr[idx] = orig - h
            fm = f()
            arr[idx] = orig
            g[idx] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


@dataclass(frozen=True)
class GradCheckReport:
    op: str
    seed: int
    max_rel_err: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {"op": self.op, "seed": self.seed, "max_rel_err": self.max_rel_err,
                "pass": self.passed, "tol": self.tol}


GRADCHECK_TARGETS = ("fusion", "adapter", "patch-embed", "linear")


def grad_check(op: str, seed: int = 0, h: float = 1e-5, tol: float = 1e-4,
               tokens: int = 6, d_model: int = 8, n_heads: int = 2) -> GradCheckReport:
    """Compare analytic gradients of an op against central finite differences.

    Inputs and parameters are seeded deterministically; the scalarization is
    the sum of the op's outputs.
    """
    if not (1e-6 <= h <= 1e-3):
        raise ParameterError(f"h must lie in [1e-6, 1e-3], got {h}")
    if op not in GRADCHECK_TARGETS:
        raise ParameterError(f"unknown op {op!r}; expected one of {GRADCHECK_TARGETS}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 7])))

    if op == "fusion":
        params = FusionParams.init(d_model=d_model, n_heads=n_heads, seed=seed)
        fi = rng.normal(size=(tokens, d_model))
        fs = rng.normal(size=(tokens + 2, d_model))
        arrays = {"queries": fi, "references": fs,
                  **{k: getattr(params, k) for k in
                     ("W_q", "b_q", "W_k", "b_k", "W_v", "b_v", "W_o", "b_o",
                      "W_film", "b_film")}}
        g_fi, g_fs, grads = fusion_backward(fi, fs, params)
        analytic = {"queries": g_fi, "references": g_fs, **grads}
        scalar = lambda: float(fusion_forward(fi, fs, params).sum())
    elif op == "adapter":
        params = AdapterParams.init(d=d_model, hidden=d_model // 2, seed=seed)
        a = rng.normal(size=(tokens, d_model))
        b = rng.normal(size=(tokens, d_model))
        arrays = {"hf": a, "pe": b,
                  **{k: getattr(params, k) for k in ("W_mlp", "b_mlp", "W_up", "b_up")}}
        g_a, g_b, grads = adapter_backward(a, b, params)
        analytic = {"hf": g_a, "pe": g_b, **grads}
        scalar = lambda: float(adapter_forward(a, b, params).sum())
    elif op == "patch-embed":
        params = AdapterParams.init(patch=2, d=d_model, seed=seed)
        img = rng.normal(size=(6, 6))
        arrays = {"image": img, "W_pe": params.W_pe, "b_pe": params.b_pe}
        g_out = np.ones((9, d_model))
        p = params.patch
        patches = img.reshape(3, p, 3, p).transpose(0, 2, 1, 3).reshape(9, p * p)
        g_img = (g_out @ params.W_pe.T).reshape(3, 3, p, p).transpose(0, 2, 1, 3).reshape(6, 6)
        analytic = {"image": g_img, "W_pe": patches.T @ g_out, "b_pe": g_out.sum(axis=0)}
        scalar = lambda: float(patch_embed(img, params).sum())
    else:  # linear: exact for central differences up to h^2 rounding
        w = rng.normal(size=(d_model, d_model))
        x = rng.normal(size=(tokens, d_model))
        arrays = {"x": x, "w": w}
        analytic = {"x": np.tile(w.sum(axis=1), (tokens, 1)),
                    "w": np.tile(x.sum(axis=0)[:, None], (1, d_model))}
        scalar = lambda: float((x @ w).sum())

    numeric = _finite_difference(scalar, arrays, h)
    worst = 0.0
    for name in arrays:
        err = np.max([rel_err(a, b) for a, b in
                      zip(analytic[name].ravel(), numeric[name].ravel())])
        worst = max(worst, float(err))
    if not math.isfinite(worst):
        raise ParameterError(f"gradient check for {op} produced non-finite values")
    return GradCheckReport(op=op, seed=seed, max_rel_err=worst, passed=worst < tol, tol=tol)
