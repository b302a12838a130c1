"""2-D raster primitives: masks, probability maps, pooling, topology, file I/O.

Masks are boolean ``(H, W)`` arrays, probability maps are float64 ``(H, W)``
arrays with values in [0, 1], label maps are non-negative int arrays with
contiguous labels 1..k.  All functions are pure; nothing mutates its input.

Topology convention: foreground is 8-connected, background 4-connected.
Pixels outside the image are background.
"""

from __future__ import annotations

import struct

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import FormatError, ParameterError

PGM_THRESHOLD = 128  # 8-bit foreground threshold on load (midpoint)

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def check_mask(mask) -> np.ndarray:
    """Validate and canonicalize a binary mask to a bool (H, W) array."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
    return arr.astype(bool)


def check_probmap(pmap) -> np.ndarray:
    """Validate and canonicalize a probability map to float64 in [0, 1]."""
    arr = np.asarray(pmap, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"probability map must be 2-D and non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ParameterError("probability map contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("probability map values must lie in [0, 1]")
    return arr


def _check_window(theta: int) -> int:
    if not isinstance(theta, (int, np.integer)) or theta < 1 or theta % 2 == 0:
        raise ParameterError(f"window size must be odd and >= 1, got {theta!r}")
    return int(theta)


def maxpool(pmap, theta: int, pad: float = 0.0) -> np.ndarray:
    """Sliding-window maximum with a theta x theta window centered per pixel.

    Out-of-image positions contribute ``pad`` (1.0 when pooling an inverted
    mask so that the frame acts as background, 0.0 otherwise).
    """
    theta = _check_window(theta)
    arr = check_probmap(pmap)
    if theta == 1:
        return arr.copy()
    return ndimage.maximum_filter(arr, size=theta, mode="constant", cval=pad)


def maxpool_argmax(pmap, theta: int, pad: float = 0.0):
    """Max-pool plus, per output pixel, the flat source index of the maximum.

    Ties resolve to the first window position in scan order; an index of -1
    means the maximum came from the out-of-image pad value.  Used to route
    subgradients through the pooling.
    """
    theta = _check_window(theta)
    arr = check_probmap(pmap)
    h, w = arr.shape
    r = theta // 2
    padded = np.pad(arr, r, mode="constant", constant_values=pad)
    win = sliding_window_view(padded, (theta, theta))  # (h, w, theta, theta)
    flat = win.reshape(h, w, theta * theta)
    k = flat.argmax(axis=2)
    pooled = np.take_along_axis(flat, k[..., None], axis=2)[..., 0]
    wy, wx = np.divmod(k, theta)
    sy = np.arange(h)[:, None] - r + wy
    sx = np.arange(w)[None, :] - r + wx
    valid = (sy >= 0) & (sy < h) & (sx >= 0) & (sx < w)
    idx = np.where(valid, sy * w + sx, -1)
    return pooled, idx


def connected_components(mask, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label maximal connected foreground sets 1..k in first-pixel scan order.

    Returns (label map, k).
    """
    arr = check_mask(mask)
    if connectivity == 4:
        structure = _STRUCT_4
    elif connectivity == 8:
        structure = _STRUCT_8
    else:
        raise ParameterError(f"connectivity must be 4 or 8, got {connectivity!r}")
    raw, k = ndimage.label(arr, structure=structure)
    if k == 0:
        return raw, 0
    # relabel so label order follows the first foreground pixel in scan order
    flat = raw.ravel()
    first = np.full(k + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    np.minimum.at(first, flat[nz], nz)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(k + 1, dtype=raw.dtype)
    remap[1 + order] = np.arange(1, k + 1)
    return remap[raw], k


def euler_number(mask) -> int:
    """Foreground components minus holes (foreground-8 / background-4)."""
    arr = check_mask(mask)
    _, n_fg = connected_components(arr, connectivity=8)
    padded = np.pad(arr, 1, mode="constant", constant_values=False)
    _, n_bg = connected_components(~padded, connectivity=4)
    holes = n_bg - 1  # one background component touches the outer frame
    return n_fg - holes


# ---------------------------------------------------------------------------
# File I/O: PGM (P5, 8-bit) for masks, PF32 for probability maps.

PF32_MAGIC = b"PF32"


def save_pgm(mask, path) -> None:
    """Write a binary mask as 8-bit binary PGM (foreground=255)."""
    arr = check_mask(mask)
    h, w = arr.shape
    payload = (arr.astype(np.uint8) * 255).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(payload)


def _read_pgm_tokens(data: bytes, count: int):
    """Read whitespace-separated header tokens, skipping '#' comments."""
    tokens = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise FormatError("truncated PGM header")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError("truncated PGM comment")
            pos = nl + 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    return tokens, pos + 1  # single whitespace after maxval


def load_pgm(path) -> np.ndarray:
    """Load a binary (P5) PGM as a boolean mask (value >= 128 is foreground)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise FormatError(f"{path}: not a binary PGM (missing P5 magic)")
    tokens, offset = _read_pgm_tokens(data[2:], 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1 or not (0 < maxval < 256):
        raise FormatError(f"{path}: bad PGM dimensions or maxval")
    payload = data[2 + offset:]
    if len(payload) < h * w:
        raise FormatError(f"{path}: truncated PGM payload")
    arr = np.frombuffer(payload[: h * w], dtype=np.uint8).reshape(h, w)
    return arr >= PGM_THRESHOLD


def save_pf32(pmap, path) -> None:
    """Write a probability map as PF32: magic, u32 height, u32 width, f32 data (LE)."""
    arr = check_probmap(pmap)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(PF32_MAGIC)
        fh.write(struct.pack("<II", h, w))
        fh.write(arr.astype("<f4").tobytes())


def load_pf32(path) -> np.ndarray:
    """Load a PF32 probability map as float64."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(PF32_MAGIC):
        raise FormatError(f"{path}: missing PF32 magic")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated PF32 header")
    h, w = struct.unpack("<II", data[4:12])
    if h < 1 or w < 1:
        raise FormatError(f"{path}: bad PF32 dimensions")
    expected = 12 + 4 * h * w
    if len(data) != expected:
        raise FormatError(f"{path}: PF32 payload length {len(data) - 12}, expected {4 * h * w}")
    arr = np.frombuffer(data[12:], dtype="<f4").reshape(h, w).astype(np.float64)
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError(f"{path}: probabilities outside [0, 1]")
    return arr


def load_raster(path) -> np.ndarray:
    """Dispatch on magic bytes: PGM -> bool mask, PF32 -> float map."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic.startswith(b"P5"):
        return load_pgm(path)
    if magic == PF32_MAGIC:
        return load_pf32(path)
    raise FormatError(f"{path}: unknown raster magic {magic!r}")


def save_raster(raster, path) -> None:
    arr = np.asarray(raster)
    if arr.dtype == bool:
        save_pgm(arr, path)
    else:
        save_pf32(arr, path)
