"""Grayscale image IO and the no-smoothing scale pyramid.

Images are 2D uint8 numpy arrays, shape (height, width), row major.
Supported on disk: binary PGM (P5, maxval <= 255) with a bit-exact
round trip through write_pgm/read_pgm, and 8-bit gray/RGB PNG decoded
via Pillow. The pyramid halves each dimension per level with a 2x2
block mean and no Gaussian prefilter; a trailing odd row/column joins
no block and is dropped.
"""

from __future__ import annotations

import io
import logging
import os

import numpy as np

log = logging.getLogger(__name__)

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # BT.601 luma


def round_half_up(x):
    """Round to nearest integer with .5 ties going toward +inf."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def require_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8 or img.size == 0:
        raise ValueError("expected a non-empty 2D uint8 image")
    return img


def to_grayscale(r, g, b):
    """BT.601 luma of 8-bit channels, round-half-up, clamped to [0, 255].

    Accepts scalars or arrays; returns the same shape as the inputs.
    """
    wr, wg, wb = GRAY_WEIGHTS
    y = wr * np.asarray(r, np.float64) + wg * np.asarray(g, np.float64) + wb * np.asarray(b, np.float64)
    y = np.clip(round_half_up(y), 0, 255)
    if np.ndim(r) == 0:
        return int(y)
    return y.astype(np.uint8)


def _read_pgm_token(stream: io.BufferedReader) -> bytes:
    """Next whitespace-delimited token, skipping '#' comments."""
    tok = b""
    while True:
        c = stream.read(1)
        if c == b"":
            raise ValueError("malformed PGM header: unexpected end of file")
        if c == b"#":
            while c not in (b"\n", b"", b"\r"):
                c = stream.read(1)
            continue
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pgm(path) -> np.ndarray:
    """Decode a binary PGM (P5) file. Maxval above 255 is rejected."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM (P5) file")
        try:
            width = int(_read_pgm_token(f))
            height = int(_read_pgm_token(f))
            maxval = int(_read_pgm_token(f))
        except ValueError as exc:
            raise ValueError(f"{path}: malformed PGM header") from exc
        if width < 1 or height < 1:
            raise ValueError(f"{path}: malformed PGM header: bad dimensions")
        if maxval > 255:
            raise ValueError(f"{path}: unsupported bit depth (maxval {maxval} > 255)")
        if maxval < 1:
            raise ValueError(f"{path}: malformed PGM header: bad maxval")
        data = f.read(width * height)
        if len(data) != width * height:
            raise ValueError(f"{path}: truncated PGM pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(height, width)


def write_pgm(img: np.ndarray, path) -> None:
    """Write a canonical binary PGM: 'P5\\n<w> <h>\\n255\\n' + raw rows."""
    img = require_gray(img)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def _decode_png(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise ValueError(f"{path}: unsupported bit depth (>8 per channel)")
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode in ("RGBA", "LA"):
            im = im.convert("RGB" if im.mode == "RGBA" else "L")
        arr = np.asarray(im)
    if arr.ndim == 2:
        return arr.astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 3:
        return to_grayscale(arr[:, :, 0], arr[:, :, 1], arr[:, :, 2])
    raise ValueError(f"{path}: unsupported PNG layout {arr.shape}")


def load_image(path) -> np.ndarray:
    """Load a PGM or PNG file as a grayscale uint8 array.

    RGB input is converted with to_grayscale. The container is sniffed
    from the magic bytes, not the file extension.
    """
    if not os.path.isfile(path):
        raise ValueError(f"{path}: unreadable file")
    with open(path, "rb") as f:
        magic = f.read(8)
    if magic[:2] == b"P5":
        return read_pgm(path)
    if magic == b"\x89PNG\r\n\x1a\n":
        return _decode_png(path)
    raise ValueError(f"{path}: not a PGM (P5) or PNG file")


def build_pyramid(img: np.ndarray, levels: int = 3, decimate: bool = False) -> list[np.ndarray]:
    """Scale pyramid: level 0 is the input, each next level halves both dims.

    Downsampling is a 2x2 block mean with round-half-up (or plain
    top-left decimation when decimate=True); there is no Gaussian
    prefilter. The level count is truncated with a warning once halving
    would reach a zero dimension.
    """
    img = require_gray(img)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    pyr = [img]
    for k in range(1, levels):
        prev = pyr[-1]
        h2, w2 = prev.shape[0] // 2, prev.shape[1] // 2
        if h2 < 1 or w2 < 1:
            log.warning("pyramid truncated to %d levels: image too small to halve again", k)
            break
        cropped = prev[: 2 * h2, : 2 * w2]
        if decimate:
            pyr.append(np.ascontiguousarray(cropped[::2, ::2]))
        else:
            blocks = cropped.reshape(h2, 2, w2, 2).astype(np.uint16)
            total = blocks.sum(axis=(1, 3))
            pyr.append(((total + 2) >> 2).astype(np.uint8))
    return pyr
