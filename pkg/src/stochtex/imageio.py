"""PFM / PNG / dense-grid file I/O.

Writes go through a temporary file and ``os.replace`` so readers never see a
partial file.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .texture import Grid3D, Image2D

MAX_DIM = 1 << 16
G3D_MAGIC = b"G3D1"


class ImageFormatError(ValueError):
    pass


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def srgb_to_linear(v):
    v = np.asarray(v, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(v):
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


# --- PFM -------------------------------------------------------------------

def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(buf) and buf[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated PFM header")
    return buf[start:pos], pos


def decode_pfm(buf: bytes) -> Image2D:
    tag, pos = _read_token(buf, 0)
    if tag == b"PF":
        channels = 3
    elif tag == b"Pf":
        channels = 1
    else:
        raise ImageFormatError(f"not a PFM file (tag {tag!r})")
    try:
        w_tok, pos = _read_token(buf, pos)
        h_tok, pos = _read_token(buf, pos)
        s_tok, pos = _read_token(buf, pos)
        width, height, scale = int(w_tok), int(h_tok), float(s_tok)
    except ValueError as e:
        raise ImageFormatError(f"malformed PFM header: {e}") from None
    if not (0 < width <= MAX_DIM and 0 < height <= MAX_DIM) or scale == 0:
        raise ImageFormatError(f"bad PFM dimensions {width}x{height}")
    pos += 1  # single whitespace byte after the scale
    dtype = "<f4" if scale < 0 else ">f4"
    n = width * height * channels
    if len(buf) - pos < 4 * n:
        raise ImageFormatError("truncated PFM payload")
    arr = np.frombuffer(buf, dtype=dtype, count=n, offset=pos).reshape(height, width, channels)
    # PFM stores rows bottom-to-top
    try:
        return Image2D(arr[::-1].astype(np.float64))
    except ValueError as e:
        raise ImageFormatError(str(e)) from None


def encode_pfm(image: Image2D) -> bytes:
    data = image.data
    if data.shape[2] == 1:
        tag = b"Pf"
    elif data.shape[2] == 3:
        tag = b"PF"
    else:
        raise ImageFormatError("PFM holds 1 or 3 channels")
    h, w = data.shape[:2]
    header = tag + b"\n" + f"{w} {h}\n-1.0\n".encode()
    return header + np.ascontiguousarray(data[::-1], dtype="<f4").tobytes()


def load_pfm(path) -> Image2D:
    with open(path, "rb") as f:
        return decode_pfm(f.read())


def save_pfm(path, image: Image2D) -> None:
    atomic_write_bytes(path, encode_pfm(image))


# --- PNG -------------------------------------------------------------------

def load_png(path, srgb: bool = True, wrap: str = "clamp") -> Image2D:
    """8-bit PNG to linear floats (sRGB-decoded when ``srgb``)."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA", "LA"):
            im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
        arr = np.asarray(im, dtype=np.uint8)
    v = arr.astype(np.float64) / 255.0
    if v.ndim == 2:
        v = v[:, :, None]
    if srgb:
        c = min(v.shape[2], 3)
        v = v.copy()
        v[:, :, :c] = srgb_to_linear(v[:, :, :c])
    return Image2D(v, wrap)


def to_png_bytes(image: Image2D, srgb: bool = True) -> bytes:
    import io

    from PIL import Image

    v = np.clip(image.data, 0.0, 1.0)
    if srgb:
        c = min(v.shape[2], 3)
        v = v.copy()
        v[:, :, :c] = linear_to_srgb(v[:, :, :c])
    arr = np.round(v * 255.0).astype(np.uint8)
    mode = {1: "L", 2: "LA", 3: "RGB", 4: "RGBA"}[arr.shape[2]]
    im = Image.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr, mode=mode)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def save_png(path, image: Image2D, srgb: bool = True) -> None:
    atomic_write_bytes(path, to_png_bytes(image, srgb))


def load_image(path, srgb: bool = True, wrap: str = "clamp") -> Image2D:
    p = os.fspath(path).lower()
    if p.endswith(".pfm"):
        img = load_pfm(path)
        return Image2D(img.data, wrap)
    if p.endswith(".png"):
        return load_png(path, srgb=srgb, wrap=wrap)
    raise ImageFormatError(f"unsupported image extension: {path}")


def save_image(path, image: Image2D, srgb: bool = True) -> None:
    p = os.fspath(path).lower()
    if p.endswith(".pfm"):
        save_pfm(path, image)
    elif p.endswith(".png"):
        save_png(path, image, srgb)
    else:
        raise ImageFormatError(f"unsupported image extension: {path}")


# --- dense grid ------------------------------------------------------------

def encode_grid(grid: Grid3D) -> bytes:
    nx, ny, nz = grid.dims
    if np.any(np.abs(grid.data) > np.finfo(np.float32).max):
        raise ValueError("voxel values exceed float32 range")
    return G3D_MAGIC + struct.pack("<III", nx, ny, nz) + np.ascontiguousarray(grid.data, dtype="<f4").tobytes()


def decode_grid(buf: bytes) -> Grid3D:
    if len(buf) < 16 or buf[:4] != G3D_MAGIC:
        raise ImageFormatError("not a G3D1 grid")
    nx, ny, nz = struct.unpack_from("<III", buf, 4)
    if min(nx, ny, nz) == 0 or max(nx, ny, nz) > MAX_DIM or nx * ny * nz > (1 << 31):
        raise ImageFormatError(f"bad grid dimensions {nx}x{ny}x{nz}")
    n = nx * ny * nz
    if len(buf) - 16 < 4 * n:
        raise ImageFormatError("truncated grid payload")
    arr = np.frombuffer(buf, dtype="<f4", count=n, offset=16).reshape(nz, ny, nx)
    try:
        return Grid3D(arr.astype(np.float64))
    except ValueError as e:
        raise ImageFormatError(str(e)) from None


def load_grid(path) -> Grid3D:
    with open(path, "rb") as f:
        return decode_grid(f.read())


def save_grid(path, grid: Grid3D) -> None:
    atomic_write_bytes(path, encode_grid(grid))
