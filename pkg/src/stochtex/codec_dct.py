"""8x8 DCT block texture format: one 32-bit word per block and channel.

Each word keeps six low-frequency coefficients of the orthonormal DCT-II:
DC with 7 bits over [0, 8] and five AC terms with 5 bits each over [-2, 2].
Texels decode independently from their block's word. Sources are padded to
multiples of 8 by edge replication.
"""

from __future__ import annotations

import math
import struct
import warnings

import numpy as np

from .texture import FetchCounter, Image2D

BLOCK = 8
COEFFS = ((0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2))  # (row, col) = (v, u) frequencies
DC_BITS = 7
AC_BITS = 5
DC_MAX = 8.0
AC_MAX = 2.0
DC_LEVELS = (1 << DC_BITS) - 1  # 127 steps over [0, 8]
AC_LEVELS = (1 << (AC_BITS - 1)) - 1  # codes -15..15 over [-2, 2]
DC_STEP = DC_MAX / DC_LEVELS
AC_STEP = AC_MAX / AC_LEVELS
MAGIC = b"DCT1"


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    """Orthonormal DCT-II basis, rows are frequencies."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.cos(math.pi * (2 * x + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    m[0] /= math.sqrt(2.0)
    return m


_D = dct_matrix()
# basis[k][y, x] for each kept coefficient
_BASIS = np.stack([np.outer(_D[v], _D[u]) for v, u in COEFFS])


class DctFormatError(ValueError):
    pass


def quantize_dc(c):
    return np.clip(np.rint(np.asarray(c) / DC_STEP), 0, DC_LEVELS).astype(np.uint32)


def quantize_ac(c):
    return np.clip(np.rint(np.asarray(c) / AC_STEP), -AC_LEVELS, AC_LEVELS).astype(np.int32)


def pack_word(dc_code, ac_codes) -> np.ndarray:
    """DC in bits 0-6, then five 5-bit two's-complement AC fields."""
    w = np.asarray(dc_code, dtype=np.uint32) & np.uint32(0x7F)
    for i, a in enumerate(ac_codes):
        field = np.asarray(a, dtype=np.int32).astype(np.uint32) & np.uint32(0x1F)
        w = w | (field << np.uint32(DC_BITS + AC_BITS * i))
    return w


def unpack_word(word) -> np.ndarray:
    """Dequantized coefficients (..., 6) in ``COEFFS`` order."""
    w = np.asarray(word, dtype=np.uint32)
    out = np.empty(w.shape + (len(COEFFS),))
    out[..., 0] = (w & np.uint32(0x7F)).astype(np.float64) * DC_STEP
    for i in range(len(COEFFS) - 1):
        f = ((w >> np.uint32(DC_BITS + AC_BITS * i)) & np.uint32(0x1F)).astype(np.int32)
        f = np.where(f >= 16, f - 32, f)
        out[..., i + 1] = f * AC_STEP
    return out


def _blocks(n: int) -> int:
    return -(-n // BLOCK)


class DctTexture:
    """Compressed texture of ``width x height`` texels.

    ``words`` has shape (blocks_y, blocks_x, channels) covering the source
    padded up to multiples of 8; wrapping uses the unpadded size.
    """

    def __init__(self, words: np.ndarray, width: int, height: int, wrap: str = "clamp"):
        words = np.asarray(words, dtype=np.uint32)
        if words.ndim != 3:
            raise DctFormatError("word array must be (blocks_y, blocks_x, channels)")
        if width < 1 or height < 1:
            raise DctFormatError("dimensions must be positive")
        if words.shape[:2] != (_blocks(height), _blocks(width)):
            raise DctFormatError("word array does not match dimensions")
        self.words = words
        self.width = width
        self.height = height
        self.wrap = wrap

    @property
    def channels(self) -> int:
        return self.words.shape[2]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def nbytes(self) -> int:
        return self.words.size * 4

    def _wrap(self, ix, iy):
        if self.wrap == "repeat":
            return np.mod(ix, self.width), np.mod(iy, self.height)
        return np.clip(ix, 0, self.width - 1), np.clip(iy, 0, self.height - 1)

    def fetch(self, ix, iy, counter: FetchCounter | None = None) -> np.ndarray:
        """Decode texels at integer coords; one word read per channel."""
        ix, iy = self._wrap(np.asarray(ix, dtype=np.int64), np.asarray(iy, dtype=np.int64))
        if counter is not None:
            counter.add(np.broadcast(ix, iy).size)
        words = self.words[iy // BLOCK, ix // BLOCK]  # (..., C)
        coef = unpack_word(words)  # (..., C, 6)
        basis = _BASIS[:, iy % BLOCK, ix % BLOCK]  # (6, ...)
        out = coef[..., 0] * basis[0][..., None]
        for k in range(1, len(COEFFS)):
            out = out + coef[..., k] * basis[k][..., None]
        return out

    def fetch_coords(self, coords, counter: FetchCounter | None = None) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return self.fetch(coords[..., 0], coords[..., 1], counter)

    def decode_texel(self, coord, counter: FetchCounter | None = None) -> np.ndarray:
        return self.fetch(int(coord[0]), int(coord[1]), counter)

    @property
    def padded_dims(self) -> tuple[int, int]:
        return (self.words.shape[1] * BLOCK, self.words.shape[0] * BLOCK)

    def decode_all(self) -> Image2D:
        yy, xx = np.mgrid[0 : self.height, 0 : self.width]
        return Image2D(self.fetch(xx, yy), self.wrap)


def _pad(data: np.ndarray) -> np.ndarray:
    h, w = data.shape[:2]
    ph = (-h) % BLOCK
    pw = (-w) % BLOCK
    if ph or pw:
        data = np.pad(data, ((0, ph), (0, pw), (0, 0)), mode="edge")
    return data


def forward_blocks(data: np.ndarray) -> np.ndarray:
    """Full 8x8 orthonormal DCT of every block: (by, bx, C, 8, 8)."""
    h, w, c = data.shape
    blocks = data.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK, c).transpose(0, 2, 4, 1, 3)
    return np.einsum("ky,...yx,lx->...kl", _D, blocks, _D)


def compress_dct(image: Image2D) -> DctTexture:
    data = np.asarray(image.data, dtype=np.float64)
    if np.any(data < 0.0) or np.any(data > 1.0):
        warnings.warn("texel values outside [0, 1] clamped before compression", stacklevel=2)
        data = np.clip(data, 0.0, 1.0)
    data = _pad(data)
    coef = forward_blocks(data)
    dc = quantize_dc(coef[..., 0, 0])
    ac = [quantize_ac(coef[..., v, u]) for v, u in COEFFS[1:]]
    return DctTexture(pack_word(dc, ac), image.width, image.height, image.wrap)


def truncated_block_inverse(tex: DctTexture, bx: int, by: int) -> np.ndarray:
    """Whole-block inverse DCT from the six stored coefficients: (8, 8, C).

    Same accumulation order as per-texel decoding, so results match bit for bit.
    """
    coef = unpack_word(tex.words[by, bx])  # (C, 6)
    out = _BASIS[0][:, :, None] * coef[:, 0]
    for k in range(1, len(COEFFS)):
        out = out + _BASIS[k][:, :, None] * coef[:, k]
    return out


def encode_container(tex: DctTexture) -> bytes:
    head = MAGIC + struct.pack("<III", tex.width, tex.height, tex.channels)
    return head + np.ascontiguousarray(tex.words, dtype="<u4").tobytes()


def decode_container(buf: bytes, wrap: str = "clamp") -> DctTexture:
    if len(buf) < 16 or buf[:4] != MAGIC:
        raise DctFormatError("not a DCT1 container")
    w, h, c = struct.unpack_from("<III", buf, 4)
    if w == 0 or h == 0 or not 1 <= c <= 4 or max(w, h) > 1 << 16:
        raise DctFormatError(f"bad DCT1 dimensions {w}x{h}x{c}")
    n = _blocks(w) * _blocks(h) * c
    if len(buf) - 16 != 4 * n:
        raise DctFormatError("DCT1 payload size mismatch")
    words = np.frombuffer(buf, dtype="<u4", count=n, offset=16).reshape(_blocks(h), _blocks(w), c)
    return DctTexture(words.astype(np.uint32), w, h, wrap)


def save_dct(path, tex: DctTexture) -> None:
    from .imageio import atomic_write_bytes

    atomic_write_bytes(path, encode_container(tex))


def load_dct(path, wrap: str = "clamp") -> DctTexture:
    with open(path, "rb") as f:
        return decode_container(f.read(), wrap)


def compress_pyramid(pyramid) -> list[DctTexture]:
    """Compress each MIP level independently."""
    return [compress_dct(level) for level in pyramid.levels]
