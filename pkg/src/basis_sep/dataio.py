"""Binary dataset and image file formats.

Two families:

* IDX -- the big-endian binary layout used by the classic handwritten-digit
  archives: a 32-bit magic (0x00000801 for 1-D unsigned-byte label files,
  0x00000803 for 3-D unsigned-byte image files), one big-endian 32-bit size
  per dimension, then the raw bytes.  Images load as Signals of shape
  [1, rows, cols] scaled to [0, 1]; labels load as an integer vector.
* NetPBM -- binary PGM (magic P5, one channel) and PPM (magic P6, three
  channels) with maxval 255.  Writing clamps to [0, 1] and quantizes by
  round-half-up; reading scales bytes by 1/255, so write-read-write is
  byte-identical.

All parse failures raise :class:`~basis_sep.core.FormatError` carrying the
byte offset at which the problem was detected.
"""

from __future__ import annotations

import numpy as np

from .core import FormatError, Signal

__all__ = [
    "read_idx",
    "read_idx_images",
    "read_idx_labels",
    "read_pnm",
    "write_pnm",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
# Guards against dimension fields that claim more data than any sane file:
# 2**31 bytes of payload is far beyond every dataset this package ingests.
MAX_IDX_BYTES = 2**31


def _read_be_u32(buf: bytes, offset: int, what: str) -> int:
    if offset + 4 > len(buf):
        raise FormatError(f"truncated file: {what} needs 4 bytes", offset=offset)
    return int.from_bytes(buf[offset:offset + 4], "big")


def read_idx_images(path) -> list[Signal]:
    """Parse a 3-D unsigned-byte IDX image file into [1, r, c] Signals."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = _read_be_u32(buf, 0, "magic")
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x} for images",
            offset=0,
        )
    count = _read_be_u32(buf, 4, "image count")
    rows = _read_be_u32(buf, 8, "row count")
    cols = _read_be_u32(buf, 12, "column count")
    total = count * rows * cols
    if total > MAX_IDX_BYTES:
        raise FormatError(
            f"dimensions {count}x{rows}x{cols} overflow the {MAX_IDX_BYTES}-byte cap",
            offset=4,
        )
    if len(buf) != 16 + total:
        offset = min(len(buf), 16 + total)
        raise FormatError(
            f"expected {16 + total} bytes for {count} images of {rows}x{cols}, "
            f"file has {len(buf)}",
            offset=offset,
        )
    raw = np.frombuffer(buf, dtype=np.uint8, offset=16)
    pixels = raw.astype(np.float64).reshape(count, rows * cols) / 255.0
    shape = (1, rows, cols)
    return [Signal(row, shape) for row in pixels]


def read_idx_labels(path) -> np.ndarray:
    """Parse a 1-D unsigned-byte IDX label file into an int64 vector."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = _read_be_u32(buf, 0, "magic")
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(
            f"bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x} for labels",
            offset=0,
        )
    count = _read_be_u32(buf, 4, "label count")
    if count > MAX_IDX_BYTES:
        raise FormatError(f"label count {count} overflows the cap", offset=4)
    if len(buf) != 8 + count:
        offset = min(len(buf), 8 + count)
        raise FormatError(
            f"expected {8 + count} bytes for {count} labels, file has {len(buf)}",
            offset=offset,
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=8).astype(np.int64)


def read_idx(path, label_path=None):
    """Read an IDX image file, optionally paired with its label file.

    Returns the image list alone, or ``(images, labels)`` when
    ``label_path`` is given; mismatched counts raise
    :class:`~basis_sep.core.FormatError`.
    """
    images = read_idx_images(path)
    if label_path is None:
        return images
    labels = read_idx_labels(label_path)
    if len(labels) != len(images):
        raise FormatError(
            f"label file has {len(labels)} entries for {len(images)} images",
            offset=4,
        )
    return images, labels


def _expect_token(buf: bytes, pos: int, what: str) -> tuple[bytes, int]:
    """Next whitespace-delimited token, skipping '#' comments to end of line."""
    n = len(buf)
    while pos < n:
        c = buf[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise FormatError(f"truncated header: missing {what}", offset=pos)
    start = pos
    while pos < n and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def _header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _expect_token(buf, pos, what)
    try:
        value = int(token)
    except ValueError:
        raise FormatError(
            f"{what} must be an integer, got {token!r}", offset=pos
        ) from None
    if value <= 0:
        raise FormatError(f"{what} must be positive, got {value}", offset=pos)
    return value, end


def read_pnm(path) -> Signal:
    """Read a binary PGM (P5) or PPM (P6) file with maxval 255.

    Returns a Signal of shape (1, h, w) or (3, h, w) with values in [0, 1].
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    token, pos = _expect_token(buf, 0, "magic")
    if token == b"P5":
        channels = 1
    elif token == b"P6":
        channels = 3
    else:
        raise FormatError(f"unsupported magic {token!r}, expected P5 or P6", offset=0)
    width, pos = _header_int(buf, pos, "width")
    height, pos = _header_int(buf, pos, "height")
    maxval_at = pos
    maxval, pos = _header_int(buf, pos, "maxval")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, only 255", offset=maxval_at)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise FormatError("missing single whitespace after maxval", offset=pos)
    pos += 1
    total = width * height * channels
    if len(buf) - pos < total:
        raise FormatError(
            f"truncated pixel data: need {total} bytes, have {len(buf) - pos}",
            offset=len(buf),
        )
    if len(buf) - pos > total:
        raise FormatError(
            f"{len(buf) - pos - total} trailing bytes after pixel data",
            offset=pos + total,
        )
    raw = np.frombuffer(buf, dtype=np.uint8, offset=pos).astype(np.float64) / 255.0
    # PNM interleaves channels per pixel in row-major order; Signals store
    # channel planes, so color data needs one transpose.
    if channels == 1:
        data = raw
    else:
        data = raw.reshape(height * width, 3).T.reshape(-1)
    return Signal(data, (channels, height, width))


def write_pnm(path, signal: Signal) -> None:
    """Write a 1-channel Signal as PGM (P5) or a 3-channel one as PPM (P6).

    Values are clamped to [0, 1] and quantized round-half-up to bytes
    (0.5 maps to 128).  Writing a file read back from disk reproduces it
    byte for byte because quantization is idempotent.
    """
    if len(signal.shape) != 3 or signal.shape[0] not in (1, 3):
        raise ValueError(
            f"PNM output needs shape (1, h, w) or (3, h, w), got {signal.shape}"
        )
    channels, height, width = signal.shape
    magic = b"P5" if channels == 1 else b"P6"
    clamped = np.clip(signal.data, 0.0, 1.0)
    bytes_ = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    if channels == 3:
        bytes_ = bytes_.reshape(3, height * width).T.reshape(-1)
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bytes_.tobytes())
