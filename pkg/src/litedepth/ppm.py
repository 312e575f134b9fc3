"""Dependency-free binary PPM (P6) / PGM (P5) image input and output.

Reads normalize to [0, 1]. RGB writes quantize to 8 bits; depth writes use
16-bit PGM in millimeters (round-half-even, clamped to the 16-bit range).
"""

from __future__ import annotations

import numpy as np


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise ParseError("unexpected end of header", pos)
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def read_image(path) -> np.ndarray:
    """P6 -> (3, H, W) or P5 -> (H, W) array of floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported magic {magic!r}", 0)
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        if not tok.isdigit():
            raise ParseError(f"expected integer header field, got {tok!r}", pos - len(tok))
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval <= 0 or maxval > 65535:
        raise ParseError(f"invalid maxval {maxval}", pos)
    pos += 1  # single whitespace byte after maxval
    channels = 3 if magic == b"P6" else 1
    two_byte = maxval > 255
    count = width * height * channels
    need = count * (2 if two_byte else 1)
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise ParseError(
            f"truncated payload: need {need} bytes, have {len(payload)}", pos + len(payload)
        )
    dtype = ">u2" if two_byte else "u1"
    arr = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    arr = arr.reshape(height, width, channels) / maxval
    if channels == 3:
        return arr.transpose(2, 0, 1)
    return arr[:, :, 0]


def read_depth_mm(path) -> np.ndarray:
    """Raw 16-bit PGM depth back to meters (inverse of write_depth)."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise ParseError(f"depth files are P5, got {magic!r}", 0)
    fields = []
    for _ in range(3):
        tok, pos = _read_token(data, pos)
        fields.append(int(tok))
    width, height, maxval = fields
    pos += 1
    dtype = ">u2" if maxval > 255 else "u1"
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return arr.reshape(height, width).astype(np.float64) / 1000.0


def write_image(path, image: np.ndarray):
    """(3, H, W) floats in [0, 1] -> 8-bit binary PPM."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected (3, H, W) RGB array, got {image.shape}")
    q = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = image.shape[1:]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(q.transpose(1, 2, 0).tobytes())


def write_depth(path, depth: np.ndarray):
    """(H, W) depth in meters -> 16-bit PGM of millimeters (round-half-even)."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError(f"expected (H, W) depth array, got {depth.shape}")
    q = np.clip(np.rint(depth * 1000.0), 0, 65535).astype(">u2")
    h, w = depth.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode())
        fh.write(q.tobytes())
