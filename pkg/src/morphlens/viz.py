"""Heatmap colorization, overlays, and binary PGM/PPM codecs.

All pixel math rounds half-up (floor(x + 0.5)) so outputs are bit-stable,
and the codecs write the canonical uncompressed netpbm layout: magic line,
"width height" line, "255" line, then the raw payload.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ImageError


@dataclass(frozen=True, eq=False)
class RgbImage:
    """H x W x 3 uint8 pixel grid."""

    pixels: np.ndarray

    def __post_init__(self):
        array = np.asarray(self.pixels)
        if array.ndim != 3 or array.shape[2] != 3:
            raise ImageError(f"RgbImage needs an (H, W, 3) array, got shape {array.shape}")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ImageError(f"RgbImage dimensions must be positive, got shape {array.shape}")
        if array.dtype != np.uint8:
            if not np.issubdtype(array.dtype, np.integer) or array.min() < 0 or array.max() > 255:
                raise ImageError(f"RgbImage pixels must be uint8 or integers in [0, 255], got {array.dtype}")
            array = array.astype(np.uint8)
        object.__setattr__(self, "pixels", array)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _to_byte(unit_values: np.ndarray) -> np.ndarray:
    return np.floor(255.0 * unit_values + 0.5).astype(np.uint8)


def colorize(heatmap) -> RgbImage:
    """Map a normalized heatmap onto a blue (0) -> green (0.5) -> red (1) ramp."""
    if not heatmap.normalized:
        raise ImageError("colorize needs a normalized heatmap")
    v = heatmap.values
    red = np.clip(2.0 * v - 1.0, 0.0, 1.0)
    green = 1.0 - np.abs(2.0 * v - 1.0)
    blue = np.clip(1.0 - 2.0 * v, 0.0, 1.0)
    return RgbImage(np.stack([_to_byte(red), _to_byte(green), _to_byte(blue)], axis=-1))


def superimpose(base: RgbImage, heat: RgbImage, alpha: float = 0.4) -> RgbImage:
    """Per-channel blend round((1 - alpha) * base + alpha * heat)."""
    if base.pixels.shape != heat.pixels.shape:
        raise ImageError(
            f"superimpose: base {base.height}x{base.width} and heat {heat.height}x{heat.width} differ"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    mixed = (1.0 - alpha) * base.pixels.astype(np.float64) + alpha * heat.pixels.astype(np.float64)
    return RgbImage(np.floor(mixed + 0.5).astype(np.uint8))


def _parse_netpbm(data: bytes, magic: bytes, channels: int) -> tuple[int, int, bytes]:
    prefix = magic + b"\n"
    if not data.startswith(prefix):
        raise FormatError(f"bad magic, expected {magic.decode('ascii')}")
    rest = data[len(prefix) :]
    newline = rest.find(b"\n")
    if newline < 0:
        raise FormatError("missing dimensions line")
    tokens = rest[:newline].split(b" ")
    if len(tokens) != 2 or not all(t.isdigit() for t in tokens):
        raise FormatError(f"malformed dimensions line {rest[:newline]!r}")
    width, height = int(tokens[0]), int(tokens[1])
    if width < 1 or height < 1:
        raise FormatError(f"non-positive dimensions {width}x{height}")
    rest = rest[newline + 1 :]
    maxval_end = rest.find(b"\n")
    if maxval_end < 0:
        raise FormatError("missing maxval line")
    if rest[:maxval_end] != b"255":
        raise FormatError(f"unsupported maxval {rest[:maxval_end]!r}, only 255 is accepted")
    payload = rest[maxval_end + 1 :]
    expected = width * height * channels
    if len(payload) != expected:
        raise FormatError(f"payload has {len(payload)} bytes, expected {expected}")
    return width, height, payload


def encode_ppm(image: RgbImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def decode_ppm(data: bytes) -> RgbImage:
    width, height, payload = _parse_netpbm(data, b"P6", 3)
    return RgbImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy())


def encode_pgm(gray: np.ndarray) -> bytes:
    array = np.asarray(gray)
    if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
        raise ImageError(f"encode_pgm needs a non-empty 2-D array, got shape {array.shape}")
    if array.dtype != np.uint8:
        if not np.issubdtype(array.dtype, np.integer) or array.min() < 0 or array.max() > 255:
            raise ImageError(f"encode_pgm needs uint8 data, got {array.dtype}")
        array = array.astype(np.uint8)
    header = f"P5\n{array.shape[1]} {array.shape[0]}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(array).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    width, height, payload = _parse_netpbm(data, b"P5", 1)
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
