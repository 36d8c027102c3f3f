"""8-bit grayscale images, window/mask types, boundary-handled sampling, PGM I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class PgmError(ValueError):
    """Raised for malformed PGM data; the message names the offending element."""


class DimensionMismatchError(ValueError):
    """Raised when two containers that must share dimensions do not."""


class BoundaryMode(Enum):
    CLAMP = "clamp"
    MIRROR = "mirror"
    REPEAT = "repeat"


def resolve_index(i: int, n: int, mode: BoundaryMode) -> int:
    """Map a possibly out-of-range coordinate into [0, n).

    CLAMP pins to the nearest edge, REPEAT wraps modulo n, and MIRROR
    reflects with edge duplication (-1 -> 0, -2 -> 1, n -> n-1), which is
    total for any overrun via the period-2n formulation.
    """
    if mode is BoundaryMode.CLAMP:
        return min(max(i, 0), n - 1)
    if mode is BoundaryMode.REPEAT:
        return i % n
    j = i % (2 * n)
    return 2 * n - 1 - j if j >= n else j


def resolve_indices(idx: np.ndarray, n: int, mode: BoundaryMode) -> np.ndarray:
    """Vectorized resolve_index over an integer index array."""
    idx = np.asarray(idx)
    if mode is BoundaryMode.CLAMP:
        return np.clip(idx, 0, n - 1)
    if mode is BoundaryMode.REPEAT:
        return idx % n
    j = idx % (2 * n)
    return np.where(j >= n, 2 * n - 1 - j, j)


@dataclass(frozen=True)
class Image:
    """Immutable 2-D grid of 8-bit gray values, row-major, top-left origin."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width), uint8, read-only

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image extents must be positive, got {self.width}x{self.height}")
        arr = np.asarray(self.pixels, dtype=np.uint8)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"pixel count {arr.size} != width*height {self.width * self.height}"
            )
        arr = arr.reshape(self.height, self.width).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        arr = np.asarray(arr)
        h, w = arr.shape
        return cls(width=w, height=h, pixels=arr.astype(np.uint8))

    def sample(self, x: int, y: int, mode: BoundaryMode) -> int:
        """Boundary-handled pixel read; total for CLAMP/REPEAT, and for
        MIRROR whenever the overrun is smaller than the extent."""
        rx = resolve_index(x, self.width, mode)
        ry = resolve_index(y, self.height, mode)
        return int(self.pixels[ry, rx])

    def crop(self, roi: "Roi") -> "Image":
        roi.validate_inside(self.width, self.height)
        sub = self.pixels[roi.y0 : roi.y0 + roi.height, roi.x0 : roi.x0 + roi.width]
        return Image.from_array(sub)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.pixels, other.pixels))
        )


@dataclass(frozen=True)
class Mask:
    """Odd-extent window of real-valued filter coefficients."""

    rows: int
    cols: int
    coefficients: np.ndarray  # shape (rows, cols), float64, read-only

    def __post_init__(self):
        _check_odd_extents(self.rows, self.cols, "mask")
        arr = np.asarray(self.coefficients, dtype=np.float64).reshape(self.rows, self.cols).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coefficients", arr)

    @classmethod
    def from_array(cls, arr) -> "Mask":
        arr = np.asarray(arr, dtype=np.float64)
        r, c = arr.shape
        return cls(rows=r, cols=c, coefficients=arr)


@dataclass(frozen=True)
class Domain:
    """Odd-extent window iteration space: a boolean map of active cells."""

    rows: int
    cols: int
    active: np.ndarray  # shape (rows, cols), bool, read-only

    def __post_init__(self):
        _check_odd_extents(self.rows, self.cols, "domain")
        arr = np.asarray(self.active, dtype=bool).reshape(self.rows, self.cols).copy()
        if not arr.any():
            raise ValueError("domain has no active cells")
        arr.flags.writeable = False
        object.__setattr__(self, "active", arr)

    @classmethod
    def full(cls, rows: int, cols: int) -> "Domain":
        return cls(rows=rows, cols=cols, active=np.ones((rows, cols), dtype=bool))


@dataclass(frozen=True)
class Roi:
    """Rectangular region of interest; must lie fully inside its parent image."""

    x0: int
    y0: int
    width: int
    height: int

    def validate_inside(self, parent_width: int, parent_height: int) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"roi extents must be positive, got {self.width}x{self.height}")
        if (
            self.x0 < 0
            or self.y0 < 0
            or self.x0 + self.width > parent_width
            or self.y0 + self.height > parent_height
        ):
            raise ValueError(
                f"roi {self} does not fit inside {parent_width}x{parent_height} image"
            )


def _check_odd_extents(rows: int, cols: int, what: str) -> None:
    if rows < 1 or cols < 1 or rows % 2 == 0 or cols % 2 == 0:
        raise ValueError(f"{what} extents must be odd and positive, got {rows}x{cols}")


# --- PGM I/O ---------------------------------------------------------------
#
# Header: magic ("P5" binary / "P2" ASCII), width, height, maxval <= 255;
# '#' comment lines are permitted between header tokens.  Writing always
# emits binary P5 with maxval 255.


def _header_tokens(data: bytes):
    """Yield (token, end_offset) for whitespace-separated header tokens,
    skipping '#' comments that run to end of line."""
    i = 0
    n = len(data)
    while i < n:
        c = data[i : i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            while i < n and data[i : i + 1] not in b"\r\n":
                i += 1
        else:
            j = i
            while j < n and data[j : j + 1] not in b" \t\r\n#":
                j += 1
            yield data[i:j], j
            i = j


def _parse_int_token(token: bytes, name: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise PgmError(f"invalid {name} token {token!r}") from None


def load_pgm(data: bytes) -> Image:
    """Parse a P5 (binary) or P2 (ASCII) PGM with maxval <= 255."""
    tokens = _header_tokens(data)

    def next_token(name: str):
        try:
            return next(tokens)
        except StopIteration:
            raise PgmError(f"missing {name} in header") from None

    magic, _ = next_token("magic")
    if magic not in (b"P5", b"P2"):
        raise PgmError(f"unsupported magic {magic!r}, expected P5 or P2")
    width = _parse_int_token(next_token("width")[0], "width")
    height = _parse_int_token(next_token("height")[0], "height")
    if width < 1 or height < 1:
        raise PgmError(f"non-positive image extents {width}x{height}")
    maxval_tok, end = next_token("maxval")
    maxval = _parse_int_token(maxval_tok, "maxval")
    if not 0 < maxval <= 255:
        raise PgmError(f"maxval {maxval} out of supported range 1..255")

    count = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        payload = data[end + 1 :]
        if len(payload) < count:
            raise PgmError(
                f"truncated pixel data: expected {count} bytes, got {len(payload)}"
            )
        arr = np.frombuffer(payload[:count], dtype=np.uint8)
    else:
        values = []
        for token, _ in tokens:
            values.append(_parse_int_token(token, "pixel"))
            if len(values) == count:
                break
        if len(values) < count:
            raise PgmError(
                f"truncated pixel data: expected {count} samples, got {len(values)}"
            )
        arr = np.array(values, dtype=np.int64)
    if arr.max(initial=0) > maxval:
        raise PgmError(f"pixel value {int(arr.max())} exceeds maxval {maxval}")
    return Image(width=width, height=height, pixels=arr.astype(np.uint8))


def store_pgm(img: Image) -> bytes:
    """Serialize as binary P5 with maxval 255; load_pgm(store_pgm(x)) == x."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()
