"""Binary raster grids: file I/O, connected components and mask cleanup.

Coordinates are (x, y) with the origin at the top-left corner; the backing
array is indexed [y, x]. Foreground connectivity is 8-connected, background
(hole) connectivity is 4-connected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import RasterFormatError

STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class PixelGrid:
    """A rectangular binary raster.

    cells is a (height, width) boolean array; True marks foreground.
    """

    cells: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cells, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise RasterFormatError(f"grid must be 2-D and non-empty, got shape {arr.shape}")
        object.__setattr__(self, "cells", arr)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def foreground_count(self) -> int:
        return int(self.cells.sum())

    def __eq__(self, other):
        if not isinstance(other, PixelGrid):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.cells.shape, self.cells.tobytes()))


@dataclass(frozen=True)
class ComponentLabeling:
    """Connected-component labels (0 = background) plus per-label areas."""

    labels: np.ndarray
    component_sizes: dict[int, int] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.component_sizes)


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        return _parse_pgm(fh.read(), str(path))


def _parse_pgm(data: bytes, path: str = "<bytes>") -> np.ndarray:
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise RasterFormatError(f"{path}: not a P2/P5 PGM file")
    magic = data[:2].decode("ascii")

    # Tokenize the header, skipping '#' comments. For P5 the pixel payload
    # starts one whitespace byte after the maxval token.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in (0x0A, 0x0D):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise RasterFormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise RasterFormatError(f"{path}: bad PGM header") from exc
    if width < 1 or height < 1:
        raise RasterFormatError(f"{path}: zero-dimension image")
    if not 0 < maxval < 256:
        raise RasterFormatError(f"{path}: unsupported maxval {maxval}")

    if magic == "P5":
        pos += 1  # single whitespace after maxval
        payload = data[pos : pos + width * height]
        if len(payload) != width * height:
            raise RasterFormatError(f"{path}: truncated P5 payload")
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = data[pos:].split(b"#")[0]  # plain PGM rarely carries trailing comments
        try:
            values = [int(v) for v in body.split()]
        except ValueError as exc:
            raise RasterFormatError(f"{path}: bad P2 payload") from exc
        if len(values) < width * height:
            raise RasterFormatError(f"{path}: truncated P2 payload")
        values = values[: width * height]
        if any(not 0 <= v <= maxval for v in values):
            raise RasterFormatError(f"{path}: P2 value out of range")
        pixels = np.array(values, dtype=np.uint8)
    return pixels.reshape(height, width)


def _pgm_bytes(gray: np.ndarray, plain: bool = False) -> bytes:
    height, width = gray.shape
    header = f"{'P2' if plain else 'P5'}\n{width} {height}\n255\n".encode("ascii")
    if plain:
        lines = [" ".join(str(v) for v in row) for row in gray.tolist()]
        return header + ("\n".join(lines) + "\n").encode("ascii")
    return header + gray.astype(np.uint8).tobytes()


def _write_pgm(path: str, gray: np.ndarray, plain: bool = False) -> None:
    with open(path, "wb") as fh:
        fh.write(_pgm_bytes(gray, plain))


def read_gray(path: str) -> np.ndarray:
    """Read an 8-bit grayscale image (PNG or PGM) as a (height, width) uint8 array."""
    if not os.path.exists(path):
        raise IOError(f"no such file: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext in (".pgm", ".ppm"):
        return _read_pgm(path)
    try:
        with Image.open(path) as img:
            gray = np.asarray(img.convert("L"), dtype=np.uint8)
    except OSError:
        raise
    except Exception as exc:
        raise RasterFormatError(f"{path}: cannot decode raster") from exc
    if gray.ndim != 2 or gray.shape[0] < 1 or gray.shape[1] < 1:
        raise RasterFormatError(f"{path}: zero-dimension image")
    return gray


def load_mask(path: str, threshold: int = 128) -> PixelGrid:
    """Load a grayscale raster and binarize it: foreground iff gray >= threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    gray = read_gray(path)
    return PixelGrid(gray >= threshold)


def save_mask(grid: PixelGrid, path: str, plain_pgm: bool = False) -> None:
    """Write a mask as 0/255 grayscale; format chosen by extension (.png or .pgm)."""
    gray = np.where(grid.cells, 255, 0).astype(np.uint8)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        _write_pgm(path, gray, plain=plain_pgm)
    else:
        Image.fromarray(gray, mode="L").save(path, format="PNG")


def save_gray(gray: np.ndarray, path: str) -> None:
    """Write an 8-bit grayscale image; format chosen by extension (.png or .pgm)."""
    gray = np.asarray(gray, dtype=np.uint8)
    if os.path.splitext(path)[1].lower() == ".pgm":
        _write_pgm(path, gray)
    else:
        Image.fromarray(gray, mode="L").save(path, format="PNG")


def mask_to_bytes(grid: PixelGrid) -> bytes:
    """Encode a mask as binary PGM bytes (0/255), e.g. for wire transport."""
    return _pgm_bytes(np.where(grid.cells, 255, 0).astype(np.uint8))


def mask_from_bytes(data: bytes, threshold: int = 128) -> PixelGrid:
    """Decode PGM bytes and binarize: foreground iff gray >= threshold."""
    if not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    return PixelGrid(_parse_pgm(data) >= threshold)


def gray_to_bytes(gray: np.ndarray) -> bytes:
    """Encode an 8-bit grayscale image as binary PGM bytes."""
    return _pgm_bytes(np.asarray(gray, dtype=np.uint8))


def _canonical_relabel(raw: np.ndarray, n: int) -> np.ndarray:
    """Renumber labels 1..n in raster-scan order of each component's first pixel."""
    if n == 0:
        return raw
    flat = raw.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    # reversed so earlier indices win
    first[flat[nz[::-1]]] = nz[::-1]
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=raw.dtype)
    remap[1 + order] = np.arange(1, n + 1)
    return remap[raw]


def label_components(grid: PixelGrid, connectivity: int = 8) -> ComponentLabeling:
    """Label foreground components under 4- or 8-connectivity.

    Labels are canonical: component k is the k-th component encountered in a
    raster scan. Label 0 is background.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = STRUCT_8 if connectivity == 8 else STRUCT_4
    raw, n = ndimage.label(grid.cells, structure=structure)
    labels = _canonical_relabel(raw, n)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    return ComponentLabeling(labels=labels, component_sizes={k: int(sizes[k]) for k in range(1, n + 1)})


def clean_mask(grid: PixelGrid, min_area: int = 64, max_hole_area: int = 64) -> PixelGrid:
    """Remove small foreground components, then fill small enclosed holes.

    Foreground 8-components with area < min_area are deleted. Background
    4-components with area <= max_hole_area that do not touch the image
    border are filled. Everything else is unchanged.
    """
    if min_area < 0 or max_hole_area < 0:
        raise ValueError("min_area and max_hole_area must be >= 0")
    cells = grid.cells
    if min_area > 0:
        raw, n = ndimage.label(cells, structure=STRUCT_8)
        if n:
            sizes = np.bincount(raw.ravel(), minlength=n + 1)
            keep = sizes >= min_area
            keep[0] = False
            cells = keep[raw]

    if max_hole_area > 0:
        raw, n = ndimage.label(~cells, structure=STRUCT_4)
        if n:
            sizes = np.bincount(raw.ravel(), minlength=n + 1)
            border = np.zeros(n + 1, dtype=bool)
            for edge in (raw[0, :], raw[-1, :], raw[:, 0], raw[:, -1]):
                border[np.unique(edge)] = True
            fill = (sizes <= max_hole_area) & ~border
            fill[0] = False
            cells = cells | fill[raw]

    return PixelGrid(cells)
