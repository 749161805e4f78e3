"""Uniform cell grids and nonnegative grid functions with compact support.

A :class:`GridFunction` stores one value per cell, read as the sample of a
smooth function at the cell midpoint. Two on-disk layouts are supported:

CSV (text)::

    # gagliardo-gridfunction v1
    n,2
    shape,4,5
    lo,-1.0,-1.0
    h,0.5
    values
    0.0
    ...            (prod(shape) lines, row-major / C order)

Binary, all fields little-endian::

    b"GGF1"                 magic
    uint32                  n
    uint64 * n              shape
    float64 * n             lo
    float64                 h
    float64 * prod(shape)   values, row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import Box, Domain, Interval

__all__ = ["GridFunction", "GridSpec", "load_grid_function", "sample"]

_MAGIC = b"GGF1"
_CSV_TAG = "# gagliardo-gridfunction v1"


@dataclass(frozen=True)
class GridSpec:
    lo: tuple[float, ...]
    h: float
    shape: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", tuple(float(v) for v in np.atleast_1d(self.lo)))
        object.__setattr__(self, "shape", tuple(int(s) for s in np.atleast_1d(self.shape)))
        if len(self.lo) != len(self.shape):
            raise ValueError("grid lo and shape differ in dimension")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if any(s < 1 for s in self.shape):
            raise ValueError(f"grid shape must be positive, got {self.shape}")
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def hi(self) -> tuple[float, ...]:
        return tuple(l + s * self.h for l, s in zip(self.lo, self.shape))

    def axes(self) -> list[np.ndarray]:
        return [l + (np.arange(s) + 0.5) * self.h for l, s in zip(self.lo, self.shape)]

    def centers(self) -> np.ndarray:
        """Cell midpoints, shape ``(size, n)`` in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def box(self) -> Domain:
        if self.n == 1:
            return Interval(self.lo[0], self.hi[0])
        return Box(self.lo, self.hi)

    @classmethod
    def covering(cls, lo, hi, h: float, margin: int = 1) -> "GridSpec":
        """Grid of spacing ``h`` whose edges start at ``lo - margin*h`` and reach past ``hi``."""
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        counts = np.ceil((hi - lo) / h - 1e-9).astype(int) + 2 * margin
        return cls(tuple(lo - margin * h), h, tuple(counts))


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size == self.grid.size:
                v = v.reshape(self.grid.shape)
            else:
                raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            bad = np.argwhere(~np.isfinite(v))[0]
            raise ValueError(f"non-finite value at cell {tuple(int(i) for i in bad)}")
        if np.any(v < 0):
            bad = np.argwhere(v < 0)[0]
            raise ValueError(
                f"negative value {v[tuple(bad)]!r} at cell {tuple(int(i) for i in bad)}"
            )
        for axis in range(v.ndim):
            edge = np.take(v, [0, v.shape[axis] - 1], axis=axis)
            if np.any(edge != 0):
                raise ValueError(
                    f"values must vanish on the boundary cells of the grid (axis {axis})"
                )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def support(self) -> np.ndarray:
        """Boolean mask (flattened) of cells with a positive value."""
        return self.flat() > 0

    def shift(self, cells) -> "GridFunction":
        """Translate by a whole number of cells per axis."""
        off = np.atleast_1d(np.asarray(cells, dtype=int))
        if off.shape != (self.n,):
            raise ValueError("shift needs one integer per axis")
        lo = tuple(l + k * self.h for l, k in zip(self.grid.lo, off))
        return GridFunction(GridSpec(lo, self.h, self.grid.shape), self.values)

    def padded(self, lo_cells, hi_cells) -> "GridFunction":
        lo_c = np.broadcast_to(np.asarray(lo_cells, dtype=int), (self.n,))
        hi_c = np.broadcast_to(np.asarray(hi_cells, dtype=int), (self.n,))
        v = np.pad(self.values, list(zip(lo_c, hi_c)))
        lo = tuple(l - k * self.h for l, k in zip(self.grid.lo, lo_c))
        return GridFunction(GridSpec(lo, self.h, v.shape), v)

    def coarsen(self, method: str = "interp") -> "GridFunction":
        """Restrict onto a grid of spacing 2h whose cells are 2^n fine blocks.

        ``interp`` evaluates the four-point cubic interpolant at each coarse
        midpoint along every axis (values clipped at 0), so coarse values are
        again midpoint samples; ``mean`` takes block averages. The low side is
        padded by two zero cells and the high side by at least two, so the
        coarse function still vanishes on its boundary cells.
        """
        if method not in ("interp", "mean"):
            raise ValueError(f"unknown coarsening method {method!r}")
        pads_hi = [2 + (s + 4) % 2 for s in self.grid.shape]
        g = self.padded(2, pads_hi)
        v = g.values
        for axis in range(self.n):
            if method == "mean":
                shp = list(v.shape)
                shp[axis : axis + 1] = [shp[axis] // 2, 2]
                v = v.reshape(shp).mean(axis=axis + 1)
                continue
            w = np.moveaxis(v, axis, 0)
            ext = np.concatenate([np.zeros_like(w[:1]), w, np.zeros_like(w[:1])])
            # coarse cell k covers fine cells 2k, 2k+1 (indices 2k+1, 2k+2 in ext)
            a, b, c, d = ext[0:-3:2], ext[1:-2:2], ext[2:-1:2], ext[3::2]
            mid = (9.0 * (b + c) - (a + d)) / 16.0
            v = np.moveaxis(np.maximum(mid, 0.0), 0, axis)
        return GridFunction(GridSpec(g.grid.lo, 2 * self.h, v.shape), v)

    # ------------------------------------------------------------------ io

    def to_csv(self, path) -> None:
        lines = [
            _CSV_TAG,
            f"n,{self.n}",
            "shape," + ",".join(str(s) for s in self.grid.shape),
            "lo," + ",".join(repr(v) for v in self.grid.lo),
            f"h,{self.h!r}",
            "values",
        ]
        lines.extend(repr(float(v)) for v in self.flat())
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        text = Path(path).read_text().splitlines()

        def field_row(lineno: int, name: str) -> list[str]:
            if lineno >= len(text):
                raise ValueError(f"{path}:{lineno + 1}: unexpected end of file, expected '{name}'")
            parts = text[lineno].strip().split(",")
            if parts[0] != name:
                raise ValueError(f"{path}:{lineno + 1}: expected '{name}', found {text[lineno]!r}")
            return parts[1:]

        if not text or text[0].strip() != _CSV_TAG:
            raise ValueError(f"{path}:1: missing header {_CSV_TAG!r}")
        try:
            n = int(field_row(1, "n")[0])
            shape = tuple(int(s) for s in field_row(2, "shape"))
            lo = tuple(float(s) for s in field_row(3, "lo"))
            h = float(field_row(4, "h")[0])
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ValueError) and str(exc).startswith(str(path)):
                raise
            raise ValueError(f"{path}: malformed grid header: {exc}") from None
        field_row(5, "values")
        if len(shape) != n or len(lo) != n:
            raise ValueError(f"{path}: header dimension mismatch (n={n})")
        body = text[6:]
        size = int(np.prod(shape))
        vals = []
        for k, line in enumerate(body):
            if not line.strip():
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{k + 7}: cannot parse value {line!r}") from None
        if len(vals) != size:
            raise ValueError(f"{path}: expected {size} values, found {len(vals)}")
        return cls(GridSpec(lo, h, shape), np.asarray(vals).reshape(shape))

    def to_binary(self, path) -> None:
        n = self.n
        blob = bytearray(_MAGIC)
        blob += struct.pack("<I", n)
        blob += struct.pack(f"<{n}Q", *self.grid.shape)
        blob += struct.pack(f"<{n}d", *self.grid.lo)
        blob += struct.pack("<d", self.h)
        blob += self.flat().astype("<f8").tobytes()
        Path(path).write_bytes(bytes(blob))

    @classmethod
    def from_binary(cls, path) -> "GridFunction":
        data = Path(path).read_bytes()
        if data[:4] != _MAGIC:
            raise ValueError(f"{path}: bad magic {data[:4]!r}")
        off = 4
        (n,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{n}Q", data, off)
        off += 8 * n
        lo = struct.unpack_from(f"<{n}d", data, off)
        off += 8 * n
        (h,) = struct.unpack_from("<d", data, off)
        off += 8
        size = int(np.prod(shape))
        if len(data) - off != 8 * size:
            raise ValueError(f"{path}: expected {size} values, found {(len(data) - off) // 8}")
        vals = np.frombuffer(data, dtype="<f8", count=size, offset=off).astype(float)
        return cls(GridSpec(lo, h, shape), vals.reshape(shape))


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"grid function file not found: {path}")
    if path.read_bytes()[:4] == _MAGIC:
        return GridFunction.from_binary(path)
    return GridFunction.from_csv(path)


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> GridFunction:
    """Sample ``fn`` (taking points of shape (m, n)) at the cell midpoints."""
    vals = np.asarray(fn(grid.centers()), dtype=float).reshape(grid.shape)
    return GridFunction(grid, vals)
