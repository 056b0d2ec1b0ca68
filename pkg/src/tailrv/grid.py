"""Grids, step paths and the ℝᵈ norms they are measured with.

A path is stored as one ℝᵈ value per grid cell.  Cells are half-open
boxes ``[t, t + step)`` whose left corner ``t`` is the grid point, so the
path is right-continuous by construction.  Grid points are ordered
lexicographically (first time axis slowest), matching ``itertools.product``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, IncompatibleGridsError, InvalidWindowError

NORMS = ("sup", "euclidean", "l1")


def apply_norm(x, kind: str = "sup") -> np.ndarray:
    """Norm of ℝᵈ vectors along the last axis."""
    x = np.asarray(x, dtype=float)
    if kind == "sup":
        return np.max(np.abs(x), axis=-1)
    if kind == "euclidean":
        return np.sqrt(np.sum(x * x, axis=-1))
    if kind == "l1":
        return np.sum(np.abs(x), axis=-1)
    raise ValueError(f"unknown norm {kind!r}; expected one of {NORMS}")


def _as_tuple(v, length: int, name: str) -> tuple:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1 and length > 1:
        arr = np.repeat(arr, length)
    if arr.shape != (length,):
        raise ValueError(f"{name} must have {length} entries, got {arr.tolist()}")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class GridSpec:
    """Hypercube window ``[lower, upper)`` split into ``resolution`` cells per axis."""

    dim_t: int
    dim_x: int
    lower: tuple
    upper: tuple
    resolution: tuple

    def __post_init__(self):
        if self.dim_t < 1 or self.dim_x < 1:
            raise ValueError("dim_t and dim_x must be positive")
        object.__setattr__(self, "lower", _as_tuple(self.lower, self.dim_t, "lower"))
        object.__setattr__(self, "upper", _as_tuple(self.upper, self.dim_t, "upper"))
        res = np.atleast_1d(np.asarray(self.resolution))
        if res.size == 1 and self.dim_t > 1:
            res = np.repeat(res, self.dim_t)
        if res.shape != (self.dim_t,) or np.any(res < 1):
            raise ValueError("resolution needs one positive count per time axis")
        object.__setattr__(self, "resolution", tuple(int(r) for r in res))
        if any(b - a <= 0 for a, b in zip(self.lower, self.upper)):
            raise InvalidWindowError(f"degenerate window {self.lower} .. {self.upper}")

    @classmethod
    def line(cls, n: int, lower: float = 0.0, upper: float = 1.0, dim_x: int = 1) -> "GridSpec":
        return cls(1, dim_x, (lower,), (upper,), (n,))

    @property
    def n_points(self) -> int:
        return math.prod(self.resolution)

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def step(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.step))

    def axis(self, i: int) -> np.ndarray:
        return self.lower[i] + np.arange(self.resolution[i]) * self.step[i]

    @property
    def points(self) -> np.ndarray:
        """Grid points, shape ``(n_points, dim_t)`` in lexicographic order."""
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.dim_t)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def index_of(self, t) -> int:
        """Flat index of the cell containing ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.shape != (self.dim_t,):
            raise ValueError(f"time point must have {self.dim_t} coordinates")
        rel = (t - np.array(self.lower)) / self.step
        idx = np.floor(rel + 1e-9).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.resolution)):
            raise InvalidWindowError(f"time point {t.tolist()} outside the grid window")
        return int(np.ravel_multi_index(tuple(idx), self.resolution))

    def site(self, h) -> int:
        """Accept either a flat index (int) or a time point."""
        if isinstance(h, (int, np.integer)):
            if not 0 <= h < self.n_points:
                raise IndexError(f"site index {h} out of range")
            return int(h)
        return self.index_of(h)

    def window_mask(self, K=None) -> np.ndarray:
        """Boolean mask of grid points inside the closed box ``K = (lo, hi)``."""
        if K is None:
            return np.ones(self.n_points, dtype=bool)
        lo, hi = check_window(K, self.dim_t)
        pts = self.points
        tol = 1e-9 * self.step
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)

    def to_dict(self) -> dict:
        return {
            "dim_t": self.dim_t,
            "dim_x": self.dim_x,
            "lower": list(self.lower),
            "upper": list(self.upper),
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(int(d["dim_t"]), int(d.get("dim_x", 1)), tuple(d["lower"]),
                   tuple(d["upper"]), tuple(d["resolution"]))


def check_window(K, dim_t: int):
    """Validate a sub-window ``(lo, hi)``; returns float arrays."""
    try:
        lo, hi = K
    except (TypeError, ValueError):
        raise InvalidWindowError(f"window must be a (lo, hi) pair, got {K!r}") from None
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.size == 1:
        lo = np.repeat(lo, dim_t)
    if hi.size == 1:
        hi = np.repeat(hi, dim_t)
    if lo.shape != (dim_t,) or hi.shape != (dim_t,):
        raise InvalidWindowError("window corners must match the time dimension")
    if np.any(lo >= hi):
        raise InvalidWindowError(f"malformed window: lower {lo.tolist()} not below upper {hi.tolist()}")
    return lo, hi


def resolve_mask(grid: GridSpec, K) -> np.ndarray:
    """Window spec -> mask.  Accepts None, a (lo, hi) pair, a site, or a mask."""
    if K is None:
        return grid.window_mask(None)
    if isinstance(K, np.ndarray) and K.dtype == bool:
        if K.shape != (grid.n_points,):
            raise InvalidWindowError("mask length does not match the grid")
        return K
    if isinstance(K, (int, np.integer)):
        m = np.zeros(grid.n_points, dtype=bool)
        m[grid.site(K)] = True
        return m
    return grid.window_mask(K)


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """Right-continuous step function on a grid, values shape ``(n_points, dim_x)``."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1 and self.grid.dim_x == 1:
            v = v[:, None]
        if v.shape != (self.grid.n_points, self.grid.dim_x):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.n_points}, {self.grid.dim_x})")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: GridSpec, value) -> "CadlagPath":
        value = np.broadcast_to(np.asarray(value, dtype=float), (grid.dim_x,))
        return cls(grid, np.tile(value, (grid.n_points, 1)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "CadlagPath":
        vals = [np.atleast_1d(fn(p if grid.dim_t > 1 else p[0])) for p in grid.points]
        return cls(grid, np.array(vals, dtype=float))

    def __call__(self, t) -> np.ndarray:
        return self.values[self.grid.index_of(t)]

    def norms(self, kind: str = "sup") -> np.ndarray:
        return apply_norm(self.values, kind)

    def _check(self, other: "CadlagPath"):
        if self.grid != other.grid:
            raise IncompatibleGridsError("paths live on different grids")

    def __mul__(self, c):
        return CadlagPath(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other):
        self._check(other)
        return CadlagPath(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return CadlagPath(self.grid, self.values - other.values)

    def __eq__(self, other):
        return (isinstance(other, CadlagPath) and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))

    # serialization -------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"grid": self.grid.to_dict(), "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CadlagPath":
        d = json.loads(text)
        return cls(GridSpec.from_dict(d["grid"]), np.array(d["values"], dtype=float))

    def to_csv(self) -> str:
        buf = io.StringIO()
        write_paths_csv(buf, self.grid, self.values[None])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CadlagPath":
        grid, batch, _ = read_paths_csv(io.StringIO(text))
        if batch.shape[0] != 1:
            raise ValueError("CSV holds more than one path")
        return cls(grid, batch[0])


def as_values(f, grid: GridSpec | None = None) -> np.ndarray:
    """Values array of a path, or pass a raw array through."""
    if isinstance(f, CadlagPath):
        return f.values
    v = np.asarray(f, dtype=float)
    if grid is not None and v.ndim >= 1 and v.shape[-1] != grid.dim_x and grid.dim_x == 1:
        v = v[..., None]
    return v


def shared_grid(f: CadlagPath, g: CadlagPath) -> GridSpec:
    if f.grid != g.grid:
        raise IncompatibleGridsError("paths live on different grids")
    return f.grid


def _fmt(x: float) -> str:
    return repr(float(x))


def write_paths_csv(stream, grid: GridSpec, batch: np.ndarray, sample_ids: bool = False,
                    meta: dict | None = None) -> None:
    """Write path values, one row per (sample, grid cell) in lexicographic order.

    ``meta`` entries are written first as ``# key=value`` comment lines.
    """
    batch = np.asarray(batch, dtype=float)
    if batch.ndim == 2:
        batch = batch[None]
    if meta:
        for k, v in meta.items():
            stream.write(f"# {k}={v}\n")
    w = csv.writer(stream, lineterminator="\n")
    header = ([f"t_{i + 1}" for i in range(grid.dim_t)] + [f"x_{i + 1}" for i in range(grid.dim_x)])
    if sample_ids:
        header = ["sample_id"] + header
    w.writerow(header)
    pts = grid.points
    for s, vals in enumerate(batch):
        for p, v in zip(pts, vals):
            row = [_fmt(a) for a in p] + [_fmt(a) for a in v]
            w.writerow(([str(s)] + row) if sample_ids else row)


def _infer_axis(vals: np.ndarray):
    u = np.unique(vals)
    if u.size < 2:
        raise ValueError("cannot infer grid step from a single point per axis; use the JSON envelope")
    step = np.diff(u)
    if not np.allclose(step, step[0], rtol=1e-9, atol=0):
        raise AlignmentError("time coordinates are not equally spaced")
    return float(u[0]), float(u[-1] + step.mean()), int(u.size)


def read_paths_csv(stream):
    """Inverse of :func:`write_paths_csv`; returns ``(grid, batch, meta)``."""
    meta = {}
    lines = []
    for line in stream:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k.strip()] = v.strip()
        elif line.strip():
            lines.append(line)
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    has_id = header[0] == "sample_id"
    cols = header[1:] if has_id else header
    l = sum(c.startswith("t_") for c in cols)
    d = sum(c.startswith("x_") for c in cols)
    if l == 0 or d == 0:
        raise ValueError(f"CSV header needs t_1.. and x_1.. columns, got {header}")
    data = np.array([[float(x) for x in (r[1:] if has_id else r)] for r in body])
    ids = np.array([int(r[0]) for r in body]) if has_id else np.zeros(len(body), dtype=int)
    n_samples = int(ids.max()) + 1 if len(ids) else 0
    times = data[ids == 0][:, :l]
    lower, upper, res = zip(*(_infer_axis(times[:, i]) for i in range(l)))
    grid = GridSpec(l, d, lower, upper, res)
    if len(times) != grid.n_points:
        raise ValueError("CSV rows do not cover a full grid")
    batch = data[:, l:].reshape(n_samples, grid.n_points, d)
    return grid, batch, meta


@dataclass(frozen=True)
class TimeChange:
    """Piecewise-linear increasing time change, identity outside its knots.

    ``knots`` holds one ``(sources, targets)`` pair of increasing arrays per axis.
    """

    knots: tuple

    def __post_init__(self):
        fixed = []
        for src, tgt in self.knots:
            src = np.asarray(src, dtype=float)
            tgt = np.asarray(tgt, dtype=float)
            if src.shape != tgt.shape or src.ndim != 1 or src.size < 1:
                raise ValueError("each axis needs matching 1-d source/target knots")
            if src.size > 1 and (np.any(np.diff(src) <= 0) or np.any(np.diff(tgt) <= 0)):
                raise ValueError("time change must be strictly increasing")
            fixed.append((src, tgt))
        object.__setattr__(self, "knots", tuple(fixed))

    @classmethod
    def identity(cls, dim_t: int = 1) -> "TimeChange":
        return cls(tuple((np.array([0.0]), np.array([0.0])) for _ in range(dim_t)))

    @property
    def slope_norm(self) -> float:
        """Sum over axes of sup |log slope|; the identity extension has slope 1."""
        total = 0.0
        for src, tgt in self.knots:
            if src.size < 2:
                continue
            total += float(np.max(np.abs(np.log(np.diff(tgt) / np.diff(src)))))
        return total

    def _axis(self, i: int, x):
        src, tgt = self.knots[i]
        y = np.interp(x, src, tgt)
        y = np.where(x < src[0], tgt[0] + (x - src[0]), y)
        return np.where(x > src[-1], tgt[-1] + (x - src[-1]), y)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if len(self.knots) == 1 and (t.ndim == 0 or t.shape[-1] != 1):
            return self._axis(0, t)
        return np.stack([self._axis(i, t[..., i]) for i in range(len(self.knots))], axis=-1)


def lex_indices(grid: GridSpec) -> Iterable[tuple]:
    return np.ndindex(*grid.resolution)


def grid_of_batch(batch: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Reshape ``(n, P, d)`` values to ``(n, n_1, ..., n_l, d)``."""
    return batch.reshape(batch.shape[:-2] + grid.resolution + (batch.shape[-1],))


def stack_paths(paths: Sequence[CadlagPath]) -> np.ndarray:
    return np.stack([p.values for p in paths])
