"""Target stochastic processes, sensor layouts and snapshot data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import ndtri

from .io import read_arrays, write_arrays

FIELDS = ("k", "u", "f", "b")


class CholeskyError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """Squared-exponential kernel ``variance * exp(-(x - x')^2 / (2 length^2))``.

    ``variance == 0`` is accepted and denotes a deterministic process.
    """

    variance: float = 1.0
    length: float = 1.0

    def __post_init__(self):
        if self.variance < 0 or not math.isfinite(self.variance):
            raise ValueError("kernel variance must be finite and >= 0")
        if self.length <= 0 or not math.isfinite(self.length):
            raise ValueError("correlation length must be finite and > 0")

    @classmethod
    def from_rate(cls, variance: float, rate: float) -> "KernelSpec":
        """Kernel written as ``variance * exp(-rate (x - x')^2)``."""
        return cls(variance, math.sqrt(1.0 / (2.0 * rate)))

    def __call__(self, x, y):
        d = np.subtract.outer(np.asarray(x, float), np.asarray(y, float))
        return self.variance * np.exp(-(d * d) / (2.0 * self.length**2))


@dataclass(frozen=True)
class MeanFn:
    """``constant + sin_amplitude * sin(sin_frequency * (x + sin_offset))``."""

    constant: float = 0.0
    sin_amplitude: float = 0.0
    sin_frequency: float = 0.0
    sin_offset: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, float)
        out = np.full(x.shape, self.constant)
        if self.sin_amplitude:
            out = out + self.sin_amplitude * np.sin(self.sin_frequency * (x + self.sin_offset))
        return out


TRANSFORMS = ("identity", "exp", "boundary_factor")


@dataclass(frozen=True)
class ProcessSpec:
    """A Gaussian process pushed through a pointwise transform.

    ``identity``: g(x); ``exp``: exp(g(x)), strictly positive (the mean function
    plays the role of the deterministic shift inside the exponential);
    ``boundary_factor``: (x^2 - 1) g(x), pinned to zero at x = +-1.
    """

    kernel: KernelSpec = field(default_factory=KernelSpec)
    mean: MeanFn = field(default_factory=MeanFn)
    transform: str = "identity"

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")

    def apply_transform(self, x, g):
        if self.transform == "exp":
            return np.exp(g)
        if self.transform == "boundary_factor":
            x = np.asarray(x, float)
            return (x * x - 1.0) * g
        return g


def kernel_matrix(points, kernel: KernelSpec) -> np.ndarray:
    points = np.asarray(points, float)
    if not np.isfinite(points).all():
        raise ValueError("kernel points must be finite")
    return kernel(points, points)


JITTER_START = 1e-12
JITTER_MAX = 1e-8


@lru_cache(maxsize=32)
def _cholesky_cached(points: tuple, variance: float, length: float) -> np.ndarray:
    kernel = KernelSpec(variance, length)
    K = kernel_matrix(np.array(points), kernel)
    jitter = JITTER_START * variance
    eye = np.eye(len(points))
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * eye)
            L.setflags(write=False)
            return L
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX * variance:
                cond = np.linalg.cond(K)
                raise CholeskyError(
                    f"kernel matrix not factorizable with jitter {jitter:.1e} (cond {cond:.3e})"
                ) from None
            jitter *= 2.0


def cholesky_factor(points, kernel: KernelSpec) -> np.ndarray:
    """Lower Cholesky factor of the kernel matrix, with diagonal jitter doubled
    from 1e-12 to 1e-8 times the variance on failure."""
    pts = tuple(float(p) for p in np.asarray(points, float).ravel())
    return _cholesky_cached(pts, float(kernel.variance), float(kernel.length))


def sample_gp(points, spec: ProcessSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` sample paths on ``points``; returns an (n, len(points)) array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    points = np.asarray(points, float)
    mean = spec.mean(points)
    if spec.kernel.variance == 0.0:
        g = np.broadcast_to(mean, (n, points.size)).copy()
    else:
        L = cholesky_factor(points, spec.kernel)
        z = rng.standard_normal((n, points.size))
        g = mean + z @ L.T
    return spec.apply_transform(points, g)


# -------------------------------------------------------------------- sensors


@dataclass(frozen=True)
class SensorLayout:
    k: tuple[float, ...] = ()
    u: tuple[float, ...] = ()
    f: tuple[float, ...] = ()
    b: tuple[float, ...] = ()
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        lo, hi = self.domain
        for name in FIELDS:
            pos = tuple(float(p) for p in getattr(self, name))
            object.__setattr__(self, name, pos)
            if list(pos) != sorted(pos):
                raise ValueError(f"{name}-sensor positions must be sorted")
            if any(p < lo or p > hi for p in pos):
                raise ValueError(f"{name}-sensor outside domain {self.domain}")
        if any(p not in (lo, hi) for p in self.b):
            raise ValueError("boundary sensors must sit on the domain endpoints")

    def positions(self, name: str) -> tuple[float, ...]:
        return getattr(self, name)

    def counts(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in FIELDS}

    @property
    def width(self) -> int:
        return sum(self.counts().values())

    def blocks(self) -> list[tuple[str, int, int]]:
        """(field, start, stop) column ranges in (K, U, F, B) order, empty fields omitted."""
        out, start = [], 0
        for name in FIELDS:
            n = len(getattr(self, name))
            if n:
                out.append((name, start, start + n))
                start += n
        return out

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in FIELDS}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SensorLayout":
        return cls(**{name: tuple(d.get(name, ())) for name in FIELDS})


def _spread(n: int, lo: float, hi: float, single: float) -> tuple[float, ...]:
    if n < 0:
        raise ValueError("sensor counts must be >= 0")
    if n == 0:
        return ()
    if n == 1:
        return (single,)
    return tuple(float(v) for v in np.linspace(lo, hi, n))


def equidistant_layout(
    n_k: int = 0,
    n_u: int = 0,
    n_f: int = 0,
    n_b: int = 0,
    domain: tuple[float, float] = (-1.0, 1.0),
    single: float | None = None,
) -> SensorLayout:
    """Evenly spaced sensors including both endpoints; one sensor sits at ``single``
    (default: the domain midpoint). Boundary sensors go to the endpoints."""
    lo, hi = domain
    mid = 0.5 * (lo + hi) if single is None else single
    if n_b > 2:
        raise ValueError("at most two boundary sensors in one dimension")
    b = {0: (), 1: (lo,), 2: (lo, hi)}[n_b]
    return SensorLayout(
        k=_spread(n_k, lo, hi, mid),
        u=_spread(n_u, lo, hi, mid),
        f=_spread(n_f, lo, hi, mid),
        b=b,
        domain=domain,
    )


def read_sensors(paths: np.ndarray, grid: np.ndarray, positions: Sequence[float]) -> np.ndarray:
    """Values of grid paths (N, m) at sensor positions: exact when a sensor sits
    on a grid point, cubic-spline interpolated otherwise."""
    paths = np.atleast_2d(paths)
    grid = np.asarray(grid, float)
    pos = np.asarray(positions, float)
    out = np.empty((paths.shape[0], pos.size))
    idx = np.searchsorted(grid, pos)
    off = []
    for j, (p, i) in enumerate(zip(pos, idx)):
        hit = [c for c in (i - 1, i) if 0 <= c < grid.size and abs(grid[c] - p) <= 1e-12]
        if hit:
            out[:, j] = paths[:, hit[0]]
        else:
            off.append(j)
    if off:
        spline = CubicSpline(grid, paths, axis=1)
        out[:, off] = spline(pos[off])
    return out


@dataclass
class SnapshotGroup:
    """N simultaneous sensor reads, one row per random event, columns (K, U, F, B)."""

    layout: SensorLayout
    data: np.ndarray
    index: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, float))
        if self.data.shape[1] != self.layout.width:
            raise ValueError(
                f"row width {self.data.shape[1]} does not match layout width {self.layout.width}"
            )
        if not np.isfinite(self.data).all():
            raise ValueError("snapshot data must be finite")

    def __len__(self) -> int:
        return self.data.shape[0]

    def block(self, name: str) -> np.ndarray:
        for f, a, b in self.layout.blocks():
            if f == name:
                return self.data[:, a:b]
        return self.data[:, :0]

    def split(self, n_first: int) -> tuple["SnapshotGroup", "SnapshotGroup"]:
        return (
            SnapshotGroup(self.layout, self.data[:n_first], self.index, dict(self.meta)),
            SnapshotGroup(self.layout, self.data[n_first:], self.index, dict(self.meta)),
        )


def collect_snapshots(
    fields: Mapping[str, np.ndarray],
    layout: SensorLayout,
    grid: np.ndarray | None = None,
    index: int = 0,
    meta: Mapping | None = None,
) -> SnapshotGroup:
    """Assemble snapshot rows in (K, U, F, B) order.

    With ``grid`` given, ``fields`` hold full paths (N, m) and are read at the
    sensors; otherwise each field already holds its sensor reads. Row ``j`` of
    every field must belong to the same random event.
    """
    blocks, n_rows = [], None
    for name, _, _ in layout.blocks():
        if name not in fields:
            raise ValueError(f"layout has {name}-sensors but no {name} data was given")
        arr = np.atleast_2d(np.asarray(fields[name], float))
        if grid is not None:
            arr = read_sensors(arr, grid, layout.positions(name))
        elif arr.shape[1] != len(layout.positions(name)):
            raise ValueError(f"{name}: {arr.shape[1]} columns for {len(layout.positions(name))} sensors")
        if n_rows is not None and arr.shape[0] != n_rows:
            raise ValueError(f"{name}: {arr.shape[0]} rows, expected {n_rows}")
        n_rows = arr.shape[0]
        blocks.append(arr)
    data = np.concatenate(blocks, axis=1) if blocks else np.zeros((0, 0))
    return SnapshotGroup(layout, data, index, dict(meta or {}))


def save_snapshots(path, group: SnapshotGroup) -> Path:
    meta = {
        "kind": "snapshots",
        "group_index": group.index,
        "positions": group.layout.to_dict(),
        "n_rows": len(group),
        "info": group.meta,
    }
    return write_arrays(path, meta, {"data": group.data})


def load_snapshots(path) -> SnapshotGroup:
    meta, arrays = read_arrays(path)
    if meta.get("kind") != "snapshots":
        raise ValueError(f"{path} is not a snapshot file")
    layout = SensorLayout.from_dict(meta["positions"])
    return SnapshotGroup(layout, arrays["data"], meta["group_index"], meta.get("info", {}))


def export_snapshots_csv(path, group: SnapshotGroup) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = [f"{name}@{x!r}" for name, _, _ in group.layout.blocks() for x in group.layout.positions(name)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in group.data:
            w.writerow([repr(float(v)) for v in row])
    return path


# ---------------------------------------------------------------------- Halton


def _first_primes(n: int) -> list[int]:
    primes: list[int] = []
    c = 2
    while len(primes) < n:
        if all(c % p for p in primes if p * p <= c):
            primes.append(c)
        c += 1
    return primes


PRIMES = tuple(_first_primes(50))


def radical_inverse(index, base: int) -> np.ndarray:
    i = np.array(index, dtype=np.int64, copy=True)
    out = np.zeros(i.shape)
    scale = 1.0 / base
    while np.any(i > 0):
        out += (i % base) * scale
        i //= base
        scale /= base
    return out


def halton_points(start: int, count: int, dim: int) -> np.ndarray:
    """Halton points with indices start, ..., start + count - 1 (start >= 1)."""
    if start < 1:
        raise ValueError("Halton indices start at 1")
    if not 1 <= dim <= len(PRIMES):
        raise ValueError(f"dim must be in [1, {len(PRIMES)}]")
    idx = np.arange(start, start + count, dtype=np.int64)
    return np.stack([radical_inverse(idx, PRIMES[d]) for d in range(dim)], axis=1)


def halton(index: int, dim: int) -> np.ndarray:
    return halton_points(index, 1, dim)[0]


def halton_gaussian(index: int, dim: int) -> np.ndarray:
    """Halton point mapped componentwise through the standard normal inverse CDF."""
    return ndtri(halton(index, dim))


def halton_gaussian_points(start: int, count: int, dim: int) -> np.ndarray:
    return ndtri(halton_points(start, count, dim))
