"""Finite-difference oracle for -(1/10) (k u')' = f on [-1, 1], u(+-1) = 0,
and Monte-Carlo reference statistics built on it."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import spectra_from_cov
from .processes import ProcessSpec, sample_gp

log = logging.getLogger(__name__)

DIFFUSION_SCALE = 0.1
MC_CHUNK = 1000


class SolverError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Grid1D:
    m: int = 201

    def __post_init__(self):
        if self.m < 3:
            raise ValueError("grid needs at least 3 points")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.m)

    @property
    def h(self) -> float:
        return 2.0 / (self.m - 1)


def solve_elliptic_fd(k: np.ndarray, f: np.ndarray, grid: Grid1D | None = None) -> np.ndarray:
    """Conservative second-order scheme with arithmetic-mean interface coefficients.

    ``k`` and ``f`` are grid values, either (m,) or a batch (N, m). Returns u
    with the same shape and exact zeros at both ends. The tridiagonal systems
    are solved together by a vectorized Thomas sweep.
    """
    k = np.asarray(k, float)
    f = np.asarray(f, float)
    single = k.ndim == 1
    k2, f2 = np.atleast_2d(k), np.atleast_2d(f)
    if k2.shape != f2.shape:
        raise ValueError(f"k and f shapes differ: {k.shape} vs {f.shape}")
    m = k2.shape[1]
    grid = grid or Grid1D(m)
    if grid.m != m:
        raise ValueError(f"grid has {grid.m} points, data has {m}")
    if not (k2 > 0).all():
        raise SolverError("diffusion coefficient must be strictly positive")

    kh = 0.5 * (k2[:, 1:] + k2[:, :-1])  # k at i+1/2, i = 0..m-2
    diag = kh[:, :-1] + kh[:, 1:]  # rows 1..m-2
    off = -kh[:, 1:-1]  # coupling between interior rows
    rhs = (grid.h**2 / DIFFUSION_SCALE) * f2[:, 1:-1]

    n = m - 2
    c = np.empty_like(diag)
    d = np.empty_like(rhs)
    with np.errstate(all="ignore"):
        piv = diag[:, 0]
        c[:, 0] = off[:, 0] / piv if n > 1 else 0.0
        d[:, 0] = rhs[:, 0] / piv
        for i in range(1, n):
            piv = diag[:, i] - off[:, i - 1] * c[:, i - 1]
            if i < n - 1:
                c[:, i] = off[:, i] / piv
            d[:, i] = (rhs[:, i] - off[:, i - 1] * d[:, i - 1]) / piv
        for i in range(n - 2, -1, -1):
            d[:, i] -= c[:, i] * d[:, i + 1]
    u = np.zeros_like(k2)
    u[:, 1:-1] = d
    if not np.isfinite(u).all():
        raise SolverError("singular or ill-conditioned system")
    return u[0] if single else u


def sample_sde(
    k_spec: ProcessSpec,
    f_spec: ProcessSpec,
    grid: Grid1D,
    n: int,
    rng_k: np.random.Generator,
    rng_f: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Independent k and f paths and the matching u, all (n, m) on ``grid``."""
    x = grid.points
    k = sample_gp(x, k_spec, n, rng_k)
    f = sample_gp(x, f_spec, n, rng_f)
    return {"k": k, "f": f, "u": solve_elliptic_fd(k, f, grid)}


def chunk_rngs(seed: int, chunk: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent k- and f-streams for one fixed-size chunk of paths."""
    mk = lambda stream: np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream, chunk)))
    )
    return mk(0), mk(1)


# ------------------------------------------------------------------ moments

CROSS_PAIRS = (("k", "u"), ("k", "f"))


@dataclass
class _Moments:
    """Mean, centered second moments and pointwise co-moments of k, f, u."""

    n: int
    mean: dict
    cov: dict  # full (m, m) co-moment matrix per field
    cross: dict  # pointwise co-moment per field pair

    @classmethod
    def of(cls, paths: dict) -> "_Moments":
        n = next(iter(paths.values())).shape[0]
        # shift by the first path: identical paths then give exactly zero moments
        shifted = {k: v - v[0] for k, v in paths.items()}
        smean = {k: d.mean(axis=0) for k, d in shifted.items()}
        mean = {k: paths[k][0] + smean[k] for k in paths}
        dev = {k: d - smean[k] for k, d in shifted.items()}
        cov = {k: d.T @ d for k, d in dev.items()}
        cross = {
            (a, b): (dev[a] * dev[b]).sum(0) for a, b in CROSS_PAIRS if a in dev and b in dev
        }
        return cls(n, mean, cov, cross)

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        w = self.n * other.n / n
        delta = {k: other.mean[k] - self.mean[k] for k in self.mean}
        mean = {k: self.mean[k] + delta[k] * (other.n / n) for k in self.mean}
        cov = {k: self.cov[k] + other.cov[k] + np.outer(delta[k], delta[k]) * w for k in self.cov}
        cross = {
            (a, b): self.cross[(a, b)] + other.cross[(a, b)] + delta[a] * delta[b] * w
            for (a, b) in self.cross
        }
        return _Moments(n, mean, cov, cross)


def _pairwise(items: list):
    while len(items) > 1:
        nxt = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


@dataclass
class FieldStats:
    mean: np.ndarray
    std: np.ndarray
    spectra: np.ndarray


@dataclass
class ReferenceStats:
    grid: np.ndarray
    fields: dict[str, FieldStats]
    n_paths: int
    correlation: dict[str, float] = field(default_factory=dict)
    skipped: int = 0

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        names = sorted(self.fields)
        stats_path = directory / "reference_stats.csv"
        with open(stats_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"{n}_{q}" for n in names for q in ("mean", "std")])
            for i, x in enumerate(self.grid):
                row = [repr(float(x))]
                for n in names:
                    row += [repr(float(self.fields[n].mean[i])), repr(float(self.fields[n].std[i]))]
                w.writerow(row)
        spec_path = directory / "reference_spectra.csv"
        with open(spec_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode"] + names)
            for i in range(len(self.grid)):
                w.writerow([i + 1] + [repr(float(self.fields[n].spectra[i])) for n in names])
        info_path = directory / "reference_info.csv"
        with open(info_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            w.writerow(["n_paths", self.n_paths])
            w.writerow(["skipped", self.skipped])
            for k in sorted(self.correlation):
                w.writerow([f"C_{k}", repr(float(self.correlation[k]))])
        return [stats_path, spec_path, info_path]

    @classmethod
    def load(cls, directory) -> "ReferenceStats":
        directory = Path(directory)
        with open(directory / "reference_stats.csv") as fh:
            rows = list(csv.reader(fh))
        head, body = rows[0], np.array(rows[1:], dtype=float)
        names = [h[: -len("_mean")] for h in head[1:] if h.endswith("_mean")]
        with open(directory / "reference_spectra.csv") as fh:
            srows = list(csv.reader(fh))
        shead, sbody = srows[0], np.array(srows[1:], dtype=float)
        fields = {}
        for n in names:
            fields[n] = FieldStats(
                body[:, head.index(f"{n}_mean")],
                body[:, head.index(f"{n}_std")],
                sbody[:, shead.index(n)],
            )
        info = {}
        with open(directory / "reference_info.csv") as fh:
            for key, value in list(csv.reader(fh))[1:]:
                info[key] = value
        corr = {k[2:]: float(v) for k, v in info.items() if k.startswith("C_")}
        return cls(body[:, 0], fields, int(info["n_paths"]), corr, int(info["skipped"]))


def mc_reference(
    k_spec: ProcessSpec,
    f_spec: ProcessSpec,
    n_paths: int,
    grid: Grid1D | None = None,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = MC_CHUNK,
) -> ReferenceStats:
    """Monte-Carlo statistics of k, f and u from ``n_paths`` oracle solves.

    Paths are drawn in fixed-size chunks with seed-indexed substreams and the
    chunk moments are merged by a fixed pairwise tree, so the result does not
    depend on ``workers``. Paths whose solve fails are skipped and counted.
    """
    if n_paths < 2:
        raise ValueError("at least 2 paths are needed for unbiased standard deviations")
    grid = grid or Grid1D()
    sizes = [chunk_size] * (n_paths // chunk_size)
    if n_paths % chunk_size:
        sizes.append(n_paths % chunk_size)

    def run(c: int):
        rng_k, rng_f = chunk_rngs(seed, c)
        paths = sample_sde_safe(k_spec, f_spec, grid, sizes[c], rng_k, rng_f)
        skipped = sizes[c] - paths["u"].shape[0]
        return (_Moments.of(paths) if paths["u"].shape[0] else None), skipped

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, range(len(sizes))))
    else:
        results = [run(c) for c in range(len(sizes))]
    skipped = sum(s for _, s in results)
    if skipped:
        log.warning("mc_reference: skipped %d of %d paths after solver failures", skipped, n_paths)
    mom = _pairwise([m for m, _ in results if m is not None])
    if mom.n < 2:
        raise ValueError("fewer than 2 successful paths")
    return _finish(mom, grid, skipped)


def process_reference(
    spec: ProcessSpec, n_paths: int, grid: Grid1D | None = None, seed: int = 0, name: str = "f"
) -> ReferenceStats:
    """Reference mean, std and spectra of a single process from ``n_paths`` draws."""
    if n_paths < 2:
        raise ValueError("at least 2 paths are needed for unbiased standard deviations")
    grid = grid or Grid1D()
    moms = []
    for c, start in enumerate(range(0, n_paths, MC_CHUNK)):
        rng, _ = chunk_rngs(seed, c)
        paths = sample_gp(grid.points, spec, min(MC_CHUNK, n_paths - start), rng)
        moms.append(_Moments.of({name: paths}))
    return _finish(_pairwise(moms), grid, 0)


def path_stats(paths: dict[str, np.ndarray], grid: Grid1D) -> ReferenceStats:
    """Mean, std, spectra and correlations of given grid paths (same estimators
    as the Monte-Carlo reference)."""
    if next(iter(paths.values())).shape[0] < 2:
        raise ValueError("at least 2 paths are needed for unbiased standard deviations")
    return _finish(_Moments.of(paths), grid, 0)


def _finish(mom: _Moments, grid: Grid1D, skipped: int) -> ReferenceStats:
    fields = {}
    for name in mom.mean:
        cov = mom.cov[name] / (mom.n - 1)
        fields[name] = FieldStats(
            mom.mean[name], np.sqrt(np.clip(np.diag(cov), 0.0, None)), spectra_from_cov(cov)
        )
    corr = {}
    for (a, b), co in mom.cross.items():
        va, vb = np.diag(mom.cov[a]), np.diag(mom.cov[b])
        ok = (va > 0) & (vb > 0)
        if b == "u":
            ok[[0, -1]] = False  # u is pinned at the boundary
        if ok.any():
            corr[f"{a}{b}"] = float(np.mean(np.abs(co[ok] / np.sqrt(va[ok] * vb[ok]))))
    return ReferenceStats(grid.points, fields, mom.n, corr, skipped)


def sample_sde_safe(k_spec, f_spec, grid, n, rng_k, rng_f) -> dict[str, np.ndarray]:
    """Like :func:`sample_sde` but drops paths whose solve fails instead of raising."""
    x = grid.points
    k = sample_gp(x, k_spec, n, rng_k)
    f = sample_gp(x, f_spec, n, rng_f)
    good = (k > 0).all(axis=1) & np.isfinite(k).all(axis=1) & np.isfinite(f).all(axis=1)
    u = np.zeros_like(k)
    if good.any():
        try:
            u[good] = solve_elliptic_fd(k[good], f[good], grid)
        except SolverError:
            for j in np.flatnonzero(good):
                try:
                    u[j] = solve_elliptic_fd(k[j], f[j], grid)
                except SolverError:
                    good[j] = False
    return {"k": k[good], "f": f[good], "u": u[good]}
