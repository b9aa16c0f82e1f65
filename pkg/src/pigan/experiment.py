"""End-to-end experiment pipeline: synthesize data, train, evaluate, report.

Output directory layout::

    OUT/
      config.yaml  manifest.json
      data/group0.snap  data/group0.csv  [data/validation0.snap]
      data/reference/   reference_{stats,spectra,info}.csv   (Monte-Carlo oracle)
      data/training/    reference_{stats,spectra,info}.csv   (training paths)
      seed<S>/checkpoints/step<NNNNNNNN>.ckpt  seed<S>/latest.ckpt  seed<S>/loss_trace.csv
      metrics.csv  summary.csv  fig*.csv  [fig*.svg]
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, dump_config
from .elliptic import Grid1D, ReferenceStats, mc_reference, path_stats, process_reference, sample_sde
from .gan import (
    PathSampler,
    TrainState,
    Trainer,
    checkpoint_name,
    fake_snapshot,
    init_discriminators,
    init_generator_set,
    init_process_generator,
    init_rng,
    load_checkpoint,
    new_state,
    save_checkpoint,
    TRACE_COLUMNS,
)
from .metrics import correlation_coefficient, overfit_report, relative_error, spectra, w1_empirical
from .processes import (
    SnapshotGroup,
    collect_snapshots,
    export_snapshots_csv,
    halton_gaussian_points,
    load_snapshots,
    sample_gp,
    save_snapshots,
)

log = logging.getLogger(__name__)

LATEST = "latest.ckpt"
LATEST_EVERY = 1000


def _stream(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _merged_points(grid: np.ndarray, sensors) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid plus off-grid sensor positions, with column indices of both.

    Sensors within 1e-12 of a grid point reuse that point, so the kernel
    matrix never holds near-duplicate rows."""
    pos = np.asarray(sensors, float)
    near = np.abs(grid[None, :] - pos[:, None]).argmin(axis=1)
    on = np.abs(grid[near] - pos) <= 1e-12
    pts = np.union1d(grid, pos[~on])
    snapped = np.where(on, grid[near], pos)
    return pts, np.searchsorted(pts, grid), np.searchsorted(pts, snapped)


# ------------------------------------------------------------------ manifest


@dataclass
class RunManifest:
    experiment: str
    config_hash: str
    data_hash: str
    seeds: list[int]
    files: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    version: str = __version__

    def add(self, root: Path, *paths) -> None:
        for p in paths:
            rel = str(Path(p).relative_to(root))
            if rel not in self.files:
                self.files.append(rel)
        self.files.sort()

    def save(self, root: Path) -> Path:
        path = Path(root) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, root: Path) -> "RunManifest | None":
        path = Path(root) / "manifest.json"
        if not path.exists():
            return None
        return cls(**json.loads(path.read_text()))

    def missing(self, root: Path) -> list[str]:
        return [f for f in self.files if not (Path(root) / f).exists()]


class Experiment:
    def __init__(self, cfg: ExperimentConfig, out, workers: int = 1):
        self.cfg = cfg
        self.out = Path(out)
        self.workers = workers
        self.grid = Grid1D(cfg.data.grid_points)
        self.out.mkdir(parents=True, exist_ok=True)
        old = RunManifest.load(self.out)
        if old is not None and old.data_hash != cfg.data_digest():
            raise ConfigError(
                f"{self.out} holds data for a different configuration (data hash {old.data_hash[:12]}); "
                "use a fresh output directory"
            )
        self.manifest = old or RunManifest(cfg.name, cfg.digest(), cfg.data_digest(), list(cfg.seeds))
        self.manifest.config_hash = cfg.digest()
        self.manifest.seeds = sorted(set(self.manifest.seeds) | set(cfg.seeds))
        self.manifest.add(self.out, dump_config(cfg, self.out / "config.yaml"))
        self._save_manifest()

    def _save_manifest(self) -> None:
        self.manifest.save(self.out)

    @property
    def data_dir(self) -> Path:
        return self.out / "data"

    def seed_dir(self, seed: int) -> Path:
        return self.out / f"seed{seed}"

    # ------------------------------------------------------------ synthesis
    def synth(self) -> list[Path]:
        t0 = time.perf_counter()
        cfg, grid = self.cfg, self.grid
        d = cfg.data
        layouts = cfg.layouts()
        written: list[Path] = []
        specs = {name: p.build() for name, p in d.processes.items()}
        train_paths = None
        for t, (g, lay) in enumerate(zip(d.groups, layouts)):
            rng = _stream(cfg.data_seed, 100 + t)
            if d.kind == "process":
                pts, on_grid, at_sensor = _merged_points(grid.points, lay.f)
                paths = sample_gp(pts, specs["f"], g.snapshots, rng)
                group = collect_snapshots({"f": paths[:, at_sensor]}, lay, index=t)
                if t == 0:
                    train_paths = {"f": paths[:, on_grid]}
                if d.validation_snapshots:
                    vpaths = sample_gp(lay.f, specs["f"], d.validation_snapshots, _stream(cfg.data_seed, 200 + t))
                    val = collect_snapshots({"f": vpaths}, lay, index=t, meta={"role": "validation"})
                    written.append(save_snapshots(self.data_dir / f"validation{t}.snap", val))
            else:
                rk, rf = _stream(cfg.data_seed, 100 + t, 0), _stream(cfg.data_seed, 100 + t, 1)
                paths = sample_sde(specs["k"], specs["f"], grid, g.snapshots, rk, rf)
                fields = dict(paths)
                fields["b"] = paths["u"]
                group = collect_snapshots(
                    fields, lay, grid.points, index=t, meta={"u_source": "finite-difference oracle"}
                )
                if t == 0:
                    train_paths = paths
            group.meta["seed"] = cfg.data_seed
            written.append(save_snapshots(self.data_dir / f"group{t}.snap", group))
            written.append(export_snapshots_csv(self.data_dir / f"group{t}.csv", group))

        training = path_stats(train_paths, grid)
        written += training.save(self.data_dir / "training")
        n_ref = cfg.eval.reference_paths
        if d.kind == "process":
            ref = process_reference(specs["f"], n_ref, grid, seed=cfg.data_seed)
        else:
            ref = mc_reference(specs["k"], specs["f"], n_ref, grid, seed=cfg.data_seed, workers=self.workers)
        written += ref.save(self.data_dir / "reference")
        self.manifest.add(self.out, *written)
        self.manifest.timings["synth_seconds"] = round(time.perf_counter() - t0, 3)
        self._save_manifest()
        return written

    def load_groups(self) -> tuple[list[SnapshotGroup], list[SnapshotGroup | None]]:
        groups, vals = [], []
        for t, lay in enumerate(self.cfg.layouts()):
            path = self.data_dir / f"group{t}.snap"
            if not path.exists():
                raise ConfigError(f"missing dataset {path}; run 'synth' first")
            g = load_snapshots(path)
            if g.layout != lay:
                raise ConfigError(f"{path}: sensor layout does not match the configuration")
            groups.append(g)
            vpath = self.data_dir / f"validation{t}.snap"
            vals.append(load_snapshots(vpath) if vpath.exists() else None)
        return groups, vals

    # -------------------------------------------------------------- training
    def _fresh_state(self, seed: int) -> TrainState:
        cfg = self.cfg
        m = cfg.model
        rng = init_rng(seed)
        if cfg.data.kind == "process":
            gen = init_process_generator(m.noise_dim, rng, m.gen_width, m.gen_layers)
        else:
            gen = init_generator_set(m.noise_dim, rng, m.gen_width, m.gen_layers)
        discs = init_discriminators(cfg.layouts(), rng, cfg.disc_widths(), m.disc_layers)
        return new_state(gen, discs, cfg.train_config(seed))

    def train(self, resume: bool = False) -> None:
        groups, vals = self.load_groups()
        for seed in self.cfg.seeds:
            self.train_seed(seed, groups, vals, resume)

    def train_seed(self, seed: int, groups, vals, resume: bool = False) -> TrainState:
        tcfg = self.cfg.train_config(seed)
        sdir = self.seed_dir(seed)
        ckdir = sdir / "checkpoints"
        latest = sdir / LATEST
        if resume and latest.exists():
            state = load_checkpoint(latest)
            log.info("seed %d: resuming at step %d", seed, state.step)
        else:
            state = self._fresh_state(seed)
        trainer = Trainer(groups, state, tcfg, vals)
        info = {"experiment": self.cfg.name, "config_hash": self.cfg.digest()}
        t0 = time.perf_counter()
        start = state.step
        ckpts = set(tcfg.checkpoint_steps)

        def save(step_state: TrainState):
            if step_state.step in ckpts:
                p = save_checkpoint(ckdir / checkpoint_name(step_state.step), step_state, tcfg, info)
                self.manifest.add(self.out, p)
            if step_state.step % LATEST_EVERY == 0 or step_state.step == tcfg.n_steps:
                self.manifest.add(self.out, save_checkpoint(latest, step_state, tcfg, info))
                self._save_manifest()

        if state.step == 0:
            if tcfg.trace_every:
                trainer.trace()
            save(state)
        while state.step < tcfg.n_steps:
            trainer.advance()
            save(state)
        elapsed = time.perf_counter() - t0
        if state.traces:
            p = write_csv(sdir / "loss_trace.csv", list(TRACE_COLUMNS), state.traces)
            self.manifest.add(self.out, p)
        self.manifest.timings[f"train_seconds_seed{seed}"] = round(elapsed, 3)
        if state.step > start:
            self.manifest.timings[f"seconds_per_step_seed{seed}"] = round(elapsed / (state.step - start), 6)
        self._save_manifest()
        return state

    # ------------------------------------------------------------ evaluation
    def _reference(self, name: str) -> ReferenceStats:
        d = self.data_dir / name
        if not (d / "reference_stats.csv").exists():
            raise ConfigError(f"missing {name} statistics in {d}; run 'synth' first")
        return ReferenceStats.load(d)

    def checkpoints(self, seed: int) -> list[int]:
        ckdir = self.seed_dir(seed) / "checkpoints"
        steps = [s for s in self.cfg.checkpoint_steps() if (ckdir / checkpoint_name(s)).exists()]
        if not steps:
            raise ConfigError(f"no checkpoints found in {ckdir}; run 'train' first")
        return steps

    def selected(self, step: int) -> bool:
        n = self.cfg.train.n_steps
        return step > 0 and step > n - self.cfg.checkpoints.select_last

    def evaluate(self) -> list[Path]:
        t0 = time.perf_counter()
        cfg = self.cfg
        ref = self._reference("reference")
        training = self._reference("training")
        groups, vals = self.load_groups()
        noise = halton_gaussian_points(1, cfg.eval.n_paths, cfg.model.noise_dim)
        pde = cfg.data.kind == "pde"
        fields = ["k", "u", "f"] if pde else ["f"]
        grid = self.grid.points
        interior = slice(1, -1)

        metric_rows, spectra_rows, meanstd_rows, w1_rows, overfit_rows = [], [], [], [], []
        metric_names: list[str] | None = None
        for seed in cfg.seeds:
            for step in self.checkpoints(seed):
                state = load_checkpoint(self.seed_dir(seed) / "checkpoints" / checkpoint_name(step))
                gen = state.gen
                rng = _stream(seed, step, 11)
                m: dict[str, float] = {}
                heavy = pde or step == 0 or self.selected(step)
                if heavy:
                    paths = PathSampler(gen).paths(gen, grid, noise)
                    for name in fields:
                        p = paths[name]
                        mean, std = p.mean(0), p.std(0, ddof=1)
                        r = ref.fields[name]
                        sl = interior if name == "u" else slice(None)
                        m[f"{name}_mean_rel_err"] = relative_error(mean[sl], r.mean[sl])
                        m[f"{name}_std_rel_err"] = relative_error(std[sl], r.std[sl])
                        m[f"{name}_mean_max_abs_err"] = float(np.max(np.abs(mean[sl] - r.mean[sl])))
                        m[f"{name}_std_max_abs_err"] = float(np.max(np.abs(std[sl] - r.std[sl])))
                        eig = spectra(p)
                        m[f"{name}_top_eig"] = eig[0]
                        tr_eig = training.fields[name].spectra
                        for i in range(min(20, eig.size)):
                            spectra_rows.append((seed, step, name, i + 1, eig[i], tr_eig[i], r.spectra[i]))
                        for j, x in enumerate(grid):
                            meanstd_rows.append((seed, step, name, x, mean[j], std[j], r.mean[j], r.std[j]))
                    if pde:
                        m["C_kf"] = correlation_coefficient(paths["k"], paths["f"])
                        m["C_ku"] = correlation_coefficient(paths["k"][:, interior], paths["u"][:, interior])
                if not pde:
                    m.update(self._process_snapshot_metrics(gen, groups[0], vals[0], state, seed, step, rng, w1_rows, overfit_rows))
                if metric_names is None:
                    metric_names = sorted(m)
                metric_rows.append([cfg.name, seed, step] + [m.get(k) for k in metric_names])
        written = [
            write_csv(self.out / "metrics.csv", ["experiment", "seed", "step"] + metric_names, metric_rows)
        ]
        written.append(self._summary(metric_names, metric_rows))
        fig = cfg.figure or "fig"
        if pde:
            written.append(write_csv(
                self.out / f"{fig}_rel_error.csv",
                ["seed", "step"] + [c for c in metric_names if "_err" in c],
                [[r[1], r[2]] + [v for c, v in zip(metric_names, r[3:]) if "_err" in c] for r in metric_rows],
            ))
            written.append(write_csv(
                self.out / "table1_correlation.csv",
                ["seed", "step", "C_kf", "C_ku", "reference_C_kf", "reference_C_ku"],
                [[r[1], r[2], r[3 + metric_names.index("C_kf")], r[3 + metric_names.index("C_ku")], 0.0,
                  ref.correlation.get("ku")] for r in metric_rows],
            ))
            spec_name, ms_name = f"{fig}_spectra.csv", f"{fig}_mean_std.csv"
        else:
            written.append(write_csv(
                self.out / "fig4_w1_trace.csv", ["seed", "step", "batch", "w1_gen_train"], w1_rows
            ))
            spec_name, ms_name = "fig5_spectra.csv", "fig6_mean_std.csv"
            if overfit_rows:
                written.append(write_csv(
                    self.out / "fig7_overfit_w1.csv",
                    ["seed", "step", "batch", "w1_gen_train", "w1_gen_val", "baseline_mean", "baseline_std"],
                    overfit_rows,
                ))
        written.append(write_csv(
            self.out / spec_name,
            ["seed", "step", "field", "index", "generated", "training", "reference"], spectra_rows,
        ))
        written.append(write_csv(
            self.out / ms_name,
            ["seed", "step", "field", "x", "mean", "std", "reference_mean", "reference_std"], meanstd_rows,
        ))
        traces = []
        for seed in cfg.seeds:
            p = self.seed_dir(seed) / "loss_trace.csv"
            if p.exists():
                with open(p) as fh:
                    traces += [[seed] + row for row in list(csv.reader(fh))[1:]]
        if traces:
            written.append(write_csv(self.out / "fig7_loss_trace.csv", ["seed"] + list(TRACE_COLUMNS), traces))
        if cfg.eval.svg:
            written += self._plots()
        self.manifest.add(self.out, *written)
        self.manifest.timings["eval_seconds"] = round(time.perf_counter() - t0, 3)
        self._save_manifest()
        return written

    def _process_snapshot_metrics(self, gen, train, val, state, seed, step, rng, w1_rows, overfit_rows) -> dict:
        cfg = self.cfg
        n = min(cfg.eval.w1_samples, len(train))
        lay = train.layout
        m = cfg.model.noise_dim
        w1 = []
        for b in range(cfg.eval.w1_batches):
            fake = fake_snapshot(gen, lay, rng.standard_normal((n, m)))
            rows = train.data if len(train) == n else train.data[rng.choice(len(train), n, replace=False)]
            w = w1_empirical(fake, rows)
            w1.append(w)
            w1_rows.append((seed, step, b, w))
        out = {"w1_gen_train": float(np.mean(w1))}
        fake = fake_snapshot(gen, lay, halton_gaussian_points(1, cfg.eval.n_paths, m))
        out["sensor_mean_max_abs_diff"] = float(np.max(np.abs(fake.mean(0) - train.data.mean(0))))
        out["sensor_std_max_abs_diff"] = float(np.max(np.abs(fake.std(0, ddof=1) - train.data.std(0, ddof=1))))
        if cfg.eval.overfit and val is not None:
            spec = cfg.data.processes["f"].build()
            sampler = lambda k, r: sample_gp(lay.f, spec, k, r)
            trainer = Trainer([train], state, cfg.train_config(seed), [val])
            n = min(cfg.eval.w1_samples, len(val))
            gen_rows = fake_snapshot(gen, lay, rng.standard_normal((n, m)))
            row = overfit_report(
                train.data, val.data, gen_rows, sampler, rng, n=n,
                n_baseline=cfg.eval.overfit_baseline_groups,
                disc_loss=lambda rows: trainer.disc_loss(0, rows, _stream(seed, step, 13)),
            )
            overfit_rows.append((seed, step, 0, row.w1_gen_train, row.w1_gen_val, row.baseline_mean, row.baseline_std))
            out.update({
                "neg_ld_train": row.neg_ld_train,
                "neg_ld_val": row.neg_ld_val,
                "w1_overfit_gen_train": row.w1_gen_train,
                "w1_overfit_gen_val": row.w1_gen_val,
                "w1_baseline_mean": row.baseline_mean,
                "w1_baseline_std": row.baseline_std,
            })
        return out

    def _summary(self, names: list[str], rows: list) -> Path:
        """Mean and two standard deviations of each metric over the selected generators."""
        sel = np.array([self.selected(r[2]) for r in rows])
        out = []
        for j, name in enumerate(names):
            col = np.array([np.nan if r[3 + j] is None else r[3 + j] for r in rows], float)[sel]
            col = col[~np.isnan(col)]
            if col.size == 0:
                continue
            two_std = 2 * col.std(ddof=1) if col.size > 1 else 0.0
            out.append((name, col.mean(), two_std, col.size))
        return write_csv(self.out / "summary.csv", ["metric", "mean", "two_std", "count"], out)

    def _plots(self) -> list[Path]:
        from .plots import plot_run

        return plot_run(self.out)

    def reproduce(self, resume: bool = False) -> RunManifest:
        if not (resume and (self.data_dir / "reference" / "reference_stats.csv").exists()):
            self.synth()
        self.train(resume=resume)
        self.evaluate()
        missing = self.manifest.missing(self.out)
        if missing:
            raise RuntimeError(f"manifest lists missing files: {missing}")
        return self.manifest
