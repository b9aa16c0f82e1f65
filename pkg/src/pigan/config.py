"""Experiment configuration: schema, YAML loading, scaling and hashing."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .gan import TrainConfig, checkpoint_schedule
from .processes import KernelSpec, MeanFn, ProcessSpec, SensorLayout, equidistant_layout


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field path."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KernelCfg(_Model):
    variance: float = Field(1.0, ge=0)
    length: float | None = Field(None, gt=0)
    rate: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_scale(self):
        if (self.length is None) == (self.rate is None):
            raise ValueError("give exactly one of 'length' or 'rate'")
        return self

    def build(self) -> KernelSpec:
        if self.rate is not None:
            return KernelSpec.from_rate(self.variance, self.rate)
        return KernelSpec(self.variance, self.length)


class MeanCfg(_Model):
    constant: float = 0.0
    sin_amplitude: float = 0.0
    sin_frequency: float = 0.0
    sin_offset: float = 0.0


class ProcessCfg(_Model):
    kernel: KernelCfg
    mean: MeanCfg = MeanCfg()
    transform: Literal["identity", "exp", "boundary_factor"] = "identity"

    def build(self) -> ProcessSpec:
        return ProcessSpec(self.kernel.build(), MeanFn(**self.mean.model_dump()), self.transform)


class LayoutCfg(_Model):
    """Equidistant counts, or explicit positions per field (explicit wins)."""

    n_k: int = Field(0, ge=0)
    n_u: int = Field(0, ge=0)
    n_f: int = Field(0, ge=0)
    n_b: int = Field(0, ge=0, le=2)
    single: float | None = None
    k: list[float] | None = None
    u: list[float] | None = None
    f: list[float] | None = None
    b: list[float] | None = None

    def build(self) -> SensorLayout:
        base = equidistant_layout(self.n_k, self.n_u, self.n_f, self.n_b, single=self.single)
        d = base.to_dict()
        for name in ("k", "u", "f", "b"):
            explicit = getattr(self, name)
            if explicit is not None:
                d[name] = explicit
        return SensorLayout.from_dict(d)


class GroupCfg(_Model):
    layout: LayoutCfg
    snapshots: int = Field(..., ge=1)
    disc_width: int | None = Field(None, ge=1)


class DataCfg(_Model):
    kind: Literal["process", "pde"]
    processes: dict[Literal["k", "f"], ProcessCfg]
    groups: list[GroupCfg] = Field(..., min_length=1)
    validation_snapshots: int = Field(0, ge=0)
    grid_points: int = Field(201, ge=3)

    @model_validator(mode="after")
    def _fields(self):
        if self.kind == "process":
            if set(self.processes) != {"f"}:
                raise ValueError("a process experiment defines exactly one process, 'f'")
            if len(self.groups) != 1:
                raise ValueError("a process experiment has a single snapshot group")
            lay = self.groups[0].layout.build()
            if lay.k or lay.u or lay.b:
                raise ValueError("a process experiment places f-sensors only")
        elif set(self.processes) != {"k", "f"}:
            raise ValueError("a pde experiment defines processes 'k' and 'f'")
        return self


class ModelCfg(_Model):
    noise_dim: int = Field(4, ge=1)
    gen_width: int = Field(128, ge=1)
    gen_layers: int = Field(4, ge=0)
    disc_width: int = Field(128, ge=1)
    disc_layers: int = Field(4, ge=0)


class TrainCfg(_Model):
    n_steps: int = Field(100_000, ge=0)
    n_disc: int = Field(5, ge=1)
    gp_weight: float = Field(0.1, ge=0)
    batch_size: int = Field(1000, ge=1)
    lr: float = Field(1e-4, gt=0)
    beta1: float = Field(0.0, ge=0, lt=1)
    beta2: float = Field(0.9, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    group_weights: list[float] | None = None
    shuffle_kf: bool = False
    loss_kind: Literal["wgan_gp", "vanilla"] = "wgan_gp"
    precision: Literal["float64", "float32"] = "float64"
    trace_every: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _weights(self):
        if self.group_weights is not None and any(not a > 0 for a in self.group_weights):
            raise ValueError("group weights must be > 0")
        return self


class CheckpointCfg(_Model):
    """Checkpoints every ``stride`` steps within the final ``last`` steps; the
    ones within the final ``select_last`` steps enter the summary statistics."""

    last: int = Field(10_001, ge=1)
    stride: int = Field(1000, ge=1)
    include_start: bool = True
    select_last: int = Field(10_001, ge=1)


class EvalCfg(_Model):
    n_paths: int = Field(10_000, ge=2)
    reference_paths: int = Field(100_000, ge=2)
    w1_samples: int = Field(1000, ge=1)
    w1_batches: int = Field(10, ge=1)
    overfit: bool = False
    overfit_baseline_groups: int = Field(50, ge=2)
    svg: bool = False


class ExperimentConfig(_Model):
    name: str
    description: str = ""
    figure: str = ""
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    data_seed: int = 0
    data: DataCfg
    model: ModelCfg = ModelCfg()
    train: TrainCfg = TrainCfg()
    checkpoints: CheckpointCfg = CheckpointCfg()
    eval: EvalCfg = EvalCfg()

    @model_validator(mode="after")
    def _weights_per_group(self):
        w = self.train.group_weights
        if w is not None and len(w) != len(self.data.groups):
            raise ValueError(f"{len(self.data.groups)} groups but {len(w)} group weights")
        return self

    # -- derived objects
    def layouts(self) -> list[SensorLayout]:
        return [g.layout.build() for g in self.data.groups]

    def disc_widths(self) -> list[int]:
        return [g.disc_width or self.model.disc_width for g in self.data.groups]

    def checkpoint_steps(self) -> tuple[int, ...]:
        c = self.checkpoints
        return checkpoint_schedule(self.train.n_steps, c.last, c.stride, c.include_start)

    def train_config(self, seed: int) -> TrainConfig:
        t = self.train
        return TrainConfig(
            n_steps=t.n_steps,
            n_disc=t.n_disc,
            gp_weight=t.gp_weight,
            batch_size=t.batch_size,
            lr=t.lr,
            beta1=t.beta1,
            beta2=t.beta2,
            adam_eps=t.adam_eps,
            group_weights=tuple(t.group_weights) if t.group_weights else None,
            shuffle_kf=t.shuffle_kf,
            loss_kind=t.loss_kind,
            seed=seed,
            checkpoint_steps=self.checkpoint_steps(),
            trace_every=t.trace_every,
            precision=t.precision,
        )

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """sha256 of the canonical JSON form; independent of key order in the source file."""
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def data_digest(self) -> str:
        """Hash of the settings that determine the synthesized data and references."""
        key = {"data": self.data.model_dump(mode="json"), "data_seed": self.data_seed,
               "reference_paths": self.eval.reference_paths}
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode("utf-8")).hexdigest()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True))
    return path


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``override`` wins, lists are replaced whole."""
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], val)
        else:
            out[key] = val
    return out


DESK_WIDTH = 32
DESK_BATCH = 256
DESK_STEP_DIVISOR = 10


def desk_scale(data: dict) -> dict:
    """Reduced-cost variant of a config dict: widths above 32 become 32, steps
    and checkpoint windows/strides are cut tenfold, batches are capped at 256,
    graphs are evaluated in float32 and only the first seed is kept. Snapshot
    counts and data settings are left alone."""
    out = json.loads(json.dumps(data))
    model = out.setdefault("model", {})
    model["gen_width"] = min(model.get("gen_width", 128), DESK_WIDTH)
    model["disc_width"] = min(model.get("disc_width", 128), DESK_WIDTH)
    for g in out["data"]["groups"]:
        if g.get("disc_width") is not None:
            g["disc_width"] = min(g["disc_width"], DESK_WIDTH)
    train = out.setdefault("train", {})
    steps = train.get("n_steps", 100_000)
    train["n_steps"] = int(math.ceil(steps / DESK_STEP_DIVISOR))
    train["batch_size"] = min(train.get("batch_size", 1000), DESK_BATCH)
    train["precision"] = "float32"
    if train.get("trace_every"):
        train["trace_every"] = max(1, int(math.ceil(train["trace_every"] / DESK_STEP_DIVISOR)))
    ck = out.setdefault("checkpoints", {})
    for key, default in (("last", 10_001), ("select_last", 10_001)):
        ck[key] = (ck.get(key, default) - 1) // DESK_STEP_DIVISOR + 1
    ck["stride"] = max(1, ck.get("stride", 1000) // DESK_STEP_DIVISOR)
    out["seeds"] = out.get("seeds", [0])[:1]
    return out
