"""Adversarial training of stochastic-process generators.

Two generator families share one training engine:

* :class:`ProcessGenerator` - a single network f(x; xi) trained directly on
  snapshots of one process.
* :class:`GeneratorSet` - networks for u(x; xi) and k(x; xi); the forcing and
  boundary generators are *induced* from them by applying
  ``f = -(1/10) d/dx (k du/dx)`` and the Dirichlet trace, so they carry no
  parameters of their own.

Each snapshot group gets its own discriminator. Per training step the
discriminators take ``n_disc`` updates each (fresh data rows, noise and
interpolation weights every time), then the generators take one update on
the weighted sum of the per-group generator losses.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Graph, Node, NonFiniteError
from .io import read_arrays, write_arrays
from .nn import AdamState, MlpParams, MlpSpec, NetLeaves, NonFiniteGradient, adam_step, init_mlp
from .processes import SensorLayout, SnapshotGroup

log = logging.getLogger(__name__)

DIFFUSION_SCALE = 0.1
LOSS_KINDS = ("wgan_gp", "vanilla")


class TrainingAborted(RuntimeError):
    def __init__(self, step: int, detail: str):
        self.step = step
        super().__init__(f"training aborted at step {step}: {detail}")


# ------------------------------------------------------------------ generators


@dataclass
class ProcessGenerator:
    net: MlpParams
    noise_dim: int

    physics = False

    @property
    def nets(self) -> dict[str, MlpParams]:
        return {"f": self.net}

    def arrays(self) -> list[np.ndarray]:
        return self.net.arrays()


@dataclass
class GeneratorSet:
    u_net: MlpParams
    k_net: MlpParams
    noise_dim: int

    physics = True

    @property
    def nets(self) -> dict[str, MlpParams]:
        return {"u": self.u_net, "k": self.k_net}

    def arrays(self) -> list[np.ndarray]:
        return self.u_net.arrays() + self.k_net.arrays()


def generator_spec(noise_dim: int, hidden_width: int = 128, hidden_layers: int = 4) -> MlpSpec:
    return MlpSpec(1 + noise_dim, hidden_width, hidden_layers, 1)


def init_generator_set(noise_dim, rng, hidden_width=128, hidden_layers=4) -> GeneratorSet:
    spec = generator_spec(noise_dim, hidden_width, hidden_layers)
    u = init_mlp(spec, rng)
    k = init_mlp(spec, rng)
    return GeneratorSet(u, k, noise_dim)


def init_process_generator(noise_dim, rng, hidden_width=128, hidden_layers=4) -> ProcessGenerator:
    return ProcessGenerator(init_mlp(generator_spec(noise_dim, hidden_width, hidden_layers), rng), noise_dim)


def init_discriminators(layouts: Sequence[SensorLayout], rng, hidden_widths, hidden_layers=4) -> list[MlpParams]:
    if isinstance(hidden_widths, int):
        hidden_widths = [hidden_widths] * len(layouts)
    return [init_mlp(MlpSpec(lay.width, w, hidden_layers, 1), rng) for lay, w in zip(layouts, hidden_widths)]


def apply_operator(u: Node, k: Node, x: Node) -> Node:
    """``-(1/10) (k' u' + k u'')`` of row-wise expressions u(x), k(x), x a leaf (N, 1)."""
    g = x.graph
    cache: dict = {}
    du, dk = g.jvp([u, k], x, cache=cache)
    (d2u,) = g.jvp([du], x, cache=cache)
    return -DIFFUSION_SCALE * (dk * du + k * d2u)


class GeneratorGraph:
    """Generator networks bound into a graph."""

    def __init__(self, graph: Graph, gen):
        self.graph = graph
        self.physics = gen.physics
        self.noise_dim = gen.noise_dim
        self.nets = {name: NetLeaves(graph, p.spec, f"gen.{name}") for name, p in gen.nets.items()}

    @property
    def param_nodes(self) -> list[Node]:
        out = []
        for name in self.nets:
            out += self.nets[name].nodes
        return out

    def bind(self, gen) -> dict:
        feed = {}
        for name, p in gen.nets.items():
            feed.update(self.nets[name].bind(p))
        return feed

    def field(self, name: str, x: Node, xi: Node) -> Node:
        """Per-row field value (N, 1) at coordinates ``x`` (N, 1) and noise ``xi`` (N, m)."""
        inp = [x, xi]
        if not self.physics:
            if name != "f":
                raise ValueError(f"a process generator only provides 'f', not {name!r}")
            return self.nets["f"](inp)
        if name == "k":
            return self.nets["k"](inp)
        if name in ("u", "b"):
            return self.nets["u"](inp)
        if name == "f":
            return apply_operator(self.nets["u"](inp), self.nets["k"](inp), x)
        raise ValueError(f"unknown field {name!r}")


def field_inputs(noise: np.ndarray, positions) -> tuple[np.ndarray, np.ndarray]:
    """Row-expanded (x, xi) for every (noise row, sensor) pair, noise-major."""
    pos = np.asarray(positions, float)
    x = np.tile(pos, noise.shape[0])[:, None]
    xi = np.repeat(noise, pos.size, axis=0)
    return x, xi


class FakeBuilder:
    """Generated snapshot rows for one sensor layout, shape (n, layout.width)."""

    def __init__(self, gg: GeneratorGraph, layout: SensorLayout, name: str = "fake"):
        self.gg = gg
        self.layout = layout
        g = gg.graph
        self.leaves = {}
        blocks = []
        for fname, a, b in layout.blocks():
            x = g.leaf(f"{name}.x_{fname}")
            xi = g.leaf(f"{name}.xi_{fname}")
            self.leaves[fname] = (x, xi)
            vals = gg.field(fname, x, xi)
            blocks.append(ad.reshape(vals, (-1, b - a)))
        if not blocks:
            raise ValueError("layout has no sensors")
        self.node = ad.concat(blocks, axis=1)

    def feed(self, noise: np.ndarray) -> dict:
        if noise.shape[1] != self.gg.noise_dim:
            raise ValueError(f"noise width {noise.shape[1]} != noise_dim {self.gg.noise_dim}")
        out = {}
        for fname, (x, xi) in self.leaves.items():
            xv, xiv = field_inputs(noise, self.layout.positions(fname))
            out[x] = xv
            out[xi] = xiv
        return out


# ----------------------------------------------------------------------- losses


def _rows(x: Node) -> Node:
    return ad.reshape(x, (-1,))


def wgan_gp_nodes(D: Callable[[Node], Node], real: Node, fake: Node, eps: Node, gp_weight: float):
    """(L_g, L_d) of WGAN-GP with the two-sided penalty (||grad D(x_hat)|| - 1)^2."""
    g = real.graph
    xhat = eps * real + (1.0 - eps) * fake
    d_fake = D(fake)
    d_real = D(real)
    (gx,) = g.grad(D(xhat), [xhat])
    norm = ad.sqrt(ad.total(ad.square(gx), axis=1))
    penalty = ad.mean(ad.square(norm - 1.0))
    lg = -ad.mean(d_fake)
    ld = ad.mean(d_fake) - ad.mean(d_real) + gp_weight * penalty
    return lg, ld


def vanilla_nodes(D: Callable[[Node], Node], real: Node, fake: Node):
    """(L_g, L_d) of the original GAN with a logistic head, in log-sum-exp form:
    log D = -softplus(-s), log(1 - D) = -softplus(s)."""
    s_fake = D(fake)
    s_real = D(real)
    lg = -ad.mean(ad.softplus(s_fake))
    ld = ad.mean(ad.softplus(-s_real)) + ad.mean(ad.softplus(s_fake))
    return lg, ld


def _critic_callable(D, graph: Graph):
    """MlpParams -> (callable, feed); a callable is passed through."""
    if isinstance(D, MlpParams):
        net = NetLeaves(graph, D.spec, "D")
        return net, net.bind(D)
    return D, {}


def wgan_gp_losses(D, real, fake, eps, gp_weight: float = 0.1) -> tuple[float, float]:
    """Numeric (L_g, L_d). ``D`` is an MlpParams or a node builder ``D(x_node)``."""
    g = Graph()
    r, f, e = g.leaf("real"), g.leaf("fake"), g.leaf("eps")
    fn, feed = _critic_callable(D, g)
    lg, ld = wgan_gp_nodes(fn, r, f, e, gp_weight)
    real = np.atleast_2d(np.asarray(real, float))
    fake = np.atleast_2d(np.asarray(fake, float))
    eps = np.asarray(eps, float).reshape(-1, 1)
    if real.shape != fake.shape or eps.shape[0] != real.shape[0]:
        raise ValueError("real, fake and eps batches must match")
    feed.update({r: real, f: fake, e: eps})
    lgv, ldv = g.eval([lg, ld], feed)
    return float(lgv), float(ldv)


def vanilla_losses(D, real, fake) -> tuple[float, float]:
    g = Graph()
    r, f = g.leaf("real"), g.leaf("fake")
    fn, feed = _critic_callable(D, g)
    lg, ld = vanilla_nodes(fn, r, f)
    feed.update({r: np.atleast_2d(real), f: np.atleast_2d(fake)})
    lgv, ldv = g.eval([lg, ld], feed)
    return float(lgv), float(ldv)


# --------------------------------------------------------- single-use helpers


def gen_field(gen, name: str, x, xi) -> np.ndarray:
    """Field values at coordinates ``x`` (N,) for noise rows ``xi`` (N, m)."""
    g = Graph()
    gg = GeneratorGraph(g, gen)
    xl, xil = g.leaf("x"), g.leaf("xi")
    xi = np.atleast_2d(np.asarray(xi, float))
    if xi.shape[1] != gen.noise_dim:
        raise ValueError(f"noise width {xi.shape[1]} != noise_dim {gen.noise_dim}")
    out = gg.field(name, xl, xil)
    feed = gg.bind(gen)
    feed.update({xl: np.asarray(x, float).reshape(-1, 1), xil: xi})
    return g.eval(out, feed)[:, 0]


def induced_f(gen: GeneratorSet, x, xi) -> np.ndarray:
    return gen_field(gen, "f", x, xi)


def induced_b(gen: GeneratorSet, x, xi) -> np.ndarray:
    x = np.asarray(x, float)
    if not np.all(np.isin(x, (-1.0, 1.0))):
        raise ValueError("boundary values are only defined at x = -1 and x = 1")
    return gen_field(gen, "b", x, xi)


def fake_snapshot(gen, layout: SensorLayout, noise) -> np.ndarray:
    """Generated snapshot rows (n, layout.width), one row per noise vector."""
    g = Graph()
    gg = GeneratorGraph(g, gen)
    fb = FakeBuilder(gg, layout)
    noise = np.atleast_2d(np.asarray(noise, float))
    feed = gg.bind(gen)
    feed.update(fb.feed(noise))
    return g.eval(fb.node, feed)


class PathSampler:
    """Evaluates generator sample paths on a grid, in noise chunks."""

    def __init__(self, gen):
        self.graph = Graph()
        self.gg = GeneratorGraph(self.graph, gen)
        self.x = self.graph.leaf("x")
        self.xi = self.graph.leaf("xi")
        names = ("k", "u", "f") if gen.physics else ("f",)
        self.names = names
        self.outputs = [self.gg.field(n, self.x, self.xi) for n in names]

    def paths(self, gen, grid, noise, chunk_rows: int = 50_000, fields=None) -> dict[str, np.ndarray]:
        grid = np.asarray(grid, float)
        noise = np.atleast_2d(np.asarray(noise, float))
        want = [n for n in self.names if fields is None or n in fields]
        outs = [self.outputs[self.names.index(n)] for n in want]
        per = max(1, chunk_rows // grid.size)
        res = {n: np.empty((noise.shape[0], grid.size)) for n in want}
        base = self.gg.bind(gen)
        for s in range(0, noise.shape[0], per):
            block = noise[s : s + per]
            xv, xiv = field_inputs(block, grid)
            feed = dict(base)
            feed[self.x] = xv
            feed[self.xi] = xiv
            for n, v in zip(want, self.graph.eval(outs, feed)):
                res[n][s : s + per] = v.reshape(block.shape[0], grid.size)
        return res


# ----------------------------------------------------------------- training


@dataclass
class TrainConfig:
    n_steps: int = 100_000
    n_disc: int = 5
    gp_weight: float = 0.1
    batch_size: int = 1000
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.9
    adam_eps: float = 1e-8
    group_weights: tuple[float, ...] | None = None
    shuffle_kf: bool = False
    loss_kind: str = "wgan_gp"
    seed: int = 0
    checkpoint_steps: tuple[int, ...] = ()
    trace_every: int = 0
    precision: str = "float64"

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be >= 0")
        if self.n_disc < 1:
            raise ValueError("n_disc must be >= 1")
        if self.gp_weight < 0:
            raise ValueError("gp_weight must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")
        if self.group_weights is not None and any(a <= 0 for a in self.group_weights):
            raise ValueError("group weights must be > 0")
        if self.precision not in ("float64", "float32"):
            raise ValueError("precision must be 'float64' or 'float32'")

    def adam(self, arrays) -> AdamState:
        return AdamState.like(arrays, lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.adam_eps)


TRACE_COLUMNS = ("step", "group", "ld_train", "ld_val", "lg")


@dataclass
class TrainState:
    step: int
    gen: GeneratorSet | ProcessGenerator
    discs: list[MlpParams]
    gen_adam: AdamState
    disc_adam: list[AdamState]
    rng: np.random.Generator
    seed: int = 0
    traces: list[tuple] = field(default_factory=list)

    def trace_array(self) -> np.ndarray:
        if not self.traces:
            return np.zeros((0, len(TRACE_COLUMNS)))
        return np.array(self.traces, dtype=float)


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def new_state(gen, discs: list[MlpParams], cfg: TrainConfig) -> TrainState:
    return TrainState(
        step=0,
        gen=gen,
        discs=discs,
        gen_adam=cfg.adam(gen.arrays()),
        disc_adam=[cfg.adam(d.arrays()) for d in discs],
        rng=_stream(cfg.seed, 1),
        seed=cfg.seed,
    )


def init_rng(seed: int) -> np.random.Generator:
    """Stream used for parameter initialization (separate from the training stream)."""
    return _stream(seed, 0)


class _Critic:
    def __init__(self, graph: Graph, spec: MlpSpec, name: str, cfg: TrainConfig):
        self.net = NetLeaves(graph, spec, name)
        self.real = graph.leaf(f"{name}.real")
        self.fake = graph.leaf(f"{name}.fake")
        self.eps = graph.leaf(f"{name}.eps")
        if cfg.loss_kind == "wgan_gp":
            _, self.loss = wgan_gp_nodes(self.net, self.real, self.fake, self.eps, cfg.gp_weight)
        else:
            _, self.loss = vanilla_nodes(self.net, self.real, self.fake)
        self.grads = graph.grad(self.loss, self.net.nodes)

    def gen_loss(self, fake: Node, loss_kind: str) -> Node:
        s = self.net(fake)
        if loss_kind == "wgan_gp":
            return -ad.mean(s)
        return -ad.mean(ad.softplus(s))


class Trainer:
    """Multi-group adversarial trainer; one group with a process generator is
    the plain process-approximation loop."""

    def __init__(
        self,
        groups: Sequence[SnapshotGroup],
        state: TrainState,
        cfg: TrainConfig,
        validation: Sequence[SnapshotGroup | None] | None = None,
    ):
        if not groups:
            raise ValueError("need at least one snapshot group")
        if len(state.discs) != len(groups):
            raise ValueError(f"{len(groups)} groups but {len(state.discs)} discriminators")
        for t, (grp, d) in enumerate(zip(groups, state.discs)):
            if d.spec.input_width != grp.layout.width:
                raise ValueError(
                    f"group {t}: discriminator input width {d.spec.input_width} != snapshot width {grp.layout.width}"
                )
        weights = cfg.group_weights or (1.0,) * len(groups)
        if len(weights) != len(groups):
            raise ValueError("one generator-loss weight per group is required")
        self.groups = list(groups)
        self.validation = list(validation) if validation is not None else [None] * len(groups)
        self.state = state
        self.cfg = cfg
        self.weights = weights

        g = self.graph = Graph(check_finite="outputs", dtype=cfg.precision)
        self.gg = GeneratorGraph(g, state.gen)
        self.fakes = [FakeBuilder(self.gg, grp.layout, f"fake{t}") for t, grp in enumerate(groups)]
        self.critics = [_Critic(g, d.spec, f"disc{t}", cfg) for t, d in enumerate(state.discs)]
        lg = None
        for a, fb, c in zip(weights, self.fakes, self.critics):
            term = a * c.gen_loss(fb.node, cfg.loss_kind)
            lg = term if lg is None else lg + term
        self.gen_loss = lg
        self.gen_grads = g.grad(lg, self.gg.param_nodes)
        self.last_lg = math.nan

    # -- sampling in the order the algorithm prescribes
    def _real_batch(self, t: int, rng: np.random.Generator) -> np.ndarray:
        grp = self.groups[t]
        n = len(grp)
        if self.cfg.batch_size >= n:
            rows = grp.data
        else:
            rows = grp.data[rng.choice(n, self.cfg.batch_size, replace=False)]
        if self.cfg.shuffle_kf:
            rows = rows.copy()
            for name in ("k", "f"):
                for fname, a, b in grp.layout.blocks():
                    if fname == name:
                        rows[:, a:b] = rows[rng.permutation(rows.shape[0]), a:b]
        return rows

    def _fake_values(self, t: int, noise: np.ndarray) -> np.ndarray:
        feed = self.gg.bind(self.state.gen)
        feed.update(self.fakes[t].feed(noise))
        return self.graph.eval(self.fakes[t].node, feed)

    def _disc_feed(self, t, real, fake, eps) -> dict:
        c = self.critics[t]
        feed = c.net.bind(self.state.discs[t])
        feed.update({c.real: real, c.fake: fake, c.eps: eps})
        return feed

    def step(self) -> None:
        st, cfg = self.state, self.cfg
        rng = st.rng
        m = self.gg.noise_dim
        for _ in range(cfg.n_disc):
            for t in range(len(self.groups)):
                real = self._real_batch(t, rng)
                n = real.shape[0]
                noise = rng.standard_normal((n, m))
                eps = rng.uniform(0.0, 1.0, (n, 1))
                fake = self._fake_values(t, noise)
                c = self.critics[t]
                vals = self.graph.eval([c.loss] + c.grads, self._disc_feed(t, real, fake, eps))
                adam_step(st.disc_adam[t], st.discs[t].arrays(), vals[1:])
        n = min(cfg.batch_size, min(len(g) for g in self.groups))
        noise = rng.standard_normal((n, m))
        feed = self.gg.bind(st.gen)
        for t, (fb, c) in enumerate(zip(self.fakes, self.critics)):
            feed.update(fb.feed(noise))
            feed.update(c.net.bind(st.discs[t]))
        vals = self.graph.eval([self.gen_loss] + self.gen_grads, feed)
        self.last_lg = float(vals[0])
        adam_step(st.gen_adam, st.gen.arrays(), vals[1:])
        st.step += 1

    def disc_loss(self, t: int, real: np.ndarray, rng: np.random.Generator) -> float:
        """Discriminator loss on ``real`` against an equally sized fresh fake batch."""
        n = real.shape[0]
        noise = rng.standard_normal((n, self.gg.noise_dim))
        eps = rng.uniform(0.0, 1.0, (n, 1))
        fake = self._fake_values(t, noise)
        return float(self.graph.eval(self.critics[t].loss, self._disc_feed(t, real, fake, eps)))

    def trace(self) -> None:
        st = self.state
        rng = _stream(st.seed, 1_000_003 + st.step)
        for t, grp in enumerate(self.groups):
            val = self.validation[t]
            n = len(val) if val is not None else min(len(grp), self.cfg.batch_size)
            rows = grp.data if len(grp) <= n else grp.data[rng.choice(len(grp), n, replace=False)]
            ld_train = self.disc_loss(t, rows, rng)
            ld_val = self.disc_loss(t, val.data, rng) if val is not None else math.nan
            st.traces.append((st.step, t, ld_train, ld_val, self.last_lg))

    def advance(self) -> None:
        """One training step plus its bookkeeping (trace, progress log)."""
        st, cfg = self.state, self.cfg
        try:
            self.step()
        except (NonFiniteError, NonFiniteGradient) as exc:
            raise TrainingAborted(st.step + 1, str(exc)) from exc
        if cfg.trace_every and st.step % cfg.trace_every == 0:
            self.trace()
        if st.step % 1000 == 0:
            log.info("step %d  L_g %.5g", st.step, self.last_lg)

    def run(self, checkpoint_dir: str | Path | None = None, meta: dict | None = None) -> TrainState:
        st, cfg = self.state, self.cfg
        ckpts = set(cfg.checkpoint_steps)

        def save():
            if checkpoint_dir is not None and st.step in ckpts:
                save_checkpoint(Path(checkpoint_dir) / checkpoint_name(st.step), st, cfg, meta)

        if st.step == 0:
            if cfg.trace_every:
                self.trace()
            save()
        while st.step < cfg.n_steps:
            self.advance()
            save()
        return st


def train_process_gan(
    data: SnapshotGroup,
    gen_spec: MlpSpec,
    disc_spec: MlpSpec,
    cfg: TrainConfig,
    validation: SnapshotGroup | None = None,
    checkpoint_dir=None,
    state: TrainState | None = None,
) -> TrainState:
    """Approximate one stochastic process from its snapshots (single group, f only)."""
    lay = data.layout
    if lay.k or lay.u or lay.b:
        raise ValueError("process approximation takes f-sensor data only")
    if state is None:
        rng = init_rng(cfg.seed)
        gen = ProcessGenerator(init_mlp(gen_spec, rng), gen_spec.input_width - 1)
        state = new_state(gen, [init_mlp(disc_spec, rng)], cfg)
    return Trainer([data], state, cfg, [validation]).run(checkpoint_dir)


def train_pigan(
    groups: Sequence[SnapshotGroup],
    gen: GeneratorSet,
    discs: Sequence[MlpParams],
    cfg: TrainConfig,
    checkpoint_dir=None,
    state: TrainState | None = None,
    validation=None,
) -> TrainState:
    """Physics-informed training with one discriminator per snapshot group."""
    if state is None:
        state = new_state(gen, list(discs), cfg)
    return Trainer(groups, state, cfg, validation).run(checkpoint_dir)


# ---------------------------------------------------------------- checkpoints


def checkpoint_name(step: int) -> str:
    return f"step{step:08d}.ckpt"


def save_checkpoint(path, state: TrainState, cfg: TrainConfig | None = None, meta: dict | None = None) -> Path:
    gen = state.gen
    arrays: dict[str, np.ndarray] = {}
    for name, p in gen.nets.items():
        arrays.update(p.named_arrays(f"gen.{name}"))
    for t, d in enumerate(state.discs):
        arrays.update(d.named_arrays(f"disc{t}"))
    adams = {"gen": state.gen_adam, **{f"disc{t}": a for t, a in enumerate(state.disc_adam)}}
    adam_meta = {}
    for key, a in adams.items():
        for i, (m, v) in enumerate(zip(a.m, a.v)):
            arrays[f"adam.{key}.m{i}"] = m
            arrays[f"adam.{key}.v{i}"] = v
        adam_meta[key] = {"t": a.t, "lr": a.lr, "beta1": a.beta1, "beta2": a.beta2, "eps": a.eps, "n": len(a.m)}
    arrays["traces"] = state.trace_array()
    header = {
        "kind": "checkpoint",
        "step": state.step,
        "seed": state.seed,
        "generator": "pde" if gen.physics else "process",
        "noise_dim": gen.noise_dim,
        "gen_specs": {name: p.spec.to_dict() for name, p in gen.nets.items()},
        "disc_specs": [d.spec.to_dict() for d in state.discs],
        "adam": adam_meta,
        "rng": state.rng.bit_generator.state,
        "trace_columns": list(TRACE_COLUMNS),
        "info": dict(meta or {}),
    }
    return write_arrays(path, header, arrays)


def load_checkpoint(path) -> TrainState:
    meta, arrays = read_arrays(path)
    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{path} is not a checkpoint")
    nets = {
        name: MlpParams.from_named(MlpSpec(**s), f"gen.{name}", arrays) for name, s in meta["gen_specs"].items()
    }
    if meta["generator"] == "pde":
        gen = GeneratorSet(nets["u"], nets["k"], meta["noise_dim"])
    else:
        gen = ProcessGenerator(nets["f"], meta["noise_dim"])
    discs = [MlpParams.from_named(MlpSpec(**s), f"disc{t}", arrays) for t, s in enumerate(meta["disc_specs"])]

    def adam(key):
        a = meta["adam"][key]
        return AdamState(
            lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], t=a["t"],
            m=[arrays[f"adam.{key}.m{i}"] for i in range(a["n"])],
            v=[arrays[f"adam.{key}.v{i}"] for i in range(a["n"])],
        )

    bitgen = np.random.PCG64()
    bitgen.state = meta["rng"]
    traces = [tuple(row) for row in arrays["traces"].tolist()]
    for i, row in enumerate(traces):
        traces[i] = (int(row[0]), int(row[1])) + tuple(row[2:])
    return TrainState(
        step=meta["step"],
        gen=gen,
        discs=discs,
        gen_adam=adam("gen"),
        disc_adam=[adam(f"disc{t}") for t in range(len(discs))],
        rng=np.random.Generator(bitgen),
        seed=meta["seed"],
        traces=traces,
    )


def checkpoint_schedule(n_steps: int, last: int = 10_001, stride: int = 1000, include_start: bool = True) -> tuple[int, ...]:
    """Steps within the final ``last`` steps that are multiples of ``stride``
    back from ``n_steps`` (11 checkpoints for 1e5 steps with the defaults)."""
    steps = set(range(n_steps, max(n_steps - last, -1), -stride))
    if include_start:
        steps.add(0)
    return tuple(sorted(s for s in steps if s >= 0))
