"""Named experiment configurations.

Each preset is a plain config dict at paper scale; :func:`preset_config`
applies the desk-scale reduction (and any per-preset desk overrides) and
validates the result.
"""

from __future__ import annotations

import math

from .config import ExperimentConfig, ConfigError, desk_scale, merge, parse_config

SCALES = ("paper", "desk")


def _gp(length: float, variance: float = 1.0, transform: str = "identity") -> dict:
    return {"kernel": {"variance": variance, "length": length}, "transform": transform}


# k(x) = exp(0.2 sin(1.5 pi (x + 1)) + g(x)), g ~ GP(0, 0.16 exp(-(x-x')^2))
K_PROCESS = {
    "kernel": {"variance": 4 / 25, "rate": 1.0},
    "mean": {"sin_amplitude": 0.2, "sin_frequency": 1.5 * math.pi, "sin_offset": 1.0},
    "transform": "exp",
}


def _f_process(rate: float) -> dict:
    return {"kernel": {"variance": 9 / 400, "rate": rate}, "mean": {"constant": 0.5}}


def _process_preset(name, length, sensors, snapshots, figure="fig4", transform="identity", **extra) -> dict:
    cfg = {
        "name": name,
        "figure": figure,
        "seeds": [0, 1, 2],
        "data": {
            "kind": "process",
            "processes": {"f": _gp(length, transform=transform)},
            "groups": [{"layout": {"n_f": sensors}, "snapshots": snapshots}],
        },
        "model": {"noise_dim": 4, "gen_width": 128, "disc_width": 64},
        "train": {"n_steps": 100_000, "batch_size": 1000},
        # the whole run is checkpointed so the W1 trace covers it
        "checkpoints": {"last": 100_001, "stride": 1000, "select_last": 10_001},
    }
    return merge(cfg, extra)


def _pde_preset(name, f_rate, layout, snapshots, noise_dim=20, batch=None, steps=100_000, shuffle=True, figure="fig8", **extra) -> dict:
    cfg = {
        "name": name,
        "figure": figure,
        "seeds": [0, 1, 2],
        "data": {
            "kind": "pde",
            "processes": {"k": K_PROCESS, "f": _f_process(f_rate)},
            "groups": [{"layout": layout, "snapshots": snapshots}],
        },
        "model": {"noise_dim": noise_dim, "gen_width": 128, "disc_width": 128},
        "train": {"n_steps": steps, "batch_size": batch or snapshots, "shuffle_kf": shuffle},
    }
    return merge(cfg, extra)


FORWARD_CASE1_LAYOUT = {"n_k": 13, "n_u": 2, "n_f": 21}


def _build() -> dict[str, dict]:
    p: dict[str, dict] = {}
    for length, tag in ((1.0, "l1"), (0.5, "l0.5"), (0.2, "l0.2")):
        for sensors in (6, 11):
            name = f"gp-{tag}-s{sensors}"
            p[name] = _process_preset(name, length, sensors, 1000)
    p["gp-l0.2-s11-n10k"] = _process_preset("gp-l0.2-s11-n10k", 0.2, 11, 10_000)

    for loss in ("wgan", "vanilla"):
        kind = "wgan_gp" if loss == "wgan" else "vanilla"
        p[f"compare-gp-{loss}"] = _process_preset(
            f"compare-gp-{loss}", 0.2, 11, 10_000, figure="fig6", train={"loss_kind": kind}
        )
        p[f"boundary-{loss}"] = _process_preset(
            f"boundary-{loss}", 0.2, 11, 10_000, figure="fig6", transform="boundary_factor", train={"loss_kind": kind}
        )

    p["overfit"] = _process_preset(
        "overfit", 0.2, 11, 10_000, figure="fig7",
        data={"validation_snapshots": 10_000},
        train={"trace_every": 1000},
        eval={"overfit": True},
    )

    fc1 = {"desk": {"train": {"n_steps": 20_000}}}
    p["forward-case1"] = _pde_preset("forward-case1", 25.0, FORWARD_CASE1_LAYOUT, 1000, **fc1)
    for m in (2, 4, 20, 50):
        name = f"forward-case1-noise{m}"
        p[name] = _pde_preset(name, 25.0, FORWARD_CASE1_LAYOUT, 1000, noise_dim=m, **fc1)
    for n in (300, 1000, 3000):
        name = f"forward-case1-snap{n}"
        p[name] = _pde_preset(name, 25.0, FORWARD_CASE1_LAYOUT, n, **fc1)
    p["forward-case2"] = _pde_preset(
        "forward-case2", 625 / 4, {"n_k": 13, "n_u": 2, "n_f": 41}, 10_000,
        batch=1000, steps=200_000, figure="fig11",
    )

    inverse = {1: (1, 13), 2: (5, 9), 3: (9, 5), 4: (13, 2)}
    for case, (nk, nu) in inverse.items():
        name = f"inv-case{case}"
        p[name] = _pde_preset(
            name, 1.0, {"n_k": nk, "n_u": nu, "n_f": 13}, 1000,
            steps=200_000, shuffle=False, figure="fig12",
        )

    two = _pde_preset(
        "two-group", 1.0, {"n_k": 13, "n_u": 2, "n_f": 13}, 1000,
        steps=200_000, shuffle=False, figure="fig13",
    )
    two["data"]["groups"].append({"layout": {"n_u": 1, "single": 0.0}, "snapshots": 1000, "disc_width": 16})
    p["two-group"] = two
    return p


PRESETS = _build()


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset_dict(name: str, scale: str = "paper") -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; expected one of {SCALES}")
    raw = dict(PRESETS[name])
    desk = raw.pop("desk", {})
    if scale == "desk":
        raw = merge(desk_scale(raw), desk)
    return raw


def preset_config(name: str, scale: str = "paper", overrides: dict | None = None) -> ExperimentConfig:
    data = preset_dict(name, scale)
    if overrides:
        data = merge(data, overrides)
    return parse_config(data)
