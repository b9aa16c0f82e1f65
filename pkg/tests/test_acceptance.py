"""Acceptance criteria P1 to P12.

Each test appends one ``P<n> PASS|FAIL: measured vs tolerance`` line, which the
terminal summary prints in order. The desk-scale training runs (P7, P8, P9,
P11, P12) are marked ``slow``; together they take a few hours on one core.
"""

import csv
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

import conftest
import exprs
import oracles as O
from pigan import autodiff as ad
from pigan import gan
from pigan.autodiff import Graph
from pigan.elliptic import Grid1D, mc_reference, sample_sde, solve_elliptic_fd
from pigan.metrics import overfit_report, w1_empirical, w1_sorted_1d
from pigan.nn import MlpSpec, NetLeaves, init_mlp, mlp_forward
from pigan.processes import (
    KernelSpec,
    MeanFn,
    ProcessSpec,
    SnapshotGroup,
    collect_snapshots,
    equidistant_layout,
    halton_gaussian_points,
    kernel_matrix,
    sample_gp,
)

K_SPEC = ProcessSpec(KernelSpec.from_rate(4 / 25, 1.0), MeanFn(0.0, 0.2, 1.5 * np.pi, 1.0), "exp")
F_RATE25 = ProcessSpec(KernelSpec.from_rate(9 / 400, 25.0), MeanFn(0.5))
F_RATE1 = ProcessSpec(KernelSpec.from_rate(9 / 400, 1.0), MeanFn(0.5))


def report(pid: str, ok: bool, detail: str) -> None:
    conftest.ACCEPTANCE_LINES.append(f"{pid} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def run_cli(args, out: Path, threads: int = 1, timeout: float = 4 * 3600):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(threads)
    res = subprocess.run(
        [sys.executable, "-m", "pigan", *args, "--out", str(out)],
        env=env, capture_output=True, text=True, timeout=timeout,
    )
    assert res.returncode == 0, res.stderr[-2000:]
    return out


def read_csv(path: Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def metric(rows, name, step=None):
    step = max(int(r["step"]) for r in rows) if step is None else step
    return float(next(r[name] for r in rows if int(r["step"]) == step))


# ------------------------------------------------------------------- P1


def _numpy_mlp(params, x, y):
    h = np.stack([x, y], axis=-1)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < len(params.weights) - 1:
            h = np.tanh(h)
    return h[..., 0]


def test_p1_autodiff_against_finite_differences():
    rng = np.random.default_rng(2024)
    tol = {1: 1e-4, 2: 1e-3, 3: 1e-2}
    worst = {1: 0.0, 2: 0.0, 3: 0.0, "mixed": 0.0, "param": 0.0}
    fds = {1: O.fd1, 2: O.fd2, 3: O.fd3}
    steps = {1: 1e-5, 2: 1e-4, 3: 1e-3}

    def check(node_fn, np_fn, n_in):
        g = Graph()
        x, y = g.leaf("x"), g.leaf("y")
        out = node_fn(x, y)
        xs, ys = rng.uniform(-1.2, 1.2, (2, 100))
        feed = {x: xs, y: ys}
        fvals = np_fn(xs, ys)
        for var, v in ((x, 0), (y, 1))[:n_in]:
            d = out
            for order in (1, 2, 3):
                (d,) = g.grad(d, [var])
                est = np.broadcast_to(g.eval(d, feed), xs.shape)
                f = (lambda t: np_fn(t, ys)) if v == 0 else (lambda t: np_fn(xs, t))
                ref = fds[order](f, xs if v == 0 else ys)
                noise = O.fd_noise(fvals, order, steps[order])
                worst[order] = max(worst[order], O.rel_err(est, ref, noise=noise) / tol[order])
        (dx,) = g.grad(out, [x])
        (dxy,) = g.grad(dx, [y])
        est = np.broadcast_to(g.eval(dxy, feed), xs.shape)
        worst["mixed"] = max(worst["mixed"], O.rel_err(est, O.fd_mixed(np_fn, xs, ys), noise=O.fd_noise(fvals, 2, 1e-4)) / tol[2])

    for _ in range(200):
        tree = exprs.random_tree(rng, int(rng.integers(1, 7)))
        check(lambda x, y, t=tree: exprs.to_node(t, x, y), exprs.to_numpy(tree), 2)

    for seed in range(10):
        spec = MlpSpec(2, 8, 3, 1)
        p = init_mlp(spec, np.random.default_rng(seed))
        p.biases = [rng.normal(scale=0.3, size=b.shape) for b in p.biases]

        # parameters enter as constants for the input-derivative checks
        def const_fn(x, y, p=p):
            h = ad.concat([ad.reshape(x, (-1, 1)), ad.reshape(y, (-1, 1))], axis=1)
            for i, (w, b) in enumerate(zip(p.weights, p.biases)):
                h = ad.matmul(h, x.graph.const(w)) + x.graph.const(b)
                if i < len(p.weights) - 1:
                    h = ad.tanh(h)
            return ad.reshape(h, (-1,))

        check(const_fn, lambda xs, ys, p=p: _numpy_mlp(p, xs, ys), 2)

        g = Graph()
        net = NetLeaves(g, spec, "net")
        inp = g.leaf()
        out = ad.total(mlp_forward(net, inp))
        xin = rng.uniform(-1, 1, (5, 2))
        feed = net.bind(p)
        feed[inp] = xin
        grads = g.eval(g.grad(out, net.nodes), feed)
        for arr, gv in zip(p.arrays(), grads):
            fd = np.empty_like(arr)
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]

                def f(v):
                    arr[idx] = v
                    r = float(_numpy_mlp(p, xin[:, 0], xin[:, 1]).sum())
                    arr[idx] = orig
                    return r

                fd[idx] = O.fd1(f, orig)
            worst["param"] = max(worst["param"], O.rel_err(gv, fd) / tol[1])

    ok = all(v < 1.0 for v in worst.values())
    detail = ", ".join(
        f"{k}: {v * (tol[k] if k in tol else tol[2] if k == 'mixed' else tol[1]):.2e}" for k, v in worst.items()
    )
    report("P1", ok, f"max rel err {detail} vs 1e-4/1e-3/1e-2 (mixed 1e-3, params 1e-4)")


# ------------------------------------------------------------------- P2


def test_p2_solver_convergence():
    sizes = (51, 101, 201, 401)
    e_sin, e_quad, rel201 = [], [], {}
    for m in sizes:
        x = Grid1D(m).points
        us = solve_elliptic_fd(np.ones(m), np.sin(np.pi * x))
        uq = solve_elliptic_fd(np.ones(m), np.ones(m))
        e_sin.append(np.abs(us - O.u_sine(x)).max())
        e_quad.append(np.abs(uq - O.u_quadratic(x)).max())
        if m == 201:
            rel201 = {
                "sine": e_sin[-1] / np.abs(O.u_sine(x)).max(),
                "quadratic": e_quad[-1] / np.abs(O.u_quadratic(x)).max(),
            }
    orders = O.observed_orders(e_sin, sizes)
    # the three-point stencil is exact for quadratics, so that case sits at round-off
    quad_exact = max(e_quad) < 1e-10
    ok = orders.min() >= 1.9 and quad_exact and max(rel201.values()) < 5e-4
    report(
        "P2", ok,
        f"sine orders {np.round(orders, 3).tolist()} (>= 1.9), quadratic max err {max(e_quad):.1e} "
        f"(exact stencil), rel err at m=201 sine {rel201['sine']:.2e} quadratic {rel201['quadratic']:.1e} (< 5e-4)",
    )


# ------------------------------------------------------------------- P3


def test_p3_operator_consistency():
    gen = gan.init_generator_set(4, np.random.default_rng(7), 32, 4)
    rng = np.random.default_rng(8)
    x = rng.uniform(-0.99, 0.99, 100)
    xi = rng.normal(size=(100, 4))
    h = 1e-4
    u = lambda s: gan.gen_field(gen, "u", s, xi)
    k = lambda s: gan.gen_field(gen, "k", s, xi)
    fd = -0.1 * (k(x + h / 2) * (u(x + h) - u(x)) - k(x - h / 2) * (u(x) - u(x - h))) / h**2
    err = O.rel_err(gan.induced_f(gen, x, xi), fd)
    report("P3", err < 1e-4, f"max rel err {err:.2e} vs 1e-4")


# ------------------------------------------------------------------- P4


def test_p4_w1_exact():
    rng = np.random.default_rng(11)
    worst = worst_1d = 0.0
    for _ in range(500):
        n, d = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        a, b = rng.normal(size=(2, n, d)) * rng.uniform(0.1, 5)
        worst = max(worst, abs(w1_empirical(a, b) - O.w1_brute(a, b)))
        if d == 1:
            worst_1d = max(worst_1d, abs(w1_empirical(a, b) - w1_sorted_1d(a[:, 0], b[:, 0])))
    for n in (1, 10, 100, 1000):
        a, b = rng.normal(size=(2, n))
        worst_1d = max(worst_1d, abs(w1_empirical(a, b) - w1_sorted_1d(a, b)))
    ok = worst <= 1e-12 and worst_1d <= 1e-12
    report("P4", ok, f"max |W1 - brute force| {worst:.1e}, 1-D vs sorted {worst_1d:.1e} (<= 1e-12)")


# ------------------------------------------------------------------- P5


def test_p5_gp_sampler_covariance():
    x = np.linspace(-1, 1, 11)
    spec = ProcessSpec(KernelSpec(1.0, 1.0))
    paths = sample_gp(x, spec, 100_000, np.random.default_rng(5))
    cov = np.cov(paths, rowvar=False)
    K = kernel_matrix(x, spec.kernel)
    diag = np.max(np.abs(np.diag(cov) / np.diag(K) - 1))
    off = np.max(np.abs((cov - K)[~np.eye(11, dtype=bool)]))
    report("P5", diag < 0.05 and off < 0.02, f"diag rel err {diag:.4f} (< 0.05), off-diag abs err {off:.4f} (< 0.02)")


# ------------------------------------------------------------------- P6


def test_p6_reference_correlation():
    ref = mc_reference(K_SPEC, F_RATE25, 100_000, Grid1D(201), seed=0)
    c_ku, c_kf = ref.correlation["ku"], ref.correlation["kf"]
    rate1 = mc_reference(K_SPEC, F_RATE1, 100_000, Grid1D(201), seed=0).correlation["ku"]
    ok = abs(c_ku - 0.725) <= 0.02 and c_kf <= 0.01
    report(
        "P6", ok,
        f"C(k,u) {c_ku:.4f} (0.725 +- 0.02), C(k,f) {c_kf:.4f} (<= 0.01); "
        f"info: with f rate 1, C(k,u) {rate1:.4f}",
    )


# ------------------------------------------------------------- P7, P11


@pytest.fixture(scope="module")
def gp_desk_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("gp_desk")
    args = ["reproduce", "gp-l1-s6", "--scale", "desk"]
    return {
        "a": run_cli(args, root / "a", threads=1),
        "b": run_cli(args, root / "b", threads=1),
        "threads": run_cli(args, root / "threads", threads=4),
    }


@pytest.mark.slow
def test_p7_desk_gp(gp_desk_runs):
    out = gp_desk_runs["a"]
    rows = read_csv(out / "metrics.csv")
    last = max(int(r["step"]) for r in rows)
    w0, w1 = metric(rows, "w1_gen_train", 0), metric(rows, "w1_gen_train", last)
    spec = [r for r in read_csv(out / "fig5_spectra.csv") if int(r["step"]) == last and r["index"] == "1"][0]
    eig_rel = abs(float(spec["generated"]) / float(spec["training"]) - 1)
    dmean = metric(rows, "sensor_mean_max_abs_diff", last)
    dstd = metric(rows, "sensor_std_max_abs_diff", last)
    ok = w1 < 0.5 * w0 and eig_rel < 0.25 and dmean < 0.15 and dstd < 0.15
    report(
        "P7", ok,
        f"(a) W1 {w1:.4f} vs 0.5 x step-0 {w0:.4f}; (b) top eigenvalue rel diff {eig_rel:.3f} (< 0.25); "
        f"(c) sensor mean diff {dmean:.3f}, std diff {dstd:.3f} (< 0.15)",
    )


@pytest.mark.slow
def test_p11_determinism(gp_desk_runs):
    a, b, t = ((gp_desk_runs[k] / "metrics.csv").read_bytes() for k in ("a", "b", "threads"))
    same_seed, threads = a == b, a == t
    report(
        "P11", same_seed and threads,
        f"metrics.csv byte-identical: repeat run {same_seed}, 1 vs 4 threads {threads} (gp-l1-s6 desk)",
    )


# ------------------------------------------------------------------- P8


@pytest.mark.slow
def test_p8_boundary_std(tmp_path):
    out = run_cli(["reproduce", "boundary-wgan", "--scale", "desk"], tmp_path / "run")
    rows = read_csv(out / "fig6_mean_std.csv")
    last = max(int(r["step"]) for r in rows)
    ends = {float(r["x"]): float(r["std"]) for r in rows
            if int(r["step"]) == last and r["field"] == "f" and abs(float(r["x"])) == 1.0}
    worst = max(ends.values())
    report("P8", len(ends) == 2 and worst < 0.05,
           f"generated std at x=-1 {ends.get(-1.0, np.nan):.4f}, x=+1 {ends.get(1.0, np.nan):.4f} (< 0.05)")


# ------------------------------------------------------------------- P9


@pytest.mark.slow
def test_p9_desk_forward(tmp_path):
    out = run_cli(["reproduce", "forward-case1", "--scale", "desk"], tmp_path / "run")
    summary = {r["metric"]: float(r["mean"]) for r in read_csv(out / "summary.csv")}
    em, es, ckf = summary["u_mean_rel_err"], summary["u_std_rel_err"], summary["C_kf"]
    ok = em < 0.10 and es < 0.25 and ckf < 0.10
    report(
        "P9", ok,
        f"u mean rel err {em:.4f} (< 0.10), u std rel err {es:.4f} (< 0.25), C(k,f) {ckf:.4f} (< 0.10), "
        "averaged over the selected late checkpoints",
    )


# ------------------------------------------------------------------ P10


def test_p10_overfit_mechanics():
    x = np.linspace(-1, 1, 11)
    spec = ProcessSpec(KernelSpec(1.0, 0.2))
    sampler = lambda n, r: sample_gp(x, spec, n, r)
    rng = np.random.default_rng(10)
    train, val, gen = sampler(1000, rng), sampler(1000, rng), sampler(1000, rng)
    row = overfit_report(train, val, gen, sampler, rng, n=1000, n_baseline=50)
    lo, hi = row.baseline_mean - 2 * row.baseline_std, row.baseline_mean + 2 * row.baseline_std
    true_ok = lo <= row.w1_gen_train <= hi and lo <= row.w1_gen_val <= hi
    copy = overfit_report(train, val, train.copy(), sampler, rng, n=1000, n_baseline=50)
    copy_ok = copy.w1_gen_train == 0.0 and copy.w1_gen_val > copy.baseline_mean / 2
    report(
        "P10", true_ok and copy_ok,
        f"true process: W1 gen-train {row.w1_gen_train:.4f}, gen-val {row.w1_gen_val:.4f} in "
        f"[{lo:.4f}, {hi:.4f}]; training copy: gen-train {copy.w1_gen_train}, gen-val {copy.w1_gen_val:.4f} "
        f"> {copy.baseline_mean / 2:.4f}",
    )


# ------------------------------------------------------------------ P12


@pytest.mark.slow
def test_p12_two_group_trainer(tmp_path):
    grid = Grid1D(201)
    paths = sample_sde(K_SPEC, F_RATE1, grid, 1000, np.random.default_rng(0), np.random.default_rng(1))
    lay1 = equidistant_layout(13, 2, 13)
    lay2 = equidistant_layout(n_u=1, single=0.0)
    groups = [collect_snapshots(paths, lay1, grid.points, index=0), SnapshotGroup(lay2, np.zeros((1000, 1)), 1)]
    n_steps = 10_000
    steps = tuple(range(0, n_steps + 1, 1000))
    cfg = gan.TrainConfig(n_steps=n_steps, batch_size=256, shuffle_kf=True, precision="float32",
                          checkpoint_steps=steps)
    rng = gan.init_rng(0)
    gen = gan.init_generator_set(20, rng, 32, 4)
    discs = gan.init_discriminators([lay1, lay2], rng, [32, 16])
    gan.train_pigan(groups, gen, discs, cfg, checkpoint_dir=tmp_path)
    noise = halton_gaussian_points(1, 10_000, 20)
    stds = []
    for s in steps:
        g = gan.load_checkpoint(tmp_path / gan.checkpoint_name(s)).gen
        stds.append(float(gan.gen_field(g, "u", np.zeros(len(noise)), noise).std(ddof=1)))
    rho = spearmanr(steps, stds).statistic
    report("P12", rho < 0 and len(steps) >= 5,
           f"Spearman rho {rho:.3f} (< 0) over {len(steps)} checkpoints, std u(0) "
           + " -> ".join(f"{v:.4f}" for v in stds))
