import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from pigan.elliptic import Grid1D, ReferenceStats, SolverError, mc_reference, path_stats, solve_elliptic_fd
from pigan.processes import KernelSpec, MeanFn, ProcessSpec

K_SPEC = ProcessSpec(KernelSpec.from_rate(4 / 25, 1.0), MeanFn(0.0, 0.2, 1.5 * np.pi, 1.0), "exp")
F_SPEC = ProcessSpec(KernelSpec.from_rate(9 / 400, 25.0), MeanFn(0.5))


def test_zero_forcing_gives_zero():
    g = Grid1D(51)
    np.testing.assert_array_equal(solve_elliptic_fd(np.full(51, 2.0), np.zeros(51), g), 0.0)


def test_quadratic_solution():
    g = Grid1D(201)
    u = solve_elliptic_fd(np.ones(201), np.ones(201), g)
    assert u[100] == pytest.approx(5.0, rel=1e-12)
    np.testing.assert_allclose(u, O.u_quadratic(g.points), atol=1e-10)


def test_sine_solution_second_order():
    errs = []
    sizes = (51, 101, 201, 401)
    for m in sizes:
        x = Grid1D(m).points
        u = solve_elliptic_fd(np.ones(m), np.sin(np.pi * x))
        errs.append(np.abs(u - O.u_sine(x)).max())
    assert np.all(O.observed_orders(errs, sizes) >= 1.9)


@pytest.mark.parametrize("seed", range(5))
def test_matches_dense_assembly(seed):
    rng = np.random.default_rng(seed)
    m = 41
    k = np.exp(rng.normal(scale=0.5, size=m))
    f = rng.normal(size=m)
    np.testing.assert_allclose(solve_elliptic_fd(k, f), O.dense_fd_solve(k, f), rtol=1e-11, atol=1e-13)


def test_batched_equals_single():
    rng = np.random.default_rng(1)
    k = np.exp(rng.normal(size=(3, 31)))
    f = rng.normal(size=(3, 31))
    batch = solve_elliptic_fd(k, f)
    for i in range(3):
        assert batch[i].tobytes() == solve_elliptic_fd(k[i], f[i]).tobytes()


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_linear_in_forcing(seed):
    rng = np.random.default_rng(seed)
    m = 33
    k = np.exp(rng.normal(size=m))
    f1, f2 = rng.normal(size=(2, m))
    lhs = solve_elliptic_fd(k, f1 + f2)
    rhs = solve_elliptic_fd(k, f1) + solve_elliptic_fd(k, f2)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


@given(seed=st.integers(0, 2**32 - 1), c=st.floats(1e-3, 1e3))
@settings(max_examples=40)
def test_invariant_under_joint_scaling(seed, c):
    rng = np.random.default_rng(seed)
    m = 33
    k = np.exp(rng.normal(size=m))
    f = rng.normal(size=m)
    u = solve_elliptic_fd(k, f)
    uc = solve_elliptic_fd(c * k, c * f)
    assert np.linalg.norm(uc - u) <= 1e-10 * np.linalg.norm(u)


def test_solver_errors():
    with pytest.raises(SolverError):
        solve_elliptic_fd(np.array([1.0, 0.0, 1.0, 1.0]), np.ones(4))
    with pytest.raises(ValueError):
        solve_elliptic_fd(np.ones(5), np.ones(6))
    with pytest.raises(ValueError):
        Grid1D(2)


def test_degenerate_processes_have_zero_std():
    k = ProcessSpec(KernelSpec(0.0, 1.0), MeanFn(1.0))
    f = ProcessSpec(KernelSpec(0.0, 1.0), MeanFn(1.0))
    ref = mc_reference(k, f, 50, Grid1D(21))
    for name in ("k", "u", "f"):
        np.testing.assert_array_equal(ref.fields[name].std, 0.0)
    np.testing.assert_allclose(ref.fields["u"].mean, O.u_quadratic(Grid1D(21).points), atol=1e-12)


def test_single_path_rejected():
    with pytest.raises(ValueError):
        mc_reference(K_SPEC, F_SPEC, 1, Grid1D(21))


def test_reference_independent_of_workers_and_repeatable():
    a = mc_reference(K_SPEC, F_SPEC, 2500, Grid1D(41), seed=3, workers=1, chunk_size=500)
    b = mc_reference(K_SPEC, F_SPEC, 2500, Grid1D(41), seed=3, workers=4, chunk_size=500)
    for name in ("k", "u", "f"):
        assert a.fields[name].mean.tobytes() == b.fields[name].mean.tobytes()
        assert a.fields[name].std.tobytes() == b.fields[name].std.tobytes()
        assert a.fields[name].spectra.tobytes() == b.fields[name].spectra.tobytes()
    assert a.correlation == b.correlation


def test_reference_statistics_match_direct_estimates():
    ref = mc_reference(K_SPEC, F_SPEC, 1200, Grid1D(41), seed=0, chunk_size=500)
    assert ref.n_paths == 1200
    for name in ("k", "u", "f"):
        st_ = ref.fields[name]
        assert np.all(st_.std >= 0)
        assert np.all(np.diff(st_.spectra) <= 1e-12)
        assert st_.spectra.sum() == pytest.approx(np.sum(st_.std**2), rel=1e-9)


def test_path_stats_and_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = Grid1D(11)
    paths = {"f": rng.normal(size=(400, 11))}
    stats = path_stats(paths, g)
    np.testing.assert_allclose(stats.fields["f"].mean, paths["f"].mean(axis=0), atol=1e-13)
    np.testing.assert_allclose(stats.fields["f"].std, paths["f"].std(axis=0, ddof=1), rtol=1e-12)
    stats.save(tmp_path)
    back = ReferenceStats.load(tmp_path)
    np.testing.assert_array_equal(back.fields["f"].mean, stats.fields["f"].mean)
    np.testing.assert_array_equal(back.fields["f"].spectra, stats.fields["f"].spectra)
    assert back.n_paths == 400
