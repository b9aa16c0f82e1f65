import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from pigan import autodiff as ad
from pigan.autodiff import Graph
from pigan.nn import (
    AdamState,
    MlpParams,
    MlpSpec,
    NetLeaves,
    NonFiniteGradient,
    adam_step,
    init_mlp,
    mlp_forward,
)


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    g = Graph()
    net = NetLeaves(g, params.spec, "net")
    inp = g.leaf("x")
    feed = net.bind(params)
    feed[inp] = x
    return g.eval(mlp_forward(net, inp), feed)


def test_biases_are_zero_and_weights_within_xavier_bound():
    p = init_mlp(MlpSpec(5, 128, 4, 1), np.random.default_rng(0))
    assert all(np.all(b == 0.0) for b in p.biases)
    bound = np.sqrt(6.0 / (5 + 128))
    assert bound == pytest.approx(O.XAVIER_5_128, rel=1e-15)
    assert np.abs(p.weights[0]).max() <= bound
    # the draw actually fills the interval
    assert np.abs(p.weights[0]).max() > 0.95 * bound
    for w in p.weights:
        fan_in, fan_out = w.shape
        assert np.abs(w).max() <= np.sqrt(6.0 / (fan_in + fan_out))


def test_init_is_deterministic():
    spec = MlpSpec(3, 16, 2, 1)
    a = init_mlp(spec, np.random.default_rng(7))
    b = init_mlp(spec, np.random.default_rng(7))
    for x, y in zip(a.arrays(), b.arrays()):
        assert x.tobytes() == y.tobytes()


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(0, 4)
    with pytest.raises(ValueError):
        MlpSpec(2, 4, -1)


def test_zero_network_outputs_zero():
    spec = MlpSpec(3, 8, 3, 1)
    p = init_mlp(spec, np.random.default_rng(0))
    p = MlpParams(spec, [np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])
    out = forward(p, np.random.default_rng(1).normal(size=(5, 3)))
    np.testing.assert_array_equal(out, np.zeros((5, 1)))


def test_unit_network_examples():
    spec = MlpSpec(1, 1, 1, 1)
    p = MlpParams(spec, [np.ones((1, 1)), np.ones((1, 1))], [np.zeros(1), np.zeros(1)])
    assert forward(p, np.array([[0.0]]))[0, 0] == 0.0
    assert forward(p, np.array([[1.0]]))[0, 0] == pytest.approx(O.TANH_1, rel=1e-15)


@given(biases=st.lists(st.floats(-2, 2), min_size=2, max_size=6))
def test_bias_chain_closed_form(biases):
    # width-1 net with unit weights and input 0 is a tanh composition of the biases
    layers = len(biases) - 1
    spec = MlpSpec(1, 1, layers, 1)
    p = MlpParams(spec, [np.ones((1, 1))] * (layers + 1), [np.array([b]) for b in biases])
    h = 0.0
    for b in biases[:-1]:
        h = np.tanh(h + b)
    expected = h + biases[-1]
    assert forward(p, np.zeros((1, 1)))[0, 0] == expected


def test_width_mismatch_raises():
    p = init_mlp(MlpSpec(3, 4, 1, 1), np.random.default_rng(0))
    with pytest.raises(ValueError):
        forward(p, np.zeros((2, 4)))
    g = Graph()
    with pytest.raises(ValueError):
        NetLeaves(g, MlpSpec(2, 4, 1, 1), "n").bind(p)


@pytest.mark.parametrize("seed", range(4))
def test_parameter_gradients_match_differences(seed):
    rng = np.random.default_rng(seed)
    spec = MlpSpec(3, 6, 2, 1)
    p = init_mlp(spec, rng)
    p.biases = [rng.normal(scale=0.3, size=b.shape) for b in p.biases]
    x = rng.normal(size=(4, 3))
    g = Graph()
    net = NetLeaves(g, spec, "net")
    inp = g.leaf()
    out = ad.total(mlp_forward(net, inp))
    grads = g.grad(out, net.nodes)
    feed = net.bind(p)
    feed[inp] = x
    vals = g.eval(grads, feed)
    arrays = p.arrays()
    for arr, gv in zip(arrays, vals):
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]

            def f(v):
                arr[idx] = v
                r = float(forward(p, x).sum())
                arr[idx] = orig
                return r

            assert O.rel_err(gv[idx], O.fd1(f, orig), floor_frac=1.0) < 1e-4 or abs(gv[idx]) < 1e-9


def test_adam_zero_gradient_keeps_params():
    p = [np.array([1.0, -2.0])]
    s = AdamState.like(p)
    adam_step(s, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_first_step():
    p = [np.zeros(1)]
    s = AdamState.like(p)
    adam_step(s, p, [np.ones(1)])
    assert p[0][0] == pytest.approx(O.ADAM_FIRST_STEP, rel=1e-12)
    assert s.t == 1


def test_adam_constant_gradient_descends_by_lr():
    p = [np.zeros(1)]
    s = AdamState.like(p)
    prev = 0.0
    for t in range(200):
        adam_step(s, p, [np.array([0.7])])
        step = prev - p[0][0]
        assert step > 0
        if t > 50:
            assert step == pytest.approx(1e-4, rel=1e-6)
        prev = p[0][0]


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=20))
@settings(max_examples=50)
def test_adam_without_momentum_uses_raw_gradient(gs):
    p = [np.zeros(1)]
    s = AdamState.like(p)
    for gval in gs:
        grad = np.array([gval])
        adam_step(s, p, [grad])
        assert s.m_hat()[0][0] == grad[0]
        assert np.all(s.v[0] >= 0)


def test_adam_rejects_nonfinite_gradient_whole_step():
    p = [np.zeros(2), np.ones(3)]
    s = AdamState.like(p)
    with pytest.raises(NonFiniteGradient):
        adam_step(s, p, [np.ones(2), np.array([1.0, np.nan, 0.0])])
    assert s.t == 0
    np.testing.assert_array_equal(p[0], 0.0)
    np.testing.assert_array_equal(s.m[0], 0.0)
