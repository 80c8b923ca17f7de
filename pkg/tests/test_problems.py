import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexgt.problems import (
    grad,
    heterogeneity,
    make_least_squares,
    make_nonconvex,
    make_ridge,
    optimum,
    problem_from_dict,
    stoch_grad,
)


def scalar_ridge(vbar=0.0, sigma=0.0):
    return make_ridge(1, 1, 1.0, sigma, H=[[1.0]], vbar=[vbar])


def central_diff(f, x, h=1e-6):
    g = np.zeros_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e[d] = h
        g[d] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_scalar_ridge_by_hand():
    prob = scalar_ridge()
    assert prob.value(np.array([2.0])) == pytest.approx(4 + 2)
    assert grad(prob, 0, [2.0]) == pytest.approx([6.0])
    assert prob.L == pytest.approx(3.0)


def test_scalar_ridge_optimum():
    assert optimum(scalar_ridge(vbar=1.0)) == pytest.approx([2 / 3])


def test_ridge_L_recorded():
    prob = make_ridge(20, 10, 0.001, 0.1, seed=7)
    H = np.random.default_rng(7).random((20, 10))
    assert np.array_equal(prob.H, H)
    assert prob.L == pytest.approx(2 * np.max(np.sum(H**2, axis=1)) + 0.001, rel=1e-15)
    assert prob.regime == "strongly_convex"


@pytest.mark.parametrize("kw", [dict(mu=0.0), dict(mu=-1.0), dict(sigma=-0.1), dict(n=0)])
def test_make_ridge_rejects(kw):
    args = dict(n=3, p=2, mu=1.0, sigma=0.0) | kw
    with pytest.raises(ValueError):
        make_ridge(**args)


def test_ridge_lipschitz_sampling():
    prob = make_ridge(8, 5, 0.3, 0.0, seed=1)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x, y = rng.normal(size=(2, 5)) * 3
        i = int(rng.integers(8))
        assert np.linalg.norm(grad(prob, i, x) - grad(prob, i, y)) <= prob.L * np.linalg.norm(x - y) * (1 + 1e-12)


def test_ridge_gradient_fd():
    prob = make_ridge(4, 6, 0.5, 0.0, seed=3)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=6)
        for i in range(4):
            f = lambda z: prob.local_values(np.tile(z, (4, 1)))[i]
            fd = central_diff(f, x)
            assert np.linalg.norm(grad(prob, i, x) - fd) <= 1e-7 * max(1.0, np.linalg.norm(fd))


def test_ridge_optimality_residual():
    prob = make_ridge(20, 10, 0.01, 0.0, seed=2)
    xs = optimum(prob)
    assert np.linalg.norm(prob.full_grad(xs)) <= 1e-9
    f0 = prob.value(xs)
    for d in range(10):
        for eps in (1e-3, -1e-3):
            x = xs.copy()
            x[d] += eps
            assert prob.value(x) > f0


def test_ridge_f_gap_exact_quadratic():
    prob = make_ridge(6, 3, 0.2, 0.0, seed=4)
    x = np.array([0.3, -1.0, 2.0])
    assert prob.f_gap(x, prob.f_star()) == pytest.approx(prob.value(x) - prob.f_star(), rel=1e-10)


def test_grad_index_error():
    with pytest.raises(IndexError):
        grad(scalar_ridge(), 1, [0.0])


def test_stoch_grad_zero_noise():
    prob = make_ridge(3, 4, 1.0, 0.0, seed=0)
    s = stoch_grad(prob, 2, np.ones(4), np.random.default_rng(0))
    assert np.array_equal(s.value, grad(prob, 2, np.ones(4)))
    assert s.node == 2 and np.array_equal(s.snapshot, np.ones(4))


@pytest.mark.parametrize("family", ["ridge", "nonconvex"])
def test_stoch_grad_unbiased_and_variance(family):
    sigma, p, N = 0.3, 5, 100_000
    prob = make_ridge(3, p, 1.0, sigma, seed=0) if family == "ridge" else make_nonconvex(3, p, sigma, seed=0)
    x = np.linspace(-1, 1, p)
    X = np.tile(x, (prob.n, 1))
    rng = np.random.default_rng(5)
    # N oracle calls at once: each call draws an (n, p) block
    G = prob.local_grads(X)[None] + prob.noise_scale * rng.standard_normal((N, prob.n, p))
    exact = prob.local_grads(X)
    mean = G.mean(axis=0)
    assert np.all(np.abs(mean - exact) <= 3 * (sigma / np.sqrt(p * N)) * np.sqrt(p))
    var = np.mean(np.sum((G - exact) ** 2, axis=2))
    assert abs(var - sigma**2) <= 0.05 * sigma**2
    # the same draw through the library oracle
    g = prob.sample_grads(X, np.random.default_rng(5))
    assert np.allclose(g, exact + prob.noise_scale * np.random.default_rng(5).standard_normal((prob.n, p)))


def test_per_coordinate_noise_scale():
    prob = make_ridge(2, 4, 1.0, 0.5, seed=0, noise="per_coordinate")
    assert prob.noise_scale == 0.5
    assert make_ridge(2, 4, 1.0, 0.5, seed=0).noise_scale == pytest.approx(0.25)


def test_nonconvex_gradient_at_origin():
    prob = make_nonconvex(3, 4, 0.0, seed=2)
    # at x = 0 all margins vanish, so the logistic part is -(1/2m) sum_j b_j a_j
    expected = np.array([-(prob.b[i][:, None] * prob.A[i]).sum(axis=0) / (2 * prob.m) for i in range(3)])
    for i in range(3):
        assert np.allclose(grad(prob, i, np.zeros(4)), expected[i], atol=1e-15)


def test_nonconvex_lambda_zero_is_convex():
    prob = make_nonconvex(2, 3, 0.0, seed=0, lam=0.0)
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, y = rng.normal(size=(2, 3)) * 2
        t = rng.random()
        assert prob.value(t * x + (1 - t) * y) <= t * prob.value(x) + (1 - t) * prob.value(y) + 1e-12


def test_nonconvex_is_nonconvex():
    prob = make_nonconvex(1, 1, 0.0, seed=0, m=1, lam=1.0)
    xs = np.linspace(-4, 4, 801)
    vals = np.array([prob.value(np.array([x])) for x in xs])
    assert np.any(np.diff(vals, 2) < 0)


def test_nonconvex_gradient_fd():
    prob = make_nonconvex(4, 6, 0.0, seed=1)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.normal(size=6)
        i = int(rng.integers(4))
        f = lambda z: prob.local_values(np.tile(z, (4, 1)))[i]
        fd = central_diff(f, x)
        g = grad(prob, i, x)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-3)


def test_nonconvex_smoothness_sampling():
    prob = make_nonconvex(5, 4, 0.0, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(500):
        x, y = rng.normal(size=(2, 4)) * 2
        i = int(rng.integers(5))
        assert np.linalg.norm(grad(prob, i, x) - grad(prob, i, y)) <= prob.L * np.linalg.norm(x - y) * (1 + 1e-12)
    assert prob.f_star() == 0.0
    assert prob.optimum() is None


def test_least_squares_is_convex_family():
    prob = make_least_squares(5, 3, 0.1, seed=0)
    assert prob.regime == "convex" and prob.mu == 0.0
    assert np.linalg.norm(prob.full_grad(prob.optimum())) <= 1e-9


def test_heterogeneity():
    assert heterogeneity(scalar_ridge(), np.array([3.0])) == 0.0
    same = make_ridge(4, 2, 1.0, 0.0, H=np.ones((4, 2)), vbar=np.full(4, 0.5))
    assert heterogeneity(same, np.array([1.0, -2.0])) == pytest.approx(0.0, abs=1e-28)
    prob = make_ridge(5, 3, 1.0, 0.0, seed=1)
    grads = [grad(prob, i, np.zeros(3)) for i in range(5)]
    mean = sum(grads) / 5
    direct = sum(float(np.sum((g - mean) ** 2)) for g in grads) / 5
    assert heterogeneity(prob, np.zeros(3)) == pytest.approx(direct, rel=1e-12)
    assert direct > 0
    assert heterogeneity(prob, [np.zeros(3), np.ones(3)]) >= direct


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.floats(0.01, 5.0), st.integers(0, 1000))
def test_ridge_serialization_roundtrip(n, p, mu, seed):
    prob = make_ridge(n, p, mu, 0.1, seed=seed)
    back = problem_from_dict(json.loads(prob.to_json()))
    x = np.arange(p, dtype=float)
    assert back.L == prob.L and back.value(x) == prob.value(x)
    assert np.array_equal(back.optimum(), prob.optimum())


def test_nonconvex_serialization_roundtrip():
    prob = make_nonconvex(3, 4, 0.2, seed=9)
    back = problem_from_dict(json.loads(prob.to_json()))
    assert back.L == prob.L and back.value(np.ones(4)) == prob.value(np.ones(4))
