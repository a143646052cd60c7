import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import central_fd, rel_err

from daglearn.errors import DimensionError
from daglearn.semmodel import (MlpSem, SobolevSem, mlp_forward, sobolev_features,
                               sobolev_scales, zero_column_normalize)


def random_theta(model, rng, scale=1.0):
    theta = scale * rng.standard_normal(model.param_count)
    theta[model.mask] = 0.0
    return theta


def random_layers(rng, d, hidden):
    dims = [d, *hidden, 1]
    return [(rng.standard_normal((dims[i + 1], dims[i])), rng.standard_normal(dims[i + 1]))
            for i in range(len(dims) - 1)]


# ---- MLP forward -----------------------------------------------------------

def test_mlp_forward_all_zero():
    layers = [(np.zeros((4, 3)), np.zeros(4)), (np.zeros((1, 4)), np.zeros(1))]
    np.testing.assert_array_equal(mlp_forward(layers, np.ones((5, 3))), 0.0)


def test_mlp_forward_single_hidden_unit():
    layers = [(np.zeros((1, 3)), np.zeros(1)), (np.array([[2.0]]), np.zeros(1))]
    np.testing.assert_allclose(mlp_forward(layers, np.random.randn(7, 3)), 1.0, rtol=0,
                               atol=1e-15)


def test_mlp_forward_dimension_mismatch():
    layers = [(np.zeros((2, 3)), np.zeros(2)), (np.zeros((1, 2)), np.zeros(1))]
    with pytest.raises(DimensionError):
        mlp_forward(layers, np.zeros((4, 2)))


def test_batched_predict_matches_per_node_forward(rng):
    d = 4
    for hidden in [(), (5,), (4, 3)]:
        model = MlpSem(d, hidden)
        theta = random_theta(model, rng)
        X = rng.standard_normal((30, d))
        pred = model.predict(theta, X)
        for j in range(d):
            np.testing.assert_allclose(pred[:, j], mlp_forward(model.node_layers(theta, j), X),
                                       rtol=1e-12, atol=1e-12)


def test_fused_and_numpy_paths_agree(rng):
    model = MlpSem(5, (7,))
    X = rng.standard_normal((40, 5))
    theta = random_theta(model, rng)
    l1, g1 = model.loss_and_grad(theta, X)
    l2, g2 = model._loss_and_grad_numpy(theta, X)
    assert l1 == pytest.approx(l2, rel=1e-13)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-14)


# ---- zero first-layer column <=> independence of that input ----------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5),
       st.lists(st.integers(1, 6), min_size=1, max_size=3))
def test_zero_column_implies_invariance(seed, d, hidden):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(d))
    layers = random_layers(rng, d, hidden)
    layers[0][0][:, k] = 0.0
    X = rng.standard_normal((25, d))
    Xp = X.copy()
    Xp[:, k] = rng.standard_normal(25) * 10
    assert np.max(np.abs(mlp_forward(layers, X) - mlp_forward(layers, Xp))) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5),
       st.lists(st.integers(1, 6), min_size=1, max_size=3))
def test_zero_column_normalize_preserves_outputs(seed, d, hidden):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(d))
    layers = random_layers(rng, d, hidden)
    normed = zero_column_normalize(layers, k)
    assert np.all(normed[0][0][:, k] == 0)
    X = rng.standard_normal((25, d))
    X[:, k] = 0.0
    assert np.max(np.abs(mlp_forward(layers, X) - mlp_forward(normed, X))) <= 1e-12
    # and for arbitrary u the normalized net computes f(u with u_k := 0)
    U = rng.standard_normal((25, d))
    U0 = U.copy()
    U0[:, k] = 0.0
    assert np.max(np.abs(mlp_forward(normed, U) - mlp_forward(layers, U0))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(1, 6))
def test_nonzero_column_implies_dependence(seed, d, m):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(d))
    layers = random_layers(rng, d, [m])
    probes = rng.standard_normal((200, d))
    moved = probes.copy()
    moved[:, k] += rng.uniform(1, 3, size=200) * rng.choice([-1, 1], size=200)
    diff = np.abs(mlp_forward(layers, probes) - mlp_forward(layers, moved))
    assert diff.max() > 1e-6


def test_adjacency_zero_implies_node_independence(rng):
    d = 4
    model = MlpSem(d, (6,))
    theta = random_theta(model, rng)
    p = model.unflatten(theta)
    p["A0"][2, :, 1] = 0.0  # cut edge 1 -> 2
    theta = model.flatten(p)
    assert model.adjacency(theta)[1, 2] == 0
    X = rng.standard_normal((20, d))
    Xp = X.copy()
    Xp[:, 1] += 5
    np.testing.assert_allclose(model.predict(theta, X)[:, 2], model.predict(theta, Xp)[:, 2],
                               atol=1e-12)


# ---- adjacency -------------------------------------------------------------

def test_mlp_adjacency_zero_and_single_entry():
    model = MlpSem(3, (1,))
    theta = np.zeros(model.param_count)
    np.testing.assert_array_equal(model.adjacency(theta), 0)
    p = model.unflatten(theta)
    p["A0"][2, 0, 0] = -1.7  # input 0 -> node 2
    W = model.adjacency(model.flatten(p))
    assert W[0, 2] == pytest.approx(1.7)
    assert np.count_nonzero(W) == 1


def test_mlp_adjacency_loop_oracle(rng):
    d, m = 4, 10
    model = MlpSem(d, (m,))
    theta = random_theta(model, rng)
    A0 = model.unflatten(theta)["A0"]
    W = model.adjacency(theta)
    for k in range(d):
        for j in range(d):
            col = [A0[j, b, k] for b in range(m)]
            assert W[k, j] == pytest.approx(math.sqrt(sum(c * c for c in col)), rel=1e-14)
    assert np.all(np.diag(W) == 0) and np.all(W >= 0)


def test_linear_special_case_adjacency_is_abs_weights(rng):
    d = 5
    model = MlpSem(d, ())
    theta = random_theta(model, rng)
    A = model.unflatten(theta)["A0"][:, 0, :]  # A[j, k]
    np.testing.assert_allclose(model.adjacency(theta), np.abs(A.T))
    X = rng.standard_normal((10, d))
    b = model.unflatten(theta)["b0"][:, 0]
    np.testing.assert_allclose(model.predict(theta, X), X @ A.T + b, atol=1e-12)


def test_mask_pins_self_and_forbidden_edges():
    forb = np.zeros((3, 3), dtype=int)
    forb[0, 1] = 1
    model = MlpSem(3, (4,), forbidden=forb)
    p = model.unflatten(model.mask.astype(float))
    A0 = p["A0"]
    for j in range(3):
        assert np.all(A0[j, :, j] == 1)
    assert np.all(A0[1, :, 0] == 1)
    assert A0.sum() == 4 * 4
    assert not p["A1"].any() and not p["b0"].any()


# ---- MLP loss / gradient ---------------------------------------------------

def test_mlp_loss_at_zero(rng):
    X = rng.standard_normal((20, 3))
    X -= X.mean(axis=0)
    model = MlpSem(3, (4,))
    loss, grad = model.loss_and_grad(np.zeros(model.param_count), X)
    assert loss == pytest.approx(0.5 / 20 * np.sum(X ** 2), rel=1e-14)
    fd = central_fd(lambda t: model.loss_and_grad(t, X)[0], np.zeros(model.param_count))
    fd[model.mask] = 0
    np.testing.assert_allclose(grad, fd, atol=1e-8)


def test_mlp_single_zero_sample():
    model = MlpSem(3, (4,))
    loss, grad = model.loss_and_grad(np.zeros(model.param_count), np.zeros((1, 3)))
    assert loss == 0.0 and not grad.any()


@pytest.mark.parametrize("hidden", [(), (5,), (4, 3)])
def test_mlp_gradient_fd(rng, hidden):
    X = rng.standard_normal((20, 3))
    model = MlpSem(3, hidden)
    for _ in range(3):
        theta = random_theta(model, rng)
        loss, grad = model.loss_and_grad(theta, X)
        fd = central_fd(lambda t: model.loss_and_grad(t, X)[0], theta)
        fd[model.mask] = 0
        assert rel_err(grad, fd) <= 1e-5


def test_mlp_gradient_masked_entries_zero(rng):
    model = MlpSem(4, (3,))
    X = rng.standard_normal((15, 4))
    _, grad = model.loss_and_grad(random_theta(model, rng), X)
    assert np.all(grad[model.mask] == 0)


def test_mlp_dimension_check():
    with pytest.raises(DimensionError):
        MlpSem(3).loss_and_grad(np.zeros(MlpSem(3).param_count), np.zeros((5, 4)))


def test_adjacency_jacobian_apply_fd(rng):
    for model in [MlpSem(4, (3,)), SobolevSem(4, 3)]:
        theta = random_theta(model, rng)
        G = rng.standard_normal((4, 4))
        fd = central_fd(lambda t: np.sum(G * model.adjacency(t)), theta)
        fd[model.mask] = 0
        assert rel_err(model.adjacency_jacobian_apply(theta, G), fd) <= 1e-6


# ---- Sobolev ---------------------------------------------------------------

def test_sobolev_features_zero():
    np.testing.assert_array_equal(sobolev_features(np.zeros(5), 4), 0.0)


def test_sobolev_first_basis_value():
    s1 = sobolev_scales(1)[0]
    assert s1 == pytest.approx(2 / math.pi)
    assert s1 == pytest.approx(0.63662, abs=1e-5)
    phi = sobolev_features(np.array([s1 * math.pi / 2]), 1)
    assert phi[0, 0] == pytest.approx(s1, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20), st.integers(1, 10))
def test_sobolev_basis_odd(u, R):
    np.testing.assert_allclose(sobolev_features(np.array([-u]), R),
                               -sobolev_features(np.array([u]), R), atol=1e-15)


def test_sobolev_adjacency():
    model = SobolevSem(3, n_basis=2)
    theta = np.zeros(model.param_count)
    np.testing.assert_array_equal(model.adjacency(theta), 0)
    p = model.unflatten(theta)
    p["alpha"][1, 2] = [3.0, 4.0]  # input 2 -> node 1
    W = model.adjacency(model.flatten(p))
    assert W[2, 1] == 5.0 and np.count_nonzero(W) == 1


def test_sobolev_adjacency_loop_oracle(rng):
    d, R = 4, 5
    model = SobolevSem(d, R)
    theta = random_theta(model, rng)
    alpha = theta.reshape(d, d, R)
    W = model.adjacency(theta)
    for k in range(d):
        for j in range(d):
            assert W[k, j] == pytest.approx(math.sqrt(sum(a * a for a in alpha[j, k])))


def test_sobolev_loss_at_zero(rng):
    X = rng.standard_normal((20, 3))
    model = SobolevSem(3, 4, lambda1=0.5)
    loss, grad = model.loss_and_grad(np.zeros(model.param_count), X)
    assert loss == pytest.approx(0.5 / 20 * np.sum(X ** 2))
    Phi = model.features(X)
    expected = -(X.T @ Phi.reshape(20, -1)).reshape(-1) / 20
    expected[model.mask] = 0
    np.testing.assert_allclose(grad, expected, atol=1e-14)


@pytest.mark.parametrize("lambda1", [0.0, 0.7])
def test_sobolev_gradient_fd(rng, lambda1):
    X = rng.standard_normal((20, 4))
    model = SobolevSem(4, 3, lambda1=lambda1)
    for _ in range(3):
        theta = random_theta(model, rng)
        _, grad = model.loss_and_grad(theta, X)
        fd = central_fd(lambda t: model.loss_and_grad(t, X)[0], theta)
        fd[model.mask] = 0
        assert rel_err(grad, fd) <= 1e-5


def test_sobolev_lambda1_zero_is_plain_least_squares(rng):
    X = rng.standard_normal((30, 3))
    model = SobolevSem(3, 2)
    theta = random_theta(model, rng)
    pred = model.predict(theta, X)
    assert model.loss_and_grad(theta, X)[0] == pytest.approx(0.5 / 30 * np.sum((X - pred) ** 2))


def test_sobolev_smoother_term(rng):
    X = rng.standard_normal((30, 3))
    theta = random_theta(SobolevSem(3, 2), rng)
    l0 = SobolevSem(3, 2).loss_and_grad(theta, X)[0]
    l1 = SobolevSem(3, 2, lambda1=2.0).loss_and_grad(theta, X)[0]
    alpha = theta.reshape(3, 3, 2)
    extra = 0.0
    for j in range(3):
        for k in range(3):
            if k != j:
                v = sobolev_features(X[:, k], 2) @ alpha[j, k]
                extra += v @ v / 30
    assert l1 - l0 == pytest.approx(2.0 * extra, rel=1e-12)


# ---- ridge -----------------------------------------------------------------

@pytest.mark.parametrize("hidden", [(), (5,), (4, 3)])
def test_ridge_value_and_gradient(rng, hidden):
    X = rng.standard_normal((20, 3))
    plain, ridged = MlpSem(3, hidden), MlpSem(3, hidden, ridge=0.4)
    theta = random_theta(plain, rng)
    p = plain.unflatten(theta)
    weights = sum(np.sum(p[f"A{l}"] ** 2) for l in range(plain.n_layers))
    assert ridged.loss_and_grad(theta, X)[0] == pytest.approx(
        plain.loss_and_grad(theta, X)[0] + 0.2 * weights, rel=1e-13)
    _, grad = ridged.loss_and_grad(theta, X)
    fd = central_fd(lambda t: ridged.loss_and_grad(t, X)[0], theta)
    fd[ridged.mask] = 0
    assert rel_err(grad, fd) <= 1e-5
    assert np.all(grad[ridged.mask] == 0)


def test_ridge_ignores_biases(rng):
    model = MlpSem(3, (2,), ridge=1.0)
    theta = np.zeros(model.param_count)
    p = model.unflatten(theta)
    p["b0"][:] = 5.0
    p["b1"][:] = -2.0
    X = np.zeros((4, 3))
    base = MlpSem(3, (2,)).loss_and_grad(model.flatten(p), X)[0]
    assert model.loss_and_grad(model.flatten(p), X)[0] == pytest.approx(base)


def test_ridge_negative_rejected():
    with pytest.raises(ValueError):
        MlpSem(3, ridge=-0.1)
