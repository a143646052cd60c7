"""Parametric structural-equation estimators with a differentiable adjacency.

Two families share one contract (:class:`SemModel`):

* :class:`MlpSem` -- one MLP per node. ``W[k, j]`` is the l2 norm of column k
  of node j's first-layer weight matrix.
* :class:`SobolevSem` -- additive expansion ``f_j = sum_k Phi_k a_jk`` in the
  sine basis ``phi_r(u) = s_r sin(u / s_r)``, ``s_r = 2 / ((2r - 1) pi)``.
  ``W[k, j] = ||a_jk||_2``.

The parameter vector ``theta`` is a flat float64 array.  Both models return
only the smooth part of the objective from ``loss_and_grad``; the l1 penalty
on ``l1_index`` is handled by the solver through a nonnegative split.

Squared loss convention: ``(1 / (2n)) * sum_j ||x_j - f_j(X)||^2``.
"""

import numpy as np

from ._kernels import hidden_output_pass
from .errors import DimensionError, DivergedError


def sigmoid(s, out=None):
    # numpy's SIMD exp is several times faster than scipy.special.expit
    out = np.negative(s, out=out)
    with np.errstate(over="ignore"):
        np.exp(out, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    return out


def _local_linear(H, A):
    """Per-node affine map without bias: (n, d, m_in) x (d, m_out, m_in) -> (n, d, m_out)."""
    if A.shape[1] == 1:
        return np.sum(H * A[:, 0, :], axis=2, keepdims=True)
    return np.matmul(H.transpose(1, 0, 2), A.transpose(0, 2, 1)).transpose(1, 0, 2)


def _local_linear_weight_grad(dZ, H):
    if dZ.shape[2] == 1:
        return np.sum(dZ * H, axis=0)[:, None, :]
    return np.matmul(dZ.transpose(1, 2, 0), H.transpose(1, 0, 2))


def _local_linear_input_grad(dZ, A):
    if A.shape[1] == 1:
        return dZ * A[:, 0, :]
    return np.matmul(dZ.transpose(1, 0, 2), A).transpose(1, 0, 2)


def _check_data(X, d):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionError(f"expected data with {d} columns, got shape {X.shape}")
    return X


def _forbidden_matrix(d, forbidden):
    F = np.eye(d, dtype=bool)
    if forbidden is not None:
        forbidden = np.asarray(forbidden)
        if forbidden.shape != (d, d):
            raise DimensionError(f"mask must be {d}x{d}, got {forbidden.shape}")
        F |= forbidden != 0
    return F


class SemModel:
    """Shared plumbing: flat parameter layout, bounds, masks and init.

    Subclasses fill ``self._shapes`` (name -> shape, in flat order), build
    ``self.mask`` (True = pinned to 0) and ``self.l1_index``.
    """

    d = 0

    def _layout(self, shapes):
        self._shapes = list(shapes)
        self._slices = {}
        start = 0
        for name, shape in self._shapes:
            size = int(np.prod(shape))
            self._slices[name] = slice(start, start + size)
            start += size
        self.param_count = start

    @property
    def forbidden(self):
        return self._forbidden.copy()

    def unflatten(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_count,):
            raise DimensionError(f"expected {self.param_count} parameters, got {theta.shape}")
        return {name: theta[self._slices[name]].reshape(shape)
                for name, shape in self._shapes}

    def flatten(self, params):
        theta = np.zeros(self.param_count)
        for name, shape in self._shapes:
            theta[self._slices[name]] = np.asarray(params[name], dtype=np.float64).reshape(-1)
        return theta

    def bounds(self):
        """Per-index (lower, upper) in theta-space; masked entries are (0, 0)."""
        return [(0.0, 0.0) if m else (None, None) for m in self.mask]

    def l1_mask(self):
        out = np.zeros(self.param_count, dtype=bool)
        out[self.l1_index] = True
        return out

    def _finish(self, loss, grad):
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise DivergedError("model loss is non-finite")
        grad[self.mask] = 0.0
        return float(loss), grad


class MlpSem(SemModel):
    """Per-node MLPs ``R^d -> R`` with sigmoid hidden layers and affine output.

    ``hidden=()`` gives a linear SEM: the first layer maps straight to the
    output and ``W`` is the absolute weight matrix.

    ``ridge`` adds ``ridge/2 * ||A||^2`` over every weight matrix (biases
    excluded).  Without it the l1 term on the first layer can be dodged by
    shrinking that layer and inflating the unpenalized ones.
    """

    def __init__(self, d, hidden=(10,), forbidden=None, ridge=0.0):
        if d < 1:
            raise ValueError("d must be positive")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        self.d = d
        self.ridge = float(ridge)
        self.hidden = tuple(int(h) for h in hidden)
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")
        self.dims = (d,) + self.hidden + (1,)
        shapes = []
        for layer in range(len(self.dims) - 1):
            shapes.append((f"A{layer}", (d, self.dims[layer + 1], self.dims[layer])))
            shapes.append((f"b{layer}", (d, self.dims[layer + 1])))
        self._layout(shapes)
        self._forbidden = _forbidden_matrix(d, forbidden)
        mask = {name: np.zeros(shape, dtype=bool) for name, shape in self._shapes}
        # A0[j, :, k] feeds input k into node j
        mask["A0"][:] = self._forbidden.T[:, None, :]
        self.mask = self.flatten(mask).astype(bool)
        idx = np.arange(self.param_count)
        self.l1_index = idx[self._slices["A0"]][~self.mask[self._slices["A0"]]]
        weights = np.zeros(self.param_count, dtype=bool)
        for layer in range(self.n_layers):
            weights[self._slices[f"A{layer}"]] = True
        self._weight_index = np.flatnonzero(weights)

    @property
    def n_layers(self):
        return len(self.dims) - 1

    def init_params(self, rng):
        params = {}
        for layer in range(self.n_layers):
            shape_a = (self.d, self.dims[layer + 1], self.dims[layer])
            if layer == 0:
                params["A0"] = rng.uniform(-0.1, 0.1, size=shape_a)
            else:
                bound = 1.0 / np.sqrt(self.dims[layer])
                params[f"A{layer}"] = rng.uniform(-bound, bound, size=shape_a)
            params[f"b{layer}"] = np.zeros((self.d, self.dims[layer + 1]))
        theta = self.flatten(params)
        theta[self.mask] = 0.0
        return theta

    def _forward(self, theta, X):
        # activations kept batch-major: (n, d, m)
        p = self.unflatten(theta)
        n, d = X.shape
        m1 = self.dims[1]
        Z = (X @ p["A0"].reshape(d * m1, d).T + p["b0"].reshape(-1)).reshape(n, d, m1)
        acts = []
        for layer in range(1, self.n_layers):
            H = sigmoid(Z)
            acts.append(H)
            Z = _local_linear(H, p[f"A{layer}"]) + p[f"b{layer}"]
        return p, acts, Z[:, :, 0]

    def predict(self, theta, X):
        """Predictions for every node, shape (n, d)."""
        X = _check_data(X, self.d)
        return self._forward(theta, X)[2]

    def loss_and_grad(self, theta, X):
        X = _check_data(X, self.d)
        if self.n_layers == 2 and hidden_output_pass is not None:
            loss, grad = self._loss_and_grad_fused(theta, X)
        else:
            loss, grad = self._loss_and_grad_numpy(theta, X)
        if self.ridge:
            w = theta[self._weight_index]
            loss += 0.5 * self.ridge * float(w @ w)
            grad[self._weight_index] += self.ridge * w
            grad[self.mask] = 0.0
        return loss, grad

    def _loss_and_grad_fused(self, theta, X):
        p = self.unflatten(theta)
        n, d = X.shape
        m = self.dims[1]
        Z = X @ p["A0"].reshape(d * m, d).T
        Z += p["b0"].reshape(-1)
        sigmoid(Z, out=Z)
        gA1 = np.zeros((d, m))
        gb1 = np.zeros(d)
        loss = hidden_output_pass(Z, np.ascontiguousarray(X), p["A1"][:, 0, :].copy(),
                                  p["b1"][:, 0].copy(), gA1, gb1)
        grad = np.empty(self.param_count)
        grad[self._slices["A0"]] = (Z.T @ X).reshape(-1)
        grad[self._slices["b0"]] = Z.sum(axis=0)
        grad[self._slices["A1"]] = gA1.reshape(-1)
        grad[self._slices["b1"]] = gb1
        return self._finish(loss, grad)

    def _loss_and_grad_numpy(self, theta, X):
        n, d = X.shape
        p, acts, pred = self._forward(theta, X)
        resid = pred - X
        loss = 0.5 / n * np.sum(resid ** 2)
        grads = {}
        dZ = (resid / n)[:, :, None]  # (n, d, 1)
        for layer in range(self.n_layers - 1, 0, -1):
            H = acts[layer - 1]
            A = p[f"A{layer}"]
            grads[f"A{layer}"] = _local_linear_weight_grad(dZ, H)
            grads[f"b{layer}"] = dZ.sum(axis=0)
            dZ = _local_linear_input_grad(dZ, A) * H * (1.0 - H)
        dZ0 = dZ.reshape(n, -1)
        grads["A0"] = (dZ0.T @ X).reshape(d, -1, d)
        grads["b0"] = dZ0.sum(axis=0).reshape(d, -1)
        return self._finish(loss, self.flatten(grads))

    def adjacency(self, theta):
        A0 = self.unflatten(theta)["A0"]
        return np.sqrt(np.sum(A0 ** 2, axis=1)).T

    def adjacency_jacobian_apply(self, theta, G_w):
        """Pull a cotangent ``G_w`` on ``W(theta)`` back to theta-space.

        Where a column norm is exactly zero the (sub)gradient is taken as 0.
        """
        A0 = self.unflatten(theta)["A0"]
        norms = np.sqrt(np.sum(A0 ** 2, axis=1))  # (j, k)
        scale = np.divide(np.asarray(G_w).T, norms, out=np.zeros_like(norms),
                          where=norms > 0)
        out = np.zeros(self.param_count)
        out[self._slices["A0"]] = (A0 * scale[:, None, :]).reshape(-1)
        out[self.mask] = 0.0
        return out

    def node_layers(self, theta, j):
        """Layer list ``[(A, b), ...]`` for node j, usable with :func:`mlp_forward`."""
        p = self.unflatten(theta)
        return [(p[f"A{layer}"][j].copy(), p[f"b{layer}"][j].copy())
                for layer in range(self.n_layers)]


def mlp_forward(layers, X):
    """Evaluate one node's MLP on rows of X.

    ``layers`` is a list of ``(A, b)`` with ``A`` of shape (m_out, m_in).
    Sigmoid follows every layer except the last, which is affine.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layers[0][0].shape[1]:
        raise DimensionError(f"input width {X.shape} does not match first layer "
                             f"{layers[0][0].shape}")
    H = X
    for i, (A, b) in enumerate(layers):
        H = H @ A.T + b
        if i < len(layers) - 1:
            H = sigmoid(H)
    return H[:, 0]


def zero_column_normalize(layers, k):
    """Zero column k of the first layer.

    The result computes ``f(u~)`` where ``u~`` is ``u`` with coordinate k set
    to 0, so it agrees with the original network on every input whose k-th
    coordinate is 0, and is independent of coordinate k everywhere.
    """
    out = [(A.copy(), b.copy()) for A, b in layers]
    out[0][0][:, k] = 0.0
    return out


def sobolev_scales(R):
    r = np.arange(1, R + 1)
    return 2.0 / ((2 * r - 1) * np.pi)


def sobolev_features(x, R):
    """Basis matrix ``Phi[i, r] = s_r sin(x[i] / s_r)``, shape (n, R)."""
    if R < 1:
        raise ValueError("R must be at least 1")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    s = sobolev_scales(R)
    return s[None, :] * np.sin(x[:, None] / s[None, :])


class SobolevSem(SemModel):
    """Additive sine-basis SEM with an optional quadratic smoother.

    Smooth objective::

        (1/(2n)) sum_j ||x_j - sum_k Phi_k a_jk||^2
            + lambda1 * sum_{j,k} (1/n) a_jk' Phi_k' Phi_k a_jk
    """

    def __init__(self, d, n_basis=10, lambda1=0.0, forbidden=None):
        if n_basis < 1:
            raise ValueError("n_basis must be at least 1")
        if lambda1 < 0:
            raise ValueError("lambda1 must be nonnegative")
        self.d = d
        self.n_basis = int(n_basis)
        self.lambda1 = float(lambda1)
        self._layout([("alpha", (d, d, self.n_basis))])
        self._forbidden = _forbidden_matrix(d, forbidden)
        mask = np.broadcast_to(self._forbidden.T[:, :, None], (d, d, self.n_basis))
        self.mask = mask.reshape(-1).copy()
        self.l1_index = np.flatnonzero(~self.mask)
        self._cache = (None, None, None)

    def init_params(self, rng):
        theta = rng.uniform(-0.1, 0.1, size=self.param_count)
        theta[self.mask] = 0.0
        return theta

    def features(self, X):
        """Stacked basis matrices, shape (n, d, R); cached for the last X seen."""
        X = _check_data(X, self.d)
        cached_X, Phi, _ = self._cache
        if cached_X is not None and cached_X is X:
            return Phi
        Phi = np.stack([sobolev_features(X[:, k], self.n_basis)
                        for k in range(self.d)], axis=1)
        gram = np.einsum("nkr,nks->krs", Phi, Phi)
        self._cache = (X, Phi, gram)
        return Phi

    def predict(self, theta, X):
        X = _check_data(X, self.d)
        Phi = self.features(X)
        n = X.shape[0]
        alpha = self.unflatten(theta)["alpha"]
        return Phi.reshape(n, -1) @ alpha.reshape(self.d, -1).T

    def loss_and_grad(self, theta, X):
        X = _check_data(X, self.d)
        n = X.shape[0]
        Phi = self.features(X)
        gram = self._cache[2]
        alpha = self.unflatten(theta)["alpha"]
        Phi_flat = Phi.reshape(n, -1)
        resid = Phi_flat @ alpha.reshape(self.d, -1).T - X
        loss = 0.5 / n * np.sum(resid ** 2)
        grad = (resid.T @ Phi_flat) / n
        if self.lambda1 > 0:
            G_alpha = np.einsum("krs,jks->jkr", gram, alpha)
            loss += self.lambda1 / n * np.sum(alpha * G_alpha)
            grad = grad + (2.0 * self.lambda1 / n) * G_alpha.reshape(self.d, -1)
        return self._finish(loss, grad.reshape(-1))

    def adjacency(self, theta):
        alpha = self.unflatten(theta)["alpha"]
        return np.sqrt(np.sum(alpha ** 2, axis=2)).T

    def adjacency_jacobian_apply(self, theta, G_w):
        alpha = self.unflatten(theta)["alpha"]
        norms = np.sqrt(np.sum(alpha ** 2, axis=2))  # (j, k)
        scale = np.divide(np.asarray(G_w).T, norms, out=np.zeros_like(norms),
                          where=norms > 0)
        out = (alpha * scale[:, :, None]).reshape(-1)
        out[self.mask] = 0.0
        return out
