"""Fused output-layer forward/backward pass for the one-hidden-layer MLP (the default net).

Falls back to ``None`` when numba is unavailable; callers then use the
generic numpy path.
"""

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None


def _hidden_output_pass(H, X, A1, b1, gA1, gb1):
    # H: (n, d*m) hidden activations; overwritten with dL/dZ of the first layer.
    # A1: (d, m) output weights, b1: (d,) output biases.
    n, d = X.shape
    m = A1.shape[1]
    inv_n = 1.0 / n
    loss = 0.0
    for i in range(n):
        for j in range(d):
            off = j * m
            s = b1[j]
            for b in range(m):
                s += A1[j, b] * H[i, off + b]
            r = s - X[i, j]
            loss += r * r
            g = r * inv_n
            gb1[j] += g
            for b in range(m):
                h = H[i, off + b]
                gA1[j, b] += g * h
                H[i, off + b] = g * A1[j, b] * h * (1.0 - h)
    return 0.5 * loss * inv_n


if numba is not None:
    hidden_output_pass = numba.njit(cache=True, nogil=True)(_hidden_output_pass)
else:  # pragma: no cover
    hidden_output_pass = None
