"""Dense linear-algebra primitives: matrix exponential and jittered Cholesky.

``expm`` follows the scaling-and-squaring scheme of Higham (2005): pick the
lowest Padé degree m in {3, 5, 7, 9, 13} whose backward-error bound
``theta_m`` covers ``||M||_1``; above ``theta_13`` the matrix is scaled by
``2**-s`` so that the degree-13 approximant applies, and the result is squared
``s`` times.
"""

import numpy as np

from .errors import DimensionError, DomainError, NotPSDError

# Backward-error thresholds for double precision (Higham 2005, Table 2.3).
PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}

JITTER_ESCALATIONS = 6


def _as_square(M):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DimensionError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    return M


def _pade_low(A, m):
    b = PADE_COEFFS[m]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    U = b[1] * ident
    V = b[0] * ident
    power = ident
    for i in range(1, m // 2 + 1):
        power = power @ A2
        U = U + b[2 * i + 1] * power
        V = V + b[2 * i] * power
    return A @ U, V


def _pade13(A):
    b = PADE_COEFFS[13]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def expm(M):
    """Matrix exponential of a square float matrix.

    Raises DimensionError for non-square input and DomainError for NaN/inf.
    """
    A = _as_square(M)
    norm = np.linalg.norm(A, 1)
    for m in (3, 5, 7, 9):
        if norm <= PADE_THETA[m]:
            U, V = _pade_low(A, m)
            return np.linalg.solve(V - U, V + U)
    s = 0
    if norm > PADE_THETA[13]:
        s = max(0, int(np.ceil(np.log2(norm / PADE_THETA[13]))))
    A = A / (2.0 ** s)
    U, V = _pade13(A)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def cholesky_psd(M, jitter=0.0, return_jitter=False):
    """Lower Cholesky factor of ``M + jitter*I``.

    If factorization fails the jitter is multiplied by 10 (starting from 1e-12
    when ``jitter`` is 0) up to six times before giving up with NotPSDError.
    The returned factor corresponds to the jitter actually used, which is
    also returned when ``return_jitter`` is set.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-10 * scale:
        raise DomainError("matrix is not symmetric")
    if jitter < 0:
        raise DomainError("jitter must be nonnegative")
    ident = np.eye(M.shape[0])
    eps = float(jitter)
    for attempt in range(JITTER_ESCALATIONS + 1):
        try:
            L = np.linalg.cholesky(M + eps * ident)
            return (L, eps) if return_jitter else L
        except np.linalg.LinAlgError:
            if attempt == JITTER_ESCALATIONS:
                break
            eps = eps * 10.0 if eps > 0 else 1e-12
    raise NotPSDError(f"Cholesky failed after {JITTER_ESCALATIONS} jitter escalations "
                      f"(last jitter {eps:g})")


def rbf_kernel(U, V=None, length_scale=1.0):
    """RBF kernel exp(-||u - v||^2 / (2 l^2)) between rows of U and V.

    1-D inputs are treated as n points in one dimension.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim == 1:
        U = U[:, None]
    if V is None:
        V = U
    else:
        V = np.asarray(V, dtype=np.float64)
        if V.ndim == 1:
            V = V[:, None]
    sq = (np.sum(U ** 2, axis=1)[:, None] + np.sum(V ** 2, axis=1)[None, :]
          - 2.0 * U @ V.T)
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-0.5 * sq / length_scale ** 2)
    if V is U:
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K
