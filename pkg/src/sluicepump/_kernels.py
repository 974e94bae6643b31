"""Hot loops of the cycle integrator.

The reduced state is the real 3-vector ``x = (rho_gg, Re rho_ge, Im rho_ge)``
and the master equation is affine in it: ``dx/dt = M(t) x + c(t)``. For every
step the caller supplies ``M`` and ``c`` at the three RK4 sample times
(start, midpoint, end) and, optionally, affine frame maps applied before and
after the step.

Two interchangeable implementations:

* :func:`propagate_numba` - fused sequential RK4 loop compiled with numba;
* :func:`propagate_numpy` - per-step 4x4 homogeneous propagators built in one
  vectorized pass, composed with a parallel prefix product.

:func:`propagate` dispatches on :data:`sluicepump._accel.USE_NUMBA`.
"""

import numpy as np

from . import _accel
from ._accel import njit


@njit
def _propagate_loop(M, c, dt, pre, post, use_frames, X0):
    n_steps = M.shape[0]
    n_states = X0.shape[0]
    out = np.empty((n_steps + 1, n_states, 3))
    x = X0.copy()
    out[0] = x
    y = np.empty(3)
    k1 = np.empty(3)
    k2 = np.empty(3)
    k3 = np.empty(3)
    k4 = np.empty(3)
    tmp = np.empty(3)
    for n in range(n_steps):
        h = dt[n]
        for s in range(n_states):
            if use_frames:
                for i in range(3):
                    y[i] = pre[n, i, 3]
                    for j in range(3):
                        y[i] += pre[n, i, j] * x[s, j]
            else:
                for i in range(3):
                    y[i] = x[s, i]
            for i in range(3):
                k1[i] = c[n, 0, i]
                for j in range(3):
                    k1[i] += M[n, 0, i, j] * y[j]
            for i in range(3):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            for i in range(3):
                k2[i] = c[n, 1, i]
                for j in range(3):
                    k2[i] += M[n, 1, i, j] * tmp[j]
            for i in range(3):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            for i in range(3):
                k3[i] = c[n, 1, i]
                for j in range(3):
                    k3[i] += M[n, 1, i, j] * tmp[j]
            for i in range(3):
                tmp[i] = y[i] + h * k3[i]
            for i in range(3):
                k4[i] = c[n, 2, i]
                for j in range(3):
                    k4[i] += M[n, 2, i, j] * tmp[j]
            for i in range(3):
                tmp[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if use_frames:
                for i in range(3):
                    x[s, i] = post[n, i, 3]
                    for j in range(3):
                        x[s, i] += post[n, i, j] * tmp[j]
            else:
                for i in range(3):
                    x[s, i] = tmp[i]
        out[n + 1] = x
    return out


def propagate_numba(M, c, dt, pre, post, X0):
    use_frames = pre is not None
    if not use_frames:
        pre = np.zeros((1, 3, 4))
        post = np.zeros((1, 3, 4))
    return _propagate_loop(np.ascontiguousarray(M), np.ascontiguousarray(c),
                           np.ascontiguousarray(dt), np.ascontiguousarray(pre),
                           np.ascontiguousarray(post), use_frames,
                           np.ascontiguousarray(X0, dtype=float))


def _homogeneous(A):
    """``(..., 3, 4)`` affine maps -> ``(..., 4, 4)`` homogeneous matrices."""
    out = np.zeros(A.shape[:-2] + (4, 4))
    out[..., :3, :] = A
    out[..., 3, 3] = 1.0
    return out


def step_propagators(M, c, dt, pre=None, post=None):
    """Homogeneous 4x4 RK4 propagators, one per step, built vectorized."""
    n = M.shape[0]
    G = np.zeros((n, 3, 4, 4))
    G[..., :3, :3] = M
    G[..., :3, 3] = c
    eye = np.eye(4)
    h = dt[:, None, None]
    K1 = G[:, 0]
    K2 = G[:, 1] @ (eye + 0.5 * h * K1)
    K3 = G[:, 1] @ (eye + 0.5 * h * K2)
    K4 = G[:, 2] @ (eye + h * K3)
    P = eye + h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    if pre is not None:
        P = _homogeneous(post) @ P @ _homogeneous(pre)
    return P


def prefix_products(P):
    """``C[n] = P[n] @ ... @ P[0]`` for all ``n`` (Hillis-Steele scan)."""
    C = P.copy()
    shift = 1
    n = C.shape[0]
    while shift < n:
        C[shift:] = C[shift:] @ C[:-shift]
        shift *= 2
    return C


def propagate_numpy(M, c, dt, pre, post, X0, chunk=1 << 16):
    X0 = np.asarray(X0, dtype=float)
    n = M.shape[0]
    out = np.empty((n + 1, X0.shape[0], 3))
    out[0] = X0
    Y = np.concatenate([X0, np.ones((X0.shape[0], 1))], axis=1).T  # (4, K)
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        P = step_propagators(M[a:b], c[a:b], dt[a:b],
                             None if pre is None else pre[a:b],
                             None if post is None else post[a:b])
        C = prefix_products(P)
        Yc = C @ Y  # (b-a, 4, K)
        out[a + 1:b + 1] = np.swapaxes(Yc[:, :3, :], 1, 2)
        Y = Yc[-1]
    return out


def propagate(M, c, dt, pre, post, X0, use_numba=None):
    """Integrate ``len(dt)`` RK4 steps for every initial state in ``X0`` (shape ``(K, 3)``).

    Returns the states at all ``len(dt) + 1`` grid nodes, shape ``(N+1, K, 3)``.
    """
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    if use_numba:
        return propagate_numba(M, c, dt, pre, post, X0)
    return propagate_numpy(M, c, dt, pre, post, X0)
