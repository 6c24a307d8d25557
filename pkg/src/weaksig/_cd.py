"""Batched coordinate descent for weighted-L1 least squares.

Solves, independently for every row ``b`` of a batch,

    minimize  0.5 * t' G_b t - c_b' t + sum_j pen_bj * |t_j|

which is the Gram-matrix form of ``(1/2n)||y - X t||^2 + sum_j pen_j |t_j|``
with ``G = X'X/n`` and ``c = X'y/n``.  A shared ``G`` of shape ``(p, p)`` or a
per-row stack of shape ``(B, p, p)`` is accepted.  Rows whose largest
coordinate change in a sweep falls below ``tol`` are retired from the batch.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def coordinate_descent(G, c, pen, theta0=None, tol: float = 1e-8, max_sweeps: int = 10_000):
    """Run cyclic coordinate descent on a batch of weighted-Lasso problems.

    Parameters
    ----------
    G : ndarray, shape (p, p) or (B, p, p)
        Gram matrices ``X'X/n``.  Diagonal entries must be positive.
    c : ndarray, shape (B, p)
        Linear terms ``X'y/n``.
    pen : ndarray, shape (B, p) or (p,)
        Per-coordinate penalty levels.  ``inf`` pins a coordinate at zero.
    theta0 : ndarray, optional
        Warm start with the shape of ``c``.
    tol : float
        Convergence threshold on the largest coordinate change in a sweep.
    max_sweeps : int
        Sweep budget; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    theta : ndarray, shape (B, p)
    sweeps : int
        Number of sweeps performed by the slowest row.
    """
    G = np.asarray(G, dtype=float)
    c = np.atleast_2d(np.asarray(c, dtype=float))
    B, p = c.shape
    pen = np.broadcast_to(np.asarray(pen, dtype=float), (B, p))
    shared = G.ndim == 2
    diag = np.diagonal(G, axis1=-2, axis2=-1)
    if np.any(diag <= 0):
        raise ValueError("Gram matrix has a non-positive diagonal entry")
    theta = np.zeros((B, p)) if theta0 is None else np.array(theta0, dtype=float).reshape(B, p)
    pinned = ~np.isfinite(pen)
    theta[pinned] = 0.0
    pen_f = np.where(pinned, 0.0, pen)

    rows = np.arange(B)
    sweeps = 0
    while rows.size:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"coordinate descent did not converge in {max_sweeps} sweeps",
                last_iterate=theta.copy(),
            )
        sweeps += 1
        th = theta[rows]
        cc = c[rows]
        pp = pen_f[rows]
        pin = pinned[rows]
        Gr = G if shared else G[rows]
        dg = diag if shared else diag[rows]
        change = np.zeros(rows.size)
        for j in range(p):
            if shared:
                gth = th @ Gr[j]
                djj = dg[j]
            else:
                gth = np.einsum("bk,bk->b", Gr[:, j, :], th)
                djj = dg[:, j]
            old = th[:, j].copy()
            r = cc[:, j] - gth + djj * old
            new = np.sign(r) * np.maximum(np.abs(r) - pp[:, j], 0.0) / djj
            new = np.where(pin[:, j], 0.0, new)
            th[:, j] = new
            np.maximum(change, np.abs(new - old), out=change)
        theta[rows] = th
        rows = rows[change >= tol]
    return theta, sweeps
