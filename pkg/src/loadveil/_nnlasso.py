"""Numba kernels for the nonnegative lasso coordinate-descent solver.

Problem per batch:  minimize  ||y - B a||_2^2 + lam * sum(a)  over  a >= 0.

Each cyclic pass exactly minimizes the objective in one coordinate at a
time (soft threshold, then clamp at zero), so the objective never
increases. ``bt`` is the dictionary transposed to (n, t), C-contiguous,
so each atom is a contiguous row.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def kkt_violation(bt, a, r, lam):
    """Worst first-order violation of the nonnegative-lasso conditions.

    g_i = -2 b_i.r + lam. Active coordinates need g_i == 0; zero coordinates
    need g_i >= 0. Returns max(|g_i| if a_i > 0 else max(0, -g_i)).
    """
    n, t = bt.shape
    worst = 0.0
    for i in range(n):
        dot = 0.0
        for s in range(t):
            dot += bt[i, s] * r[s]
        g = -2.0 * dot + lam
        if a[i] > 0.0:
            v = abs(g)
        else:
            v = -g if g < 0.0 else 0.0
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def hals_pass(basis, resid, amat, arow_sq):
    """One pass of exact per-column dictionary updates.

    For column j with activation row a_j (over batches), the unconstrained
    minimizer of the reconstruction cost is b_j + (resid @ a_j) / ||a_j||^2;
    projecting it onto {b >= 0, ||b|| <= 1} minimizes exactly over that set,
    so every update descends. ``resid`` (t, m) is kept in sync in place.
    Columns with no activation are skipped.
    """
    t, n = basis.shape
    m = amat.shape[1]
    newcol = np.empty(t)
    for j in range(n):
        sq = arow_sq[j]
        if sq <= 0.0:
            continue
        norm2 = 0.0
        for s in range(t):
            acc = 0.0
            for b in range(m):
                acc += resid[s, b] * amat[j, b]
            v = basis[s, j] + acc / sq
            if v < 0.0:
                v = 0.0
            newcol[s] = v
            norm2 += v * v
        if norm2 > 1.0:
            inv = 1.0 / np.sqrt(norm2)
            for s in range(t):
                newcol[s] *= inv
        for s in range(t):
            d = newcol[s] - basis[s, j]
            if d != 0.0:
                for b in range(m):
                    resid[s, b] -= d * amat[j, b]
                basis[s, j] = newcol[s]


@njit(cache=True)
def cd_solve(bt, col_sq, a, r, lam, kkt_tol, max_sweeps):
    """Cyclic coordinate descent, in place on ``a`` and residual ``r = y - B a``.

    Stops once the KKT violation drops to ``kkt_tol`` (absolute) or after
    ``max_sweeps`` full passes. Returns (sweeps_run, kkt_violation).
    """
    n, t = bt.shape
    worst = np.inf
    for sweep in range(max_sweeps):
        for i in range(n):
            ai = a[i]
            dot = 0.0
            for s in range(t):
                dot += bt[i, s] * r[s]
            new = (dot + ai * col_sq[i] - 0.5 * lam) / col_sq[i]
            if new < 0.0:
                new = 0.0
            if new != ai:
                diff = ai - new
                for s in range(t):
                    r[s] += bt[i, s] * diff
                a[i] = new
        worst = kkt_violation(bt, a, r, lam)
        if worst <= kkt_tol:
            return sweep + 1, worst
    return max_sweeps, worst
