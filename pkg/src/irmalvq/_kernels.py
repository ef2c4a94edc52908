"""Compiled inner loops: the per-sample GMLVQ update and Jacobi sweeps.

All arrays are float64 / int64 and C-contiguous. Loops are written out
explicitly (no BLAS, no fastmath) so results are reproducible bit for bit.
"""
import numpy as np
from numba import njit

OK = 0
DEGENERATE = 1
VANISHED = 2


@njit(cache=True)
def _nearest(w, labels, omega, x, label, diff, proj):
    """Fill diff = x - w and proj = Omega diff per prototype.

    Returns (j_plus, j_minus, d_plus, d_minus); strict < keeps the lowest
    index on ties.
    """
    m_count, n = w.shape
    jp = -1
    jm = -1
    dp = np.inf
    dm = np.inf
    for m in range(m_count):
        for k in range(n):
            diff[m, k] = x[k] - w[m, k]
        dist = 0.0
        for r in range(n):
            s = 0.0
            for k in range(n):
                s += omega[r, k] * diff[m, k]
            proj[m, r] = s
            dist += s * s
        if labels[m] == label:
            if dist < dp:
                dp = dist
                jp = m
        elif dist < dm:
            dm = dist
            jm = m
    return jp, jm, dp, dm


@njit(cache=True)
def _prototype_gradient(omega, proj, jp, jm, gp, gm, grad_w):
    # d dist / d w = -2 Omega^T Omega (x - w)
    n = omega.shape[0]
    for k in range(n):
        lp = 0.0
        lm = 0.0
        for r in range(n):
            lp += omega[r, k] * proj[jp, r]
            lm += omega[r, k] * proj[jm, r]
        grad_w[jp, k] = -2.0 * gp * lp
        grad_w[jm, k] = -2.0 * gm * lm


@njit(cache=True)
def gradient(w, labels, omega, x, label, learn_omega, grad_w, grad_omega):
    """Fill ``grad_w`` / ``grad_omega`` with the gradient of one cost term.

    Returns (status, j_plus, j_minus).
    """
    diff = np.empty_like(w)
    proj = np.empty_like(w)
    jp, jm, dp, dm = _nearest(w, labels, omega, x, label, diff, proj)
    grad_w[:, :] = 0.0
    grad_omega[:, :] = 0.0
    total = dp + dm
    if total == 0.0:
        return DEGENERATE, jp, jm
    # derivatives of (dp - dm) / (dp + dm) with respect to dp and dm
    gp = 2.0 * dm / (total * total)
    gm = -2.0 * dp / (total * total)
    _prototype_gradient(omega, proj, jp, jm, gp, gm, grad_w)
    if learn_omega:
        # d dist / d Omega = 2 Omega (x - w)(x - w)^T
        n = omega.shape[0]
        for r in range(n):
            for k in range(n):
                grad_omega[r, k] = 2.0 * (gp * proj[jp, r] * diff[jp, k] + gm * proj[jm, r] * diff[jm, k])
    return OK, jp, jm


@njit(cache=True)
def constrain(omega, frozen):
    """In place: Omega <- Omega (I - F^T F), then scale to unit Frobenius norm."""
    n = omega.shape[0]
    n_frozen = frozen.shape[0]
    if n_frozen > 0:
        u = np.zeros((n, n_frozen))
        for r in range(n):
            for f in range(n_frozen):
                s = 0.0
                for k in range(n):
                    s += omega[r, k] * frozen[f, k]
                u[r, f] = s
        for r in range(n):
            for k in range(n):
                s = 0.0
                for f in range(n_frozen):
                    s += u[r, f] * frozen[f, k]
                omega[r, k] -= s
    norm = 0.0
    for r in range(n):
        for k in range(n):
            norm += omega[r, k] * omega[r, k]
    norm = np.sqrt(norm)
    if norm < 1e-10:
        return VANISHED
    for r in range(n):
        for k in range(n):
            omega[r, k] /= norm
    return OK


@njit(cache=True)
def _project_out(vec, frozen):
    """vec - F^T (F vec), in place."""
    n = vec.shape[0]
    for f in range(frozen.shape[0]):
        c = 0.0
        for k in range(n):
            c += frozen[f, k] * vec[k]
        for k in range(n):
            vec[k] -= c * frozen[f, k]


@njit(cache=True)
def step(w, labels, omega, frozen, x, label, eta_w, eta_o, learn_omega, diff, proj, grad_w):
    """In-place SGD update of ``w`` and ``omega``; returns a status code.

    ``diff``, ``proj`` and ``grad_w`` are (M, N) scratch arrays. With frozen
    directions F and Omega F^T = 0 on entry, deflating the updated Omega is
    the same as deflating the rank-2 gradient, i.e. projecting (x - w) onto
    the complement of F inside the outer products: O(N |F|) work instead of
    O(N^2 |F|).
    """
    jp, jm, dp, dm = _nearest(w, labels, omega, x, label, diff, proj)
    total = dp + dm
    if total == 0.0:
        return DEGENERATE
    gp = 2.0 * dm / (total * total)
    gm = -2.0 * dp / (total * total)
    _prototype_gradient(omega, proj, jp, jm, gp, gm, grad_w)
    n = w.shape[1]
    if learn_omega:
        # uses the pre-step prototypes, so update Omega first
        _project_out(diff[jp], frozen)
        _project_out(diff[jm], frozen)
        norm = 0.0
        for r in range(n):
            for k in range(n):
                v = omega[r, k] - eta_o * 2.0 * (gp * proj[jp, r] * diff[jp, k] + gm * proj[jm, r] * diff[jm, k])
                omega[r, k] = v
                norm += v * v
        norm = np.sqrt(norm)
        if norm < 1e-10:
            return VANISHED
        for r in range(n):
            for k in range(n):
                omega[r, k] /= norm
    for k in range(n):
        w[jp, k] -= eta_w * grad_w[jp, k]
        w[jm, k] -= eta_w * grad_w[jm, k]
    return OK


@njit(cache=True)
def epoch(w, labels, omega, frozen, X, y, order, eta_w, eta_o, learn_omega):
    """One pass over ``X[order]``; returns (status, number of skipped samples)."""
    diff = np.empty_like(w)
    proj = np.empty_like(w)
    grad_w = np.empty_like(w)
    skipped = 0
    for i in order:
        status = step(w, labels, omega, frozen, X[i], y[i], eta_w, eta_o, learn_omega, diff, proj, grad_w)
        if status == DEGENERATE:
            skipped += 1
        elif status == VANISHED:
            return VANISHED, skipped
    # clear accumulated round-off in Omega F^T
    return constrain(omega, frozen), skipped


@njit(cache=True)
def jacobi_sweeps(a, v, tol, max_sweeps):
    """Cyclic Jacobi on symmetric ``a`` in place, accumulating rotations in ``v``.

    Returns the largest remaining off-diagonal magnitude.
    """
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                if abs(a[p, q]) > off:
                    off = abs(a[p, q])
        if off < tol:
            return off
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    off = 0.0
    for p in range(n):
        for q in range(p + 1, n):
            if abs(a[p, q]) > off:
                off = abs(a[p, q])
    return off
