"""Compiled inner loops for the coordinate-descent solvers.

The kernels implement one full solve each (sweeps, active-set passes, KKT
checks); the surrounding engine code in ``estimators`` owns problem setup,
warm starts, and error reporting.  Status codes: 0 converged, 1 sweep cap
exceeded, 2 objective increased across a sweep (a bug trap, surfaced as an
assertion failure by the caller).

Group data is passed flattened: ``offsets``/``indices`` hold the
concatenated member indices of each group, ``evals`` the eigenvalues of each
group Gram block (aligned with ``indices``), and ``evecs`` the eigenvector
matrices concatenated row-major with per-group offsets ``eoffsets``.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def lasso_solve(gram, gdiag, c, lam, tol, kkt_slack, alpha, max_sweeps):
    d = alpha.shape[0]
    u = c - gram @ alpha
    sweeps = 0
    half = 0.5 * lam
    while sweeps < max_sweeps:
        change = 0.0
        for j in range(d):
            gjj = gdiag[j]
            if gjj <= 0.0:
                continue
            rho = u[j] + gjj * alpha[j]
            if rho > half:
                new = (rho - half) / gjj
            elif rho < -half:
                new = (rho + half) / gjj
            else:
                new = 0.0
            delta = new - alpha[j]
            if delta != 0.0:
                for i in range(d):
                    u[i] -= gram[j, i] * delta
                alpha[j] = new
                if abs(delta) > change:
                    change = abs(delta)
        sweeps += 1
        u = c - gram @ alpha  # refresh accumulated drift before certifying
        if change < tol:
            residual = 0.0
            for j in range(d):
                grad2 = 2.0 * u[j]
                if alpha[j] != 0.0:
                    sign = 1.0 if alpha[j] > 0.0 else -1.0
                    r = abs(grad2 - lam * sign)
                else:
                    r = abs(grad2) - lam
                if r > residual:
                    residual = r
            if residual <= kkt_slack:
                return sweeps, 0
        while sweeps < max_sweeps:
            change = 0.0
            for j in range(d):
                if alpha[j] == 0.0:
                    continue
                gjj = gdiag[j]
                if gjj <= 0.0:
                    continue
                rho = u[j] + gjj * alpha[j]
                if rho > half:
                    new = (rho - half) / gjj
                elif rho < -half:
                    new = (rho + half) / gjj
                else:
                    new = 0.0
                delta = new - alpha[j]
                if delta != 0.0:
                    for i in range(d):
                        u[i] -= gram[j, i] * delta
                    alpha[j] = new
                    if abs(delta) > change:
                        change = abs(delta)
            sweeps += 1
            if change < tol:
                break
    return sweeps, 1


@njit(cache=True)
def _group_objective(alpha, u, c, yy, lam, offsets, indices):
    # ||Xa - y||^2 = yy - c.a - u.a since G a = c - u
    obj = yy
    for j in range(alpha.shape[0]):
        obj -= (c[j] + u[j]) * alpha[j]
    for gi in range(offsets.shape[0] - 1):
        acc = 0.0
        for a in range(offsets[gi], offsets[gi + 1]):
            acc += alpha[indices[a]] ** 2
        obj += lam * math.sqrt(acc)
    return obj


@njit(cache=True)
def _group_update(gram, alpha, u, lam, offsets, indices, evals, evecs, eoffsets, gi):
    """Exactly minimise one group block; returns the max coefficient change."""
    s0, s1 = offsets[gi], offsets[gi + 1]
    size = s1 - s0
    cg = np.empty(size)
    for a in range(size):
        ia = indices[s0 + a]
        v = u[ia]
        for b in range(size):
            ib = indices[s0 + b]
            v += gram[ia, ib] * alpha[ib]
        cg[a] = v
    norm_c = 0.0
    for a in range(size):
        norm_c += cg[a] * cg[a]
    norm2c = 2.0 * math.sqrt(norm_c)
    new = np.zeros(size)
    if norm2c > lam:
        e0 = eoffsets[gi]
        ct = np.empty(size)
        for a in range(size):
            v = 0.0
            for b in range(size):
                v += evecs[e0 + b * size + a] * cg[b]  # Q^T cg
            ct[a] = v
        d_max = evals[s1 - 1]
        if d_max > 0.0:
            nu = (norm2c - lam) / (2.0 * d_max)
            if nu <= 0.0:
                nu = 1e-300
            for _ in range(200):
                h = 0.0
                hp = 0.0
                for a in range(size):
                    denom = 2.0 * evals[s0 + a] * nu + lam
                    w = 2.0 * ct[a] / denom
                    h += w * w
                    hp -= 16.0 * ct[a] * ct[a] * evals[s0 + a] / (denom * denom * denom)
                if abs(h - 1.0) <= 1e-13 or hp == 0.0:
                    break
                step = (h - 1.0) / hp
                if not math.isfinite(step) or nu - step <= 0.0:
                    break
                nu -= step
                if abs(step) <= 1e-15 * (1.0 + nu):
                    break
            for a in range(size):
                bt = 2.0 * ct[a] * nu / (2.0 * evals[s0 + a] * nu + lam)
                for b in range(size):
                    new[b] += evecs[e0 + b * size + a] * bt  # Q beta
    change = 0.0
    dtot = alpha.shape[0]
    for a in range(size):
        ia = indices[s0 + a]
        delta = new[a] - alpha[ia]
        if delta != 0.0:
            for i in range(dtot):
                u[i] -= gram[ia, i] * delta
            alpha[ia] = new[a]
            if abs(delta) > change:
                change = abs(delta)
    return change


@njit(cache=True)
def group_solve(
    gram, c, yy, lam, tol, kkt_slack, alpha, offsets, indices, evals, evecs, eoffsets, max_sweeps
):
    n_groups = offsets.shape[0] - 1
    u = c - gram @ alpha
    sweeps = 0
    objective = _group_objective(alpha, u, c, yy, lam, offsets, indices)
    while sweeps < max_sweeps:
        change = 0.0
        for gi in range(n_groups):
            gc = _group_update(gram, alpha, u, lam, offsets, indices, evals, evecs, eoffsets, gi)
            if gc > change:
                change = gc
        sweeps += 1
        u = c - gram @ alpha
        current = _group_objective(alpha, u, c, yy, lam, offsets, indices)
        if current > objective + 1e-8 * (1.0 + abs(objective)):
            return sweeps, 2
        objective = current
        if change < tol:
            residual = 0.0
            for gi in range(n_groups):
                s0, s1 = offsets[gi], offsets[gi + 1]
                norm_a = 0.0
                for a in range(s0, s1):
                    norm_a += alpha[indices[a]] ** 2
                norm_a = math.sqrt(norm_a)
                if norm_a > 0.0:
                    r = 0.0
                    for a in range(s0, s1):
                        ia = indices[a]
                        diff = 2.0 * u[ia] - lam * alpha[ia] / norm_a
                        r += diff * diff
                    r = math.sqrt(r)
                else:
                    r = 0.0
                    for a in range(s0, s1):
                        r += 4.0 * u[indices[a]] ** 2
                    r = math.sqrt(r) - lam
                if r > residual:
                    residual = r
            if residual <= kkt_slack:
                return sweeps, 0
        while sweeps < max_sweeps:
            change = 0.0
            for gi in range(n_groups):
                s0, s1 = offsets[gi], offsets[gi + 1]
                nonzero = False
                for a in range(s0, s1):
                    if alpha[indices[a]] != 0.0:
                        nonzero = True
                        break
                if not nonzero:
                    continue
                gc = _group_update(
                    gram, alpha, u, lam, offsets, indices, evals, evecs, eoffsets, gi
                )
                if gc > change:
                    change = gc
            sweeps += 1
            current = _group_objective(alpha, u, c, yy, lam, offsets, indices)
            if current > objective + 1e-8 * (1.0 + abs(objective)):
                return sweeps, 2
            objective = current
            if change < tol:
                break
    return sweeps, 1
