"""Hot loops: one convolve-and-kill step on a dense box.

The numba kernels and the numpy fallback accumulate every target cell in the
same order (atoms outer, cells inner), so the two backends produce bitwise
identical slices; only the killed-mass and slice-total reductions (the
latter vectorized with reassociation) may round differently.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit, prange


def step_bounds(steps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return steps.min(axis=0), steps.max(axis=0)


# ------------------------------------------------------------------ numpy


def _grid_coords(lo: np.ndarray, shape: tuple[int, ...]) -> list[np.ndarray]:
    d = len(shape)
    out = []
    for i in range(d):
        ax = (lo[i] + np.arange(shape[i])).astype(float)
        view = [1] * d
        view[i] = shape[i]
        out.append(ax.reshape(view))
    return out


def inside_mask(lo, shape, M: np.ndarray, U: np.ndarray, eps: float) -> np.ndarray:
    """Open-cone membership of every cell of the box; same arithmetic as the jitted loops."""
    d = len(shape)
    x = _grid_coords(np.asarray(lo), tuple(shape))
    g = []
    for i in range(d):
        acc = M[i, 0] * x[0]
        for j in range(1, d):
            acc = acc + M[i, j] * x[j]
        g.append(acc)
    nrm2 = g[0] * g[0]
    for i in range(1, d):
        nrm2 = nrm2 + g[i] * g[i]
    thresh = eps * np.maximum(1.0, np.sqrt(nrm2))
    mask = np.ones(shape, dtype=bool)
    for k in range(U.shape[0]):
        dot = U[k, 0] * g[0]
        for i in range(1, d):
            dot = dot + U[k, i] * g[i]
        mask &= np.broadcast_to(dot > thresh, shape)
    return mask


def step_numpy(values, lo, steps, probs, M, U, eps):
    """Generic-dimension step; works for float64 and for object arrays of Fractions."""
    rmin, rmax = step_bounds(steps)
    shape = tuple(int(s) for s in np.array(values.shape) + rmax - rmin)
    new = np.zeros(shape, dtype=values.dtype)
    if values.dtype == object:
        new[...] = 0
    for a in range(len(steps)):
        off = steps[a] - rmin
        sl = tuple(slice(int(o), int(o) + n) for o, n in zip(off, values.shape))
        new[sl] += probs[a] * values
    new_lo = np.asarray(lo) + rmin
    mask = inside_mask(new_lo, shape, M, U, eps)
    out = new[~mask]
    if values.dtype == object:
        killed = sum(out.tolist(), 0)
        new[~mask] = 0
    else:
        killed = math.fsum(out.tolist())
        new[~mask] = 0.0
    return new, new_lo, killed


# ------------------------------------------------------------------ numba


@njit(cache=True)
def _neumaier(s, c, v):
    t = s + v
    if abs(s) >= abs(v):
        c += (s - t) + v
    else:
        c += (v - t) + s
    return t, c


@njit(cache=True)
def _outside(g0, g1, U, eps):
    thresh = eps * max(1.0, math.sqrt(g0 * g0 + g1 * g1))
    for k in range(U.shape[0]):
        if not U[k, 0] * g0 + U[k, 1] * g1 > thresh:
            return True
    return False


@njit(cache=True)
def _clear(g0, g1, U, eps):
    # sufficient for "inside": eps*max(1,|g|) <= eps*(1+|g0|+|g1|)
    loose = eps * (1.0 + abs(g0) + abs(g1))
    for k in range(U.shape[0]):
        if not U[k, 0] * g0 + U[k, 1] * g1 > loose:
            return False
    return True


@njit(cache=True)
def _out1(g0, U, eps):
    thresh = eps * max(1.0, abs(g0))
    for k in range(U.shape[0]):
        if not U[k, 0] * g0 > thresh:
            return True
    return False


@njit(cache=True)
def _clear1(g0, U, eps):
    loose = eps * (1.0 + abs(g0))
    for k in range(U.shape[0]):
        if not U[k, 0] * g0 > loose:
            return False
    return True


@njit(cache=True)
def _kill1d(out, lo0, M, U, eps):
    """Kill outside cells; the inside of a 1-D cone is an interval, so scan in from both ends."""
    killed = 0.0
    comp = 0.0
    N = out.shape[0]
    i = 0
    while i < N:
        g0 = M[0, 0] * (lo0 + i)
        if _clear1(g0, U, eps):
            break
        v = out[i]
        if v != 0.0 and _out1(g0, U, eps):
            killed, comp = _neumaier(killed, comp, v)
            out[i] = 0.0
        i += 1
    left = i
    i = N - 1
    while i > left:
        g0 = M[0, 0] * (lo0 + i)
        if _clear1(g0, U, eps):
            break
        v = out[i]
        if v != 0.0 and _out1(g0, U, eps):
            killed, comp = _neumaier(killed, comp, v)
            out[i] = 0.0
        i -= 1
    return killed + comp


@njit(cache=True)
def _kill2d_row(out, i, lo0, lo1, M, U, eps):
    """Kill outside cells of row i.  The clear set of a row is an interval
    (min of concave functions), so scanning in from both ends suffices."""
    killed = 0.0
    comp = 0.0
    N1 = out.shape[1]
    x0 = lo0 + i
    j = 0
    while j < N1:
        x1 = lo1 + j
        g0 = M[0, 0] * x0 + M[0, 1] * x1
        g1 = M[1, 0] * x0 + M[1, 1] * x1
        if _clear(g0, g1, U, eps):
            break
        v = out[i, j]
        if v != 0.0 and _outside(g0, g1, U, eps):
            killed, comp = _neumaier(killed, comp, v)
            out[i, j] = 0.0
        j += 1
    left = j
    j = N1 - 1
    while j > left:
        x1 = lo1 + j
        g0 = M[0, 0] * x0 + M[0, 1] * x1
        g1 = M[1, 0] * x0 + M[1, 1] * x1
        if _clear(g0, g1, U, eps):
            break
        v = out[i, j]
        if v != 0.0 and _outside(g0, g1, U, eps):
            killed, comp = _neumaier(killed, comp, v)
            out[i, j] = 0.0
        j -= 1
    return killed + comp


@njit(cache=True)
def _kill2d(out, lo0, lo1, M, U, eps):
    killed = 0.0
    comp = 0.0
    for i in range(out.shape[0]):
        killed, comp = _neumaier(killed, comp, _kill2d_row(out, i, lo0, lo1, M, U, eps))
    return killed + comp


@njit(cache=True)
def _bounds(steps):
    d = steps.shape[1]
    rmin = steps[0].copy()
    rmax = steps[0].copy()
    for a in range(steps.shape[0]):
        for k in range(d):
            rmin[k] = min(rmin[k], steps[a, k])
            rmax[k] = max(rmax[k], steps[a, k])
    return rmin, rmax


@njit(cache=True)
def _convolve1d(V, a0, b0, steps, probs, rmin, rmax):
    n0 = b0 - a0
    out = np.zeros(n0 + rmax[0] - rmin[0])
    for a in range(steps.shape[0]):
        o = steps[a, 0] - rmin[0]
        p = probs[a]
        # through views the loop vectorizes; indexing out[o + i] directly does not
        dst = out[o : o + n0]
        src = V[a0:b0]
        for i in range(n0):
            dst[i] += p * src[i]
    return out


@njit(cache=True, fastmath=True)
def _total1d(V, a0, b0):
    tot = 0.0
    for i in range(a0, b0):
        tot += V[i]
    return tot


@njit(cache=True, fastmath=True)
def _total2d(V, a0, b0, a1, b1):
    tot = 0.0
    for i in range(a0, b0):
        for j in range(a1, b1):
            tot += V[i, j]
    return tot


@njit(cache=True)
def _convolve2d(V, a0, b0, a1, b1, steps, probs, rmin, rmax):
    n0 = b0 - a0
    n1 = b1 - a1
    out = np.zeros((n0 + rmax[0] - rmin[0], n1 + rmax[1] - rmin[1]))
    for a in range(steps.shape[0]):
        o0 = steps[a, 0] - rmin[0]
        o1 = steps[a, 1] - rmin[1]
        p = probs[a]
        for i in range(n0):
            orow = out[o0 + i, o1 : o1 + n1]
            vrow = V[a0 + i, a1:b1]
            for j in range(n1):
                orow[j] += p * vrow[j]
    return out


@njit(cache=True)
def _step1d(V, lo0, steps, probs, M, U, eps):
    rmin, rmax = _bounds(steps)
    out = _convolve1d(V, 0, V.shape[0], steps, probs, rmin, rmax)
    new_lo0 = lo0 + rmin[0]
    return out, new_lo0, _kill1d(out, new_lo0, M, U, eps)


@njit(cache=True)
def _step2d(V, lo0, lo1, steps, probs, M, U, eps):
    rmin, rmax = _bounds(steps)
    out = _convolve2d(V, 0, V.shape[0], 0, V.shape[1], steps, probs, rmin, rmax)
    new_lo0 = lo0 + rmin[0]
    new_lo1 = lo1 + rmin[1]
    return out, new_lo0, new_lo1, _kill2d(out, new_lo0, new_lo1, M, U, eps)


@njit(cache=True, parallel=True)
def _step2d_par(V, lo0, lo1, steps, probs, M, U, eps):
    rmin, rmax = _bounds(steps)
    n0, n1 = V.shape
    N0 = n0 + rmax[0] - rmin[0]
    N1 = n1 + rmax[1] - rmin[1]
    out = np.zeros((N0, N1))
    new_lo0 = lo0 + rmin[0]
    new_lo1 = lo1 + rmin[1]
    row_killed = np.zeros(N0)
    for i in prange(N0):
        # same per-cell accumulation order as the serial kernel (atoms outer)
        for a in range(steps.shape[0]):
            si = i - (steps[a, 0] - rmin[0])
            if si < 0 or si >= n0:
                continue
            o1 = steps[a, 1] - rmin[1]
            p = probs[a]
            for j in range(n1):
                out[i, o1 + j] += p * V[si, j]
        row_killed[i] = _kill2d_row(out, i, new_lo0, new_lo1, M, U, eps)
    killed = 0.0
    comp = 0.0
    for i in range(N0):
        killed, comp = _neumaier(killed, comp, row_killed[i])
    return out, new_lo0, new_lo1, killed + comp


def step(values, lo, steps, probs, M, U, eps, parallel: bool = False, use_numba: bool | None = None):
    """Dispatch one step to the fastest available implementation."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and values.dtype == np.float64:
        d = values.ndim
        if d == 1:
            out, l0, killed = _step1d(values, int(lo[0]), steps, probs, M, U, eps)
            return out, np.array([l0]), killed
        if d == 2:
            fn = _step2d_par if parallel else _step2d
            out, l0, l1, killed = fn(values, int(lo[0]), int(lo[1]), steps, probs, M, U, eps)
            return out, np.array([l0, l1]), killed
    return step_numpy(values, lo, steps, probs, M, U, eps)


# --------------------------------------------------- fused multi-step runs


@njit(cache=True)
def run1d(V, lo0, steps, probs, M, U, eps, n_steps, tol, targets, budget, rec):
    """Advance ``n_steps``, recording slice totals and killed mass after every step.

    Target values are stored only at the step numbers listed (sorted) in
    ``rec``, but summed over every step with compensation.  Returns (V, lo0,
    killed, clipped, series[len(rec), T], sums[T], totals[n_steps],
    killed_steps[n_steps], failed_step).
    """
    T = targets.shape[0]
    series = np.zeros((rec.shape[0], T))
    sums = np.zeros(T)
    scomp = np.zeros(T)
    r = 0
    totals = np.zeros(n_steps)
    killed_steps = np.zeros(n_steps)
    rmin, rmax = _bounds(steps)
    ks = 0.0
    kc = 0.0
    clipped = 0.0
    a0 = 0
    b0 = V.shape[0]
    for n in range(n_steps):
        V = _convolve1d(V, a0, b0, steps, probs, rmin, rmax)
        lo0 = lo0 + a0 + rmin[0]
        ks, kc = _neumaier(ks, kc, _kill1d(V, lo0, M, U, eps))
        a0 = 0
        b0 = V.shape[0]
        while b0 - a0 > 1 and V[a0] <= tol:
            clipped += V[a0]
            a0 += 1
        while b0 - a0 > 1 and V[b0 - 1] <= tol:
            clipped += V[b0 - 1]
            b0 -= 1
        totals[n] = _total1d(V, a0, b0)
        killed_steps[n] = ks + kc
        keep = r < rec.shape[0] and rec[r] == n + 1
        for t in range(T):
            i = targets[t, 0] - lo0
            if a0 <= i < b0:
                v = V[i]
                sums[t], scomp[t] = _neumaier(sums[t], scomp[t], v)
                if keep:
                    series[r, t] = v
        if keep:
            r += 1
        if clipped > budget:
            return V[a0:b0].copy(), lo0 + a0, ks + kc, clipped, series, sums + scomp, totals, killed_steps, n + 1
    return V[a0:b0].copy(), lo0 + a0, ks + kc, clipped, series, sums + scomp, totals, killed_steps, -1


@njit(cache=True)
def run2d(V, lo0, lo1, steps, probs, M, U, eps, n_steps, tol, targets, budget, rec):
    T = targets.shape[0]
    series = np.zeros((rec.shape[0], T))
    sums = np.zeros(T)
    scomp = np.zeros(T)
    r = 0
    totals = np.zeros(n_steps)
    killed_steps = np.zeros(n_steps)
    rmin, rmax = _bounds(steps)
    ks = 0.0
    kc = 0.0
    clipped = 0.0
    a0 = 0
    b0 = V.shape[0]
    a1 = 0
    b1 = V.shape[1]
    for n in range(n_steps):
        V = _convolve2d(V, a0, b0, a1, b1, steps, probs, rmin, rmax)
        lo0 = lo0 + a0 + rmin[0]
        lo1 = lo1 + a1 + rmin[1]
        ks, kc = _neumaier(ks, kc, _kill2d(V, lo0, lo1, M, U, eps))
        a0 = 0
        b0 = V.shape[0]
        a1 = 0
        b1 = V.shape[1]
        while b0 - a0 > 1:
            s = 0.0
            for j in range(a1, b1):
                s += V[a0, j]
            if s > tol:
                break
            clipped += s
            a0 += 1
        while b0 - a0 > 1:
            s = 0.0
            for j in range(a1, b1):
                s += V[b0 - 1, j]
            if s > tol:
                break
            clipped += s
            b0 -= 1
        while b1 - a1 > 1:
            s = 0.0
            for i in range(a0, b0):
                s += V[i, a1]
            if s > tol:
                break
            clipped += s
            a1 += 1
        while b1 - a1 > 1:
            s = 0.0
            for i in range(a0, b0):
                s += V[i, b1 - 1]
            if s > tol:
                break
            clipped += s
            b1 -= 1
        totals[n] = _total2d(V, a0, b0, a1, b1)
        killed_steps[n] = ks + kc
        keep = r < rec.shape[0] and rec[r] == n + 1
        for t in range(T):
            i = targets[t, 0] - lo0
            j = targets[t, 1] - lo1
            if a0 <= i < b0 and a1 <= j < b1:
                v = V[i, j]
                sums[t], scomp[t] = _neumaier(sums[t], scomp[t], v)
                if keep:
                    series[r, t] = v
        if keep:
            r += 1
        if clipped > budget:
            return V[a0:b0, a1:b1].copy(), lo0 + a0, lo1 + a1, ks + kc, clipped, series, sums + scomp, totals, killed_steps, n + 1
    return V[a0:b0, a1:b1].copy(), lo0 + a0, lo1 + a1, ks + kc, clipped, series, sums + scomp, totals, killed_steps, -1
