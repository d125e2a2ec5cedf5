"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time.  Set ``EREVSIM_NUMBA=0`` to force
the numpy implementations (useful for debugging and for the benchmark).  Both
implementations are always importable under explicit names so they can be
compared against each other.
"""
import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("EREVSIM_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


def _njit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


# ---------------------------------------------------------------------------
# bilinear interpolation


def _bilinear_py(xg, yg, vals, x, y):
    out = np.empty(x.shape[0])
    nx = xg.shape[0]
    ny = yg.shape[0]
    for n in range(x.shape[0]):
        xi = x[n]
        yi = y[n]
        i = np.searchsorted(xg, xi, side="right") - 1
        j = np.searchsorted(yg, yi, side="right") - 1
        if i > nx - 2:
            i = nx - 2
        if j > ny - 2:
            j = ny - 2
        if i < 0:
            i = 0
        if j < 0:
            j = 0
        tx = (xi - xg[i]) / (xg[i + 1] - xg[i])
        ty = (yi - yg[j]) / (yg[j + 1] - yg[j])
        v0 = vals[i, j] + (vals[i + 1, j] - vals[i, j]) * tx
        v1 = vals[i, j + 1] + (vals[i + 1, j + 1] - vals[i, j + 1]) * tx
        out[n] = v0 + (v1 - v0) * ty
    return out


bilinear_numba = _njit(_bilinear_py)


def bilinear_numpy(xg, yg, vals, x, y):
    """Vectorised bilinear interpolation; callers guarantee in-hull queries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = np.clip(np.searchsorted(xg, x, side="right") - 1, 0, xg.shape[0] - 2)
    j = np.clip(np.searchsorted(yg, y, side="right") - 1, 0, yg.shape[0] - 2)
    tx = (x - xg[i]) / (xg[i + 1] - xg[i])
    ty = (y - yg[j]) / (yg[j + 1] - yg[j])
    v0 = vals[i, j] + (vals[i + 1, j] - vals[i, j]) * tx
    v1 = vals[i, j + 1] + (vals[i + 1, j + 1] - vals[i, j + 1]) * tx
    return v0 + (v1 - v0) * ty


def bilinear(xg, yg, vals, x, y):
    x = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=float)))
    y = np.ascontiguousarray(np.atleast_1d(np.asarray(y, dtype=float)))
    if USE_NUMBA and x.size > 64:
        return bilinear_numba(xg, yg, vals, x, y)
    return bilinear_numpy(xg, yg, vals, x, y)


# ---------------------------------------------------------------------------
# battery state-of-charge rate on uniformly tabulated curves


def _table_interp(tab, s):
    n = tab.shape[0]
    x = s * (n - 1)
    i = int(math.floor(x))
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    frac = x - i
    return tab[i] + (tab[i + 1] - tab[i]) * frac


def _dsoc_py(soc, p_bat, cap, uoc_tab, rdis_tab, rchg_tab):
    u = _table_interp(uoc_tab, soc)
    if p_bat >= 0.0:
        r = _table_interp(rdis_tab, soc)
    else:
        r = _table_interp(rchg_tab, soc)
    disc = u * u - 4.0 * p_bat * r
    if disc < 0.0:
        return math.nan
    return -(u - math.sqrt(disc)) / (2.0 * cap * r)


dsoc_scalar = _dsoc_py


def dsoc_numpy(soc, p_bat, cap, uoc_tab, rdis_tab, rchg_tab):
    """Vectorised SOC rate; NaN where the discriminant is negative."""
    soc = np.asarray(soc, dtype=float)
    p_bat = np.asarray(p_bat, dtype=float)
    n = uoc_tab.shape[0]
    x = soc * (n - 1)
    i = np.clip(np.floor(x).astype(np.int64), 0, n - 2)
    frac = x - i
    u = uoc_tab[i] + (uoc_tab[i + 1] - uoc_tab[i]) * frac
    rd = rdis_tab[i] + (rdis_tab[i + 1] - rdis_tab[i]) * frac
    rc = rchg_tab[i] + (rchg_tab[i + 1] - rchg_tab[i]) * frac
    r = np.where(p_bat >= 0.0, rd, rc)
    disc = u * u - 4.0 * p_bat * r
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
    out = -(u - root) / (2.0 * cap * r)
    return np.where(disc < 0.0, np.nan, out)


# ---------------------------------------------------------------------------
# forward dynamic programming over (SOC node, previous control)


def _snap(s, lo, hi, n):
    if hi <= lo:
        return 0
    j = int(math.floor((s - lo) / (hi - lo) * (n - 1) + 0.5))
    if j < 0:
        return 0
    if j > n - 1:
        return n - 1
    return j


def _dp_forward_py(soc0, nodes, pbat, valid, fuel, sw0, sw, soc_ref, rho_track,
                   soc_lo, soc_hi, dt, cap, uoc_tab, rdis_tab, rchg_tab):
    p = nodes.shape[0]
    n = nodes.shape[1]
    c_max = pbat.shape[1]
    inf = np.inf
    value = np.full((n, c_max), inf)
    pred_node = np.full((p, n, c_max), -1, dtype=np.int64)
    pred_ctrl = np.full((p, n, c_max), -1, dtype=np.int64)

    lo = nodes[0, 0]
    hi = nodes[0, n - 1]
    for c in range(c_max):
        if not valid[0, c]:
            continue
        ds = _dsoc_py(soc0, pbat[0, c], cap, uoc_tab, rdis_tab, rchg_tab)
        if math.isnan(ds):
            continue
        s_next = soc0 + ds * dt
        if s_next < soc_lo[0] or s_next > soc_hi[0]:
            continue
        j = _snap(s_next, lo, hi, n)
        stage = (fuel[0, c] + rho_track * abs(nodes[0, j] - soc_ref[0])) + sw0[c]
        total = 0.0 + stage
        if total < value[j, c]:
            value[j, c] = total
    if not np.isfinite(value).any():
        return inf, np.full(p, -1, dtype=np.int64), np.full(p, -1, dtype=np.int64), 0

    next_j = np.empty((n, c_max), dtype=np.int64)
    step_cost = np.empty((n, c_max))
    for k in range(1, p):
        lo = nodes[k, 0]
        hi = nodes[k, n - 1]
        for i in range(n):
            s = nodes[k - 1, i]
            for c in range(c_max):
                next_j[i, c] = -1
                if not valid[k, c]:
                    continue
                ds = _dsoc_py(s, pbat[k, c], cap, uoc_tab, rdis_tab, rchg_tab)
                if math.isnan(ds):
                    continue
                s_next = s + ds * dt
                if s_next < soc_lo[k] or s_next > soc_hi[k]:
                    continue
                j = _snap(s_next, lo, hi, n)
                next_j[i, c] = j
                step_cost[i, c] = fuel[k, c] + rho_track * abs(nodes[k, j] - soc_ref[k])
        new_value = np.full((n, c_max), inf)
        for i in range(n):
            for cp in range(c_max):
                v = value[i, cp]
                if v == inf:
                    continue
                for c in range(c_max):
                    j = next_j[i, c]
                    if j < 0:
                        continue
                    total = v + (step_cost[i, c] + sw[k, cp, c])
                    if total < new_value[j, c]:
                        new_value[j, c] = total
                        pred_node[k, j, c] = i
                        pred_ctrl[k, j, c] = cp
        value = new_value
        if not np.isfinite(value).any():
            return inf, np.full(p, -1, dtype=np.int64), np.full(p, -1, dtype=np.int64), k

    best = inf
    bj = -1
    bc = -1
    for j in range(n):
        for c in range(c_max):
            if value[j, c] < best:
                best = value[j, c]
                bj = j
                bc = c
    ctrl = np.empty(p, dtype=np.int64)
    node = np.empty(p, dtype=np.int64)
    for k in range(p - 1, -1, -1):
        ctrl[k] = bc
        node[k] = bj
        if k > 0:
            pj = pred_node[k, bj, bc]
            pc = pred_ctrl[k, bj, bc]
            bj = pj
            bc = pc
    return best, ctrl, node, -1


if HAVE_NUMBA:
    # jit in dependency order so each kernel resolves its helpers to dispatchers
    _table_interp = numba.njit(cache=True)(_table_interp)
    _dsoc_py = numba.njit(cache=True)(_dsoc_py)
    _snap = numba.njit(cache=True)(_snap)
    dsoc_scalar = _dsoc_py
    dp_forward_numba = numba.njit(cache=True, nogil=True)(_dp_forward_py)
else:  # pragma: no cover
    dp_forward_numba = _dp_forward_py


def dp_forward_numpy(soc0, nodes, pbat, valid, fuel, sw0, sw, soc_ref, rho_track,
                     soc_lo, soc_hi, dt, cap, uoc_tab, rdis_tab, rchg_tab):
    """Array formulation of the same recursion and tie-break as the loop kernel."""
    p, n = nodes.shape
    c_max = pbat.shape[1]
    inf = np.inf
    fail = (inf, np.full(p, -1, dtype=np.int64), np.full(p, -1, dtype=np.int64))
    pred_node = np.full((p, n, c_max), -1, dtype=np.int64)
    pred_ctrl = np.full((p, n, c_max), -1, dtype=np.int64)

    def transitions(k, s):
        # s has shape (m,); returns next node index (m, C) with -1 for infeasible and the step cost
        lo = nodes[k, 0]
        hi = nodes[k, n - 1]
        ds = dsoc_numpy(s[:, None], pbat[k][None, :], cap, uoc_tab, rdis_tab, rchg_tab)
        s_next = s[:, None] + ds * dt
        ok = valid[k][None, :] & ~np.isnan(ds) & (s_next >= soc_lo[k]) & (s_next <= soc_hi[k])
        if hi <= lo:
            j = np.zeros(s_next.shape, dtype=np.int64)
        else:
            with np.errstate(invalid="ignore"):
                j = np.floor((s_next - lo) / (hi - lo) * (n - 1) + 0.5)
            j = np.clip(np.nan_to_num(j, nan=0.0), 0, n - 1).astype(np.int64)
        cost = fuel[k][None, :] + rho_track * np.abs(nodes[k][j] - soc_ref[k])
        j = np.where(ok, j, -1)
        return j, cost

    j0, cost0 = transitions(0, np.array([soc0]))
    j0 = j0[0]
    value = np.full((n, c_max), inf)
    for c in np.nonzero(j0 >= 0)[0]:
        total = 0.0 + (cost0[0, c] + sw0[c])
        if total < value[j0[c], c]:
            value[j0[c], c] = total
    if not np.isfinite(value).any():
        return fail + (0,)

    for k in range(1, p):
        nj, step = transitions(k, nodes[k - 1])
        live_i = np.nonzero(np.isfinite(value).any(axis=1))[0]
        vv = value[live_i]  # (m, C')
        total = vv[:, :, None] + (step[live_i][:, None, :] + sw[k][None, :, :])
        best_cp = np.argmin(total, axis=1)  # first minimum -> lowest previous control
        best_val = np.take_along_axis(total, best_cp[:, None, :], axis=1)[:, 0, :]
        jj = nj[live_i]
        ok = (jj >= 0) & np.isfinite(best_val)
        ii, cc = np.nonzero(ok)
        new_value = np.full((n, c_max), inf)
        if ii.size:
            keys = jj[ii, cc] * c_max + cc
            vals = best_val[ii, cc]
            src_i = live_i[ii]
            order = np.lexsort((src_i, vals, keys))
            keys_s = keys[order]
            first = np.ones(order.size, dtype=bool)
            first[1:] = keys_s[1:] != keys_s[:-1]
            sel = order[first]
            tj = keys[sel] // c_max
            tc = keys[sel] % c_max
            new_value[tj, tc] = vals[sel]
            pred_node[k, tj, tc] = src_i[sel]
            pred_ctrl[k, tj, tc] = best_cp[ii[sel], cc[sel]]
        value = new_value
        if not np.isfinite(value).any():
            return fail + (k,)

    flat = int(np.argmin(value))
    best = float(value.flat[flat])
    bj, bc = divmod(flat, c_max)
    ctrl = np.empty(p, dtype=np.int64)
    node = np.empty(p, dtype=np.int64)
    for k in range(p - 1, -1, -1):
        ctrl[k] = bc
        node[k] = bj
        if k > 0:
            bj, bc = pred_node[k, bj, bc], pred_ctrl[k, bj, bc]
    return best, ctrl, node, -1


def dp_forward(*args):
    if USE_NUMBA:
        return dp_forward_numba(*args)
    return dp_forward_numpy(*args)
