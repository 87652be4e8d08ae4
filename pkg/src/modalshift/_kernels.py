"""Hot numeric kernels: raster coverage geometry and the per-agent NSGA-II search.

Functions here are written in nopython-compatible style (plain loops over
numpy arrays, no library sort calls whose tie order could differ between
implementations) and compiled with numba at import time unless
``MODALSHIFT_NUMBA=0``. Both execution paths run the identical code, so
results are bit-for-bit equal; only speed differs.

Randomness inside the genetic search uses an inline MINSTD generator
(``state' = 48271 * state mod 2^31-1``) so the draw sequence is independent
of numpy versions and identical across backends. All intermediate products
fit in int64, which Python ints and numba int64 evaluate identically.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import NUMBA_ENABLED, compile_kernel

_MINSTD_M = 2147483647
_MINSTD_A = 48271


def _mix_u01(state):
    """Advance the MINSTD state; return (new_state, uniform in [0, 1))."""
    nxt = (_MINSTD_A * state) % _MINSTD_M
    return nxt, (nxt - 1) / 2147483646.0


def _randint(state, n):
    state, u = _mix_u01(state)
    k = int(u * n)
    if k >= n:
        k = n - 1
    return state, k


# ---------------------------------------------------------------------------
# Raster geometry
# ---------------------------------------------------------------------------


def _point_in_polygon(px, py, xs, ys):
    n = xs.shape[0]
    inside = False
    j = n - 1
    for i in range(n):
        yi = ys[i]
        yj = ys[j]
        if (yi > py) != (yj > py):
            xint = (xs[j] - xs[i]) * (py - yi) / (yj - yi) + xs[i]
            if px < xint:
                inside = not inside
        j = i
    return inside


def _dist_point_segment(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 <= 0.0:
        return math.sqrt((px - ax) ** 2 + (py - ay) ** 2)
    t = ((px - ax) * dx + (py - ay) * dy) / l2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    qx = ax + t * dx
    qy = ay + t * dy
    return math.sqrt((px - qx) ** 2 + (py - qy) ** 2)


def _dist_to_geometry(px, py, gx, gy):
    n = gx.shape[0]
    if n == 1:
        return math.sqrt((px - gx[0]) ** 2 + (py - gy[0]) ** 2)
    best = 1.0e300
    for i in range(n - 1):
        d = _dist_point_segment(px, py, gx[i], gy[i], gx[i + 1], gy[i + 1])
        if d < best:
            best = d
    return best


def band_area(poly_x, poly_y, geom_x, geom_y, r_in, r_out, cell):
    """Area of {polygon} ∩ {r_in <= dist(geometry) < r_out} on an anchored grid.

    The grid is fixed in the global frame (cell centers at (i + 0.5) * cell),
    so the estimate does not depend on the polygon's bounding box.
    """
    pxlo = poly_x[0]
    pxhi = poly_x[0]
    pylo = poly_y[0]
    pyhi = poly_y[0]
    for i in range(poly_x.shape[0]):
        if poly_x[i] < pxlo:
            pxlo = poly_x[i]
        if poly_x[i] > pxhi:
            pxhi = poly_x[i]
        if poly_y[i] < pylo:
            pylo = poly_y[i]
        if poly_y[i] > pyhi:
            pyhi = poly_y[i]
    gxlo = geom_x[0] - r_out
    gxhi = geom_x[0] + r_out
    gylo = geom_y[0] - r_out
    gyhi = geom_y[0] + r_out
    for i in range(geom_x.shape[0]):
        if geom_x[i] - r_out < gxlo:
            gxlo = geom_x[i] - r_out
        if geom_x[i] + r_out > gxhi:
            gxhi = geom_x[i] + r_out
        if geom_y[i] - r_out < gylo:
            gylo = geom_y[i] - r_out
        if geom_y[i] + r_out > gyhi:
            gyhi = geom_y[i] + r_out
    xlo = pxlo if pxlo > gxlo else gxlo
    xhi = pxhi if pxhi < gxhi else gxhi
    ylo = pylo if pylo > gylo else gylo
    yhi = pyhi if pyhi < gyhi else gyhi
    if xlo >= xhi or ylo >= yhi:
        return 0.0
    ix0 = int(math.floor(xlo / cell))
    ix1 = int(math.ceil(xhi / cell))
    iy0 = int(math.floor(ylo / cell))
    iy1 = int(math.ceil(yhi / cell))
    count = 0
    for ix in range(ix0, ix1 + 1):
        px = (ix + 0.5) * cell
        if px < xlo or px > xhi:
            continue
        for iy in range(iy0, iy1 + 1):
            py = (iy + 0.5) * cell
            if py < ylo or py > yhi:
                continue
            if not _point_in_polygon(px, py, poly_x, poly_y):
                continue
            d = _dist_to_geometry(px, py, geom_x, geom_y)
            if d >= r_in and d < r_out:
                count += 1
    return count * cell * cell


# ---------------------------------------------------------------------------
# Constrained nondominated sorting and crowding
# ---------------------------------------------------------------------------


def _cdom_dir(obj, feas, viol, i, j):
    """+1 if i constraint-dominates j, -1 for the reverse, 0 otherwise."""
    if feas[i] == 1 and feas[j] == 0:
        return 1
    if feas[i] == 0 and feas[j] == 1:
        return -1
    if feas[i] == 0 and feas[j] == 0:
        if viol[i] < viol[j]:
            return 1
        if viol[j] < viol[i]:
            return -1
        return 0
    better = False
    worse = False
    for o in range(obj.shape[1]):
        a = obj[i, o]
        b = obj[j, o]
        if a < b:
            better = True
        elif a > b:
            worse = True
    if better and not worse:
        return 1
    if worse and not better:
        return -1
    return 0


def sort_and_crowd(obj, feas, viol):
    """Fast nondominated sort plus crowding distance.

    Returns (rank, crowd): rank is the 0-based front index per row; crowd is
    the within-front crowding distance (boundary members get +inf, a
    degenerate objective with max == min contributes 0). Ties in the
    per-objective ordering are broken by row index via an explicit insertion
    sort, keeping results identical across backends.
    """
    n = obj.shape[0]
    m = obj.shape[1]
    rank = np.full(n, -1, dtype=np.int64)
    dom_count = np.zeros(n, dtype=np.int64)
    dom_list = np.empty((n, n), dtype=np.int64)
    dom_len = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            d = _cdom_dir(obj, feas, viol, i, j)
            if d == 1:
                dom_list[i, dom_len[i]] = j
                dom_len[i] += 1
                dom_count[j] += 1
            elif d == -1:
                dom_list[j, dom_len[j]] = i
                dom_len[j] += 1
                dom_count[i] += 1
    current = np.empty(n, dtype=np.int64)
    ncur = 0
    for i in range(n):
        if dom_count[i] == 0:
            rank[i] = 0
            current[ncur] = i
            ncur += 1
    r = 0
    nxt = np.empty(n, dtype=np.int64)
    while ncur > 0:
        nnxt = 0
        for k in range(ncur):
            p = current[k]
            for t in range(dom_len[p]):
                q = dom_list[p, t]
                dom_count[q] -= 1
                if dom_count[q] == 0:
                    rank[q] = r + 1
                    nxt[nnxt] = q
                    nnxt += 1
        r += 1
        for k in range(nnxt):
            current[k] = nxt[k]
        ncur = nnxt

    crowd = np.zeros(n, dtype=np.float64)
    members = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    max_rank = 0
    for i in range(n):
        if rank[i] > max_rank:
            max_rank = rank[i]
    for fr in range(max_rank + 1):
        cnt = 0
        for i in range(n):
            if rank[i] == fr:
                members[cnt] = i
                cnt += 1
        if cnt == 0:
            continue
        for o in range(m):
            for k in range(cnt):
                order[k] = members[k]
            for k in range(1, cnt):
                key = order[k]
                kv = obj[key, o]
                t = k - 1
                while t >= 0 and (obj[order[t], o] > kv or (obj[order[t], o] == kv and order[t] > key)):
                    order[t + 1] = order[t]
                    t -= 1
                order[t + 1] = key
            fmin = obj[order[0], o]
            fmax = obj[order[cnt - 1], o]
            crowd[order[0]] = np.inf
            crowd[order[cnt - 1]] = np.inf
            if fmax > fmin:
                for k in range(1, cnt - 1):
                    if not np.isinf(crowd[order[k]]):
                        crowd[order[k]] += (obj[order[k + 1], o] - obj[order[k - 1], o]) / (fmax - fmin)
    return rank, crowd


# ---------------------------------------------------------------------------
# NSGA-II search over discrete zone choices
# ---------------------------------------------------------------------------


def _unique_rank_crowd(members, nmem, obj, feas, viol, zmark, zindex):
    """Rank/crowd the distinct zones present in ``members[:nmem]``.

    Returns (uz, nu, rank_u, crowd_u); ``zindex[z]`` maps a zone id to its
    row in the unique arrays. Duplicates share their zone's rank and crowding.
    """
    z = zmark.shape[0]
    for i in range(nmem):
        zmark[members[i]] = 1
    nu = 0
    uz = np.empty(nmem, dtype=np.int64)
    for zz in range(z):
        if zmark[zz] == 1:
            uz[nu] = zz
            zindex[zz] = nu
            nu += 1
            zmark[zz] = 0
    uobj = np.empty((nu, obj.shape[1]), dtype=np.float64)
    ufeas = np.empty(nu, dtype=np.uint8)
    uviol = np.empty(nu, dtype=np.float64)
    for k in range(nu):
        zz = uz[k]
        for o in range(obj.shape[1]):
            uobj[k, o] = obj[zz, o]
        ufeas[k] = feas[zz]
        uviol[k] = viol[zz]
    rank_u, crowd_u = sort_and_crowd(uobj, ufeas, uviol)
    return uz, nu, rank_u, crowd_u


def _nearest_to_midpoint(z1, z2, cx, cy):
    mx = 0.5 * (cx[z1] + cx[z2])
    my = 0.5 * (cy[z1] + cy[z2])
    best = 0
    bestd = (cx[0] - mx) ** 2 + (cy[0] - my) ** 2
    for zz in range(1, cx.shape[0]):
        d = (cx[zz] - mx) ** 2 + (cy[zz] - my) ** 2
        if d < bestd:
            bestd = d
            best = zz
    return best


def ga_select_zones(
    obj,
    feas,
    viol,
    cx,
    cy,
    pop_size,
    generations,
    mutation_rate,
    crossover_rate,
    seed,
    max_alts,
):
    """Generational NSGA-II over zone indices for one agent.

    ``obj`` is the (zones x objectives) matrix with every column minimized;
    ``feas``/``viol`` carry the constraint state per zone. Returns
    (zones, n, crowd): up to ``max_alts`` distinct feasible zones from the
    final first front ordered by descending crowding distance (ties by
    ascending zone id), plus each pick's crowding value.
    """
    z = obj.shape[0]
    state = seed
    pop = np.empty(pop_size, dtype=np.int64)
    for i in range(pop_size):
        state, k = _randint(state, z)
        pop[i] = k
    zmark = np.zeros(z, dtype=np.uint8)
    zindex = np.full(z, -1, dtype=np.int64)
    uz, nu, rank_u, crowd_u = _unique_rank_crowd(pop, pop_size, obj, feas, viol, zmark, zindex)
    rank_p = np.empty(pop_size, dtype=np.int64)
    crowd_p = np.empty(pop_size, dtype=np.float64)
    for i in range(pop_size):
        rank_p[i] = rank_u[zindex[pop[i]]]
        crowd_p[i] = crowd_u[zindex[pop[i]]]

    nc = 2 * pop_size
    combined = np.empty(nc, dtype=np.int64)
    rank_c = np.empty(nc, dtype=np.int64)
    crowd_c = np.empty(nc, dtype=np.float64)
    used = np.zeros(nc, dtype=np.uint8)

    for _g in range(generations):
        # variation: binary tournaments, zone-midpoint crossover, uniform mutation
        i = 0
        while i < pop_size:
            state, a = _randint(state, pop_size)
            state, b = _randint(state, pop_size)
            if rank_p[b] < rank_p[a] or (rank_p[b] == rank_p[a] and crowd_p[b] > crowd_p[a]):
                p1 = b
            else:
                p1 = a
            state, a = _randint(state, pop_size)
            state, b = _randint(state, pop_size)
            if rank_p[b] < rank_p[a] or (rank_p[b] == rank_p[a] and crowd_p[b] > crowd_p[a]):
                p2 = b
            else:
                p2 = a
            z1 = pop[p1]
            z2 = pop[p2]
            state, u = _mix_u01(state)
            if u < crossover_rate:
                state, u = _mix_u01(state)
                c0 = _nearest_to_midpoint(z1, z2, cx, cy) if u < 0.5 else z1
                state, u = _mix_u01(state)
                c1 = _nearest_to_midpoint(z1, z2, cx, cy) if u < 0.5 else z2
            else:
                c0 = z1
                c1 = z2
            state, u = _mix_u01(state)
            if u < mutation_rate:
                state, c0 = _randint(state, z)
            state, u = _mix_u01(state)
            if u < mutation_rate:
                state, c1 = _randint(state, z)
            combined[pop_size + i] = c0
            if i + 1 < pop_size:
                combined[pop_size + i + 1] = c1
            i += 2
        for i in range(pop_size):
            combined[i] = pop[i]
        uz, nu, rank_u, crowd_u = _unique_rank_crowd(combined, nc, obj, feas, viol, zmark, zindex)
        for i in range(nc):
            rank_c[i] = rank_u[zindex[combined[i]]]
            crowd_c[i] = crowd_u[zindex[combined[i]]]
        # survival: whole fronts in slot order, partial front by crowding
        nsel = 0
        fr = 0
        while nsel < pop_size:
            cnt = 0
            for i in range(nc):
                if rank_c[i] == fr:
                    cnt += 1
            if cnt == 0:
                fr += 1
                continue
            if nsel + cnt <= pop_size:
                for i in range(nc):
                    if rank_c[i] == fr:
                        pop[nsel] = combined[i]
                        rank_p[nsel] = rank_c[i]
                        crowd_p[nsel] = crowd_c[i]
                        nsel += 1
            else:
                # partial front: distinct zones first (crowding desc), then copies
                for i in range(nc):
                    used[i] = 0
                need = pop_size - nsel
                for _t in range(need):
                    best = -1
                    best_dup = -1
                    for i in range(nc):
                        if rank_c[i] != fr or used[i] == 1:
                            continue
                        if zmark[combined[i]] == 0:
                            if best == -1 or crowd_c[i] > crowd_c[best] or (
                                crowd_c[i] == crowd_c[best] and combined[i] < combined[best]
                            ):
                                best = i
                        elif best == -1 and best_dup == -1:
                            best_dup = i
                    if best == -1:
                        best = best_dup
                    used[best] = 1
                    zmark[combined[best]] = 1
                    pop[nsel] = combined[best]
                    rank_p[nsel] = rank_c[best]
                    crowd_p[nsel] = crowd_c[best]
                    nsel += 1
                for i in range(nc):
                    zmark[combined[i]] = 0
            fr += 1

    uz, nu, rank_u, crowd_u = _unique_rank_crowd(pop, pop_size, obj, feas, viol, zmark, zindex)
    out = np.full(max_alts, -1, dtype=np.int64)
    out_crowd = np.zeros(max_alts, dtype=np.float64)
    taken = np.zeros(nu, dtype=np.uint8)
    n_out = 0
    while n_out < max_alts:
        best = -1
        for k in range(nu):
            if taken[k] == 1 or rank_u[k] != 0 or feas[uz[k]] != 1:
                continue
            if best == -1:
                best = k
            elif crowd_u[k] > crowd_u[best] or (crowd_u[k] == crowd_u[best] and uz[k] < uz[best]):
                best = k
        if best == -1:
            break
        taken[best] = 1
        out[n_out] = uz[best]
        out_crowd[n_out] = crowd_u[best]
        n_out += 1
    return out, n_out, out_crowd


# ---------------------------------------------------------------------------
# Compilation (order matters: helpers first)
# ---------------------------------------------------------------------------

_mix_u01 = compile_kernel(_mix_u01)
_randint = compile_kernel(_randint)
_point_in_polygon = compile_kernel(_point_in_polygon)
_dist_point_segment = compile_kernel(_dist_point_segment)
_dist_to_geometry = compile_kernel(_dist_to_geometry)
band_area = compile_kernel(band_area)
_cdom_dir = compile_kernel(_cdom_dir)
sort_and_crowd = compile_kernel(sort_and_crowd)
_unique_rank_crowd = compile_kernel(_unique_rank_crowd)
_nearest_to_midpoint = compile_kernel(_nearest_to_midpoint)
ga_select_zones = compile_kernel(ga_select_zones)

BACKEND = "numba" if NUMBA_ENABLED else "numpy"
