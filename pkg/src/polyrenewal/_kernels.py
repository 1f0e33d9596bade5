"""Compiled inner loops. Positions live on a flattened box grid."""
from __future__ import annotations

import numpy as np
from numba import njit


def grid_layout(d: int, radius: int) -> tuple[int, np.ndarray]:
    """Side length and flat strides of the box [-radius, radius]^d."""
    side = 2 * radius + 1
    strides = side ** np.arange(d, dtype=np.int64)
    return side, strides


def flat_index(points: np.ndarray, radius: int) -> np.ndarray:
    side, strides = grid_layout(points.shape[-1], radius)
    return (np.asarray(points, dtype=np.int64) + radius) @ strides


def unflatten(idx: np.ndarray, d: int, radius: int) -> np.ndarray:
    side, _ = grid_layout(d, radius)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.empty(idx.shape + (d,), dtype=np.int64)
    rem = idx.copy()
    for k in range(d):
        out[..., k] = rem % side - radius
        rem //= side
    return out


@njit(cache=True)
def annealed_endpoint_dfs(step_flat, step_prob, phi_inc, n_max, n_cells, origin):
    """Sum of exp(-Phi) P over all paths of length n <= n_max, by end point.

    Returns ``(all_tab, first_tab, nodes)`` where ``all_tab[n, x]`` sums every
    path ending at x and ``first_tab[n, x]`` only those visiting x once.
    ``phi_inc[c]`` is phi(c + 1) - phi(c).
    """
    k = step_flat.shape[0]
    all_tab = np.zeros((n_max + 1, n_cells))
    first_tab = np.zeros((n_max + 1, n_cells))
    all_tab[0, origin] = 1.0
    if n_max == 0:
        return all_tab, first_tab, 0
    counts = np.zeros(n_cells, dtype=np.int32)
    pos = np.empty(n_max + 1, dtype=np.int64)
    wt = np.empty(n_max + 1)
    choice = np.full(n_max + 1, -1, dtype=np.int64)
    pos[0] = origin
    wt[0] = 1.0
    depth = 0
    nodes = 0
    while depth >= 0:
        c = choice[depth] + 1
        if depth == n_max or c >= k:
            # backtrack
            choice[depth] = -1
            if depth > 0:
                counts[pos[depth]] -= 1
            depth -= 1
            continue
        choice[depth] = c
        nxt = pos[depth] + step_flat[c]
        cnt = counts[nxt]
        w = wt[depth] * step_prob[c] * np.exp(-phi_inc[cnt])
        if w == 0.0:
            continue
        nodes += 1
        counts[nxt] = cnt + 1
        depth += 1
        pos[depth] = nxt
        wt[depth] = w
        all_tab[depth, nxt] += w
        if cnt == 0:
            first_tab[depth, nxt] += w
    return all_tab, first_tab, nodes


@njit(cache=True)
def cone_piece_dfs(step_flat, step_prob, phi_inc, n_max, n_cells, origin,
                   cone_mask, cone_origin, path_disp, collect_cap):
    """Enumerate paths confined to the forward cone of the origin.

    ``cone_mask`` is a flattened boolean table over displacements; a
    displacement with flat offset ``q`` (relative to ``cone_origin``) is in
    the cone when ``cone_mask[cone_origin + q]``. ``path_disp[a]`` maps a flat
    position index to the un-centred flat offset of the same point on the
    displacement grid, so differences of ``path_disp`` are displacements.

    Returns ``(t_tab, f_tab, pieces, lengths, count)``: diamond-confined
    path weights and weights of irreducible pieces by (length, end point),
    plus the step-index sequences of up to ``collect_cap`` irreducible pieces
    and their total number.
    """
    k = step_flat.shape[0]
    t_tab = np.zeros((n_max + 1, n_cells))
    f_tab = np.zeros((n_max + 1, n_cells))
    t_tab[0, origin] = 1.0
    pieces = np.zeros((collect_cap, max(n_max, 1)), dtype=np.int8)
    lengths = np.zeros(collect_cap, dtype=np.int64)
    count = 0
    if n_max == 0:
        return t_tab, f_tab, pieces, lengths, count
    counts = np.zeros(n_cells, dtype=np.int32)
    pos = np.empty(n_max + 1, dtype=np.int64)
    wt = np.empty(n_max + 1)
    choice = np.full(n_max + 1, -1, dtype=np.int64)
    before_ok = np.zeros(n_max + 1, dtype=np.bool_)
    after_ok = np.zeros((n_max + 1, n_max + 1), dtype=np.bool_)
    pos[0] = origin
    wt[0] = 1.0
    depth = 0
    while depth >= 0:
        c = choice[depth] + 1
        if depth == n_max or c >= k:
            choice[depth] = -1
            if depth > 0:
                counts[pos[depth]] -= 1
            depth -= 1
            continue
        choice[depth] = c
        nxt = pos[depth] + step_flat[c]
        if nxt == origin:
            continue
        if not cone_mask[cone_origin + path_disp[nxt] - path_disp[origin]]:
            continue
        cnt = counts[nxt]
        w = wt[depth] * step_prob[c] * np.exp(-phi_inc[cnt])
        if w == 0.0:
            continue
        m = depth + 1
        # after_ok[m][j]: every vertex after j so far lies in gamma_j + Y minus gamma_j
        for j in range(m):
            if j < depth:
                prev = after_ok[depth, j]
            else:
                prev = True
            if prev:
                q = path_disp[nxt] - path_disp[pos[j]]
                prev = (nxt != pos[j]) and cone_mask[cone_origin + q]
            after_ok[m, j] = prev
        # before_ok[m]: every earlier vertex lies in gamma_m - Y minus gamma_m
        ok = True
        for j in range(m):
            if pos[j] == nxt:
                ok = False
                break
            q = path_disp[nxt] - path_disp[pos[j]]
            if not cone_mask[cone_origin + q]:
                ok = False
                break
        before_ok[m] = ok
        counts[nxt] = cnt + 1
        depth = m
        pos[depth] = nxt
        wt[depth] = w
        if ok:
            t_tab[m, nxt] += w
            irreducible = True
            for j in range(1, m):
                if before_ok[j] and after_ok[m, j]:
                    irreducible = False
                    break
            if irreducible:
                f_tab[m, nxt] += w
                if count < collect_cap:
                    for j in range(m):
                        pieces[count, j] = choice[j]
                    lengths[count] = m
                count += 1
    return t_tab, f_tab, pieces, lengths, count


@njit(cache=True)
def gather_piece_weights(offsets, lengths, log_p, group, n_groups, w_flat, starts):
    """out[g, j] sums exp(log_p[s]) * prod_i w_flat[starts[j] + offsets[s, i]]
    over pieces s in group g."""
    n_pieces = offsets.shape[0]
    n_starts = starts.shape[0]
    out = np.zeros((n_groups, n_starts))
    for s in range(n_pieces):
        g = group[s]
        base = np.exp(log_p[s])
        m = lengths[s]
        for j in range(n_starts):
            v = base
            for i in range(m):
                v *= w_flat[starts[j] + offsets[s, i]]
                if v == 0.0:
                    break
            out[g, j] += v
    return out


@njit(cache=True)
def random_renewal(F, glen, z, n_max, origin):
    """t[n, y + z_g] += t[n - m_g, y] * F[g, y]: renewal array from piece
    weights that depend on the start y."""
    G, J = F.shape
    t = np.zeros((n_max + 1, J))
    t[0, origin] = 1.0
    for n in range(1, n_max + 1):
        for g in range(G):
            m = glen[g]
            if m > n:
                continue
            for j in range(J):
                v = t[n - m, j]
                if v != 0.0:
                    t[n, j + z[g]] += v * F[g, j]
    return t
