"""Hot loops, each in a numba flavour (``*_nb``) and a numpy flavour (``*_np``).

The module-level names without suffix point at the flavour selected by
``ISINGCOEX_DISABLE_JIT``.  Both flavours agree exactly on integer outputs
and to rounding on floating point ones.
"""

from __future__ import annotations

import math

import numpy as np

from ._jit import njit, pick
from .rng import SLOTS, _mix_nb, uniforms

# ---------------------------------------------------------------------------
# exact enumeration


@njit
def log_weights_nb(n_sites, edges, beta, field):
    size = 1 << n_sites
    out = np.empty(size, dtype=np.float64)
    n_edges = edges.shape[0]
    for c in range(size):
        e = 0
        for t in range(n_edges):
            bi = (c >> edges[t, 0]) & 1
            bj = (c >> edges[t, 1]) & 1
            e += 1 - 2 * (bi ^ bj)
        f = 0.0
        for i in range(n_sites):
            if (c >> i) & 1:
                f += field[i]
            else:
                f -= field[i]
        out[c] = beta * e + f
    return out


def log_weights_np(n_sites, edges, beta, field):
    ids = np.arange(1 << n_sites, dtype=np.int64)
    bits = [((ids >> i) & 1).astype(np.int8) for i in range(n_sites)]
    agree = np.zeros(ids.shape, dtype=np.int64)
    for i, j in edges:
        agree += 1 - 2 * (bits[i] ^ bits[j]).astype(np.int64)
    f = np.zeros(ids.shape, dtype=np.float64)
    for i in range(n_sites):
        f += (2.0 * bits[i] - 1.0) * field[i]
    return beta * agree + f


def project_bits(ids: np.ndarray, positions) -> np.ndarray:
    """Re-encode configuration ids onto a subset of bit positions."""
    out = np.zeros(ids.shape, dtype=np.int64)
    for j, p in enumerate(positions):
        out |= ((ids >> int(p)) & 1) << j
    return out


# ---------------------------------------------------------------------------
# path events over all configurations of a small support


@njit
def path_table_nb(k, adj, sources, targets):
    size = 1 << k
    out = np.zeros(size, dtype=np.bool_)
    seen = np.zeros(k, dtype=np.bool_)
    stack = np.empty(k, dtype=np.int64)
    deg = adj.shape[1]
    for c in range(size):
        for i in range(k):
            seen[i] = False
        top = 0
        for i in range(k):
            if sources[i] and (c >> i) & 1:
                seen[i] = True
                stack[top] = i
                top += 1
        hit = False
        while top > 0:
            top -= 1
            i = stack[top]
            if targets[i]:
                hit = True
                break
            for d in range(deg):
                j = adj[i, d]
                if j >= 0 and not seen[j] and (c >> j) & 1:
                    seen[j] = True
                    stack[top] = j
                    top += 1
        out[c] = hit
    return out


def path_batch_np(plus, adj, sources, targets):
    reached = plus & np.asarray(sources, dtype=bool)[None, :]
    k = plus.shape[1]
    while True:
        grown = reached.copy()
        for i in range(k):
            for j in adj[i]:
                if j >= 0:
                    grown[:, i] |= reached[:, j]
        grown &= plus
        if np.array_equal(grown, reached):
            break
        reached = grown
    return (reached & np.asarray(targets, dtype=bool)[None, :]).any(axis=1)


def path_table_np(k, adj, sources, targets):
    ids = np.arange(1 << k, dtype=np.int64)
    plus = ((ids[:, None] >> np.arange(k)) & 1).astype(bool)
    return path_batch_np(plus, adj, sources, targets)


@njit
def path_batch_nb(plus, adj, sources, targets):
    b, k = plus.shape
    out = np.zeros(b, dtype=np.bool_)
    seen = np.zeros(k, dtype=np.bool_)
    stack = np.empty(k, dtype=np.int64)
    deg = adj.shape[1]
    for r in range(b):
        for i in range(k):
            seen[i] = False
        top = 0
        for i in range(k):
            if sources[i] and plus[r, i]:
                seen[i] = True
                stack[top] = i
                top += 1
        hit = False
        while top > 0:
            top -= 1
            i = stack[top]
            if targets[i]:
                hit = True
                break
            for d in range(deg):
                j = adj[i, d]
                if j >= 0 and not seen[j] and plus[r, j]:
                    seen[j] = True
                    stack[top] = j
                    top += 1
        out[r] = hit
    return out


# ---------------------------------------------------------------------------
# mask sums for the hybrid measure: sum_s W[a, s] * T[s & M_j]


@njit
def masked_sums_nb(table, weights, masks):
    n_w, size = weights.shape
    n_m = masks.shape[0]
    out = np.zeros((n_w, n_m), dtype=np.float64)
    for j in range(n_m):
        m = masks[j]
        for s in range(size):
            if table[s & m]:
                for a in range(n_w):
                    out[a, j] += weights[a, s]
    return out


def masked_sums_np(table, weights, masks):
    ids = np.arange(table.size, dtype=np.int64)
    out = np.zeros((weights.shape[0], masks.shape[0]), dtype=np.float64)
    for j, m in enumerate(masks):
        out[:, j] = weights @ table[ids & m].astype(np.float64)
    return out


@njit
def plus_pivot_sums_nb(table, q, xbit, masks):
    """P(x is +pivotal for {A occurs on M | x}) for each mask M (x not in M)."""
    n_m = masks.shape[0]
    out = np.zeros(n_m, dtype=np.float64)
    for j in range(n_m):
        m = masks[j]
        for s in range(q.shape[0]):
            if s & xbit:
                r = s & m
                if table[r | xbit] and not table[r & ~xbit]:
                    out[j] += q[s]
    return out


def plus_pivot_sums_np(table, q, xbit, masks):
    ids = np.arange(q.size, dtype=np.int64)
    out = np.zeros(masks.shape[0], dtype=np.float64)
    xplus = (ids & xbit) != 0
    for j, m in enumerate(masks):
        r = ids & m
        piv = xplus & table[r | xbit] & ~table[r & ~xbit]
        out[j] = float(q[piv].sum())
    return out


# ---------------------------------------------------------------------------
# heat-bath sweep; ``order`` lists sites colour class by colour class


@njit
def heat_bath_sweep_nb(spins, order, nbr, beta, ext, skey):
    deg = nbr.shape[1]
    for t in range(order.shape[0]):
        i = order[t]
        s = 0
        for d in range(deg):
            j = nbr[i, d]
            if j >= 0:
                s += spins[j]
        local = beta * s + ext[i]
        p_plus = 1.0 / (1.0 + math.exp(-2.0 * local))
        c = np.uint64(i * 64) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(0xBF58476D1CE4E5B9)
        v = _mix_nb(np.uint64(skey) ^ _mix_nb(c))
        u = np.float64(v >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        spins[i] = 1 if u < p_plus else -1


def heat_bath_sweep_np(spins, order, nbr, beta, ext, skey, colour_slices=None):
    n = spins.shape[0]
    u = uniforms(skey, np.arange(n, dtype=np.int64) * SLOTS)
    if colour_slices is None:
        colour_slices = [(t, t + 1) for t in range(order.shape[0])]
    valid = nbr >= 0
    safe = np.where(valid, nbr, 0)
    for a, b in colour_slices:
        idx = order[a:b]
        s = (spins[safe[idx]] * valid[idx]).sum(axis=1)
        local = beta * s + ext[idx]
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * local))
        spins[idx] = np.where(u[idx] < p_plus, 1, -1).astype(spins.dtype)


# ---------------------------------------------------------------------------
# cluster labelling: label = smallest site id in the cluster


@njit
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@njit
def sign_labels_nb(spins, nbr, active):
    """Union-find labels of same-sign clusters among ``active`` sites."""
    n = spins.shape[0]
    parent = np.arange(n)
    deg = nbr.shape[1]
    for i in range(n):
        if not active[i]:
            continue
        for d in range(deg):
            j = nbr[i, d]
            if j > i and active[j] and spins[j] == spins[i]:
                _union(parent, i, j)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = _find(parent, i) if active[i] else -1
    return labels


def _propagate_min(n, a, b):
    lab = np.arange(n, dtype=np.int64)
    if a.size == 0:
        return lab
    while True:
        old = lab.copy()
        m = np.minimum(lab[a], lab[b])
        np.minimum.at(lab, a, m)
        np.minimum.at(lab, b, m)
        while True:
            nxt = lab[lab]
            if np.array_equal(nxt, lab):
                break
            lab = nxt
        if np.array_equal(lab, old):
            return lab


def sign_labels_np(spins, nbr, active):
    n = spins.shape[0]
    i, d = np.nonzero(nbr >= 0)
    j = nbr[i, d]
    keep = (j > i) & active[i] & active[j] & (spins[i] == spins[j])
    lab = _propagate_min(n, i[keep], j[keep])
    return np.where(active, lab, -1)


# ---------------------------------------------------------------------------
# ghost-spin Swendsen-Wang update


@njit
def _draw(skey, counter):
    c = np.uint64(counter) * np.uint64(0x9E3779B97F4A7C15) + np.uint64(0xBF58476D1CE4E5B9)
    v = _mix_nb(np.uint64(skey) ^ _mix_nb(c))
    return np.float64(v >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit
def ghost_update_nb(spins, nbr, beta, h, bplus, bminus, skey):
    n = spins.shape[0]
    deg = nbr.shape[1]
    p_bond = 1.0 - math.exp(-2.0 * beta)
    p_ghost = 1.0 - math.exp(-2.0 * abs(h))
    hsign = 1 if h > 0 else (-1 if h < 0 else 0)
    parent = np.arange(n)
    anchored = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        base = i * 64
        for d in range(deg):
            j = nbr[i, d]
            if j > i and spins[j] == spins[i]:
                if _draw(skey, base + d) < p_bond:
                    _union(parent, i, j)
        nb = bplus[i] if spins[i] > 0 else bminus[i]
        if nb > 0:
            if _draw(skey, base + deg) < 1.0 - math.exp(-2.0 * beta * nb):
                anchored[i] = True
        if hsign != 0 and spins[i] == hsign:
            if _draw(skey, base + deg + 1) < p_ghost:
                anchored[i] = True
    root_anchor = np.zeros(n, dtype=np.bool_)
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        r = _find(parent, i)
        roots[i] = r
        if anchored[i]:
            root_anchor[r] = True
    flip = np.zeros(n, dtype=np.bool_)
    for r in range(n):
        if roots[r] == r and not root_anchor[r]:
            flip[r] = _draw(skey, r * 64 + deg + 2) < 0.5
    for i in range(n):
        if flip[roots[i]]:
            spins[i] = -spins[i]


def ghost_update_np(spins, nbr, beta, h, bplus, bminus, skey):
    n = spins.shape[0]
    deg = nbr.shape[1]
    i, d = np.nonzero(nbr >= 0)
    j = nbr[i, d]
    cand = (j > i) & (spins[i] == spins[j])
    i, d, j = i[cand], d[cand], j[cand]
    u = uniforms(skey, i * SLOTS + d)
    bond = u < 1.0 - math.exp(-2.0 * beta)
    lab = _propagate_min(n, i[bond], j[bond])

    sites = np.arange(n, dtype=np.int64)
    nb = np.where(spins > 0, bplus, bminus)
    ub = uniforms(skey, sites * SLOTS + deg)
    anchored = (nb > 0) & (ub < 1.0 - np.exp(-2.0 * beta * nb))
    if h != 0:
        hsign = 1 if h > 0 else -1
        ug = uniforms(skey, sites * SLOTS + deg + 1)
        anchored |= (spins == hsign) & (ug < 1.0 - math.exp(-2.0 * abs(h)))
    root_anchor = np.zeros(n, dtype=bool)
    root_anchor[lab[anchored]] = True
    uf = uniforms(skey, sites * SLOTS + deg + 2)
    flip_root = (lab == sites) & ~root_anchor & (uf < 0.5)
    spins[flip_root[lab]] *= -1


log_weights = pick(log_weights_nb, log_weights_np)
path_table = pick(path_table_nb, path_table_np)
path_batch = pick(path_batch_nb, path_batch_np)
masked_sums = pick(masked_sums_nb, masked_sums_np)
plus_pivot_sums = pick(plus_pivot_sums_nb, plus_pivot_sums_np)
sign_labels = pick(sign_labels_nb, sign_labels_np)
_ghost_update = pick(ghost_update_nb, ghost_update_np)


def ghost_update(spins, nbr, beta, h, bplus, bminus, skey):
    _ghost_update(spins, nbr, beta, h, bplus, bminus, np.uint64(skey))


def heat_bath_sweep(spins, order, nbr, beta, ext, skey, colour_slices=None):
    # keys above 2**63 do not fit numba's default int64 argument type
    if pick(True, False):
        heat_bath_sweep_nb(spins, order, nbr, beta, ext, np.uint64(skey))
    else:
        heat_bath_sweep_np(spins, order, nbr, beta, ext, skey, colour_slices)


def greedy_colouring(nbr: np.ndarray) -> np.ndarray:
    """Smallest-free-colour assignment in id order."""
    n = nbr.shape[0]
    colour = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        used = {int(colour[j]) for j in nbr[i] if j >= 0 and colour[j] >= 0}
        c = 0
        while c in used:
            c += 1
        colour[i] = c
    return colour


def colour_order(nbr: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Site order grouped by colour class, plus the slice of each class."""
    colour = greedy_colouring(nbr)
    order = np.lexsort((np.arange(nbr.shape[0]), colour)).astype(np.int64)
    slices = []
    start = 0
    for c in range(int(colour.max()) + 1 if colour.size else 0):
        size = int((colour == c).sum())
        slices.append((start, start + size))
        start += size
    return order, slices
