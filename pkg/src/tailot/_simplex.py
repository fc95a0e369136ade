"""
Network simplex for the transportation problem with squared Euclidean cost.

For balanced marginals sum pi_ij |x_i - y_j|^2 differs from
-2 sum pi_ij <x_i, y_j> by a constant, so arcs are priced with -<x_i, y_j>:
same optimal plans, and a far smaller dynamic range when a few atoms sit
at large radii.

Graph: sources 0..m-1, sinks m..m+n-1 and an artificial root m+n. Real arc
``e = i*n + j`` runs source i -> sink j; arc ``m*n + i`` runs source i -> root
and arc ``m*n + m + j`` runs root -> sink j. Artificial arcs cost a symbolic
big-M, so every cost and node potential is a pair (M-count, float) compared
lexicographically; no numeric big-M ever mixes with the real costs.

The spanning tree is kept strongly feasible (zero-flow tree arcs point towards
the root) and the leaving arc is the last blocking arc met when walking the
pivot cycle from its apex, which rules out cycling under degeneracy. After
each pivot the subtree cut off by the leaving arc is re-hung on the entering
arc and its potentials shift by a constant; every REFRESH pivots the whole
tree is rebuilt by a BFS from the root to recompute potentials and flows
from scratch, so rounding drift cannot build up.

Costs are evaluated from the coordinates on demand, never stored as a matrix.
"""

import numpy as np
from numba import njit

PIVOT_BLOCK = 0
PIVOT_BLAND = 1
REFRESH = 1000


@njit(cache=True)
def _arc_cost(e, xs, ys, m, n):
    # returns (M-count, real cost)
    mn = m * n
    if e < mn:
        i = e // n
        j = e - i * n
        c = 0.0
        for k in range(xs.shape[1]):
            c -= xs[i, k] * ys[j, k]
        return 0, c
    return 1, 0.0


@njit(cache=True)
def _arc_ends(e, m, n):
    mn = m * n
    root = m + n
    if e < mn:
        i = e // n
        return i, m + (e - i * n)
    if e < mn + m:
        return e - mn, root
    return root, m + (e - mn - m)


@njit(cache=True)
def _add_child(p, c, first_child, next_sib, prev_sib):
    h = first_child[p]
    next_sib[c] = h
    prev_sib[c] = -1
    if h >= 0:
        prev_sib[h] = c
    first_child[p] = c


@njit(cache=True)
def _remove_child(p, c, first_child, next_sib, prev_sib):
    nx = next_sib[c]
    pv = prev_sib[c]
    if pv >= 0:
        next_sib[pv] = nx
    else:
        first_child[p] = nx
    if nx >= 0:
        prev_sib[nx] = pv
    next_sib[c] = -1
    prev_sib[c] = -1


@njit(cache=True)
def _rehang(e_in, inner, outer, leave, m, n, parent, pred_slot, up, pk, pf, xs, ys,
            first_child, next_sib, prev_sib, stack):
    """Replace the tree arc above ``leave`` by ``e_in`` (joining ``inner``, in
    the cut subtree, to ``outer``), reversing the path inner..leave, then
    shift the potentials of the re-hung subtree."""
    s_new = pred_slot[leave]
    # walk inner -> leave, reversing parent pointers
    v = inner
    new_parent = outer
    carry_slot = s_new
    a, b = _arc_ends(e_in, m, n)
    carry_up = a == inner
    while True:
        old_parent = parent[v]
        old_slot = pred_slot[v]
        old_up = up[v]
        if old_parent >= 0:
            _remove_child(old_parent, v, first_child, next_sib, prev_sib)
        parent[v] = new_parent
        pred_slot[v] = carry_slot
        up[v] = carry_up
        _add_child(new_parent, v, first_child, next_sib, prev_sib)
        if v == leave:
            break
        new_parent = v
        carry_slot = old_slot
        carry_up = not old_up
        v = old_parent

    ck, cf = _arc_cost(e_in, xs, ys, m, n)
    if up[inner]:
        nk = pk[outer] - ck
        nf = pf[outer] - cf
    else:
        nk = pk[outer] + ck
        nf = pf[outer] + cf
    dk = nk - pk[inner]
    df = nf - pf[inner]
    top = 0
    stack[0] = inner
    top = 1
    while top > 0:
        top -= 1
        v = stack[top]
        pk[v] += dk
        pf[v] += df
        c = first_child[v]
        while c >= 0:
            stack[top] = c
            top += 1
            c = next_sib[c]


@njit(cache=True)
def _rebuild(tree_arc, m, n, parent, pred_slot, up, pk, pf, order, xs, ys,
             first_child, next_sib, prev_sib):
    """BFS from the root over the current tree arcs; refresh parent pointers,
    arc orientation and node potentials (reduced cost of tree arcs is zero)."""
    N = m + n + 1
    root = m + n
    deg = np.zeros(N + 1, np.int64)
    for s in range(N - 1):
        a, b = _arc_ends(tree_arc[s], m, n)
        deg[a + 1] += 1
        deg[b + 1] += 1
    for v in range(N):
        deg[v + 1] += deg[v]
    fill = deg[:-1].copy()
    adj = np.empty(2 * (N - 1), np.int64)
    for s in range(N - 1):
        a, b = _arc_ends(tree_arc[s], m, n)
        adj[fill[a]] = s
        fill[a] += 1
        adj[fill[b]] = s
        fill[b] += 1
    parent[root] = -1
    pred_slot[root] = -1
    first_child[:] = -1
    next_sib[:] = -1
    prev_sib[:] = -1
    pk[root] = 0
    pf[root] = 0.0
    head = 0
    tail = 1
    order[0] = root
    while head < tail:
        v = order[head]
        head += 1
        for q in range(deg[v], deg[v + 1]):
            s = adj[q]
            if s == pred_slot[v]:
                continue
            e = tree_arc[s]
            a, b = _arc_ends(e, m, n)
            w = b if a == v else a
            parent[w] = v
            pred_slot[w] = s
            _add_child(v, w, first_child, next_sib, prev_sib)
            ck, cf = _arc_cost(e, xs, ys, m, n)
            if a == w:
                # arc w -> v points up: c + pi[w] - pi[v] = 0
                up[w] = True
                pk[w] = pk[v] - ck
                pf[w] = pf[v] - cf
            else:
                up[w] = False
                pk[w] = pk[v] + ck
                pf[w] = pf[v] + cf
            order[tail] = w
            tail += 1
    return tail


@njit(cache=True)
def _tree_flows(tree_arc, flow, m, n, a, b, parent, pred_slot, up, order, count, snap):
    """Flows of the spanning tree from the supplies alone: the arc above v
    carries the net supply of v's subtree. ``order`` is a BFS order."""
    N = m + n + 1
    net = np.zeros(N)
    for i in range(m):
        net[i] = a[i]
    for j in range(n):
        net[m + j] = -b[j]
    for q in range(count - 1, 0, -1):
        v = order[q]
        f = net[v] if up[v] else -net[v]
        if f <= snap:
            f = 0.0
        flow[pred_slot[v]] = f
        net[parent[v]] += net[v]


@njit(cache=True)
def _price(start, block, rule, n_arcs, m, n, pk, pf, xs, ys, eps):
    """Return an entering arc with negative reduced cost, or -1 at optimality."""
    best = -1
    best_k = 0
    best_f = 0.0
    scanned = 0
    e = start if rule == PIVOT_BLOCK else 0
    in_block = 0
    while scanned < n_arcs:
        a, b = _arc_ends(e, m, n)
        ck, cf = _arc_cost(e, xs, ys, m, n)
        rk = ck + pk[a] - pk[b]
        rf = cf + pf[a] - pf[b]
        # eps is relative to the magnitudes that enter this reduced cost
        if rk < 0 or (rk == 0 and rf < -eps * (abs(cf) + abs(pf[a]) + abs(pf[b]) + 1e-300)):
            if rule == PIVOT_BLAND:
                return e
            if best < 0 or rk < best_k or (rk == best_k and rf < best_f):
                best = e
                best_k = rk
                best_f = rf
        scanned += 1
        in_block += 1
        e += 1
        if e == n_arcs:
            e = 0
        if in_block == block:
            if best >= 0:
                return best
            in_block = 0
    return best


@njit(cache=True)
def network_simplex(xs, ys, a, b, rule, eps, snap, max_iter):
    """Solve min sum c_ij f_ij subject to row sums a and column sums b.

    Returns (tree arcs, tree flows, status, pivots, potential M-counts,
    potential floats). status 0 optimal, 1 iteration limit, 2 infeasible.
    """
    m = xs.shape[0]
    n = ys.shape[0]
    N = m + n + 1
    root = m + n
    mn = m * n
    n_arcs = mn + m + n

    tree_arc = np.empty(N - 1, np.int64)
    flow = np.empty(N - 1, np.float64)
    for i in range(m):
        tree_arc[i] = mn + i
        flow[i] = a[i]
    for j in range(n):
        tree_arc[m + j] = mn + m + j
        flow[m + j] = b[j]

    parent = np.empty(N, np.int64)
    pred_slot = np.empty(N, np.int64)
    up = np.zeros(N, np.bool_)
    pk = np.zeros(N, np.int64)
    pf = np.zeros(N, np.float64)
    order = np.empty(N, np.int64)
    mark = np.zeros(N, np.int64)
    first_child = np.empty(N, np.int64)
    next_sib = np.empty(N, np.int64)
    prev_sib = np.empty(N, np.int64)
    _rebuild(tree_arc, m, n, parent, pred_slot, up, pk, pf, order, xs, ys,
             first_child, next_sib, prev_sib)

    block = max(int(np.sqrt(n_arcs)), 10)
    start = 0
    status = 1
    it = 0
    while it < max_iter:
        e_in = _price(start, block, rule, n_arcs, m, n, pk, pf, xs, ys, eps)
        if e_in < 0:
            status = 0
            break
        start = e_in + 1
        if start == n_arcs:
            start = 0
        first, second = _arc_ends(e_in, m, n)

        # apex of the pivot cycle
        stamp = it + 1
        u = first
        while u != -1:
            mark[u] = stamp
            u = parent[u]
        join = second
        while mark[join] != stamp:
            join = parent[join]

        # last blocking arc in cycle order: strict on the first side,
        # non-strict on the second
        delta = np.inf
        leave = -1
        leave_first = True
        u = first
        while u != join:
            if up[u]:
                d = flow[pred_slot[u]]
                if d < delta:
                    delta = d
                    leave = u
            u = parent[u]
        u = second
        while u != join:
            if not up[u]:
                d = flow[pred_slot[u]]
                if d <= delta:
                    delta = d
                    leave = u
                    leave_first = False
            u = parent[u]
        if leave < 0:
            status = 2
            break

        u = first
        while u != join:
            s = pred_slot[u]
            flow[s] += -delta if up[u] else delta
            if abs(flow[s]) <= snap:
                flow[s] = 0.0
            u = parent[u]
        u = second
        while u != join:
            s = pred_slot[u]
            flow[s] += delta if up[u] else -delta
            if abs(flow[s]) <= snap:
                flow[s] = 0.0
            u = parent[u]

        s_out = pred_slot[leave]
        tree_arc[s_out] = e_in
        flow[s_out] = delta
        if leave_first:
            _rehang(e_in, first, second, leave, m, n, parent, pred_slot, up, pk, pf, xs, ys,
                    first_child, next_sib, prev_sib, order)
        else:
            _rehang(e_in, second, first, leave, m, n, parent, pred_slot, up, pk, pf, xs, ys,
                    first_child, next_sib, prev_sib, order)
        it += 1
        if it % REFRESH == 0:
            # recompute potentials and flows to shed accumulated rounding
            cnt = _rebuild(tree_arc, m, n, parent, pred_slot, up, pk, pf, order, xs, ys,
                           first_child, next_sib, prev_sib)
            _tree_flows(tree_arc, flow, m, n, a, b, parent, pred_slot, up, order, cnt, snap)

    cnt = _rebuild(tree_arc, m, n, parent, pred_slot, up, pk, pf, order, xs, ys,
                   first_child, next_sib, prev_sib)
    _tree_flows(tree_arc, flow, m, n, a, b, parent, pred_slot, up, order, cnt, snap)
    return tree_arc, flow, status, it, pk[:root].copy(), pf[:root].copy()


@njit(cache=True)
def min_reduced_cost(xs, ys, pk, pf):
    """Smallest reduced cost over real arcs; inf if some arc is M-dominated
    the wrong way (reported as -inf)."""
    m = xs.shape[0]
    n = ys.shape[0]
    worst = np.inf
    for i in range(m):
        for j in range(n):
            rk = pk[i] - pk[m + j]
            if rk < 0:
                return -np.inf
            if rk > 0:
                continue
            c = 0.0
            for k in range(xs.shape[1]):
                c -= xs[i, k] * ys[j, k]
            r = c + pf[i] - pf[m + j]
            if r < worst:
                worst = r
    return worst
