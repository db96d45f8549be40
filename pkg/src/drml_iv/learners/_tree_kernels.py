"""Compiled kernels for CART regression trees.

Trees are stored as flat arrays. ``left[i] == -1`` marks a leaf; rows go left
when ``x[feature] <= threshold``. Child ids are always larger than the parent
id, so an ascending sweep visits parents first and a descending sweep is a
valid post-order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def grow_tree(X, y, order, min_leaf, max_depth, max_nodes):
    """Greedy variance-reduction growth on presorted rows.

    ``order[f]`` lists row indices sorted by feature ``f`` (ties by ``y``) and
    is partitioned in place as nodes split. Ties between candidate splits go
    to the lowest feature index, then the smallest threshold.
    """
    n, p = X.shape
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    count = np.zeros(max_nodes, dtype=np.int64)
    sse = np.zeros(max_nodes)
    start = np.zeros(max_nodes, dtype=np.int64)
    end = np.zeros(max_nodes, dtype=np.int64)
    depth = np.zeros(max_nodes, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)

    stack = np.empty(max_nodes, dtype=np.int64)
    top = 0
    start[0] = 0
    end[0] = n
    stack[top] = 0
    top += 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top]
        s = start[node]
        e = end[node]
        m = e - s
        total = 0.0
        for i in range(s, e):
            total += y[order[0, i]]
        mean = total / m
        node_sse = 0.0
        totc = 0.0
        for i in range(s, e):
            d = y[order[0, i]] - mean
            node_sse += d * d
            totc += d
        value[node] = mean
        count[node] = m
        sse[node] = node_sse
        if depth[node] >= max_depth or m < 2 * min_leaf or node_sse <= 0.0:
            continue
        if n_nodes + 2 > max_nodes:
            continue

        base = totc * totc / m
        best_gain = 0.0
        best_f = -1
        best_nl = 0
        best_thr = 0.0
        for f in range(p):
            csum = 0.0
            for i in range(s, e - 1):
                r = order[f, i]
                csum += y[r] - mean
                nl = i - s + 1
                nr = m - nl
                if nr < min_leaf:
                    break
                if nl < min_leaf:
                    continue
                xv = X[r, f]
                xn = X[order[f, i + 1], f]
                if xn <= xv:
                    continue
                rs = totc - csum
                gain = csum * csum / nl + rs * rs / nr - base
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_nl = nl
                    thr = 0.5 * (xv + xn)
                    if thr >= xn:
                        thr = xv
                    best_thr = thr
        if best_f < 0 or best_gain <= 1e-12 * node_sse:
            continue

        for i in range(s, e):
            goes_left[order[best_f, i]] = i < s + best_nl
        for g in range(p):
            k = 0
            for i in range(s, e):
                r = order[g, i]
                if goes_left[r]:
                    buf[k] = r
                    k += 1
            for i in range(s, e):
                r = order[g, i]
                if not goes_left[r]:
                    buf[k] = r
                    k += 1
            for i in range(m):
                order[g, s + i] = buf[i]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = s + best_nl
        start[rc] = s + best_nl
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        stack[top] = rc
        top += 1
        stack[top] = lc
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy(),
            sse[:n_nodes].copy())


@njit(cache=True)
def prune_path(left, right, sse):
    """Weakest-link cost-complexity pruning.

    Returns ``prune_alpha`` where ``prune_alpha[i]`` is the smallest penalty
    at which node ``i`` becomes a leaf (``inf`` for original leaves, which
    never need collapsing), together with the ascending array of distinct
    penalties on the path, starting at 0.
    """
    k = left.shape[0]
    prune_alpha = np.full(k, np.inf)
    collapsed = left == -1
    parent = np.full(k, -1, dtype=np.int64)
    for i in range(k):
        if left[i] != -1:
            parent[left[i]] = i
            parent[right[i]] = i
    alphas = np.zeros(k + 1)
    n_alpha = 1
    sub_sse = np.zeros(k)
    leaves = np.zeros(k, dtype=np.int64)
    while True:
        for i in range(k - 1, -1, -1):
            if collapsed[i]:
                sub_sse[i] = sse[i]
                leaves[i] = 1
            else:
                sub_sse[i] = sub_sse[left[i]] + sub_sse[right[i]]
                leaves[i] = leaves[left[i]] + leaves[right[i]]
        best = np.inf
        for i in range(k):
            # descendants of collapsed nodes are themselves marked collapsed
            if collapsed[i]:
                continue
            g = (sse[i] - sub_sse[i]) / (leaves[i] - 1)
            if g < best:
                best = g
        if best == np.inf:
            break
        if best < 0.0:
            best = 0.0
        tol = 1e-12 * max(best, 1e-300) + 1e-14 * sse[0]
        for i in range(k):
            if collapsed[i]:
                continue
            g = (sse[i] - sub_sse[i]) / (leaves[i] - 1)
            if g <= best + tol:
                collapsed[i] = True
                prune_alpha[i] = best
        for i in range(k):
            pa = parent[i]
            if pa != -1 and left[i] != -1 and prune_alpha[pa] < prune_alpha[i]:
                prune_alpha[i] = prune_alpha[pa]
                collapsed[i] = True
        if best > alphas[n_alpha - 1]:
            alphas[n_alpha] = best
            n_alpha += 1
    return prune_alpha, alphas[:n_alpha].copy()


@njit(cache=True)
def predict_tree(X, feature, threshold, left, right, value, prune_alpha, alpha):
    m = X.shape[0]
    out = np.empty(m)
    for i in range(m):
        node = 0
        while left[node] != -1 and prune_alpha[node] > alpha:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True)
def leaf_ids(X, feature, threshold, left, right, prune_alpha, alpha):
    m = X.shape[0]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        node = 0
        while left[node] != -1 and prune_alpha[node] > alpha:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def path_sse(X, y, feature, threshold, left, right, value, prune_alpha, alphas):
    """Squared error of the pruned tree at every penalty in ``alphas``.

    Walks each row down the full tree once; the prediction at penalty ``a``
    is the value of the first node on the path with ``prune_alpha <= a``.
    """
    k = alphas.shape[0]
    out = np.zeros(k)
    path = np.empty(left.shape[0], dtype=np.int64)
    for i in range(X.shape[0]):
        depth = 0
        node = 0
        path[0] = 0
        while left[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            depth += 1
            path[depth] = node
        for c in range(k):
            a = alphas[c]
            stop = path[depth]
            for d in range(depth + 1):
                if prune_alpha[path[d]] <= a:
                    stop = path[d]
                    break
            r = y[i] - value[stop]
            out[c] += r * r
    return out
