"""Compiled inner loops: exact greedy tree growth, ensemble prediction, bootstrap AUC."""

import numpy as np
from numba import njit


@njit(cache=True)
def grow_tree(X, order, sorted_x, g, h, max_depth, reg_lambda, min_child_weight, eta):
    """Grow one regression tree level by level with exact greedy splits.

    ``order[j]`` holds the row indices sorted by feature ``j`` and
    ``sorted_x[j]`` the matching feature values. Each level is a
    single pass over every presorted feature column, accumulating left-hand
    gradient sums per open node.

    Returns (feature, threshold, left, right, value, row_value); ``value`` is
    already multiplied by ``eta`` and ``row_value`` is the leaf value of every
    training row.
    """
    n, p = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feat = np.full(max_nodes, -1, np.int64)
    thr = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    G = np.zeros(max_nodes)
    H = np.zeros(max_nodes)
    node_of_row = np.zeros(n, np.int64)
    for r in range(n):
        G[0] += g[r]
        H[0] += h[r]
    n_nodes = 1
    start = 0
    stop = 1
    for _ in range(max_depth):
        width = stop - start
        best_gain = np.zeros(width)
        best_feat = np.full(width, -1, np.int64)
        best_thr = np.zeros(width)
        best_gl = np.zeros(width)
        best_hl = np.zeros(width)
        gl = np.zeros(width)
        hl = np.zeros(width)
        last = np.zeros(width)
        seen = np.zeros(width, np.bool_)
        for j in range(p):
            gl[:] = 0.0
            hl[:] = 0.0
            seen[:] = False
            for k in range(n):
                r = order[j, k]
                nd = node_of_row[r] - start
                if nd < 0:
                    continue
                x = sorted_x[j, k]
                if seen[nd] and x > last[nd]:
                    node = start + nd
                    gr = G[node] - gl[nd]
                    hr = H[node] - hl[nd]
                    if hl[nd] >= min_child_weight and hr >= min_child_weight:
                        gain = (gl[nd] * gl[nd] / (hl[nd] + reg_lambda)
                                + gr * gr / (hr + reg_lambda)
                                - G[node] * G[node] / (H[node] + reg_lambda))
                        if gain > best_gain[nd] + 1e-12:
                            t = 0.5 * (last[nd] + x)
                            if t <= last[nd]:
                                t = x
                            best_gain[nd] = gain
                            best_feat[nd] = j
                            best_thr[nd] = t
                            best_gl[nd] = gl[nd]
                            best_hl[nd] = hl[nd]
                gl[nd] += g[r]
                hl[nd] += h[r]
                last[nd] = x
                seen[nd] = True
        next_start = n_nodes
        for nd in range(width):
            if best_feat[nd] < 0:
                continue
            node = start + nd
            feat[node] = best_feat[nd]
            thr[node] = best_thr[nd]
            left[node] = n_nodes
            right[node] = n_nodes + 1
            G[n_nodes] = best_gl[nd]
            H[n_nodes] = best_hl[nd]
            G[n_nodes + 1] = G[node] - best_gl[nd]
            H[n_nodes + 1] = H[node] - best_hl[nd]
            n_nodes += 2
        if n_nodes == next_start:
            break
        for r in range(n):
            node = node_of_row[r]
            if node >= start and node < stop and feat[node] >= 0:
                if X[r, feat[node]] < thr[node]:
                    node_of_row[r] = left[node]
                else:
                    node_of_row[r] = right[node]
        start = next_start
        stop = n_nodes
    value = np.zeros(n_nodes)
    for node in range(n_nodes):
        if feat[node] < 0:
            value[node] = -eta * G[node] / (H[node] + reg_lambda)
    row_value = np.empty(n)
    for r in range(n):
        row_value[r] = value[node_of_row[r]]
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value, row_value)


@njit(cache=True)
def predict_ensemble(X, roots, feat, thr, left, right, value):
    """Sum of leaf values over all trees; node arrays are concatenated with absolute child ids."""
    n = X.shape[0]
    out = np.zeros(n)
    for r in range(n):
        s = 0.0
        for t in range(roots.shape[0]):
            node = roots[t]
            while feat[node] >= 0:
                if X[r, feat[node]] < thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            s += value[node]
        out[r] = s
    return out


@njit(cache=True)
def bootstrap_auc(tie_group, pos, n_groups, idx):
    """AUC of each bootstrap resample.

    ``tie_group[i]`` is the rank of row i's score among the distinct scores,
    ``idx`` is a (B, n) matrix of resampled row indices. Replicates missing a
    class are returned as NaN.
    """
    n_boot, n = idx.shape
    out = np.empty(n_boot)
    wp = np.zeros(n_groups)
    wn = np.zeros(n_groups)
    for b in range(n_boot):
        wp[:] = 0.0
        wn[:] = 0.0
        for k in range(n):
            i = idx[b, k]
            if pos[i]:
                wp[tie_group[i]] += 1.0
            else:
                wn[tie_group[i]] += 1.0
        below = 0.0
        u = 0.0
        tp = 0.0
        for q in range(n_groups):
            u += wp[q] * (below + 0.5 * wn[q])
            below += wn[q]
            tp += wp[q]
        if tp == 0.0 or below == 0.0:
            out[b] = np.nan
        else:
            out[b] = u / (tp * below)
    return out
