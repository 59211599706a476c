"""Compiled tree growers writing flat node arrays.

Node arrays: feature (-1 for leaves), threshold, left, right, value, n_samples,
gain. Rows inside a node are visited in (x, y) lexicographic order so prefix
sums, and therefore every split decision, are independent of input row order.
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
# candidates within this relative margin of the incumbent count as ties; first in scan order wins
_TIE = 1e-12


@njit(cache=True)
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _pick_features(p, mtry, state):
    perm = np.arange(p)
    for i in range(mtry):
        span = np.uint64(p - i)
        j = i + np.int64(_next_u64(state) % span)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return np.sort(perm[:mtry])


@njit(cache=True)
def _alloc(n_rows):
    cap = 2 * n_rows + 1
    return (np.full(cap, -1, np.int64), np.zeros(cap), np.full(cap, -1, np.int64),
            np.full(cap, -1, np.int64), np.zeros(cap), np.zeros(cap, np.int64), np.zeros(cap))


@njit(cache=True)
def _partition(rows, start, end, X, f, thr, buf):
    """Stable partition of rows[start:end] into (x <= thr, x > thr); returns split point."""
    k = 0
    for t in range(start, end):
        if X[rows[t], f] <= thr:
            buf[k] = rows[t]
            k += 1
    mid = start + k
    for t in range(start, end):
        if X[rows[t], f] > thr:
            buf[k] = rows[t]
            k += 1
    for t in range(end - start):
        rows[start + t] = buf[t]
    return mid


@njit(cache=True)
def grow_sse(X, y, max_depth, min_leaf, min_split, mtry, seed):
    """CART growth maximising SSE reduction. mtry >= p disables feature sampling."""
    n, p = X.shape
    feature, threshold, left, right, value, count, gain_arr = _alloc(n)
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)
    rows = np.arange(n)
    buf = np.empty(n, np.int64)
    # stack of (node, start, end, depth)
    st_node = np.empty(2 * n + 1, np.int64)
    st_start = np.empty(2 * n + 1, np.int64)
    st_end = np.empty(2 * n + 1, np.int64)
    st_depth = np.empty(2 * n + 1, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    all_feats = np.arange(p)
    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]
        m = e - s
        # summation in y-sorted order makes the leaf mean order independent
        seg = rows[s:e]
        yo = seg[np.argsort(y[seg], kind="mergesort")]
        total = 0.0
        for t in range(m):
            total += y[yo[t]]
        mean = total / m
        value[node] = mean
        count[node] = m
        constant = y[yo[0]] == y[yo[m - 1]]
        if depth >= max_depth or m < min_split or constant or m < 2 * min_leaf:
            continue
        if mtry >= p:
            feats = all_feats
        else:
            feats = _pick_features(p, mtry, state)
        yc = np.empty(m)
        ctot = 0.0
        for t in range(m):
            yc[t] = y[yo[t]] - mean
            ctot += yc[t]
        best_f = -1
        best_thr = 0.0
        best_gain = -np.inf
        xs = np.empty(m)
        for fi in range(feats.shape[0]):
            f = feats[fi]
            for t in range(m):
                xs[t] = X[yo[t], f]
            order = np.argsort(xs, kind="mergesort")
            cum = 0.0
            for k in range(1, m):
                cum += yc[order[k - 1]]
                lo = xs[order[k - 1]]
                hi = xs[order[k]]
                if not hi > lo:
                    continue
                if k < min_leaf or m - k < min_leaf:
                    continue
                sr = ctot - cum
                g = cum * cum / k + sr * sr / (m - k) - ctot * ctot / m
                if best_f < 0 or g > best_gain + _TIE * abs(best_gain):
                    best_gain = g
                    best_f = f
                    best_thr = (lo + hi) / 2.0
        if best_f < 0 or not best_gain > 0:
            continue
        mid = _partition(rows, s, e, X, best_f, best_thr, buf)
        feature[node] = best_f
        threshold[node] = best_thr
        gain_arr[node] = best_gain
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is numbered first
        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = e
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = s
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], count[:n_nodes], gain_arr[:n_nodes])


@njit(cache=True)
def grow_second_order(X, g, h, max_depth, reg_lambda, gamma_reg, min_child_weight):
    """Boosting tree: gain 1/2[GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma, leaf -G/(H+l)."""
    n, p = X.shape
    feature, threshold, left, right, value, count, gain_arr = _alloc(n)
    rows = np.arange(n)
    buf = np.empty(n, np.int64)
    st_node = np.empty(2 * n + 1, np.int64)
    st_start = np.empty(2 * n + 1, np.int64)
    st_end = np.empty(2 * n + 1, np.int64)
    st_depth = np.empty(2 * n + 1, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_start[top]
        e = st_end[top]
        depth = st_depth[top]
        m = e - s
        seg = rows[s:e]
        go = seg[np.argsort(g[seg], kind="mergesort")]
        G = 0.0
        H = 0.0
        for t in range(m):
            G += g[go[t]]
            H += h[go[t]]
        value[node] = -G / (H + reg_lambda)
        count[node] = m
        if depth >= max_depth or m < 2:
            continue
        parent = G * G / (H + reg_lambda)
        best_f = -1
        best_thr = 0.0
        best_gain = -np.inf
        xs = np.empty(m)
        for f in range(p):
            for t in range(m):
                xs[t] = X[go[t], f]
            order = np.argsort(xs, kind="mergesort")
            GL = 0.0
            HL = 0.0
            for k in range(1, m):
                r = go[order[k - 1]]
                GL += g[r]
                HL += h[r]
                lo = xs[order[k - 1]]
                hi = xs[order[k]]
                if not hi > lo:
                    continue
                GR = G - GL
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda) - parent) - gamma_reg
                if best_f < 0 or gain > best_gain + _TIE * abs(best_gain):
                    best_gain = gain
                    best_f = f
                    best_thr = (lo + hi) / 2.0
        if best_f < 0 or not best_gain > 0:
            continue
        mid = _partition(rows, s, e, X, best_f, best_thr, buf)
        feature[node] = best_f
        threshold[node] = best_thr
        gain_arr[node] = best_gain
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = e
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = s
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], count[:n_nodes], gain_arr[:n_nodes])


@njit(cache=True)
def predict_flat(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
