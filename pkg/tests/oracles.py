"""Independent reference solvers used only by the test-suite.

None of these share code paths with the package: they are deliberately slow,
direct formulations of the same mathematical objects.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# ---------------------------------------------------------------- SVR dual ---

def _rbf_gram(X, gamma):
    n = X.shape[0]
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            d = X[i] - X[j]
            K[i, j] = math.exp(-gamma * float(np.sum(d * d)))
    return K


def _prox(v, t, eps, C):
    """argmin_b 1/(2t)|b - v|^2 + eps|b|_1  s.t. sum(b) = 0, |b_i| <= C.

    Solved exactly: sum(b(lam)) is piecewise linear and non-increasing in the
    multiplier, so we locate the root between sorted breakpoints.
    """
    te = t * eps

    def b_of(lam):
        u = v - t * lam
        return np.clip(np.sign(u) * np.maximum(np.abs(u) - te, 0.0), -C, C)

    knots = np.concatenate([(v - u) / t for u in (-te - C, -te, te, te + C)])
    knots = np.unique(knots)
    sums = np.array([b_of(k).sum() for k in knots])
    if sums[0] < 0 or sums[-1] > 0:
        raise AssertionError("infeasible prox")
    # last knot with sum >= 0 and first with sum <= 0 bracket the root
    hi_idx = int(np.argmax(sums <= 0))
    if sums[hi_idx] == 0:
        return b_of(knots[hi_idx])
    lo_idx = hi_idx - 1
    l0, l1 = knots[lo_idx], knots[hi_idx]
    s0, s1 = sums[lo_idx], sums[hi_idx]
    lam = l0 + (l1 - l0) * s0 / (s0 - s1)
    return b_of(lam)


def svr_dual_objective(K, y, beta, eps):
    return 0.5 * float(beta @ K @ beta) - float(y @ beta) + eps * float(np.abs(beta).sum())


def svr_projected_gradient(X, y, gamma, C, eps, max_iter=100_000, tol=1e-14):
    """Accelerated proximal gradient on the beta-form epsilon-SVR dual.

    Returns (beta, bias, objective). The bias follows the KKT conditions:
    mean over free coefficients, midpoint of the feasible interval otherwise.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    K = _rbf_gram(X, gamma)
    L = float(np.linalg.eigvalsh(K).max())
    t = 1.0 / L
    beta = np.zeros(len(y))
    z = beta.copy()
    mom = 1.0
    f_prev = svr_dual_objective(K, y, beta, eps)
    for _ in range(max_iter):
        grad = K @ z - y
        new = _prox(z - t * grad, t, eps, C)
        f_new = svr_dual_objective(K, y, new, eps)
        if f_new > f_prev:
            if mom == 1.0:
                # plain prox step no longer descends: converged to rounding
                break
            # adaptive restart
            mom = 1.0
            z = beta.copy()
            continue
        mom_next = (1.0 + math.sqrt(1.0 + 4.0 * mom * mom)) / 2.0
        z = new + ((mom - 1.0) / mom_next) * (new - beta)
        step = float(np.max(np.abs(new - beta)))
        beta, mom, f_prev = new, mom_next, f_new
        if step < tol:
            # momentum can stall on a kink; only a plain prox step certifies optimality
            plain = _prox(beta - t * (K @ beta - y), t, eps, C)
            if float(np.max(np.abs(plain - beta))) < tol:
                break
            mom = 1.0
            z = beta.copy()

    r = y - K @ beta
    margin = 1e-7 * C
    free = (np.abs(beta) > margin) & (np.abs(beta) < C - margin)
    if free.any():
        bias = float(np.mean(r[free] - eps * np.sign(beta[free])))
    else:
        lower, upper = -math.inf, math.inf
        for ri, bi in zip(r, beta):
            if bi >= C - margin:
                upper = min(upper, ri - eps)
            elif bi <= -C + margin:
                lower = max(lower, ri + eps)
            else:
                lower = max(lower, ri - eps)
                upper = min(upper, ri + eps)
        bias = (lower + upper) / 2.0
    return beta, bias, svr_dual_objective(K, y, beta, eps)


def svr_oracle_predict(X_train, beta, bias, gamma, X_query):
    out = []
    for q in np.asarray(X_query, dtype=float):
        acc = bias
        for xi, bi in zip(np.asarray(X_train, dtype=float), beta):
            d = xi - q
            acc += bi * math.exp(-gamma * float(np.sum(d * d)))
        out.append(acc)
    return np.array(out)


# ------------------------------------------------------------- CART split ---

def _sse(values):
    if len(values) == 0:
        return Fraction(0)
    m = sum(values, Fraction(0)) / len(values)
    return sum(((v - m) ** 2 for v in values), Fraction(0))


def exhaustive_best_split(X, y, min_samples_leaf=1):
    """Scan every (feature, midpoint) pair, recomputing SSE from scratch.

    Arithmetic is exact (rationals), so genuine ties are recognised as ties and
    keep the first candidate in (feature, ascending threshold) order. Returns
    (feature, threshold, gain) with a float gain, or None.
    """
    X = np.asarray(X, dtype=float)
    y = [Fraction(float(v)) for v in y]
    parent = _sse(y)
    best = None
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2.0
            left = [y[i] for i in range(len(y)) if X[i, f] <= thr]
            right = [y[i] for i in range(len(y)) if X[i, f] > thr]
            if len(left) < min_samples_leaf or len(right) < min_samples_leaf:
                continue
            gain = parent - _sse(left) - _sse(right)
            if gain > 0 and (best is None or gain > best[2]):
                best = (f, thr, gain)
    return None if best is None else (best[0], best[1], float(best[2]))


# ----------------------------------------------------------- F distribution ---

def f_cdf_quadrature(d1, d2, x, n=200_000):
    """F CDF by composite Simpson integration of the density after u = t/(1+t)."""
    if x <= 0:
        return 0.0
    # substitute t = s^2 to remove the t^(d1/2 - 1) singularity at 0 when d1 = 1
    log_c = (math.lgamma((d1 + d2) / 2) - math.lgamma(d1 / 2) - math.lgamma(d2 / 2)
             + (d1 / 2) * math.log(d1 / d2))

    def integrand(s):
        t = s * s
        if t == 0:
            return 2.0 * math.exp(log_c) if d1 == 1 else 0.0
        log_pdf = log_c + (d1 / 2 - 1) * math.log(t) - ((d1 + d2) / 2) * math.log1p(d1 * t / d2)
        return math.exp(log_pdf) * 2.0 * s

    upper = math.sqrt(x)
    h = upper / n
    total = integrand(0.0) + integrand(upper)
    for k in range(1, n):
        total += (4 if k % 2 else 2) * integrand(k * h)
    return total * h / 3.0


# -------------------------------------------------------------- MLP grads ---

def central_difference(f, params, h=1e-6):
    """Numerical gradient of scalar ``f`` w.r.t. each array in ``params`` (in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = f()
            p[idx] = old - h
            down = f()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads
