"""epsilon-insensitive support vector regression trained with SMO.

The dual is solved in the doubled form over ``a = [alpha, alpha*]`` with labels
``s = [+1, -1]``:

    min  1/2 a' Q a + p' a   s.t.  s' a = 0,  0 <= a <= C
    Q[t, u] = s_t s_u K(x_t, x_u),  p = [eps - y, eps + y]

and the fitted regressor is ``f(x) = sum_i beta_i K(x_i, x) + b`` with
``beta = alpha - alpha*``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DomainError

_TAU = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float = 0.15
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "rbf", "poly", "sigmoid"):
            raise DomainError(f"unknown kernel '{self.kind}'")
        if self.kind != "linear" and not self.gamma > 0:
            raise DomainError("kernel gamma must be positive")
        if self.kind == "poly" and (int(self.degree) != self.degree or self.degree < 1):
            raise DomainError("polynomial degree must be an integer >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "degree": self.degree, "coef0": self.coef0}


def linear() -> KernelSpec:
    return KernelSpec("linear", gamma=1.0)


def rbf(gamma: float) -> KernelSpec:
    return KernelSpec("rbf", gamma=gamma)


def poly(degree: int, gamma: float, coef0: float = 0.0) -> KernelSpec:
    return KernelSpec("poly", gamma=gamma, degree=degree, coef0=coef0)


def sigmoid(gamma: float, coef0: float = 0.0) -> KernelSpec:
    return KernelSpec("sigmoid", gamma=gamma, coef0=coef0)


@dataclass(frozen=True)
class SvrParams:
    C: float = 1.0
    epsilon: float = 1.0
    kernel: KernelSpec = field(default_factory=lambda: rbf(0.15))
    tol: float = 1e-3
    max_passes: int = 500_000

    def __post_init__(self) -> None:
        if not self.C > 0:
            raise DomainError(f"C must be positive, got {self.C}")
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        if not self.tol > 0:
            raise DomainError("tol must be positive")


@dataclass(frozen=True, eq=False)
class SvrModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    converged: bool = True
    n_iter: int = 0
    dual_objective: float = 0.0
    scaler_id: str = ""

    @property
    def n_support(self) -> int:
        return int(self.dual_coefs.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "support_vectors": self.support_vectors.tolist(),
            "n_features": self.n_features,
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "converged": self.converged,
            "n_iter": self.n_iter,
            "dual_objective": self.dual_objective,
            "scaler_id": self.scaler_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvrModel:
        sv = np.asarray(d["support_vectors"], dtype=float).reshape(-1, int(d["n_features"]))
        return cls(
            support_vectors=sv,
            dual_coefs=np.asarray(d["dual_coefs"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec(**d["kernel"]),
            converged=bool(d.get("converged", True)),
            n_iter=int(d.get("n_iter", 0)),
            dual_objective=float(d.get("dual_objective", 0.0)),
            scaler_id=d.get("scaler_id", ""),
        )


def kernel_eval(spec: KernelSpec, x, z) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DomainError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if spec.kind == "linear":
        return float(x @ z)
    if spec.kind == "rbf":
        d = x - z
        return math.exp(-spec.gamma * float(d @ d))
    if spec.kind == "poly":
        return (spec.gamma * float(x @ z) + spec.coef0) ** spec.degree
    return math.tanh(spec.gamma * float(x @ z) + spec.coef0)


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise DomainError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    dot = A @ B.T
    if spec.kind == "linear":
        return dot
    if spec.kind == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * dot
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-spec.gamma * sq)
    if spec.kind == "poly":
        return (spec.gamma * dot + spec.coef0) ** spec.degree
    return np.tanh(spec.gamma * dot + spec.coef0)


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    """Maximal-violating-pair SMO on the doubled dual. Returns (alpha, grad, iters, converged)."""
    n = y.shape[0]
    n2 = 2 * n
    a = np.zeros(n2)
    G = np.empty(n2)
    for t in range(n):
        G[t] = eps - y[t]
        G[t + n] = eps + y[t]

    for it in range(max_iter):
        # i maximises -s*G over I_up, j minimises it over I_low
        g_max = -np.inf
        g_min = np.inf
        i = -1
        j = -1
        for t in range(n2):
            if t < n:
                v = -G[t]
                if a[t] < C and v > g_max:
                    g_max = v
                    i = t
                if a[t] > 0 and v < g_min:
                    g_min = v
                    j = t
            else:
                v = G[t]
                if a[t] > 0 and v > g_max:
                    g_max = v
                    i = t
                if a[t] < C and v < g_min:
                    g_min = v
                    j = t
        if g_max - g_min < tol:
            return a, G, it, True

        ii = i % n
        jj = j % n
        si = 1.0 if i < n else -1.0
        sj = 1.0 if j < n else -1.0
        Kij = K[ii, jj]
        old_ai = a[i]
        old_aj = a[j]
        if si != sj:
            quad = K[ii, ii] + K[jj, jj] - 2.0 * Kij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            ai = a[i] + delta
            aj = a[j] + delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            elif ai < 0:
                ai = 0.0
                aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            elif aj > C:
                aj = C
                ai = C + diff
        else:
            quad = K[ii, ii] + K[jj, jj] - 2.0 * Kij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            ai = a[i] - delta
            aj = a[j] + delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            elif aj < 0:
                aj = 0.0
                ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            elif ai < 0:
                ai = 0.0
                aj = total
        a[i] = ai
        a[j] = aj
        ci = si * (ai - old_ai)
        cj = sj * (aj - old_aj)
        # Q[:, t] = s * s_t * [K[t % n], K[t % n]]
        for t in range(n):
            col = ci * K[ii, t] + cj * K[jj, t]
            G[t] += col
            G[t + n] -= col
    return a, G, max_iter, False


def _bias(a: np.ndarray, G: np.ndarray, C: float) -> float:
    """Mean over free variables; midpoint of the feasible interval otherwise."""
    n2 = a.shape[0]
    n = n2 // 2
    s = np.concatenate([np.ones(n), -np.ones(n)])
    yG = s * G
    at_upper = a >= C
    at_lower = a <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & (s < 0)) | (at_lower & (s > 0))
        lb_mask = (at_upper & (s > 0)) | (at_lower & (s < 0))
        ub = float(yG[ub_mask].min()) if ub_mask.any() else math.inf
        lb = float(yG[lb_mask].max()) if lb_mask.any() else -math.inf
        rho = (ub + lb) / 2.0
    return -rho


def svr_fit(X: np.ndarray, y: np.ndarray, params: SvrParams = SvrParams(), scaler_id: str = "") -> SvrModel:
    """Fit an epsilon-SVR by SMO.

    A model that hit ``params.max_passes`` is returned with ``converged=False``;
    callers decide whether to use it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError("SVR needs at least 2 rows")
    if X.shape[0] != y.shape[0]:
        raise DomainError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DomainError("SVR inputs must be finite")

    n = y.shape[0]
    K = kernel_matrix(params.kernel, X, X)
    a, G, iters, converged = _smo(
        np.ascontiguousarray(K), y, float(params.C), float(params.epsilon),
        float(params.tol), int(params.max_passes),
    )
    beta = a[:n] - a[n:]
    bias = _bias(a, G, params.C)
    p = np.concatenate([params.epsilon - y, params.epsilon + y])
    objective = 0.5 * float(a @ (G + p))
    keep = beta != 0
    return SvrModel(
        support_vectors=X[keep].copy(),
        dual_coefs=beta[keep].copy(),
        bias=bias,
        kernel=params.kernel,
        converged=converged,
        n_iter=iters,
        dual_objective=objective,
        scaler_id=scaler_id,
    )


def svr_predict(model: SvrModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if model.n_support == 0:
        if X.shape[1] != model.support_vectors.shape[1]:
            raise DomainError("feature width does not match the trained model")
        return np.full(X.shape[0], model.bias)
    if X.shape[1] != model.n_features:
        raise DomainError(
            f"feature width {X.shape[1]} does not match trained width {model.n_features}"
        )
    return kernel_matrix(model.kernel, X, model.support_vectors) @ model.dual_coefs + model.bias
