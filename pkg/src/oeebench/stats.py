"""Error metrics, one-way ANOVA, Tukey HSD with letter groups, and Brown-Forsythe.

The special functions (log-gamma, regularized incomplete beta, F CDF and the
studentized-range critical value) are implemented here so the package needs
nothing beyond numpy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError


# ------------------------------------------------------------------ metrics ---

def _paired(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise DomainError(f"length mismatch: {y.shape[0]} vs {yhat.shape[0]}")
    if y.shape[0] == 0:
        raise DomainError("metrics need at least one row")
    return y, yhat


def mae(y, yhat) -> float:
    y, yhat = _paired(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def mape_detail(y, yhat, floor: float = 1.0) -> tuple[float, int]:
    """MAPE in percent over rows with ``y >= floor``, plus the number of rows excluded."""
    y, yhat = _paired(y, yhat)
    keep = y >= floor
    if not keep.any():
        raise DomainError(f"every target is below the MAPE floor {floor}")
    value = float(np.mean(np.abs(y[keep] - yhat[keep]) / y[keep]) * 100.0)
    return value, int((~keep).sum())


def mape(y, yhat, floor: float = 1.0) -> float:
    return mape_detail(y, yhat, floor)[0]


@dataclass(frozen=True, eq=False)
class ErrorSample:
    model_name: str
    abs_errors: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.abs_errors < 0):
            raise DomainError("absolute errors must be non-negative")

    @classmethod
    def from_predictions(cls, name: str, y, yhat) -> ErrorSample:
        y, yhat = _paired(y, yhat)
        return cls(name, np.abs(y - yhat))


# -------------------------------------------------------- special functions ---

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993, 676.5203681218851, -1259.1392167224028,
    771.32342877765313, -176.61502916214059, 12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0 by the Lanczos approximation (g = 7, 9 terms)."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def _beta_cf(a: float, b: float, x: float, max_iter: int = 500, eps: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError("betainc needs a, b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"betainc needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (log_gamma(a + b) - log_gamma(a) - log_gamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def f_cdf(df1: float, df2: float, x: float) -> float:
    if not (df1 >= 1 and df2 >= 1):
        raise DomainError(f"F degrees of freedom must be >= 1, got ({df1}, {df2})")
    if x <= 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    return betainc(df1 / 2.0, df2 / 2.0, df1 * x / (df1 * x + df2))


# alpha = 0.05 upper quantiles of the studentized range, k = 2..10
_Q_DF = (5.0, 10.0, 20.0, 30.0, 60.0, 120.0, math.inf)
_Q_TABLE = np.array([
    [3.6354, 4.6017, 5.2183, 5.6731, 6.0329, 6.3299, 6.5823, 6.8014, 6.9947],
    [3.1511, 3.8768, 4.3266, 4.6543, 4.9120, 5.1242, 5.3042, 5.4605, 5.5984],
    [2.9500, 3.5779, 3.9583, 4.2319, 4.4452, 4.6199, 4.7676, 4.8954, 5.0079],
    [2.8882, 3.4864, 3.8454, 4.1021, 4.3015, 4.4642, 4.6014, 4.7199, 4.8241],
    [2.8288, 3.3987, 3.7371, 3.9774, 4.1632, 4.3141, 4.4411, 4.5504, 4.6463],
    [2.8000, 3.3561, 3.6846, 3.9169, 4.0960, 4.2412, 4.3630, 4.4678, 4.5595],
    [2.7718, 3.3145, 3.6332, 3.8577, 4.0301, 4.1696, 4.2863, 4.3865, 4.4741],
])


def studentized_range_q(alpha: float, k: float, df: float) -> float:
    """Tukey critical value, interpolated linearly in k and in 1/df."""
    if alpha != 0.05:
        raise DomainError("only alpha = 0.05 is tabulated")
    if not 2 <= k <= 10:
        raise DomainError(f"k must lie in [2, 10], got {k}")
    if not df >= 5:
        raise DomainError(f"df must be >= 5, got {df}")
    inv = np.array([1.0 / d for d in _Q_DF])  # decreasing, ends at 0
    col = np.array([np.interp(k, np.arange(2, 11), row) for row in _Q_TABLE])
    return float(np.interp(1.0 / df, inv[::-1], col[::-1]))


# --------------------------------------------------------------------- ANOVA ---

@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float
    ms_between: float = 0.0
    ms_within: float = 0.0

    def to_dict(self) -> dict:
        return {"f_stat": self.f_stat, "df_between": self.df_between, "df_within": self.df_within,
                "p_value": self.p_value, "ms_between": self.ms_between, "ms_within": self.ms_within}


def _groups(groups) -> list[np.ndarray]:
    arrs = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    if len(arrs) < 2:
        raise DomainError("need at least 2 groups")
    if any(a.shape[0] < 2 for a in arrs):
        raise DomainError("every group needs at least 2 values")
    return arrs


def anova_oneway(groups: Sequence) -> AnovaResult:
    arrs = _groups(groups)
    k = len(arrs)
    n = sum(a.shape[0] for a in arrs)
    grand = float(np.concatenate(arrs).mean())
    ssb = sum(a.shape[0] * (float(a.mean()) - grand) ** 2 for a in arrs)
    ssw = sum(float(((a - a.mean()) ** 2).sum()) for a in arrs)
    dfb, dfw = k - 1, n - k
    msb, msw = ssb / dfb, ssw / dfw
    scale = max(1.0, grand * grand)
    if msw <= 1e-300 * scale:
        if msb <= 1e-24 * scale:
            return AnovaResult(0.0, dfb, dfw, 1.0, msb, msw)
        return AnovaResult(math.inf, dfb, dfw, 0.0, msb, msw)
    if msb <= 1e-24 * scale:
        # group means equal up to rounding
        msb = 0.0
    f = msb / msw
    return AnovaResult(f, dfb, dfw, 1.0 - f_cdf(dfb, dfw, f), msb, msw)


def dispersion_test(groups: Sequence, alpha: float = 0.05) -> tuple[float, float]:
    """Brown-Forsythe test: ANOVA on absolute deviations from group medians."""
    arrs = _groups(groups)
    z = [np.abs(a - np.median(a)) for a in arrs]
    res = anova_oneway(z)
    return res.f_stat, res.p_value


# ---------------------------------------------------------------- Tukey HSD ---

@dataclass(frozen=True)
class TukeyPair:
    model_a: str
    model_b: str
    mean_diff: float  # mean_a - mean_b
    ci_low: float
    ci_high: float
    significant: bool

    def reversed(self) -> TukeyPair:
        return TukeyPair(self.model_b, self.model_a, -self.mean_diff, -self.ci_high, -self.ci_low,
                         self.significant)

    def to_dict(self) -> dict:
        return {"model_a": self.model_a, "model_b": self.model_b, "mean_diff": self.mean_diff,
                "ci_low": self.ci_low, "ci_high": self.ci_high, "significant": self.significant}


@dataclass(frozen=True, eq=False)
class TukeyResult:
    pairwise: tuple[TukeyPair, ...]
    letter_groups: dict[str, str]
    q_crit: float
    ms_within: float
    df_within: int

    def pair(self, a: str, b: str) -> TukeyPair:
        for p in self.pairwise:
            if (p.model_a, p.model_b) == (a, b):
                return p
            if (p.model_a, p.model_b) == (b, a):
                return p.reversed()
        raise KeyError((a, b))


def _letters(names: list[str], means: list[float], sig: dict[frozenset, bool]) -> dict[str, str]:
    """Compact letter display over models sorted by mean, ascending.

    Each maximal run of consecutive models with no significant pair among them
    gets a letter; runs contained in an earlier run are skipped.
    """
    order = sorted(range(len(names)), key=lambda i: (means[i], names[i]))
    runs: list[tuple[int, int]] = []
    for start in range(len(order)):
        end = start
        while end + 1 < len(order) and not any(
                sig[frozenset((order[m], order[end + 1]))] for m in range(start, end + 1)):
            end += 1
        if not runs or end > runs[-1][1]:
            runs.append((start, end))
    out = {n: "" for n in names}
    for letter_idx, (s, e) in enumerate(runs):
        letter = _letter_name(letter_idx)
        for pos in range(s, e + 1):
            out[names[order[pos]]] += letter
    return out


def _letter_name(i: int) -> str:
    name = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        name = chr(ord("A") + r) + name
    return name


def tukey_hsd(groups: Mapping[str, Sequence] | Sequence, alpha: float = 0.05) -> TukeyResult:
    """All pairwise Tukey-Kramer intervals at family level ``1 - alpha``."""
    if isinstance(groups, Mapping):
        names = [str(k) for k in groups]
        values = list(groups.values())
    else:
        values = list(groups)
        names = [f"g{i}" for i in range(len(values))]
    arrs = _groups(values)
    anova = anova_oneway(arrs)
    k = len(arrs)
    q = studentized_range_q(alpha, k, anova.df_within)
    msw = anova.ms_within
    means = [float(a.mean()) for a in arrs]
    pairs = []
    sig: dict[frozenset, bool] = {}
    for i in range(k):
        for j in range(i + 1, k):
            diff = means[i] - means[j]
            half = q * math.sqrt(msw / 2.0 * (1.0 / arrs[i].shape[0] + 1.0 / arrs[j].shape[0]))
            lo, hi = diff - half, diff + half
            significant = bool(lo > 0 or hi < 0)
            pairs.append(TukeyPair(names[i], names[j], diff, lo, hi, significant))
            sig[frozenset((i, j))] = significant
    return TukeyResult(tuple(pairs), _letters(names, means, sig), q, msw, anova.df_within)
