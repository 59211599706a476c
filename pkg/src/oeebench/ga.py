"""Genetic search over SVR (C, gamma) in log space with cross-validated MAE fitness."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DomainError, ModelError
from .prep import FoldPlan
from .svr import SvrParams, rbf, svr_fit, svr_predict

Fitness = Callable[[float, float], float]  # (log C, log gamma) -> loss


@dataclass(frozen=True)
class GaConfig:
    population: int = 30
    generations: int = 25
    c_bounds: tuple[float, float] = (1e-2, 1e4)
    gamma_bounds: tuple[float, float] = (1e-4, 1e1)
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_sd: float = 0.3
    elitism: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.population >= self.elitism >= 1:
            raise DomainError("need population >= elitism >= 1")
        if self.generations < 0:
            raise DomainError("generations must be >= 0")
        for name, (lo, hi) in (("c_bounds", self.c_bounds), ("gamma_bounds", self.gamma_bounds)):
            if not 0 < lo < hi:
                raise DomainError(f"{name} must satisfy 0 < min < max, got ({lo}, {hi})")
        if self.tournament_size < 1:
            raise DomainError("tournament_size must be >= 1")
        if not 0 <= self.crossover_rate <= 1:
            raise DomainError("crossover_rate must lie in [0, 1]")
        if self.mutation_sd < 0:
            raise DomainError("mutation_sd must be >= 0")

    def log_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.log([self.c_bounds[0], self.gamma_bounds[0]])
        hi = np.log([self.c_bounds[1], self.gamma_bounds[1]])
        return lo, hi


@dataclass(frozen=True, eq=False)
class GaResult:
    best_c: float
    best_gamma: float
    best_fitness: float
    history: np.ndarray  # best-ever fitness after each generation (index 0 = initial population)
    history_c: np.ndarray
    history_gamma: np.ndarray
    populations: tuple[np.ndarray, ...] = ()
    n_evaluations: int = 0

    def history_csv(self) -> str:
        lines = ["generation,best_fitness,best_c,best_gamma"]
        for g, (f, c, gm) in enumerate(zip(self.history, self.history_c, self.history_gamma)):
            lines.append(f"{g},{f:.10g},{c:.10g},{gm:.10g}")
        return "\n".join(lines) + "\n"


def fitness_cv(X, y, fold_plan: FoldPlan, params: SvrParams) -> float:
    """Mean validation MAE over the folds; any failed or non-converged fit scores +inf."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if fold_plan.k < 2 or len(fold_plan.folds) < 2:
        raise DomainError("cross-validation needs at least 2 folds")
    scores = []
    for i, fold in enumerate(fold_plan.folds):
        train = fold_plan.complement(i)
        try:
            model = svr_fit(X[train], y[train], params)
        except (DomainError, ModelError, FloatingPointError):
            return math.inf
        if not model.converged:
            return math.inf
        scores.append(float(np.mean(np.abs(svr_predict(model, X[fold]) - y[fold]))))
    return float(np.mean(scores))


class _CachedFitness:
    def __init__(self, fn: Fitness):
        self.fn = fn
        self.cache: dict[tuple[float, float], float] = {}

    def __call__(self, genes: np.ndarray) -> float:
        key = (round(float(genes[0]), 9), round(float(genes[1]), 9))
        if key not in self.cache:
            value = float(self.fn(float(genes[0]), float(genes[1])))
            self.cache[key] = math.inf if math.isnan(value) else value
        return self.cache[key]


def _tournament(rng: np.random.Generator, scores: np.ndarray, size: int) -> int:
    picks = rng.integers(0, scores.shape[0], size=size)
    # lowest score wins; earliest pick breaks ties
    return int(picks[np.argmin(scores[picks])])


def ga_search(fitness: Fitness, config: GaConfig = GaConfig(), keep_populations: bool = False) -> GaResult:
    """Minimise ``fitness(log C, log gamma)`` over the configured log box."""
    rng = np.random.default_rng(config.seed)
    lo, hi = config.log_box()
    evaluate = _CachedFitness(fitness)

    pop = rng.uniform(lo, hi, size=(config.population, 2))
    scores = np.array([evaluate(g) for g in pop])
    best_idx = int(np.argmin(scores))
    best_genes, best_score = pop[best_idx].copy(), float(scores[best_idx])
    history = [best_score]
    hist_genes = [best_genes.copy()]
    populations = [pop.copy()] if keep_populations else []

    for _ in range(config.generations):
        order = np.argsort(scores, kind="stable")
        children = [pop[i].copy() for i in order[:config.elitism]]
        while len(children) < config.population:
            a = pop[_tournament(rng, scores, config.tournament_size)]
            b = pop[_tournament(rng, scores, config.tournament_size)]
            if rng.random() < config.crossover_rate:
                w = rng.random(2)
                c1 = w * a + (1 - w) * b
                c2 = (1 - w) * a + w * b
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                child += rng.normal(0.0, config.mutation_sd, size=2)
                np.clip(child, lo, hi, out=child)
                if len(children) < config.population:
                    children.append(child)
        pop = np.array(children)
        scores = np.array([evaluate(g) for g in pop])
        gen_idx = int(np.argmin(scores))
        if scores[gen_idx] < best_score:
            best_genes, best_score = pop[gen_idx].copy(), float(scores[gen_idx])
        history.append(best_score)
        hist_genes.append(best_genes.copy())
        if keep_populations:
            populations.append(pop.copy())

    hg = np.array(hist_genes)
    return GaResult(
        best_c=float(math.exp(best_genes[0])),
        best_gamma=float(math.exp(best_genes[1])),
        best_fitness=best_score,
        history=np.array(history),
        history_c=np.exp(hg[:, 0]),
        history_gamma=np.exp(hg[:, 1]),
        populations=tuple(populations),
        n_evaluations=len(evaluate.cache),
    )


def ga_tune(X, y, fold_plan: FoldPlan, svr_base: SvrParams = SvrParams(),
            config: GaConfig = GaConfig()) -> GaResult:
    """Tune (C, gamma) of an RBF SVR by genetic search on cross-validated MAE."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    def cv(log_c: float, log_gamma: float) -> float:
        params = replace(svr_base, C=math.exp(log_c), kernel=rbf(math.exp(log_gamma)))
        return fitness_cv(X, y, fold_plan, params)

    return ga_search(cv, config)
