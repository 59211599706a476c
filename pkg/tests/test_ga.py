import math

import numpy as np
import pytest

from oeebench.errors import DomainError
from oeebench.ga import GaConfig, fitness_cv, ga_search, ga_tune
from oeebench.prep import FoldPlan, kfold
from oeebench.svr import SvrParams, rbf, svr_fit, svr_predict


def _bowl(log_c, log_g):
    return (log_c - 2) ** 2 + (log_g + 1) ** 2


@pytest.mark.parametrize("seed", range(10))
def test_quadratic_seam_finds_optimum(seed):
    res = ga_search(_bowl, GaConfig(seed=seed))
    assert abs(math.log(res.best_c) - 2) <= 0.05
    assert abs(math.log(res.best_gamma) + 1) <= 0.05


@pytest.mark.parametrize("seed", range(5))
def test_history_non_increasing_and_best_ever(seed):
    seen = []

    def f(a, b):
        v = _bowl(a, b) + math.sin(5 * a)
        seen.append(v)
        return v
    res = ga_search(f, GaConfig(population=10, generations=12, seed=seed))
    assert len(res.history) == 13
    assert np.all(np.diff(res.history) <= 0)
    assert res.best_fitness == min(seen) == res.history[-1]


def test_population_and_bounds_respected():
    cfg = GaConfig(population=9, generations=15, mutation_sd=3.0, seed=4)
    lo, hi = cfg.log_box()
    res = ga_search(_bowl, cfg, keep_populations=True)
    assert len(res.populations) == 16
    for pop in res.populations:
        assert pop.shape == (9, 2)
        assert np.all(pop >= lo) and np.all(pop <= hi)


def test_deterministic_by_seed():
    a = ga_search(_bowl, GaConfig(generations=5, seed=8))
    b = ga_search(_bowl, GaConfig(generations=5, seed=8))
    assert (a.best_c, a.best_gamma) == (b.best_c, b.best_gamma)
    assert np.array_equal(a.history, b.history)


def test_cache_avoids_refits():
    calls = []

    def f(a, b):
        calls.append((a, b))
        return 1.0
    res = ga_search(f, GaConfig(population=6, generations=4, mutation_sd=0.0, crossover_rate=0.0, seed=1))
    assert len(calls) == res.n_evaluations <= 6


def test_all_infinite_still_returns():
    res = ga_search(lambda a, b: math.inf, GaConfig(population=4, generations=2))
    assert res.best_fitness == math.inf


def test_nan_fitness_is_penalised():
    res = ga_search(lambda a, b: math.nan if a > 0 else _bowl(a, b), GaConfig(generations=5, seed=2))
    assert math.log(res.best_c) <= 0 and math.isfinite(res.best_fitness)


def test_history_csv():
    res = ga_search(_bowl, GaConfig(population=4, generations=3))
    lines = res.history_csv().splitlines()
    assert lines[0] == "generation,best_fitness,best_c,best_gamma" and len(lines) == 5


def test_config_validation():
    for bad in (dict(population=1, elitism=2), dict(elitism=0), dict(c_bounds=(10.0, 1.0)),
                dict(gamma_bounds=(0.0, 1.0)), dict(crossover_rate=1.5), dict(mutation_sd=-1)):
        with pytest.raises(DomainError):
            GaConfig(**bad)


def test_fitness_constant_target_within_tube(rng):
    X = rng.normal(size=(30, 2))
    plan = kfold(np.arange(30), 3, seed=0)
    assert fitness_cv(X, np.full(30, 4.0), plan, SvrParams(epsilon=0.5)) <= 0.5


def test_fitness_single_fold_forbidden(rng):
    X, y = rng.normal(size=(10, 2)), rng.normal(size=10)
    with pytest.raises(DomainError):
        fitness_cv(X, y, FoldPlan(1, (np.arange(10),)), SvrParams())


def test_fitness_matches_hand_average(rng):
    X, y = rng.normal(size=(21, 3)), 5 * rng.normal(size=21)
    plan = kfold(np.arange(21), 3, seed=5)
    params = SvrParams(C=3.0, epsilon=0.2, kernel=rbf(0.4))
    maes = []
    for fold in plan.folds:
        train = np.concatenate([f for f in plan.folds if f is not fold])
        m = svr_fit(X[train], y[train], params)
        maes.append(np.mean(np.abs(svr_predict(m, X[fold]) - y[fold])))
    assert fitness_cv(X, y, plan, params) == pytest.approx(sum(maes) / 3, rel=1e-12)


def test_fitness_non_converged_is_infinite(rng):
    X, y = rng.normal(size=(30, 2)), 10 * rng.normal(size=30)
    plan = kfold(np.arange(30), 3, seed=0)
    assert fitness_cv(X, y, plan, SvrParams(C=100.0, epsilon=0.01, max_passes=2)) == math.inf


def test_ga_tune_beats_default_on_smooth_target(rng):
    X = rng.uniform(-2, 2, size=(60, 2))
    y = 10 * np.sin(X[:, 0]) + 5 * X[:, 1] ** 2
    plan = kfold(np.arange(60), 3, seed=1)
    base = SvrParams(epsilon=0.1)
    res = ga_tune(X, y, plan, base, GaConfig(population=8, generations=4, seed=3))
    default = fitness_cv(X, y, plan, base)
    assert res.best_fitness <= default
    assert 1e-2 <= res.best_c <= 1e4 and 1e-4 <= res.best_gamma <= 1e1
