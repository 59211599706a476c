"""Two-hidden-layer rectifier network trained with Adam on mean absolute error."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, DomainError


@dataclass(frozen=True)
class MlpArch:
    sizes: tuple[int, int, int, int] = (7, 125, 25, 1)

    def __post_init__(self) -> None:
        if len(self.sizes) != 4:
            raise DomainError("architecture must be [inputs, hidden1, hidden2, outputs]")
        if any(int(s) != s or s < 1 for s in self.sizes):
            raise DomainError(f"layer sizes must be positive integers, got {self.sizes}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 3000
    batch_size: int | None = None  # None -> full batch
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if self.epochs < 0:
            raise DomainError("epochs must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise DomainError("Adam betas must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """Layer matrices stored as (fan_out, fan_in) with matching bias vectors."""

    W: tuple[np.ndarray, np.ndarray, np.ndarray]
    b: tuple[np.ndarray, np.ndarray, np.ndarray]

    def params(self) -> list[np.ndarray]:
        return [self.W[0], self.b[0], self.W[1], self.b[1], self.W[2], self.b[2]]

    @classmethod
    def from_params(cls, params: list[np.ndarray]) -> MlpWeights:
        return cls(tuple(params[0::2]), tuple(params[1::2]))

    @property
    def arch(self) -> MlpArch:
        return MlpArch((self.W[0].shape[1], self.W[0].shape[0], self.W[1].shape[0], self.W[2].shape[0]))

    def to_dict(self) -> dict:
        return {
            "shapes": [list(p.shape) for p in self.params()],
            "values": [p.ravel().tolist() for p in self.params()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> MlpWeights:
        params = [np.asarray(v, dtype=float).reshape(s) for s, v in zip(d["shapes"], d["values"])]
        if len(params) != 6:
            raise DomainError("serialized network must hold 6 parameter arrays")
        return cls.from_params(params)


@dataclass(frozen=True, eq=False)
class Cache:
    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    out: np.ndarray


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray]) -> AdamState:
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


@dataclass(frozen=True, eq=False)
class LossCurve:
    train: np.ndarray = field(default_factory=lambda: np.zeros(0))
    test: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return int(self.train.shape[0])

    def to_csv(self) -> str:
        lines = ["epoch,train_mae,test_mae"]
        lines += [f"{e + 1},{tr:.10g},{te:.10g}" for e, (tr, te) in enumerate(zip(self.train, self.test))]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class MlpModel:
    weights: MlpWeights
    config: TrainConfig

    def predict(self, X) -> np.ndarray:
        return forward(self.weights, X)[0]


def huang_sizes(n_samples: int, n_outputs: int = 1) -> tuple[int, int]:
    """Hidden widths of the two-hidden-layer sizing rule, rounded half up."""
    if n_samples < 1 or n_outputs < 1:
        raise DomainError("n_samples and n_outputs must be >= 1")
    N, m = float(n_samples), float(n_outputs)
    l1 = math.sqrt((m + 2) * N) + 2 * math.sqrt(N / (m + 2))
    l2 = m * math.sqrt(N / (m + 2))
    return math.floor(l1 + 0.5), math.floor(l2 + 0.5)


def mlp_init(arch: MlpArch = MlpArch(), seed: int = 0) -> MlpWeights:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    W, b = [], []
    for fan_in, fan_out in zip(arch.sizes[:-1], arch.sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        W.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        b.append(np.zeros(fan_out))
    return MlpWeights(tuple(W), tuple(b))


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def forward(weights: MlpWeights, X) -> tuple[np.ndarray, Cache]:
    """Batch forward pass. Returns predictions of shape (n,) and the activation cache."""
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != weights.W[0].shape[1]:
        raise DomainError(f"input width {x.shape[1]} != network width {weights.W[0].shape[1]}")
    z1 = x @ weights.W[0].T + weights.b[0]
    a1 = _relu(z1)
    z2 = a1 @ weights.W[1].T + weights.b[1]
    a2 = _relu(z2)
    out = a2 @ weights.W[2].T + weights.b[2]
    return out[:, 0], Cache(x, z1, a1, z2, a2, out)


def mae_loss(weights: MlpWeights, X, y) -> float:
    pred = forward(weights, X)[0]
    return float(np.mean(np.abs(pred - np.asarray(y, dtype=float))))


def backward(weights: MlpWeights, cache: Cache, y) -> list[np.ndarray]:
    """Gradients of the batch MAE in ``params()`` order.

    The subgradient of |r| at 0 and of the rectifier at 0 are both taken as 0.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.shape[0]
    d_out = (np.sign(cache.out[:, 0] - y) / n)[:, None]
    gW3 = d_out.T @ cache.a2
    gb3 = d_out.sum(axis=0)
    d2 = (d_out @ weights.W[2]) * (cache.z2 > 0)
    gW2 = d2.T @ cache.a1
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ weights.W[1]) * (cache.z1 > 0)
    gW1 = d1.T @ cache.x
    gb1 = d1.sum(axis=0)
    return [gW1, gb1, gW2, gb2, gW3, gb3]


def adam_step(params: list[np.ndarray], state: AdamState, grads: list[np.ndarray],
              config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise DomainError("gradient shapes do not match parameter shapes")
    state.t += 1
    c1 = 1.0 - config.beta1 ** state.t
    c2 = 1.0 - config.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps_adam)


def mlp_train(X, y, X_test, y_test, arch: MlpArch = MlpArch(),
              config: TrainConfig = TrainConfig()) -> tuple[MlpModel, LossCurve]:
    """Train on (X, y); the curve holds train and test MAE after every epoch."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    X_test = np.asarray(X_test, dtype=float)
    y_test = np.asarray(y_test, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise DomainError("training rows and targets must be non-empty and aligned")
    if X_test.ndim != 2 or X_test.shape[0] != y_test.shape[0]:
        raise DomainError("test rows and targets must be aligned")
    if X.shape[1] != arch.sizes[0] or (X_test.shape[0] and X_test.shape[1] != arch.sizes[0]):
        raise DomainError(f"input width must equal {arch.sizes[0]}")

    weights = mlp_init(arch, config.seed)
    params = [p.copy() for p in weights.params()]
    net = MlpWeights.from_params(params)
    state = AdamState.zeros_like(params)
    n = X.shape[0]
    batch = n if config.batch_size is None else min(config.batch_size, n)
    order_rng = np.random.default_rng([config.seed, 1])
    train_curve = np.empty(config.epochs)
    test_curve = np.empty(config.epochs)
    # overflow surfaces as a non-finite loss and is reported as divergence
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = np.arange(n) if batch == n else order_rng.permutation(n)
            for start in range(0, n, batch):
                rows = order[start:start + batch]
                _, cache = forward(net, X[rows])
                adam_step(params, state, backward(net, cache, y[rows]), config)
            train_curve[epoch] = mae_loss(net, X, y)
            test_curve[epoch] = mae_loss(net, X_test, y_test) if y_test.shape[0] else math.nan
            if not math.isfinite(train_curve[epoch]):
                raise DivergenceError(epoch + 1)
    return MlpModel(net, config), LossCurve(train_curve, test_curve)
