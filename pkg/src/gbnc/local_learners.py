"""Local probabilistic classifiers p(Y | pi, X_c) fitted on one data partition.

Three families are provided:

* ``lr``   multinomial logistic regression (reference class 0, L2 on weights)
* ``gnb``  Gaussian naive Bayes with smoothed class priors
* ``cmle`` categorical maximum likelihood, ignores the continuous inputs

All predictions are computed as log-probabilities and normalized with
log-sum-exp before exponentiation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from gbnc.dataset import DatasetBundle
from gbnc.errors import DimensionMismatch, NumericalFailure

Family = Literal["lr", "gnb", "cmle"]
FAMILIES: tuple[str, ...] = ("lr", "gnb", "cmle")
PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class LearnerConfig:
    family: Family = "lr"
    l2_strength: float = 1.0
    max_iters: int = 10_000
    grad_tol: float = 1e-6
    smoothing: float = 1.0
    variance_floor: float = 1e-6
    optimizer: Literal["lbfgs", "gd"] = "lbfgs"

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown learner family {self.family!r}; expected one of {FAMILIES}")
        if self.l2_strength < 0 or self.smoothing < 0:
            raise ValueError("l2_strength and smoothing must be nonnegative")
        if self.grad_tol <= 0 or self.variance_floor <= 0 or self.max_iters < 1:
            raise ValueError("grad_tol, variance_floor and max_iters must be positive")
        if self.optimizer not in ("lbfgs", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True, eq=False)
class LocalModel:
    """A fitted local classifier.

    ``params`` holds family-specific arrays:

    * lr:   ``weights`` (M-1, D) and ``bias`` (M-1,)
    * gnb:  ``log_prior`` (M,), ``means`` (M, D), ``variances`` (M, D)
    * cmle: ``log_prior`` (M,)
    """

    family: Family
    target: str
    n_states: int
    params: dict[str, np.ndarray]
    mean: np.ndarray
    scale: np.ndarray
    train_count: int
    n_inputs: int = field(default=-1)

    def __post_init__(self) -> None:
        if self.n_inputs < 0:
            object.__setattr__(self, "n_inputs", int(self.mean.shape[0]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalModel):
            return NotImplemented
        return (
            (self.family, self.target, self.n_states, self.train_count, self.n_inputs)
            == (other.family, other.target, other.n_states, other.train_count, other.n_inputs)
            and self.params.keys() == other.params.keys()
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.scale, other.scale)
        )

    __hash__ = None  # type: ignore[assignment]


def uniform_model(target: str, n_states: int, n_inputs: int) -> LocalModel:
    """Fallback for an empty partition: uniform distribution, zero training rows."""
    return LocalModel(
        "cmle",
        target,
        n_states,
        {"log_prior": np.full(n_states, -math.log(n_states))},
        np.zeros(n_inputs),
        np.ones(n_inputs),
        0,
    )


def categorical_model(target: str, probs, n_inputs: int = 0, train_count: int = 0) -> LocalModel:
    probs = np.asarray(probs, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_prior = np.log(probs / probs.sum())
    return LocalModel("cmle", target, probs.size, {"log_prior": log_prior}, np.zeros(n_inputs), np.ones(n_inputs), train_count)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def fit_local(bundle: DatasetBundle, rows: np.ndarray, target: str, config: LearnerConfig) -> LocalModel:
    """Fit p(target | X_c) on the given rows of ``bundle``."""
    rows = np.asarray(rows, dtype=np.int64)
    y = bundle.column(target)[rows]
    n_states = bundle.schema.variable(target).cardinality
    return fit_arrays(bundle.x_c[rows], y, n_states, config, target=target)


def fit_arrays(X: np.ndarray, y: np.ndarray, n_states: int, config: LearnerConfig, target: str = "y", trace: list | None = None) -> LocalModel:
    """Fit a local model on a design matrix and integer labels in ``[0, n_states)``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        return uniform_model(target, n_states, d)
    family = config.family
    if d == 0 and family != "cmle":
        smoothing = 0.0 if family == "lr" else config.smoothing
        return _fit_cmle(y, n_states, smoothing, target, d)
    if family == "cmle":
        return _fit_cmle(y, n_states, config.smoothing, target, d)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Z = (X - mean) / scale
    if family == "gnb":
        params = _fit_gnb(Z, y, n_states, config)
    else:
        params = _fit_lr(Z, y, n_states, config, trace)
    return LocalModel(family, target, n_states, params, mean, scale, n)


def _fit_cmle(y: np.ndarray, n_states: int, smoothing: float, target: str, d: int) -> LocalModel:
    counts = np.bincount(y, minlength=n_states).astype(np.float64) + smoothing
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts) - math.log(counts.sum())
    return LocalModel("cmle", target, n_states, {"log_prior": log_prior}, np.zeros(d), np.ones(d), int(y.size))


def _fit_gnb(Z: np.ndarray, y: np.ndarray, n_states: int, config: LearnerConfig) -> dict[str, np.ndarray]:
    d = Z.shape[1]
    counts = np.bincount(y, minlength=n_states).astype(np.float64)
    means = np.zeros((n_states, d))
    variances = np.ones((n_states, d))
    for k in range(n_states):
        zk = Z[y == k]
        if zk.shape[0]:
            means[k] = zk.mean(axis=0)
            variances[k] = np.maximum(zk.var(axis=0), config.variance_floor)
    prior = counts + config.smoothing
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior) - math.log(prior.sum())
    return {"log_prior": log_prior, "means": means, "variances": variances}


def lr_objective(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, n_states: int, l2: float) -> tuple[float, np.ndarray]:
    """Penalized CLL of multinomial LR and its gradient w.r.t. the flat parameters.

    ``theta`` packs ``weights`` (M-1, D) row-major followed by ``bias`` (M-1,).
    """
    n, d = Z.shape
    m1 = n_states - 1
    W = theta[: m1 * d].reshape(m1, d)
    b = theta[m1 * d :]
    logits = np.zeros((n, n_states))
    logits[:, 1:] = Z @ W.T + b
    log_p = logits - logsumexp(logits, axis=1, keepdims=True)
    value = log_p[np.arange(n), y].sum() - 0.5 * l2 * float(np.sum(W * W))
    onehot = np.zeros((n, n_states))
    onehot[np.arange(n), y] = 1.0
    resid = onehot[:, 1:] - np.exp(log_p[:, 1:])
    grad_W = resid.T @ Z - l2 * W
    grad_b = resid.sum(axis=0)
    return value, np.concatenate([grad_W.ravel(), grad_b])


def _fit_lr(Z: np.ndarray, y: np.ndarray, n_states: int, config: LearnerConfig, trace: list | None) -> dict[str, np.ndarray]:
    n, d = Z.shape
    m1 = n_states - 1
    theta0 = np.zeros(m1 * (d + 1))
    # start from the label frequencies so an all-one-class partition converges at once
    counts = np.bincount(y, minlength=n_states) + 0.5
    theta0[m1 * d :] = np.log(counts[1:]) - np.log(counts[0])
    l2 = config.l2_strength
    if config.optimizer == "gd":
        theta = gradient_ascent(lambda t: lr_objective(t, Z, y, n_states, l2), theta0, config.max_iters, config.grad_tol, trace)
    else:
        def neg(t):
            v, g = lr_objective(t, Z, y, n_states, l2)
            return -v, -g

        callback = None
        if trace is not None:
            trace.append(lr_objective(theta0, Z, y, n_states, l2)[0])
            callback = lambda t: trace.append(lr_objective(t, Z, y, n_states, l2)[0])  # noqa: E731
        res = minimize(
            neg,
            theta0,
            jac=True,
            method="L-BFGS-B",
            callback=callback,
            options={"maxiter": config.max_iters, "gtol": config.grad_tol, "ftol": 1e-13, "maxcor": 20},
        )
        theta = res.x
    if not np.all(np.isfinite(theta)):
        raise NumericalFailure(f"logistic regression diverged (non-finite parameters, n={n}, d={d})")
    return {"weights": theta[: m1 * d].reshape(m1, d).copy(), "bias": theta[m1 * d :].copy()}


def gradient_ascent(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    theta: np.ndarray,
    max_iters: int,
    grad_tol: float,
    trace: list | None = None,
    step: float = 1.0,
) -> np.ndarray:
    """Full-batch gradient ascent with backtracking step halving.

    Every accepted step strictly increases the objective; the step grows by
    a factor two after each acceptance. Stops when the gradient max-norm
    falls below ``grad_tol``.
    """
    value, grad = fun(theta)
    if trace is not None:
        trace.append(value)
    for _ in range(max_iters):
        if np.max(np.abs(grad)) < grad_tol:
            break
        gg = float(grad @ grad)
        while True:
            cand = theta + step * grad
            cand_value, cand_grad = fun(cand)
            if np.isfinite(cand_value) and cand_value >= value + 0.5 * step * gg * 1e-4:
                break
            step *= 0.5
            if step < 1e-20:
                return theta
        theta, value, grad = cand, cand_value, cand_grad
        step *= 2.0
        if trace is not None:
            trace.append(value)
    if not np.isfinite(value):
        raise NumericalFailure("gradient ascent produced a non-finite objective")
    return theta


# ---------------------------------------------------------------------------
# prediction and scoring
# ---------------------------------------------------------------------------


def predict_log_proba(model: LocalModel, X: np.ndarray) -> np.ndarray:
    """Normalized log-probabilities for a batch of inputs, shape (n, M)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_inputs:
        raise DimensionMismatch(f"model expects {model.n_inputs} continuous inputs, got {X.shape[1]}")
    n = X.shape[0]
    p = model.params
    if model.family == "cmle":
        logits = np.broadcast_to(p["log_prior"], (n, model.n_states))
    else:
        Z = (X - model.mean) / model.scale
        if model.family == "lr":
            logits = np.zeros((n, model.n_states))
            logits[:, 1:] = Z @ p["weights"].T + p["bias"]
        else:
            var = p["variances"]
            diff = Z[:, None, :] - p["means"][None, :, :]
            ll = -0.5 * np.sum(diff * diff / var + np.log(2 * np.pi * var), axis=2)
            logits = ll + p["log_prior"]
    with np.errstate(invalid="ignore"):
        out = logits - logsumexp(logits, axis=1, keepdims=True)
    return out


def predict_proba(model: LocalModel, X: np.ndarray) -> np.ndarray:
    probs = np.exp(predict_log_proba(model, X))
    return probs / probs.sum(axis=1, keepdims=True)


def predict_dist(model: LocalModel, x_c) -> np.ndarray:
    """Class distribution of one target at a single continuous input vector."""
    x = np.asarray(x_c, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.n_inputs:
        raise DimensionMismatch(f"model expects {model.n_inputs} continuous inputs, got {x.shape[0]}")
    return predict_proba(model, x[None, :])[0]


@dataclass
class CllResult:
    value: float
    floored: int


def local_cll_arrays(model: LocalModel, X: np.ndarray, y: np.ndarray) -> CllResult:
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        return CllResult(0.0, 0)
    probs = predict_proba(model, X)[np.arange(y.size), y]
    floored = int(np.count_nonzero(probs < PROB_FLOOR))
    return CllResult(float(np.sum(np.log(np.maximum(probs, PROB_FLOOR)))), floored)


def local_cll(model: LocalModel, bundle: DatasetBundle, rows: np.ndarray, target: str | None = None) -> float:
    """Sum of log p(y_n | x_c,n) over ``rows``; probabilities floored at 1e-300."""
    target = target or model.target
    rows = np.asarray(rows, dtype=np.int64)
    return local_cll_arrays(model, bundle.x_c[rows], bundle.column(target)[rows]).value


def free_parameters(family: str, n_states: int, n_continuous: int) -> int:
    """Free parameters of one local model (per parent configuration)."""
    if family == "lr":
        return (n_states - 1) * (n_continuous + 1)
    if family == "gnb":
        return (n_states - 1) + 2 * n_states * n_continuous
    if family == "cmle":
        return n_states - 1
    raise ValueError(f"unknown family {family!r}")
