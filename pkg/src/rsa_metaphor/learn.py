"""Fitting the speaker rationality parameter by gradient ascent.

The objective is the mean, over training metaphors, of the Pearson
correlation between the model's interpretation and the human one (or one
pooled correlation over all metaphor x feature pairs with
``objective_kind="pooled"``).  It is maximized by Polak-Ribiere conjugate
gradient ascent with an Armijo backtracking line search.  The optimizer is
written for d parameters; on this one-parameter problem the periodic
restart (every d iterations) makes it plain line-searched gradient ascent.

Everything here is deterministic: the only randomness is the split seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import RsaConfig, interpret_with_gradient
from .errors import DatasetError, Error, ZeroVarianceError
from .lexicon import HumanResponseTable, MetaphorItem, TypicalityTable

_OBJECTIVE_KINDS = ("mean", "pooled")

TRAIN_PER_CLASS = 9
TEST_PER_CLASS = 3

DEFAULT_MULTISTART_INITS = (0.5, 1.0, 5.0, 20.0, 50.0)


@dataclass(frozen=True)
class TrainTestSplit:
    """Stratified 18/6 partition of the 24 metaphors, 9+9 train per class."""

    train: tuple[str, ...]
    test: tuple[str, ...]
    seed: int


@dataclass(frozen=True)
class FitResult:
    """Outcome of one optimization run.

    ``converged`` is True when the gradient-norm tolerance was met;
    ``stop_reason`` is one of ``gradient_tolerance``, ``max_iterations``,
    ``line_search_stalled``.  ``trace`` holds (iteration, lam, objective)
    for the start point and every accepted iterate.
    """

    lambda_hat: float
    objective_value: float
    iterations: int
    gradient_norm_at_convergence: float
    converged: bool
    stop_reason: str
    trace: tuple[tuple[int, float, float], ...]


def make_split(items: tuple[MetaphorItem, ...], seed: int) -> TrainTestSplit:
    """Deterministic stratified shuffle: 9 train + 3 test per class."""
    per_class = TRAIN_PER_CLASS + TEST_PER_CLASS
    by_class: dict[str, list[str]] = {}
    for item in items:
        by_class.setdefault(item.inherence, []).append(item.id)
    classes = sorted(by_class)
    if len(items) != 2 * per_class or any(
        len(ids) != per_class for ids in by_class.values()
    ) or len(classes) != 2:
        counts = {k: len(v) for k, v in by_class.items()}
        raise DatasetError(
            f"split needs {2 * per_class} items, {per_class} per class; got {counts}"
        )
    rng = np.random.default_rng(seed)
    train: list[str] = []
    test: list[str] = []
    for klass in classes:
        order = rng.permutation(per_class)
        ids = by_class[klass]
        train.extend(ids[i] for i in order[:TRAIN_PER_CLASS])
        test.extend(ids[i] for i in order[TRAIN_PER_CLASS:])
    return TrainTestSplit(tuple(train), tuple(test), seed)


def _model_outputs(lam, items, human, config, table):
    cfg = replace(config, lam=float(lam))
    model, dmodel, target = [], [], []
    for item in items:
        p, dp = interpret_with_gradient(item, cfg, table)
        model.append(p)
        dmodel.append(dp)
        target.append(human.distribution(item.id))
    return model, dmodel, target


def _pearson_value_grad(m: np.ndarray, h: np.ndarray) -> tuple[float, np.ndarray]:
    """Pearson r(m, h) and its gradient in m."""
    a = m - m.mean()
    b = h - h.mean()
    saa = float(a @ a)
    sbb = float(b @ b)
    if saa == 0.0 or sbb == 0.0:
        raise ZeroVarianceError("constant vector in the training objective")
    denom = math.sqrt(saa * sbb)
    r = float(a @ b) / denom
    grad = b / denom - (r / saa) * a
    return r, grad


def objective(
    lam: float,
    train: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    config: RsaConfig,
    table: TypicalityTable,
    kind: str = "mean",
) -> float:
    """Correlation between model and human interpretations on the train set."""
    value, _ = _objective_and_gradient(lam, train, human, config, table, kind)
    return value


def gradient(
    lam: float,
    train: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    config: RsaConfig,
    table: TypicalityTable,
    kind: str = "mean",
) -> float:
    """Analytic d(objective)/d(lam), chained through softmax and normalizations."""
    _, g = _objective_and_gradient(lam, train, human, config, table, kind)
    return g


def _objective_and_gradient(lam, train, human, config, table, kind):
    if kind not in _OBJECTIVE_KINDS:
        raise ValueError(f"objective kind must be one of {_OBJECTIVE_KINDS}, got {kind!r}")
    if not train:
        raise ValueError("empty training set")
    model, dmodel, target = _model_outputs(lam, train, human, config, table)
    if kind == "pooled":
        m = np.concatenate(model)
        dm = np.concatenate(dmodel)
        h = np.concatenate(target)
        r, grad_m = _pearson_value_grad(m, h)
        value, deriv = r, float(grad_m @ dm)
    else:
        rs, derivs = [], []
        for m, dm, h in zip(model, dmodel, target):
            r, grad_m = _pearson_value_grad(m, h)
            rs.append(r)
            derivs.append(float(grad_m @ dm))
        value = float(np.mean(rs))
        deriv = float(np.mean(derivs))
    if not math.isfinite(value):
        raise Error(f"objective is not finite at lam={lam!r}")
    return value, deriv


def finite_difference_gradient(
    lam: float,
    train: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    config: RsaConfig,
    table: TypicalityTable,
    kind: str = "mean",
    step: float | None = None,
) -> float:
    """Central-difference cross-check for :func:`gradient`."""
    h = step if step is not None else 1e-4 * max(1.0, abs(lam))
    hi = objective(lam + h, train, human, config, table, kind)
    lo = objective(lam - h, train, human, config, table, kind)
    return (hi - lo) / (2.0 * h)


def _maximize_cg(f, grad, x0: np.ndarray, max_iterations: int, tol: float):
    """Polak-Ribiere+ conjugate gradient ascent with Armijo backtracking.

    Restarts to steepest ascent every ``x0.size`` iterations.  Non-finite
    objective values during the line search reject the step and halve it.
    Returns (x, fx, iterations, grad_norm, stop_reason, trace).
    """
    armijo_slope = 1e-4
    shrink = 0.5
    max_halvings = 60

    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    if not np.isfinite(fx):
        raise Error(f"objective is not finite at the initial point {x.tolist()}")
    g = grad(x)
    trace = [(0, x.copy(), fx)]
    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return x, fx, 0, gnorm, "gradient_tolerance", trace

    d = g.copy()
    step = 1.0
    stop_reason = "max_iterations"
    iterations = 0
    for k in range(1, max_iterations + 1):
        slope = float(g @ d)
        if slope <= 0.0:  # direction lost ascent: restart on the gradient
            d = g.copy()
            slope = float(g @ g)
        alpha = step
        accepted = False
        for _ in range(max_halvings):
            x_new = x + alpha * d
            try:
                f_new = f(x_new)
            except Error:  # undefined trial point: treat like a non-finite value
                f_new = -np.inf
            if np.isfinite(f_new) and f_new >= fx + armijo_slope * alpha * slope:
                accepted = True
                break
            alpha *= shrink
        if not accepted:
            stop_reason = "line_search_stalled"
            break
        iterations = k
        x, fx = x_new, f_new
        g_new = grad(x)
        trace.append((k, x.copy(), fx))
        gnorm = float(np.linalg.norm(g_new))
        if gnorm <= tol:
            g = g_new
            stop_reason = "gradient_tolerance"
            break
        if k % x.size == 0:
            beta = 0.0
        else:
            beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
        d = g_new + beta * d
        g = g_new
        step = alpha * 2.0  # warm-start the next search from twice the accepted step

    gnorm = float(np.linalg.norm(g))
    return x, fx, iterations, gnorm, stop_reason, trace


def learn_lambda(
    train: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    config: RsaConfig,
    table: TypicalityTable,
    init: float = 1.0,
    max_iterations: int = 200,
    tol: float = 1e-6,
    kind: str = "mean",
) -> FitResult:
    """Fit the rationality parameter from ``init`` by conjugate gradient ascent."""
    if not math.isfinite(init):
        raise ValueError(f"init must be finite, got {init!r}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol!r}")

    def f(x: np.ndarray) -> float:
        value, _ = _objective_and_gradient(x[0], train, human, config, table, kind)
        return value

    def g(x: np.ndarray) -> np.ndarray:
        _, deriv = _objective_and_gradient(x[0], train, human, config, table, kind)
        return np.array([deriv])

    x, fx, iterations, gnorm, stop_reason, raw_trace = _maximize_cg(
        f, g, np.array([float(init)]), max_iterations, tol
    )
    trace = tuple((k, float(xk[0]), float(fk)) for k, xk, fk in raw_trace)
    return FitResult(
        lambda_hat=float(x[0]),
        objective_value=float(fx),
        iterations=iterations,
        gradient_norm_at_convergence=gnorm,
        converged=stop_reason == "gradient_tolerance",
        stop_reason=stop_reason,
        trace=trace,
    )


def learn_lambda_multistart(
    train: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    config: RsaConfig,
    table: TypicalityTable,
    inits: tuple[float, ...] = DEFAULT_MULTISTART_INITS,
    max_iterations: int = 200,
    tol: float = 1e-6,
    kind: str = "mean",
) -> FitResult:
    """Run :func:`learn_lambda` from several starts and keep the best fit.

    The objective is not provably concave in the rationality parameter, so a
    handful of starts guards against shallow local maxima.
    """
    if not inits:
        raise ValueError("need at least one initial point")
    best: FitResult | None = None
    for init in inits:
        result = learn_lambda(
            train, human, config, table,
            init=init, max_iterations=max_iterations, tol=tol, kind=kind,
        )
        if best is None or result.objective_value > best.objective_value:
            best = result
    return best
