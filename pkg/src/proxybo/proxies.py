"""Zero-cost proxy scores.

Every scorer returns a value where *lower predicts a better architecture*.
The raw saliency metrics are "higher is better", so the architecture score
negates them exactly once:

* snip: ``-sum |dL/dtheta * theta|`` with a squared-error loss on a seeded
  batch of standard-normal inputs and targets.
* synflow: ``-sum dL/dtheta * theta`` where the parameters are replaced by
  their absolute values and ``L`` is the sum of outputs for an all-ones input.
  Pass ``absolute=False`` for the variant on the raw parameters.
* jacob_cov: ``-log det(K + eps I)`` where ``K`` is the correlation matrix of
  the per-example input Jacobians of the summed output.

Scores that come out non-finite are replaced by ``+inf`` (the worst score)
and logged, so one degenerate network does not abort a sweep.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tinynet
from .exceptions import NumericOverflowError, TableLookupError
from .space import SearchSpaceSpec

log = logging.getLogger(__name__)

FORMULA_PROXIES = ("snip", "synflow", "jacob_cov")
JACOB_EPS = 1e-5
WORST_SCORE = float("inf")


@dataclass(frozen=True)
class ProxyContext:
    """Seed and batch configuration shared by the formula proxies."""

    space: SearchSpaceSpec
    seed: int = 0
    batch_size: int = 16

    def batch(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng([self.seed, 0x5EED])
        X = rng.standard_normal((self.batch_size, tinynet.INPUT_DIM))
        targets = rng.standard_normal((self.batch_size, tinynet.OUTPUT_DIM))
        return X, targets

    def network(self, x):
        return tinynet.instantiate(x, self.space, init_seed=self.seed)


# formulas on an explicit network


def snip_saliency(net, params, X, targets) -> tinynet.ParamSet:
    grads = tinynet.grad_params(net, params, X, loss="squared_error", targets=targets)
    return tinynet.ParamSet(
        [np.abs(g * w) for g, w in zip(grads.weights, params.weights)],
        [np.abs(g * b) for g, b in zip(grads.biases, params.biases)],
    )


def synflow_saliency(net, params, absolute: bool = True) -> tinynet.ParamSet:
    if absolute:
        params = params.map(np.abs)
    ones = np.ones((1, net.input_dim))
    grads = tinynet.grad_params(net, params, ones, loss="sum_of_outputs")
    return tinynet.ParamSet(
        [g * w for g, w in zip(grads.weights, params.weights)],
        [g * b for g, b in zip(grads.biases, params.biases)],
    )


def _total(saliency: tinynet.ParamSet) -> float:
    return float(sum(np.sum(a) for a in saliency.arrays()))


def snip_from_params(net, params, X, targets) -> float:
    return -_total(snip_saliency(net, params, X, targets))


def synflow_from_params(net, params, absolute: bool = True) -> float:
    return -_total(synflow_saliency(net, params, absolute))


def correlation_matrix(J: np.ndarray) -> np.ndarray:
    """Row correlation matrix; rows with zero spread correlate with nothing."""
    J = np.asarray(J, dtype=np.float64)
    centered = J - J.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered**2, axis=1))
    degenerate = norms <= 1e-12 * max(1.0, float(np.max(np.abs(J), initial=0.0)))
    if np.any(degenerate):
        log.debug("jacob_cov: %d degenerate jacobian rows", int(degenerate.sum()))
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe[:, None]
    unit[degenerate] = 0.0
    K = unit @ unit.T
    np.fill_diagonal(K, 1.0)
    return K


def logdet_score(K: np.ndarray, eps: float = JACOB_EPS) -> float:
    _, logdet = np.linalg.slogdet(K + eps * np.eye(K.shape[0]))
    return -float(logdet)


def jacob_cov_from_params(net, params, X, eps: float = JACOB_EPS) -> float:
    if np.shape(X)[0] < 2:
        raise ValueError("jacob_cov needs a batch of at least two examples")
    J = tinynet.grad_inputs_per_example(net, params, X)
    return logdet_score(correlation_matrix(J), eps)


def _guarded(name, x, fn) -> float:
    try:
        value = fn()
    except NumericOverflowError as exc:
        log.warning("%s score for %s overflowed (%s); using worst score", name, x, exc)
        return WORST_SCORE
    if not np.isfinite(value):
        log.warning("%s score for %s is %r; using worst score", name, x, value)
        return WORST_SCORE
    return value


# architecture-level scores


def score_snip(x, ctx: ProxyContext) -> float:
    X, targets = ctx.batch()
    net, params = ctx.network(x)
    return _guarded("snip", x, lambda: snip_from_params(net, params, X, targets))


def score_synflow(x, ctx: ProxyContext, absolute: bool = True) -> float:
    net, params = ctx.network(x)
    return _guarded("synflow", x, lambda: synflow_from_params(net, params, absolute))


def score_jacob_cov(x, ctx: ProxyContext, eps: float = JACOB_EPS) -> float:
    X, _ = ctx.batch()
    net, params = ctx.network(x)
    return _guarded("jacob_cov", x, lambda: jacob_cov_from_params(net, params, X, eps))


def score_tabular(x, table, name: str) -> float:
    return float(table.proxy_scores(name, np.atleast_2d(np.asarray(x, dtype=np.int64)))[0])


class ProxyScorer:
    """Named scorer mapping encodings to lower-is-better scores."""

    kind = "abstract"

    def __init__(self, name: str):
        if name == "M":
            raise ValueError("'M' is reserved for the surrogate")
        self.name = name

    def score(self, x) -> float:
        raise NotImplementedError

    def score_batch(self, X) -> np.ndarray:
        return np.array([self.score(row) for row in np.asarray(X)], dtype=np.float64)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class FormulaScorer(ProxyScorer):
    """snip, synflow or jacob_cov computed on the encoding's tiny network."""

    def __init__(self, kind: str, ctx: ProxyContext, name: str | None = None, **options):
        if kind not in FORMULA_PROXIES:
            raise ValueError(f"unknown proxy kind {kind!r}")
        super().__init__(name or kind)
        self.kind = kind
        self.ctx = ctx
        self.options = options
        self._fn = {"snip": score_snip, "synflow": score_synflow, "jacob_cov": score_jacob_cov}[kind]
        self._cache: dict[tuple, float] = {}

    def score(self, x) -> float:
        key = tuple(int(v) for v in x)
        if key not in self._cache:
            self._cache[key] = self._fn(key, self.ctx, **self.options)
        return self._cache[key]


class TabularScorer(ProxyScorer):
    """Proxy column stored in a benchmark table."""

    kind = "tabular"

    def __init__(self, table, column: str, name: str | None = None):
        if column not in table.proxy_names:
            raise TableLookupError(f"table {table.name!r} has no proxy column {column!r}")
        super().__init__(name or column)
        self.table = table
        self.column = column

    def score(self, x) -> float:
        return score_tabular(x, self.table, self.column)

    def score_batch(self, X) -> np.ndarray:
        return self.table.proxy_scores(self.column, np.atleast_2d(np.asarray(X, dtype=np.int64)))


def make_scorers(selection: str, space: SearchSpaceSpec, table=None, seed: int = 0) -> list[ProxyScorer]:
    """Parse ``"snip,synflow,jacob_cov"``, ``"tabular:<name>[,...]"`` or ``"none"``."""
    selection = (selection or "none").strip()
    if selection in ("", "none"):
        return []
    ctx = ProxyContext(space, seed=seed)
    scorers: list[ProxyScorer] = []
    for token in selection.split(","):
        token = token.strip()
        if token.startswith("tabular:"):
            if table is None:
                raise ValueError("tabular proxies need a benchmark table")
            scorers.append(TabularScorer(table, token.split(":", 1)[1]))
        elif token in FORMULA_PROXIES:
            scorers.append(FormulaScorer(token, ctx))
        else:
            raise ValueError(f"unknown proxy {token!r}")
    names = [s.name for s in scorers]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate proxy names in {selection!r}")
    return scorers
