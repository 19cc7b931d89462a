"""Probabilistic random forest surrogate.

Each tree splits on one-hot indicators of the categorical edges, i.e. on tests
of the form ``x[edge] == op``. Split choice is exhaustive over all indicators
(no feature subsampling) by variance reduction, leaves hold at least
``min_leaf`` samples. The forest's predictive mean is the average of the tree
predictions and its variance is the spread across trees.

Trees are grown by a compiled routine. Observations are put into canonical
order before bootstrapping, so the fitted model depends only on the data
multiset and the seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numba
import numpy as np

from .exceptions import ModelUnfitError
from .space import SearchSpaceSpec, to_index

N_TREES = 10
MIN_LEAF = 2
VARIANCE_FLOOR = 1e-10
CV_FOLDS = 5


class ObservationSet:
    """Evaluated encodings in insertion order.

    Fold ``j % k`` is assigned round-robin by insertion position, so fold sizes
    differ by at most one.
    """

    def __init__(self, space: SearchSpaceSpec):
        self.space = space
        self._X: list[tuple[int, ...]] = []
        self._y: list[float] = []
        self._iters: list[int] = []
        self._index: set[int] = set()

    def add(self, x, y: float, iteration: int | None = None) -> None:
        x = self.space.validate(x)
        y = float(y)
        if not np.isfinite(y):
            raise ValueError(f"objective for {x} is not finite: {y!r}")
        if iteration is None:
            iteration = self._iters[-1] + 1 if self._iters else 1
        if self._iters and iteration <= self._iters[-1]:
            raise ValueError(f"iteration {iteration} does not follow {self._iters[-1]}")
        self._X.append(tuple(x))
        self._y.append(y)
        self._iters.append(int(iteration))
        self._index.add(to_index(self.space, x))

    def __len__(self):
        return len(self._y)

    def __contains__(self, x) -> bool:
        return to_index(self.space, tuple(x)) in self._index

    @property
    def X(self) -> np.ndarray:
        return np.array(self._X, dtype=np.int64).reshape(len(self._X), self.space.edge_count)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._y, dtype=np.float64)

    @property
    def iterations(self) -> list[int]:
        return list(self._iters)

    @property
    def indices(self) -> set[int]:
        return set(self._index)

    def folds(self, k: int) -> np.ndarray:
        return np.arange(len(self)) % k


def one_hot(X: np.ndarray, space: SearchSpaceSpec) -> np.ndarray:
    """``(n, edges * ops)`` indicator features; column ``e * ops + v`` is ``x[e] == v``."""
    X = np.asarray(X, dtype=np.int64)
    return (X[:, :, None] == np.arange(space.ops_per_edge)).reshape(len(X), -1).astype(np.float64)


@numba.njit(cache=True)
def _grow_tree(X, y, sample, ops, min_leaf, feat, val, left, right, value, base):
    """Grow one tree on rows ``sample``; nodes are written from ``base``. Returns node count."""
    n_dims = X.shape[1]
    work = sample.copy()
    buf = np.empty_like(work)
    counts = np.zeros((n_dims, ops), dtype=np.int64)
    sums = np.zeros((n_dims, ops), dtype=np.float64)
    stack_node = np.empty(work.shape[0] * 2 + 2, dtype=np.int64)
    stack_lo = np.empty_like(stack_node)
    stack_hi = np.empty_like(stack_node)
    top = 0
    stack_node[0] = base
    stack_lo[0] = 0
    stack_hi[0] = work.shape[0]
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        n = hi - lo
        total = 0.0
        for i in range(lo, hi):
            total += y[work[i]]
        mean = total / n
        value[node] = mean
        left[node] = -1
        right[node] = -1
        feat[node] = -1
        val[node] = -1
        if n < 2 * min_leaf:
            continue
        spread = 0.0
        for i in range(lo, hi):
            d = y[work[i]] - mean
            spread += d * d
        if spread <= 1e-24 * max(1.0, mean * mean) * n:
            continue
        counts[:, :] = 0
        sums[:, :] = 0.0
        for i in range(lo, hi):
            r = work[i]
            for e in range(n_dims):
                counts[e, X[r, e]] += 1
                sums[e, X[r, e]] += y[r]
        base_term = total * total / n
        best_gain = 1e-12 * spread
        best_e = -1
        best_v = -1
        for e in range(n_dims):
            for v in range(ops):
                n1 = counts[e, v]
                n0 = n - n1
                if n1 < min_leaf or n0 < min_leaf:
                    continue
                s1 = sums[e, v]
                s0 = total - s1
                gain = s1 * s1 / n1 + s0 * s0 / n0 - base_term
                if gain > best_gain:
                    best_gain = gain
                    best_e = e
                    best_v = v
        if best_e < 0:
            continue
        nl = 0
        nr = 0
        for i in range(lo, hi):
            r = work[i]
            if X[r, best_e] == best_v:
                work[lo + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            work[lo + nl + i] = buf[i]
        feat[node] = best_e
        val[node] = best_v
        left_id = base + n_nodes
        right_id = base + n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        stack_node[top] = right_id
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        top += 1
        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        top += 1
    return n_nodes


@numba.njit(cache=True)
def _grow_forest(X, y, boots, ops, min_leaf):
    n_trees, m = boots.shape
    cap = 2 * m + 1
    feat = np.empty(n_trees * cap, dtype=np.int64)
    val = np.empty(n_trees * cap, dtype=np.int64)
    left = np.empty(n_trees * cap, dtype=np.int64)
    right = np.empty(n_trees * cap, dtype=np.int64)
    value = np.empty(n_trees * cap, dtype=np.float64)
    roots = np.empty(n_trees, dtype=np.int64)
    used = 0
    for t in range(n_trees):
        roots[t] = used
        used += _grow_tree(X, y, boots[t], ops, min_leaf, feat, val, left, right, value, used)
    return feat[:used], val[:used], left[:used], right[:used], value[:used], roots


@numba.njit(cache=True)
def _predict_forest(X, feat, val, left, right, value, roots):
    out = np.empty((roots.shape[0], X.shape[0]), dtype=np.float64)
    for t in range(roots.shape[0]):
        for i in range(X.shape[0]):
            node = roots[t]
            while left[node] >= 0:
                if X[i, feat[node]] == val[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, i] = value[node]
    return out


@dataclass
class ForestModel:
    space: SearchSpaceSpec
    seed: object
    n_trees: int
    min_leaf: int
    n_train: int
    _nodes: tuple = field(repr=False)

    def tree_predictions(self, X) -> np.ndarray:
        """``(n_trees, n)`` matrix of per-tree predictions."""
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.int64)))
        return _predict_forest(X, *self._nodes)

    def predict(self, X, floor: float = VARIANCE_FLOOR) -> tuple[np.ndarray, np.ndarray]:
        preds = self.tree_predictions(X)
        return preds.mean(axis=0), np.maximum(preds.var(axis=0), floor)

    @property
    def n_nodes(self) -> int:
        return len(self._nodes[0])


def _fit_arrays(space, X, y, seed, n_trees, min_leaf) -> ForestModel:
    X = np.asarray(X, dtype=np.int64).reshape(-1, space.edge_count)
    y = np.asarray(y, dtype=np.float64)
    # canonical order: by encoding index, then objective
    order = np.lexsort((y, X @ space.radix))
    X = np.ascontiguousarray(X[order])
    y = np.ascontiguousarray(y[order])
    n = len(y)
    rng = np.random.default_rng(seed)
    boots = rng.integers(0, n, size=(n_trees, n)).astype(np.int64)
    nodes = _grow_forest(X, y, boots, space.ops_per_edge, min_leaf)
    return ForestModel(space, seed, n_trees, min_leaf, n, nodes)


def fit(D: ObservationSet, seed: int = 0, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF) -> ForestModel:
    """Fit ``n_trees`` bootstrap regression trees to the observations."""
    if len(D) < 2:
        raise ModelUnfitError(f"need at least 2 observations to fit the surrogate, have {len(D)}")
    return _fit_arrays(D.space, D.X, D.y, seed, n_trees, min_leaf)


def fit_xy(space: SearchSpaceSpec, X, y, seed: int = 0, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF):
    if len(y) < 2:
        raise ModelUnfitError(f"need at least 2 observations to fit the surrogate, have {len(y)}")
    return _fit_arrays(space, X, y, seed, n_trees, min_leaf)


def predict(M: ForestModel, X) -> tuple[np.ndarray, np.ndarray]:
    return M.predict(X)


def effective_folds(n: int, k: int) -> int:
    if n < 2:
        raise ModelUnfitError(f"cross-validation needs at least 2 observations, have {n}")
    return max(2, min(k, n))


def cv_splits(n: int, k: int) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(fold, train_idx, held_out_idx)`` for round-robin folds."""
    k = effective_folds(n, k)
    folds = np.arange(n) % k
    for f in range(k):
        yield f, np.flatnonzero(folds != f), np.flatnonzero(folds == f)


def cv_predict(
    D: ObservationSet,
    k: int = CV_FOLDS,
    seed: int = 0,
    n_trees: int = N_TREES,
    min_leaf: int = MIN_LEAF,
) -> np.ndarray:
    """Out-of-fold mean prediction for every observation.

    Entry ``j`` comes from a forest trained without ``x_j``'s fold. ``k`` is
    reduced to ``len(D)`` when there are fewer observations than folds.
    """
    X, y = D.X, D.y
    out = np.empty(len(D))
    for f, train, held in cv_splits(len(D), k):
        model = _fit_arrays(D.space, X[train], y[train], [seed, f], n_trees, min_leaf)
        out[held], _ = model.predict(X[held])
    return out


def leaf_counts(M: ForestModel) -> Sequence[int]:
    """Number of leaves per tree (diagnostic)."""
    left, roots = M._nodes[2], M._nodes[5]
    bounds = list(roots) + [len(left)]
    return [int(np.sum(left[a:b] < 0)) for a, b in zip(bounds[:-1], bounds[1:])]
