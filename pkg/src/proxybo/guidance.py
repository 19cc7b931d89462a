"""Proxy-guided candidate selection.

One selection step works like this:

1. With fewer than :data:`COLD_START` observations, return a random
   unevaluated encoding.
2. Score how well each component orders the observations. A component is the
   surrogate ``"M"`` or one proxy. The score is the fraction of
   order-preserving pairs ``G = 2F / (n (n - 1))``. Proxies are judged on
   their raw scores. The surrogate is judged on out-of-fold predictions, so
   it cannot memorise the points it is judged on.
3. Turn ``G`` into influence weights with a softmax whose temperature
   ``tau0 / (1 + log T)`` shrinks with the iteration count ``T``.
4. Draw ``Q`` candidates, half uniformly and half by single-edit mutation of
   the best observed encodings.
5. Rank the candidates under every component (rank 1 is most promising:
   highest expected improvement, lowest proxy score). Return the candidate
   whose influence-weighted rank sum is smallest.

A pair ``(j, k)`` is order-preserving when ``(s_j < s_k) == (y_j < y_k)``,
with strict inequalities on both sides. This is deliberately literal: a pair
tied in both score and objective counts as preserving, while a pair tied in
score only counts when ``y_j > y_k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from . import surrogate
from .acquisition import expected_improvement
from .exceptions import SearchComplete
from .space import ArchEncoding, SearchSpaceSpec, from_index, mutate_rows, to_index

COLD_START = 5
N_PARENTS = 3
SURROGATE = "M"
_LOGS = {"e": np.log, "10": np.log10}


def pair_count(scores, y) -> int:
    """Number of order-preserving pairs between ``scores`` and objectives ``y``."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError(f"scores have shape {s.shape} but objectives have shape {y.shape}")
    agree = (s[:, None] < s[None, :]) == (y[:, None] < y[None, :])
    return int(np.count_nonzero(np.triu(agree, k=1)))


def pair_count_proxy(scores, y) -> int:
    return pair_count(scores, y)


def pair_count_surrogate(cv_preds, y) -> int:
    return pair_count(cv_preds, y)


def normalize_G(F: int, n: int) -> float:
    if n < 2:
        raise ValueError(f"G is undefined for fewer than 2 observations (n={n})")
    return 2.0 * F / (n * (n - 1))


def temperature(T: int, tau0: float, log_base: str = "e") -> float:
    if T < 1:
        raise ValueError(f"iteration T must be >= 1, got {T}")
    if tau0 <= 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")
    return tau0 / (1.0 + float(_LOGS[log_base](T)))


@dataclass(frozen=True)
class InfluenceVector:
    names: tuple[str, ...]
    G: np.ndarray
    I: np.ndarray
    tau: float
    T: int

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {n: (float(g), float(i)) for n, g, i in zip(self.names, self.G, self.I)}

    def weight(self, name: str) -> float:
        return float(self.I[self.names.index(name)])


def influence(G_values, T: int, tau0: float, names: Sequence[str] | None = None, log_base: str = "e") -> InfluenceVector:
    """Softmax of ``G / tau`` with ``tau = tau0 / (1 + log T)``."""
    if isinstance(G_values, Mapping):
        names = tuple(G_values)
        G = np.array([G_values[n] for n in names], dtype=np.float64)
    else:
        G = np.asarray(G_values, dtype=np.float64)
        names = tuple(names) if names is not None else tuple(f"c{i}" for i in range(len(G)))
    tau = temperature(T, tau0, log_base)
    logits = G / tau
    w = np.exp(logits - logits.max())
    I = w / w.sum()
    return InfluenceVector(names, G, I, tau, int(T))


@dataclass(frozen=True)
class ComponentScoreTable:
    """Raw scores and per-component ranks for ``Q`` candidates.

    Row ``c`` of ``ranks`` ranks the candidates under component ``c`` with
    rank 1 the most promising; ties share their average rank.
    """

    names: tuple[str, ...]
    raw: np.ndarray
    ranks: np.ndarray

    @classmethod
    def build(cls, ei: np.ndarray | None, proxy_scores: Mapping[str, np.ndarray]) -> ComponentScoreTable:
        names, raw, ranks = [], [], []
        if ei is not None:
            names.append(SURROGATE)
            raw.append(np.asarray(ei, dtype=np.float64))
            ranks.append(rankdata(-raw[-1], method="average"))
        for name, s in proxy_scores.items():
            names.append(name)
            raw.append(np.asarray(s, dtype=np.float64))
            ranks.append(rankdata(raw[-1], method="average"))
        return cls(tuple(names), np.vstack(raw), np.vstack(ranks))


def combined_ranking(table: ComponentScoreTable, infl: InfluenceVector) -> np.ndarray:
    weights = np.array([infl.weight(n) for n in table.names])
    return weights @ table.ranks


def select(cr: np.ndarray) -> int:
    """Index of the lowest combined rank; ties go to the lowest index."""
    return int(np.argmin(cr))


# candidate generation


def _n_admissible(space: SearchSpaceSpec, allowed) -> int:
    return space.size if allowed is None else len(allowed)


def _free_indices(space: SearchSpaceSpec, observed: np.ndarray, allowed) -> np.ndarray:
    pool = np.arange(space.size, dtype=np.int64) if allowed is None else np.asarray(allowed, dtype=np.int64)
    return pool[~np.isin(pool, observed)]


def _uniform_indices(space: SearchSpaceSpec, n: int, rng: np.random.Generator, allowed) -> np.ndarray:
    if allowed is None:
        return to_index(space, rng.integers(0, space.ops_per_edge, size=(n, space.edge_count)))
    return np.asarray(allowed, dtype=np.int64)[rng.integers(len(allowed), size=n)]


def random_unevaluated(
    space: SearchSpaceSpec,
    observed,
    rng: np.random.Generator,
    allowed=None,
    max_tries: int = 100,
) -> ArchEncoding:
    """Uniform draw among admissible encodings that are not yet observed."""
    observed = set(int(i) for i in observed)
    if len(observed) >= _n_admissible(space, allowed):
        raise SearchComplete("every admissible encoding has been evaluated")
    for _ in range(max_tries):
        if allowed is None:
            x = rng.integers(0, space.ops_per_edge, size=space.edge_count)
            idx = to_index(space, x)
        else:
            idx = int(allowed[rng.integers(len(allowed))])
        if idx not in observed:
            return ArchEncoding(from_index(space, idx))
    free = _free_indices(space, np.fromiter(observed, dtype=np.int64), allowed)
    return ArchEncoding(from_index(space, free[rng.integers(len(free))]))


def _take_new(idx: np.ndarray, seen: set[int], allowed_set, limit: int) -> list[int]:
    out = []
    for i in idx.tolist():
        if i in seen or (allowed_set is not None and i not in allowed_set):
            continue
        seen.add(i)
        out.append(i)
        if len(out) == limit:
            break
    return out


def draw_candidates(
    space: SearchSpaceSpec,
    D: surrogate.ObservationSet,
    Q: int,
    rng: np.random.Generator,
    allowed=None,
    n_parents: int = N_PARENTS,
    max_rounds: int = 50,
) -> np.ndarray:
    """``Q`` distinct unevaluated candidates as an integer matrix.

    The first ``Q - Q // 2`` rows are uniform draws, the rest are single-edit
    mutations of the ``n_parents`` best observations (round-robin over the
    parents). When no more than ``Q`` admissible encodings remain unevaluated,
    all of them are returned in lexicographic order.
    """
    observed = np.fromiter(D.indices, dtype=np.int64, count=len(D))
    n_free = _n_admissible(space, allowed) - len(np.unique(observed))
    if n_free <= 0:
        raise SearchComplete("every admissible encoding has been evaluated")
    if n_free <= Q:
        return from_index(space, _free_indices(space, observed, allowed))
    allowed_set = None if allowed is None else set(np.asarray(allowed).tolist())
    seen = set(observed.tolist())
    n_local = Q // 2 if len(D) else 0
    n_uniform = Q - n_local

    chosen: list[int] = []
    for _ in range(max_rounds):
        need = n_uniform - len(chosen)
        if need <= 0:
            break
        chosen += _take_new(_uniform_indices(space, need, rng, allowed), seen, allowed_set, need)

    if n_local:
        order = np.argsort(D.y, kind="stable")[:n_parents]
        parents = D.X[order]
        local: list[int] = []
        for _ in range(max_rounds):
            need = n_local - len(local)
            if need <= 0:
                break
            rows = parents[np.arange(need) % len(parents)]
            local += _take_new(to_index(space, mutate_rows(rows, space, rng)), seen, allowed_set, need)
        chosen += local

    for _ in range(max_rounds):
        need = Q - len(chosen)
        if need <= 0:
            break
        chosen += _take_new(_uniform_indices(space, need, rng, allowed), seen, allowed_set, need)
    if len(chosen) < Q:
        spare = _free_indices(space, np.fromiter(seen, dtype=np.int64), allowed)
        chosen += spare[: Q - len(chosen)].tolist()
    return from_index(space, np.asarray(chosen, dtype=np.int64))


@dataclass(frozen=True)
class Selection:
    encoding: ArchEncoding
    influence: InfluenceVector | None
    candidates: np.ndarray | None = None
    table: ComponentScoreTable | None = None
    combined: np.ndarray | None = None


def measure(
    D: surrogate.ObservationSet,
    proxies: Sequence,
    T: int,
    tau0: float,
    cv_seed=0,
    k: int = surrogate.CV_FOLDS,
    log_base: str = "e",
) -> InfluenceVector:
    """Order-preservation score of every component and the resulting influence."""
    y = D.y
    n = len(D)
    G = {SURROGATE: normalize_G(pair_count_surrogate(surrogate.cv_predict(D, k=k, seed=cv_seed), y), n)}
    X = D.X
    for p in proxies:
        G[p.name] = normalize_G(pair_count_proxy(p.score_batch(X), y), n)
    return influence(G, T, tau0, log_base=log_base)


def sample_next(
    D: surrogate.ObservationSet,
    T: int,
    Q: int,
    M: surrogate.ForestModel | None,
    proxies: Sequence,
    tau0: float,
    rng: np.random.Generator,
    *,
    cv_seed=0,
    k: int = surrogate.CV_FOLDS,
    allowed=None,
    log_base: str = "e",
) -> Selection:
    """Choose the next encoding to evaluate (see module docstring)."""
    space = D.space
    if len(D) < COLD_START:
        return Selection(random_unevaluated(space, D.indices, rng, allowed), None)
    if M is None:
        raise ValueError("a fitted surrogate is required once the cold start is over")
    infl = measure(D, proxies, T, tau0, cv_seed=cv_seed, k=k, log_base=log_base)
    cands = draw_candidates(space, D, Q, rng, allowed=allowed)
    mean, var = M.predict(cands)
    ei = expected_improvement(mean, var, float(np.min(D.y)))
    table = ComponentScoreTable.build(ei, {p.name: p.score_batch(cands) for p in proxies})
    cr = combined_ranking(table, infl)
    j = select(cr)
    return Selection(ArchEncoding(cands[j]), infl, cands, table, cr)


def select_by_ei(D: surrogate.ObservationSet, Q: int, M: surrogate.ForestModel, rng, allowed=None) -> ArchEncoding:
    """Plain Bayesian-optimisation choice: the candidate of largest EI."""
    space = D.space
    if len(D) < COLD_START:
        return random_unevaluated(space, D.indices, rng, allowed)
    cands = draw_candidates(space, D, Q, rng, allowed=allowed)
    mean, var = M.predict(cands)
    ei = expected_improvement(mean, var, float(np.min(D.y)))
    return ArchEncoding(cands[int(np.argmax(ei))])
