"""Search loops over a benchmark table: ProxyBO, plain BO, random search, REA.

All strategies evaluate by table lookup and never evaluate an encoding twice.
A run stops early when the admissible space is exhausted.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import guidance, surrogate
from .bench import BenchmarkTable
from .exceptions import SearchComplete, TableLookupError
from .guidance import InfluenceVector
from .space import ArchEncoding, mutate_one_edge, to_index

log = logging.getLogger(__name__)

STRATEGIES = ("proxybo", "bo", "random", "rea")
DEFAULT_TAU0 = 0.05
DEFAULT_Q = 500
DEFAULT_BUDGET = 200
REA_POPULATION = 20
REA_TOURNAMENT = 0.1


@dataclass
class SearchRun:
    strategy: str
    table: BenchmarkTable
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    proxies: Sequence = ()
    tau0: float = DEFAULT_TAU0
    Q: int = DEFAULT_Q
    cv_folds: int = surrogate.CV_FOLDS
    log_base: str = "e"
    population: int = REA_POPULATION
    tournament: float = REA_TOURNAMENT

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.Q < 1:
            raise ValueError("Q must be >= 1")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")


@dataclass
class TraceRecord:
    iteration: int
    encoding: ArchEncoding
    val: float
    test: float
    best_val: float
    best_test: float
    cost: float
    influence: InfluenceVector | None = None

    def evaluation(self) -> tuple:
        return (self.iteration, self.encoding, self.val, self.test, self.best_val, self.best_test, self.cost)


@dataclass
class RunTrace:
    """Per-iteration records of one run.

    ``val``/``test`` are minimisation-oriented losses, ``best_*`` their
    running minima, and ``cost`` the cumulative simulated training time.
    """

    strategy: str
    seed: int
    proxy_names: tuple[str, ...] = ()
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def _col(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def val(self):
        return self._col("val")

    @property
    def test(self):
        return self._col("test")

    @property
    def best_val(self):
        return self._col("best_val")

    @property
    def best_test(self):
        return self._col("best_test")

    @property
    def cost(self):
        return self._col("cost")

    @property
    def encodings(self) -> list[ArchEncoding]:
        return [r.encoding for r in self.records]

    @property
    def best_index(self) -> int:
        """Position of the record with the best validation loss."""
        return int(np.argmin(self.val))

    @property
    def best(self) -> TraceRecord:
        return self.records[self.best_index]

    def evaluations(self) -> list[tuple]:
        return [r.evaluation() for r in self.records]

    def influence_series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(G, I) per record for one component; NaN where no guidance ran."""
        G = np.full(len(self), np.nan)
        I = np.full(len(self), np.nan)
        for j, r in enumerate(self.records):
            if r.influence is not None:
                g, i = r.influence.as_dict()[name]
                G[j], I[j] = g, i
        return G, I

    def columns(self) -> list[str]:
        cols = ["iter", "encoding", "val", "test", "best_val", "best_test", "cost", "G_M", "I_M"]
        for p in self.proxy_names:
            cols += [f"G_{p}", f"I_{p}"]
        return cols + ["tau"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for r in self.records:
            row = [r.iteration, str(r.encoding), repr(r.val), repr(r.test), repr(r.best_val), repr(r.best_test), repr(r.cost)]
            names = (guidance.SURROGATE,) + tuple(self.proxy_names)
            if r.influence is None:
                row += [""] * (2 * len(names) + 1)
            else:
                d = r.influence.as_dict()
                for n in names:
                    row += [repr(d[n][0]), repr(d[n][1])]
                row.append(repr(r.influence.tau))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, strategy: str = "", seed: int = 0) -> RunTrace:
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        proxy_names = tuple(h[2:] for h in header[9:-1:2])
        trace = cls(strategy, seed, proxy_names)
        names = (guidance.SURROGATE,) + proxy_names
        for row in rows[1:]:
            infl = None
            if row[7] != "":
                G = np.array([float(row[7 + 2 * i]) for i in range(len(names))])
                I = np.array([float(row[8 + 2 * i]) for i in range(len(names))])
                infl = InfluenceVector(names, G, I, float(row[-1]), int(row[0]))
            trace.records.append(
                TraceRecord(int(row[0]), ArchEncoding.parse(row[1]), *map(float, row[2:7]), influence=infl)
            )
        return trace


class _Recorder:
    def __init__(self, cfg: SearchRun):
        self.cfg = cfg
        self.table = cfg.table
        self.D = surrogate.ObservationSet(cfg.table.space)
        self.trace = RunTrace(cfg.strategy, cfg.seed, tuple(p.name for p in cfg.proxies))
        self.best_val = np.inf
        self.best_test = np.inf
        self.cost = 0.0

    def evaluate(self, it: int, x, infl=None) -> float:
        try:
            val, test, cost = self.table.evaluate(x)
        except TableLookupError as exc:
            raise TableLookupError(
                f"{self.cfg.strategy} run (seed {self.cfg.seed}) failed at iteration {it}: {exc}"
            ) from exc
        self.best_val = min(self.best_val, val)
        self.best_test = min(self.best_test, test)
        self.cost += cost
        self.D.add(x, val, it)
        self.trace.records.append(
            TraceRecord(it, ArchEncoding(x), val, test, self.best_val, self.best_test, self.cost, infl)
        )
        return val


def _seed(cfg: SearchRun, it: int, purpose: int) -> list[int]:
    return [cfg.seed, it, purpose]


def _run_model_based(cfg: SearchRun, use_proxies: bool) -> RunTrace:
    rec = _Recorder(cfg)
    rng = np.random.default_rng(cfg.seed)
    allowed = cfg.table.allowed
    proxies = list(cfg.proxies) if use_proxies else []
    for it in range(1, cfg.budget + 1):
        D = rec.D
        M = surrogate.fit(D, seed=_seed(cfg, it, 1)) if len(D) >= guidance.COLD_START else None
        try:
            if use_proxies:
                sel = guidance.sample_next(
                    D, it, cfg.Q, M, proxies, cfg.tau0, rng,
                    cv_seed=_seed(cfg, it, 2), k=cfg.cv_folds, allowed=allowed, log_base=cfg.log_base,
                )
                x, infl = sel.encoding, sel.influence
            else:
                x, infl = guidance.select_by_ei(D, cfg.Q, M, rng, allowed=allowed), None
        except SearchComplete:
            log.info("%s seed %d: space exhausted after %d evaluations", cfg.strategy, cfg.seed, len(D))
            break
        rec.evaluate(it, x, infl)
    return rec.trace


def run_proxybo(cfg: SearchRun) -> RunTrace:
    """Surrogate plus proxies combined by influence-weighted ranks."""
    return _run_model_based(cfg, use_proxies=True)


def run_bo(cfg: SearchRun) -> RunTrace:
    """Plain Bayesian optimisation: EI maximisation over the same candidates."""
    return _run_model_based(cfg, use_proxies=False)


def run_random(cfg: SearchRun) -> RunTrace:
    rec = _Recorder(cfg)
    rng = np.random.default_rng(cfg.seed)
    for it in range(1, cfg.budget + 1):
        try:
            x = guidance.random_unevaluated(cfg.table.space, rec.D.indices, rng, cfg.table.allowed)
        except SearchComplete:
            break
        rec.evaluate(it, x)
    return rec.trace


def run_rea(cfg: SearchRun, max_retries: int = 100) -> RunTrace:
    """Regularized evolution: tournament selection, single-edit mutation, aging.

    Children that were already evaluated are re-mutated (up to ``max_retries``
    times) before falling back to a random unevaluated encoding.
    """
    rec = _Recorder(cfg)
    rng = np.random.default_rng(cfg.seed)
    space = cfg.table.space
    allowed = cfg.table.allowed
    admissible = None if allowed is None else set(allowed.tolist())
    population: deque[tuple[ArchEncoding, float]] = deque()
    size = max(2, int(round(cfg.tournament * cfg.population)))
    for it in range(1, cfg.budget + 1):
        seen = rec.D.indices
        try:
            if len(population) < cfg.population:
                x = guidance.random_unevaluated(space, seen, rng, allowed)
            else:
                pick = rng.choice(len(population), size=min(size, len(population)), replace=False)
                parent = min((population[i] for i in sorted(pick)), key=lambda m: m[1])[0]
                x = None
                for _ in range(max_retries):
                    child = mutate_one_edge(parent, space, rng)
                    idx = to_index(space, child)
                    if idx not in seen and (admissible is None or idx in admissible):
                        x = child
                        break
                if x is None:
                    x = guidance.random_unevaluated(space, seen, rng, allowed)
        except SearchComplete:
            break
        val = rec.evaluate(it, x)
        population.append((ArchEncoding(x), val))
        if len(population) > cfg.population:
            population.popleft()
    return rec.trace


RUNNERS = {"proxybo": run_proxybo, "bo": run_bo, "random": run_random, "rea": run_rea}


def run(cfg: SearchRun) -> RunTrace:
    return RUNNERS[cfg.strategy](cfg)


def run_many(configs: Sequence[SearchRun], jobs: int = 1) -> list[RunTrace]:
    """Run independent searches, optionally in worker processes; order is preserved."""
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, configs))


def regret(trace: RunTrace, table: BenchmarkTable) -> np.ndarray:
    """Best-so-far test loss minus the table optimum."""
    return trace.best_test - table.optimum_test_loss


def first_hit(trace: RunTrace, table: BenchmarkTable, tol: float = 0.0) -> int | None:
    """Evaluation count at which the global optimum (by test loss) was first seen."""
    hit = np.flatnonzero(regret(trace, table) <= tol)
    return int(hit[0]) + 1 if len(hit) else None
