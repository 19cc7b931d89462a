"""Tabular benchmarks, a synthetic benchmark generator and evaluation metrics.

Table files are line oriented::

    #version 1
    #space edges=6 ops=5
    #meta name=nb2-like minimize=1 optimum_test=8.55
    #proxy name=synflow orientation=max
    3,0,4,1,1,2;9.31;9.44;1532.5;proxy:synflow=-12.7;proxy:snip=0.4

Each row is ``encoding;val;test;cost`` followed by optional
``proxy:<name>=<score>`` fields. Proxy scores are lower-is-better unless a
``#proxy`` header declares ``orientation=max``, in which case they are negated
on load. ``minimize=0`` marks accuracy-like metrics. Such tables still store
their raw values, but every search-facing view (``val_loss``, ``test_loss``,
``optimum_test_loss``) is negated so searches always minimise.
"""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .exceptions import CalibrationError, InvalidSpaceError, TableFormatError, TableLookupError
from .space import ArchEncoding, SearchSpaceSpec, all_rows, from_index, to_index

FORMAT_VERSION = 1
CALIBRATION_TOL = 0.05


@dataclass
class BenchmarkTable:
    space: SearchSpaceSpec
    keys: np.ndarray
    val: np.ndarray
    test: np.ndarray
    cost: np.ndarray
    proxies: dict[str, np.ndarray] = field(default_factory=dict)
    name: str = "table"
    minimize: bool = True
    optimum_test: float | None = None

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.int64)
        order = np.argsort(self.keys, kind="stable")
        self.keys = self.keys[order]
        if len(self.keys) and np.any(np.diff(self.keys) == 0):
            raise TableFormatError(None, "encoding", "duplicate encodings")
        self.val = np.asarray(self.val, dtype=np.float64)[order]
        self.test = np.asarray(self.test, dtype=np.float64)[order]
        self.cost = np.asarray(self.cost, dtype=np.float64)[order]
        self.proxies = {k: np.asarray(v, dtype=np.float64)[order] for k, v in self.proxies.items()}
        for label, col in [("val", self.val), ("test", self.test), ("cost", self.cost)]:
            if not np.all(np.isfinite(col)):
                raise TableFormatError(None, label, "non-finite metric")
        sign = 1.0 if self.minimize else -1.0
        self.val_loss = sign * self.val
        self.test_loss = sign * self.test

    def __len__(self):
        return len(self.keys)

    @property
    def exhaustive(self) -> bool:
        return len(self.keys) == self.space.size

    @property
    def proxy_names(self) -> list[str]:
        return list(self.proxies)

    @property
    def allowed(self) -> np.ndarray | None:
        """Admissible encoding indices, or ``None`` when every encoding is present."""
        return None if self.exhaustive else self.keys

    @property
    def optimum_test_loss(self) -> float:
        if self.optimum_test is not None:
            return float(self.optimum_test if self.minimize else -self.optimum_test)
        return float(self.test_loss.min())

    def encodings(self) -> np.ndarray:
        return from_index(self.space, self.keys)

    def rows(self, X) -> np.ndarray:
        """Row positions of the encodings in ``X`` (one per row)."""
        idx = np.atleast_1d(to_index(self.space, np.atleast_2d(np.asarray(X, dtype=np.int64))))
        pos = np.searchsorted(self.keys, idx)
        pos_c = np.minimum(pos, len(self.keys) - 1)
        missing = self.keys[pos_c] != idx
        if np.any(missing):
            bad = ArchEncoding(from_index(self.space, idx[np.argmax(missing)]))
            raise TableLookupError(f"encoding {bad} is not in table {self.name!r}")
        return pos_c

    def evaluate(self, x) -> tuple[float, float, float]:
        """``(val_loss, test_loss, cost)`` of one encoding."""
        r = int(self.rows(x)[0])
        return float(self.val_loss[r]), float(self.test_loss[r]), float(self.cost[r])

    def proxy_scores(self, name: str, X) -> np.ndarray:
        if name not in self.proxies:
            raise TableLookupError(f"table {self.name!r} has no proxy column {name!r}")
        return self.proxies[name][self.rows(X)]


# file format


def _fmt(v: float) -> str:
    return repr(float(v))


def _kv(line: str, lineno: int) -> dict[str, str]:
    out = {}
    for tok in line.split()[1:]:
        if "=" not in tok:
            raise TableFormatError(lineno, tok, "expected key=value")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _parse_float(text: str, lineno: int, fieldname: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise TableFormatError(lineno, fieldname, f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise TableFormatError(lineno, fieldname, f"non-finite value {text!r}")
    return v


def _parse_int(kv: dict, key: str, lineno: int) -> int:
    if key not in kv:
        raise TableFormatError(lineno, key, "missing")
    try:
        return int(kv[key])
    except ValueError:
        raise TableFormatError(lineno, key, f"not an integer: {kv[key]!r}") from None


def load_table(path) -> BenchmarkTable:
    """Parse and validate a table file; errors name the line and field."""
    space = None
    meta: dict[str, str] = {}
    flip: set[str] = set()
    keys, val, test, cost = [], [], [], []
    proxies: dict[str, list[float]] = {}
    proxy_set = None
    seen: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                head = line.split()[0]
                if head == "#version":
                    parts = line.split()
                    if len(parts) != 2 or parts[1] != str(FORMAT_VERSION):
                        raise TableFormatError(lineno, "version", f"unsupported schema version in {line!r}")
                elif head == "#space":
                    kv = _kv(line, lineno)
                    try:
                        space = SearchSpaceSpec(_parse_int(kv, "edges", lineno), _parse_int(kv, "ops", lineno))
                    except InvalidSpaceError as exc:
                        raise TableFormatError(lineno, "space", str(exc)) from None
                elif head == "#meta":
                    meta.update(_kv(line, lineno))
                elif head == "#proxy":
                    kv = _kv(line, lineno)
                    orient = kv.get("orientation", "min")
                    if "name" not in kv or orient not in ("min", "max"):
                        raise TableFormatError(lineno, "proxy", "need name=<s> and orientation=min|max")
                    if orient == "max":
                        flip.add(kv["name"])
                continue
            if space is None:
                raise TableFormatError(lineno, "space", "data row before '#space' header")
            fields = line.split(";")
            if len(fields) < 4:
                raise TableFormatError(lineno, "row", "expected encoding;val;test;cost")
            try:
                x = space.validate(ArchEncoding.parse(fields[0]))
            except InvalidSpaceError as exc:
                raise TableFormatError(lineno, "encoding", str(exc)) from None
            idx = to_index(space, x)
            if idx in seen:
                raise TableFormatError(lineno, "encoding", f"duplicate of line {seen[idx]}")
            seen[idx] = lineno
            keys.append(idx)
            val.append(_parse_float(fields[1], lineno, "val"))
            test.append(_parse_float(fields[2], lineno, "test"))
            cost.append(_parse_float(fields[3], lineno, "cost"))
            row_proxies = {}
            for extra in fields[4:]:
                if not extra.startswith("proxy:") or "=" not in extra:
                    raise TableFormatError(lineno, extra, "expected proxy:<name>=<value>")
                pname, pval = extra[len("proxy:") :].split("=", 1)
                if pname in row_proxies:
                    raise TableFormatError(lineno, f"proxy:{pname}", "repeated proxy column")
                row_proxies[pname] = _parse_float(pval, lineno, f"proxy:{pname}")
            if proxy_set is None:
                proxy_set = list(row_proxies)
                proxies = {p: [] for p in proxy_set}
            elif set(row_proxies) != set(proxy_set):
                raise TableFormatError(lineno, "proxy", f"proxy columns {sorted(row_proxies)} differ from {sorted(proxy_set)}")
            for p, v in row_proxies.items():
                proxies[p].append(v)
    if space is None:
        raise TableFormatError(None, "space", "missing '#space' header")
    if not keys:
        raise TableFormatError(None, "row", "table has no rows")
    minimize = meta.get("minimize", "1")
    if minimize not in ("0", "1"):
        raise TableFormatError(None, "minimize", f"expected 0 or 1, got {minimize!r}")
    optimum = meta.get("optimum_test")
    cols = {p: (-np.array(v) if p in flip else np.array(v)) for p, v in proxies.items()}
    return BenchmarkTable(
        space,
        np.array(keys),
        np.array(val),
        np.array(test),
        np.array(cost),
        cols,
        name=meta.get("name", os.path.splitext(os.path.basename(str(path)))[0]),
        minimize=minimize == "1",
        optimum_test=_parse_float(optimum, None, "optimum_test") if optimum is not None else None,
    )


def format_table(table: BenchmarkTable) -> str:
    if any(c.isspace() for c in table.name):
        raise ValueError("table names cannot contain whitespace")
    lines = [
        f"#version {FORMAT_VERSION}",
        f"#space edges={table.space.edge_count} ops={table.space.ops_per_edge}",
    ]
    meta = f"#meta name={table.name} minimize={int(table.minimize)}"
    if table.optimum_test is not None:
        meta += f" optimum_test={_fmt(table.optimum_test)}"
    lines.append(meta)
    X = table.encodings()
    names = table.proxy_names
    for r in range(len(table)):
        parts = [",".join(map(str, X[r].tolist())), _fmt(table.val[r]), _fmt(table.test[r]), _fmt(table.cost[r])]
        parts += [f"proxy:{p}={_fmt(table.proxies[p][r])}" for p in names]
        lines.append(";".join(parts))
    return "\n".join(lines) + "\n"


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_table(table: BenchmarkTable, path) -> None:
    atomic_write(path, format_table(table))


# rank statistics


def spearman(a, b, top: float | None = None) -> float:
    """Spearman rank correlation with average ranks for ties.

    ``top`` keeps only the best fraction of items by ``b`` (lowest values)
    before correlating.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"inputs must be 1-D of equal length, got {a.shape} and {b.shape}")
    if top is not None:
        if not 0 < top <= 1:
            raise ValueError("top must be in (0, 1]")
        keep = np.argsort(b, kind="stable")[: max(2, math.ceil(top * len(b)))]
        a, b = a[keep], b[keep]
    if len(a) < 2:
        raise ValueError("need at least two items")
    ra = rankdata(a) - (len(a) + 1) / 2.0
    rb = rankdata(b) - (len(b) + 1) / 2.0
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        raise ValueError("spearman is undefined for constant input")
    return float(np.clip((ra @ rb) / denom, -1.0, 1.0))


# synthetic benchmarks


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic table.

    ``proxies`` maps a column name to its target Spearman correlation with
    the test metric (positive means the lower-is-better score agrees with the
    error).
    """

    space: SearchSpaceSpec
    proxies: Mapping[str, float] = field(default_factory=dict)
    roughness: float = 0.3
    edge_spread: float = 1.0
    jitter: float = 0.04
    noise: float = 0.05
    name: str = "synthetic"

    def __post_init__(self):
        for n, rho in self.proxies.items():
            if not -1.0 <= rho <= 1.0:
                raise ValueError(f"target spearman for {n!r} must lie in [-1, 1], got {rho}")


def _objective(space: SearchSpaceSpec, rng: np.random.Generator, roughness: float, edge_spread: float, jitter: float) -> np.ndarray:
    """Per-edge effects, neighbouring-edge interactions and per-architecture jitter.

    Edge ``e`` gets an importance ``exp(edge_spread * N(0, 1))`` that scales
    its main effect; interactions between edges ``e`` and ``e + 1`` (cyclic)
    scale with ``roughness`` times the geometric mean of the two importances.
    """
    X = all_rows(space)
    E, m = space.edge_count, space.ops_per_edge
    importance = np.exp(edge_spread * rng.normal(size=E))
    main = rng.normal(size=(E, m)) * importance[:, None]
    f = main[np.arange(E), X].sum(axis=1)
    if E > 1:
        nxt = np.roll(np.arange(E), -1)
        pair_scale = np.sqrt(importance * importance[nxt])
        inter = rng.normal(size=(E, m, m)) * (roughness * pair_scale)[:, None, None]
        f = f + inter[np.arange(E), X, X[:, nxt]].sum(axis=1)
    f = f + jitter * f.std() * rng.normal(size=len(f))
    return 10.0 + 2.0 * (f - f.mean()) / f.std()


def calibrate_proxy(target_col, rho: float, rng: np.random.Generator, max_iter: int = 50, max_draws: int = 20, tol: float = CALIBRATION_TOL) -> np.ndarray:
    """Lower-is-better scores whose Spearman with ``target_col`` is ``rho +- tol``.

    Each item keeps its (possibly reversed) objective rank with probability
    ``p`` and otherwise gets a uniformly random rank. ``p`` is found by
    bisection on the realised correlation.
    """
    n = len(target_col)
    base = rankdata(target_col)
    if rho < 0:
        base = n + 1 - base
    goal = abs(rho)
    if goal == 1.0:
        return base
    best, best_err = None, np.inf
    for _ in range(max_draws):
        u = rng.uniform(size=n)
        noise_rank = rng.uniform(0.5, n + 0.5, size=n)

        def scores(p):
            return np.where(u < p, base, noise_rank)

        lo, hi = 0.0, 1.0
        for _ in range(max_iter):
            p = 0.5 * (lo + hi)
            s = scores(p)
            got = spearman(s, target_col)
            err = abs(got - rho)
            if err < best_err:
                best, best_err = s, err
            if err <= tol / 10:
                return s
            if abs(got) < goal:
                lo = p
            else:
                hi = p
        for p in (0.0, 1.0):
            s = scores(p)
            err = abs(spearman(s, target_col) - rho)
            if err < best_err:
                best, best_err = s, err
        if best_err <= tol:
            return best
    raise CalibrationError(rho, spearman(best, target_col))


def generate_synthetic(s: SyntheticSpec, seed: int = 0) -> BenchmarkTable:
    """Exhaustive table with a seeded objective and calibrated proxy columns."""
    space = s.space
    rng = np.random.default_rng([seed, 17])
    objective = _objective(space, rng, s.roughness, s.edge_spread, s.jitter)
    n = len(objective)
    val = objective + s.noise * rng.normal(size=n)
    test = objective + s.noise * rng.normal(size=n)
    edge_cost = rng.uniform(20.0, 200.0, size=(space.edge_count, space.ops_per_edge))
    X = all_rows(space)
    cost = edge_cost[np.arange(space.edge_count), X].sum(axis=1) * np.exp(0.1 * rng.normal(size=n))
    proxies = {}
    for i, (name, rho) in enumerate(s.proxies.items()):
        proxies[name] = calibrate_proxy(test, rho, np.random.default_rng([seed, 29, i]))
    return BenchmarkTable(
        space,
        np.arange(n, dtype=np.int64),
        val,
        test,
        cost,
        proxies,
        name=s.name,
        minimize=True,
        optimum_test=float(test.min()),
    )


def load_synthetic_spec(path) -> tuple[SyntheticSpec, int]:
    """Read a JSON recipe.

    Keys: ``edges``, ``ops``, ``proxies`` (name -> target spearman),
    ``roughness``, ``edge_spread``, ``jitter``, ``noise``, ``name``, ``seed``.
    """
    import json

    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    space = SearchSpaceSpec(int(cfg.get("edges", 6)), int(cfg.get("ops", 5)))
    spec = SyntheticSpec(
        space,
        {str(k): float(v) for k, v in cfg.get("proxies", {}).items()},
        roughness=float(cfg.get("roughness", 0.3)),
        edge_spread=float(cfg.get("edge_spread", 1.0)),
        jitter=float(cfg.get("jitter", 0.04)),
        noise=float(cfg.get("noise", 0.05)),
        name=str(cfg.get("name", "synthetic")),
    )
    return spec, int(cfg.get("seed", 0))


# curves and speedups


def mean_curve(traces: Sequence, budget: int, field: str = "best_test") -> np.ndarray:
    """Mean best-so-far curve; short traces are padded with their last value."""
    rows = []
    for tr in traces:
        c = np.asarray(getattr(tr, field), dtype=np.float64)[:budget]
        if len(c) == 0:
            raise ValueError("empty trace")
        rows.append(np.concatenate([c, np.full(budget - len(c), c[-1])]))
    return np.mean(rows, axis=0)


def speedup_table(traces: Mapping[str, Sequence], reference: str, budget: int, field: str = "best_test") -> dict[str, float | None]:
    """Evaluations each strategy needs to match ``reference``'s mean at ``budget``.

    The mean curve is linearly interpolated between consecutive evaluations,
    so a strategy identical to the reference needs exactly ``budget`` and one
    that is strictly better at ``budget`` needs fewer. ``None`` means the
    strategy never reaches the reference value within ``budget``.
    """
    target = mean_curve(traces[reference], budget, field)[-1]
    out: dict[str, float | None] = {}
    for name, group in traces.items():
        curve = mean_curve(group, budget, field)
        hit = np.flatnonzero(curve <= target)
        if not len(hit):
            out[name] = None
            continue
        i = int(hit[0])
        if i == 0:
            out[name] = 1.0
        else:
            prev, cur = curve[i - 1], curve[i]
            out[name] = float(i + (prev - target) / (prev - cur))
    return out
