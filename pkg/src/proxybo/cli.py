"""Command-line front end.

Subcommands:

``run``
    repetitions x strategies searches, per-run trace CSVs, a mean/std summary
    and a speedup report.
``score``
    Spearman correlation of proxies with the test metric on a sample of the
    benchmark (all items and the best 10%).
``trace-influence``
    mean G and influence per iteration across trace files, plot-ready.
``generate``
    write a synthetic benchmark table.

Log verbosity follows the ``PROXYBO_LOG`` environment variable (e.g. ``INFO``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import bench, engine, guidance, proxies
from .exceptions import ProxyBOError

log = logging.getLogger("proxybo")


@dataclass
class ExperimentConfig:
    benchmark: str | None = None
    synthetic: str | None = None
    strategies: list[str] = field(default_factory=lambda: ["proxybo"])
    budget: int = engine.DEFAULT_BUDGET
    reps: int = 30
    seed_base: int = 0
    tau0: float = engine.DEFAULT_TAU0
    q: int = engine.DEFAULT_Q
    proxies: str = "snip,synflow,jacob_cov"
    proxy_seed: int = 0
    jobs: int = 1
    out: str = "results"
    reference: str | None = None

    def validate(self) -> None:
        if (self.benchmark is None) == (self.synthetic is None):
            raise UsageError("benchmark", "give exactly one of --benchmark or --synthetic")
        for s in self.strategies:
            if s not in engine.STRATEGIES:
                raise UsageError("strategy", f"unknown strategy {s!r}")
        if not self.strategies:
            raise UsageError("strategy", "no strategies given")
        if self.budget < 1:
            raise UsageError("budget", "must be >= 1")
        if self.reps < 1:
            raise UsageError("reps", "must be >= 1")
        if self.tau0 <= 0:
            raise UsageError("tau0", "must be positive")
        if self.q < 1:
            raise UsageError("q", "must be >= 1")
        if self.jobs < 1:
            raise UsageError("jobs", "must be >= 1")
        if self.reference is not None and self.reference not in self.strategies:
            raise UsageError("reference", f"{self.reference!r} is not among the strategies")


class UsageError(ProxyBOError):
    def __init__(self, fieldname, message):
        super().__init__(f"invalid config field '{fieldname}': {message}")
        self.field = fieldname


def _configure_logging() -> None:
    level = os.environ.get("PROXYBO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _load_benchmark(benchmark, synthetic) -> bench.BenchmarkTable:
    if benchmark is not None:
        return bench.load_table(benchmark)
    spec, seed = bench.load_synthetic_spec(synthetic)
    return bench.generate_synthetic(spec, seed)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


# run


def _run_one(args):
    strategy, rep, cfg, table = args
    scorers = proxies.make_scorers(cfg.proxies, table.space, table, seed=cfg.proxy_seed) if strategy == "proxybo" else []
    run = engine.SearchRun(strategy, table, cfg.budget, cfg.seed_base + rep, scorers, cfg.tau0, cfg.q)
    return engine.run(run)


def summary_rows(traces: dict[str, list[engine.RunTrace]], budget: int) -> list[list[str]]:
    rows = []
    for strategy, group in traces.items():
        test = np.array([_padded(t.best_test, budget) for t in group])
        val = np.array([_padded(t.best_val, budget) for t in group])
        for i in range(budget):
            rows.append([strategy, i + 1, _num(test[:, i].mean()), _num(test[:, i].std()), _num(val[:, i].mean()), _num(val[:, i].std())])
    return rows


def _padded(col, budget):
    col = np.asarray(col)[:budget]
    return np.concatenate([col, np.full(budget - len(col), col[-1])])


def cmd_run(cfg: ExperimentConfig) -> int:
    cfg.validate()
    table = _load_benchmark(cfg.benchmark, cfg.synthetic)
    proxies.make_scorers(cfg.proxies, table.space, table, seed=cfg.proxy_seed)  # fail fast on bad selections
    os.makedirs(os.path.join(cfg.out, "traces"), exist_ok=True)
    jobs = [(s, r, cfg, table) for s in cfg.strategies for r in range(cfg.reps)]
    results: list = [None] * len(jobs)
    failed = 0
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_run_one, j) for j in jobs]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # keep going; finished runs stay on disk
                    log.error("run %s rep %d failed: %s", jobs[i][0], jobs[i][1], exc)
                    failed += 1
    else:
        for i, j in enumerate(jobs):
            try:
                results[i] = _run_one(j)
            except Exception as exc:
                log.error("run %s rep %d failed: %s", j[0], j[1], exc)
                failed += 1
    traces: dict[str, list[engine.RunTrace]] = {s: [] for s in cfg.strategies}
    for (strategy, rep, _, _), tr in zip(jobs, results):
        if tr is None:
            continue
        bench.atomic_write(os.path.join(cfg.out, "traces", f"{strategy}_rep{rep:03d}.csv"), tr.to_csv())
        traces[strategy].append(tr)
    traces = {s: g for s, g in traces.items() if g}
    if traces:
        bench.atomic_write(
            os.path.join(cfg.out, "summary.csv"),
            _csv_text(["strategy", "iter", "mean_best_test", "std_best_test", "mean_best_val", "std_best_val"], summary_rows(traces, cfg.budget)),
        )
        reference = cfg.reference or ("rea" if "rea" in traces else next(iter(traces)))
        if reference in traces:
            counts = bench.speedup_table(traces, reference, cfg.budget)
            base = counts[reference]
            rows = [[s, _num(c), "" if c is None else _num(base / c), reference] for s, c in counts.items()]
            bench.atomic_write(
                os.path.join(cfg.out, "speedup.csv"), _csv_text(["strategy", "evaluations", "speedup", "reference"], rows)
            )
    bench.atomic_write(os.path.join(cfg.out, "config.json"), json.dumps(_recorded(cfg), indent=2, sort_keys=True) + "\n")
    if failed:
        print(f"{failed} of {len(jobs)} runs failed", file=sys.stderr)
        return 1
    return 0


def _recorded(cfg: ExperimentConfig) -> dict:
    """Config fields that affect results; ``out`` and ``jobs`` are left out so reruns elsewhere match."""
    d = asdict(cfg)
    del d["out"], d["jobs"]
    return d


# score


def score_report(table: bench.BenchmarkTable, selection: str, sample_n: int = 1000, seed: int = 0, proxy_seed: int = 0) -> list[list]:
    scorers = proxies.make_scorers(selection, table.space, table, seed=proxy_seed)
    if not scorers:
        raise UsageError("proxies", "no proxies selected")
    rng = np.random.default_rng(seed)
    n = min(sample_n, len(table)) if sample_n > 0 else len(table)
    pick = np.sort(rng.choice(len(table), size=n, replace=False))
    X = table.encodings()[pick]
    test = table.test_loss[pick]
    rows = []
    for sc in scorers:
        s = sc.score_batch(X)
        finite = np.isfinite(s)
        rows.append([sc.name, bench.spearman(s[finite], test[finite]), bench.spearman(s[finite], test[finite], top=0.1), int(finite.sum())])
    return rows


def cmd_score(args) -> int:
    table = _load_benchmark(args.benchmark, args.synthetic)
    rows = score_report(table, args.proxies, args.sample_n, args.seed, args.proxy_seed)
    text = _csv_text(["proxy", "spearman", "spearman_top10", "n"], [[r[0], _num(r[1]), _num(r[2]), r[3]] for r in rows])
    if args.out:
        bench.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


# trace-influence


def influence_table(traces: list[engine.RunTrace]) -> tuple[list[str], list[list], int | None]:
    """Mean G and I per iteration, plus the first iteration where G_M beats every proxy."""
    if not traces:
        raise UsageError("traces", "no trace files given")
    names = (guidance.SURROGATE,) + traces[0].proxy_names
    for tr in traces:
        if tr.proxy_names != traces[0].proxy_names:
            raise UsageError("traces", "trace files use different proxy sets")
        if all(r.influence is None for r in tr.records):
            raise UsageError("traces", f"trace {tr.strategy or '?'} (seed {tr.seed}) has no guidance snapshots")
    length = max(len(t) for t in traces)
    G = np.full((len(traces), len(names), length), np.nan)
    I = np.full_like(G, np.nan)
    for a, tr in enumerate(traces):
        for b, n in enumerate(names):
            g, i = tr.influence_series(n)
            G[a, b, : len(g)] = g
            I[a, b, : len(i)] = i
    header = ["iteration"] + [f"G_{n}" for n in names] + [f"I_{n}" for n in names]
    rows = []
    crossover = None
    for it in range(length):
        present = ~np.isnan(G[:, 0, it])
        if not present.any():
            continue
        g = G[present, :, it].mean(axis=0)
        i = I[present, :, it].mean(axis=0)
        rows.append([it + 1] + [_num(v) for v in g] + [_num(v) for v in i])
        if crossover is None and len(names) > 1 and np.all(g[0] > g[1:]):
            crossover = it + 1
    return header, rows, crossover


def cmd_trace_influence(args) -> int:
    traces = []
    for path in args.traces:
        with open(path, encoding="utf-8") as fh:
            traces.append(engine.RunTrace.from_csv(fh.read(), strategy=os.path.basename(path)))
    header, rows, crossover = influence_table(traces)
    text = _csv_text(header, rows)
    if args.out:
        bench.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"surrogate_crossover_iteration={'' if crossover is None else crossover}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_generate(args) -> int:
    spec, seed = bench.load_synthetic_spec(args.synthetic)
    bench.save_table(bench.generate_synthetic(spec, seed if args.seed is None else args.seed), args.out)
    return 0


# argument parsing


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        known = {f.name for f in fields(ExperimentConfig)}
        for key, value in data.items():
            key = key.replace("-", "_")
            if key == "strategy":
                key, value = "strategies", value if isinstance(value, list) else str(value).split(",")
            if key not in known:
                raise UsageError(key, "unknown config key")
            setattr(cfg, key, value)
    overrides = {
        "benchmark": args.benchmark,
        "synthetic": args.synthetic,
        "strategies": args.strategy.split(",") if args.strategy else None,
        "budget": args.budget,
        "reps": args.reps,
        "seed_base": args.seed_base,
        "tau0": args.tau0,
        "q": args.q,
        "proxies": args.proxies,
        "jobs": args.jobs,
        "out": args.out,
        "reference": args.reference,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxybo", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def source(p):
        p.add_argument("--benchmark", help="benchmark table file")
        p.add_argument("--synthetic", help="JSON recipe for a synthetic benchmark")

    p = sub.add_parser("run", help="run search experiments")
    source(p)
    p.add_argument("--config", help="JSON experiment config; flags override it")
    p.add_argument("--strategy", help="comma list of proxybo, bo, random, rea")
    p.add_argument("--budget", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--tau0", type=float)
    p.add_argument("--q", type=int)
    p.add_argument("--proxies", help="snip,synflow,jacob_cov | tabular:<name>[,...] | none")
    p.add_argument("--seed-base", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--reference", help="strategy the speedup report is measured against")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("score", help="proxy/objective rank correlations")
    source(p)
    p.add_argument("--proxies", default="snip,synflow,jacob_cov")
    p.add_argument("--sample-n", type=int, default=1000, help="0 scores the whole table")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--proxy-seed", type=int, default=0)
    p.add_argument("--out")

    p = sub.add_parser("trace-influence", help="mean G/I trajectories from trace CSVs")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out")

    p = sub.add_parser("generate", help="write a synthetic benchmark table")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(_config_from_args(args))
        if args.command == "score":
            if (args.benchmark is None) == (args.synthetic is None):
                raise UsageError("benchmark", "give exactly one of --benchmark or --synthetic")
            return cmd_score(args)
        if args.command == "trace-influence":
            return cmd_trace_influence(args)
        return cmd_generate(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ProxyBOError, OSError, ValueError) as exc:
        print(f"proxybo: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
