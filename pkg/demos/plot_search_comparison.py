"""
ProxyBO against its baselines
=============================

Ten paired seeds per strategy on a synthetic cell benchmark with one helpful
proxy. Regret is the best test error found so far minus the table optimum.
"""

import numpy as np

from proxybo import bench, engine
from proxybo.proxies import TabularScorer
from proxybo.space import SearchSpaceSpec

table = bench.generate_synthetic(bench.SyntheticSpec(SearchSpaceSpec(6, 5), {"good": 0.7}), seed=0)
budget, seeds = 100, range(10)

traces = {}
for strategy in engine.STRATEGIES:
    px = [TabularScorer(table, "good")] if strategy == "proxybo" else []
    traces[strategy] = [engine.run(engine.SearchRun(strategy, table, budget=budget, seed=s, proxies=px)) for s in seeds]

print("mean regret after n evaluations")
print("strategy    n=10    n=25    n=50   n=100")
for strategy, group in traces.items():
    r = np.mean([engine.regret(t, table) for t in group], axis=0)
    print(f"{strategy:8s} " + " ".join(f"{r[n - 1]:7.3f}" for n in (10, 25, 50, 100)))

# evaluations needed to match regularized evolution's final mean
for name, count in bench.speedup_table(traces, "rea", budget).items():
    print(f"{name:8s} reaches the REA result after {count if count is None else round(count, 1)} evaluations")
