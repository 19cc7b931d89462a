"""
How influence shifts between proxy and surrogate
================================================

Each iteration measures how well each component orders the observations so
far and turns that into softmax weights whose temperature falls over time.
Early on a good proxy leads; once the surrogate orders the data better it
takes over. Misleading proxies are switched off almost at once.
"""

import numpy as np

from proxybo import bench, engine
from proxybo.proxies import TabularScorer
from proxybo.space import SearchSpaceSpec

table = bench.generate_synthetic(
    bench.SyntheticSpec(SearchSpaceSpec(6, 5), {"good": 0.7, "bad": -0.4}), seed=0
)
runs = [
    engine.run(engine.SearchRun("proxybo", table, budget=150, seed=s, proxies=[TabularScorer(table, n) for n in ("good", "bad")]))
    for s in range(5)
]


def mean_series(name, which):
    return np.mean([r.influence_series(name)[which] for r in runs], axis=0)


print(" iter    G_M  G_good  G_bad |    I_M  I_good   I_bad")
for it in (6, 10, 20, 40, 60, 100, 150):
    g = [mean_series(n, 0)[it - 1] for n in ("M", "good", "bad")]
    i = [mean_series(n, 1)[it - 1] for n in ("M", "good", "bad")]
    print(f"{it:5d} " + " ".join(f"{v:6.3f}" for v in g) + " | " + " ".join(f"{v:7.4f}" for v in i))

G_M, G_good = mean_series("M", 0), mean_series("good", 0)
ahead = np.flatnonzero(G_M > G_good)
print("surrogate first orders the data better at iteration", ahead[0] + 1 if len(ahead) else None)
