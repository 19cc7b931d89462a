"""
Scoring untrained architectures
===============================

Every encoding of a 6-edge, 5-operation cell maps to a tiny dense network.
The three zero-cost proxies look at that network once, at initialisation.
"""

import numpy as np

from proxybo import bench, proxies, tinynet
from proxybo.space import SearchSpaceSpec, all_rows

space = SearchSpaceSpec(6, 5)
print("encodings in the cell:", space.size)

# operation values set the width and activation of each hidden layer
x = (3, 0, 4, 1, 1, 2)
net, params = tinynet.instantiate(x, space, init_seed=0)
print("layer widths:", net.dims)
print("activations:", net.activations)
print("parameters:", net.n_params)

# all scores are lower-is-better
ctx = proxies.ProxyContext(space, seed=0)
for name in proxies.FORMULA_PROXIES:
    print(f"{name:>9s}: {proxies.FormulaScorer(name, ctx).score(x): .4f}")

# score a random sample and see how the proxies agree with each other
rng = np.random.default_rng(0)
sample = all_rows(space)[rng.choice(space.size, 300, replace=False)]
scores = {n: proxies.FormulaScorer(n, ctx).score_batch(sample) for n in proxies.FORMULA_PROXIES}
for a in scores:
    for b in scores:
        if a < b:
            print(f"spearman({a}, {b}) = {bench.spearman(scores[a], scores[b]):.3f}")
