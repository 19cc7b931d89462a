"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The behavioural criteria (6, 7, 8) share one set of 30 paired-seed runs on a
synthetic 6-edge, 5-operation benchmark with one helpful proxy (Spearman 0.7)
and three misleading ones (Spearman -0.4).
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import record_criterion
from proxybo import bench, cli, engine, guidance, proxies, tinynet
from proxybo.acquisition import expected_improvement
from proxybo.bench import SyntheticSpec
from proxybo.proxies import ProxyContext, TabularScorer
from proxybo.space import SearchSpaceSpec

SEEDS = range(30)
BUDGET = 200
BEHAVIOUR_PROXIES = {"good": 0.7, "bad1": -0.4, "bad2": -0.4, "bad3": -0.4}
BAD = ("bad1", "bad2", "bad3")


@pytest.fixture(scope="module")
def behaviour_table():
    return bench.generate_synthetic(SyntheticSpec(SearchSpaceSpec(6, 5), BEHAVIOUR_PROXIES, name="behaviour"), seed=0)


@pytest.fixture(scope="module")
def paired_runs(behaviour_table):
    t = behaviour_table
    good = [TabularScorer(t, "good")]
    bad = [TabularScorer(t, n) for n in BAD]
    out, seconds = {}, {}
    for label, strategy, px in (("good", "proxybo", good), ("bo", "bo", []), ("bad", "proxybo", bad)):
        start = time.perf_counter()
        out[label] = [engine.run(engine.SearchRun(strategy, t, budget=BUDGET, seed=s, proxies=px)) for s in SEEDS]
        seconds[label] = time.perf_counter() - start
    out["seconds"] = seconds
    return out


def regrets(traces, table):
    return np.array([engine.regret(t, table) for t in traces])


# 1


def brute_force_F(s, y):
    n = len(y)
    return sum(1 for j in range(n) for k in range(j + 1, n) if (s[j] < s[k]) == (y[j] < y[k]))


def test_criterion_01_pair_count_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        y = np.round(rng.standard_normal(n), int(rng.integers(0, 4)))
        s = np.round(rng.standard_normal(n), int(rng.integers(0, 4)))
        F_ref = brute_force_F(s.tolist(), y.tolist())
        mismatches += guidance.pair_count_proxy(s, y) != F_ref
        mismatches += guidance.pair_count_surrogate(s, y) != F_ref
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10
    record_criterion(1, ok, f"100 fixtures, {mismatches} mismatches, {elapsed:.2f}s (< 10s)")
    assert ok


# 2


def quadrature_ei(mean, sigma, y_best):
    z = (y_best - mean) / sigma
    if z <= -40:
        return 0.0
    points = [p for p in (-5.0, 0.0, 5.0) if -40 < p < z]
    val, _ = integrate.quad(
        lambda u: (z - u) * math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi),
        -40.0, z, points=points or None, epsabs=1e-13, epsrel=1e-12, limit=200,
    )
    return sigma * val


def test_criterion_02_ei_closed_form():
    rng = np.random.default_rng(7)
    mean = rng.uniform(-5, 5, 1000)
    sigma = 10 ** rng.uniform(-2, 0.5, 1000)
    y_best = rng.uniform(-5, 5, 1000)
    closed = expected_improvement(mean, sigma**2, y_best)
    worst = max(abs(c - quadrature_ei(m, s, b)) for c, m, s, b in zip(closed, mean, sigma, y_best))
    centre = expected_improvement(0.0, 1.0, 0.0)
    ok = worst <= 1e-8 and abs(centre - 0.398942) <= 1e-6
    record_criterion(2, ok, f"max |closed - quadrature| = {worst:.2e} (<= 1e-8); EI(0,1,0) = {centre:.7f}")
    assert ok


# 3


def rel_ok(a, n, rtol=1e-5, atol=1e-8):
    return bool(np.all(np.abs(a - n) <= rtol * np.maximum(np.abs(a), np.abs(n)) + atol))


def fd_param_grads(net, params, X, loss, targets, h=1e-4):
    out = []
    for k, arr in enumerate(params.arrays()):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            p, m = params.copy(), params.copy()
            p.arrays()[k][idx] += h
            m.arrays()[k][idx] -= h
            g[idx] = (tinynet.loss_value(net, p, X, loss, targets) - tinynet.loss_value(net, m, X, loss, targets)) / (2 * h)
        out.append(g)
    return out


def fd_input_grads(net, params, X, h=1e-4):
    J = np.zeros_like(X)
    for i, j in np.ndindex(X.shape):
        xp, xm = X[i : i + 1].copy(), X[i : i + 1].copy()
        xp[0, j] += h
        xm[0, j] -= h
        J[i, j] = (tinynet.forward(net, params, xp).sum() - tinynet.forward(net, params, xm).sum()) / (2 * h)
    return J


def test_criterion_03_proxy_gradients():
    space = SearchSpaceSpec(6, 5)
    rng = np.random.default_rng(3)
    results = {"snip": [], "synflow": [], "jacob_cov": []}
    for case in range(20):
        x = tuple(int(v) for v in rng.integers(0, 5, 6))
        ctx = ProxyContext(space, seed=case, batch_size=8)
        X, targets = ctx.batch()
        net, params = ctx.network(x)
        # snip: squared-error parameter gradients on the batch
        analytic = tinynet.grad_params(net, params, X, "squared_error", targets).arrays()
        numeric = fd_param_grads(net, params, X, "squared_error", targets)
        results["snip"].append(all(rel_ok(a, n) for a, n in zip(analytic, numeric)))
        # synflow: sum-of-outputs gradients of |theta| on an all-ones input
        absp, ones = params.map(np.abs), np.ones((1, 32))
        analytic = tinynet.grad_params(net, absp, ones, "sum_of_outputs").arrays()
        numeric = fd_param_grads(net, absp, ones, "sum_of_outputs", None)
        results["synflow"].append(all(rel_ok(a, n) for a, n in zip(analytic, numeric)))
        # jacob_cov: per-example input gradients
        results["jacob_cov"].append(rel_ok(tinynet.grad_inputs_per_example(net, params, X), fd_input_grads(net, params, X)))
    ok = all(all(v) for v in results.values())
    record_criterion(3, ok, "20 networks; " + ", ".join(f"{k} {sum(v)}/20" for k, v in results.items()))
    assert ok


# 4


def test_criterion_04_softmax_influence():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(5000):
        G = rng.uniform(0, 1, int(rng.integers(1, 9)))
        iv = guidance.influence(G, int(rng.integers(1, 5000)), float(10 ** rng.uniform(-3, 1)))
        worst = max(worst, abs(iv.I.sum() - 1.0))
    I1 = guidance.influence({"M": 0.8, "p": 0.6}, T=1, tau0=0.05).weight("M")
    sweep = [guidance.influence([0.8, 0.6], T=T, tau0=0.05).I[0] for T in (1, 10, 100, 1000)]
    monotone = all(a < b for a, b in zip(sweep, sweep[1:]))
    ok = worst <= 1e-12 and abs(I1 - 0.98201) <= 1e-5 and monotone
    record_criterion(4, ok, f"max |sum I - 1| = {worst:.1e}; I1 = {I1:.6f}; T sweep {np.round(sweep, 6).tolist()}")
    assert ok


# 5


def test_criterion_05_degenerate_equivalence(behaviour_table):
    t = behaviour_table
    identical = 0
    for s in SEEDS:
        a = engine.run(engine.SearchRun("proxybo", t, budget=100, seed=s, proxies=[]))
        b = engine.run(engine.SearchRun("bo", t, budget=100, seed=s))
        identical += a.evaluations() == b.evaluations() and len(a) == 100
    ok = identical == len(SEEDS)
    record_criterion(5, ok, f"{identical}/30 paired runs bit-identical over 100 evaluations")
    assert ok


# 6


def test_criterion_06_helpful_proxy(behaviour_table, paired_runs):
    t = behaviour_table
    rho = bench.spearman(t.proxies["good"], t.test_loss)
    pb = regrets(paired_runs["good"], t)[:, 49].mean()
    bo = regrets(paired_runs["bo"], t)[:, 99].mean()
    seconds = paired_runs["seconds"]["good"] + paired_runs["seconds"]["bo"]
    ok = abs(rho - 0.7) <= 0.05 and pb <= bo and seconds < 600
    record_criterion(
        6, ok, f"proxy rho = {rho:.3f}; ProxyBO regret@50 = {pb:.4f} <= BO regret@100 = {bo:.4f}; runs took {seconds:.0f}s (< 600s)"
    )
    assert ok


# 7


def test_criterion_07_misleading_proxies(behaviour_table, paired_runs):
    t = behaviour_table
    rhos = [bench.spearman(t.proxies[n], t.test_loss) for n in BAD]
    pb = regrets(paired_runs["bad"], t)[:, -1]
    bo = regrets(paired_runs["bo"], t)[:, -1]
    diff = pb.mean() - bo.mean()
    # one standard deviation of the paired groups' final regret (pooled, sample std)
    pooled = math.sqrt((pb.std(ddof=1) ** 2 + bo.std(ddof=1) ** 2) / 2)
    if np.any(pb != bo):
        p = stats.wilcoxon(pb, bo, alternative="greater").pvalue
    else:
        p = 1.0
    ok = all(abs(r + 0.4) <= 0.05 for r in rhos) and abs(diff) <= pooled and p >= 0.05
    record_criterion(
        7,
        ok,
        f"final regret ProxyBO {pb.mean():.4f} +- {pb.std(ddof=1):.4f}, BO {bo.mean():.4f} +- {bo.std(ddof=1):.4f}; "
        f"|diff| {abs(diff):.4f} <= pooled std {pooled:.4f}; Wilcoxon p = {p:.3f} (>= 0.05)",
    )
    assert ok


# 8


def test_criterion_08_influence_convergence(paired_runs):
    I_M = np.array([t.influence_series("M")[1] for t in paired_runs["good"]])
    late = I_M[:, 149:200]
    median_I = float(np.median(late))
    median_curve = float(np.median(I_M.mean(axis=0)[149:200]))
    I_bad = np.array([[t.influence_series(n)[1] for n in BAD] for t in paired_runs["bad"]])
    worst_bad = float(np.max(I_bad[:, :, 20:]))
    ok = median_I >= 0.9 and worst_bad < 0.05
    record_criterion(
        8,
        ok,
        f"median surrogate influence, iterations 150-200: {median_I:.4f} (mean curve {median_curve:.4f}) >= 0.9; "
        f"max misleading-proxy influence after 20 evaluations: {worst_bad:.2e} < 0.05",
    )
    assert ok


# 9


def test_criterion_09_exhaustive_optimality():
    t = bench.generate_synthetic(SyntheticSpec(SearchSpaceSpec(3, 3), {"good": 0.7}, name="tiny"), seed=0)
    hits, all_optimal = {}, True
    for strategy in engine.STRATEGIES:
        px = [TabularScorer(t, "good")] if strategy == "proxybo" else []
        traces = [engine.run(engine.SearchRun(strategy, t, budget=27, seed=s, proxies=px)) for s in SEEDS]
        all_optimal &= all(tr.best_test[-1] == t.optimum_test_loss for tr in traces)
        hits[strategy] = float(np.median([engine.first_hit(tr, t) for tr in traces]))
    ok = all_optimal and hits["proxybo"] <= hits["random"]
    record_criterion(
        9, ok, f"optimum found by every run: {all_optimal}; median first hit " + ", ".join(f"{k} {v:g}" for k, v in hits.items())
    )
    assert ok


# 10


def test_criterion_10_synthetic_calibration():
    targets = {"a": -0.4, "b": 0.0, "c": 0.37, "d": 0.7, "e": 0.74}
    worst = 0.0
    for seed in range(3):
        t = bench.generate_synthetic(SyntheticSpec(SearchSpaceSpec(6, 5), targets), seed=seed)
        for name, rho in targets.items():
            worst = max(worst, abs(bench.spearman(t.proxies[name], t.test_loss) - rho))
    ok = worst <= 0.05
    record_criterion(10, ok, f"5 targets x 3 seeds, max |realised - target| = {worst:.4f} (<= 0.05)")
    assert ok


# 11


def _snapshot(root):
    import os

    out = {}
    for folder, _, files in os.walk(root):
        for f in files:
            path = os.path.join(folder, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


def test_criterion_11_determinism(tmp_path, capsys, monkeypatch):
    """The same commands, run from two fresh directories, give identical files."""
    snaps = []
    for attempt, jobs in enumerate((1, 2)):
        d = tmp_path / f"attempt{attempt}"
        d.mkdir()
        monkeypatch.chdir(d)
        (d / "recipe.json").write_text('{"edges": 4, "ops": 4, "proxies": {"good": 0.7, "bad": -0.4}, "seed": 3}')
        assert cli.main(["generate", "--synthetic", "recipe.json", "--out", "table.txt"]) == 0
        assert cli.main([
            "run", "--benchmark", "table.txt", "--strategy", "proxybo,bo,random,rea", "--budget", "40",
            "--reps", "3", "--proxies", "tabular:good,tabular:bad", "--jobs", str(jobs), "--out", "runs",
        ]) == 0
        assert cli.main([
            "run", "--synthetic", "recipe.json", "--strategy", "proxybo", "--budget", "12", "--reps", "2",
            "--proxies", "snip,synflow,jacob_cov", "--out", "formula",
        ]) == 0
        traces = sorted(f"runs/traces/{p.name}" for p in (d / "runs" / "traces").glob("proxybo_*.csv"))
        assert cli.main(["trace-influence", *traces, "--out", "influence.csv"]) == 0
        assert cli.main(["score", "--benchmark", "table.txt", "--proxies", "tabular:good,tabular:bad,snip",
                         "--sample-n", "100", "--out", "score.csv"]) == 0
        snaps.append(_snapshot(d))
    capsys.readouterr()
    same = snaps[0] == snaps[1]
    record_criterion(11, same, f"{len(snaps[0])} artifacts from generate/run/trace-influence/score byte-identical on rerun")
    assert same
