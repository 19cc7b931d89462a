import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.tree import DecisionTreeRegressor

from proxybo import surrogate
from proxybo.bench import spearman
from proxybo.exceptions import ModelUnfitError
from proxybo.space import SearchSpaceSpec, all_rows
from proxybo.surrogate import ObservationSet


def observations(space, X, y):
    D = ObservationSet(space)
    for x, v in zip(X, y):
        D.add(x, v)
    return D


def random_data(space, n, seed):
    rng = np.random.default_rng(seed)
    idx = rng.choice(space.size, size=n, replace=False)
    X = all_rows(space)[idx]
    return X, rng.standard_normal(n)


def test_constant_targets(cell):
    X, _ = random_data(cell, 30, 0)
    M = surrogate.fit(observations(cell, X, np.full(30, 2.5)), seed=1)
    mean, var = M.predict(all_rows(cell)[:500], floor=0.0)
    assert np.all(mean == 2.5)
    assert np.all(var == 0.0)
    assert np.all(M.predict(all_rows(cell)[:10])[1] == surrogate.VARIANCE_FLOOR)


def test_same_seed_same_model(cell):
    X, y = random_data(cell, 50, 1)
    D = observations(cell, X, y)
    probe = all_rows(cell)[::37]
    a = surrogate.fit(D, seed=4).predict(probe)
    b = surrogate.fit(D, seed=4).predict(probe)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@settings(max_examples=25, deadline=None)
@given(st.permutations(list(range(40))), st.integers(0, 1000))
def test_order_invariance(perm, seed):
    space = SearchSpaceSpec(4, 3)
    X, y = random_data(space, 40, 2)
    perm = np.array(perm)
    probe = all_rows(space)
    a = surrogate.fit(observations(space, X, y), seed=seed).predict(probe)
    b = surrogate.fit(observations(space, X[perm], y[perm]), seed=seed).predict(probe)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_fits_a_separable_function(cell):
    rng = np.random.default_rng(3)
    effects = rng.standard_normal((6, 5))
    X = all_rows(cell)[rng.choice(cell.size, 200, replace=False)]
    y = effects[np.arange(6), X].sum(axis=1)
    M = surrogate.fit(observations(cell, X, y), seed=0)
    assert spearman(M.predict(X)[0], y) >= 0.9


def test_single_tree_has_zero_spread(cell):
    X, y = random_data(cell, 40, 5)
    M = surrogate.fit_xy(cell, X, y, seed=0, n_trees=1)
    assert np.all(M.predict(all_rows(cell)[:100], floor=0.0)[1] == 0.0)


def test_mean_and_variance_from_trees(cell):
    X, y = random_data(cell, 80, 6)
    M = surrogate.fit(observations(cell, X, y), seed=2)
    probe = all_rows(cell)[::101]
    per_tree = M.tree_predictions(probe)
    assert per_tree.shape == (surrogate.N_TREES, len(probe))
    mean, var = M.predict(probe)
    for i in range(len(probe)):
        col = [per_tree[t, i] for t in range(surrogate.N_TREES)]
        m = sum(col) / len(col)
        v = sum((c - m) ** 2 for c in col) / len(col)
        assert mean[i] == pytest.approx(m, rel=1e-12, abs=1e-14)
        assert var[i] == pytest.approx(max(v, surrogate.VARIANCE_FLOOR), rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("seed", range(8))
def test_tree_matches_sklearn_on_one_hot_features(seed):
    """One bootstrap tree equals a CART tree grown on the same resample of indicator features.

    Compared on the training rows: indicators that split the training rows identically
    are interchangeable, so unseen encodings may be routed differently.
    """
    space = SearchSpaceSpec(4, 3)
    X, y = random_data(space, 60, 100 + seed)
    M = surrogate.fit_xy(space, X, y, seed=seed, n_trees=1)
    order = np.lexsort((y, X @ space.radix))
    boot = np.random.default_rng(seed).integers(0, 60, size=(1, 60))[0]
    Xb, yb = X[order][boot], y[order][boot]
    ref = DecisionTreeRegressor(min_samples_leaf=surrogate.MIN_LEAF, random_state=0)
    ref.fit(surrogate.one_hot(Xb, space), yb)
    np.testing.assert_allclose(M.tree_predictions(Xb)[0], ref.predict(surrogate.one_hot(Xb, space)), rtol=0, atol=1e-10)
    assert surrogate.leaf_counts(M) == [ref.get_n_leaves()]


def test_min_leaf_respected(cell):
    X, y = random_data(cell, 100, 7)
    M = surrogate.fit_xy(cell, X, y, seed=0)
    assert all(c <= 100 // surrogate.MIN_LEAF for c in surrogate.leaf_counts(M))


def test_needs_two_points(cell):
    with pytest.raises(ModelUnfitError):
        surrogate.fit(observations(cell, [(0,) * 6], [1.0]))


def test_leave_one_out_uses_four_points(cell, monkeypatch):
    X, y = random_data(cell, 5, 8)
    sizes = []
    real = surrogate._fit_arrays

    def spy(space, Xt, yt, *a):
        sizes.append(len(yt))
        return real(space, Xt, yt, *a)

    monkeypatch.setattr(surrogate, "_fit_arrays", spy)
    surrogate.cv_predict(observations(cell, X, y), k=5)
    assert sizes == [4] * 5


@pytest.mark.parametrize("n", [5, 6, 13, 40])
def test_cv_training_sets_exclude_held_point(cell, monkeypatch, n):
    X, y = random_data(cell, n, 9)
    D = observations(cell, X, y)
    seen = []
    real = surrogate._fit_arrays

    def spy(space, Xt, yt, *a):
        seen.append({tuple(r) for r in Xt})
        return real(space, Xt, yt, *a)

    monkeypatch.setattr(surrogate, "_fit_arrays", spy)
    surrogate.cv_predict(D, k=5)
    for f, train, held in surrogate.cv_splits(n, 5):
        assert not {tuple(r) for r in X[held]} & seen[f]
        assert len(train) + len(held) == n


def test_outlier_is_not_memorised(cell):
    X, y = random_data(cell, 30, 10)
    y = np.abs(y)
    y[11] = 1000.0
    preds = surrogate.cv_predict(observations(cell, X, y), k=5, seed=3)
    others = np.delete(y, 11)
    assert others.min() <= preds[11] <= others.max()


@pytest.mark.parametrize("n", range(2, 30))
def test_fold_balance(n):
    sizes = [len(held) for _, _, held in surrogate.cv_splits(n, 5)]
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) == n
    assert len(sizes) == max(2, min(5, n))


def test_observation_set_rules(cell):
    D = ObservationSet(cell)
    D.add((0,) * 6, 1.0, iteration=3)
    with pytest.raises(ValueError):
        D.add((1,) * 6, 2.0, iteration=3)
    with pytest.raises(ValueError):
        D.add((1,) * 6, float("nan"), iteration=4)
    assert (0,) * 6 in D and (1,) * 6 not in D
    assert D.iterations == [3]
    assert np.array_equal(D.folds(2), [0])
