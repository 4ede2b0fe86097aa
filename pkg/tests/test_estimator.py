import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from oracles import brute_force_mle, exact_loss
from sparserec import estimator
from sparserec.estimator import (SupportMLE, delta_statistic, loss, mle_exhaustive,
                                 mle_local_search)
from sparserec.exceptions import EnumerationBudgetError, ParameterError
from sparserec.model import SupportSet, make_instance, sample_design, sample_signal


def _instance(n, p, s, sigma, seed, ensemble="dense", d=None):
    X = sample_design(n, p, ensemble, d=d, seed=seed)
    S = sample_signal(p, s, seed=seed + 1)
    inst = make_instance(X, S, sigma, seed=seed + 2)
    return X.toarray(), inst.y, S


class TestLoss:
    def test_hand_example(self):
        X = np.array([[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]])
        assert loss(X, np.array([1.0, 1.0]), SupportSet((0,), 3)) == 1.0

    def test_zero(self):
        X = np.ones((3, 4))
        assert loss(X, np.zeros(3), SupportSet((), 4)) == 0.0

    def test_noiseless_planted(self):
        X, y, S = _instance(40, 15, 4, 0.0, seed=3)
        assert loss(X, y, S) <= 1e-12

    def test_accepts_design_matrix_and_iterables(self):
        Xd = sample_design(5, 6, "sparse", d=3, seed=1)
        y = np.arange(5.0)
        assert loss(Xd, y, [4, 1]) == loss(Xd.toarray(), y, SupportSet((1, 4), 6))

    def test_matches_exact_oracle(self):
        X, y, S = _instance(30, 10, 3, 1.0, seed=4)
        assert loss(X, y, S) == pytest.approx(exact_loss(X, y, S.indices), rel=1e-13)

    def test_mismatch(self):
        with pytest.raises(ParameterError):
            loss(np.ones((3, 4)), np.ones(2), SupportSet((0,), 4))
        with pytest.raises(ParameterError):
            loss(np.ones((3, 4)), np.ones(3), SupportSet((0,), 5))


class TestDelta:
    def test_same_support(self):
        X, y, S = _instance(10, 8, 3, 1.0, seed=1)
        assert delta_statistic(X, y, S, S) == 0.0

    def test_antisymmetric(self):
        X, y, S = _instance(10, 8, 3, 1.0, seed=1)
        T = SupportSet((0, 1, 2), 8)
        assert delta_statistic(X, y, S, T) == -delta_statistic(X, y, T, S)

    def test_noiseless_nonnegative(self):
        X, y, S = _instance(12, 7, 3, 0.0, seed=2)
        for T in itertools.combinations(range(7), 3):
            assert delta_statistic(X, y, SupportSet(T, 7), S) >= 0.0

    def test_size_mismatch(self):
        X, y, S = _instance(10, 8, 3, 1.0, seed=1)
        with pytest.raises(ParameterError):
            delta_statistic(X, y, SupportSet((0,), 8), S)


class TestExhaustive:
    def test_full_support(self):
        X, y, _ = _instance(5, 4, 4, 1.0, seed=0)
        res = mle_exhaustive(X, y, 4)
        assert res.support.indices == (0, 1, 2, 3)
        assert res.candidates_evaluated == 1

    def test_noiseless_recovers_planted(self):
        X, y, S = _instance(20, 12, 3, 0.0, seed=5)
        res = mle_exhaustive(X, y, 3)
        assert res.support == S
        oracle, oracle_loss = brute_force_mle(X, y, 3)
        assert oracle == S.indices
        zero = [T for T in itertools.combinations(range(12), 3) if exact_loss(X, y, T) < 1e-24]
        assert zero == [S.indices]

    def test_duplicate_columns_lexicographic(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((8, 6))
        X[:, 4] = X[:, 1]
        y = X[:, 1] + X[:, 3]
        res = mle_exhaustive(X, y, 2)
        assert res.support.indices == (1, 3)
        assert res.ties_broken == 1
        assert brute_force_mle(X, y, 2)[0] == (1, 3)

    def test_three_way_duplicate(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((10, 7))
        X[:, 2] = X[:, 5]
        X[:, 6] = X[:, 5]
        y = X[:, 0] + X[:, 5] + X[:, 3]
        res = mle_exhaustive(X, y, 3)
        assert res.support.indices == (0, 2, 3)
        assert res.ties_broken == 2

    def test_budget(self):
        X, y, _ = _instance(5, 30, 5, 1.0, seed=0)
        with pytest.raises(EnumerationBudgetError, match="local search"):
            mle_exhaustive(X, y, 5, budget=1000)

    def test_loss_recomputed(self):
        X, y, _ = _instance(15, 10, 3, 1.0, seed=8)
        res = mle_exhaustive(X, y, 3)
        assert res.loss == loss(X, y, res.support)
        assert res.candidates_evaluated == math.comb(10, 3)

    def test_optimal_over_all_candidates(self):
        X, y, _ = _instance(9, 11, 3, 1.0, seed=21, ensemble="sparse", d=4)
        res = mle_exhaustive(X, y, 3)
        for T in itertools.combinations(range(11), 3):
            assert res.loss <= loss(X, y, SupportSet(T, 11))

    def test_independent_of_chunking(self, monkeypatch):
        X, y, _ = _instance(6, 14, 3, 2.0, seed=13, ensemble="sparse", d=3)
        ref = mle_exhaustive(X, y, 3)
        monkeypatch.setattr(estimator, "_CHUNK", 7)
        estimator._all_combinations.cache_clear()
        assert mle_exhaustive(X, y, 3) == ref

    @pytest.mark.parametrize("c", [0.5, 3.0])
    def test_scale_invariance(self, c):
        X, y, _ = _instance(12, 10, 3, 1.0, seed=17)
        assert mle_exhaustive(c * X, c * y, 3).support == mle_exhaustive(X, y, 3).support

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(2, 9), st.integers(1, 3))
    def test_matches_brute_force(self, seed, p, s):
        s = min(s, p)
        X, y, _ = _instance(4, p, s, 0.5, seed=seed, ensemble="sparse", d=max(1, p // 2))
        assert mle_exhaustive(X, y, s).support.indices == brute_force_mle(X, y, s)[0]


class TestLocalSearch:
    def test_full_support(self):
        X, y, _ = _instance(5, 4, 4, 1.0, seed=0)
        assert mle_local_search(X, y, 4, seed=1).support.indices == (0, 1, 2, 3)

    def test_deterministic(self):
        X, y, _ = _instance(15, 20, 4, 1.0, seed=3)
        assert mle_local_search(X, y, 4, seed=9) == mle_local_search(X, y, 4, seed=9)

    def test_never_beats_exhaustive(self):
        for seed in range(20):
            X, y, _ = _instance(10, 12, 3, 1.0, seed=seed, ensemble="sparse", d=6)
            ex = mle_exhaustive(X, y, 3)
            ls = mle_local_search(X, y, 3, restarts=2, seed=seed)
            assert ls.loss >= ex.loss

    def test_trajectories_descend_to_local_optimum(self):
        X, y, _ = _instance(10, 15, 4, 1.0, seed=5, ensemble="sparse", d=5)
        res, trajs = mle_local_search(X, y, 4, restarts=4, seed=2, return_trajectories=True)
        assert len(trajs) == 4
        for t in trajs:
            assert all(b < a for a, b in zip(t, t[1:]))
        best = set(res.support.indices)
        for a in best:
            for b in set(range(15)) - best:
                cand = SupportSet.from_iterable(best - {a} | {b}, 15)
                assert loss(X, y, cand) >= res.loss

    def test_bad_restarts(self):
        with pytest.raises(ParameterError):
            mle_local_search(np.ones((2, 3)), np.ones(2), 1, restarts=0)


class TestSupportMLE:
    def test_fit_predict(self):
        X, y, S = _instance(30, 10, 3, 0.1, seed=2)
        est = SupportMLE(n_nonzero=3).fit(X, y)
        assert est.support_ == S
        np.testing.assert_array_equal(est.coef_, S.indicator())
        np.testing.assert_allclose(est.predict(X), X @ est.coef_, atol=1e-12)
        assert est.n_features_in_ == 10
        assert est.score(X, y) > 0.9

    def test_params_and_clone(self):
        est = SupportMLE(n_nonzero=2, method="local_search", restarts=3)
        params = est.get_params()
        assert params["restarts"] == 3 and params["method"] == "local_search"
        c = clone(est)
        assert c.get_params() == params

    def test_local_search_method(self):
        X, y, _ = _instance(20, 10, 2, 0.1, seed=4)
        ex = SupportMLE(n_nonzero=2).fit(X, y)
        ls = SupportMLE(n_nonzero=2, method="local_search", random_state=1).fit(X, y)
        assert ls.loss_ >= ex.loss_

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            SupportMLE(method="lasso").fit(np.ones((3, 2)), np.ones(3))
