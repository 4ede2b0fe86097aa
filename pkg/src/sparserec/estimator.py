"""Support-constrained maximum-likelihood estimation of binary signals.

The estimate is the size-``s`` support minimising ``||y - X 1_S||^2``.
:func:`mle_exhaustive` solves this exactly by enumeration and
:func:`mle_local_search` approximates it by single-swap descent. Both are
wrapped by the scikit-learn compatible :class:`SupportMLE`.

Both searches score candidates in two passes. A fast pass expands the loss
through the Gram matrix ``X^T X`` and ``X^T y``; it is cheap but its
rounding depends on the candidate. Every candidate whose fast score lies
within a rounding window of the best is then re-scored with :func:`loss`,
and only those exact values (plus the lexicographic tie rule) decide.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from ._random import generator
from ._validation import check_int
from .exceptions import EnumerationBudgetError, ParameterError
from .model import DesignMatrix, SupportSet, support_row_sums

DEFAULT_BUDGET = 10 ** 7
_CHUNK = 1 << 16
# relative width of the rescoring window; fast-path rounding is ~n * 1e-16
_WINDOW = 1e-9


@dataclass(frozen=True)
class EstimateResult:
    """Outcome of a support search.

    ``ties_broken`` counts distinct supports that attained the same exact
    loss as the returned one and were discarded by the lexicographic rule.
    """

    support: SupportSet
    loss: float
    method: str
    candidates_evaluated: int
    ties_broken: int = 0


def _dense(X, y=None):
    if isinstance(X, DesignMatrix):
        Xd = X.toarray()
    else:
        Xd = np.asarray(X, dtype=np.float64)
    if Xd.ndim != 2:
        raise ParameterError("design must be two-dimensional, got shape %r" % (Xd.shape,))
    if y is None:
        return Xd
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (Xd.shape[0],):
        raise ParameterError("y has shape %r but the design has %d rows" % (y.shape, Xd.shape[0]))
    return Xd, y


def _loss_dense(Xd, y, indices):
    resid = y - support_row_sums(Xd, indices)
    return float(np.sum(resid * resid))


def loss(X, y, support):
    """Squared residual ``sum_i (y_i - sum_{j in S} X_ij)^2``."""
    Xd, y = _dense(X, y)
    if isinstance(support, SupportSet):
        if support.p != Xd.shape[1]:
            raise ParameterError("support has p=%d but design has %d columns"
                                 % (support.p, Xd.shape[1]))
        indices = support.indices
    else:
        indices = SupportSet.from_iterable(support, Xd.shape[1]).indices
    return _loss_dense(Xd, y, indices)


def delta_statistic(X, y, S, S_star):
    """``loss(S) - loss(S_star)`` for equal-size supports."""
    if len(S) != len(S_star):
        raise ParameterError("supports differ in size (%d vs %d)" % (len(S), len(S_star)))
    Xd, y = _dense(X, y)
    return loss(Xd, y, S) - loss(Xd, y, S_star)


class _Scorer:
    """Fast Gram-based loss evaluation plus the exact rescoring window."""

    def __init__(self, Xd, y, s):
        self.Xd = Xd
        self.y = y
        self.gram = Xd.T @ Xd
        self.corr = Xd.T @ y
        self.yy = float(y @ y)
        scale = (self.yy + 2.0 * max(s, 1) * float(np.max(np.abs(self.corr), initial=0.0))
                 + max(s, 1) ** 2 * float(np.max(np.abs(self.gram), initial=0.0)))
        self.window = _WINDOW * scale + 1e-300

    def batch(self, idx):
        """Approximate losses for a ``(m, s)`` array of supports."""
        if idx.shape[1] == 0:
            return np.full(idx.shape[0], self.yy)
        lin = self.corr[idx].sum(axis=1)
        quad = self.gram[idx[:, :, None], idx[:, None, :]].sum(axis=(1, 2))
        return self.yy - 2.0 * lin + quad

    def exact(self, indices):
        return _loss_dense(self.Xd, self.y, indices)


@lru_cache(maxsize=8)
def _all_combinations(p, s):
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(p), s)),
                       dtype=np.intp, count=math.comb(p, s) * s)
    out = flat.reshape(-1, s)
    out.setflags(write=False)
    return out


def _combination_chunks(p, s, total):
    if s == 0:
        yield np.zeros((1, 0), dtype=np.intp)
        return
    if total * s <= 4_000_000:
        combos = _all_combinations(p, s)
        for lo in range(0, total, _CHUNK):
            yield combos[lo:lo + _CHUNK]
        return
    it = itertools.combinations(range(p), s)
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _pick(candidates, scorer):
    """Exact rescoring; returns (best indices, loss, number of tied losers)."""
    scored = sorted((scorer.exact(c), c) for c in set(candidates))
    best_loss, best = scored[0]
    ties = sum(1 for lo, _ in scored[1:] if lo == best_loss)
    return best, best_loss, ties


def mle_exhaustive(X, y, s, budget=DEFAULT_BUDGET):
    """Exact support MLE by enumeration of all ``C(p, s)`` supports.

    Ties in the exact loss go to the lexicographically smallest index tuple.

    Raises
    ------
    EnumerationBudgetError
        If ``C(p, s)`` exceeds ``budget``; use :func:`mle_local_search`.
    """
    Xd, y = _dense(X, y)
    p = Xd.shape[1]
    s = check_int(s, "s", minimum=0, maximum=p)
    total = math.comb(p, s)
    if total > budget:
        raise EnumerationBudgetError(
            "C(%d, %d) = %d candidates exceeds the enumeration budget %d; "
            "use local search instead" % (p, s, total, budget))
    scorer = _Scorer(Xd, y, s)
    best_fast = math.inf
    pool = []
    for idx in _combination_chunks(p, s, total):
        fast = scorer.batch(idx)
        chunk_min = float(fast.min())
        if chunk_min > best_fast + scorer.window:
            continue
        best_fast = min(best_fast, chunk_min)
        cut = best_fast + scorer.window
        pool = [(f, c) for f, c in pool if f <= cut]
        keep = np.flatnonzero(fast <= cut)
        pool.extend((float(fast[k]), tuple(int(j) for j in idx[k])) for k in keep)
    best, best_loss, ties = _pick([c for _, c in pool], scorer)
    return EstimateResult(SupportSet(best, p), best_loss, "exhaustive", total, ties)


def _descend(scorer, start, max_sweeps, p):
    """Steepest single-swap descent from ``start``; returns the loss trajectory too."""
    current = tuple(start)
    cur_loss = scorer.exact(current)
    trajectory = [cur_loss]
    evaluated = 1
    s = len(current)
    if s == 0 or s == p:
        return current, cur_loss, trajectory, evaluated
    gram_diag = np.diag(scorer.gram)
    for _ in range(max_sweeps):
        inside = np.array(current, dtype=np.intp)
        outside = np.setdiff1d(np.arange(p), inside)
        resid = scorer.y - support_row_sums(scorer.Xd, current)
        r = scorer.Xd.T @ resid
        # loss(S - a + b) - loss(S) = G_aa + G_bb - 2 G_ab + 2 (r_a - r_b)
        pred = (gram_diag[inside][:, None] + gram_diag[outside][None, :]
                - 2.0 * scorer.gram[np.ix_(inside, outside)]
                + 2.0 * (r[inside][:, None] - r[outside][None, :]))
        evaluated += pred.size
        best_pred = float(pred.min())
        if best_pred < -scorer.window:
            a, b = np.unravel_index(int(np.argmin(pred)), pred.shape)
            moves = [(a, b)]
        else:
            moves = list(zip(*np.nonzero(pred < scorer.window)))
        if not moves:
            break
        options = []
        for a, b in moves:
            cand = tuple(sorted(set(current) - {int(inside[a])} | {int(outside[b])}))
            options.append((scorer.exact(cand), cand))
        evaluated += len(options)
        new_loss, new = min(options)
        if new_loss >= cur_loss:
            break
        current, cur_loss = new, new_loss
        trajectory.append(cur_loss)
    return current, cur_loss, trajectory, evaluated


def mle_local_search(X, y, s, restarts=10, max_sweeps=50, seed=0, return_trajectories=False):
    """Approximate support MLE by steepest single-swap descent.

    Each restart draws a uniform random support, then repeatedly applies the
    swap (one index out, one in) with the largest loss decrease until no swap
    improves or ``max_sweeps`` is reached. The best end point over all
    restarts is returned, ties resolved lexicographically.
    """
    Xd, y = _dense(X, y)
    p = Xd.shape[1]
    s = check_int(s, "s", minimum=0, maximum=p)
    restarts = check_int(restarts, "restarts", minimum=1)
    max_sweeps = check_int(max_sweeps, "max_sweeps", minimum=0)
    scorer = _Scorer(Xd, y, s)
    rng = generator(seed)
    ends, trajectories = [], []
    evaluated = 0
    for _ in range(restarts):
        start = sorted(int(j) for j in rng.permutation(p)[:s])
        end, end_loss, traj, n_eval = _descend(scorer, start, max_sweeps, p)
        ends.append((end_loss, end))
        trajectories.append(traj)
        evaluated += n_eval
    best_loss, best = min(ends)
    ties = len({c for lo, c in ends if lo == best_loss}) - 1
    result = EstimateResult(SupportSet(best, p), best_loss, "local_search", evaluated, ties)
    if return_trajectories:
        return result, trajectories
    return result


class SupportMLE(RegressorMixin, BaseEstimator):
    """Binary sparse regression by support-constrained least squares.

    Parameters
    ----------
    n_nonzero : int
        Support size ``s`` of the binary coefficient vector.
    method : {'exhaustive', 'local_search'}
    enumeration_budget : int
        Refuse exhaustive search above this many candidates.
    restarts, max_sweeps : int
        Local-search schedule.
    random_state : int
        Seed for local-search restarts.

    Attributes
    ----------
    support_ : SupportSet
    coef_ : ndarray of shape (n_features,)
        Indicator of ``support_``.
    loss_ : float
    result_ : EstimateResult
    """

    def __init__(self, n_nonzero=1, method="exhaustive", enumeration_budget=DEFAULT_BUDGET,
                 restarts=10, max_sweeps=50, random_state=0):
        self.n_nonzero = n_nonzero
        self.method = method
        self.enumeration_budget = enumeration_budget
        self.restarts = restarts
        self.max_sweeps = max_sweeps
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.method == "exhaustive":
            result = mle_exhaustive(X, y, self.n_nonzero, budget=self.enumeration_budget)
        elif self.method == "local_search":
            result = mle_local_search(X, y, self.n_nonzero, restarts=self.restarts,
                                      max_sweeps=self.max_sweeps, seed=self.random_state)
        else:
            raise ParameterError("unknown method %r" % (self.method,))
        self.result_ = result
        self.support_ = result.support
        self.coef_ = result.support.indicator()
        self.loss_ = result.loss
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return support_row_sums(X, self.support_.indices)
