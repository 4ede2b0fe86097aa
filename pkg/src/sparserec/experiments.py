"""Seeded Monte Carlo sweeps of recovery probability against sample size.

Each trial draws a fresh signal, design and noise from seeds derived from
``(master_seed, n, trial_index)``, estimates the support and records the
symmetric difference to the planted one. A trial succeeds when
``symdiff < 2 ceil(delta s)``.
"""

import csv
import dataclasses
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ._parallel import resolve_jobs
from ._random import derive_seed
from ._validation import ceil_mul, check_int, check_real
from .estimator import DEFAULT_BUDGET, loss, mle_exhaustive, mle_local_search
from .exceptions import DomainError, EnumerationBudgetError, ParameterError
from .model import make_instance, sample_design, sample_signal, sparsify_and_rescale, sym_diff_size
from .thresholds import RegimeParams, threshold

SETTINGS = ("sparse", "dense", "sparsified")
ESTIMATORS = ("exhaustive", "local_search")
CSV_HEADER = ("setting", "p", "s", "d", "sigma", "delta", "estimator", "n", "trials",
              "successes", "success_rate", "mean_symdiff_frac", "stderr", "master_seed")
SUCCESS_CRITERION = "symdiff < 2*ceil(delta*s)"

# thresholds reported next to each sweep
_ANNOTATIONS = {
    "sparse": ("n_star_sublinear", "n_inf_sp_sublinear"),
    "dense": ("n_inf_dense", "n_alg_dense"),
    "sparsified": ("n_star_sparsified", "n_inf_sparsified_strong"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a sweep's results.

    ``params`` supplies ``p``, ``s`` (or ``alpha``), ``d`` (or ``psi``) and
    ``sigma``; ``delta`` here is the error level used for the success test
    and the threshold annotation.
    """

    setting: str
    params: RegimeParams
    n_grid: tuple
    trials_per_n: int
    delta: float
    estimator: str = "exhaustive"
    master_seed: int = 0
    enumeration_budget: int = DEFAULT_BUDGET
    restarts: int = 10
    max_sweeps: int = 50

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ParameterError("setting must be one of %s, got %r" % (SETTINGS, self.setting))
        if self.estimator not in ESTIMATORS:
            raise ParameterError("estimator must be one of %s, got %r"
                                 % (ESTIMATORS, self.estimator))
        grid = tuple(check_int(n, "n_grid entry", minimum=1) for n in self.n_grid)
        if not grid:
            raise ParameterError("n_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ParameterError("n_grid must be strictly increasing, got %r" % (grid,))
        object.__setattr__(self, "n_grid", grid)
        check_int(self.trials_per_n, "trials_per_n", minimum=1)
        check_real(self.delta, "delta", low=0.0, high=1.0, low_open=True)
        check_int(self.master_seed, "master_seed", minimum=0, maximum=(1 << 64) - 1)
        s, d = self.s, self.d
        if not 0 <= s <= self.params.p:
            raise ParameterError("need 0 <= s <= p, got s=%d" % s)
        if not 0 <= d <= self.params.p:
            raise ParameterError("need 0 <= d <= p, got d=%d" % d)

    @property
    def p(self):
        return self.params.p

    @property
    def s(self):
        return self.params.support_size()

    @property
    def d(self):
        if self.setting == "dense":
            return self.params.p
        return self.params.density_count()

    @property
    def sigma(self):
        return float(self.params.sigma)

    @property
    def success_cutoff(self):
        """Trials succeed when ``symdiff`` is strictly below this."""
        return 2 * ceil_mul(self.delta, self.s)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["n_grid"] = list(self.n_grid)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["params"] = RegimeParams(**data["params"])
        data["n_grid"] = tuple(data["n_grid"])
        return cls(**data)


@dataclass(frozen=True)
class TrialRecord:
    """One trial. ``wall_ms`` is excluded from equality and from saved files."""

    n: int
    trial_index: int
    seed: int
    symdiff: int
    success: bool
    loss_star: float
    loss_hat: float
    support_hat: tuple = ()
    wall_ms: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class SweepRow:
    n: int
    trials: int
    successes: int
    success_rate: float
    mean_symdiff_frac: float
    stderr: float


@dataclass(frozen=True)
class SweepSummary:
    """Per-``n`` aggregates, the config that produced them and threshold values.

    ``thresholds`` maps a threshold kind to its value, or ``None`` when the
    formula is infeasible at these parameters.
    """

    config: ExperimentConfig
    rows: tuple
    thresholds: dict
    records: tuple = ()

    def row(self, n):
        for r in self.rows:
            if r.n == n:
                return r
        raise KeyError(n)

    @property
    def success_rates(self):
        return np.array([r.success_rate for r in self.rows])


def trial_seed(config, n, trial_index):
    return derive_seed(config.master_seed, n, trial_index)


def _estimate(config, X, y, seed):
    if config.estimator == "exhaustive":
        return mle_exhaustive(X, y, config.s, budget=config.enumeration_budget)
    return mle_local_search(X, y, config.s, restarts=config.restarts,
                            max_sweeps=config.max_sweeps,
                            seed=derive_seed(seed, "local_search"))


def trial_instance(config, n, trial_index):
    """Regenerate the planted instance of one trial.

    Returns ``(instance, X, y)`` where ``(X, y)`` is the pair handed to the
    estimator: the sparsified, rescaled one in the sparsified setting.
    """
    seed = trial_seed(config, n, trial_index)
    p, s = config.p, config.s
    support = sample_signal(p, s, seed=derive_seed(seed, "signal"))
    if config.setting == "sparse":
        design = sample_design(n, p, "sparse", config.d, seed=derive_seed(seed, "design"))
    else:
        design = sample_design(n, p, "dense", seed=derive_seed(seed, "design"))
    inst = make_instance(design, support, config.sigma, seed=derive_seed(seed, "noise"))
    if config.setting == "sparsified":
        inst = sparsify_and_rescale(inst, config.d, seed=derive_seed(seed, "mask"))
        return inst, inst.sparsified.x_tilde.toarray(), inst.sparsified.y_tilde
    return inst, design.toarray(), inst.y


def run_trial(config, n, trial_index):
    """Simulate and estimate one trial at sample size ``n``."""
    n = check_int(n, "n", minimum=1)
    trial_index = check_int(trial_index, "trial_index", minimum=0)
    start = time.perf_counter()
    seed = trial_seed(config, n, trial_index)
    inst, X, y = trial_instance(config, n, trial_index)
    support = inst.beta_support
    try:
        result = _estimate(config, X, y, seed)
    except EnumerationBudgetError as exc:
        raise EnumerationBudgetError("trial n=%d index=%d: %s" % (n, trial_index, exc)) from exc
    symdiff = sym_diff_size(result.support, support)
    wall = (time.perf_counter() - start) * 1e3
    return TrialRecord(n=n, trial_index=trial_index, seed=seed, symdiff=symdiff,
                       success=symdiff < config.success_cutoff,
                       loss_star=loss(X, y, support), loss_hat=result.loss,
                       support_hat=result.support.indices, wall_ms=wall)


def _run_chunk(config, tasks):
    return [run_trial(config, n, t) for n, t in tasks]


def threshold_annotations(config):
    params = dataclasses.replace(config.params, delta=config.delta)
    if config.setting == "sparsified":
        params = dataclasses.replace(
            params, regime="sparsified",
            alpha=params.sparsity_ratio, psi=params.density_ratio)
    out = {}
    for kind in _ANNOTATIONS[config.setting]:
        try:
            out[kind] = threshold(kind, params).value
        except DomainError:
            out[kind] = None
    return out


def summarize(config, records):
    records = tuple(sorted(records, key=lambda r: (r.n, r.trial_index)))
    rows = []
    for n in config.n_grid:
        sub = [r for r in records if r.n == n]
        trials = len(sub)
        successes = sum(1 for r in sub if r.success)
        rate = successes / trials
        denom = 2 * config.s
        frac = math.fsum(r.symdiff for r in sub) / (trials * denom) if denom else 0.0
        rows.append(SweepRow(n, trials, successes, rate, frac,
                             math.sqrt(rate * (1.0 - rate) / trials)))
    return SweepSummary(config, tuple(rows), threshold_annotations(config), records)


def sweep(config, n_jobs=None):
    """Run ``trials_per_n`` trials at every ``n`` in the grid and aggregate.

    Results do not depend on ``n_jobs``; it only sets the worker count.
    """
    tasks = [(n, t) for n in config.n_grid for t in range(config.trials_per_n)]
    n_jobs = resolve_jobs(n_jobs)
    if n_jobs == 1:
        records = _run_chunk(config, tasks)
    else:
        size = max(1, len(tasks) // (4 * n_jobs))
        chunks = [tasks[i:i + size] for i in range(0, len(tasks), size)]
        parts = Parallel(n_jobs=n_jobs)(delayed(_run_chunk)(config, c) for c in chunks)
        records = [r for part in parts for r in part]
    return summarize(config, records)


# -- persistence ---------------------------------------------------------------

def _csv_rows(summary):
    cfg = summary.config
    for r in summary.rows:
        yield (cfg.setting, cfg.p, cfg.s, cfg.d, repr(cfg.sigma), repr(float(cfg.delta)),
               cfg.estimator, r.n, r.trials, r.successes, repr(r.success_rate),
               repr(r.mean_symdiff_frac), repr(r.stderr), cfg.master_seed)


def summary_to_dict(summary):
    return {
        "config": summary.config.to_dict(),
        "success_criterion": SUCCESS_CRITERION,
        "thresholds": dict(summary.thresholds),
        "rows": [dataclasses.asdict(r) for r in summary.rows],
        "records": [{k: v for k, v in dataclasses.asdict(r).items() if k != "wall_ms"}
                    for r in summary.records],
    }


def summary_from_dict(data):
    config = ExperimentConfig.from_dict(data["config"])
    rows = tuple(SweepRow(**r) for r in data["rows"])
    records = tuple(TrialRecord(**{**r, "support_hat": tuple(r["support_hat"])})
                    for r in data.get("records", ()))
    return SweepSummary(config, rows, dict(data["thresholds"]), records)


def dumps(summary, fmt="csv"):
    """Serialise a summary to text in ``'csv'`` or ``'json'`` format."""
    if fmt == "json":
        return json.dumps(summary_to_dict(summary), indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        lines = [",".join(CSV_HEADER)]
        lines.extend(",".join(str(v) for v in row) for row in _csv_rows(summary))
        return "\n".join(lines) + "\n"
    raise ParameterError("format must be 'csv' or 'json', got %r" % (fmt,))


def persist(summary, path, fmt="csv"):
    text = dumps(summary, fmt)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, "cannot write %s: %s" % (path, exc.strerror)) from exc


def load_summary(path):
    """Read back a JSON summary written by :func:`persist`."""
    try:
        with open(path, encoding="utf-8") as fh:
            return summary_from_dict(json.load(fh))
    except OSError as exc:
        raise OSError(exc.errno, "cannot read %s: %s" % (path, exc.strerror)) from exc


def read_csv(path):
    """Rows of a CSV summary as dicts of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
