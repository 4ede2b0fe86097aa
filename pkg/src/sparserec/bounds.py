"""Numerical evaluation of the large-deviation machinery behind the thresholds.

Two families live here. The dense/sparse-measurement analysis needs the
exact binomial Chernoff base ``E[2 sigma / sqrt(4 sigma^2 + K)]`` with
``K ~ Bin(m, q)`` and the normalised binomial statistic whose normal limit
drives the asymptotics. The sparsification analysis needs the conditional
Chernoff kernel: given the Bernoulli mask, ``-theta * Delta_i`` reduces to
a product ``U V`` of jointly Gaussian variables, whose moment generating
function has the closed form in :func:`gaussian_product_mgf`.

Infinite moment generating functions are returned as ``math.inf`` rather
than raised, so that tables stay rectangular. Monte Carlo routines split
their trials into fixed seeded blocks and are independent of ``n_jobs``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._parallel import run_blocks
from ._random import derive_seed, generator
from ._validation import ceil_mul, check_int, check_real
from .exceptions import DomainError, ParameterError, UnreliableEstimateWarning

# fraction of infinite kernel draws above which an estimate is flagged
INFINITE_FRACTION_LIMIT = 0.01


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error.

    ``infinite_fraction`` is the share of draws discarded because they were
    infinite; ``unreliable`` is set when it exceeds 1%.
    """

    value: float
    stderr: float
    trials: int
    infinite_fraction: float = 0.0
    unreliable: bool = False


def _mean_and_se(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return math.nan, math.nan
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, se


# -- product of Gaussians ------------------------------------------------------

def gaussian_product_mgf(sigma1, sigma2, rho):
    """``E[exp(N1 N2)]`` for centred jointly Gaussian ``N1``, ``N2``.

    Finite only when ``1/(sigma1 sigma2) - rho > 1``, in which case it equals
    ``1 / (sigma1 sigma2 sqrt((1/(sigma1 sigma2) - rho)^2 - 1))``; otherwise
    ``math.inf``.
    """
    sigma1 = check_real(sigma1, "sigma1", low=0.0, low_open=True)
    sigma2 = check_real(sigma2, "sigma2", low=0.0, low_open=True)
    rho = check_real(rho, "rho", low=-1.0, high=1.0)
    prod = sigma1 * sigma2
    gap = 1.0 / prod - rho
    if not gap > 1.0:
        return math.inf
    return 1.0 / (prod * math.sqrt(gap * gap - 1.0))


def _product_mgf_from_moments(var1, var2, cov):
    """Vectorised ``E[exp(N1 N2)]`` from variances and covariance.

    Multiplying numerator and denominator of the closed form by
    ``sigma1 sigma2`` gives ``1 / sqrt((1 - cov)^2 - var1 var2)`` under the
    condition ``1 - cov > sqrt(var1 var2)``. Degenerate pairs (either
    variance zero) have ``N1 N2 = 0`` almost surely and map to 1.
    """
    var1, var2, cov = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64)
                                            for a in (var1, var2, cov)))
    prod = np.sqrt(var1 * var2)
    out = np.full(var1.shape, math.inf)
    degenerate = prod == 0.0
    out[degenerate] = 1.0
    ok = ~degenerate & (1.0 - cov > prod)
    disc = (1.0 - cov[ok]) ** 2 - prod[ok] ** 2
    out[ok] = np.where(disc > 0.0, 1.0 / np.sqrt(np.where(disc > 0.0, disc, 1.0)), math.inf)
    return out


def gaussian_product_mgf_mc(sigma1, sigma2, rho, draws, seed=0, n_jobs=None):
    """Monte Carlo estimate of ``E[exp(N1 N2)]`` by direct sampling."""
    sigma1 = check_real(sigma1, "sigma1", low=0.0, low_open=True)
    sigma2 = check_real(sigma2, "sigma2", low=0.0, low_open=True)
    rho = check_real(rho, "rho", low=-1.0, high=1.0)
    draws = check_int(draws, "draws", minimum=2)
    values = run_blocks(_product_block, draws, seed, n_jobs, block_size=1 << 20,
                        args=(sigma1, sigma2, rho))
    mean, se = _mean_and_se(values)
    return MCEstimate(mean, se, draws)


def _product_block(size, seed, sigma1, sigma2, rho):
    rng = generator(seed)
    g1 = rng.standard_normal(size)
    g2 = rng.standard_normal(size)
    n1 = sigma1 * g1
    n2 = sigma2 * (rho * g1 + math.sqrt(1.0 - rho * rho) * g2)
    return np.exp(n1 * n2)


# -- Chernoff kernel for sparsified measurements -------------------------------

@dataclass(frozen=True)
class BlockCounts:
    """Mask sums over the blocks ``A = S* \\ S``, ``B = S \\ S*``, ``C = S* & S``.

    ``M = |A| = |B|`` and ``|C| = s - M``.
    """

    sum_A: int
    sum_B: int
    sum_C: int
    M: int
    s: int

    def __post_init__(self):
        s = check_int(self.s, "s", minimum=0)
        M = check_int(self.M, "M", minimum=0, maximum=s)
        check_int(self.sum_A, "sum_A", minimum=0, maximum=M)
        check_int(self.sum_B, "sum_B", minimum=0, maximum=M)
        check_int(self.sum_C, "sum_C", minimum=0, maximum=s - M)


@dataclass(frozen=True)
class ChernoffKernel:
    """Conditional variances, covariance, correlation and MGF of ``(U, V)``.

    ``rho`` is NaN (and ``rho_defined`` False) when a variance vanishes; the
    MGF is then 1 because ``U V`` is almost surely zero.
    """

    sigma2_U: float
    sigma2_V: float
    cov_UV: float
    rho: float
    f_value: float
    rho_defined: bool = True

    @property
    def finite(self):
        return math.isfinite(self.f_value)


def _kernel_moments(theta, sum_A, sum_B, sum_C, p, d, s, sigma):
    q = d / p
    gamma = 2.0 * d * d * theta * sigma * sigma / (p * p)
    sum_A = np.asarray(sum_A, dtype=np.float64)
    sum_B = np.asarray(sum_B, dtype=np.float64)
    sum_C = np.asarray(sum_C, dtype=np.float64)
    var_u = theta * theta * (sum_A + sum_B)
    var_v = (4.0 * d * d * s / (p * p)
             + ((1.0 + gamma) ** 2 - 4.0 * q * (1.0 + gamma)) * sum_A
             + (1.0 - gamma) ** 2 * sum_B
             + 4.0 * (1.0 - 2.0 * q) * sum_C)
    cov = theta * ((1.0 + gamma - 2.0 * q) * sum_A - (1.0 - gamma) * sum_B)
    return var_u, var_v, cov


def chernoff_kernel(theta, counts, p, d, s, sigma):
    """Kernel of the conditional moment generating function of ``-theta Delta_i``.

    With ``gamma = 2 d^2 theta sigma^2 / p^2`` and ``q = d / p``::

        var_U = theta^2 (sum_A + sum_B)
        var_V = 4 d^2 s / p^2 + ((1 + gamma)^2 - 4 q (1 + gamma)) sum_A
                + (1 - gamma)^2 sum_B + 4 (1 - 2 q) sum_C
        cov   = theta ((1 + gamma - 2 q) sum_A - (1 - gamma) sum_B)

    and ``f = E[exp(U V) | mask]`` from :func:`gaussian_product_mgf`.
    """
    theta = check_real(theta, "theta", low=0.0, low_open=True)
    sigma = check_real(sigma, "sigma", low=0.0, low_open=True)
    p = check_int(p, "p", minimum=1)
    d = check_int(d, "d", minimum=0, maximum=p)
    if counts.s != s:
        raise ParameterError("counts were built for s=%d, not s=%d" % (counts.s, s))
    var_u, var_v, cov = (float(v) for v in _kernel_moments(
        theta, counts.sum_A, counts.sum_B, counts.sum_C, p, d, s, sigma))
    if var_u == 0.0 or var_v == 0.0:
        return ChernoffKernel(var_u, var_v, cov, math.nan, 1.0, rho_defined=False)
    sd_u, sd_v = math.sqrt(var_u), math.sqrt(var_v)
    rho = min(1.0, max(-1.0, cov / (sd_u * sd_v)))
    return ChernoffKernel(var_u, var_v, cov, rho, gaussian_product_mgf(sd_u, sd_v, rho))


def _kernel_f(theta, sum_A, sum_B, sum_C, p, d, s, sigma):
    return _product_mgf_from_moments(*_kernel_moments(theta, sum_A, sum_B, sum_C,
                                                      p, d, s, sigma))


def _mask_sums_block(size, seed, p, d, s, M):
    rng = generator(seed)
    q = d / p
    return (rng.binomial(M, q, size), rng.binomial(M, q, size), rng.binomial(s - M, q, size))


def _kernel_block(size, seed, theta, p, d, s, M, sigma):
    sa, sb, sc = _mask_sums_block(size, seed, p, d, s, M)
    return _kernel_f(theta, sa, sb, sc, p, d, s, sigma)


def _check_blocks(p, s, d, M):
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s", minimum=0, maximum=p)
    d = check_int(d, "d", minimum=0, maximum=p)
    M = check_int(M, "M", minimum=0, maximum=min(s, p - s))
    return p, s, d, M


def mgf_minus_delta_mc(theta, p, s, d, M, sigma, trials, seed=0, n_jobs=None):
    """Estimate ``M_{-Delta_i}(theta) = E_B[f(theta, B)]`` by sampling masks.

    Infinite kernel draws are excluded from the mean and reported through
    ``infinite_fraction``; above 1% the estimate is flagged unreliable and
    an :class:`UnreliableEstimateWarning` is emitted.
    """
    theta = check_real(theta, "theta", low=0.0, low_open=True)
    sigma = check_real(sigma, "sigma", low=0.0, low_open=True)
    p, s, d, M = _check_blocks(p, s, d, M)
    trials = check_int(trials, "trials", minimum=2)
    values = run_blocks(_kernel_block, trials, seed, n_jobs,
                        args=(theta, p, d, s, M, sigma))
    finite = np.isfinite(values)
    inf_frac = 1.0 - float(np.count_nonzero(finite)) / trials
    mean, se = _mean_and_se(values[finite])
    unreliable = inf_frac > INFINITE_FRACTION_LIMIT
    if unreliable:
        warnings.warn("%.2f%% of kernel draws were infinite at theta=%r"
                      % (100 * inf_frac, theta), UnreliableEstimateWarning, stacklevel=2)
    return MCEstimate(mean, se, trials, inf_frac, unreliable)


def _direct_block(size, seed, theta, p, d, s, M, sigma):
    # columns: A = [0, M), C = [M, s), B = [s, s + M); S* = A + C, S = C + B
    rng = generator(seed)
    q = d / p
    k = s + M
    mask = rng.random((size, k)) < q
    x = rng.standard_normal((size, k))
    z = sigma * rng.standard_normal(size)
    xt = np.where(mask, x, 0.0)
    sum_s = xt[:, M:k].sum(axis=1)
    sum_star = xt[:, :s].sum(axis=1)
    sum_star_full = x[:, :s].sum(axis=1)
    delta = (sum_s ** 2 - sum_star ** 2
             + 2.0 * q * (sum_star_full + z) * (sum_star - sum_s))
    return np.exp(-theta * delta)


def mgf_minus_delta_direct(theta, p, s, d, M, sigma, trials, seed=0, n_jobs=None):
    """Estimate ``E[exp(-theta Delta_i)]`` by sampling the row, mask and noise.

    ``Delta_i`` is one row's contribution to ``L(S) - L(S*)`` for the
    sparsified, rescaled problem, with ``|S* \\ S| = M``.
    """
    theta = check_real(theta, "theta", low=0.0, low_open=True)
    sigma = check_real(sigma, "sigma", low=0.0, high=None)
    p, s, d, M = _check_blocks(p, s, d, M)
    trials = check_int(trials, "trials", minimum=2)
    values = run_blocks(_direct_block, trials, seed, n_jobs,
                        args=(theta, p, d, s, M, sigma))
    mean, se = _mean_and_se(values)
    return MCEstimate(mean, se, trials)


# -- sparse measurements: exact binomial Chernoff base --------------------------

def chernoff_base_exact(m, q, sigma):
    """``E[2 sigma / sqrt(4 sigma^2 + K)]`` for ``K ~ Bin(m, q)``, as a finite sum."""
    m = check_int(m, "m", minimum=0)
    q = check_real(q, "q", low=0.0, high=1.0)
    sigma = check_real(sigma, "sigma", low=0.0, low_open=True)
    k = np.arange(m + 1)
    pmf = stats.binom.pmf(k, m, q)
    terms = pmf * (2.0 * sigma / np.sqrt(4.0 * sigma * sigma + k))
    return math.fsum(terms.tolist())


def proposition1_bound(n, p, s, d, delta, sigma, mode="exact_base"):
    """Upper bound on ``P(L(S) <= L(S*))`` for ``|S Δ S*| >= 2 delta s``.

    ``mode='asymptotic'`` returns ``(2 sigma^2 p / (delta d s))^(n/2)``.
    ``mode='exact_base'`` returns the pre-asymptotic Chernoff bound
    ``chernoff_base_exact(2 ceil(delta s), d/p, sigma)^n``. Values above 1
    are vacuous but returned as computed.
    """
    n = check_int(n, "n", minimum=0)
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s", minimum=1, maximum=p)
    d = check_int(d, "d", minimum=0, maximum=p)
    delta = check_real(delta, "delta", low=0.0, high=1.0, low_open=True)
    sigma = check_real(sigma, "sigma", low=0.0, low_open=True)
    if mode == "asymptotic":
        if d == 0:
            return math.inf if n > 0 else 1.0
        return (2.0 * sigma * sigma * p / (delta * d * s)) ** (n / 2.0)
    if mode == "exact_base":
        return chernoff_base_exact(2 * ceil_mul(delta, s), d / p, sigma) ** n
    raise ParameterError("unknown mode %r (expected 'asymptotic' or 'exact_base')" % (mode,))


def _sample_delta_inputs(size, seed, n, k, q):
    rng = generator(seed)
    mask = rng.random((size, n, k)) < q
    x = np.where(mask, rng.standard_normal((size, n, k)), 0.0)
    z = rng.standard_normal((size, n))
    return x, z


def _sorted_sums(x):
    return np.sort(x, axis=-1).sum(axis=-1)


def _delta_block(size, seed, n, s, M, q, sigma):
    # columns: S* = [0, s), S = [M, s + M)
    x, z = _sample_delta_inputs(size, seed, n, s + M, q)
    y = _sorted_sums(x[..., :s]) + sigma * z
    r_star = y - _sorted_sums(x[..., :s])
    r_s = y - _sorted_sums(x[..., M:s + M])
    return np.sum(r_s * r_s, axis=1) - np.sum(r_star * r_star, axis=1)


def empirical_delta_probability(n, p, s, d, delta, sigma, trials, seed=0, n_jobs=None):
    """Monte Carlo ``P(L(S) - L(S*) <= 0)`` on sparse Gaussian designs.

    ``S`` differs from ``S*`` in exactly ``M = ceil(delta s)`` indices, so
    the symmetric difference is ``2 ceil(delta s)``. Only the ``s + M``
    columns touching ``S`` or ``S*`` are drawn; the others do not enter
    either loss.
    """
    n = check_int(n, "n", minimum=1)
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s", minimum=1, maximum=p)
    d = check_int(d, "d", minimum=0, maximum=p)
    delta = check_real(delta, "delta", low=0.0, high=1.0, low_open=True)
    sigma = check_real(sigma, "sigma", low=0.0)
    M = ceil_mul(delta, s)
    if M > s or s + M > p:
        raise ParameterError("need ceil(delta s) <= s and s + ceil(delta s) <= p")
    trials = check_int(trials, "trials", minimum=2)
    deltas = run_blocks(_delta_block, trials, seed, n_jobs, block_size=1 << 13,
                        args=(n, s, M, d / p, sigma))
    hits = (deltas <= 0.0).astype(np.float64)
    mean, se = _mean_and_se(hits)
    return MCEstimate(mean, se, trials)


# -- normal approximation of the binomial mask count ---------------------------

def clt_statistic(count, m, q):
    """``(count - m q) / sqrt(m q)``; accepts scalars or arrays."""
    m = check_int(m, "m", minimum=0)
    q = check_real(q, "q", low=0.0, high=1.0)
    mean = m * q
    if not mean > 0.0:
        raise DomainError("clt_statistic needs m * q > 0")
    out = (np.asarray(count, dtype=np.float64) - mean) / math.sqrt(mean)
    return float(out) if out.ndim == 0 else out


def clt_draws(m, q, draws, seed=0):
    """Sample the normalised statistic for ``count ~ Bin(m, q)``."""
    draws = check_int(draws, "draws", minimum=1)
    counts = generator(seed).binomial(check_int(m, "m", minimum=0), q, draws)
    return clt_statistic(counts, m, q)


def clt_ks_distance(m, q, draws, seed=0):
    """Kolmogorov-Smirnov distance between the sampled statistic and N(0, 1)."""
    return float(stats.kstest(clt_draws(m, q, draws, seed), "norm").statistic)


# -- linear regime: C*(eta), xi(p) and H_p --------------------------------------

def c_star(eta, psi):
    """``psi / ((1 - psi) (2 - eta (1 - psi)))``."""
    eta = check_real(eta, "eta", low=0.0, high=1.0, low_open=True)
    psi = check_real(psi, "psi", low=0.0, high=1.0, low_open=True, high_open=True)
    return psi / ((1.0 - psi) * (2.0 - eta * (1.0 - psi)))


def xi(p, eta, alpha, psi):
    """Chernoff parameter ``C*(eta) / (2 alpha psi p)`` used in the linear regime."""
    p = check_int(p, "p", minimum=1)
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    return c_star(eta, psi) / (2.0 * alpha * psi * p)


def h_p_limit(eta, psi):
    """Almost-sure limit ``sqrt(1 / (1 + eta psi C*(eta)))`` of ``H_p``."""
    eta = check_real(eta, "eta", low=0.0, high=1.0)
    if eta == 0.0:
        return 1.0
    return math.sqrt(1.0 / (1.0 + eta * psi * c_star(eta, psi)))


def linear_instance(p, eta, alpha, psi):
    """Integer ``(s, d, M)`` for ``s = alpha p``, ``d = psi p``, ``M = ceil(eta s)``."""
    p = check_int(p, "p", minimum=1)
    eta = check_real(eta, "eta", low=0.0, high=1.0, low_open=True)
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    psi = check_real(psi, "psi", low=0.0, high=1.0, low_open=True, high_open=True)
    s = max(1, int(round(alpha * p)))
    d = max(1, int(round(psi * p)))
    M = ceil_mul(eta, s)
    if M > s or s + M > p:
        raise DomainError("ceil(eta s) = %d does not fit: need M <= s and s + M <= p" % M)
    return s, d, M


def h_p_plugin(p, eta, alpha, psi, sigma=1.0):
    """``H_p = f(xi(p), B)`` with every mask sum replaced by its expectation.

    The sums over ``A``, ``B`` and ``C`` become ``round(M psi)``,
    ``round(M psi)`` and ``round((s - M) psi)``. Returns ``math.inf`` when
    ``p`` is too small for the kernel to be finite.
    """
    s, d, M = linear_instance(p, eta, alpha, psi)
    q = d / p
    counts = BlockCounts(int(round(M * q)), int(round(M * q)), int(round((s - M) * q)), M, s)
    theta = xi(p, eta, alpha, psi)
    return chernoff_kernel(theta, counts, p, d, s, sigma).f_value


@dataclass(frozen=True)
class UIProbeRow:
    p: int
    T: float
    estimate: float
    stderr: float
    infinite_fraction: float


def ui_probe(p_grid, T_grid, eta, alpha, psi, trials, seed=0, sigma=1.0, n_jobs=None):
    """Tail expectations ``E[H_p 1{H_p > T}]`` over a grid of ``p`` and ``T``.

    Exploratory evidence about uniform integrability of ``H_p``; it carries
    no pass/fail meaning. If any draw of ``H_p`` is infinite, every tail
    estimate for that ``p`` is infinite.
    """
    trials = check_int(trials, "trials", minimum=1000)
    rows = []
    for k, p in enumerate(p_grid):
        s, d, M = linear_instance(p, eta, alpha, psi)
        theta = xi(p, eta, alpha, psi)
        values = run_blocks(_kernel_block, trials, derive_seed(seed, "mc_block", 1 << 20, k),
                            n_jobs, args=(theta, p, d, s, M, sigma))
        inf_frac = float(np.count_nonzero(~np.isfinite(values))) / trials
        for T in T_grid:
            tail = np.where(values > T, values, 0.0)
            if inf_frac > 0.0:
                rows.append(UIProbeRow(int(p), float(T), math.inf, math.nan, inf_frac))
                continue
            mean, se = _mean_and_se(tail)
            rows.append(UIProbeRow(int(p), float(T), mean, se, inf_frac))
    return rows
