"""Closed-form sample-size thresholds for sparse support recovery.

All logarithms are natural and entropies are in nats. Thresholds are
returned as real numbers; round up to obtain a sample count.

Threshold kinds
---------------
n_star_sublinear
    ``2 s log(p/s) / (log(ds/p) + log(delta / (2 sigma^2)))``
n_star_linear
    ``2 H(alpha) p / (log d + log(delta alpha / (2 sigma^2)))``
n_inf_sp_sublinear
    ``2 s log(p/s) / log(ds/p)``
n_inf_sp_linear
    ``2 H(alpha) p / log d``
n_inf_dense
    ``2 s log(p/s) / log s``
n_alg_dense
    ``2 s log(p - s)``
n_star_sparsified
    ``2 H(alpha) p / log(1 + delta psi^2 / ((1 - psi)(2 - delta (1 - psi))))``
n_inf_sparsified_strong
    ``2 (2 - delta) H(alpha) p / (delta psi^2)``
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from scipy.special import gammaln

from ._validation import check_int, check_real
from .exceptions import DomainError, InfeasibleParametersError, ParameterError

KINDS = (
    "n_star_sublinear",
    "n_star_linear",
    "n_inf_sp_sublinear",
    "n_inf_sp_linear",
    "n_inf_dense",
    "n_alg_dense",
    "n_star_sparsified",
    "n_inf_sparsified_strong",
)

# finite-size stand-ins for the asymptotic premises; advisory only
DS_OVER_P_MIN = 10.0
SUBLINEAR_MAX_RATIO = 0.1
SPARSE_DENSITY_MAX = 0.1
DENOMINATOR_RTOL = 1e-8


def entropy(alpha):
    """Binary entropy ``-a ln a - (1 - a) ln(1 - a)`` in nats."""
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    return -alpha * math.log(alpha) - (1.0 - alpha) * math.log1p(-alpha)


def log_binomial(p, s):
    """``ln C(p, s)`` through log-gamma."""
    p = check_int(p, "p", minimum=0)
    s = check_int(s, "s", minimum=0, maximum=p)
    return float(gammaln(p + 1) - gammaln(s + 1) - gammaln(p - s + 1))


@dataclass(frozen=True)
class RegimeParams:
    """Parameter tuple shared by thresholds, bounds and experiments.

    Either ``s`` or ``alpha`` (with ``s = alpha p``) and either ``d`` or
    ``psi`` (with ``d = psi p``) may be given. ``regime`` is one of
    ``'sublinear'``, ``'linear'`` or ``'sparsified'``.
    """

    p: int
    s: Optional[int] = None
    alpha: Optional[float] = None
    d: Optional[int] = None
    psi: Optional[float] = None
    sigma: float = 1.0
    delta: float = 0.5
    regime: str = "sublinear"

    def __post_init__(self):
        if self.regime not in ("sublinear", "linear", "sparsified"):
            raise ParameterError("unknown regime %r" % (self.regime,))
        check_int(self.p, "p", minimum=1)

    @property
    def sparsity(self):
        """Support size as a real number (``alpha p`` when only ``alpha`` is known)."""
        if self.s is not None:
            return float(self.s)
        if self.alpha is not None:
            return self.alpha * self.p
        raise ParameterError("either s or alpha is required")

    @property
    def density(self):
        if self.d is not None:
            return float(self.d)
        if self.psi is not None:
            return self.psi * self.p
        raise ParameterError("either d or psi is required")

    @property
    def sparsity_ratio(self):
        if self.alpha is not None:
            return float(self.alpha)
        if self.s is not None:
            return self.s / self.p
        raise ParameterError("either s or alpha is required")

    @property
    def density_ratio(self):
        if self.psi is not None:
            return float(self.psi)
        if self.d is not None:
            return self.d / self.p
        raise ParameterError("either d or psi is required")

    def support_size(self):
        """Integer support size; ``alpha p`` must be (numerically) integral."""
        return _as_count(self.s, self.alpha, self.p, "s", "alpha")

    def density_count(self):
        return _as_count(self.d, self.psi, self.p, "d", "psi")


def _as_count(count, ratio, p, name, ratio_name):
    if count is not None:
        return int(count)
    if ratio is None:
        raise ParameterError("either %s or %s is required" % (name, ratio_name))
    value = ratio * p
    rounded = round(value)
    if abs(value - rounded) > 1e-9 * max(1.0, abs(value)):
        raise ParameterError("%s * p = %r is not an integer" % (ratio_name, value))
    return int(rounded)


@dataclass(frozen=True)
class ThresholdReport:
    value: float
    formula: str
    inputs: RegimeParams
    validity: Tuple[str, ...] = field(default_factory=tuple)


def _positive_denominator(terms, term):
    """Sum ``terms`` and reject sums that are not clearly positive.

    A sum within ``DENOMINATOR_RTOL`` of total cancellation is treated as
    zero: inputs typed to 8 significant digits cannot resolve it, and the
    resulting threshold would be an artefact of rounding.
    """
    value = math.fsum(terms)
    scale = math.fsum(abs(t) for t in terms)
    if not value > DENOMINATOR_RTOL * scale:
        raise InfeasibleParametersError(
            "infeasible parameters: %s ≤ 0 (evaluates to %r)" % (term, value), term=term)
    return value


def _log_ratio(x, log10_y):
    # ratios of logs are base-free; base 10 keeps powers of ten exact
    return math.log10(x) / log10_y


def _flags(params, need_ds=True, need_sublinear=False, need_sparse=True):
    flags = []
    p = params.p
    if need_sparse and params.density / p > SPARSE_DENSITY_MAX:
        flags.append("d = o(p) premise weak: d/p = %r > %r"
                     % (params.density / p, SPARSE_DENSITY_MAX))
    if need_ds and params.density * params.sparsity / p < DS_OVER_P_MIN:
        flags.append("ds/p -> infinity premise weak: ds/p = %r < %r"
                     % (params.density * params.sparsity / p, DS_OVER_P_MIN))
    if need_sublinear and params.sparsity / p > SUBLINEAR_MAX_RATIO:
        flags.append("s = o(p) premise weak: s/p = %r > %r"
                     % (params.sparsity / p, SUBLINEAR_MAX_RATIO))
    return tuple(flags)


def _check_common(params):
    p = params.p
    s = params.sparsity
    if not 0.0 < s <= p:
        raise DomainError("sparsity must satisfy 0 < s <= p, got s=%r, p=%d" % (s, p))
    return p, s


def _n_star_sublinear(params):
    p, s = _check_common(params)
    d = params.density
    sigma = check_real(params.sigma, "sigma", low=0.0, low_open=True)
    delta = check_real(params.delta, "delta", low=0.0, high=1.0, low_open=True, high_open=True)
    if d <= 0:
        raise DomainError("d must be positive, got %r" % d)
    denom = _positive_denominator((math.log(d * s / p), math.log(delta / (2.0 * sigma ** 2))),
                                  "log(ds/p) + log(δ/2σ²)")
    return 2.0 * s * math.log(p / s) / denom, _flags(params, need_sublinear=True)


def _n_star_linear(params):
    p = params.p
    alpha = check_real(params.sparsity_ratio, "alpha", low=0.0, high=1.0,
                       low_open=True, high_open=True)
    d = params.density
    sigma = check_real(params.sigma, "sigma", low=0.0, low_open=True)
    delta = check_real(params.delta, "delta", low=0.0, high=1.0, low_open=True, high_open=True)
    if d <= 0:
        raise DomainError("d must be positive, got %r" % d)
    denom = _positive_denominator((math.log(d), math.log(delta * alpha / (2.0 * sigma ** 2))),
                                  "log d + log(δα/2σ²)")
    return 2.0 * entropy(alpha) * p / denom, _flags(params)


def _n_inf_sp_sublinear(params):
    p, s = _check_common(params)
    d = params.density
    if d <= 0:
        raise DomainError("d must be positive, got %r" % d)
    denom = _positive_denominator((math.log10(d * s / p),), "log(ds/p)")
    return 2.0 * s * _log_ratio(p / s, denom), _flags(params, need_sublinear=True)


def _n_inf_sp_linear(params):
    p = params.p
    alpha = check_real(params.sparsity_ratio, "alpha", low=0.0, high=1.0,
                       low_open=True, high_open=True)
    d = params.density
    if d <= 0:
        raise DomainError("d must be positive, got %r" % d)
    denom = _positive_denominator((math.log(d),), "log d")
    return 2.0 * entropy(alpha) * p / denom, _flags(params)


def _n_inf_dense(params):
    p, s = _check_common(params)
    denom = _positive_denominator((math.log10(s),), "log s")
    return 2.0 * s * _log_ratio(p / s, denom), _flags(params, need_ds=False,
                                                     need_sublinear=True, need_sparse=False)


def _n_alg_dense(params):
    p, s = _check_common(params)
    if s >= p:
        raise DomainError("n_alg_dense needs s < p")
    return 2.0 * s * math.log(p - s), _flags(params, need_ds=False, need_sublinear=True,
                                             need_sparse=False)


def _sparsified_inputs(params):
    alpha = check_real(params.sparsity_ratio, "alpha", low=0.0, high=1.0,
                       low_open=True, high_open=True)
    psi = check_real(params.density_ratio, "psi", low=0.0, high=1.0,
                     low_open=True, high_open=True)
    delta = check_real(params.delta, "delta", low=0.0, high=1.0, low_open=True, high_open=True)
    return alpha, psi, delta


def _n_star_sparsified(params):
    alpha, psi, delta = _sparsified_inputs(params)
    ratio = delta * psi ** 2 / ((1.0 - psi) * (2.0 - delta * (1.0 - psi)))
    denom = _positive_denominator((math.log1p(ratio),),
                                  "log(1 + δψ²/((1-ψ)(2-δ(1-ψ))))")
    return 2.0 * entropy(alpha) * params.p / denom, ()


def _n_inf_sparsified_strong(params):
    alpha, psi, delta = _sparsified_inputs(params)
    flags = ()
    if psi > SPARSE_DENSITY_MAX:
        flags = ("psi -> 0 premise weak: psi = %r > %r" % (psi, SPARSE_DENSITY_MAX),)
    return 2.0 * (2.0 - delta) * entropy(alpha) * params.p / (delta * psi ** 2), flags


_FORMULAS = {
    "n_star_sublinear": _n_star_sublinear,
    "n_star_linear": _n_star_linear,
    "n_inf_sp_sublinear": _n_inf_sp_sublinear,
    "n_inf_sp_linear": _n_inf_sp_linear,
    "n_inf_dense": _n_inf_dense,
    "n_alg_dense": _n_alg_dense,
    "n_star_sparsified": _n_star_sparsified,
    "n_inf_sparsified_strong": _n_inf_sparsified_strong,
}


def threshold(kind, params):
    """Evaluate one threshold formula.

    Raises
    ------
    InfeasibleParametersError
        When the formula's denominator is not strictly positive.
    DomainError
        When an input lies outside the formula's domain.
    """
    try:
        formula = _FORMULAS[kind]
    except KeyError:
        raise ParameterError("unknown threshold kind %r; expected one of %s"
                             % (kind, ", ".join(KINDS))) from None
    value, flags = formula(params)
    return ThresholdReport(value=value, formula=kind, inputs=params, validity=flags)


def price_of_sparsity(p, s, d):
    """``log s / log(ds/p)``, the ratio of sparse to dense thresholds."""
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s", minimum=1, maximum=p)
    d = check_int(d, "d", minimum=1, maximum=p)
    if s <= 1:
        raise DomainError("price of sparsity needs s > 1")
    if d * s <= p:
        raise DomainError("price of sparsity needs ds/p > 1, got %r" % (d * s / p))
    return _log_ratio(s, math.log10(d * s / p))


def power_law_gamma(alpha, beta):
    """Price of sparsity for ``s = p**alpha``, ``d = p**beta``: ``alpha / (alpha + beta - 1)``."""
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    beta = check_real(beta, "beta", low=0.0, high=1.0, low_open=True, high_open=True)
    if alpha + beta <= 1.0:
        raise DomainError("power-law price of sparsity needs alpha + beta > 1")
    return alpha / (alpha + beta - 1.0)


def price_of_sparsification(p, alpha, psi, delta):
    """Ratio of the strong-sparsification threshold to the dense one at ``s = alpha p``."""
    params = RegimeParams(p=p, alpha=alpha, psi=psi, delta=delta, regime="sparsified")
    strong = threshold("n_inf_sparsified_strong", params).value
    dense = threshold("n_inf_dense", replace(params, regime="linear")).value
    return strong / dense


def sparsification_budget(p, n, alpha, delta):
    """Smallest density rate ``psi`` the strong-sparsification threshold allows at ``n`` samples."""
    p = check_int(p, "p", minimum=1)
    n = check_real(n, "n", low=0.0, low_open=True)
    if n < p:
        raise DomainError("the sparsification budget needs n >= p (n=%r, p=%d)" % (n, p))
    alpha = check_real(alpha, "alpha", low=0.0, high=1.0, low_open=True, high_open=True)
    delta = check_real(delta, "delta", low=0.0, high=1.0, low_open=True, high_open=True)
    return math.sqrt(2.0 * (2.0 - delta) * entropy(alpha) * p / (delta * n))


def wang_necessary(p, s, d, sigma):
    """Necessary sample size ``(ln C(p,s) - 1) / (0.5 ln(1 + s lambda^2))``.

    Uses ``lambda^2 = (d/p) / sigma^2``, the rescaling that maps the sparse
    Gaussian model onto the sparse ensemble with unit noise.
    """
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s", minimum=0, maximum=p)
    d = check_int(d, "d", minimum=0, maximum=p)
    sigma = check_real(sigma, "sigma", low=0.0, low_open=True)
    snr = s * (d / p) / sigma ** 2
    if not snr > 0.0:
        raise DomainError("wang_necessary needs s * lambda^2 > 0")
    numerator = log_binomial(p, s) - 1.0
    if not numerator > 0.0:
        raise DomainError("log C(p, s) - 1 <= 0: the necessary condition is vacuous")
    return numerator / (0.5 * math.log1p(snr))


@dataclass(frozen=True)
class TradeoffReport:
    n_dense: float
    n_sparse: float
    mult_cost_dense: float
    mult_cost_sparse: float


def tradeoff_report(p, d, alpha):
    """Sample counts and matrix-vector costs of dense vs sparse measurements."""
    p = check_int(p, "p", minimum=1)
    d = check_int(d, "d", minimum=0, maximum=p)
    if d < 2:
        raise DomainError("tradeoff_report needs d >= 2 so that log d > 0")
    params = RegimeParams(p=p, alpha=alpha, d=d, regime="linear")
    n_dense = threshold("n_inf_dense", params).value
    n_sparse = threshold("n_inf_sp_linear", params).value
    return TradeoffReport(n_dense=n_dense, n_sparse=n_sparse,
                          mult_cost_dense=n_dense * p, mult_cost_sparse=n_sparse * d)
