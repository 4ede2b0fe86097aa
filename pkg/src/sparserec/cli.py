"""Command-line interface: ``sparserec <subcommand> [flags]``.

Exit codes: 0 success, 2 parameter or domain error, 3 infeasible
parameters (a threshold denominator is not positive), 4 I/O error.
"""

import argparse
import csv
import io
import json
import math
import sys

from . import bounds, experiments, thresholds
from ._parallel import resolve_jobs
from ._random import derive_seed
from .exceptions import (EnumerationBudgetError, InfeasibleParametersError, SparseRecError,
                         UsageError)
from .estimator import DEFAULT_BUDGET
from .model import dump_instance

EXIT_OK, EXIT_PARAM, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

EXTRA_KINDS = ("price_of_sparsity", "power_law_gamma", "price_of_sparsification",
               "sparsification_budget", "wang_necessary")
BOUND_OPS = ("gaussian_product_mgf", "chernoff_kernel", "chernoff_base_exact",
             "proposition1_bound", "clt_statistic", "c_star", "xi", "h_p_limit",
             "h_p_plugin", "mgf_minus_delta_mc", "mgf_minus_delta_direct",
             "empirical_delta_probability")
ORACLE_CHECKS = ("product", "conditional", "proposition1")


class CliError(Exception):
    def __init__(self, message, code=EXIT_PARAM):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("%s: %s" % (self.prog, message))


def fmt(value):
    """Shortest round-trip decimal text; integral floats print without '.0'."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers, got %r" % text)


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers, got %r" % text)


# flag name -> (type, help)
_FLAGS = {
    "p": (int, "ambient dimension"),
    "s": (int, "support size"),
    "d": (int, "expected non-zeros per design row"),
    "alpha": (float, "sparsity ratio s/p"),
    "psi": (float, "density ratio d/p"),
    "beta": (float, "second power-law exponent"),
    "sigma": (float, "noise standard deviation"),
    "delta": (float, "error level"),
    "n": (int, "sample size"),
    "n-grid": (_int_list, "comma-separated sample sizes"),
    "trials": (int, "Monte Carlo trials"),
    "estimator": (str, "exhaustive or local_search"),
    "setting": (str, "sparse, dense (or sparsified for simulate)"),
    "seed": (int, "master seed (required for stochastic subcommands)"),
    "threads": (int, "worker count; also SPARSEREC_THREADS"),
    "out": (str, "output path (default stdout)"),
    "format": (str, "csv or json"),
    "kind": (str, "threshold kind"),
    "op": (str, "bound operation"),
    "check": (str, "oracle check"),
    "mode": (str, "asymptotic or exact_base"),
    "sigma1": (float, "first standard deviation"),
    "sigma2": (float, "second standard deviation"),
    "rho": (float, "correlation"),
    "m": (int, "binomial trials"),
    "q": (float, "binomial probability"),
    "count": (int, "binomial count"),
    "eta": (float, "fraction M/s of misplaced indices"),
    "theta": (float, "Chernoff parameter (default xi(p))"),
    "M": (int, "size of S* minus S"),
    "sum-a": (int, "mask sum over S* minus S"),
    "sum-b": (int, "mask sum over S minus S*"),
    "sum-c": (int, "mask sum over the intersection"),
    "p-grid": (_int_list, "comma-separated dimensions"),
    "T-grid": (_float_list, "comma-separated tail levels"),
    "budget": (int, "enumeration budget"),
    "restarts": (int, "local-search restarts"),
    "max-sweeps": (int, "local-search sweeps per restart"),
    "dump": (str, "write a binary instance snapshot to this path"),
    "config": (str, "JSON or key=value file with flag values"),
}

_COMMON = ("config", "out", "format")
_SUBCOMMANDS = {
    "thresholds": ("compute a sample-size threshold or ratio",
                   ("kind", "p", "s", "d", "alpha", "psi", "beta", "sigma", "delta", "n")),
    "bounds": ("evaluate a large-deviation quantity",
               ("op", "p", "s", "d", "alpha", "psi", "sigma", "delta", "n", "mode", "sigma1",
                "sigma2", "rho", "m", "q", "count", "eta", "theta", "M", "sum-a", "sum-b",
                "sum-c", "trials", "seed", "threads")),
    "oracle": ("compare a closed form with an independent Monte Carlo oracle",
               ("check", "p", "s", "d", "sigma", "delta", "n", "sigma1", "sigma2", "rho",
                "theta", "M", "trials", "seed", "threads")),
    "simulate": ("run one seeded trial",
                 ("setting", "p", "s", "d", "alpha", "psi", "sigma", "delta", "n", "estimator",
                  "budget",
                  "restarts", "max-sweeps", "seed", "dump")),
    "sweep": ("estimate recovery probability over a grid of n",
              ("setting", "p", "s", "d", "sigma", "delta", "n-grid", "trials", "estimator",
               "budget", "restarts", "max-sweeps", "seed", "threads")),
    "sparsify-sweep": ("sweep with sparsified dense measurements",
                       ("p", "s", "d", "alpha", "psi", "sigma", "delta", "n-grid", "trials",
                        "estimator", "budget", "restarts", "max-sweeps", "seed", "threads")),
    "probe-ui": ("tail expectations of H_p over grids of p and T",
                 ("p-grid", "T-grid", "eta", "alpha", "psi", "sigma", "trials", "seed",
                  "threads")),
}
_DEFAULTS = {"format": "csv", "sigma": 1.0, "delta": 0.5, "estimator": "exhaustive",
             "setting": "sparse", "mode": "exact_base", "budget": DEFAULT_BUDGET,
             "restarts": 10, "max-sweeps": 50}


def _dest(flag):
    return flag.replace("-", "_")


def build_parser():
    parser = _Parser(prog="sparserec", description="Sparse support recovery toolkit.",
                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    sub.required = True
    for name, (help_text, flags) in _SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text, allow_abbrev=False)
        for flag in flags + _COMMON:
            kind, flag_help = _FLAGS[flag]
            default = _DEFAULTS.get(flag)
            if default is not None:
                flag_help = "%s (default %s)" % (flag_help, default)
            sp.add_argument("--" + flag, dest=_dest(flag), type=kind, default=None,
                            help=flag_help)
    return parser


def _read_config(path, allowed):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError("cannot read config %s: %s" % (path, exc.strerror), EXIT_IO)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CliError("config %s: line %d: %s" % (path, exc.lineno, exc.msg))
        items = [(str(k), v, "key %r" % k) for k, v in data.items()]
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError("config %s: line %d: expected key=value" % (path, lineno))
            key, value = (part.strip() for part in line.split("=", 1))
            items.append((key, value, "line %d" % lineno))
    out = {}
    for key, value, where in items:
        flag = key.lstrip("-").replace("_", "-")
        if flag == "t-grid":
            flag = "T-grid"
        if flag not in allowed or flag == "config":
            raise CliError("config %s: %s: unknown parameter %r" % (path, where, key))
        kind = _FLAGS[flag][0]
        try:
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            out[_dest(flag)] = kind(value) if kind is not str else str(value)
        except (ValueError, TypeError, argparse.ArgumentTypeError):
            raise CliError("config %s: %s: invalid value %r for %s" % (path, where, value, key))
    return out


def resolve(args):
    """Merge config-file values under explicit flags, then apply defaults."""
    allowed = _SUBCOMMANDS[args.command][1] + _COMMON
    values = {_dest(f): getattr(args, _dest(f)) for f in allowed}
    if values.get("config"):
        for key, value in _read_config(values["config"], allowed).items():
            if values.get(key) is None:
                values[key] = value
    for flag, default in _DEFAULTS.items():
        if flag in allowed and values.get(_dest(flag)) is None:
            values[_dest(flag)] = default
    return values


def _require(values, *keys):
    for key in keys:
        if values.get(_dest(key)) is None:
            raise CliError("missing required parameter --%s" % key)
    return [values[_dest(k)] for k in keys]


def _echo(values):
    skip = ("config", "out", "format", "threads", "dump")
    return {k: v for k, v in sorted(values.items()) if v is not None and k not in skip}


def _table_text(header, rows, fmt_name, values):
    if fmt_name == "json":
        recs = [dict(zip(header, row)) for row in rows]
        return json.dumps({"config": _echo(values), "rows": recs}, indent=2,
                          allow_nan=False, default=str) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return fmt(value)
    return value


def _emit(text, values):
    out = values.get("out")
    if out:
        try:
            with open(out, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError("cannot write %s: %s" % (out, exc.strerror), EXIT_IO)
    else:
        sys.stdout.write(text)


def _check_format(values):
    if values["format"] not in ("csv", "json"):
        raise CliError("--format must be csv or json, got %r" % values["format"])


# -- subcommands ---------------------------------------------------------------

def _regime_params(values, regime="sublinear"):
    return thresholds.RegimeParams(p=values["p"], s=values.get("s"), alpha=values.get("alpha"),
                                   d=values.get("d"), psi=values.get("psi"),
                                   sigma=values["sigma"], delta=values["delta"], regime=regime)


def cmd_thresholds(values):
    kind, = _require(values, "kind")
    if kind in thresholds.KINDS:
        _require(values, "p")
        regime = "sparsified" if "sparsified" in kind else (
            "linear" if kind.endswith("linear") and "sublinear" not in kind else "sublinear")
        report = thresholds.threshold(kind, _regime_params(values, regime))
        value, flags = report.value, list(report.validity)
    elif kind == "price_of_sparsity":
        value, flags = thresholds.price_of_sparsity(*_require(values, "p", "s", "d")), []
    elif kind == "power_law_gamma":
        value, flags = thresholds.power_law_gamma(*_require(values, "alpha", "beta")), []
    elif kind == "price_of_sparsification":
        value = thresholds.price_of_sparsification(*_require(values, "p", "alpha", "psi"),
                                                   values["delta"])
        flags = []
    elif kind == "sparsification_budget":
        value = thresholds.sparsification_budget(*_require(values, "p", "n", "alpha"),
                                                 values["delta"])
        flags = []
    elif kind == "wang_necessary":
        value = thresholds.wang_necessary(*_require(values, "p", "s", "d"), values["sigma"])
        flags = []
    else:
        raise CliError("unknown --kind %r; expected one of %s"
                       % (kind, ", ".join(thresholds.KINDS + EXTRA_KINDS)))
    if values["format"] == "json":
        text = json.dumps({"config": _echo(values), "value": value, "validity": flags},
                          indent=2) + "\n"
    else:
        text = fmt(value) + "\n"
    _emit(text, values)


def _seed(values):
    seed, = _require(values, "seed")
    if not 0 <= seed < 1 << 64:
        raise CliError("--seed must lie in [0, 2^64)")
    return seed


def _default_theta(values, p, s, d, M):
    if values.get("theta") is not None:
        return values["theta"]
    return bounds.xi(p, M / s, s / p, d / p)


def cmd_bounds(values):
    op, = _require(values, "op")
    jobs = values.get("threads")
    stderr, inf_frac = None, None
    if op == "gaussian_product_mgf":
        params = dict(zip(("sigma1", "sigma2", "rho"), _require(values, "sigma1", "sigma2", "rho")))
        value = bounds.gaussian_product_mgf(**params)
    elif op == "chernoff_kernel":
        theta, p, s, d, M = _require(values, "theta", "p", "s", "d", "M")
        sa, sb, sc = _require(values, "sum-a", "sum-b", "sum-c")
        counts = bounds.BlockCounts(sa, sb, sc, M, s)
        k = bounds.chernoff_kernel(theta, counts, p, d, s, values["sigma"])
        params = {"theta": theta, "p": p, "s": s, "d": d, "M": M, "sum_A": sa, "sum_B": sb,
                  "sum_C": sc, "sigma": values["sigma"], "sigma2_U": k.sigma2_U,
                  "sigma2_V": k.sigma2_V, "cov_UV": k.cov_UV, "rho": k.rho}
        value = k.f_value
    elif op == "chernoff_base_exact":
        m, q = _require(values, "m", "q")
        params = {"m": m, "q": q, "sigma": values["sigma"]}
        value = bounds.chernoff_base_exact(m, q, values["sigma"])
    elif op == "proposition1_bound":
        n, p, s, d = _require(values, "n", "p", "s", "d")
        params = {"n": n, "p": p, "s": s, "d": d, "delta": values["delta"],
                  "sigma": values["sigma"], "mode": values["mode"]}
        value = bounds.proposition1_bound(**params)
    elif op == "clt_statistic":
        count, m, q = _require(values, "count", "m", "q")
        params = {"count": count, "m": m, "q": q}
        value = bounds.clt_statistic(count, m, q)
    elif op == "c_star":
        eta, psi = _require(values, "eta", "psi")
        params = {"eta": eta, "psi": psi}
        value = bounds.c_star(eta, psi)
    elif op == "xi":
        p, eta, alpha, psi = _require(values, "p", "eta", "alpha", "psi")
        params = {"p": p, "eta": eta, "alpha": alpha, "psi": psi}
        value = bounds.xi(p, eta, alpha, psi)
    elif op == "h_p_limit":
        eta, psi = _require(values, "eta", "psi")
        params = {"eta": eta, "psi": psi}
        value = bounds.h_p_limit(eta, psi)
    elif op == "h_p_plugin":
        p, eta, alpha, psi = _require(values, "p", "eta", "alpha", "psi")
        params = {"p": p, "eta": eta, "alpha": alpha, "psi": psi, "sigma": values["sigma"]}
        value = bounds.h_p_plugin(**params)
    elif op in ("mgf_minus_delta_mc", "mgf_minus_delta_direct"):
        p, s, d, M, trials = _require(values, "p", "s", "d", "M", "trials")
        seed = _seed(values)
        theta = _default_theta(values, p, s, d, M)
        params = {"theta": theta, "p": p, "s": s, "d": d, "M": M, "sigma": values["sigma"],
                  "trials": trials, "seed": seed}
        est = getattr(bounds, op)(**params, n_jobs=jobs)
        value, stderr, inf_frac = est.value, est.stderr, est.infinite_fraction
    elif op == "empirical_delta_probability":
        n, p, s, d, trials = _require(values, "n", "p", "s", "d", "trials")
        params = {"n": n, "p": p, "s": s, "d": d, "delta": values["delta"],
                  "sigma": values["sigma"], "trials": trials, "seed": _seed(values)}
        est = bounds.empirical_delta_probability(**params, n_jobs=jobs)
        value, stderr = est.value, est.stderr
    else:
        raise CliError("unknown --op %r; expected one of %s" % (op, ", ".join(BOUND_OPS)))
    header = ["op"] + list(params) + ["value", "stderr", "infinite_fraction"]
    row = [op] + list(params.values()) + [value, stderr, inf_frac]
    if values["format"] == "json":
        row = [_json_safe(v) for v in row]
    _emit(_table_text(header, [row], values["format"], values), values)


def cmd_oracle(values):
    check, = _require(values, "check")
    seed = _seed(values)
    jobs = values.get("threads")
    trials = values.get("trials") or 100000
    if check == "product":
        s1, s2, rho = _require(values, "sigma1", "sigma2", "rho")
        closed = bounds.gaussian_product_mgf(s1, s2, rho)
        est = bounds.gaussian_product_mgf_mc(s1, s2, rho, trials, seed=seed, n_jobs=jobs)
        rows = [["closed_form", closed, None], ["monte_carlo", est.value, est.stderr]]
        z = (est.value - closed) / est.stderr if math.isfinite(closed) else math.nan
    elif check == "conditional":
        p, s, d, M = _require(values, "p", "s", "d", "M")
        theta = _default_theta(values, p, s, d, M)
        a = bounds.mgf_minus_delta_mc(theta, p, s, d, M, values["sigma"], trials,
                                      seed=derive_seed(seed, 0), n_jobs=jobs)
        b = bounds.mgf_minus_delta_direct(theta, p, s, d, M, values["sigma"], trials,
                                          seed=derive_seed(seed, 1), n_jobs=jobs)
        rows = [["kernel_average", a.value, a.stderr], ["direct", b.value, b.stderr]]
        z = (a.value - b.value) / math.hypot(a.stderr, b.stderr)
    elif check == "proposition1":
        n, p, s, d = _require(values, "n", "p", "s", "d")
        bound = bounds.proposition1_bound(n, p, s, d, values["delta"], values["sigma"])
        est = bounds.empirical_delta_probability(n, p, s, d, values["delta"], values["sigma"],
                                                 trials, seed=seed, n_jobs=jobs)
        rows = [["exact_base_bound", bound, None], ["empirical", est.value, est.stderr]]
        z = (est.value - bound) / est.stderr if est.stderr > 0 else math.nan
    else:
        raise CliError("unknown --check %r; expected one of %s"
                       % (check, ", ".join(ORACLE_CHECKS)))
    rows.append(["z_score", z, None])
    if values["format"] == "json":
        rows = [[_json_safe(v) for v in r] for r in rows]
    _emit(_table_text(["quantity", "value", "stderr"], rows, values["format"], values), values)


def _experiment_config(values, setting):
    p, grid, trials = _require(values, "p", "n-grid", "trials")
    seed = _seed(values)
    if setting == "sparsified":
        params = thresholds.RegimeParams(p=p, s=values.get("s"), alpha=values.get("alpha"),
                                         d=values.get("d"), psi=values.get("psi"),
                                         sigma=values["sigma"], delta=values["delta"],
                                         regime="sparsified")
    else:
        _require(values, "s")
        if setting == "sparse":
            _require(values, "d")
        params = _regime_params(values)
    return experiments.ExperimentConfig(
        setting=setting, params=params, n_grid=tuple(grid), trials_per_n=trials,
        delta=values["delta"], estimator=values["estimator"], master_seed=seed,
        enumeration_budget=values["budget"], restarts=values["restarts"],
        max_sweeps=values["max_sweeps"])


def _run_sweep(values, setting):
    config = _experiment_config(values, setting)
    summary = experiments.sweep(config, n_jobs=resolve_jobs(values.get("threads")))
    _emit(experiments.dumps(summary, values["format"]), values)


def cmd_sweep(values):
    if values["setting"] not in ("sparse", "dense"):
        raise CliError("--setting must be sparse or dense (use sparsify-sweep otherwise)")
    _run_sweep(values, values["setting"])


def cmd_sparsify_sweep(values):
    _run_sweep(values, "sparsified")


def cmd_simulate(values):
    setting = values["setting"]
    if setting not in experiments.SETTINGS:
        raise CliError("--setting must be one of %s" % ", ".join(experiments.SETTINGS))
    n, = _require(values, "n")
    values = dict(values, n_grid=[n], trials=1)
    config = _experiment_config(values, setting)
    record = experiments.run_trial(config, n, 0)
    if values.get("dump"):
        inst, _, _ = experiments.trial_instance(config, n, 0)
        try:
            dump_instance(inst, values["dump"])
        except OSError as exc:
            raise CliError("cannot write %s: %s" % (values["dump"], exc.strerror), EXIT_IO)
    data = {"config": config.to_dict(), "success_criterion": experiments.SUCCESS_CRITERION,
            "n": record.n, "seed": record.seed, "symdiff": record.symdiff,
            "success": record.success, "loss_star": record.loss_star,
            "loss_hat": record.loss_hat, "support_hat": list(record.support_hat)}
    if values["format"] == "json":
        text = json.dumps(data, indent=2) + "\n"
    else:
        keys = ["n", "seed", "symdiff", "success", "loss_star", "loss_hat"]
        text = _table_text(keys + ["support_hat"],
                           [[data[k] for k in keys] + [" ".join(map(str, data["support_hat"]))]],
                           "csv", values)
    _emit(text, values)


def cmd_probe_ui(values):
    p_grid, t_grid, eta, alpha, psi, trials = _require(values, "p-grid", "T-grid", "eta",
                                                       "alpha", "psi", "trials")
    rows = bounds.ui_probe(p_grid, t_grid, eta, alpha, psi, trials, seed=_seed(values),
                           sigma=values["sigma"], n_jobs=values.get("threads"))
    table = [[r.p, r.T, r.estimate, r.stderr, r.infinite_fraction] for r in rows]
    if values["format"] == "json":
        table = [[_json_safe(v) for v in r] for r in table]
    _emit(_table_text(["p", "T", "estimate", "stderr", "infinite_fraction"], table,
                      values["format"], values), values)


_COMMANDS = {
    "thresholds": cmd_thresholds,
    "bounds": cmd_bounds,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "sparsify-sweep": cmd_sparsify_sweep,
    "probe-ui": cmd_probe_ui,
}


def main(argv=None):
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        values = resolve(args)
        _check_format(values)
        _COMMANDS[args.command](values)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.code
    except InfeasibleParametersError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SparseRecError, UsageError, EnumerationBudgetError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
