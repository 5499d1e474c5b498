"""Seeded Monte Carlo harnesses for calibration and power studies.

Every replicate draws from its own generator ``replicate_rng(base_seed,
...)``, so a report depends only on the configuration and never on the
execution order or on the number of worker processes.  Reports carry the
raw per-replicate statistics next to the summary tables.
"""

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
import pandas as pd
from scipy import stats

from ._seeding import replicate_rng
from .diffusion import DiffusionModel, PathSample, simulate_paths
from .exceptions import ConvergenceError, DomainError
from .inference import (
    ParamVector, Transitions, fit_mle, get_family, lr_test, transition_terms,
)
from .jump import JumpModel, simulate_jump_paths
from .multisample import PRESETS, GroupedSample, fit_groups, lr_test_linear
from .special import TWO_PI

EXPERIMENTS = ("normality_diag", "chisq_calibration", "rejection_rates", "homogeneity_table")
MAX_FAILURE_FRACTION = 0.05
SANITY_ALPHA = 0.5


@dataclass
class ExperimentConfig:
    """Description of one Monte Carlo experiment.

    ``family``/``xi`` give the model fitted to every replicate and, unless
    ``dgp_family``/``dgp_xi`` are set, also the data generating process.
    For ``homogeneity_table`` the second group is generated from ``xi``
    shifted by ``a * shift[name]`` for every ``a`` in ``a_values``.
    """

    experiment: str
    family: str = "von_mises"
    xi: list = field(default_factory=lambda: [0.0, 1.0, 1.0 / TWO_PI])
    dgp_family: str = None
    dgp_xi: list = None
    null: dict = field(default_factory=lambda: {"mu": 0.0, "kappa": 1.0})
    kernel: str = "diffusion"
    M: int = 500
    n: int = 200
    delta: float = 0.5
    paths: int = 1
    alphas: list = field(default_factory=lambda: [0.10, 0.05, 0.01])
    base_seed: int = 0
    group_sizes: list = field(default_factory=lambda: [[3, 2], [10, 5]])
    a_values: list = field(default_factory=lambda: [0, 1, 2, 3, 4, 5])
    shift: dict = field(default_factory=lambda: {"kappa": 0.1})
    presets: list = field(default_factory=lambda: list(PRESETS))
    table_alpha: float = 0.05
    n_jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise DomainError(f"experiment must be one of {EXPERIMENTS}")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError("M must be a positive integer")
        if int(self.n) != self.n or self.n < 1 or int(self.paths) != self.paths or self.paths < 1:
            raise DomainError("n and paths must be positive integers")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        alphas = list(self.alphas) + [self.table_alpha]
        if not all(0 < a < 1 for a in alphas):
            raise DomainError("significance levels must lie in (0, 1)")
        if self.kernel not in ("diffusion", "jump"):
            raise DomainError("kernel must be 'diffusion' or 'jump'")
        fam = get_family(self.family)
        fam.validate(np.asarray(self.xi, dtype=float))
        dgp = get_family(self.dgp_family or self.family)
        dgp.validate(np.asarray(self.dgp_xi if self.dgp_xi is not None else self.xi, dtype=float))
        for name in self.null:
            fam.index(name)
        for g in self.group_sizes:
            if len(g) < 2 or any(int(v) != v or v < 1 for v in g):
                raise DomainError("group sizes must list at least two positive integers")
        for p in self.presets:
            if p not in PRESETS:
                raise DomainError(f"unknown preset {p!r}")
        for name in self.shift:
            fam.index(name)
        if int(self.n_jobs) != self.n_jobs or self.n_jobs < 1:
            raise DomainError("n_jobs must be a positive integer")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, source):
        """Load from a JSON file path or a JSON string."""
        if isinstance(source, str) and source.lstrip().startswith("{"):
            return cls.from_dict(json.loads(source))
        with open(source) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ExperimentReport:
    """Result of a harness run.

    ``table`` is the summary, ``samples`` the per-replicate records and
    ``summary`` any scalar diagnostics (KS tests, correlation matrix, ...).
    """

    experiment: str
    config: dict
    table: pd.DataFrame
    samples: pd.DataFrame
    summary: dict
    failures: list

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "config": self.config,
            "summary": self.summary,
            "failures": self.failures,
            "table": json.loads(self.table.to_json(orient="records", double_precision=15)),
        }

    def write(self, out_dir, fmt="csv"):
        """Write the report files into ``out_dir``; returns the paths written."""
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.join(out_dir, self.experiment)
        written = []
        if fmt == "csv":
            self.table.to_csv(stem + "_table.csv", index=False)
            self.samples.to_csv(stem + "_samples.csv", index=False)
            written += [stem + "_table.csv", stem + "_samples.csv"]
        elif fmt != "json":
            raise DomainError("format must be 'csv' or 'json'")
        with open(stem + ".json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        written.append(stem + ".json")
        return written


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# ---------------------------------------------------------------------------
# simulation


def simulate_dataset(family, xi, n, delta, random_state, paths=1, kernel="diffusion"):
    """``paths`` exact paths of length ``n`` started from the stationary law."""
    family = get_family(family)
    pv = ParamVector(family, xi)
    dens = pv.density()
    theta0 = dens.rvs(size=paths, random_state=random_state)
    if kernel == "diffusion":
        arr = simulate_paths(DiffusionModel(dens, pv.sigma), theta0[:, None], n, delta, random_state, paths)[..., 0]
    else:
        arr = simulate_jump_paths(JumpModel(dens, pv.sigma), theta0, n, delta, random_state, paths)
    return [PathSample(delta, a) for a in arr]


def _dgp(cfg):
    return cfg.dgp_family or cfg.family, cfg.dgp_xi if cfg.dgp_xi is not None else cfg.xi


def _map(fn, items, n_jobs, progress=None):
    items = list(items)
    if n_jobs == 1:
        out = []
        for i, x in enumerate(items):
            out.append(fn(x))
            if progress:
                progress(i + 1, len(items))
        return out
    out = []
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        for i, r in enumerate(pool.map(fn, items, chunksize=max(1, len(items) // (8 * n_jobs)))):
            out.append(r)
            if progress:
                progress(i + 1, len(items))
    return out


def _check_failures(failures, attempted, what):
    if attempted and len(failures) > MAX_FAILURE_FRACTION * attempted:
        raise ConvergenceError(
            f"{len(failures)} of {attempted} {what} failed (more than {MAX_FAILURE_FRACTION:.0%})",
            {"failures": failures[:50], "attempted": attempted},
        )


def binomial_se(rate, m):
    return math.sqrt(rate * (1.0 - rate) / m) if m else float("nan")


# ---------------------------------------------------------------------------
# one-sample null distribution of -2 log Q


def _null_replicate(cfg, i):
    rng = replicate_rng(cfg.base_seed, i)
    fam, xi = _dgp(cfg)
    data = simulate_dataset(fam, xi, cfg.n, cfg.delta, rng, cfg.paths, cfg.kernel)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = lr_test(cfg.family, data, cfg.null, cfg.kernel, random_state=rng)
    except (ConvergenceError, DomainError) as exc:
        return {"replicate": i, "statistic": np.nan, "p_value": np.nan, "df": 0, "error": str(exc)}
    return {"replicate": i, "statistic": res.statistic, "p_value": res.p_value, "df": res.df, "error": ""}


def null_statistics(config, progress=None):
    """Per-replicate ``-2 log Q`` and p-values under the configured null."""
    rows = _map(partial(_null_replicate, config), range(config.M), config.n_jobs, progress)
    samples = pd.DataFrame(rows, columns=["replicate", "statistic", "p_value", "df", "error"])
    failures = [{"replicate": int(r.replicate), "error": r.error} for r in samples.itertuples() if r.error]
    _check_failures(failures, config.M, "likelihood ratio tests")
    return samples, failures


def rejection_table(p_values, alphas):
    """Rejection frequency and binomial SE for each level (plus the 0.5 sanity row)."""
    p = np.asarray(p_values, dtype=float)
    p = p[np.isfinite(p)]
    levels = list(alphas) + ([SANITY_ALPHA] if SANITY_ALPHA not in alphas else [])
    rows = []
    for a in levels:
        rate = float(np.mean(p < a)) if p.size else float("nan")
        rows.append({"alpha": float(a), "rate": rate, "se": binomial_se(rate, p.size), "fits": int(p.size),
                     "sanity": a == SANITY_ALPHA})
    return pd.DataFrame(rows)


def chisq_ks(statistics, df):
    """KS test of ``-2 log Q`` samples against the chi-square reference."""
    s = np.asarray(statistics, dtype=float)
    s = s[np.isfinite(s)]
    res = stats.kstest(s, stats.chi2(df).cdf)
    return {"ks_statistic": float(res.statistic), "ks_p_value": float(res.pvalue), "df": int(df), "size": int(s.size)}


def run_rejection_rates(config, progress=None):
    """Empirical rejection rates of the one-sample LRT at each level."""
    samples, failures = null_statistics(config, progress)
    table = rejection_table(samples["p_value"], config.alphas)
    summary = {"attempted": config.M, "failed": len(failures)}
    return ExperimentReport("rejection_rates", config.to_dict(), table, samples, summary, failures)


def run_chisq_calibration(config, progress=None):
    """KS comparison of the null ``-2 log Q`` distribution with its chi-square limit."""
    samples, failures = null_statistics(config, progress)
    ok = samples[samples["error"] == ""]
    df = int(ok["df"].iloc[0]) if len(ok) else 0
    summary = {"attempted": config.M, "failed": len(failures), **chisq_ks(ok["statistic"], df)}
    probs = np.array([0.5, 0.9, 0.95, 0.99])
    table = pd.DataFrame({
        "probability": probs,
        "empirical_quantile": np.quantile(ok["statistic"], probs) if len(ok) else np.nan,
        "chisq_quantile": stats.chi2.ppf(probs, df) if df else np.nan,
    })
    return ExperimentReport("chisq_calibration", config.to_dict(), table, samples, summary, failures)


# ---------------------------------------------------------------------------
# asymptotic normality of the MLE


def _normality_replicate(cfg, i):
    rng = replicate_rng(cfg.base_seed, i)
    fam, xi = _dgp(cfg)
    data = simulate_dataset(fam, xi, cfg.n, cfg.delta, rng, cfg.paths, cfg.kernel)
    trans = Transitions.from_data(data)
    _, sc = transition_terms(cfg.family, np.asarray(cfg.xi, float), trans, cfg.kernel)
    outer = sc.T @ sc / sc.shape[0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_mle(cfg.family, trans, kernel=cfg.kernel, random_state=rng)
    except (ConvergenceError, DomainError) as exc:
        return i, None, outer, str(exc)
    return i, fit.xi, outer, ""


def _sym_sqrt(a):
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def run_normality_diagnostic(config, progress=None):
    """Standardized MLE errors ``z = sqrt(n) I^{1/2} (xi_hat - xi_0)``.

    ``I`` is the Monte Carlo average of the per-transition score outer
    products at ``xi_0`` over the same replicates.  Angle errors are
    wrapped to (-pi, pi].  With ``M = 1`` only the z row is reported.
    """
    family = get_family(config.family)
    xi0 = np.asarray(config.xi, dtype=float)
    rows = _map(partial(_normality_replicate, config), range(config.M), config.n_jobs, progress)
    failures = [{"replicate": i, "error": e} for i, _, _, e in rows if e]
    _check_failures(failures, config.M, "fits")
    info = np.mean([o for _, _, o, _ in rows], axis=0)
    root = _sym_sqrt(info)
    n = config.n * config.paths
    ok = [(i, x) for i, x, _, e in rows if not e]
    err = np.array([x - xi0 for _, x in ok]).reshape(len(ok), family.q)
    for j, kind in enumerate(family.kinds):
        if kind == "angle":
            err[:, j] = np.mod(err[:, j] + np.pi, TWO_PI) - np.pi
    z = math.sqrt(n) * err @ root.T
    samples = pd.DataFrame(z, columns=[f"z_{name}" for name in family.names])
    samples.insert(0, "replicate", [i for i, _ in ok])
    table_rows = []
    for j, name in enumerate(family.names):
        col = z[:, j]
        ks = stats.kstest(col, "norm") if col.size > 1 else None
        table_rows.append({
            "parameter": name,
            "mean": float(col.mean()) if col.size else np.nan,
            "sd": float(col.std(ddof=1)) if col.size > 1 else np.nan,
            "ks_statistic": float(ks.statistic) if ks else np.nan,
            "ks_p_value": float(ks.pvalue) if ks else np.nan,
        })
    corr = np.corrcoef(z, rowvar=False).tolist() if z.shape[0] > 2 else None
    summary = {"attempted": config.M, "failed": len(failures), "information": info.tolist(),
               "correlation": corr, "names": list(family.names)}
    return ExperimentReport("normality_diag", config.to_dict(), pd.DataFrame(table_rows), samples, summary,
                            failures)


# ---------------------------------------------------------------------------
# k-group homogeneity presets


def _group_xi(cfg, family, a):
    xi = np.array(cfg.xi, dtype=float)
    for name, step in cfg.shift.items():
        xi[family.index(name)] += a * step
    return xi


def _homogeneity_replicate(cfg, job):
    s, a, i = job
    family = get_family(cfg.family)
    sizes = cfg.group_sizes[s]
    rng = replicate_rng(cfg.base_seed, i, s, a)
    groups = [simulate_dataset(family, cfg.xi, cfg.n, cfg.delta, rng, sizes[0], cfg.kernel)]
    xi2 = _group_xi(cfg, family, a)
    groups += [simulate_dataset(family, xi2, cfg.n, cfg.delta, rng, m, cfg.kernel) for m in sizes[1:]]
    data = GroupedSample(groups)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            unrestricted = fit_groups(family, data, cfg.kernel, rng)
        except (ConvergenceError, DomainError) as exc:
            return [(s, a, i, p, np.nan, np.nan, str(exc)) for p in cfg.presets]
        for preset in cfg.presets:
            try:
                res = lr_test_linear(family, data, preset, cfg.kernel, unrestricted=unrestricted)
                out.append((s, a, i, preset, res.statistic, res.p_value, ""))
            except (ConvergenceError, DomainError) as exc:
                out.append((s, a, i, preset, np.nan, np.nan, str(exc)))
    return out


def _setting_label(sizes):
    return "(" + ",".join(str(int(v)) for v in sizes) + ")"


def run_homogeneity_table(config, progress=None):
    """Rejection percentages of the homogeneity presets.

    The table has one row per (group sizes, preset) and one column per
    shift ``a``, holding the percentage of rejections at ``table_alpha``;
    matching ``se_a`` columns give the binomial standard errors in
    percentage points.  All presets are tested on the same datasets.
    """
    jobs = [(s, a, i) for s in range(len(config.group_sizes)) for a in config.a_values for i in range(config.M)]
    chunks = _map(partial(_homogeneity_replicate, config), jobs, config.n_jobs, progress)
    samples = pd.DataFrame([r for c in chunks for r in c],
                           columns=["setting", "a", "replicate", "preset", "statistic", "p_value", "error"])
    samples["setting"] = [_setting_label(config.group_sizes[s]) for s in samples["setting"]]
    failures = [{"setting": r.setting, "a": r.a, "replicate": int(r.replicate), "preset": r.preset,
                 "error": r.error} for r in samples.itertuples() if r.error]
    _check_failures(failures, len(samples), "grouped tests")
    rows = []
    for sizes in config.group_sizes:
        label = _setting_label(sizes)
        for preset in config.presets:
            row = {"setting": label, "preset": preset}
            for a in config.a_values:
                sel = samples[(samples.setting == label) & (samples.preset == preset) & (samples.a == a)]
                p = sel["p_value"].to_numpy()
                p = p[np.isfinite(p)]
                rate = float(np.mean(p < config.table_alpha)) if p.size else np.nan
                row[f"a={a}"] = 100.0 * rate
                row[f"se_a={a}"] = 100.0 * binomial_se(rate, p.size)
            rows.append(row)
    table = pd.DataFrame(rows)
    summary = {"attempted": len(samples), "failed": len(failures), "alpha": config.table_alpha}
    return ExperimentReport("homogeneity_table", config.to_dict(), table, samples, summary, failures)


RUNNERS = {
    "normality_diag": run_normality_diagnostic,
    "chisq_calibration": run_chisq_calibration,
    "rejection_rates": run_rejection_rates,
    "homogeneity_table": run_homogeneity_table,
}


def run_experiment(config, progress=None):
    """Dispatch on ``config.experiment``."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(dict(config))
    return RUNNERS[config.experiment](config, progress)
