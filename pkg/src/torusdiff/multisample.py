"""k-group likelihood and linear-hypothesis likelihood ratio tests.

Group ``j`` has its own parameter ``xi_j`` of a common family; stacking
them gives ``xi`` of length ``k q``.  A linear hypothesis restricts
``xi = M a`` for a free vector ``a`` of dimension ``q_tilde``, and the
statistic ``-2 log Q`` is compared with a chi-square on ``k q - q_tilde``
degrees of freedom.  Homogeneity presets tie chosen coordinates across
groups by reusing one column of ``M`` for all of them.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .diffusion import PathSample
from .exceptions import ConvergenceError, DomainError
from .inference import (
    KERNELS, ParamVector, TestResult, Transitions, _run, as_paths, fit_mle, from_unconstrained,
    get_family, infeasible, lr_statistic, to_unconstrained, transition_terms, unconstrained_jacobian,
)
from .special import TWO_PI

PRESETS = ("means", "concentrations", "volatilities", "concs_and_volas", "stationary_distrs", "diffusions")


class GroupedSample:
    """k groups of circular paths; all replicates of a group share one spacing."""

    def __init__(self, groups, labels=None):
        groups = [as_paths(g) for g in groups]
        if not groups or any(len(g) == 0 for g in groups):
            raise DomainError("need at least one non-empty group")
        for g in groups:
            if len({p.delta for p in g}) != 1:
                raise DomainError("replicates within a group must share delta")
        self.groups = groups
        self.labels = list(labels) if labels is not None else [f"group{j + 1}" for j in range(len(groups))]
        if len(self.labels) != len(groups):
            raise DomainError("one label per group")
        self.transitions = [Transitions.from_data(g) for g in groups]

    @property
    def k(self):
        return len(self.groups)

    @property
    def sizes(self):
        return [len(g) for g in self.groups]


def _tied_names(family, preset):
    kinds = dict(zip(family.names, family.kinds))
    beta = list(family.beta_names)
    angles = [n for n in beta if kinds[n] == "angle"]
    shapes = [n for n in beta if kinds[n] in ("positive", "unit")]
    table = {
        "means": angles,
        "concentrations": shapes,
        "volatilities": ["sigma"],
        "concs_and_volas": shapes + ["sigma"],
        "stationary_distrs": beta,
        "diffusions": beta + ["sigma"],
    }
    if preset not in table:
        raise DomainError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if not table[preset]:
        raise DomainError(f"preset {preset!r} ties nothing for family {family.name}")
    return table[preset]


def preset_matrix(family, k, preset=None, tied=None):
    """Restriction matrix tying ``tied`` coordinates (or a preset) across k groups.

    Columns are created group by group in parameter order; a tied
    coordinate of group ``j > 1`` reuses the column of group 1.
    """
    family = get_family(family)
    names = family.names
    tied = set(_tied_names(family, preset) if tied is None else tied)
    for n in tied:
        family.index(n)
    rows = k * len(names)
    cols, first, nxt = [], {}, 0
    for _ in range(k):
        for n in names:
            if n in first:
                cols.append(first[n])
                continue
            if n in tied:
                first[n] = nxt
            cols.append(nxt)
            nxt += 1
    M = np.zeros((rows, max(cols) + 1))
    M[np.arange(rows), cols] = 1.0
    return M


class LinearHypothesis:
    """``H0: xi = M a`` with ``M`` of full column rank ``q_tilde < k q``."""

    def __init__(self, matrix, offset=None, preset=None):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if not np.all(np.isfinite(M)):
            raise DomainError("restriction matrix must be finite")
        rank = np.linalg.matrix_rank(M)
        if rank != M.shape[1]:
            raise DomainError("restriction matrix must have full column rank")
        if M.shape[1] >= M.shape[0]:
            raise DomainError("the hypothesis must remove at least one dimension")
        self.matrix = M
        self.offset = np.zeros(M.shape[0]) if offset is None else np.asarray(offset, dtype=float)
        self.preset = preset

    @classmethod
    def from_preset(cls, preset, family, k):
        return cls(preset_matrix(family, k, preset), preset=preset)

    @property
    def free_dimension(self):
        return self.matrix.shape[1]

    def df(self):
        return self.matrix.shape[0] - self.matrix.shape[1]

    def column_kinds(self, family):
        kinds = np.array(family.kinds * (self.matrix.shape[0] // family.q))
        out = []
        for c in range(self.matrix.shape[1]):
            used = set(kinds[self.matrix[:, c] != 0])
            pure = np.all(self.matrix[:, c][self.matrix[:, c] != 0] > 0) and not self.offset.any()
            out.append(used.pop() if len(used) == 1 and pure else "real")
        return tuple(out)

    def to_dict(self):
        return {"preset": self.preset, "matrix": self.matrix.tolist(), "offset": self.offset.tolist()}


@dataclass(frozen=True)
class GroupedFit:
    """Joint fit of k groups: per-group parameters and the total log-likelihood."""

    estimates: list
    loglik: float
    free: np.ndarray
    iterations: int
    grad_norm: float
    converged: bool
    group_fits: list = field(default_factory=list)

    @property
    def xi(self):
        return np.concatenate([e.values for e in self.estimates])

    def to_dict(self):
        return {
            "loglik": self.loglik,
            "groups": [e.as_dict() for e in self.estimates],
            "free": [float(v) for v in self.free],
            "diagnostics": {"iterations": self.iterations, "grad_norm": self.grad_norm,
                            "converged": self.converged},
        }


def grouped_log_likelihood(family, xi_per_group, data, kernel="diffusion"):
    """Sum over groups and replicates of the one-sample log-likelihoods."""
    family = get_family(family)
    if not isinstance(data, GroupedSample):
        data = GroupedSample(data)
    xs = np.asarray(xi_per_group, dtype=float).reshape(data.k, family.q)
    return float(sum(transition_terms(family, x, t, kernel, score=False)[0].sum()
                     for x, t in zip(xs, data.transitions)))


def fit_groups(family, data, kernel="diffusion", random_state=None):
    """Unrestricted fit: independent per-group MLEs."""
    family = get_family(family)
    fits = [fit_mle(family, t, kernel=kernel, random_state=random_state) for t in data.transitions]
    est = [f.estimate for f in fits]
    return GroupedFit(est, float(sum(f.loglik for f in fits)), np.concatenate([e.values for e in est]),
                      int(sum(f.iterations for f in fits)), float(max(f.grad_norm for f in fits)), True, fits)


def _start(hyp, xi_hat, col_kinds):
    M = hyp.matrix
    a0 = np.linalg.pinv(M) @ (xi_hat - hyp.offset)
    for c, kind in enumerate(col_kinds):
        rows = np.flatnonzero(M[:, c])
        if kind == "angle":
            w = M[rows, c]
            a0[c] = math.atan2(np.sum(np.sin(xi_hat[rows] / w)), np.sum(np.cos(xi_hat[rows] / w))) % TWO_PI
        elif kind == "positive":
            a0[c] = math.exp(np.mean(np.log(xi_hat[rows] / M[rows, c])))
        elif kind == "unit":
            a0[c] = min(max(a0[c], 1e-3), 1 - 1e-3)
    return a0


def fit_restricted(family, data, hypothesis, kernel="diffusion", init=None, maxiter=500):
    """Maximize the grouped likelihood over ``xi = M a + c``."""
    family = get_family(family)
    M, c = hypothesis.matrix, hypothesis.offset
    k, q = data.k, family.q
    if M.shape[0] != k * q:
        raise DomainError(f"restriction matrix needs {k * q} rows for {k} groups of {family.name}")
    col_kinds = hypothesis.column_kinds(family)
    n = sum(t.n for t in data.transitions)
    if init is None:
        init = fit_groups(family, data, kernel).xi
    a0 = _start(hypothesis, np.asarray(init, dtype=float), col_kinds)

    def fun(z):
        if infeasible(z, col_kinds):
            return np.inf, np.zeros_like(z)
        a = from_unconstrained(z, col_kinds)
        xi = M @ a + c
        total, grad = 0.0, np.zeros(k * q)
        try:
            for j, t in enumerate(data.transitions):
                ll, sc = transition_terms(family, xi[j * q:(j + 1) * q], t, kernel)
                total += ll.sum()
                grad[j * q:(j + 1) * q] = sc.sum(axis=0)
        except (ValueError, FloatingPointError, OverflowError):
            return np.inf, np.zeros_like(z)
        g = (M.T @ grad) * unconstrained_jacobian(a, col_kinds)
        if not np.isfinite(total) or not np.all(np.isfinite(g)):
            return np.inf, np.zeros_like(z)
        return -total / n, -g / n

    z, val, g, res = _run(fun, to_unconstrained(a0, col_kinds), maxiter, n)
    gnorm = float(np.max(np.abs(g))) * n
    a = from_unconstrained(z, col_kinds)
    xi = M @ a + c
    if not (np.isfinite(val) and gnorm < 1e-4 * max(1.0, math.sqrt(n))):
        raise ConvergenceError("restricted grouped optimization did not converge",
                               {"best": xi.tolist(), "grad_norm": gnorm, "iterations": int(res.nit)})
    est = [ParamVector(family, xi[j * q:(j + 1) * q]) for j in range(k)]
    return GroupedFit(est, float(-val * n), a, int(res.nit), gnorm, True)


def lr_test_linear(family, data, hypothesis, kernel="diffusion", random_state=None, unrestricted=None):
    """Likelihood ratio test of a linear hypothesis across k groups.

    ``hypothesis`` is a :class:`LinearHypothesis`, a preset name, or a
    restriction matrix.  A precomputed :func:`fit_groups` result can be
    passed as ``unrestricted`` to share it between several hypotheses.
    """
    family = get_family(family)
    if kernel not in KERNELS:
        raise DomainError(f"kernel must be one of {KERNELS}")
    if not isinstance(data, GroupedSample):
        data = GroupedSample(data)
    if isinstance(hypothesis, str):
        hypothesis = LinearHypothesis.from_preset(hypothesis, family, data.k)
    elif not isinstance(hypothesis, LinearHypothesis):
        hypothesis = LinearHypothesis(hypothesis)
    if unrestricted is None:
        unrestricted = fit_groups(family, data, kernel, random_state)
    restricted = fit_restricted(family, data, hypothesis, kernel, init=unrestricted.xi)
    stat = lr_statistic(unrestricted.loglik, restricted.loglik)
    df = hypothesis.df()
    return TestResult(stat, df, float(stats.chi2.sf(stat, df)), restricted, unrestricted, False,
                      {"family": family.name, "kernel": kernel, "k": data.k, **hypothesis.to_dict()})


def split_paths(paths, split_time):
    """Cut every path at ``split_time``; returns (pre, post) path lists."""
    pre, post = [], []
    for p in as_paths(paths):
        s = split_time / p.delta
        idx = int(round(s))
        if abs(s - idx) > 1e-9 * max(1.0, s):
            raise DomainError("split time is not on the observation grid")
        if not 0 < idx < p.n:
            raise DomainError("split time must lie strictly inside the observation window")
        pre.append(PathSample(p.delta, p.angles[: idx + 1]))
        post.append(PathSample(p.delta, p.angles[idx:]))
    return pre, post


def change_point_test(family, paths, split_time, kernel="diffusion", random_state=None):
    """Test ``H0: xi^(1) = xi^(2)`` for a change at ``split_time`` (df = q)."""
    family = get_family(family)
    pre, post = split_paths(paths, split_time)
    data = GroupedSample([pre, post], labels=["before", "after"])
    res = lr_test_linear(family, data, "diffusions", kernel, random_state)
    res.hypothesis["split_time"] = float(split_time)
    return res
