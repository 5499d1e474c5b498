"""Acceptance criteria.

Every test prints one ``CRITERION k: PASS|FAIL`` line (collected again in the
terminal summary) and then asserts the same verdict.  Tolerances are the
contractual ones; seeds are fixed so the verdicts are reproducible.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from torusdiff.bridge import BridgeSpec, bridge_marginal_density, sample_bridges
from torusdiff.circular import Uniform, VonMises, VonMisesMixture, WrappedCauchy
from torusdiff.diffusion import DiffusionModel, simulate_euler, simulate_paths, transition_density
from torusdiff.experiments import (
    ExperimentConfig, chisq_ks, run_homogeneity_table, run_rejection_rates, simulate_dataset,
)
from torusdiff.inference import get_family, log_likelihood, score, transition_terms
from torusdiff.jump import (
    JumpModel, bridge_bound, jump_transition_density, sample_auxiliary, sample_jump_bridge, simulate_jump_paths,
)
from torusdiff.special import TWO_PI
from torusdiff.toroidal import BivariateVonMises, ProductDensity, ToroidalMixture, UniformTorus, blended

pytestmark = pytest.mark.slow

LEVELS = (0.10, 0.05, 0.01)
NULL_RATES = (0.1014, 0.0502, 0.0105)
BOUNDARY_RATES = (0.0929, 0.0461, 0.0100)
RATE_TOL = 0.02


def circle_models():
    return {
        "uniform": Uniform(),
        "von_mises": VonMises(1.0, 2.0),
        "wrapped_cauchy": WrappedCauchy(4.0, 0.4),
        "vm_mixture": VonMisesMixture([0.3, 0.7], [0.5, 3.5], [4.0, 1.5]),
    }


def torus_models():
    return {
        "bvm": BivariateVonMises(0.5, 4.0, 1.5, 2.0, 1.2),
        "bvm_mixture": ToroidalMixture([0.4, 0.6], [BivariateVonMises(0.5, 1.0, 2.0, 1.0, 0.8),
                                                    BivariateVonMises(3.5, 4.0, 1.0, 3.0, -1.0)]),
    }


def torus_zoo():
    return {"uniform": UniformTorus(),
            "product": ProductDensity([VonMises(1.0, 2.0), WrappedCauchy(3.0, 0.3)]),
            "blended": blended(BivariateVonMises(1.0, 2.0, 6.0, 6.0, 2.0), 0.1),
            **torus_models()}


def quad_circle(fn, points=()):
    val, _ = integrate.quad(fn, 0, TWO_PI, points=list(points), limit=400, epsabs=1e-14, epsrel=1e-13)
    return val


def torus_grid(m=256):
    # periodic midpoint rule: spectrally accurate for smooth periodic integrands
    g = (np.arange(m) + 0.5) * TWO_PI / m
    xx, yy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()]), (TWO_PI / m) ** 2


def trapezoid_cdf(density, m=20001):
    grid = np.linspace(0, TWO_PI, m)
    cum = integrate.cumulative_trapezoid(density(grid), grid, initial=0.0)
    return lambda x: np.interp(x, grid, cum / cum[-1])


# ---------------------------------------------------------------------------
# criteria 1 and 4 share one null experiment


@pytest.fixture(scope="module")
def null_experiment():
    cfg = ExperimentConfig("rejection_rates", xi=[0.0, 1.0, 1 / TWO_PI], null={"mu": 0.0, "kappa": 1.0},
                           M=2000, n=200, delta=0.5, base_seed=0)
    return run_rejection_rates(cfg)


def rate_detail(table, targets):
    rates = table.set_index("alpha")["rate"]
    got = [float(rates[a]) for a in LEVELS]
    ok = all(abs(r - t) <= RATE_TOL for r, t in zip(got, targets))
    detail = ", ".join(f"alpha={a}: {r:.4f} (target {t} +/- {RATE_TOL})" for a, r, t in zip(LEVELS, got, targets))
    return ok, detail


def test_criterion_1_null_rejection_rates(null_experiment, acceptance):
    ok, detail = rate_detail(null_experiment.table, NULL_RATES)
    fails = null_experiment.summary["failed"]
    assert acceptance(1, ok, f"{detail}; failed fits {fails}/2000")


def test_criterion_2_boundary_rejection_rates(acceptance):
    cfg = ExperimentConfig("rejection_rates", xi=[0.0, 1.0, 1 / TWO_PI], dgp_family="uniform",
                           dgp_xi=[1 / TWO_PI], null={"kappa": 0.0}, M=2000, n=50, delta=0.5, base_seed=1)
    rep = run_rejection_rates(cfg)
    ok, detail = rate_detail(rep.table, BOUNDARY_RATES)
    assert acceptance(2, ok, f"{detail}; failed fits {rep.summary['failed']}/2000")


def test_criterion_3_homogeneity_table(acceptance):
    cfg = ExperimentConfig("homogeneity_table", M=500, n=50, delta=0.5, group_sizes=[[3, 2], [10, 5]],
                           a_values=[0, 5], base_seed=2)
    tab = run_homogeneity_table(cfg).table.set_index(["setting", "preset"])
    checks = [
        ("(10,5) concentrations a=5", tab.loc[("(10,5)", "concentrations"), "a=5"], 99.42, 4.0),
        ("(3,2) concentrations a=5", tab.loc[("(3,2)", "concentrations"), "a=5"], 75.59, 4.0),
        ("(10,5) means a=5", tab.loc[("(10,5)", "means"), "a=5"], 5.0, 2.5),
    ]
    for (setting, preset), val in tab["a=0"].items():
        checks.append((f"{setting} {preset} a=0", val, 5.0, 2.5))
    bad = [c for c in checks if abs(c[1] - c[2]) > c[3]]
    shown = "; ".join(f"{name}: {v:.2f}%" for name, v, _, _ in checks[:3])
    a0 = tab["a=0"]
    detail = f"{shown}; a=0 cells in [{a0.min():.1f}, {a0.max():.1f}]%"
    if bad:
        detail += "; out of tolerance: " + ", ".join(f"{n} = {v:.2f}% (target {t} +/- {tol})"
                                                      for n, v, t, tol in bad)
    assert acceptance(3, not bad, detail)


def test_criterion_4_chisq_distribution(null_experiment, acceptance):
    res = chisq_ks(null_experiment.samples["statistic"], 2)
    ok = res["ks_p_value"] > 0.01
    assert acceptance(4, ok, f"KS vs chi2_2 over {res['size']} statistics: D = {res['ks_statistic']:.4f}, "
                             f"p = {res['ks_p_value']:.3f} (> 0.01)")


# ---------------------------------------------------------------------------
# criterion 5: kernel properties


def circle_kernel_errors(dens, sigma):
    model = DiffusionModel(dens, sigma)
    f = dens.pdf

    def p(a, b, t):
        return float(transition_density(model, a, b, t))

    norm = max(abs(quad_circle(lambda y: p(a, y, t), [a]) - 1) for a in (0.3, 2.0, 5.1) for t in (0.05, 0.4, 2.0))
    ck = 0.0
    for a, b in ((0.4, 4.0), (2.5, 2.9)):
        s, t = 0.15, 0.25
        lhs = quad_circle(lambda x: p(a, x, s) * p(x, b, t), [a, b])
        ck = max(ck, abs(lhs - p(a, b, s + t)))
    rng = np.random.default_rng(5)
    a, b = rng.uniform(0, TWO_PI, (2, 200))
    lhs = f(a) * transition_density(model, a, b, 0.3)
    rhs = f(b) * transition_density(model, b, a, 0.3)
    db = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    t_erg = 200 / (4 * math.pi**2 * sigma**2)
    x = np.linspace(0, TWO_PI, 64, endpoint=False)
    erg = float(np.max(np.abs(transition_density(model, np.full_like(x, 1.1), x, t_erg) / f(x) - 1)))
    return norm, ck, db, erg


def torus_kernel_errors(dens, cov):
    model = DiffusionModel(dens, cov)
    pts, w = torus_grid()
    starts = np.array([[0.3, 1.0], [4.0, 2.5]])

    def p(a, b, t):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        return transition_density(model, a, b, t)

    norm = max(abs(np.sum(p(a, pts, t)) * w - 1) for a in starts for t in (0.1, 0.5))
    s, t = 0.2, 0.3
    ck = max(abs(np.sum(p(a, pts, s) * p(pts, b, t)) * w - float(p(a, b, s + t)))
             for a, b in ((starts[0], starts[1]), (starts[1], np.array([5.5, 0.2]))))
    rng = np.random.default_rng(6)
    a, b = rng.uniform(0, TWO_PI, (2, 200, 2))
    lhs = dens.pdf(a) * p(a, b, 0.4)
    rhs = dens.pdf(b) * p(b, a, 0.4)
    db = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    lam = np.linalg.eigvalsh(np.asarray(cov))[0]
    t_erg = 200 / (4 * math.pi**2 * lam)
    x = pts[::97]
    erg = float(np.max(np.abs(p(starts[0], x, t_erg) / dens.pdf(x) - 1)))
    return norm, ck, db, erg


def test_criterion_5_kernel_properties(acceptance):
    rows = {}
    for name, dens in circle_models().items():
        rows[name] = circle_kernel_errors(dens, 0.35)
    cov = np.array([[0.09, 0.02], [0.02, 0.06]])
    for name, dens in torus_models().items():
        rows[name] = torus_kernel_errors(dens, cov)
    tol = (1e-8, 1e-6, 1e-10, 1e-3)
    ok = all(all(e <= t for e, t in zip(errs, tol)) for errs in rows.values())
    worst = np.max(np.array(list(rows.values())), axis=0)
    detail = (f"families {', '.join(rows)}; worst normalization {worst[0]:.1e} (1e-8), "
              f"Chapman-Kolmogorov {worst[1]:.1e} (1e-6), detailed balance {worst[2]:.1e} (1e-10), "
              f"ergodic limit {worst[3]:.1e} (1e-3)")
    assert acceptance(5, ok, detail)


# ---------------------------------------------------------------------------
# criterion 6: score


SCORE_CASES = {
    "uniform": ("uniform", [0.3]),
    "von_mises": ("von_mises", [1.0, 2.0, 0.2]),
    "wrapped_cauchy": ("wrapped_cauchy", [4.0, 0.5, 0.3]),
    "von_mises_mixture": ("von_mises_mixture", [0.4, 1.0, 4.0, 3.0, 2.0, 0.25]),
}


def fd_gradient(family, xi, data, kernel):
    fd = np.empty_like(xi)
    for j in range(xi.size):
        h = 1e-6 * max(1.0, abs(xi[j]))
        up, dn = xi.copy(), xi.copy()
        up[j] += h
        dn[j] -= h
        fd[j] = (log_likelihood(family, up, data, kernel) - log_likelihood(family, dn, data, kernel)) / (2 * h)
    return fd


def test_criterion_6_score(acceptance):
    rng = np.random.default_rng(60)
    worst_fd, worst_mc = 0.0, 0.0
    for name, (fam_name, xi_true) in SCORE_CASES.items():
        family = get_family(fam_name, 2)
        xi_true = np.array(xi_true)
        for kernel in ("diffusion", "jump"):
            data = simulate_dataset(family, xi_true, 50, 0.5, rng, 1, kernel)
            for _ in range(20):
                xi = xi_true * rng.uniform(0.7, 1.3, xi_true.size)
                if name == "von_mises_mixture":
                    xi[0] = rng.normal()
                g = score(family, xi, data, kernel)
                fd = fd_gradient(family, xi, data, kernel)
                worst_fd = max(worst_fd, float(np.max(np.abs(g - fd)) / np.max(np.abs(fd))))
        sc = transition_terms(family, xi_true, simulate_dataset(family, xi_true, 20, 0.5, rng, 200))[1]
        z = np.abs(sc.mean(axis=0)) / (sc.std(axis=0, ddof=1) / math.sqrt(sc.shape[0]))
        worst_mc = max(worst_mc, float(np.max(z)))
    ok = worst_fd <= 1e-4 and worst_mc <= 3.0
    assert acceptance(6, ok, f"4 families x 2 kernels x 20 points: worst FD relative error {worst_fd:.1e} (1e-4); "
                             f"Monte Carlo mean score worst |z| {worst_mc:.2f} (3 SE)")


# ---------------------------------------------------------------------------
# criterion 7: bridge marginal


BRIDGE_CASES = {
    "vM(0,2) near mode": (VonMises(0.0, 2.0), 0.3, 1.2),
    "vM(0,2) across pi": (VonMises(0.0, 2.0), 2.2, 4.1),
    "uniform": (Uniform(), 0.5, 2.0),
}


def test_criterion_7_bridge_marginal(acceptance):
    T, sigma = 1.0, 0.15
    results = {}
    for i, (name, (dens, a, b)) in enumerate(BRIDGE_CASES.items()):
        spec = BridgeSpec(DiffusionModel(dens, sigma), a, b, T, [T / 2])
        draws = sample_bridges(spec, random_state=70 + i, size=5000)
        x = np.array([d.states[0, 0] for d in draws])
        cdf = trapezoid_cdf(lambda g: bridge_marginal_density(spec, T / 2, g))
        results[name] = stats.kstest(x, cdf).pvalue
    ok = all(p > 0.01 for p in results.values())
    assert acceptance(7, ok, "KS p-values at T/2 (5000 draws, > 0.01): "
                             + ", ".join(f"{k} {v:.3f}" for k, v in results.items()))


# ---------------------------------------------------------------------------
# criterion 8: jump process


def abc_midpoints(model, a, b, horizon, eps, target, rng, chunk=500_000):
    # forward simulation, keep paths whose endpoint lands within eps of b
    kept = []
    total = 0
    while total < target:
        x = simulate_jump_paths(model, a, 2, horizon / 2, rng, size=chunk)
        near = np.abs(np.mod(x[:, 2] - b + np.pi, TWO_PI) - np.pi) < eps
        kept.append(x[near, 1])
        total += int(near.sum())
    return np.concatenate(kept)


def test_criterion_8_jump_process(acceptance):
    rng = np.random.default_rng(80)
    y, T, sigma = 0.8, 1.0, 0.5
    intervals = np.array([0.3, 0.45, 0.25])
    proposals, accepted = 0, 0
    while proposals < 10_000:
        _, used = sample_auxiliary(y, T, sigma, intervals, rng, method="normal")
        proposals += used
        accepted += 1
    p = 1 / float(bridge_bound(y, T, sigma))
    rate = accepted / proposals
    se = math.sqrt(p * (1 - p) / proposals)
    acc_ok = abs(rate - p) <= 3 * se

    norm, db = 0.0, 0.0
    pts = rng.uniform(0, TWO_PI, (2, 200))
    for dens in circle_models().values():
        model = JumpModel(dens, 0.35)
        for a in (0.3, 2.0, 5.1):
            for t in (0.05, 0.4, 2.0):
                val = quad_circle(lambda x: float(jump_transition_density(model, a, x, t)), [a])
                norm = max(norm, abs(val - 1))
        lhs = dens.pdf(pts[0]) * jump_transition_density(model, pts[0], pts[1], 0.3)
        rhs = dens.pdf(pts[1]) * jump_transition_density(model, pts[1], pts[0], 0.3)
        db = max(db, float(np.max(np.abs(lhs - rhs) / np.abs(rhs))))

    model = JumpModel(VonMises(0.0, 2.0), 0.3)
    a, b = 0.5, 2.0
    oracle = abc_midpoints(model, a, b, T, 0.01, 4000, rng)
    exact = np.array([sample_jump_bridge(model, a, b, T, [T / 2], rng).states[0] for _ in range(4000)])
    ks = stats.ks_2samp(exact, oracle)
    ok = acc_ok and norm <= 1e-8 and db <= 1e-10 and ks.pvalue > 0.01
    assert acceptance(8, ok, f"normal-proposal acceptance {rate:.4f} vs 1/M_A {p:.4f} over {proposals} proposals "
                             f"(|z| {abs(rate - p) / se:.2f} <= 3); jump tpd normalization {norm:.1e}, "
                             f"detailed balance {db:.1e}; bridge vs ABC ({oracle.size} kept paths) "
                             f"KS p = {ks.pvalue:.3f} (> 0.01)")


# ---------------------------------------------------------------------------
# criterion 9: transform layer


def test_criterion_9_transform_layer(acceptance):
    rng = np.random.default_rng(90)
    trip, jac, per = 0.0, 0.0, 0.0
    x = rng.uniform(-6 * np.pi, 6 * np.pi, 300)
    h = 1e-5
    for dens in circle_models().values():
        trip = max(trip, float(np.max(np.abs(dens.ppf(dens.cdf(x)) - x))))
        u = rng.uniform(-3, 3, 300)
        trip = max(trip, float(np.max(np.abs(dens.cdf(dens.ppf(u)) - u))))
        fd = (dens.cdf(x + h) - dens.cdf(x - h)) / (2 * h)
        jac = max(jac, float(np.max(np.abs(fd / dens.pdf(x) - 1))))
        for k in (-3, 1, 4):
            per = max(per, float(np.max(np.abs(dens.cdf(x + k * TWO_PI) - dens.cdf(x) - k))))
    pts = rng.uniform(-6 * np.pi, 6 * np.pi, (200, 2))
    for dens in torus_zoo().values():
        r = dens.rosenblatt(pts)
        back = dens.rosenblatt_inverse(r)
        diff = np.abs(np.mod(back - pts + np.pi, TWO_PI) - np.pi)
        trip = max(trip, float(np.max(diff)), float(np.max(np.abs(dens.rosenblatt(back) - r))))
        J = np.empty((pts.shape[0], 2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[:, :, j] = (dens.rosenblatt(pts + e) - dens.rosenblatt(pts - e)) / (2 * h)
        jac = max(jac, float(np.max(np.abs(np.abs(np.linalg.det(J)) / dens.pdf(pts) - 1))))
        for k in ((1, 0), (0, -2), (3, 1)):
            k = np.array(k)
            per = max(per, float(np.max(np.abs(dens.rosenblatt(pts + TWO_PI * k) - dens.rosenblatt(pts) - k))))
    ok = trip <= 1e-7 and jac <= 1e-4 and per <= 1e-12
    assert acceptance(9, ok, f"4 circular + 5 toroidal densities: round trip {trip:.1e} (1e-7), "
                             f"|DR| vs f {jac:.1e} (1e-4), periodic identities {per:.1e} (1e-12)")


# ---------------------------------------------------------------------------
# criterion 10: exact simulation against Euler-Maruyama


def test_criterion_10_exact_vs_euler(acceptance):
    model = DiffusionModel(VonMises(0.0, 2.0), 0.25)
    results = {}
    for i, theta0 in enumerate((1.0, np.pi / 2)):
        exact = simulate_paths(model, theta0, 1, 0.1, random_state=100 + i, size=5000)[:, 1, 0]
        euler = simulate_euler(model, theta0, 1, 0.1, 200, random_state=110 + i, size=5000)[:, 1, 0]
        d = np.abs(np.mod(exact - theta0 + np.pi, TWO_PI) - np.pi)
        e = np.abs(np.mod(euler - theta0 + np.pi, TWO_PI) - np.pi)
        results[theta0] = max(stats.ks_2samp(exact, euler).statistic, stats.ks_2samp(d, e).statistic)
    ok = all(v < 0.04 for v in results.values())
    assert acceptance(10, ok, "one-step KS distance, 5000 samples, 200 substeps (< 0.04): "
                              + ", ".join(f"theta0={k:.3f}: {v:.4f}" for k, v in results.items()))
