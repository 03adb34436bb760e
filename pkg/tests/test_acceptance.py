"""End-to-end acceptance criteria, one test each.

Every test records a ``criterion N [PASS|FAIL]`` line, printed again in the
terminal summary, and then asserts the outcome.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from preqrisk import calibration as C
from preqrisk import dependence as dep
from preqrisk import predictors as P
from preqrisk import scoring, simlab, tailrisk
from preqrisk.errors import InfiniteMeanError
from preqrisk.predictors import MEAN, PredictionTrace

from conftest import record
from oracles import grid_argmax_theta

pytestmark = pytest.mark.acceptance

# reference endpoints: {beta: {gamma: {length: (t1, t2)}}}
TABLES = {
    0.90: {
        0.01: {250: (0.7038, 1.0000), 500: (0.7785, 1.0000), 1000: (0.8201, 0.9672)},
        0.05: {250: (0.7676, 1.0000), 500: (0.8103, 0.9758), 1000: (0.8418, 0.9538)},
        0.10: {250: (0.7926, 1.0000), 500: (0.8272, 0.9652), 1000: (0.8519, 0.9450)},
        0.50: {250: (0.8643, 0.9437), 500: (0.8728, 0.9281), 1000: (0.8823, 0.9200)},
    },
    0.95: {
        0.01: {250: (0.6080, 1.0000), 500: (0.7854, 1.0000), 1000: (0.8516, 1.0000)},
        0.05: {250: (0.7600, 1.0000), 500: (0.8398, 1.0000), 1000: (0.8800, 1.0000)},
        0.10: {250: (0.8012, 1.0000), 500: (0.8648, 1.0000), 1000: (0.8940, 1.0000)},
        0.50: {250: (0.9133, 1.0000), 500: (0.9249, 1.0000), 1000: (0.9308, 0.9732)},
    },
}


def test_criterion_01_confidence_tables():
    dep._null_sample.cache_clear()
    start = time.perf_counter()
    worst = 0.0
    entries = 0
    for beta, rows in TABLES.items():
        table = dep.ci_table(beta, (250, 500, 1000), (0.01, 0.05, 0.10, 0.50), reps=100_000, seed=7)
        for g, cols in rows.items():
            for L, expected in cols.items():
                got = table[g][L]
                worst = max(worst, abs(got[0] - expected[0]), abs(got[1] - expected[1]))
                entries += 2
    elapsed = time.perf_counter() - start
    ok = entries == 48 and worst <= 0.01 and elapsed < 60
    assert record(1, "confidence tables", ok, f"{entries} entries, max |err| {worst:.4f}, {elapsed:.1f} s")


def test_criterion_02_mle_oracle_equivalence():
    rng = np.random.default_rng(2002)
    worst = 0.0
    for _ in range(1000):
        beta = rng.uniform(0.5, 0.999)
        n1 = rng.uniform()
        n2 = (1 - n1) * rng.uniform()
        worst = max(worst, abs(dep.theta_hat(n1, n2, beta) - grid_argmax_theta(n1, n2, beta)))
    beta = rng.uniform(0.5, 1.0, 100_000)
    beta = np.where(beta >= 1.0, 0.5, beta)
    n1 = rng.uniform(0, 1, beta.size)
    n2 = (1 - n1) * rng.uniform(0, 1, beta.size)
    d_min = float(dep.discriminant(n1, n2, beta).min())
    ok = worst <= 2e-6 and d_min >= 0
    assert record(2, "MLE oracle equivalence", ok, f"max |theta_hat - grid| {worst:.2e}, min D {d_min:.3e}")


def test_criterion_03_consistency():
    errs = {}
    for theta in (0.3, 0.7, 0.9):
        a = simlab.sample_markov(simlab.MarkovSpec(0.9, theta, 1_000_000, seed=30))
        errs[theta] = abs(dep.theta_hat_counts(dep.pair_counts(a), 0.9) - theta)
    bounds = {}
    for theta in (0.0, 1.0):
        vals = []
        for seed in range(5):
            a = simlab.sample_markov(simlab.MarkovSpec(0.9, theta, 1_000_000, seed=31 + seed))
            vals.append(dep.theta_hat_counts(dep.pair_counts(a), 0.9))
        bounds[theta] = vals
    ok = max(errs.values()) <= 0.01 and all(v == t for t, vs in bounds.items() for v in vs)
    detail = ", ".join(f"theta {t}: {e:.4f}" for t, e in errs.items())
    assert record(3, "consistency", ok, detail + f"; boundary estimates {sorted({v for vs in bounds.values() for v in vs})}")


def test_criterion_04_spot_checks():
    a = dep.theta_hat(0.0100, 0.8120, 0.9)
    b = dep.theta_hat(0.0027, 0.9007, 0.95)
    ok = abs(a - 0.8980) <= 1e-4 and abs(b - 0.9481) <= 1e-4
    assert record(4, "closed-form spot checks", ok, f"{a:.5f}, {b:.5f}")


@pytest.mark.slow
def test_criterion_05_quantile_calibration():
    n, seeds = 100_000, 1000
    freq_ok = {0.9: 0, 0.95: 0}
    lil_ok = {0.9: 0, 0.95: 0}
    for seed in range(seeds):
        sigma, y = simlab.sv_paths(simlab.SVSpec(n, seed))
        for beta in (0.9, 0.95):
            trace = PredictionTrace.from_arrays(sigma * ndtri(beta), y, beta)
            f = C.running_frequency(trace).terminal
            freq_ok[beta] += abs(f - (1 - beta)) <= 3 * math.sqrt(beta * (1 - beta) / n)
            lil_ok[beta] += abs(C.lil_statistic(trace).terminal) <= 1.5
    rates = {b: (freq_ok[b] / seeds, lil_ok[b] / seeds) for b in freq_ok}
    ok = all(fr >= 0.95 and lr >= 0.95 for fr, lr in rates.values())
    detail = "; ".join(f"beta {b}: frequency {fr:.3f}, |zeta|<=1.5 {lr:.3f}" for b, (fr, lr) in rates.items())
    assert record(5, "quantile calibration", ok, detail)


def test_criterion_06_size_and_power():
    interval = dep.ci_endpoints(0.9, 1000, 0.05, seed=7)
    size = np.mean([
        dep.independence_test(simlab.sample_markov(simlab.MarkovSpec(0.9, 0.9, 1000, s)), 0.9, interval=interval).reject
        for s in range(10_000)
    ])
    power = np.mean([
        dep.independence_test(simlab.sample_markov(simlab.MarkovSpec(0.9, 0.7, 1000, s)), 0.9, interval=interval).reject
        for s in range(10_000, 11_000)
    ])
    ok = abs(size - 0.05) <= 0.02 and power >= 0.80
    assert record(6, "test size and power", ok, f"size {size:.4f}, power {power:.3f}")


def test_criterion_07_ru_equivalence():
    rng = np.random.default_rng(707)
    worst = 0.0
    mismatched = 0
    for _ in range(100):
        n = int(rng.integers(1, 300))
        y = rng.standard_t(3, n)
        if rng.random() < 0.3:
            y = np.round(y, 1)  # ties
        beta = float(rng.choice([rng.uniform(0.01, 0.99), round(rng.uniform(0.05, 0.95), 2)]))
        grid = np.unique(y)
        v = tailrisk.psi(grid, y, beta)
        best = v.min()
        argmin = grid[np.flatnonzero(v <= best + 1e-12 * max(1.0, abs(best)))[0]]
        mismatched += argmin != tailrisk.var_of(y, beta).value
        worst = max(worst, abs(best - tailrisk.cvar_of(y, beta).value))
    ok = mismatched == 0 and worst <= 1e-9
    assert record(7, "Rockafellar-Uryasev equivalence", ok, f"argmin mismatches {mismatched}/100, max |min - CVaR| {worst:.1e}")


def test_criterion_08_score_comparison():
    fractions = []
    for seed in range(20):
        y = simlab.sample_sv(simlab.SVSpec(1500, seed)).values
        a = P.run_predictor(P.adaptive_predictor(P.rolling_quantile_predictor(20, 2), 1.2, 0.9), y)
        b = P.run_predictor(P.nonsense_predictor(-0.06, 0.06, 0.9, seed=seed), y)
        fractions.append(scoring.compare(a, b, 0.9, window=500).fraction_a)
    ok = min(fractions) >= 0.95
    assert record(8, "score comparison", ok, f"adaptive preferred in >= {min(fractions):.3f} of windows over 20 series")


def test_criterion_09_power_tail_cvar():
    kappa, beta, eta = 2.5, 0.9, 0.99
    est = tailrisk.cvar_power_tail(
        lambda t: simlab.pareto_quantile(t, kappa), float(simlab.pareto_quantile(eta, kappa)), kappa, beta, eta
    ).value
    rel = abs(est / simlab.pareto_cvar(beta, kappa) - 1)
    raised = 0
    for k in (1.0, 1.0 + 1e-7, 1.0 + 1e-6):
        try:
            tailrisk.cvar_power_tail(lambda t: simlab.pareto_quantile(t, kappa), 10.0, k, beta, eta)
        except InfiniteMeanError:
            raised += 1
    ok = rel <= 1e-4 and raised == 3
    assert record(9, "power-tail CVaR", ok, f"relative error {rel:.1e}, infinite-mean errors {raised}/3")


def test_criterion_10_mean_calibration():
    n, seeds = 10_000, 1000
    ok_count = 0
    biased = []
    for seed in range(seeds):
        y = simlab.sample_iid_normal(n, seed).values
        ok_count += abs(C.mean_calibration(PredictionTrace.from_arrays(np.zeros(n), y, MEAN)).terminal) < 0.05
        if seed < 100:
            biased.append(C.mean_calibration(PredictionTrace.from_arrays(np.ones(n), y, MEAN)).terminal)
    rate = ok_count / seeds
    ok = rate >= 0.95 and max(abs(b + 0.5) for b in biased) <= 0.05
    assert record(10, "mean calibration", ok, f"|S/Q| < 0.05 in {rate:.3f}; biased ratio in [{min(biased):.3f}, {max(biased):.3f}]")


def test_criterion_11_pit():
    seeds, n = 1000, 2000
    passes = rejects = 0
    true_cdfs = [ndtr] * n
    wrong_cdfs = [lambda v: ndtr(v / 2.0)] * n
    for seed in range(seeds):
        y = simlab.sample_iid_normal(n, seed).values
        passes += C.ks_uniform_pvalue(C.pit_transform(true_cdfs, y)) > 0.05
        rejects += C.ks_uniform_pvalue(C.pit_transform(wrong_cdfs, y)) <= 0.05
    ok = passes / seeds >= 0.90 and rejects / seeds >= 0.99
    assert record(11, "PIT uniformity", ok, f"pass {passes / seeds:.3f}, wrong-variance reject {rejects / seeds:.3f}")


def test_criterion_12_sensitivity():
    rolling, adaptive, nonsense = [], [], []
    for seed in range(20):
        h = simlab.sample_sv(simlab.SVSpec(1000, seed)).values
        z = P.direction("ones", h.size)
        rolling.append(P.sensitivity(P.rolling_quantile_predictor(20, 2), h, z))
        adaptive.append(P.sensitivity(P.adaptive_predictor(P.rolling_quantile_predictor(20, 2), 1.2, 0.9), h, z))
        nonsense.append(abs(P.sensitivity(P.nonsense_predictor(-0.06, 0.06, 0.9, seed=seed), h, z)))
    near_one = [abs(v - 1) for v in rolling + adaptive]
    ok = max(near_one) <= 0.1 and max(nonsense) < 1e-9
    assert record(
        12, "sensitivity separation", ok,
        f"rolling/adaptive max |d - 1| {max(near_one):.2e}, nonsense max |d| {max(nonsense):.1e}",
    )
