"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the summary lines appear at the
end) or ``python tests/test_acceptance.py`` to print them directly. The
reference-scenario sweep is shared and takes a few minutes.
"""

import os
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import ACCEPTANCE  # noqa: E402
from mmse_largesys import combining as cb  # noqa: E402
from mmse_largesys import detequiv as de  # noqa: E402
from mmse_largesys import harness as hs  # noqa: E402
from mmse_largesys.estimation import estimation_statistics, sample_block  # noqa: E402
from mmse_largesys.network import (CorrelationSet, NetworkConfig, assemble_correlation_set,  # noqa: E402
                                   generate_network)
from mmse_largesys.synthetic import (block_orthogonal_set, diagonal_set, random_correlation_set,  # noqa: E402
                                     uncorrelated_set)

SEED = 0
THREADS = 8
N_BLOCKS, N_DROPS = 500, 10


def record(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def relerr(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


@pytest.fixture(scope="module")
def instances():
    rng = np.random.default_rng(SEED)
    out = []
    for _ in range(200):
        M, L, K = rng.choice([4, 8, 16, 32]), rng.choice([1, 2, 4]), rng.choice([1, 2, 4])
        rho_tr, rho_ul = 10 ** rng.uniform(-1, 2), 10 ** rng.uniform(-1, 1)
        corr = random_correlation_set(rng, L, K, M)
        stats = estimation_statistics(corr, rho_tr)
        out.append((stats, sample_block(corr, stats, rho_tr, rng), rho_ul))
    return out


@pytest.fixture(scope="module")
def table_sweep():
    """Reference-scenario sweep over K in {4, 8, 16} and M/K in {2, 4}."""
    t0 = time.perf_counter()
    pts = hs.sweep(NetworkConfig(seed=SEED), k_values=(4, 8, 16), ratios=(2, 4), n_blocks=N_BLOCKS,
                   n_drops=N_DROPS, threads=THREADS)
    return {(r, K): res for r, K, res in pts}, time.perf_counter() - t0


def test_c01_sinr_identities(instances):
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    for stats, blk, rho_ul in instances:
        for j in range(stats.L):
            for k in range(stats.K):
                q = cb.sinr_quadratic(blk, stats.Z[j], rho_ul, j, k)
                g, _ = cb.sinr_via_mse(blk, stats.Z[j], rho_ul, j, k)
                d = cb.sinr_decomposition(blk, stats.Z[j], rho_ul, j, k).gamma
                worst = max(worst, relerr(q, g), relerr(q, d), relerr(g, d))
                n += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 30
    record("C1 SINR identities", ok, f"{n} UEs in 200 instances, max pairwise rel. diff {worst:.2e}, {dt:.1f}s")
    assert ok


def test_c02_optimality(instances):
    rng = np.random.default_rng(SEED + 1)
    violations, worst, trials = 0, -np.inf, 0
    for stats, blk, rho_ul in instances:
        M = stats.M
        for j in range(stats.L):
            for k in range(stats.K):
                v = cb.mmse_combiner(blk, stats.Z[j], rho_ul, j, k)
                best = cb.sinr_generic(v, blk, stats.Z[j], rho_ul, j, k)
                U = rng.standard_normal((100, M)) + 1j * rng.standard_normal((100, M))
                for u in U:
                    g = cb.sinr_generic(u, blk, stats.Z[j], rho_ul, j, k)
                    excess = (g - best) / best
                    worst = max(worst, excess)
                    violations += excess > 1e-12
                    trials += 1
    ok = violations == 0
    record("C2 M-MMSE optimality", ok, f"{trials} random combiners, {violations} violations, "
                                       f"max relative excess {worst:.2e}")
    assert ok


def scalar_root(phi, zeta, M, rho):
    a, c = phi / M, zeta / M + 1 / rho
    b = a + c - phi
    return (-b + np.sqrt(b * b + 4 * c * phi)) / (2 * c)


def test_c03_scalar_oracle():
    worst, n = 0.0, 0
    rho_tr = 10.0
    for beta in np.logspace(-2, 1, 5):
        for rho in np.logspace(-1, 3, 5):
            for M in (1, 4, 16, 64):
                R = beta * np.eye(M, dtype=complex)[None, None, None]
                stats = estimation_statistics(CorrelationSet(R), rho_tr)
                phi = beta**2 / (beta + 1 / rho_tr)
                mu = de.solve_mu(stats, rho, 0, tol=1e-13).mu_star[0, 0]
                worst = max(worst, relerr(mu, scalar_root(phi, beta - phi, M, rho)))
                n += 1
    ok = worst <= 1e-10
    record("C3 scalar fixed point", ok, f"{n} grid points, max rel. error {worst:.2e}")
    assert ok


def test_c04_uncorrelated_oracle():
    worst, n = 0.0, 0
    K, L, rho, rho_tr = 8, 2, 1.0, 10.0
    for alpha in (0.1, 0.5, 1.0):
        for ratio in (2, 4, 8):
            M = ratio * K
            stats = estimation_statistics(uncorrelated_set(L, K, M, alpha), rho_tr)
            g = de.deterministic_equivalent(stats, M * rho).gamma_bar
            cf = de.closed_form_uncorrelated(M, K, L, alpha, rho, rho_tr)
            worst = max(worst, relerr(g, cf.gamma_bar).max())
            n += 1
    ok = worst <= 1e-8
    record("C4 uncorrelated closed form", ok, f"{n} (alpha, M/K) cases, max rel. error {worst:.2e}")
    assert ok


def test_c05_diagonal_oracle():
    rng = np.random.default_rng(SEED + 5)
    worst = 0.0
    diag = lambda X: np.diagonal(X, axis1=-2, axis2=-1).real  # noqa: E731
    for _ in range(50):
        K = int(rng.integers(1, 5))
        rho, rho_tr = 10 ** rng.uniform(0, 3), 10 ** rng.uniform(-1, 2)
        corr = diagonal_set(rng, 2, K, 16)
        stats = estimation_statistics(corr, rho_tr)
        g = de.deterministic_equivalent(stats, rho, tol=1e-13).gamma_bar
        cf = de.closed_form_diagonal(diag(corr.R), diag(stats.Phi_self), diag(stats.Z), rho)
        worst = max(worst, relerr(g, cf.gamma_bar).max())
    ok = worst <= 1e-8
    record("C5 diagonal closed form", ok, f"50 instances (M=16, L=2), max rel. error {worst:.2e}")
    assert ok


def decile_errors(res):
    mc, gb = res.sinr_mc.ravel(), res.gamma_bar.ravel()
    order = np.argsort(gb)
    return np.array([abs(mc[i].mean() - gb[i].mean()) / gb[i].mean() for i in np.array_split(order, 10)])


@pytest.mark.slow
def test_c06_tightness(table_sweep):
    results, dt = table_sweep
    worst = []
    parts = []
    for K in (4, 8, 16):
        res = results[(4, K)]
        e = decile_errors(res)
        worst.append(e.max())
        per_ue = relerr(res.sinr_mc, res.gamma_bar)
        parts.append(f"(M,K)=({res.config.M},{K}) worst decile {e.max():.4f}, per-UE mean {per_ue.mean():.4f} "
                     f"max {per_ue.max():.4f}")
    ok = worst[-1] <= 0.05 and worst[0] > worst[1] > worst[2]
    record("C6 det-equiv tightness", ok, "; ".join(parts) + f"; sweep {dt:.0f}s")
    assert ok


@pytest.mark.slow
def test_mc_standard_error(table_sweep):
    results, _ = table_sweep
    per_point = {key: float((r.sinr_stderr / r.sinr_mc).max()) for key, r in sorted(results.items())}
    ok = max(per_point.values()) <= 0.02
    detail = ", ".join(f"M/K={r} K={K}: {v:.4f}" for (r, K), v in per_point.items())
    record("MC standard error", ok, f"max relative standard error of mean SINR at {N_BLOCKS} blocks: {detail}")
    assert ok


@pytest.mark.slow
def test_mc_example_small_network(table_sweep):
    res = table_sweep[0][(4, 4)]  # drop 0 is the 1-drop run of the same seed
    mc, gb = res.sinr_mc[0], res.gamma_bar[0]
    err = abs(mc.mean() - gb.mean()) / gb.mean()
    ok = err <= 0.05
    record("MC example (M,K)=(16,4)", ok, f"network-mean SINR {mc.mean():.4f} vs gamma_bar {gb.mean():.4f} "
                                          f"(rel. {err:.4f}); per-UE max {relerr(mc, gb).max():.4f}")
    assert ok


def table_stats(cfg, drop):
    net = generate_network(cfg, hs._stream(cfg.seed, drop, 0))
    return estimation_statistics(assemble_correlation_set(net, cfg), cfg.rho_tr)


def test_c07_bounds():
    n_eta, n_first, n_loss_lo, n_loss_hi, n_ue, used = 0, 0, 0, 0, 0, 0
    for s in range(100):
        K = (4, 8)[s % 2]
        cfg = NetworkConfig(K=K, M=(2, 4)[(s // 2) % 2] * K, seed=SEED + s)
        stats = table_stats(cfg, 0)
        cert = de.compute_bounds(stats, cfg.rho)
        if cert.eta <= 0:
            n_eta += 1
            continue
        used += 1
        n_ue += cert.loss.size
        n_first += int((~cert.first_holds()).sum())
        n_loss_lo += int((cert.loss < cert.loss_lower * (1 - 1e-12)).sum())
        n_loss_hi += int((cert.loss > cert.loss_upper * (1 + 1e-12)).sum())
    ok = n_first == 0 and n_loss_lo == 0 and n_loss_hi == 0
    record("C7 bounds", ok, f"{used} scenarios ({n_eta} excluded for eta <= 0), {n_ue} UEs; violations: "
                            f"[B]_jj sandwich {n_first}, loss lower {n_loss_lo}, loss upper {n_loss_hi}")
    assert ok


def test_c08_scaling():
    K = 8
    ratios_first, ratios_loss = [], []
    for d in range(N_DROPS):
        vals = []
        for M in (32, 64):
            cfg = NetworkConfig(K=K, M=M, seed=SEED)
            r = de.deterministic_equivalent(table_stats(cfg, d), cfg.rho)
            vals.append((r.first_term_bar.mean(), r.loss_bar.mean()))
        ratios_first.append(vals[1][0] / vals[0][0])
        ratios_loss.append(vals[1][1] / vals[0][1])
    f, z = float(np.mean(ratios_first)), float(np.mean(ratios_loss))
    ok = 1.5 <= f <= 2.5 and 1.5 <= z <= 2.5
    record("C8 M-doubling scaling", ok, f"K={K}, M 32->64 over {N_DROPS} drops: [B]_jj x{f:.3f} "
                                        f"(range {min(ratios_first):.3f}-{max(ratios_first):.3f}), "
                                        f"loss x{z:.3f} (range {min(ratios_loss):.3f}-{max(ratios_loss):.3f})")
    assert ok


def term_summary(rows, ratio):
    sel = [row for row in rows if row["ratio"] == ratio]
    t1 = np.array([row["term1_db_mc"] for row in sel])
    t2 = np.array([row["term2_db_mc"] for row in sel])
    return t1, t2


@pytest.mark.slow
def test_c09_term_flatness(table_sweep):
    # The population average over UE positions needs many drops: with 10
    # drops the K=4 point pools only 160 UEs. Same block budget as the
    # tightness sweep, spread over 50 drops of 100 blocks.
    pts = hs.sweep(NetworkConfig(seed=SEED), k_values=(4, 8, 16), ratios=(2, 4), n_blocks=100, n_drops=50,
                   threads=THREADS)
    rows = hs.fig2_rows(pts)
    base = table_sweep[0]
    rows10 = hs.fig2_rows([(r, K, base[(r, K)]) for r in (2, 4) for K in (4, 8, 16)])
    ok, parts = True, []
    for ratio in (2, 4):
        t1, t2 = term_summary(rows, ratio)
        s1, s2 = np.ptp(t1), np.ptp(t2)
        ok &= bool(s1 <= 1.5 and s2 <= 1.5 and np.all(t1 > t2))
        parts.append(f"M/K={ratio}: term1 {np.round(t1, 2).tolist()} dB (spread {s1:.2f}), "
                     f"term2 {np.round(t2, 2).tolist()} dB (spread {s2:.2f})")
        u1, u2 = term_summary(rows10, ratio)
        parts.append(f"[500x10 sweep: spreads {np.ptp(u1):.2f} / {np.ptp(u2):.2f}, ordering {bool(np.all(u1 > u2))}]")
    record("C9 term flatness and ordering (100 blocks x 50 drops)", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_term_strength_detequiv_agreement(table_sweep):
    row = hs.fig2_rows([(4, 16, table_sweep[0][(4, 16)])])[0]
    d1 = abs(row["term1_db_mc"] - row["term1_db_detequiv"])
    d2 = abs(row["term2_db_mc"] - row["term2_db_detequiv"])
    ok = d1 <= 0.5 and d2 <= 0.5
    record("term strengths, det-equiv vs MC at (64,16)", ok, f"term1 gap {d1:.3f} dB, term2 gap {d2:.3f} dB")
    assert ok


@pytest.mark.slow
def test_sum_se_sweep(table_sweep):
    results, _ = table_sweep
    rows = hs.fig1_rows([(r, K, results[(r, K)]) for r in (2, 4) for K in (4, 8, 16)])
    err = max(abs(r["sumSE_mc"] - r["sumSE_detequiv"]) / r["sumSE_mc"] for r in rows)
    gap = [(r["sumSE_mc_firstterm_only"] - r["sumSE_mc"]) / r["sumSE_mc"] for r in rows]
    ok = err <= 0.05 and min(gap) >= 0 and max(gap) <= 0.02
    record("sum SE sweep", ok, f"max |MC - det-equiv| / MC {err:.4f}; first-term-only gap "
                               f"{min(gap):.4f}-{max(gap):.4f}")
    assert ok


def test_sum_se_pilot_overhead_turnover():
    # det-equiv in the shared eigenbasis reaches K close to tau_c
    k_values = (16, 32, 64, 96, 128, 160, 192)
    ok, parts = True, []
    for ratio in (2, 4):
        sums = [hs.run_detequiv(NetworkConfig(K=K, M=ratio * K, seed=SEED), n_drops=N_DROPS,
                                spectral=True).sum_se_detequiv for K in k_values]
        peak = int(np.argmax(sums))
        ok &= 0 < peak < len(sums) - 1 and sums[-1] < sums[peak]
        parts.append(f"M/K={ratio}: " + ", ".join(f"K={K} {s:.1f}" for K, s in zip(k_values, sums)))
    record("sum SE pilot-overhead turnover", ok, "; ".join(parts))
    assert ok


def test_c10_orthogonal_covariances():
    rng = np.random.default_rng(SEED + 10)
    worst_loss, worst_gap = 0.0, 0.0
    for L, K, M in ((2, 2, 8), (4, 3, 16), (2, 4, 32)):
        stats = estimation_statistics(block_orthogonal_set(rng, L, K, M), 5.0)
        res = de.deterministic_equivalent(stats, 20.0)
        own = res.mu_star[np.arange(L), np.arange(L)]
        worst_loss = max(worst_loss, float(res.loss_bar.max()))
        worst_gap = max(worst_gap, float(np.abs(res.gamma_bar - own).max()))
    ok = worst_loss <= 1e-10 and worst_gap <= 1e-10
    record("C10 orthogonal covariances", ok, f"max loss {worst_loss:.2e}, max |gamma_bar - mu_jjk| {worst_gap:.2e}")
    assert ok


def table1_oracle(M, K, L, tp):
    F = Fraction
    est = M * tp + L * M**2
    row1 = F(M**2 + M, 2) * (L * K + 1) + F(M**3 - M, 3)
    row2 = F(M**2 + M, 2) * (L**2 * (K + 2) + L) + F(M**3 - M, 3) + F(L**3 - L, 3)
    return est, row1, row2


def test_c11_table1():
    rng = np.random.default_rng(SEED + 11)
    bad = 0
    for _ in range(20):
        M, K, L = (int(x) for x in rng.integers(1, [257, 65, 17]))
        tp = int(rng.integers(K, 4 * K + 1))
        c = cb.complexity_counts(M, K, L, tp)
        est, r1, r2 = table1_oracle(M, K, L, tp)
        bad += c["quadratic"] != (est, r1) or c["mse"] != (est, r2)
    ok = bad == 0
    record("C11 complexity table", ok, f"20 tuples, {bad} mismatches")
    assert ok


def test_c12_determinism(tmp_path):
    cfg = NetworkConfig(seed=SEED + 12)
    blobs = {}
    for threads in (1, 8, 1):
        tag = f"{threads}-{len(blobs)}"
        res = hs.run_experiment(cfg, n_blocks=40, n_drops=2, threads=threads, keep_blocks=True)
        pts = hs.sweep(cfg, k_values=(2, 4), ratios=(2,), n_blocks=20, n_drops=2, threads=threads)
        files = []
        for name, obj, fmt, cols in (("ue.csv", res, "csv", None), ("ue.json", res, "json", None),
                                     ("fig1.csv", hs.fig1_rows(pts), "csv", hs.FIG1_COLUMNS),
                                     ("fig2.json", hs.fig2_rows(pts), "json", hs.FIG2_COLUMNS)):
            p = tmp_path / f"{tag}-{name}"
            hs.emit(obj, p, fmt, columns=cols)
            files.append(p.read_bytes())
        blobs[tag] = files
    first, *rest = blobs.values()
    ok = all(files == first for files in rest)
    record("C12 determinism", ok, f"4 output files x 3 runs (threads 1, 8, 1) byte-identical: {ok}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
