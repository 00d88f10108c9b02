"""Fast internal consistency checks for the ``selftest`` command."""

from __future__ import annotations

import numpy as np

from . import combining as cb
from . import detequiv as de
from .estimation import estimation_statistics, sample_block
from .synthetic import block_orthogonal_set, diagonal_set, random_correlation_set, uncorrelated_set


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _sinr_forms(rng):
    worst = 0.0
    for _ in range(10):
        L, K, M = rng.choice([1, 2, 4]), rng.choice([1, 2, 4]), rng.choice([4, 8, 16])
        corr = random_correlation_set(rng, L, K, M)
        stats = estimation_statistics(corr, 10.0)
        blk = sample_block(corr, stats, 10.0, rng)
        for j in range(L):
            for k in range(K):
                q = cb.sinr_quadratic(blk, stats.Z[j], 1.0, j, k)
                g, _ = cb.sinr_via_mse(blk, stats.Z[j], 1.0, j, k)
                d = cb.sinr_decomposition(blk, stats.Z[j], 1.0, j, k).gamma
                worst = max(worst, _rel(q, g), _rel(q, d))
    return worst <= 1e-9, f"max relative mismatch {worst:.2e}"


def _optimality(rng):
    corr = random_correlation_set(rng, 2, 2, 8)
    stats = estimation_statistics(corr, 10.0)
    blk = sample_block(corr, stats, 10.0, rng)
    best = cb.sinr_quadratic(blk, stats.Z[0], 1.0, 0, 0)
    v = cb.mmse_combiner(blk, stats.Z[0], 1.0, 0, 0)
    ok = abs(cb.sinr_generic(v, blk, stats.Z[0], 1.0, 0, 0) - best) <= 1e-9 * best
    for _ in range(100):
        u = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        ok &= cb.sinr_generic(u, blk, stats.Z[0], 1.0, 0, 0) <= best * (1 + 1e-12)
    return bool(ok), "M-MMSE beats 100 random combiners"


def _uncorrelated(rng):
    M, K, L, alpha, rho, rho_tr = 32, 8, 2, 0.5, 5.0, 20.0
    stats = estimation_statistics(uncorrelated_set(L, K, M, alpha), rho_tr)
    g = de.deterministic_equivalent(stats, M * rho).gamma_bar[0, 0]
    cf = de.closed_form_uncorrelated(M, K, L, alpha, rho, rho_tr).gamma_bar
    return _rel(g, cf) <= 1e-8, f"relative mismatch {_rel(g, cf):.2e}"


def _diagonal(rng):
    corr = diagonal_set(rng, 2, 2, 16)
    stats = estimation_statistics(corr, 10.0)
    res = de.deterministic_equivalent(stats, 10.0)
    diag = np.diagonal
    cf = de.closed_form_diagonal(diag(corr.R, axis1=-2, axis2=-1).real,
                                 diag(stats.Phi_self, axis1=-2, axis2=-1).real,
                                 diag(stats.Z, axis1=-2, axis2=-1).real, 10.0)
    err = np.max(np.abs(cf.gamma_bar - res.gamma_bar) / res.gamma_bar)
    return err <= 1e-8, f"max relative mismatch {err:.2e}"


def _orthogonal(rng):
    stats = estimation_statistics(block_orthogonal_set(rng, 2, 2, 8), 10.0)
    res = de.deterministic_equivalent(stats, 10.0)
    mu_own = res.mu_star[np.arange(2), np.arange(2)]
    err = np.max(np.abs(res.gamma_bar - mu_own))
    return err <= 1e-10 and res.loss_bar.max() <= 1e-10, f"|gamma_bar - mu_jjk| <= {err:.1e}"


CHECKS = {
    "sinr-forms": _sinr_forms,
    "mmse-optimality": _optimality,
    "uncorrelated-closed-form": _uncorrelated,
    "diagonal-closed-form": _diagonal,
    "orthogonal-covariances": _orthogonal,
}


def run_selftest(seed=0, echo=print) -> bool:
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, check in CHECKS.items():
        ok, msg = check(rng)
        all_ok &= bool(ok)
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    return all_ok
