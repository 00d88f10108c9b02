"""Monte Carlo and deterministic-equivalent experiment runners.

Every random draw comes from a stream keyed by ``(seed, drop, block)``, and
per-block results land in preallocated slots, so the output does not depend
on how blocks are scheduled across threads.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import sys
import time
from contextlib import nullcontext
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np
from threadpoolctl import threadpool_limits

from .combining import block_sinr_terms
from .detequiv import deterministic_equivalent, spectral_deterministic_equivalent
from .estimation import estimation_statistics, sample_block
from .network import NetworkConfig, assemble_correlation_set, exponential_correlation, generate_network

log = logging.getLogger(__name__)

FIG1_COLUMNS = ("ratio", "K", "M", "sumSE_mc", "sumSE_detequiv", "sumSE_mc_firstterm_only")
FIG2_COLUMNS = ("ratio", "K", "term1_db_mc", "term2_db_mc", "term1_db_detequiv", "term2_db_detequiv")
UE_COLUMNS = ("drop", "cell", "ue", "sinr_mc", "sinr_stderr", "gamma_bar", "se_mc", "se_detequiv",
              "term1_mc", "term2_mc", "term1_detequiv", "term2_detequiv")


class MonteCarloError(RuntimeError):
    pass


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


@dataclass
class ExperimentResult:
    config: NetworkConfig
    n_blocks: int
    n_drops: int
    # per-UE arrays, shape (n_drops, L, K); None when the engine was not run
    sinr_mc: np.ndarray | None = None
    sinr_stderr: np.ndarray | None = None
    se_mc: np.ndarray | None = None
    se_mc_first: np.ndarray | None = None  # loss term dropped
    term1_mc: np.ndarray | None = None
    term2_mc: np.ndarray | None = None
    gamma_bar: np.ndarray | None = None
    se_detequiv: np.ndarray | None = None
    term1_detequiv: np.ndarray | None = None
    term2_detequiv: np.ndarray | None = None
    gamma_blocks: np.ndarray | None = field(default=None, repr=False)  # (n_drops, n_blocks, L, K)
    wall_time: float = field(default=0.0, compare=False)

    @staticmethod
    def _sum_se(se):
        # sum over the UEs of a cell, averaged over cells and drops
        return None if se is None else float(se.sum(axis=-1).mean())

    @property
    def sum_se_mc(self):
        return self._sum_se(self.se_mc)

    @property
    def sum_se_mc_first(self):
        return self._sum_se(self.se_mc_first)

    @property
    def sum_se_detequiv(self):
        return self._sum_se(self.se_detequiv)

    def to_dict(self, include_blocks=True):
        out = {"config": config_dict(self.config), "n_blocks": self.n_blocks, "n_drops": self.n_drops}
        for f in fields(self):
            if f.name in ("config", "n_blocks", "n_drops", "wall_time"):
                continue
            if f.name == "gamma_blocks" and not include_blocks:
                continue
            v = getattr(self, f.name)
            out[f.name] = None if v is None else np.asarray(v).tolist()
        out["sum_se_mc"] = self.sum_se_mc
        out["sum_se_mc_first"] = self.sum_se_mc_first
        out["sum_se_detequiv"] = self.sum_se_detequiv
        return out


def config_dict(config: NetworkConfig):
    return {f.name: getattr(config, f.name) for f in fields(config)}


def _prepare_drop(config: NetworkConfig, drop: int):
    net = generate_network(config, _stream(config.seed, drop, 0))
    corr = assemble_correlation_set(net, config)
    return corr, estimation_statistics(corr, config.rho_tr)


def _spectral_drop(config: NetworkConfig, drop: int, tol, max_iter):
    # every R_jli is beta_jli times the same correlation matrix
    net = generate_network(config, _stream(config.seed, drop, 0))
    lam = np.linalg.eigvalsh(exponential_correlation(config.M, config.r).real)
    r_diag = 10.0 ** (net.beta_db[..., None] / 10.0) * lam
    return spectral_deterministic_equivalent(r_diag, config.rho_tr, config.rho, tol=tol, max_iter=max_iter)[:3]


def _mc_drop(config, drop, corr, stats, n_blocks, threads):
    L, K = config.L, config.K
    rho_ul = config.rho_ul
    gamma = np.empty((n_blocks, L, K))
    first = np.empty((n_blocks, L, K))
    loss = np.empty((n_blocks, L, K))

    def one(b):
        blk = sample_block(corr, stats, config.rho_tr, _stream(config.seed, drop, 1, b))
        for j in range(L):
            gamma[b, j], first[b, j], loss[b, j] = block_sinr_terms(blk.h_hat[j], stats.Z[j], rho_ul, j)
        if not np.all(np.isfinite(gamma[b])):
            raise MonteCarloError(f"non-finite SINR in drop {drop}, block {b}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(one, range(n_blocks)))
    else:
        for b in range(n_blocks):
            one(b)
    return gamma, first, loss


def run_experiment(config: NetworkConfig, n_blocks=500, n_drops=1, monte_carlo=True, detequiv=True,
                   threads=1, keep_blocks=False, tol=1e-10, max_iter=500, spectral=False) -> ExperimentResult:
    """Run the Monte Carlo and/or deterministic-equivalent engines over
    ``n_drops`` independent UE drops.

    ``spectral=True`` evaluates the deterministic equivalent in the common
    eigenbasis of the correlation model, which needs no M x M statistics and
    so reaches much larger networks.
    """
    if n_blocks < 1 or n_drops < 1:
        raise ValueError("n_blocks and n_drops must be at least 1")
    t0 = time.perf_counter()
    L, K = config.L, config.K
    shape = (n_drops, L, K)
    res = ExperimentResult(config, n_blocks if monte_carlo else 0, n_drops)
    if monte_carlo:
        res.sinr_mc, res.sinr_stderr = np.empty(shape), np.empty(shape)
        res.se_mc, res.se_mc_first = np.empty(shape), np.empty(shape)
        res.term1_mc, res.term2_mc = np.empty(shape), np.empty(shape)
        if keep_blocks:
            res.gamma_blocks = np.empty((n_drops, n_blocks, L, K))
    if detequiv:
        res.gamma_bar, res.se_detequiv = np.empty(shape), np.empty(shape)
        res.term1_detequiv, res.term2_detequiv = np.empty(shape), np.empty(shape)

    # one BLAS thread per worker keeps results independent of the thread count
    with threadpool_limits(limits=1):
        for d in range(n_drops):
            if monte_carlo or not spectral:
                corr, stats = _prepare_drop(config, d)
            if monte_carlo:
                g, f1, f2 = _mc_drop(config, d, corr, stats, n_blocks, threads)
                res.sinr_mc[d] = g.mean(axis=0)
                res.sinr_stderr[d] = g.std(axis=0, ddof=1) / math.sqrt(n_blocks) if n_blocks > 1 else np.nan
                res.se_mc[d] = config.prelog * np.log2(1.0 + g).mean(axis=0)
                res.se_mc_first[d] = config.prelog * np.log2(1.0 + f1).mean(axis=0)
                res.term1_mc[d] = f1.mean(axis=0)
                res.term2_mc[d] = f2.mean(axis=0)
                if keep_blocks:
                    res.gamma_blocks[d] = g
            if detequiv:
                if spectral:
                    g, t1, t2 = _spectral_drop(config, d, tol, max_iter)
                else:
                    de = deterministic_equivalent(stats, config.rho, tol=tol, max_iter=max_iter)
                    g, t1, t2 = de.gamma_bar, de.first_term_bar, de.loss_bar
                res.gamma_bar[d] = g
                res.se_detequiv[d] = config.prelog * np.log2(1.0 + g)
                res.term1_detequiv[d] = t1
                res.term2_detequiv[d] = t2
    res.wall_time = time.perf_counter() - t0
    log.info("L=%d K=%d M=%d: %d drops x %d blocks in %.2fs", L, K, config.M, n_drops,
             res.n_blocks, res.wall_time)
    return res


def run_monte_carlo(config: NetworkConfig, n_blocks=500, n_drops=1, threads=1, keep_blocks=True):
    return run_experiment(config, n_blocks, n_drops, monte_carlo=True, detequiv=False,
                          threads=threads, keep_blocks=keep_blocks)


def run_detequiv(config: NetworkConfig, n_drops=1, tol=1e-10, max_iter=500, spectral=False):
    return run_experiment(config, 1, n_drops, monte_carlo=False, detequiv=True, tol=tol, max_iter=max_iter,
                          spectral=spectral)


def mean_db(x, floor=1e-300):
    """Average over UEs of each UE's term in dB."""
    return float(np.mean(10.0 * np.log10(np.maximum(x, floor))))


def sweep(config_base: NetworkConfig, k_values=(4, 8, 16), ratios=(2, 4), n_blocks=500, n_drops=10,
          threads=1, monte_carlo=True):
    """Run every (M/K ratio, K) point; returns ``[(ratio, K, ExperimentResult), ...]``."""
    out = []
    for ratio in ratios:
        for K in k_values:
            cfg = config_base.with_(K=int(K), M=int(ratio * K))
            out.append((ratio, K, run_experiment(cfg, n_blocks, n_drops, monte_carlo=monte_carlo,
                                                 threads=threads)))
    return out


def fig1_rows(points):
    return [
        {"ratio": ratio, "K": K, "M": res.config.M, "sumSE_mc": res.sum_se_mc,
         "sumSE_detequiv": res.sum_se_detequiv, "sumSE_mc_firstterm_only": res.sum_se_mc_first}
        for ratio, K, res in points
    ]


def fig2_rows(points):
    rows = []
    for ratio, K, res in points:
        mc = res.term1_mc is not None
        rows.append({
            "ratio": ratio, "K": K,
            "term1_db_mc": mean_db(res.term1_mc) if mc else None,
            "term2_db_mc": mean_db(res.term2_mc) if mc else None,
            "term1_db_detequiv": mean_db(res.term1_detequiv),
            "term2_db_detequiv": mean_db(res.term2_detequiv),
        })
    return rows


def run_fig1(config_base, **kw):
    return fig1_rows(sweep(config_base, **kw))


def run_fig2(config_base, **kw):
    return fig2_rows(sweep(config_base, **kw))


def ue_rows(res: ExperimentResult):
    rows = []
    D, L, K = res.n_drops, res.config.L, res.config.K

    def get(name, idx):
        a = getattr(res, name)
        return None if a is None else float(a[idx])

    for d in range(D):
        for j in range(L):
            for k in range(K):
                idx = (d, j, k)
                rows.append({"drop": d, "cell": j, "ue": k, "sinr_mc": get("sinr_mc", idx),
                             "sinr_stderr": get("sinr_stderr", idx), "gamma_bar": get("gamma_bar", idx),
                             "se_mc": get("se_mc", idx), "se_detequiv": get("se_detequiv", idx),
                             "term1_mc": get("term1_mc", idx), "term2_mc": get("term2_mc", idx),
                             "term1_detequiv": get("term1_detequiv", idx),
                             "term2_detequiv": get("term2_detequiv", idx)})
    return rows


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit(result, path, format="csv", columns=None):
    """Write an :class:`ExperimentResult` or a list of row dicts as CSV or JSON.

    Floats are written with ``repr`` so they read back bit-exact. ``path``
    may be ``"-"`` for stdout.
    """
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")
    if isinstance(result, ExperimentResult):
        rows = ue_rows(result)
        columns = columns or UE_COLUMNS
        payload = result.to_dict()
    else:
        rows = list(result)
        if columns is None:
            if not rows:
                raise ValueError("columns are required for an empty row list")
            columns = tuple(rows[0])
        payload = {"columns": list(columns), "rows": rows}
    target = nullcontext(sys.stdout) if path == "-" else open(path, "w", encoding="utf-8", newline="")
    with target as f:
        if format == "json":
            json.dump(payload, f, indent=1, allow_nan=True)
            f.write("\n")
        else:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_cell(row.get(c)) for c in columns])
