"""Synthetic correlation sets with known structure."""

from __future__ import annotations

import numpy as np

from .network import CorrelationSet


def random_psd(rng, M, rank=None, scale=1.0):
    rank = M if rank is None else rank
    G = (rng.standard_normal((M, rank)) + 1j * rng.standard_normal((M, rank))) / np.sqrt(2 * rank)
    R = scale * (G @ G.conj().T)
    return 0.5 * (R + R.conj().T)


def random_correlation_set(rng, L, K, M, spread_db=10.0) -> CorrelationSet:
    """Full-rank random covariances with log-uniform powers over ``spread_db``."""
    R = np.empty((L, L, K, M, M), dtype=complex)
    for idx in np.ndindex(L, L, K):
        R[idx] = random_psd(rng, M, scale=10 ** (-spread_db * rng.uniform() / 10))
    return CorrelationSet(R)


def uncorrelated_set(L, K, M, alpha) -> CorrelationSet:
    """R_jji = I and R_jli = alpha I for l != j."""
    gains = np.where(np.eye(L, dtype=bool), 1.0, alpha)
    R = gains[:, :, None, None, None] * np.broadcast_to(np.eye(M), (L, L, K, M, M))
    return CorrelationSet(R.astype(complex))


def block_orthogonal_set(rng, L, K, M) -> CorrelationSet:
    """UEs of cell l only excite antenna block l, so pilot-sharing
    covariances are mutually orthogonal: R_{jl'k} R_{jlk} = 0 for l' != l."""
    if M % L:
        raise ValueError("M must be a multiple of L")
    n = M // L
    R = np.zeros((L, L, K, M, M), dtype=complex)
    for j, l, i in np.ndindex(L, L, K):
        s = slice(l * n, (l + 1) * n)
        R[j, l, i, s, s] = random_psd(rng, n, scale=rng.uniform(0.2, 1.0))
    return CorrelationSet(R)


def diagonal_set(rng, L, K, M, low=0.05, high=1.0) -> CorrelationSet:
    """Diagonal covariances with random per-antenna profiles."""
    d = rng.uniform(low, high, size=(L, L, K, M))
    R = np.zeros((L, L, K, M, M), dtype=complex)
    R[..., np.arange(M), np.arange(M)] = d
    return CorrelationSet(R)
