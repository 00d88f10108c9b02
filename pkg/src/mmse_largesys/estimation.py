"""MMSE channel estimation under pilot contamination.

Array layout follows :class:`~mmse_largesys.network.CorrelationSet`: the
leading axes ``[j, l, i]`` mean "BS j, UE i of cell l". UE i of every cell
uses pilot i.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .network import CorrelationSet


def hermitian_part(X):
    return 0.5 * (X + X.conj().swapaxes(-1, -2))


def compute_Q(corr: CorrelationSet, j: int, i: int, rho_tr: float) -> np.ndarray:
    """Received pilot covariance at BS j for pilot i (per unit pilot power)."""
    if rho_tr <= 0:
        raise ValueError("rho_tr must be positive")
    return corr.R[j, :, i].sum(axis=0) + np.eye(corr.M) / rho_tr


def compute_Phi(corr: CorrelationSet, Q, j: int, l_prime: int, l: int, i: int) -> np.ndarray:
    """Cross-covariance E{h_hat_{j l' i} h_hat_{j l i}^H} = R_{jl'i} Q^-1 R_{jli}."""
    try:
        c = cho_factor(Q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Q is not numerically positive definite") from exc
    # Q^-1 R_{jli}; R_{jl'i} on the left
    return corr.R[j, l_prime, i] @ cho_solve(c, corr.R[j, l, i])


def compute_Z(corr: CorrelationSet, Phi_self: np.ndarray, j: int) -> np.ndarray:
    """Sum of estimation-error covariances seen at BS j.

    ``Phi_self`` is either the full ``(L, L, K, M, M)`` self-term array or the
    ``(L, K, M, M)`` slice for BS j.
    """
    P = Phi_self[j] if Phi_self.ndim == 5 else Phi_self
    return hermitian_part((corr.R[j] - P).sum(axis=(0, 1)))


def psd_sqrt(R, tol=1e-10):
    """Hermitian square root by eigendecomposition, clipping round-off
    negatives. Works on stacks of matrices."""
    lam, V = np.linalg.eigh(hermitian_part(R))
    norms = np.abs(lam).max(axis=-1, keepdims=True)
    if np.any(lam < -tol * norms):
        raise ValueError("matrix is indefinite beyond round-off; cannot take a square root")
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)[..., None, :]) @ V.conj().swapaxes(-1, -2)


@dataclass(frozen=True)
class EstimationStatistics:
    R: np.ndarray  # (L, L, K, M, M)
    Q: np.ndarray  # (L, K, M, M)
    RQinv: np.ndarray  # (L, L, K, M, M): R_{jli} Q_{ji}^-1, the MMSE filter
    Phi_self: np.ndarray  # (L, L, K, M, M): Phi_{jlli}
    Z: np.ndarray  # (L, M, M)
    rho_tr: float

    @property
    def L(self) -> int:
        return self.R.shape[0]

    @property
    def K(self) -> int:
        return self.R.shape[2]

    @property
    def M(self) -> int:
        return self.R.shape[-1]

    @cached_property
    def R_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.R)

    def phi(self, j, l_prime, l, i):
        return self.RQinv[j, l_prime, i] @ self.R[j, l, i]

    def phi_cross(self, j, k):
        """All ``Phi_{j l' l k}`` for one pilot, shape ``(L, L, M, M)`` indexed ``[l', l]``."""
        return self.RQinv[j, :, None, k] @ self.R[j, None, :, k]


def estimation_statistics(corr: CorrelationSet, rho_tr: float) -> EstimationStatistics:
    L, K, M = corr.L, corr.K, corr.M
    if rho_tr <= 0:
        raise ValueError("rho_tr must be positive")
    R = corr.R
    Q = np.empty((L, K, M, M), dtype=complex)
    RQinv = np.empty_like(R)
    for j in range(L):
        for i in range(K):
            Q[j, i] = compute_Q(corr, j, i, rho_tr)
            c = cho_factor(Q[j, i], lower=True)
            # R Q^-1 = (Q^-1 R)^H since both are Hermitian
            RQinv[j, :, i] = cho_solve(c, np.concatenate(R[j, :, i], axis=1)).reshape(M, L, M).transpose(1, 2, 0).conj()
    Phi_self = hermitian_part(RQinv @ R)
    Z = np.stack([compute_Z(corr, Phi_self, j) for j in range(L)])
    return EstimationStatistics(R, Q, RQinv, Phi_self, Z, float(rho_tr))


@dataclass(frozen=True)
class ChannelBlock:
    h: np.ndarray  # (L, L, K, M)
    h_hat: np.ndarray  # (L, L, K, M)

    @property
    def h_tilde(self) -> np.ndarray:
        return self.h - self.h_hat


def complex_normal(rng: np.random.Generator, shape):
    """CN(0, 1) entries: real and imaginary parts each of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def sample_block(corr: CorrelationSet, stats: EstimationStatistics, rho_tr: float, rng) -> ChannelBlock:
    """Draw one coherence block of true channels and their MMSE estimates."""
    L, K, M = corr.L, corr.K, corr.M
    if stats.R.shape != corr.R.shape:
        raise ValueError("statistics do not match the correlation set")
    w = complex_normal(rng, (L, L, K, M))
    n = complex_normal(rng, (L, K, M))
    h = (stats.R_sqrt @ w[..., None])[..., 0]
    y = h.sum(axis=1) + n / np.sqrt(rho_tr)  # (L, K, M) received pilot per BS
    h_hat = (stats.RQinv @ y[:, None, :, :, None])[..., 0]
    return ChannelBlock(h, h_hat)


# Binary cache layout (all little-endian):
#   8 bytes  magic b"MMSESTAT"
#   3 x u32  L, K, M
#   f64      rho_tr
#   then complex128 arrays, row-major, real/imag interleaved:
#   R (L,L,K,M,M), Q (L,K,M,M), RQinv (L,L,K,M,M), Phi_self (L,L,K,M,M), Z (L,M,M)
_MAGIC = b"MMSESTAT"
_HEADER = struct.Struct("<8s3Id")


def dump_statistics(stats: EstimationStatistics, path):
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, stats.L, stats.K, stats.M, stats.rho_tr))
        for arr in (stats.R, stats.Q, stats.RQinv, stats.Phi_self, stats.Z):
            f.write(np.ascontiguousarray(arr, dtype="<c16").tobytes())


def load_statistics(path) -> EstimationStatistics:
    with open(path, "rb") as f:
        raw = f.read()
    magic, L, K, M, rho_tr = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not an estimation-statistics dump")
    shapes = [(L, L, K, M, M), (L, K, M, M), (L, L, K, M, M), (L, L, K, M, M), (L, M, M)]
    arrays, offset = [], _HEADER.size
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<c16", count=n, offset=offset).reshape(shape).astype(complex))
        offset += 16 * n
    if offset != len(raw):
        raise ValueError(f"{path}: unexpected trailing bytes")
    return EstimationStatistics(*arrays, rho_tr=rho_tr)
