"""M-MMSE receive combining and the instantaneous effective SINR.

The SINR of UE k in cell j is computed three ways that agree in exact
arithmetic: the quadratic form in U_jk, the conditional-MSE form built on
A_jk (which excludes every pilot-sharing estimate), and the difference of
the pilot-independent term and the contamination-correlation loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .estimation import ChannelBlock


@dataclass(frozen=True)
class SINRBreakdown:
    gamma: float
    mse: float
    first_term: float
    loss_term: float


def _gram(vectors):
    """sum_n x_n x_n^H for rows x_n of a (..., N, M) array."""
    return np.einsum("...na,...nb->...ab", vectors, vectors.conj())


def _others_mask(L, K, j, k):
    mask = np.ones((L, K), dtype=bool)
    mask[j, k] = False
    return mask


def _U(hj, Z_j, rho_ul, j, k):
    L, K, M = hj.shape
    return _gram(hj[_others_mask(L, K, j, k)]) + Z_j + np.eye(M) / rho_ul


def _A(hj, Z_j, rho_ul, k):
    L, K, M = hj.shape
    keep = np.ones(K, dtype=bool)
    keep[k] = False
    return _gram(hj[:, keep].reshape(-1, M)) + Z_j + np.eye(M) / rho_ul


def _check(rho_ul):
    if rho_ul <= 0:
        raise ValueError("rho_ul must be positive")


def mmse_combiner(block: ChannelBlock, Z_j, rho_ul, j, k) -> np.ndarray:
    _check(rho_ul)
    hj = block.h_hat[j]
    M = hj.shape[-1]
    C = _gram(hj.reshape(-1, M)) + Z_j + np.eye(M) / rho_ul
    return cho_solve(cho_factor(C, lower=True), hj[j, k])


def sinr_generic(v, block: ChannelBlock, Z_j, rho_ul, j, k) -> float:
    """Effective SINR of an arbitrary combining vector ``v``."""
    _check(rho_ul)
    v = np.asarray(v)
    if not np.any(v):
        raise ValueError("combining vector must be nonzero")
    hj = block.h_hat[j]
    num = abs(np.vdot(v, hj[j, k])) ** 2
    den = np.vdot(v, _U(hj, Z_j, rho_ul, j, k) @ v).real
    return float(num / den)


def sinr_quadratic(block: ChannelBlock, Z_j, rho_ul, j, k) -> float:
    _check(rho_ul)
    hj = block.h_hat[j]
    h = hj[j, k]
    x = cho_solve(cho_factor(_U(hj, Z_j, rho_ul, j, k), lower=True), h)
    return float(np.vdot(h, x).real)


def _pilot_gram(hj, Z_j, rho_ul, k):
    """W = H_jk^H A_jk^-1 H_jk for the L estimates sharing pilot k."""
    H = hj[:, k].T  # (M, L)
    X = cho_solve(cho_factor(_A(hj, Z_j, rho_ul, k), lower=True), H)
    W = H.conj().T @ X
    return 0.5 * (W + W.conj().T)


def sinr_via_mse(block: ChannelBlock, Z_j, rho_ul, j, k):
    """Return ``(gamma, mse)`` with gamma = 1/mse - 1."""
    _check(rho_ul)
    W = _pilot_gram(block.h_hat[j], Z_j, rho_ul, k)
    L = W.shape[0]
    e = np.zeros(L)
    e[j] = 1.0
    mse = float(cho_solve(cho_factor(np.eye(L) + W, lower=True), e)[j].real)
    return 1.0 / mse - 1.0, mse


def _split(W, j):
    others = np.arange(W.shape[-1]) != j
    first = W[..., j, j].real
    if not others.any():
        return first, np.zeros_like(first)
    b = W[..., others, j]
    S = np.eye(others.sum()) + W[..., others, :][..., :, others]
    loss = np.einsum("...a,...a->...", b.conj(), np.linalg.solve(S, b[..., None])[..., 0]).real
    return first, loss


def sinr_decomposition(block: ChannelBlock, Z_j, rho_ul, j, k) -> SINRBreakdown:
    _check(rho_ul)
    W = _pilot_gram(block.h_hat[j], Z_j, rho_ul, k)
    first, loss = _split(W, j)
    gamma = float(first - loss)
    return SINRBreakdown(gamma=gamma, mse=1.0 / (1.0 + gamma), first_term=float(first), loss_term=float(loss))


def block_sinr_terms(h_hat_j, Z_j, rho_ul, j):
    """SINR, pilot-independent term and contamination loss for every UE of
    cell j in one block. Batched form of :func:`sinr_decomposition`.

    ``h_hat_j`` has shape ``(L, K, M)``. Returns three length-K arrays.
    """
    L, K, M = h_hat_j.shape
    G = _gram(h_hat_j.reshape(-1, M)) + Z_j + np.eye(M) / rho_ul
    H = h_hat_j.transpose(1, 2, 0)  # (K, M, L): pilot-sharing estimates per k
    A = G - H @ H.conj().swapaxes(-1, -2)
    X = np.linalg.solve(A, H)
    W = H.conj().swapaxes(-1, -2) @ X
    W = 0.5 * (W + W.conj().swapaxes(-1, -2))
    first, loss = _split(W, j)
    return first - loss, first, loss


def complexity_counts(M: int, K: int, L: int, tau_p: int) -> dict:
    """Complex multiplications per coherence block, as ``{form: (estimation, sinr)}``.

    ``"quadratic"`` is the U_jk quadratic form, ``"mse"`` the conditional-MSE form.
    """
    for v in (M, K, L, tau_p):
        if int(v) != v or v < 1:
            raise ValueError("arguments must be positive integers")
    est = M * tau_p + L * M**2
    chol = (M**3 - M) // 3
    quad = (M**2 + M) // 2 * (L * K + 1) + chol
    mse = (M**2 + M) // 2 * (L**2 * (K + 2) + L) + chol + (L**3 - L) // 3
    return {"quadratic": (est, quad), "mse": (est, mse)}
