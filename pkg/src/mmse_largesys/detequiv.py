"""Large-system deterministic equivalent of the M-MMSE SINR.

Conventions: ``rho`` is the normalized transmit power with uplink data SNR
``rho / M``, so the regularizer inside T* is ``I / rho``. All per-cell
quantities are indexed ``[j, l, i]`` like the estimation statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq

from .estimation import EstimationStatistics, hermitian_part


class FixedPointError(RuntimeError):
    """Fixed-point iteration hit its iteration cap."""


@dataclass(frozen=True)
class FixedPointSolution:
    mu_star: np.ndarray  # (L, K)
    iterations: int
    residual: float
    converged: bool
    residuals: tuple = field(default=(), repr=False)


def _T_from_mu(Phi_j, Z_j, mu, rho):
    M = Z_j.shape[-1]
    S = np.einsum("lk,lkab->ab", 1.0 / (1.0 + mu), Phi_j) / M + Z_j / M + np.eye(M) / rho
    c = cho_factor(hermitian_part(S), lower=True)
    return hermitian_part(cho_solve(c, np.eye(M, dtype=complex)))


def _traces(Phi_j, T):
    """(1/M) tr(Phi_{jli} T) for every (l, i)."""
    return np.einsum("lkab,ba->lk", Phi_j, T).real / T.shape[-1]


def solve_mu_arrays(Phi_j, Z_j, rho, tol=1e-10, max_iter=500) -> FixedPointSolution:
    """Simple fixed-point iteration from mu = 1.

    ``Phi_j``: (L, K, M, M) self terms at one BS; ``Z_j``: (M, M).
    Stops when every update is below ``tol * max(1, |mu|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    Phi_j = np.asarray(Phi_j, dtype=complex)
    mu = np.ones(Phi_j.shape[:2])
    residuals = []
    for it in range(1, max_iter + 1):
        new = _traces(Phi_j, _T_from_mu(Phi_j, Z_j, mu, rho))
        step = np.abs(new - mu)
        residuals.append(float(step.max()))
        mu = new
        if np.all(step <= tol * np.maximum(1.0, np.abs(mu))):
            return FixedPointSolution(mu, it, residuals[-1], True, tuple(residuals))
    return FixedPointSolution(mu, max_iter, residuals[-1], False, tuple(residuals))


def solve_mu(stats: EstimationStatistics, rho, j, tol=1e-10, max_iter=500) -> FixedPointSolution:
    return solve_mu_arrays(stats.Phi_self[j], stats.Z[j], rho, tol, max_iter)


def compute_T_star(mu_star, stats: EstimationStatistics, rho, j) -> np.ndarray:
    return _T_from_mu(stats.Phi_self[j], stats.Z[j], np.asarray(mu_star), rho)


def compute_B(stats: EstimationStatistics, T_star, j, k) -> np.ndarray:
    """L x L matrix with entries (1/M) tr(Phi_{j l' l k} T*) at ``[l, l']``."""
    X = stats.R[j, :, k] @ T_star  # R_{jlk} T*, (L, M, M)
    # tr(R_{jl'k} Q^-1 R_{jlk} T*) = sum_ab RQinv_{l'}[a, b] X_l[b, a]
    B = np.einsum("pab,lba->lp", stats.RQinv[j, :, k], X) / stats.M
    return B


def gamma_bar(B, j):
    """Return ``(gamma_bar, first_term, loss)``.

    gamma_bar uses the diagonal entry of (I + B)^-1; first_term and loss are
    [B]_jj and the Schur-complement correction, whose difference equals
    gamma_bar.
    """
    B = np.asarray(B)
    L = B.shape[0]
    e = np.zeros(L)
    e[j] = 1.0
    d = np.linalg.solve(np.eye(L) + B, e)[j].real
    if not np.isfinite(d) or d <= 0:
        raise np.linalg.LinAlgError("I + B is singular or indefinite")
    first = B[j, j].real
    others = np.arange(L) != j
    if others.any():
        b = B[others, j]
        S = np.eye(L - 1) + B[np.ix_(others, others)]
        loss = np.vdot(b, np.linalg.solve(S, b)).real
    else:
        loss = 0.0
    return 1.0 / d - 1.0, float(first), float(loss)


@dataclass(frozen=True)
class DetEquivResult:
    mu_star: np.ndarray  # (L, L, K): [j, l, i]
    T_star: np.ndarray  # (L, M, M)
    B: np.ndarray  # (L, K, L, L)
    gamma_bar: np.ndarray  # (L, K)
    first_term_bar: np.ndarray  # (L, K)
    loss_bar: np.ndarray  # (L, K)
    solutions: tuple = field(repr=False, default=())

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.solutions)


def deterministic_equivalent(stats: EstimationStatistics, rho, tol=1e-10, max_iter=500,
                             strict=True) -> DetEquivResult:
    L, K, M = stats.L, stats.K, stats.M
    mu = np.empty((L, L, K))
    T = np.empty((L, M, M), dtype=complex)
    B = np.empty((L, K, L, L), dtype=complex)
    g = np.empty((L, K))
    first = np.empty((L, K))
    loss = np.empty((L, K))
    sols = []
    for j in range(L):
        sol = solve_mu(stats, rho, j, tol, max_iter)
        if strict and not sol.converged:
            raise FixedPointError(f"cell {j}: no convergence after {sol.iterations} iterations "
                                  f"(residual {sol.residual:.3e})")
        sols.append(sol)
        mu[j] = sol.mu_star
        T[j] = compute_T_star(sol.mu_star, stats, rho, j)
        for k in range(K):
            B[j, k] = compute_B(stats, T[j], j, k)
            g[j, k], first[j, k], loss[j, k] = gamma_bar(B[j, k], j)
    return DetEquivResult(mu, T, B, g, first, loss, tuple(sols))


@dataclass(frozen=True)
class BoundCertificate:
    varsigma: float
    eta: float
    eta_degenerate: bool  # min eigenvalue of R - Phi is not positive
    eta_prime: np.ndarray  # (L, K)
    varsigma_prime: np.ndarray  # (L, K)
    first_ratio: np.ndarray  # [B]_jj / ((1/M) tr Phi_jjjk)
    first_lower: float
    first_upper: float
    loss: np.ndarray
    loss_lower: np.ndarray
    loss_upper: np.ndarray

    def first_holds(self, rtol=1e-12):
        lo = self.first_lower * (1 - rtol)
        hi = self.first_upper * (1 + rtol)
        return (self.first_ratio >= lo) & (self.first_ratio <= hi)

    def loss_holds(self, rtol=1e-12):
        return (self.loss >= self.loss_lower * (1 - rtol) - 1e-300) & (self.loss <= self.loss_upper * (1 + rtol))


def compute_bounds(stats: EstimationStatistics, rho, result: DetEquivResult | None = None) -> BoundCertificate:
    """Order-M/K sandwiches for [B]_jj and for the loss term.

    The spread constants take their max / min over every (j, l, i).
    """
    if result is None:
        result = deterministic_equivalent(stats, rho)
    L, K, M = stats.L, stats.K, stats.M
    reg = 1.0 / (K * L * rho)
    E = hermitian_part(stats.R - stats.Phi_self)
    phi_norm = np.linalg.eigvalsh(stats.Phi_self)[..., -1].max()
    err_eig = np.linalg.eigvalsh(E)
    lam_min = err_eig[..., 0].min()
    varsigma = phi_norm + np.abs(err_eig).max() + reg
    eta = lam_min + reg

    # (1/M) tr Phi_{jllk}, shape (L, L, K) indexed [j, l, k]
    tr_phi = np.trace(stats.Phi_self, axis1=-2, axis2=-1).real / M
    own = tr_phi[np.arange(L), np.arange(L)]  # (L, K)
    cross = tr_phi.sum(axis=1) - own
    cross_sq = (tr_phi**2).sum(axis=1) - own**2

    c = M / (K * L)
    eta_p = cross / eta
    varsigma_p = cross_sq / varsigma**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = result.first_term_bar / own
    if L > 1:
        lower = c**2 * varsigma_p / (1 + c * eta_p)
        upper = c**2 * varsigma_p / (1 + c * eta_p / (L - 1))
    else:
        lower = upper = np.zeros((L, K))
    return BoundCertificate(float(varsigma), float(eta), bool(lam_min <= 0), eta_p, varsigma_p,
                            ratio, c / varsigma, c / eta, result.loss_bar, lower, upper)


@dataclass(frozen=True)
class UncorrelatedClosedForm:
    nu: float
    L_bar: float
    mu_star: float
    eta_star: float
    X: float  # [B]_11 = mu_star
    noise: float
    noncoherent: float
    coherent: float
    gamma_bar: float


def closed_form_uncorrelated(M, K, L, alpha, rho, rho_tr) -> UncorrelatedClosedForm:
    """Closed form for R_jji = I and R_jli = alpha I (l != j).

    Here ``rho`` is the per-antenna uplink SNR, i.e. the general engine run
    with ``rho_engine = M * rho`` gives the same result. The returned
    gamma_bar is 1 / (noise + non-coherent + coherent interference).
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    L_bar = 1.0 + alpha * (L - 1)
    L_sq = 1.0 + alpha**2 * (L - 1)  # own plus squared cross gains
    nu = rho_tr / (1.0 + rho_tr * L_bar)
    a2 = alpha**2

    def eta_of(mu):
        return (nu / (1 + mu) + nu * a2 * (L - 1) / (1 + a2 * mu)) / L_bar + 1.0 - nu * L_sq / L_bar

    def t_of(mu):
        return 1.0 / (K / M * L_bar * eta_of(mu) + 1.0 / (M * rho))

    hi = nu * t_of(np.inf) + 1.0
    mu = brentq(lambda m: m - nu * t_of(m), 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    eta = eta_of(mu)
    X = nu * t_of(mu)
    noise = 1.0 / (M * rho * nu)
    noncoh = K / M * L_bar / nu * eta
    coh = alpha * (L_bar - 1.0)
    return UncorrelatedClosedForm(nu, L_bar, mu, eta, X, noise, noncoh, coh, 1.0 / (noise + noncoh + coh))


@dataclass(frozen=True)
class DiagonalClosedForm:
    mu_star: np.ndarray  # (L, L, K)
    varsigma: np.ndarray  # (L, M)
    gamma_bar: np.ndarray | None  # (L, K), two-cell networks only
    iterations: int
    converged: bool


def closed_form_diagonal(r_diag, phi_diag, z_diag, rho, tol=1e-12, max_iter=5000) -> DiagonalClosedForm:
    """Per-antenna solution when every covariance is diagonal.

    ``r_diag``, ``phi_diag``: (L, L, K, M) diagonals of R_jli and Phi_jlli;
    ``z_diag``: (L, M) diagonal of Z_j (without the noise term). The
    per-antenna denominators solve

        s_j(m) = (1/M) sum_{l,i} phi_jli(m) / (1 + mu_jli) + z_j(m) / M + 1/rho,
        mu_jli = (1/M) sum_m phi_jli(m) / s_j(m).
    """
    r = np.asarray(r_diag, dtype=float)
    phi = np.asarray(phi_diag, dtype=float)
    z = np.asarray(z_diag, dtype=float)
    if np.any(r < 0) or np.any(phi < 0) or np.any(z < 0):
        raise ValueError("diagonal profiles must be nonnegative")
    L, _, K, M = phi.shape

    def s_of(mu):
        return np.einsum("jli,jlim->jm", 1.0 / (1.0 + mu), phi) / M + z / M + 1.0 / rho

    s = s_of(np.ones((L, L, K)))
    converged = False
    for it in range(1, max_iter + 1):
        new = s_of(np.einsum("jlim,jm->jli", phi, 1.0 / s) / M)
        done = np.all(np.abs(new - s) <= tol * np.abs(new))
        s = new
        if done:
            converged = True
            break
    mu = np.einsum("jlim,jm->jli", phi, 1.0 / s) / M

    g = None
    if L == 2:
        g = np.empty((L, K))
        with np.errstate(divide="ignore", invalid="ignore"):
            for j in range(2):
                # [B]_{l,l'} = (1/M) sum_m phi_jlk(m) / s_j(m) * r_jl'k(m) / r_jlk(m)
                ratio = np.where(r[j][:, None] > 0, r[j][None, :] / r[j][:, None], 0.0)  # [l, l', k, m]
                Bj = np.einsum("lkm,lpkm,m->klp", phi[j], ratio, 1.0 / s[j]) / M
                o = 1 - j
                g[j] = Bj[:, j, j] - Bj[:, j, o] * Bj[:, o, j] / (1.0 + Bj[:, o, o])
    return DiagonalClosedForm(mu, s, g, it, converged)


def spectral_deterministic_equivalent(r_diag, rho_tr, rho, tol=1e-12, max_iter=5000):
    """Deterministic equivalent when every R_jli shares one eigenbasis.

    ``r_diag`` (L, L, K, M) holds the eigenvalues of R_jli in that basis;
    all statistics are then diagonal too, so memory stays O(L^2 K M).
    Returns ``(gamma_bar, first_term_bar, loss_bar, mu_star)``.
    """
    r = np.asarray(r_diag, dtype=float)
    L, _, K, M = r.shape
    q = r.sum(axis=1) + 1.0 / rho_tr  # (L, K, M), eigenvalues of Q_ji
    phi = r**2 / q[:, None]
    z = (r - phi).sum(axis=(1, 2))
    sol = closed_form_diagonal(r, phi, z, rho, tol=tol, max_iter=max_iter)
    if not sol.converged:
        raise FixedPointError(f"no convergence after {sol.iterations} iterations")
    # [B]_{l,l'} = (1/M) sum_m r_jl'k r_jlk / (q_jk s_j)
    w = r / np.sqrt(q[:, None] * sol.varsigma[:, None, None, :])
    B = np.einsum("jlkm,jpkm->jklp", w, w) / M
    g, first, loss = (np.empty((L, K)) for _ in range(3))
    for j in range(L):
        for k in range(K):
            g[j, k], first[j, k], loss[j, k] = gamma_bar(B[j, k], j)
    return g, first, loss, sol.mu_star
