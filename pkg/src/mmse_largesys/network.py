"""Cellular scenario generation: wrap-around square grid, pathloss with
shadow fading, and exponentially correlated channel covariance matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import toeplitz


class ConfigError(ValueError):
    """Invalid scenario or solver configuration."""


@dataclass(frozen=True)
class NetworkConfig:
    L: int = 4
    K: int = 8
    M: int = 32
    tau_c: int = 200
    r: float = 0.5
    rho_db: float = 114.0
    rho_tr_factor: float = 1.0  # pilot power = rho_tr_factor * K * rho
    cell_side_km: float = 0.4
    shadow_var_db2: float = 10.0
    min_dist_m: float = 10.0
    seed: int = 0
    # read shadow_var_db2 as a standard deviation in dB instead of a variance
    shadow_is_std: bool = field(default=False, compare=True)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("L", "K", "M", "tau_c"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.K > self.tau_c:
            raise ConfigError(f"K={self.K} exceeds tau_c={self.tau_c}")
        if not 0.0 <= self.r < 1.0:
            raise ConfigError(f"correlation factor r must lie in [0, 1), got {self.r}")
        if self.cell_side_km <= 0:
            raise ConfigError("cell_side_km must be positive")
        if self.shadow_var_db2 < 0:
            raise ConfigError("shadow_var_db2 must be nonnegative")
        if self.min_dist_m <= 0:
            raise ConfigError("min_dist_m must be positive")
        if self.rho_tr_factor <= 0:
            raise ConfigError("rho_tr_factor must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        grid_side(self.L)

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @property
    def rho_tr(self) -> float:
        return self.rho_tr_factor * self.K * self.rho

    @property
    def rho_ul(self) -> float:
        return self.rho / self.M

    @property
    def shadow_std_db(self) -> float:
        if self.shadow_is_std:
            return float(self.shadow_var_db2)
        return math.sqrt(self.shadow_var_db2)

    @property
    def prelog(self) -> float:
        return 1.0 - self.K / self.tau_c

    def with_(self, **changes) -> "NetworkConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class NetworkRealization:
    bs_positions: np.ndarray  # (L, 2) km
    ue_positions: np.ndarray  # (L, K, 2) km
    distances_km: np.ndarray  # (L, L, K): [j, l, k] distance UE (l, k) -> BS j
    beta_db: np.ndarray  # (L, L, K): [j, l, k] = beta_{lk}^j
    shadow_db: np.ndarray  # (L, L, K)


@dataclass(frozen=True)
class CorrelationSet:
    """Channel covariances, ``R[j, l, i]`` is the M x M matrix of UE i in
    cell l as seen by BS j."""

    R: np.ndarray  # (L, L, K, M, M) complex

    @property
    def L(self) -> int:
        return self.R.shape[0]

    @property
    def K(self) -> int:
        return self.R.shape[2]

    @property
    def M(self) -> int:
        return self.R.shape[-1]

    def check(self, herm_tol=1e-12, psd_tol=1e-10):
        R = self.R
        scale = np.maximum(np.abs(R).max(axis=(-2, -1)), np.finfo(float).tiny)
        if np.any(np.abs(R - R.conj().swapaxes(-1, -2)).max(axis=(-2, -1)) > herm_tol * scale):
            raise ValueError("correlation matrices are not Hermitian")
        lam = np.linalg.eigvalsh(R)
        norms = np.abs(lam).max(axis=-1)
        if np.any(lam[..., 0] < -psd_tol * norms):
            raise ValueError("correlation matrices are not positive semidefinite")
        if np.any(np.trace(R, axis1=-2, axis2=-1).real <= 0):
            raise ValueError("every correlation matrix needs positive trace")


def grid_side(L: int) -> int:
    g = math.isqrt(int(L))
    if g * g != L:
        raise ConfigError(f"L={L} is not a perfect square; only g x g grids are supported")
    return g


def torus_distance(a, b, side):
    """Minimum distance between points ``a`` and ``b`` on a square torus."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.minimum(d, side - d)
    return np.sqrt(np.sum(d**2, axis=-1))


def pathloss_db(d_km, shadow_db=0.0):
    """Large-scale fading in dB: -148.1 - 37.6 log10(d / 1 km) + shadowing."""
    return -148.1 - 37.6 * np.log10(d_km) + shadow_db


def bs_grid(L: int, cell_side_km: float) -> np.ndarray:
    g = grid_side(L)
    centers = (np.arange(g) + 0.5) * cell_side_km
    xs, ys = np.meshgrid(centers, centers, indexing="xy")
    return np.column_stack([xs.ravel(), ys.ravel()])


def generate_network(config: NetworkConfig, rng: np.random.Generator) -> NetworkRealization:
    """Drop K UEs uniformly in each cell of a g x g wrap-around grid and
    draw log-normal shadowing per link."""
    L, K, side = config.L, config.K, config.cell_side_km
    g = grid_side(L)
    bs = bs_grid(L, side)
    offsets = rng.uniform(-0.5 * side, 0.5 * side, size=(L, K, 2))
    ue = (bs[:, None, :] + offsets) % (g * side)

    dist = torus_distance(ue[None, :, :, :], bs[:, None, None, :], g * side)
    dist = np.maximum(dist, config.min_dist_m / 1000.0)
    shadow = config.shadow_std_db * rng.standard_normal((L, L, K))
    beta_db = pathloss_db(dist, shadow)
    return NetworkRealization(bs, ue, dist, beta_db, shadow)


def exponential_correlation(M: int, r: float) -> np.ndarray:
    """Toeplitz matrix with entries r**|m - n|."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"r must lie in [0, 1), got {r}")
    return toeplitz(float(r) ** np.arange(M)).astype(complex)


def assemble_correlation_set(net: NetworkRealization, config: NetworkConfig) -> CorrelationSet:
    beta = 10.0 ** (np.asarray(net.beta_db) / 10.0)
    if beta.shape != (config.L, config.L, config.K):
        raise ValueError(f"beta shape {beta.shape} does not match config (L={config.L}, K={config.K})")
    T = exponential_correlation(config.M, config.r)
    return CorrelationSet(beta[..., None, None] * T)
