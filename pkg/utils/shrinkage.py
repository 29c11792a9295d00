# utils/shrinkage.py
# -*- coding: utf-8 -*-
"""
Shrinkage 파라미터 σ_s^M 선택.

target 클래스 (Rician power) 와 threshold 이후 noise 클래스 사이의
Fisher separability / Mahalanobis 거리를 계산하고,
"target 손실 β 분위수 z_s 에서 noise 쪽 거리가 target 쪽 거리보다 크다"
를 만족하는 가장 큰 σ_s 를 찾는다.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from utils.likelihood import (
    intensity_to_snr,
    power_moments,
    snr_to_intensity,
    solve_threshold,
    target_cdf,
)

logger = logging.getLogger(__name__)

DEFAULT_BETA = 0.05
LOWER_BOUND_RATIO = 0.05  # 탐색 구간 하한 0.05·σ₀
SIGMA_TOL_RATIO = 1e-6
QUANTILE_TOL = 1e-8
MONOTONE_GRID = 64
DEFAULT_SNR_GRID = (6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0)


class InfeasibleShrinkageError(RuntimeError):
    pass


class NonMonotoneIntervalError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeparabilityInputs:
    intensity: float
    sigma0: float
    theta: float
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")
        if self.sigma0 <= 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.intensity < 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")


# ─────────────────────────────────────────────
# 1. separability / 거리
# ─────────────────────────────────────────────

def fisher_separability(intensity: float, sigma0: float, theta: float) -> float:
    two_var = 2.0 * sigma0**2
    snr_lin = intensity**2 / two_var
    return (snr_lin - theta / two_var) ** 2 / (2.0 * (1.0 + snr_lin))


def shrunk_separability(intensity: float, sigma0: float, sigma_s: float, theta: float) -> float:
    if not 0.0 < sigma_s <= sigma0:
        raise ValueError(f"sigma_s must be in (0, sigma0], got {sigma_s}")
    _, var1 = power_moments(intensity, sigma0)
    num = (2.0 * sigma0**2 + intensity**2 - theta - 2.0 * sigma_s**2) ** 2
    return num / (var1 + 4.0 * sigma_s**4)


def mahalanobis_noise(z, sigma_s, theta: float):
    """noise 클래스 (shrinkage 후 평균 θ + 2σ_s², 분산 4σ_s⁴) 까지의 거리."""
    sigma_s = np.asarray(sigma_s, dtype=float)
    return (np.asarray(z, dtype=float) - theta - 2.0 * sigma_s**2) ** 2 / (4.0 * sigma_s**4)


def mahalanobis_target(z, intensity: float, sigma0: float):
    mean, var = power_moments(intensity, sigma0)
    return (np.asarray(z, dtype=float) - mean) ** 2 / var


# ─────────────────────────────────────────────
# 2. 분위수 / 최적 σ_s
# ─────────────────────────────────────────────

def target_quantile(intensity: float, sigma0: float, beta: float, tol: float = QUANTILE_TOL) -> float:
    """target power 의 β 분위수 z_s (quadrature CDF 에 대한 bisection)."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    mean, var = power_moments(intensity, sigma0)
    lo, hi = 0.0, mean + 10.0 * np.sqrt(var)
    while target_cdf(hi, intensity, sigma0) < beta:
        lo, hi = hi, 2.0 * hi
    z_s = optimize.bisect(lambda z: target_cdf(z, intensity, sigma0) - beta, lo, hi, xtol=tol)
    return float(z_s)


def _gap(sigma_s, z_s: float, theta: float, target_distance: float):
    return mahalanobis_noise(z_s, sigma_s, theta) - target_distance


def optimal_sigma(intensity: float, sigma0: float, theta: float, beta: float = DEFAULT_BETA) -> float:
    """S_s0(z_s, σ_s) > S_s1(z_s) 를 만족하는 가장 큰 σ_s ∈ (0, σ₀]."""
    inputs = SeparabilityInputs(intensity=intensity, sigma0=sigma0, theta=theta, beta=beta)
    z_s = target_quantile(inputs.intensity, inputs.sigma0, inputs.beta)
    target_distance = float(mahalanobis_target(z_s, inputs.intensity, inputs.sigma0))

    if _gap(sigma0, z_s, theta, target_distance) > 0:
        return float(sigma0)

    lo = LOWER_BOUND_RATIO * sigma0
    if _gap(lo, z_s, theta, target_distance) <= 0:
        raise InfeasibleShrinkageError(
            f"no feasible sigma_s in ({lo:.4g}, {sigma0:.4g}] "
            f"(SNR {float(intensity_to_snr(intensity, sigma0)):.2f} dB, theta={theta:.4g}, z_s={z_s:.4g})"
        )

    # S_s0 는 2σ_s² < z_s - θ 구간에서 σ_s 에 대해 감소
    spread = z_s - theta
    hi = sigma0 if spread <= 0 else min(sigma0, float(np.sqrt(spread / 2.0)))
    grid = np.linspace(lo, hi, MONOTONE_GRID)
    gaps = _gap(grid, z_s, theta, target_distance)
    if np.any(np.diff(gaps) > 1e-12 * np.maximum(1.0, np.abs(gaps[:-1]))):
        raise NonMonotoneIntervalError(
            f"constraint gap is not monotone on [{lo:.4g}, {hi:.4g}] (theta={theta:.4g}, z_s={z_s:.4g})"
        )

    tol = SIGMA_TOL_RATIO * sigma0
    sigma_s = optimize.bisect(lambda s: float(_gap(s, z_s, theta, target_distance)), lo, hi, xtol=tol)
    # 경계 위의 root 는 조건을 만족하지 않는다
    if _gap(sigma_s, z_s, theta, target_distance) <= 0:
        sigma_s = max(lo, sigma_s - tol)
    return float(sigma_s)


# ─────────────────────────────────────────────
# 3. SNR → σ_s^M 테이블
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class ShrinkageTable:
    sigma0: float
    snr_db: np.ndarray
    sigma_ratio: np.ndarray
    infeasible: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        snr = np.asarray(self.snr_db, dtype=float)
        ratio = np.asarray(self.sigma_ratio, dtype=float)
        if snr.ndim != 1 or snr.size == 0 or snr.shape != ratio.shape:
            raise ValueError("snr_db and sigma_ratio must be non-empty 1-D arrays of the same length")
        if np.any(np.diff(snr) <= 0):
            raise ValueError("snr_db must be strictly increasing")
        if np.any(ratio <= 0) or np.any(ratio > 1):
            raise ValueError("sigma ratios must lie in (0, 1]")
        snr.setflags(write=False)
        ratio.setflags(write=False)
        object.__setattr__(self, "snr_db", snr)
        object.__setattr__(self, "sigma_ratio", ratio)

    def ratio_at(self, snr_db):
        """선형 보간. 최저 SNR 아래는 첫 값, 최고 SNR 위는 1 (σ₀)."""
        snr = np.asarray(snr_db, dtype=float)
        ratio = np.interp(snr, self.snr_db, self.sigma_ratio)
        return np.where(snr > self.snr_db[-1] + 1e-9, 1.0, ratio)

    def sigma_at(self, snr_db):
        return self.sigma0 * self.ratio_at(snr_db)

    def sigma_for_intensity(self, intensity):
        intensity = np.asarray(intensity, dtype=float)
        with np.errstate(divide="ignore"):
            snr = intensity_to_snr(np.maximum(intensity, 0.0), self.sigma0)
        return self.sigma_at(snr)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.sigma_ratio == 1.0))

    def rows(self) -> List[Tuple[float, float]]:
        return [(float(s), float(r)) for s, r in zip(self.snr_db, self.sigma_ratio)]


def build_shrinkage_table(
    snr_grid: Sequence[float] = DEFAULT_SNR_GRID,
    sigma0: float = 0.25,
    beta: float = DEFAULT_BETA,
    theta: Optional[float] = None,
    p_d_target: float = 0.99,
) -> ShrinkageTable:
    """SNR grid 마다 optimal_sigma.

    theta 를 주면 모든 행에 같은 threshold (시나리오 θ), None 이면 행마다 그 SNR 로 solve_threshold.
    feasible 한 σ_s 가 없는 행은 하한 0.05·σ₀ 로 채우고 infeasible 에 기록한다.
    """
    snrs = sorted(float(s) for s in snr_grid)
    ratios: List[float] = []
    infeasible: List[float] = []
    for snr in snrs:
        intensity = float(snr_to_intensity(snr, sigma0))
        row_theta = theta if theta is not None else solve_threshold(intensity, sigma0, p_d_target)
        try:
            sigma = optimal_sigma(intensity, sigma0, row_theta, beta)
        except InfeasibleShrinkageError as e:
            logger.warning("shrinkage row %.2f dB infeasible: %s", snr, e)
            infeasible.append(snr)
            sigma = LOWER_BOUND_RATIO * sigma0
        ratios.append(sigma / sigma0)
        logger.debug("σ_s^M(%.2f dB) = %.4f σ₀ (θ=%.5f)", snr, ratios[-1], row_theta)
    return ShrinkageTable(sigma0=sigma0, snr_db=np.array(snrs), sigma_ratio=np.array(ratios), infeasible=tuple(infeasible))


def constant_table(sigma0: float, snr_grid: Sequence[float] = DEFAULT_SNR_GRID) -> ShrinkageTable:
    """모든 행이 σ₀ 인 테이블 (shrinkage update 가 plain update 와 같아진다)."""
    snrs = np.array(sorted(float(s) for s in snr_grid))
    return ShrinkageTable(sigma0=sigma0, snr_db=snrs, sigma_ratio=np.ones_like(snrs))
