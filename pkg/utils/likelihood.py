# utils/likelihood.py
# -*- coding: utf-8 -*-
"""
셀 하나의 power 측정값 z 에 대한 확률 모델.

- SNR(dB) ↔ target intensity I 변환
- target likelihood (Rician power, log 도메인 계산)
- noise density (지수분포), threshold 이후의 truncated noise density
- detection probability (Marcum Q₁ 를 quadrature 로 계산)
- threshold 선택 (p_D = 0.99 가 되는 가장 큰 θ) 과 평균 clutter 개수 λ

모든 density 는 log 형태도 같이 제공한다 (filter update 에서 사용).
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy import integrate, optimize, special

logger = logging.getLogger(__name__)

# quadrature 허용오차
QUAD_EPSABS = 1e-11
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200

THRESHOLD_TOL = 1e-8


class ThresholdSolveError(RuntimeError):
    pass


# ─────────────────────────────────────────────
# 1. SNR ↔ intensity
# ─────────────────────────────────────────────

def snr_to_intensity(snr_db, sigma0: float):
    """SNR = 10·log10(I²/(2σ₀²)) 의 역함수. I = sqrt(2σ₀²·10^(SNR/10))."""
    if sigma0 <= 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    return np.sqrt(2.0 * sigma0**2 * np.power(10.0, np.asarray(snr_db, dtype=float) / 10.0))


def intensity_to_snr(intensity, sigma0: float):
    if sigma0 <= 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    intensity = np.asarray(intensity, dtype=float)
    return 10.0 * np.log10(intensity**2 / (2.0 * sigma0**2))


# ─────────────────────────────────────────────
# 2. density
# ─────────────────────────────────────────────

def log_bessel_i0(x):
    """log I₀(x). i0e(x) = exp(-|x|)·I₀(x) 라서 큰 x 에서도 overflow 없음."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.log(special.i0e(x)) + x


def target_log_likelihood(z, intensity, sigma0: float):
    """log g(z|x) = -log(2σ₀²) - (z+I²)/(2σ₀²) + log I₀(I·√z/σ₀²)."""
    z = np.asarray(z, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    two_var = 2.0 * sigma0**2
    arg = intensity * np.sqrt(np.maximum(z, 0.0)) / sigma0**2
    return -np.log(two_var) - (z + intensity**2) / two_var + log_bessel_i0(arg)


def target_likelihood(z, intensity, sigma0: float):
    return np.exp(target_log_likelihood(z, intensity, sigma0))


def noise_log_density(z, sigma0: float):
    z = np.asarray(z, dtype=float)
    two_var = 2.0 * sigma0**2
    return -np.log(two_var) - z / two_var


def noise_density(z, sigma0: float):
    """p₀(z) = 1/(2σ₀²)·exp(-z/(2σ₀²))."""
    return np.exp(noise_log_density(z, sigma0))


def truncated_noise_log_density(z, sigma, theta: float):
    z = np.asarray(z, dtype=float)
    if np.any(z < theta):
        raise ValueError(f"truncated noise density is defined for z >= theta ({theta}); got min z={np.min(z)}")
    two_var = 2.0 * np.asarray(sigma, dtype=float) ** 2
    return -np.log(two_var) - (z - theta) / two_var


def truncated_noise_density(z, sigma, theta: float):
    """p₀*(z; σ) = 1/(2σ²)·exp(-(z-θ)/(2σ²)), z ≥ θ 에서 적분값 1."""
    return np.exp(truncated_noise_log_density(z, sigma, theta))


def clutter_intensity(z, clutter_rate: float, sigma, theta: float):
    """measurement 당 clutter 항 κ = λ·p₀*(z; σ).

    셀 위치에 대한 1/N 은 곱하지 않는다. σ = σ₀ 이면 λ·p₀*(z; σ₀) = N·p₀(z).
    """
    return clutter_rate * truncated_noise_density(z, sigma, theta)


def power_moments(intensity: float, sigma0: float) -> Tuple[float, float]:
    """target power 의 (평균, 분산) = (2σ₀²+I², 4σ₀²(σ₀²+I²))."""
    mean = 2.0 * sigma0**2 + intensity**2
    var = 4.0 * sigma0**2 * (sigma0**2 + intensity**2)
    return mean, var


# ─────────────────────────────────────────────
# 3. 적분 (CDF, detection probability)
# ─────────────────────────────────────────────

def _quad_target(lo: float, hi: float, intensity: float, sigma0: float) -> float:
    mean, _ = power_moments(intensity, sigma0)
    points = [mean] if lo < mean < hi and math.isfinite(hi) else None
    value, _ = integrate.quad(
        lambda z: math.exp(float(target_log_likelihood(z, intensity, sigma0))),
        lo,
        hi,
        points=points,
        epsabs=QUAD_EPSABS,
        epsrel=QUAD_EPSREL,
        limit=QUAD_LIMIT,
    )
    return value


def target_cdf(z: float, intensity: float, sigma0: float) -> float:
    """∫₀^z g(t|x) dt. 꼬리 쪽은 1 - ∫_z^∞ 로 계산해서 상쇄 오차를 줄인다."""
    if z <= 0:
        return 0.0
    mean, _ = power_moments(intensity, sigma0)
    if z <= mean:
        return min(1.0, _quad_target(0.0, z, intensity, sigma0))
    return max(0.0, 1.0 - _quad_target(z, math.inf, intensity, sigma0))


def detection_probability(theta: float, intensity: float, sigma0: float) -> float:
    """p_D = ∫_θ^∞ g(z|x) dz  (= Marcum Q₁(I/σ₀, √θ/σ₀))."""
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    if theta == 0:
        return 1.0
    if math.isinf(theta):
        return 0.0
    mean, _ = power_moments(intensity, sigma0)
    if theta <= mean:
        return max(0.0, 1.0 - _quad_target(0.0, theta, intensity, sigma0))
    return min(1.0, _quad_target(theta, math.inf, intensity, sigma0))


# ─────────────────────────────────────────────
# 4. threshold / clutter 개수
# ─────────────────────────────────────────────

def solve_threshold(
    min_intensity: float,
    sigma0: float,
    p_d_target: float = 0.99,
    tol: float = THRESHOLD_TOL,
) -> float:
    """detection_probability(θ) ≥ p_d_target 를 만족하는 가장 큰 θ (scipy bisect).

    min_intensity 는 시나리오에서 가장 약한 target 의 intensity.
    """
    if not 0.0 < p_d_target < 1.0:
        raise ValueError(f"p_d_target must be in (0, 1), got {p_d_target}")
    if sigma0 <= 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")

    mean, _ = power_moments(min_intensity, sigma0)
    lo = 0.0
    hi = mean + 10.0 * sigma0 * math.sqrt(sigma0**2 + min_intensity**2)
    # p_D 는 θ 에 대해 단조 감소 → hi 가 infeasible 이 될 때까지 늘린다
    for _ in range(60):
        if detection_probability(hi, min_intensity, sigma0) < p_d_target:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ThresholdSolveError("could not bracket the threshold")

    def excess(theta: float) -> float:
        return detection_probability(theta, min_intensity, sigma0) - p_d_target

    sol = optimize.root_scalar(excess, method="bisect", bracket=(lo, hi), xtol=tol)
    if not sol.converged:
        raise ThresholdSolveError(f"threshold bisection did not converge: {sol.flag}")
    theta = sol.root
    # root 가 경계 바깥쪽이면 한 칸 안으로
    if excess(theta) < 0:
        theta = max(lo, theta - tol)

    logger.debug("threshold I=%.5f sigma0=%.3f p_d=%.3f → θ=%.8f", min_intensity, sigma0, p_d_target, theta)
    return theta


def expected_clutter_count(theta: float, sigma0: float, n_cells: int) -> float:
    """λ = N·exp(-θ/(2σ₀²))."""
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    return float(n_cells) * math.exp(-theta / (2.0 * sigma0**2))
