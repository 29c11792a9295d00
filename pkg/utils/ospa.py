# utils/ospa.py
# -*- coding: utf-8 -*-
"""
OSPA (order 1) miss distance.

작은 쪽 집합을 행으로 놓고 cost 행렬을 c 로 padding 한 뒤 Hungarian 으로 최적 할당.
합은 math.fsum 으로 계산해서 인자 순서를 바꿔도 결과가 비트 단위로 같다.
"""

import math
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

# 거리 cut-off: 위치 5R, 속도 2D
POSITION_CUTOFF_CELLS = 5
VELOCITY_CUTOFF_CELLS = 2


def as_point_set(points) -> np.ndarray:
    """list / 배열 → (k, dim) float 배열. 빈 집합은 (0, 0)."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0))
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"point set must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point set contains non-finite values")
    return arr


def cutoff_distance(q, y, c: float) -> float:
    if c <= 0:
        raise ValueError(f"cut-off must be positive, got {c}")
    diff = np.atleast_1d(np.asarray(q, dtype=float) - np.asarray(y, dtype=float))
    return float(min(c, np.linalg.norm(diff)))


def _set_key(points: np.ndarray) -> Tuple:
    return tuple(sorted(tuple(row) for row in points.tolist()))


def ospa_components(Q, Y, c: float) -> Tuple[float, float, float]:
    """(total, localisation, cardinality). total = localisation + cardinality."""
    if c <= 0:
        raise ValueError(f"cut-off must be positive, got {c}")
    Q, Y = as_point_set(Q), as_point_set(Y)
    m, n = len(Q), len(Y)
    if m == 0 and n == 0:
        return 0.0, 0.0, 0.0
    if m and n and Q.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {Q.shape[1]} vs {Y.shape[1]}")

    # 행 = 작은 집합. 크기가 같으면 정렬 키로 순서를 고정
    if m > n or (m == n and _set_key(Q) > _set_key(Y)):
        Q, Y = Y, Q
        m, n = n, m

    if m == 0:
        return float(c), 0.0, float(c)

    diff = Q[:, None, :] - Y[None, :, :]
    cost = np.full((n, n), float(c))
    cost[:m] = np.minimum(c, np.sqrt(np.sum(diff**2, axis=2)))
    rows, cols = linear_sum_assignment(cost)
    matched = rows < m
    local_sum = math.fsum(cost[rows[matched], cols[matched]].tolist())

    localisation = local_sum / n
    cardinality = c * (n - m) / n
    total = (local_sum + c * (n - m)) / n
    return total, localisation, cardinality


def ospa(Q, Y, c: float) -> float:
    return ospa_components(Q, Y, c)[0]


def ospa_series(estimates: Sequence, truths: Sequence, c: float) -> np.ndarray:
    """스텝별 OSPA. estimates[k], truths[k] 는 점 집합."""
    if len(estimates) != len(truths):
        raise ValueError("estimate and truth sequences must have the same length")
    return np.array([ospa(q, y, c) for q, y in zip(estimates, truths)])
