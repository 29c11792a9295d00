# utils/result_evaluator.py
# -*- coding: utf-8 -*-
"""
MC 결과 테이블 평가기.

- 스텝별 MC 평균 ± 표준오차 (summary.csv)
- trial 별 시간 평균 OSPA
- 두 알고리즘의 paired 비교 (one-sided paired t-test)
- 결과 테이블 규칙 검사 (OSPA 범위, 스텝 누락 등) → (ok, issues)
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

RESULT_COLUMNS = ["trial", "step", "algorithm", "n_hat", "ospa_position", "ospa_velocity", "wall_ms"]
METRICS = ["n_hat", "ospa_position", "ospa_velocity"]


# ── 1. 집계 ──

def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """(algorithm, step) 별 평균과 표준오차."""
    grouped = results.groupby(["algorithm", "step"], sort=True)
    out = grouped.size().rename("n_trials").to_frame()
    for metric in METRICS:
        mean = grouped[metric].mean()
        se = grouped[metric].std(ddof=1) / np.sqrt(grouped[metric].count())
        out[f"{metric}_mean"] = mean
        out[f"{metric}_se"] = se.fillna(0.0)
    return out.reset_index()


def time_averaged(results: pd.DataFrame, metric: str = "ospa_position") -> pd.DataFrame:
    """trial × algorithm 표 (값 = 스텝 평균)."""
    return results.groupby(["trial", "algorithm"])[metric].mean().unstack("algorithm").sort_index()


# ── 2. paired 비교 ──

@dataclass
class PairedComparison:
    metric: str
    algorithm_a: str
    algorithm_b: str
    n_trials: int
    mean_a: float
    mean_b: float
    mean_diff: float
    t_stat: float
    p_less: float        # H1: a < b
    p_two_sided: float

    def a_better(self, alpha: float = 0.05) -> bool:
        return self.p_less < alpha

    def indistinguishable(self, alpha: float = 0.05) -> bool:
        return self.p_two_sided >= alpha

    def to_dict(self) -> Dict:
        return asdict(self)


def paired_comparison(
    results: pd.DataFrame,
    metric: str = "ospa_position",
    algorithm_a: str = "shrinkage",
    algorithm_b: str = "plain",
) -> PairedComparison:
    table = time_averaged(results, metric)
    for name in (algorithm_a, algorithm_b):
        if name not in table.columns:
            raise ValueError(f"no rows for algorithm {name!r}")
    table = table[[algorithm_a, algorithm_b]].dropna()
    if len(table) < 2:
        raise ValueError(f"paired comparison needs at least 2 trials, got {len(table)}")

    a = table[algorithm_a].to_numpy()
    b = table[algorithm_b].to_numpy()
    diff = a - b
    if np.all(diff == diff[0]) and diff[0] == 0:
        # 모든 trial 에서 동일 → 차이 없음
        t_stat, p_less, p_two = 0.0, 0.5, 1.0
    else:
        t_stat, p_less = stats.ttest_rel(a, b, alternative="less")
        _, p_two = stats.ttest_rel(a, b)
    return PairedComparison(
        metric=metric,
        algorithm_a=algorithm_a,
        algorithm_b=algorithm_b,
        n_trials=len(table),
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
        mean_diff=float(diff.mean()),
        t_stat=float(t_stat),
        p_less=float(p_less),
        p_two_sided=float(p_two),
    )


# ── 3. 결과 테이블 규칙 검사 ──

def check_results(
    results: pd.DataFrame,
    duration: int,
    cutoffs: Dict[str, float],
    algorithms: Sequence[str] = (),
) -> Tuple[bool, List[str]]:
    """문제 없으면 (True, []). cutoffs = {"ospa_position": c_pos, "ospa_velocity": c_vel}."""
    issues: List[str] = []

    missing = [c for c in RESULT_COLUMNS if c not in results.columns]
    if missing:
        return False, [f"누락된 컬럼 {missing}"]

    for metric, c in cutoffs.items():
        col = results[metric]
        bad = results[(col < 0) | (col > c + 1e-9)]
        if len(bad):
            issues.append(f"{metric} 범위 [0, {c}] 밖 값 {len(bad)}개")

    if (results["n_hat"] < 0).any():
        issues.append("음수 n_hat 존재")

    expected_steps = set(range(1, duration + 1))
    for (trial, algorithm), rows in results.groupby(["trial", "algorithm"]):
        steps = set(rows["step"].tolist())
        if steps != expected_steps:
            issues.append(f"trial {trial} / {algorithm}: 스텝 누락 {sorted(expected_steps - steps)}")

    for name in algorithms:
        if name not in set(results["algorithm"]):
            issues.append(f"{name} 결과 없음")

    return not issues, issues


def mean_and_stderr(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))
