# utils/phd_filter.py
# -*- coding: utf-8 -*-
"""
SMC-PHD track-before-detect filter (plain / shrinkage).

한 스텝 = predict → update → resample → EM 추출.

- predict: CV bootstrap proposal + spawn kernel 혼합, birth 는 측정 셀의 likelihood ratio 비례 (없으면 그리드 균일)
- update: p_D ≡ 1. particle 자기 셀의 측정만 target likelihood 로 설명하고,
          measurement 마다 clutter 항 κ = λ·p₀*(z; σ).
          plain 은 σ = σ₀, shrinkage 는 σ = σ_s^M (known 모드는 전역값, 나머지는 particle 의 I 로 조회)
- resample: systematic, 총 질량 보존
- 상태 추출: sklearn GaussianMixture (round(n̂) 개 성분)
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.mixture import GaussianMixture

from utils.grid import GridSpec, Measurement, MeasurementSet, PowerFrame, extract_measurement_set, flat_cells, state_to_cell
from utils.likelihood import (
    clutter_intensity,
    expected_clutter_count,
    noise_log_density,
    snr_to_intensity,
    solve_threshold,
    target_likelihood,
    target_log_likelihood,
    truncated_noise_density,
)
from utils.runtime import Stopwatch, child_seed
from utils.scenario import ScenarioSpec, TargetState
from utils.shrinkage import ShrinkageTable, build_shrinkage_table, constant_table

logger = logging.getLogger(__name__)

Algorithm = Literal["plain", "shrinkage"]

PARALLEL_CHUNK = 4096


# ─────────────────────────────────────────────
# 1. 설정
# ─────────────────────────────────────────────

class FilterConfig(BaseModel):
    """filter 파라미터. 기본값은 L_k = 2000, J_k = 800 실험 설정."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    algorithm: Algorithm = "shrinkage"
    n_particles: int = Field(2000, ge=1)
    n_birth: int = Field(800, ge=0)
    survival: float = Field(0.99, ge=0.0, le=1.0)
    birth_mass: float = Field(0.2, ge=0.0)
    birth_proposal: Literal["measurement", "uniform"] = "measurement"
    spawn_mass: float = Field(0.05, ge=0.0)
    spawn_pos_std: Optional[float] = Field(None, gt=0)  # None → R/2
    spawn_vel_std: Optional[float] = Field(None, gt=0)  # None → D
    process_noise_std: float = Field(5.0, ge=0.0)
    intensity_jitter: float = Field(0.02, ge=0.0)
    beta: float = Field(0.05, gt=0.0, lt=1.0)
    p_d_target: float = Field(0.99, gt=0.0, lt=1.0)
    table_snr_step: float = Field(1.0, gt=0.0)
    force_sigma0_table: bool = False
    resample_scheme: Literal["systematic", "multinomial"] = "systematic"
    initial_particles: int = Field(0, ge=0)
    initial_mass: float = Field(0.0, ge=0.0)
    em_max_iter: int = Field(100, ge=1)
    deterministic: bool = True
    workers: int = Field(4, ge=1)  # deterministic=False 일 때만 사용


@dataclass(frozen=True)
class IntensityPrior:
    """SNR 증강 상태의 intensity 사전분포.

    known: 값 하나 (jitter 없음), per-target: 값 집합에서 균일 선택, unknown: [I_l, I_h] 균일.
    """

    mode: str
    values: Tuple[float, ...] = ()
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("known", "per-target", "unknown"):
            raise ValueError(f"unknown SNR mode {self.mode!r}")
        if self.mode == "unknown":
            if not 0.0 <= self.low <= self.high:
                raise ValueError(f"intensity range must be nonempty, got [{self.low}, {self.high}]")
        elif not self.values:
            raise ValueError(f"{self.mode} prior needs at least one intensity")

    @property
    def fixed(self) -> bool:
        return self.mode == "known"

    @property
    def bounds(self) -> Tuple[float, float]:
        if self.mode == "unknown":
            return self.low, self.high
        return min(self.values), max(self.values)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.mode == "known":
            return np.full(n, self.values[0])
        if self.mode == "per-target":
            return np.asarray(self.values)[rng.integers(0, len(self.values), size=n)]
        return rng.uniform(self.low, self.high, size=n)

    def clip(self, intensity: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds
        return np.clip(intensity, lo, hi)

    @classmethod
    def from_scenario(cls, spec: ScenarioSpec) -> "IntensityPrior":
        if spec.snr_mode == "unknown":
            lo, hi = spec.snr_span()
            return cls(
                mode="unknown",
                low=float(snr_to_intensity(lo, spec.sigma0)),
                high=float(snr_to_intensity(hi, spec.sigma0)),
            )
        snrs = spec.scheduled_snrs()
        if spec.snr_mode == "known":
            if len(snrs) > 1:
                logger.warning("known SNR mode with several scheduled SNRs %s → using %.2f dB", snrs, snrs[0])
            snrs = snrs[:1]
        return cls(mode=spec.snr_mode, values=tuple(float(snr_to_intensity(s, spec.sigma0)) for s in snrs))


def table_snr_grid(low: float, high: float, step: float = 1.0) -> List[float]:
    """[low, high] 의 정수 간격 SNR + 양 끝."""
    inner = np.arange(np.ceil(low / step) * step, high + 1e-9, step)
    return sorted({float(low), float(high), *(float(v) for v in inner)})


@dataclass(frozen=True)
class FilterModel:
    """한 시나리오에 대해 고정되는 값들 (θ, λ, shrinkage table, intensity prior)."""

    config: FilterConfig
    grid: GridSpec
    sigma0: float
    dt: float
    theta: float
    clutter_rate: float
    table: ShrinkageTable
    prior: IntensityPrior

    @classmethod
    def build(cls, config: FilterConfig, scenario: ScenarioSpec) -> "FilterModel":
        prior = IntensityPrior.from_scenario(scenario)
        snr_lo, snr_hi = scenario.snr_span()
        i_min = float(snr_to_intensity(snr_lo, scenario.sigma0))
        theta = solve_threshold(i_min, scenario.sigma0, config.p_d_target)
        lam = expected_clutter_count(theta, scenario.sigma0, scenario.grid.N)

        grid_snrs = table_snr_grid(snr_lo, snr_hi, config.table_snr_step)
        if config.algorithm == "plain" or config.force_sigma0_table:
            table = constant_table(scenario.sigma0, grid_snrs)
        else:
            table = build_shrinkage_table(grid_snrs, scenario.sigma0, config.beta, theta=theta)

        logger.info(
            "filter model [%s/%s]: θ=%.5f λ=%.1f σ_s/σ₀=%s",
            config.algorithm, prior.mode, theta, lam,
            np.round(table.sigma_ratio, 3).tolist(),
        )
        return cls(
            config=config,
            grid=scenario.grid,
            sigma0=scenario.sigma0,
            dt=scenario.dt,
            theta=theta,
            clutter_rate=lam,
            table=table,
            prior=prior,
        )


# ─────────────────────────────────────────────
# 2. particle 구름
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class Particle:
    state: TargetState
    weight: float


@dataclass
class ParticleCloud:
    """states: (P, 4) [x, vx, y, vy], intensity: (P,), weights: (P,)."""

    states: np.ndarray
    intensity: np.ndarray
    weights: np.ndarray
    time_step: int = 0
    n_persistent: int = 0
    n_birth: int = 0

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 4)
        self.intensity = np.asarray(self.intensity, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = len(self.states)
        if self.intensity.shape != (n,) or self.weights.shape != (n,):
            raise ValueError("states, intensity and weights must describe the same particles")
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("particle weights must be finite and >= 0")

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def particles(self) -> List[Particle]:
        return [
            Particle(state=TargetState.from_array(row, intensity=float(i)), weight=float(w))
            for row, i, w in zip(self.states, self.intensity, self.weights)
        ]

    @classmethod
    def empty(cls, time_step: int = 0) -> "ParticleCloud":
        return cls(states=np.zeros((0, 4)), intensity=np.zeros(0), weights=np.zeros(0), time_step=time_step)


def estimate_cardinality(cloud: ParticleCloud) -> float:
    return float(np.sum(cloud.weights)) if len(cloud) else 0.0


def effective_sample_size(weights: np.ndarray) -> float:
    total = float(np.sum(weights))
    if total <= 0:
        return 0.0
    normed = weights / total
    return float(1.0 / np.sum(normed**2))


def sample_birth(model: FilterModel, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(r, d, b) 그리드 균일 birth. 속도는 radial 성분만."""
    g = model.grid
    r = rng.uniform(g.r_min, g.r_max, size=n)
    d = rng.uniform(g.d_min, g.d_max, size=n)
    b = rng.uniform(g.b_min, g.b_max, size=n)
    return _polar_states(r, d, b), model.prior.sample(rng, n)


def _polar_states(r: np.ndarray, d: np.ndarray, b: np.ndarray) -> np.ndarray:
    cos_b, sin_b = np.cos(b), np.sin(b)
    return np.column_stack([r * cos_b, d * cos_b, r * sin_b, d * sin_b])


def birth_cell_weights(Z: MeasurementSet, model: FilterModel) -> np.ndarray:
    """측정 셀별 g(z|I_min)/p₀(z) 를 합 1 로 정규화."""
    i_ref = model.prior.bounds[0]
    log_ratio = target_log_likelihood(Z.powers, i_ref, model.sigma0) - noise_log_density(Z.powers, model.sigma0)
    ratio = np.exp(log_ratio - np.max(log_ratio))
    return ratio / ratio.sum()


def sample_measurement_birth(model: FilterModel, Z: MeasurementSet, n: int,
                             rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """측정 셀을 birth_cell_weights 비례로 systematic 하게 뽑고 셀 안에서 균일."""
    g = model.grid
    idx = _draw_indices(birth_cell_weights(Z, model), n, rng, "systematic")
    i, j, l = np.unravel_index(Z.cells[idx], g.shape)
    r = g.r_min + (i + rng.random(n)) * g.R
    d = g.d_min + (j + rng.random(n)) * g.D
    b = g.b_min + (l + rng.random(n)) * g.B
    return _polar_states(r, d, b), model.prior.sample(rng, n)


def initialize(model: FilterModel, rng: np.random.Generator, n_particles: Optional[int] = None,
               total_mass: Optional[float] = None) -> ParticleCloud:
    """L0 = 0 이면 빈 구름 (birth 가 채움), 아니면 birth 분포에서 L0 개."""
    n = model.config.initial_particles if n_particles is None else n_particles
    mass = model.config.initial_mass if total_mass is None else total_mass
    if n < 0:
        raise ValueError(f"initial particle count must be >= 0, got {n}")
    if n == 0:
        return ParticleCloud.empty()
    states, intensity = sample_birth(model, n, rng)
    return ParticleCloud(states=states, intensity=intensity, weights=np.full(n, mass / n), n_persistent=n)


# ─────────────────────────────────────────────
# 3. predict
# ─────────────────────────────────────────────

def predict(cloud: ParticleCloud, model: FilterModel, rng: np.random.Generator,
            Z: Optional[MeasurementSet] = None) -> ParticleCloud:
    """Z 를 주고 birth_proposal = "measurement" 이면 birth 를 측정 셀에 둔다."""
    cfg = model.config
    dt = model.dt
    n = len(cloud)

    states = cloud.states.copy()
    intensity = cloud.intensity.copy()
    weights = cloud.weights.copy()

    if n:
        # CV 전진 (spawn kernel 도 CV 전진한 parent 중심)
        states[:, 0] += cloud.states[:, 1] * dt
        states[:, 2] += cloud.states[:, 3] * dt

        survive_spawn = cfg.survival + cfg.spawn_mass
        spawn_frac = cfg.spawn_mass / survive_spawn if survive_spawn > 0 else 0.0
        spawned = rng.random(n) < spawn_frac if spawn_frac > 0 else np.zeros(n, dtype=bool)

        moved = ~spawned
        if cfg.process_noise_std > 0:
            accel = rng.normal(0.0, cfg.process_noise_std, size=(n, 2))
            states[moved, 0] += accel[moved, 0] * dt**2 / 2.0
            states[moved, 1] += accel[moved, 0] * dt
            states[moved, 2] += accel[moved, 1] * dt**2 / 2.0
            states[moved, 3] += accel[moved, 1] * dt

        if spawned.any():
            pos_std = cfg.spawn_pos_std if cfg.spawn_pos_std is not None else model.grid.R / 2.0
            vel_std = cfg.spawn_vel_std if cfg.spawn_vel_std is not None else model.grid.D
            k = int(spawned.sum())
            offset = rng.normal(0.0, 1.0, size=(k, 4)) * np.array([pos_std, vel_std, pos_std, vel_std])
            states[spawned] += offset
            intensity[spawned] = model.prior.sample(rng, k)

        if not model.prior.fixed and cfg.intensity_jitter > 0:
            intensity = intensity * (1.0 + cfg.intensity_jitter * rng.normal(0.0, 1.0, size=n))
            intensity = model.prior.clip(intensity)

        # bootstrap 혼합 proposal → importance ratio = e + b
        weights = weights * survive_spawn

    n_birth = cfg.n_birth
    if n_birth > 0:
        if cfg.birth_proposal == "measurement" and Z is not None and len(Z):
            birth_states, birth_intensity = sample_measurement_birth(model, Z, n_birth, rng)
        else:
            birth_states, birth_intensity = sample_birth(model, n_birth, rng)
        birth_weights = np.full(n_birth, cfg.birth_mass / n_birth)
        states = np.vstack([states, birth_states])
        intensity = np.concatenate([intensity, birth_intensity])
        weights = np.concatenate([weights, birth_weights])

    return ParticleCloud(
        states=states,
        intensity=intensity,
        weights=weights,
        time_step=cloud.time_step + 1,
        n_persistent=n,
        n_birth=n_birth,
    )


# ─────────────────────────────────────────────
# 4. update
# ─────────────────────────────────────────────

def measurement_likelihood(m: Measurement, p: Particle, theta: float, sigma0: float, grid: GridSpec) -> float:
    """particle 이 측정 셀에 있으면 target likelihood, 아니면 truncated noise density (σ₀)."""
    if m.z < theta:
        raise ValueError(f"measurement power {m.z} is below threshold {theta}")
    if state_to_cell(p.state, grid) == m.cell_index:
        if p.state.intensity is None:
            raise ValueError("particle has no intensity component")
        return float(target_likelihood(m.z, p.state.intensity, sigma0))
    return float(truncated_noise_density(m.z, sigma0, theta))


@dataclass
class UpdateResult:
    cloud: ParticleCloud
    measurement_mass: np.ndarray
    flags: List[str] = field(default_factory=list)


def _chunk_mass(m_idx: np.ndarray, gw: np.ndarray, n_meas: int) -> np.ndarray:
    return np.bincount(m_idx, weights=gw, minlength=n_meas)


def _explained_mass(m_idx: np.ndarray, gw: np.ndarray, n_meas: int, deterministic: bool, workers: int) -> np.ndarray:
    """측정별 Σ_p g·ω."""
    if deterministic or len(gw) <= PARALLEL_CHUNK:
        return np.bincount(m_idx, weights=gw, minlength=n_meas)

    # 순서 없는 합산 (완료 순서대로 더함)
    total = np.zeros(n_meas)
    bounds = range(0, len(gw), PARALLEL_CHUNK)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_chunk_mass, m_idx[s:s + PARALLEL_CHUNK], gw[s:s + PARALLEL_CHUNK], n_meas)
            for s in bounds
        ]
        for fut in as_completed(futures):
            total += fut.result()
    return total


def _update(cloud: ParticleCloud, Z: MeasurementSet, model: FilterModel, sigma: np.ndarray) -> UpdateResult:
    n_meas = len(Z)
    if n_meas == 0:
        logger.warning("step %d: empty measurement set, all weights set to zero", cloud.time_step)
        out = ParticleCloud(
            states=cloud.states, intensity=cloud.intensity, weights=np.zeros(len(cloud)),
            time_step=cloud.time_step, n_persistent=cloud.n_persistent, n_birth=cloud.n_birth,
        )
        return UpdateResult(cloud=out, measurement_mass=np.zeros(0), flags=["empty_measurement_set"])

    cells = flat_cells(model.grid, cloud.states)
    lookup = Z.lookup()
    m_idx = np.where(cells >= 0, lookup[np.maximum(cells, 0)], -1)
    hit = np.flatnonzero(m_idx >= 0)

    z = Z.powers[m_idx[hit]]
    g = np.exp(target_log_likelihood(z, cloud.intensity[hit], model.sigma0))
    gw = g * cloud.weights[hit]
    explained = _explained_mass(m_idx[hit], gw, n_meas, model.config.deterministic, model.config.workers)

    kappa = clutter_intensity(z, model.clutter_rate, sigma[hit], Z.threshold)
    new_weights = np.zeros(len(cloud))
    new_weights[hit] = gw / (kappa + explained[m_idx[hit]])

    mass = np.bincount(m_idx[hit], weights=new_weights[hit], minlength=n_meas)
    out = ParticleCloud(
        states=cloud.states, intensity=cloud.intensity, weights=new_weights,
        time_step=cloud.time_step, n_persistent=cloud.n_persistent, n_birth=cloud.n_birth,
    )
    return UpdateResult(cloud=out, measurement_mass=mass)


def update_plain(cloud: ParticleCloud, Z: MeasurementSet, model: FilterModel) -> UpdateResult:
    return _update(cloud, Z, model, np.full(len(cloud), model.sigma0))


def update_shrinkage(cloud: ParticleCloud, Z: MeasurementSet, model: FilterModel,
                     table: Optional[ShrinkageTable] = None) -> UpdateResult:
    """clutter 항에 σ_s^M 사용. table 을 주면 model 의 table 대신 쓴다."""
    table = model.table if table is None else table
    if model.prior.fixed:
        sigma = np.full(len(cloud), float(table.sigma_for_intensity(model.prior.values[0])))
    else:
        sigma = np.asarray(table.sigma_for_intensity(cloud.intensity), dtype=float)
    return _update(cloud, Z, model, sigma)


# ─────────────────────────────────────────────
# 5. resample / 상태 추출
# ─────────────────────────────────────────────

def _draw_indices(normed: np.ndarray, count: int, rng: np.random.Generator, scheme: str) -> np.ndarray:
    cdf = np.cumsum(normed)
    cdf[-1] = 1.0
    if scheme == "systematic":
        positions = (rng.random() + np.arange(count)) / count
    elif scheme == "multinomial":
        positions = np.sort(rng.random(count))
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    return np.minimum(np.searchsorted(cdf, positions, side="right"), len(normed) - 1)


def resample(cloud: ParticleCloud, target_count: int, rng: np.random.Generator,
             scheme: str = "systematic") -> ParticleCloud:
    """정규화 가중치로 target_count 개를 뽑고 각 가중치를 W/L 로 둔다."""
    total = estimate_cardinality(cloud)
    if total <= 0 or target_count <= 0:
        logger.warning("step %d: zero total weight, resample returns an empty cloud", cloud.time_step)
        return ParticleCloud.empty(cloud.time_step)

    idx = _draw_indices(cloud.weights / total, target_count, rng, scheme)
    return ParticleCloud(
        states=cloud.states[idx],
        intensity=cloud.intensity[idx],
        weights=np.full(target_count, total / target_count),
        time_step=cloud.time_step,
        n_persistent=target_count,
        n_birth=0,
    )


@dataclass
class Extraction:
    estimates: List[TargetState]
    n_components: int
    flags: List[str] = field(default_factory=list)


def fit_mixture(cloud: ParticleCloud, n_components: int, rng: np.random.Generator,
                max_iter: int = 100) -> Tuple[Extraction, Optional[GaussianMixture]]:
    if n_components < 1:
        raise ValueError(f"n_components must be >= 1, got {n_components}")
    if len(cloud) == 0:
        return Extraction(estimates=[], n_components=0), None

    points, intensity = cloud.states, cloud.intensity
    if np.ptp(cloud.weights) > 0:
        # GaussianMixture 는 sample weight 를 받지 않는다. 같은 개수로 resample 해서 가중치를 개수로 옮긴다
        even = resample(cloud, len(cloud), rng)
        points, intensity = even.states, even.intensity

    flags: List[str] = []
    distinct = len(np.unique(points, axis=0))
    k = n_components
    if distinct < k:
        logger.warning("EM: %d distinct particles < %d components, reducing", distinct, k)
        flags.append("em_components_reduced")
        k = distinct

    center = points.mean(axis=0)
    scale = points.std(axis=0)
    scale[scale == 0] = 1.0
    features = (points - center) / scale

    gm = GaussianMixture(
        n_components=k,
        covariance_type="full",
        reg_covar=1e-6,
        max_iter=max_iter,
        init_params="k-means++",
        random_state=child_seed(rng),
    )
    labels = gm.fit_predict(features)
    means = gm.means_ * scale + center

    estimates = []
    for comp, row in enumerate(means):
        members = labels == comp
        est_i = float(intensity[members].mean()) if members.any() else float(intensity.mean())
        estimates.append(TargetState.from_array(row, intensity=est_i))
    return Extraction(estimates=estimates, n_components=k, flags=flags), gm


def extract_states(cloud: ParticleCloud, n_components: int, rng: np.random.Generator,
                   max_iter: int = 100) -> List[TargetState]:
    """가중 EM (GaussianMixture) 성분 평균을 상태 추정으로 돌려준다."""
    extraction, _ = fit_mixture(cloud, n_components, rng, max_iter)
    return extraction.estimates


# ─────────────────────────────────────────────
# 6. 한 스텝
# ─────────────────────────────────────────────

@dataclass
class StepDiagnostics:
    step: int
    n_hat: float
    n_measurements: int
    ess: float
    measurement_mass: np.ndarray
    n_components: int
    wall_ms: float = 0.0
    frame_checksum: Optional[str] = None
    flags: List[str] = field(default_factory=list)

    def to_record(self, record_timing: bool = False, mass_floor: float = 0.01) -> Dict:
        strong = np.flatnonzero(self.measurement_mass >= mass_floor)
        return {
            "step": self.step,
            "n_hat": round(self.n_hat, 10),
            "n_measurements": self.n_measurements,
            "ess": round(self.ess, 6),
            "mass_max": round(float(self.measurement_mass.max()), 10) if self.measurement_mass.size else 0.0,
            "measurement_mass": {int(i): round(float(self.measurement_mass[i]), 6) for i in strong},
            "n_components": self.n_components,
            "wall_ms": round(self.wall_ms, 3) if record_timing else None,
            "frame_checksum": self.frame_checksum,
            "flags": list(self.flags),
        }


def step(
    cloud: ParticleCloud,
    data: Union[PowerFrame, MeasurementSet],
    model: FilterModel,
    rng: np.random.Generator,
    extract_rng: Optional[np.random.Generator] = None,
) -> Tuple[ParticleCloud, List[TargetState], StepDiagnostics]:
    """predict → update → resample → extract."""
    cfg = model.config
    with Stopwatch() as watch:
        checksum = None
        if isinstance(data, PowerFrame):
            checksum = data.checksum()
            Z = extract_measurement_set(data, model.theta)
        else:
            Z = data

        predicted = predict(cloud, model, rng, Z)
        if cfg.algorithm == "plain":
            result = update_plain(predicted, Z, model)
        else:
            result = update_shrinkage(predicted, Z, model)

        flags = list(result.flags)
        n_hat = estimate_cardinality(result.cloud)
        ess = effective_sample_size(result.cloud.weights)
        updated = resample(result.cloud, cfg.n_particles, rng, cfg.resample_scheme)
        if len(updated) == 0 and "empty_measurement_set" not in flags:
            flags.append("zero_mass_resample")

        n_target = int(round(n_hat))
        estimates: List[TargetState] = []
        n_components = 0
        if n_target >= 1 and len(updated):
            extraction, _ = fit_mixture(updated, max(1, n_target), extract_rng or rng, cfg.em_max_iter)
            estimates = extraction.estimates
            n_components = extraction.n_components
            flags.extend(extraction.flags)

    diag = StepDiagnostics(
        step=predicted.time_step,
        n_hat=n_hat,
        n_measurements=len(Z),
        ess=ess,
        measurement_mass=result.measurement_mass,
        n_components=n_components,
        wall_ms=watch.elapsed_ms,
        frame_checksum=checksum,
        flags=flags,
    )
    return updated, estimates, diag


class PhdFilter:
    """FilterModel + 현재 ParticleCloud 를 들고 프레임을 순서대로 처리한다."""

    def __init__(self, model: FilterModel, rng: np.random.Generator,
                 extract_rng: Optional[np.random.Generator] = None):
        self.model = model
        self.rng = rng
        self.extract_rng = extract_rng
        self.cloud = initialize(model, rng)
        self.history: List[StepDiagnostics] = []

    def process(self, data: Union[PowerFrame, MeasurementSet]) -> List[TargetState]:
        self.cloud, estimates, diag = step(self.cloud, data, self.model, self.rng, self.extract_rng)
        self.history.append(diag)
        return estimates

    def run(self, frames: Sequence[Union[PowerFrame, MeasurementSet]]) -> List[List[TargetState]]:
        return [self.process(f) for f in frames]

    @property
    def n_hat(self) -> float:
        return estimate_cardinality(self.cloud)
