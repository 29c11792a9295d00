"""SMC-PHD filter (predict / update / resample / 추출) 테스트."""

import math

import numpy as np
import pandas as pd
import pytest

from utils.grid import MeasurementSet, PowerFrame, extract_measurement_set, flat_cells
from utils.likelihood import clutter_intensity, target_likelihood, truncated_noise_density
from utils.phd_filter import (
    FilterConfig,
    FilterModel,
    IntensityPrior,
    Particle,
    ParticleCloud,
    PhdFilter,
    birth_cell_weights,
    effective_sample_size,
    estimate_cardinality,
    fit_mixture,
    initialize,
    measurement_likelihood,
    predict,
    resample,
    step,
    table_snr_grid,
    update_plain,
    update_shrinkage,
)
from utils.harness import run_trial, simulate_trial
from utils.result_evaluator import paired_comparison
from utils.runtime import substream
from utils.scenario import TargetState

SIGMA0 = 0.25
CELL = (20, 8, 0)


def _model(scenario, **overrides) -> FilterModel:
    params = {"n_particles": 300, "n_birth": 150, **overrides}
    return FilterModel.build(FilterConfig(**params), scenario)


def _cell_state(grid, cell, jitter=0.0):
    r, d, _ = grid.cell_center(cell)
    return [r + jitter, d, 0.0, 0.0]


def _cloud(states, intensity, weights, time_step=1):
    return ParticleCloud(states=np.array(states, dtype=float), intensity=np.array(intensity, dtype=float),
                         weights=np.array(weights, dtype=float), time_step=time_step)


# ── 모델 ──────────────────────────────────────


def test_model_build(small_scenario):
    plain = _model(small_scenario, algorithm="plain")
    shrink = _model(small_scenario, algorithm="shrinkage")
    assert plain.theta == shrink.theta
    assert plain.clutter_rate == shrink.clutter_rate
    assert plain.table.is_constant
    assert float(shrink.table.ratio_at(10.0)) < 1.0
    assert plain.prior.fixed
    forced = _model(small_scenario, force_sigma0_table=True)
    assert forced.table.is_constant


def test_table_snr_grid():
    assert table_snr_grid(8.0, 11.0) == [8.0, 9.0, 10.0, 11.0]
    assert table_snr_grid(8.5, 10.2) == [8.5, 9.0, 10.0, 10.2]
    assert table_snr_grid(9.0, 9.0) == [9.0]


def test_intensity_prior_modes():
    rng = substream(1)
    known = IntensityPrior(mode="known", values=(1.0,))
    assert np.all(known.sample(rng, 5) == 1.0)
    per_target = IntensityPrior(mode="per-target", values=(1.0, 2.0))
    assert set(per_target.sample(rng, 200).tolist()) == {1.0, 2.0}
    unknown = IntensityPrior(mode="unknown", low=1.0, high=1.5)
    draws = unknown.sample(rng, 500)
    assert draws.min() >= 1.0 and draws.max() <= 1.5
    assert unknown.clip(np.array([0.5, 2.0])).tolist() == [1.0, 1.5]
    with pytest.raises(ValueError):
        IntensityPrior(mode="unknown", low=2.0, high=1.0)
    with pytest.raises(ValueError):
        IntensityPrior(mode="per-target")


# ── predict ───────────────────────────────────


def test_initialize(small_scenario):
    model = _model(small_scenario)
    assert len(initialize(model, substream(1))) == 0
    cloud = initialize(model, substream(1), n_particles=100, total_mass=0.5)
    assert len(cloud) == 100
    assert estimate_cardinality(cloud) == pytest.approx(0.5)


def test_predict_counts_and_mass(small_scenario):
    model = _model(small_scenario)
    cfg = model.config
    intensity = float(model.prior.values[0])
    cloud = _cloud([_cell_state(small_scenario.grid, CELL)] * 10, [intensity] * 10, [0.1] * 10)
    out = predict(cloud, model, substream(3))
    assert len(out) == 10 + cfg.n_birth
    assert out.n_persistent == 10 and out.n_birth == cfg.n_birth
    assert out.time_step == cloud.time_step + 1
    persistent = out.weights[:10].sum()
    assert persistent == pytest.approx(1.0 * (cfg.survival + cfg.spawn_mass))
    assert out.weights[10:].sum() == pytest.approx(cfg.birth_mass)
    # known 모드: intensity jitter 없음
    assert np.all(out.intensity == intensity)


def test_predict_without_noise_is_pure_cv(small_scenario):
    model = _model(small_scenario, process_noise_std=0.0, spawn_mass=0.0, n_birth=0)
    cloud = _cloud([[89000.0, -200.0, 0.0, 0.0]], [1.0], [1.0])
    out = predict(cloud, model, substream(3))
    assert out.states.tolist() == [[88800.0, -200.0, 0.0, 0.0]]


def test_birth_particles_cover_grid(small_scenario):
    model = _model(small_scenario, n_birth=5000)
    out = predict(ParticleCloud.empty(), model, substream(4))
    g = small_scenario.grid
    r = np.hypot(out.states[:, 0], out.states[:, 2])
    assert r.min() >= g.r_min and r.max() <= g.r_max


def test_measurement_birth_follows_likelihood_ratio(small_scenario):
    model = _model(small_scenario, n_birth=1000)
    grid = small_scenario.grid
    strong, weak = grid.flat_index(CELL), grid.flat_index((3, 3, 0))
    Z = MeasurementSet(grid=grid, threshold=model.theta, time_step=1,
                       cells=[strong, weak], powers=[model.theta + 2.0, model.theta + 0.01])
    weights = birth_cell_weights(Z, model)
    assert weights.sum() == pytest.approx(1.0)
    assert weights[list(Z.cells).index(strong)] > 0.99

    out = predict(ParticleCloud.empty(), model, substream(4), Z)
    cells = flat_cells(grid, out.states)
    assert set(np.unique(cells).tolist()) <= {strong, weak}
    # systematic 추출이라 셀별 개수 오차 ≤ 1
    for cell, w in zip(Z.cells, weights):
        assert abs(np.sum(cells == cell) - 1000 * w) <= 1
    assert out.weights.sum() == pytest.approx(model.config.birth_mass)


def test_uniform_birth_ignores_measurements(small_scenario):
    model = _model(small_scenario, n_birth=2000, birth_proposal="uniform")
    grid = small_scenario.grid
    Z = MeasurementSet(grid=grid, threshold=model.theta, time_step=1, cells=[grid.flat_index(CELL)], powers=[model.theta + 2.0])
    out = predict(ParticleCloud.empty(), model, substream(4), Z)
    assert len(np.unique(flat_cells(grid, out.states))) > 100


# ── update ────────────────────────────────────


def test_measurement_likelihood_gating(small_scenario):
    model = _model(small_scenario)
    grid = small_scenario.grid
    z = model.theta + 0.5
    Z = MeasurementSet(grid=grid, threshold=model.theta, time_step=1, cells=[grid.flat_index(CELL)], powers=[z])
    (m,) = Z.elements
    inside = Particle(state=TargetState.from_array(_cell_state(grid, CELL), intensity=1.0), weight=1.0)
    outside = Particle(state=TargetState.from_array(_cell_state(grid, (2, 2, 0)), intensity=1.0), weight=1.0)
    assert measurement_likelihood(m, inside, model.theta, SIGMA0, grid) == pytest.approx(float(target_likelihood(z, 1.0, SIGMA0)))
    assert measurement_likelihood(m, outside, model.theta, SIGMA0, grid) == pytest.approx(
        float(truncated_noise_density(z, SIGMA0, model.theta))
    )


def test_update_weight_formula(small_scenario):
    model = _model(small_scenario, algorithm="plain")
    grid = small_scenario.grid
    z = model.theta + 0.4
    Z = MeasurementSet(grid=grid, threshold=model.theta, time_step=1, cells=[grid.flat_index(CELL)], powers=[z])
    intensity = float(model.prior.values[0])
    cloud = _cloud(
        [_cell_state(grid, CELL, -5.0), _cell_state(grid, CELL, 5.0), _cell_state(grid, (3, 3, 0))],
        [intensity] * 3,
        [0.2, 0.3, 0.5],
    )
    result = update_plain(cloud, Z, model)
    g = float(target_likelihood(z, intensity, SIGMA0))
    kappa = float(clutter_intensity(z, model.clutter_rate, SIGMA0, model.theta))
    denom = kappa + g * 0.5
    assert result.cloud.weights[0] == pytest.approx(g * 0.2 / denom, rel=1e-12)
    assert result.cloud.weights[1] == pytest.approx(g * 0.3 / denom, rel=1e-12)
    assert result.cloud.weights[2] == 0.0
    # 측정 하나가 설명하는 질량 < 1
    assert 0.0 < result.measurement_mass[0] < 1.0
    assert estimate_cardinality(result.cloud) <= len(Z)


def test_update_weights_follow_particle_permutation(small_scenario):
    model = _model(small_scenario)
    _, frames = simulate_trial(small_scenario, 5, 0)
    Z = extract_measurement_set(frames[0], model.theta)
    cloud = predict(ParticleCloud.empty(), model, substream(5), Z)
    perm = substream(6).permutation(len(cloud))
    shuffled = _cloud(cloud.states[perm], cloud.intensity[perm], cloud.weights[perm], time_step=cloud.time_step)
    a = update_shrinkage(cloud, Z, model)
    b = update_shrinkage(shuffled, Z, model)
    assert np.allclose(b.cloud.weights, a.cloud.weights[perm], rtol=1e-12, atol=0.0)
    assert np.allclose(b.measurement_mass, a.measurement_mass, rtol=1e-12, atol=0.0)


def test_empty_measurement_set_zeroes_weights(small_scenario):
    model = _model(small_scenario)
    grid = small_scenario.grid
    Z = MeasurementSet(grid=grid, threshold=model.theta, time_step=1, cells=[], powers=[])
    cloud = _cloud([_cell_state(grid, CELL)], [1.0], [0.7])
    result = update_shrinkage(cloud, Z, model)
    assert result.flags == ["empty_measurement_set"]
    assert estimate_cardinality(result.cloud) == 0.0

    frame = PowerFrame(grid=grid, values=np.zeros(grid.N), time_step=1)
    updated, estimates, diag = step(cloud, frame, model, substream(1))
    assert len(updated) == 0 and estimates == []
    assert diag.n_hat == 0.0
    assert "empty_measurement_set" in diag.flags


def test_shrinkage_boosts_strong_measurement(small_scenario):
    plain = _model(small_scenario, algorithm="plain")
    shrink = _model(small_scenario, algorithm="shrinkage")
    grid = small_scenario.grid
    z = plain.theta + 1.0
    Z = MeasurementSet(grid=grid, threshold=plain.theta, time_step=1, cells=[grid.flat_index(CELL)], powers=[z])
    intensity = float(plain.prior.values[0])
    cloud = _cloud([_cell_state(grid, CELL)], [intensity], [0.01])
    w_plain = update_plain(cloud, Z, plain).cloud.weights[0]
    w_shrink = update_shrinkage(cloud, Z, shrink).cloud.weights[0]
    assert w_shrink > w_plain


def test_forced_sigma0_table_equals_plain_update(small_scenario):
    plain = _model(small_scenario, algorithm="plain")
    forced = _model(small_scenario, algorithm="shrinkage", force_sigma0_table=True)
    _, frames = simulate_trial(small_scenario, 5, 0)
    cloud = predict(ParticleCloud.empty(), plain, substream(5))
    Z = MeasurementSet(
        grid=small_scenario.grid, threshold=plain.theta, time_step=1,
        cells=np.flatnonzero(frames[0].values >= plain.theta),
        powers=frames[0].values[frames[0].values >= plain.theta],
    )
    a = update_plain(cloud, Z, plain).cloud.weights
    b = update_shrinkage(cloud, Z, forced).cloud.weights
    assert np.array_equal(a, b)


def test_parallel_reduction_matches_deterministic(small_scenario):
    det = _model(small_scenario, algorithm="plain", n_birth=100000)
    fast = _model(small_scenario, algorithm="plain", n_birth=100000, deterministic=False, workers=3)
    _, frames = simulate_trial(small_scenario, 8, 0)
    cloud = predict(ParticleCloud.empty(), det, substream(8))
    Z = MeasurementSet(
        grid=small_scenario.grid, threshold=det.theta, time_step=1,
        cells=np.flatnonzero(frames[0].values >= det.theta),
        powers=frames[0].values[frames[0].values >= det.theta],
    )
    a = update_plain(cloud, Z, det).cloud.weights
    b = update_plain(cloud, Z, fast).cloud.weights
    assert np.allclose(a, b, rtol=1e-9, atol=0.0)


# ── resample / 추출 ───────────────────────────


@pytest.mark.parametrize("scheme", ["systematic", "multinomial"])
def test_resample_conserves_mass(scheme):
    rng = substream(7)
    cloud = _cloud(rng.normal(size=(50, 4)), np.ones(50), rng.random(50))
    total = estimate_cardinality(cloud)
    out = resample(cloud, 200, substream(8), scheme)
    assert len(out) == 200
    assert np.all(out.weights == total / 200)
    assert estimate_cardinality(out) == pytest.approx(total, rel=1e-12)


def test_systematic_resample_copy_counts():
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    cloud = _cloud(np.arange(16).reshape(4, 4), np.ones(4), weights)
    out = resample(cloud, 1000, substream(9))
    counts = np.array([np.sum(out.states[:, 0] == 4 * k) for k in range(4)])
    assert np.all(np.abs(counts - 1000 * weights) <= 1)


def test_resample_zero_mass_is_empty():
    cloud = _cloud(np.zeros((3, 4)), np.ones(3), np.zeros(3))
    assert len(resample(cloud, 10, substream(1))) == 0
    with pytest.raises(ValueError):
        resample(_cloud(np.zeros((3, 4)), np.ones(3), np.ones(3)), 10, substream(1), "stratified-ish")


def test_effective_sample_size():
    assert effective_sample_size(np.ones(10)) == pytest.approx(10.0)
    assert effective_sample_size(np.array([1.0, 0.0, 0.0])) == pytest.approx(1.0)
    assert effective_sample_size(np.zeros(3)) == 0.0


def test_fit_mixture_single_point():
    cloud = _cloud([[1.0, 2.0, 3.0, 4.0]] * 20, [0.8] * 20, [0.05] * 20)
    extraction, _ = fit_mixture(cloud, 1, substream(2))
    (est,) = extraction.estimates
    assert est.as_array().tolist() == pytest.approx([1.0, 2.0, 3.0, 4.0])
    assert est.intensity == pytest.approx(0.8)


def test_fit_mixture_reduces_components():
    cloud = _cloud([[1.0, 2.0, 3.0, 4.0]] * 20, [0.8] * 20, [0.05] * 20)
    extraction, _ = fit_mixture(cloud, 3, substream(2))
    assert extraction.n_components == 1
    assert "em_components_reduced" in extraction.flags


def test_fit_mixture_two_clusters():
    rng = substream(11)
    a = rng.normal([89000.0, -200.0, 0.0, 0.0], [10.0, 3.0, 1.0, 1.0], size=(400, 4))
    b = rng.normal([86000.0, -300.0, 0.0, 0.0], [10.0, 3.0, 1.0, 1.0], size=(400, 4))
    states = np.vstack([a, b])
    cloud = _cloud(states, np.ones(800), np.full(800, 2.0 / 800))
    extraction, gm = fit_mixture(cloud, 2, substream(12))
    means = sorted(e.as_array()[0] for e in extraction.estimates)
    assert means[0] == pytest.approx(b[:, 0].mean(), abs=10.0 / math.sqrt(400) * 4)
    assert means[1] == pytest.approx(a[:, 0].mean(), abs=10.0 / math.sqrt(400) * 4)
    assert gm.converged_


def test_fit_mixture_follows_uneven_weights():
    rng = substream(15)
    a = rng.normal([89000.0, -200.0, 0.0, 0.0], [10.0, 3.0, 1.0, 1.0], size=(400, 4))
    b = rng.normal([86000.0, -300.0, 0.0, 0.0], [10.0, 3.0, 1.0, 1.0], size=(400, 4))
    weights = np.concatenate([np.full(400, 0.9 / 400), np.full(400, 0.1 / 400)])
    cloud = _cloud(np.vstack([a, b]), np.ones(800), weights)
    extraction, _ = fit_mixture(cloud, 1, substream(16))
    (est,) = extraction.estimates
    # 가중 평균 88700 (비가중이면 87500)
    assert est.x == pytest.approx(0.9 * a[:, 0].mean() + 0.1 * b[:, 0].mean(), abs=15.0)


@pytest.mark.filterwarnings("ignore::sklearn.exceptions.ConvergenceWarning")
def test_em_log_likelihood_never_decreases():
    rng = substream(13)
    a = rng.normal([89000.0, -200.0, 0.0, 0.0], [40.0, 8.0, 1.0, 1.0], size=(300, 4))
    b = rng.normal([88920.0, -225.0, 0.0, 0.0], [40.0, 8.0, 1.0, 1.0], size=(300, 4))
    cloud = _cloud(np.vstack([a, b]), np.ones(600), np.full(600, 2.0 / 600))
    # 같은 초기화에서 반복 횟수만 늘린다
    bounds = [fit_mixture(cloud, 2, substream(14), max_iter=n)[1].lower_bound_ for n in range(1, 16)]
    assert np.all(np.diff(bounds) >= -1e-6)
    assert bounds[-1] > bounds[0]


# ── 전체 recursion ───────────────────────────


def _run(model, frames, seed=3):
    tracker = PhdFilter(model, substream(seed, 0, "filter"), substream(seed, 0, "extract"))
    estimates = tracker.run(frames)
    return tracker, estimates


def test_filter_tracks_strong_target(small_scenario):
    model = _model(small_scenario, n_birth=2000)
    _, frames = simulate_trial(small_scenario, 21, 0)
    tracker, estimates = _run(model, frames)
    assert len(tracker.history) == len(frames) == 5
    assert round(tracker.history[-1].n_hat) == 1
    (est,) = estimates[-1]
    # 5번째 스텝 target r = 89000 - 4·200
    assert abs(est.x - 88200.0) < 3 * small_scenario.grid.R


def test_filter_is_reproducible(small_scenario):
    model = _model(small_scenario)
    _, frames = simulate_trial(small_scenario, 4, 0)
    t1, e1 = _run(model, frames)
    t2, e2 = _run(model, frames)
    assert [d.n_hat for d in t1.history] == [d.n_hat for d in t2.history]
    assert e1 == e2


def test_forced_table_filter_is_bit_identical_to_plain(small_scenario):
    plain = _model(small_scenario, algorithm="plain")
    forced = _model(small_scenario, algorithm="shrinkage", force_sigma0_table=True)
    _, frames = simulate_trial(small_scenario, 6, 0)
    tp, ep = _run(plain, frames)
    tf, ef = _run(forced, frames)
    assert [d.n_hat for d in tp.history] == [d.n_hat for d in tf.history]
    assert ep == ef
    assert np.array_equal(tp.cloud.states, tf.cloud.states)


def test_unknown_mode_with_point_range_matches_known_mode(small_scenario):
    unknown = small_scenario.model_copy(update={"snr_mode": "unknown", "snr_range": (10.0, 10.0)})
    known_model = _model(small_scenario)
    unknown_model = _model(unknown)
    assert unknown_model.prior.bounds == (known_model.prior.values[0],) * 2
    rows = []
    for trial in range(8):
        rows += run_trial(small_scenario, {"known": known_model}, 17, trial).rows
        rows += run_trial(unknown, {"unknown": unknown_model}, 17, trial).rows
    cmp = paired_comparison(pd.DataFrame(rows), "ospa_position", "unknown", "known")
    assert cmp.n_trials == 8
    assert cmp.indistinguishable(0.05)


def test_diagnostics_record(small_scenario):
    model = _model(small_scenario)
    _, frames = simulate_trial(small_scenario, 4, 0)
    tracker, _ = _run(model, frames[:1])
    record = tracker.history[0].to_record()
    assert record["step"] == 1
    assert record["wall_ms"] is None
    assert record["frame_checksum"] == frames[0].checksum()
    assert record["n_measurements"] >= 1
    assert tracker.history[0].to_record(record_timing=True)["wall_ms"] >= 0.0
