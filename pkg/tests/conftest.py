"""테스트 공통 fixture: 작은 그리드와 단일 target 시나리오."""

import pytest

from utils.grid import GridSpec
from utils.scenario import BirthEvent, ScenarioSpec, SnrSegment

SIGMA0 = 0.25


@pytest.fixture
def small_grid() -> GridSpec:
    # R = 50, D = 25, N = 400
    return GridSpec(r_min=88000.0, r_max=90000.0, d_min=-400.0, d_max=-150.0, n_r=40, n_d=10)


@pytest.fixture
def small_scenario(small_grid) -> ScenarioSpec:
    return ScenarioSpec(
        name="small",
        grid=small_grid,
        sigma0=SIGMA0,
        duration=5,
        accel_noise_std=0.0,
        events=[
            BirthEvent(track_id=1, step=1, state=(89000.0, -200.0, 0.0, 0.0), snr=[SnrSegment(snr_db=10.0)]),
        ],
    )


def small_config_dict(**overrides) -> dict:
    """RunConfig 용 dict (작은 그리드, 파티클 수 축소)."""
    data = {
        "scenario": {
            "name": "small",
            "grid": {"r_min": 88000, "r_max": 90000, "d_min": -400, "d_max": -150, "n_r": 40, "n_d": 10},
            "duration": 4,
            "accel_noise_std": 0.0,
            "events": [
                {"kind": "birth", "track_id": 1, "step": 1, "state": [89000, -200, 0, 0], "snr": [{"snr_db": 10}]},
            ],
        },
        "filter": {"n_particles": 300, "n_birth": 150},
        "mc_trials": 2,
        "seed": 11,
        "mode": "both",
    }
    data.update(overrides)
    return data
