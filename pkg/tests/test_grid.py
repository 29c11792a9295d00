"""센서 그리드 / frame 생성 / 측정 집합 테스트."""

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from utils.grid import (
    GridSpec,
    Measurement,
    MeasurementSet,
    PowerFrame,
    ScenarioModelError,
    extract_measurement_set,
    flat_cells,
    read_frames,
    render_frame,
    state_to_cell,
    write_frames,
)
from utils.likelihood import snr_to_intensity, solve_threshold
from utils.runtime import substream
from utils.scenario import PRESET_GRID, TargetState

SIGMA0 = 0.25


def test_preset_grid_resolution():
    assert PRESET_GRID.R == 50.0
    assert PRESET_GRID.D == 25.0
    assert PRESET_GRID.N == 2000
    assert PRESET_GRID.shape == (200, 10, 1)


def test_grid_bounds_validation():
    with pytest.raises(ValidationError):
        GridSpec(r_min=10.0, r_max=5.0, d_min=0.0, d_max=1.0, n_r=2, n_d=2)
    with pytest.raises(ValidationError):
        GridSpec(r_min=0.0, r_max=5.0, d_min=0.0, d_max=1.0, n_r=0, n_d=2)


def test_state_to_cell_first_target():
    state = TargetState(x=89000.0, vx=-200.0, y=0.0, vy=0.0)
    assert state_to_cell(state, PRESET_GRID) == (180, 8, 0)


def test_cell_center_maps_back_to_its_cell():
    for cell in [(0, 0, 0), (37, 4, 0), (199, 9, 0)]:
        r, d, _ = PRESET_GRID.cell_center(cell)
        assert state_to_cell(TargetState(x=r, vx=d, y=0.0, vy=0.0), PRESET_GRID) == cell
        assert PRESET_GRID.unflatten(PRESET_GRID.flat_index(cell)) == cell


def test_outside_grid_is_none():
    assert state_to_cell(TargetState(x=95000.0, vx=-200.0, y=0.0, vy=0.0), PRESET_GRID) is None
    assert state_to_cell(TargetState(x=89000.0, vx=-500.0, y=0.0, vy=0.0), PRESET_GRID) is None
    # bearing 밖
    assert state_to_cell(TargetState(x=89000.0, vx=-200.0, y=2000.0, vy=0.0), PRESET_GRID) is None
    cells = flat_cells(PRESET_GRID, np.array([[0.0, 0.0, 0.0, 0.0], [89000.0, -200.0, 0.0, 0.0]]))
    assert cells.tolist() == [-1, PRESET_GRID.flat_index((180, 8, 0))]


def test_render_frame_target_cell_is_bright(small_grid):
    intensity = float(snr_to_intensity(20.0, SIGMA0))
    truth = [TargetState(x=89000.0, vx=-200.0, y=0.0, vy=0.0, intensity=intensity)]
    frame = render_frame(truth, small_grid, SIGMA0, substream(1, 0, "frames"), time_step=3)
    flat = small_grid.flat_index(state_to_cell(truth[0], small_grid))
    assert frame.time_step == 3
    assert frame.values.shape == (small_grid.N,)
    assert frame.values[flat] > 10 * 2 * SIGMA0**2
    assert not frame.values.flags.writeable


def test_render_frame_same_cell_raises(small_grid):
    a = TargetState(x=89000.0, vx=-200.0, y=0.0, vy=0.0, intensity=1.0)
    b = TargetState(x=89010.0, vx=-199.0, y=0.0, vy=0.0, intensity=1.0)
    with pytest.raises(ScenarioModelError):
        render_frame([a, b], small_grid, SIGMA0, substream(1, 0, "frames"))


def test_render_frame_needs_intensity(small_grid):
    with pytest.raises(ValueError):
        render_frame([TargetState(x=89000.0, vx=-200.0, y=0.0, vy=0.0)], small_grid, SIGMA0, substream(1))


def test_render_frame_is_deterministic(small_grid):
    f1 = render_frame([], small_grid, SIGMA0, substream(5, 2, "frames"), time_step=1)
    f2 = render_frame([], small_grid, SIGMA0, substream(5, 2, "frames"), time_step=1)
    assert f1.checksum() == f2.checksum()
    f3 = render_frame([], small_grid, SIGMA0, substream(5, 3, "frames"), time_step=1)
    assert f1.checksum() != f3.checksum()


def test_noise_only_powers_are_exponential():
    rng = substream(20160607, 0, "frames")
    values = np.concatenate([render_frame([], PRESET_GRID, SIGMA0, rng).values for _ in range(50)])
    assert values.size == 100_000
    mean = 2 * SIGMA0**2
    assert stats.kstest(values, "expon", args=(0.0, mean)).pvalue > 0.01

    theta = solve_threshold(float(snr_to_intensity(9.0, SIGMA0)), SIGMA0)
    p = np.exp(-theta / mean)
    rate = np.mean(values >= theta)
    assert abs(rate - p) <= 3 * np.sqrt(p * (1 - p) / values.size)


def test_threshold_detects_target_cell_at_design_pd(small_grid):
    intensity = float(snr_to_intensity(9.0, SIGMA0))
    theta = solve_threshold(intensity, SIGMA0, 0.99)
    truth = [TargetState(x=89000.0, vx=-200.0, y=0.0, vy=0.0, intensity=intensity)]
    flat = small_grid.flat_index(state_to_cell(truth[0], small_grid))
    rng = substream(8, 0, "frames")
    hits = sum(flat in extract_measurement_set(render_frame(truth, small_grid, SIGMA0, rng), theta).cells
               for _ in range(10_000))
    assert hits / 10_000 >= 0.98


def test_extract_measurement_set(small_grid):
    frame = render_frame([], small_grid, SIGMA0, substream(3, 0, "frames"), time_step=2)
    Z = extract_measurement_set(frame, 0.3)
    assert np.all(Z.powers >= 0.3)
    assert len(Z) == int(np.sum(frame.values >= 0.3))
    assert Z.time_step == 2
    assert np.all(np.diff(Z.cells) > 0)

    everything = extract_measurement_set(frame, 0.0)
    assert len(everything) == small_grid.N
    with pytest.raises(ValueError):
        extract_measurement_set(frame, -1.0)


def test_measurement_set_validation(small_grid):
    with pytest.raises(ValueError):
        MeasurementSet(grid=small_grid, threshold=0.5, time_step=1, cells=[3, 3], powers=[0.6, 0.7])
    with pytest.raises(ValueError):
        MeasurementSet(grid=small_grid, threshold=0.5, time_step=1, cells=[3], powers=[0.4])


def test_measurement_set_elements_and_lookup(small_grid):
    m = Measurement(r=0.0, d=0.0, b=0.0, z=0.9, cell_index=(10, 8, 0))
    Z = MeasurementSet.from_elements(small_grid, 0.5, [m], time_step=4)
    (elem,) = Z.elements
    assert elem.cell_index == (10, 8, 0)
    assert (elem.r, elem.d, elem.b) == small_grid.cell_center((10, 8, 0))
    lookup = Z.lookup()
    assert lookup[small_grid.flat_index((10, 8, 0))] == 0
    assert int(np.sum(lookup >= 0)) == 1


def test_power_frame_rejects_wrong_size(small_grid):
    with pytest.raises(ValueError):
        PowerFrame(grid=small_grid, values=np.zeros(3), time_step=0)
    with pytest.raises(ValueError):
        PowerFrame(grid=small_grid, values=-np.ones(small_grid.N), time_step=0)


def test_frame_file_round_trip(tmp_path, small_grid):
    rng = substream(9, 0, "frames")
    frames = [render_frame([], small_grid, SIGMA0, rng, time_step=k) for k in (1, 2, 3)]
    path = tmp_path / "frames.tbdf"
    write_frames(path, frames)
    loaded = read_frames(path)
    assert [f.time_step for f in loaded] == [1, 2, 3]
    assert loaded[0].grid == small_grid
    assert [f.checksum() for f in loaded] == [f.checksum() for f in frames]


def test_frame_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.tbdf"
    path.write_bytes(b"NOPE" + bytes(200))
    with pytest.raises(ValueError):
        read_frames(path)
