# utils/grid.py
# -*- coding: utf-8 -*-
"""
range-Doppler-bearing 센서 그리드와 power frame.

- GridSpec: 셀 개수 / 범위, 셀 중심 r_i = r_min + (i + 0.5)·R
- state_to_cell: 상태 [x, vx, y, vy] → (i, j, l) 셀 (밖이면 None)
- render_frame: 모든 셀에 z = |h + n|² 생성 (target 셀만 h = I)
- extract_measurement_set: z ≥ θ 인 셀만 남긴 측정 집합
- write_frames / read_frames: 재생용 바이너리 포맷
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

CellIndex = Tuple[int, int, int]

# 프레임 파일 포맷
FRAME_MAGIC = b"TBDF"
FRAME_VERSION = 1
_HEADER = struct.Struct("<4sHI6d3I")  # magic, version, n_frames, 범위 6개, 셀 개수 3개
_FRAME_STEP = struct.Struct("<q")


class ScenarioModelError(ValueError):
    """nail model 위반 (한 셀에 target 두 개)."""


# ─────────────────────────────────────────────
# 1. GridSpec / NoiseModel
# ─────────────────────────────────────────────

class GridSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    r_min: float
    r_max: float
    d_min: float
    d_max: float
    b_min: float = -0.01
    b_max: float = 0.01
    n_r: int = Field(..., ge=1)
    n_d: int = Field(..., ge=1)
    n_b: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_bounds(self) -> "GridSpec":
        for name in ("r", "d", "b"):
            lo, hi = getattr(self, f"{name}_min"), getattr(self, f"{name}_max")
            if not hi > lo:
                raise ValueError(f"{name}_max must be greater than {name}_min ({lo} >= {hi})")
        if self.r_min < 0:
            raise ValueError(f"r_min must be >= 0, got {self.r_min}")
        return self

    # 셀 크기
    @property
    def R(self) -> float:
        return (self.r_max - self.r_min) / self.n_r

    @property
    def D(self) -> float:
        return (self.d_max - self.d_min) / self.n_d

    @property
    def B(self) -> float:
        return (self.b_max - self.b_min) / self.n_b

    @property
    def N(self) -> int:
        return self.n_r * self.n_d * self.n_b

    @property
    def shape(self) -> CellIndex:
        return (self.n_r, self.n_d, self.n_b)

    def range_centers(self) -> np.ndarray:
        return self.r_min + (np.arange(self.n_r) + 0.5) * self.R

    def doppler_centers(self) -> np.ndarray:
        return self.d_min + (np.arange(self.n_d) + 0.5) * self.D

    def bearing_centers(self) -> np.ndarray:
        return self.b_min + (np.arange(self.n_b) + 0.5) * self.B

    def cell_center(self, cell: CellIndex) -> Tuple[float, float, float]:
        i, j, l = cell
        return (
            self.r_min + (i + 0.5) * self.R,
            self.d_min + (j + 0.5) * self.D,
            self.b_min + (l + 0.5) * self.B,
        )

    def flat_index(self, cell: CellIndex) -> int:
        """row-major (i, j, l) 순서."""
        i, j, l = cell
        return (i * self.n_d + j) * self.n_b + l

    def unflatten(self, flat: int) -> CellIndex:
        i, j, l = np.unravel_index(int(flat), self.shape)
        return int(i), int(j), int(l)


class NoiseModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma0: float = Field(0.25, gt=0)


# ─────────────────────────────────────────────
# 2. 상태 → 셀
# ─────────────────────────────────────────────

def polar_coordinates(states: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P, 4) [x, vx, y, vy] → (r, d, b). r = 0 인 행의 d, b 는 nan."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    x, vx, y, vy = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    r = np.hypot(x, y)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(r > 0, (x * vx + y * vy) / r, np.nan)
    b = np.where(r > 0, np.arctan2(y, x), np.nan)
    return r, d, b


def flat_cells(grid: GridSpec, states: np.ndarray) -> np.ndarray:
    """상태 배열의 flat 셀 번호. 그리드 밖(또는 r = 0)이면 -1."""
    r, d, b = polar_coordinates(states)
    with np.errstate(invalid="ignore"):
        i = np.floor((r - grid.r_min) / grid.R)
        j = np.floor((d - grid.d_min) / grid.D)
        l = np.floor((b - grid.b_min) / grid.B)
        inside = (
            (r > 0)
            & (i >= 0) & (i < grid.n_r)
            & (j >= 0) & (j < grid.n_d)
            & (l >= 0) & (l < grid.n_b)
        )
    out = np.full(r.shape, -1, dtype=np.int64)
    ii, jj, ll = i[inside].astype(np.int64), j[inside].astype(np.int64), l[inside].astype(np.int64)
    out[inside] = (ii * grid.n_d + jj) * grid.n_b + ll
    return out


def state_to_cell(state, grid: GridSpec) -> Optional[CellIndex]:
    """TargetState (x, vx, y, vy 속성) → (i, j, l). 그리드 밖이면 None."""
    row = np.array([[state.x, state.vx, state.y, state.vy]], dtype=float)
    flat = int(flat_cells(grid, row)[0])
    if flat < 0:
        return None
    return grid.unflatten(flat)


# ─────────────────────────────────────────────
# 3. PowerFrame / Measurement / MeasurementSet
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class PowerFrame:
    grid: GridSpec
    values: np.ndarray
    time_step: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.grid.N:
            raise ValueError(f"frame must have {self.grid.N} values, got {values.size}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("frame values must be finite and >= 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def cube(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(_FRAME_STEP.pack(int(self.time_step)))
        h.update(self.values.astype("<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class Measurement:
    r: float
    d: float
    b: float
    z: float
    cell_index: CellIndex


@dataclass(frozen=True)
class MeasurementSet:
    """threshold 를 넘긴 셀들. cells / powers 는 같은 길이의 배열 (cells 오름차순)."""

    grid: GridSpec
    threshold: float
    time_step: int
    cells: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        powers = np.asarray(self.powers, dtype=np.float64).reshape(-1)
        if cells.shape != powers.shape:
            raise ValueError("cells and powers must have the same length")
        if np.unique(cells).size != cells.size:
            raise ValueError("measurement set has two elements in one cell")
        if np.any(powers < self.threshold):
            raise ValueError(f"measurement below threshold {self.threshold}")
        order = np.argsort(cells, kind="stable")
        cells, powers = cells[order], powers[order]
        cells.setflags(write=False)
        powers.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "powers", powers)

    def __len__(self) -> int:
        return int(self.cells.size)

    @property
    def elements(self) -> List[Measurement]:
        out = []
        for flat, z in zip(self.cells, self.powers):
            cell = self.grid.unflatten(int(flat))
            r, d, b = self.grid.cell_center(cell)
            out.append(Measurement(r=r, d=d, b=b, z=float(z), cell_index=cell))
        return out

    @classmethod
    def from_elements(
        cls,
        grid: GridSpec,
        threshold: float,
        elements: Iterable[Measurement],
        time_step: int = 0,
    ) -> "MeasurementSet":
        elements = list(elements)
        cells = [grid.flat_index(m.cell_index) for m in elements]
        powers = [m.z for m in elements]
        return cls(grid=grid, threshold=threshold, time_step=time_step, cells=cells, powers=powers)

    def lookup(self) -> np.ndarray:
        """flat 셀 → 측정 인덱스 (측정 없는 셀은 -1)."""
        table = np.full(self.grid.N, -1, dtype=np.int64)
        table[self.cells] = np.arange(self.cells.size)
        return table


# ─────────────────────────────────────────────
# 4. frame 생성 / 추출
# ─────────────────────────────────────────────

def render_frame(
    truth: Sequence,
    grid: GridSpec,
    sigma0: float,
    rng: np.random.Generator,
    time_step: int = 0,
) -> PowerFrame:
    """truth: intensity 가 있는 TargetState 목록. 그리드 밖 target 은 무시."""
    if sigma0 <= 0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")

    h = np.zeros(grid.N, dtype=np.float64)
    if truth:
        for state in truth:
            if state.intensity is None:
                raise ValueError("render_frame needs target intensities")
        states = np.array([[s.x, s.vx, s.y, s.vy] for s in truth], dtype=float)
        cells = flat_cells(grid, states)
        seen = {}
        for k, flat in enumerate(cells):
            if flat < 0:
                continue
            if flat in seen:
                raise ScenarioModelError(
                    f"targets {seen[flat]} and {k} fall in the same cell {grid.unflatten(int(flat))} at step {time_step}"
                )
            seen[flat] = k
            h[flat] = float(truth[k].intensity)

    noise = rng.normal(0.0, sigma0, size=(grid.N, 2))
    values = (h + noise[:, 0]) ** 2 + noise[:, 1] ** 2
    return PowerFrame(grid=grid, values=values, time_step=time_step)


def extract_measurement_set(frame: PowerFrame, theta: float) -> MeasurementSet:
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    cells = np.flatnonzero(frame.values >= theta)
    return MeasurementSet(
        grid=frame.grid,
        threshold=float(theta),
        time_step=frame.time_step,
        cells=cells,
        powers=frame.values[cells],
    )


# ─────────────────────────────────────────────
# 5. frame 파일 (header + 64-bit float, little-endian)
# ─────────────────────────────────────────────

def write_frames(path: Union[str, Path], frames: Sequence[PowerFrame]) -> None:
    if not frames:
        raise ValueError("no frames to write")
    grid = frames[0].grid
    if any(f.grid != grid for f in frames):
        raise ValueError("all frames in one file must share a grid")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(
            _HEADER.pack(
                FRAME_MAGIC, FRAME_VERSION, len(frames),
                grid.r_min, grid.r_max, grid.d_min, grid.d_max, grid.b_min, grid.b_max,
                grid.n_r, grid.n_d, grid.n_b,
            )
        )
        for frame in frames:
            fh.write(_FRAME_STEP.pack(int(frame.time_step)))
            fh.write(frame.values.astype("<f8").tobytes())
    logger.info("frame %d개 저장: %s", len(frames), path)


def read_frames(path: Union[str, Path]) -> List[PowerFrame]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated frame file")
    magic, version, n_frames, r0, r1, d0, d1, b0, b1, n_r, n_d, n_b = _HEADER.unpack_from(data, 0)
    if magic != FRAME_MAGIC:
        raise ValueError(f"{path}: not a frame file")
    if version != FRAME_VERSION:
        raise ValueError(f"{path}: unsupported frame file version {version}")

    grid = GridSpec(r_min=r0, r_max=r1, d_min=d0, d_max=d1, b_min=b0, b_max=b1, n_r=n_r, n_d=n_d, n_b=n_b)
    block = _FRAME_STEP.size + 8 * grid.N
    expected = _HEADER.size + n_frames * block
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")

    frames: List[PowerFrame] = []
    offset = _HEADER.size
    for _ in range(n_frames):
        (step,) = _FRAME_STEP.unpack_from(data, offset)
        values = np.frombuffer(data, dtype="<f8", count=grid.N, offset=offset + _FRAME_STEP.size)
        frames.append(PowerFrame(grid=grid, values=values, time_step=int(step)))
        offset += block
    return frames

