# utils/scenario.py
# -*- coding: utf-8 -*-
"""
Ground truth 시나리오.

- TargetState [x, vx, y, vy] (+ intensity)
- nearly-constant-velocity 전이 (white acceleration)
- birth / spawn 이벤트와 piecewise-constant SNR 스케줄
- 내장 preset: paper-6.2 / paper-6.3 / paper-6.4
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from utils.grid import GridSpec, flat_cells
from utils.likelihood import snr_to_intensity

logger = logging.getLogger(__name__)


class ScenarioConfigError(ValueError):
    """이벤트 구성 오류 (없는/죽은 parent 에서 spawn 등). event_index 는 events 리스트 위치."""

    def __init__(self, message: str, event_index: Optional[int] = None, field_name: str = "parent_id"):
        super().__init__(message)
        self.event_index = event_index
        self.field_name = field_name


# ─────────────────────────────────────────────
# 1. 상태 / CV 전이
# ─────────────────────────────────────────────

@dataclass(frozen=True)
class TargetState:
    x: float
    vx: float
    y: float
    vy: float
    intensity: Optional[float] = None

    def __post_init__(self) -> None:
        if self.intensity is not None and self.intensity < 0:
            raise ValueError(f"intensity must be >= 0, got {self.intensity}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.vx, self.y, self.vy], dtype=float)

    @classmethod
    def from_array(cls, row: Sequence[float], intensity: Optional[float] = None) -> "TargetState":
        x, vx, y, vy = (float(v) for v in row)
        return cls(x=x, vx=vx, y=y, vy=vy, intensity=intensity)


def cv_covariance(dt: float, accel_noise_std: float) -> np.ndarray:
    """[x, vx, y, vy] 순서의 이산화 CV process noise 공분산."""
    q2 = accel_noise_std**2
    block = q2 * np.array([[dt**4 / 4.0, dt**3 / 2.0], [dt**3 / 2.0, dt**2]])
    cov = np.zeros((4, 4))
    cov[0:2, 0:2] = block
    cov[2:4, 2:4] = block
    return cov


def cv_propagate(states: np.ndarray, dt: float, accel_noise_std: float, rng: np.random.Generator) -> np.ndarray:
    """(P, 4) 상태 배열을 한 스텝 전이. accel_noise_std = 0 이면 난수를 쓰지 않는다."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    out = states.copy()
    out[:, 0] += states[:, 1] * dt
    out[:, 2] += states[:, 3] * dt
    if accel_noise_std > 0 and len(states):
        # 축마다 가속도 a ~ N(0, q²), 위치 += a·dt²/2, 속도 += a·dt
        accel = rng.normal(0.0, accel_noise_std, size=(len(states), 2))
        out[:, 0] += accel[:, 0] * dt**2 / 2.0
        out[:, 1] += accel[:, 0] * dt
        out[:, 2] += accel[:, 1] * dt**2 / 2.0
        out[:, 3] += accel[:, 1] * dt
    return out


def cv_transition(state: TargetState, dt: float, accel_noise_std: float, rng: np.random.Generator) -> TargetState:
    row = cv_propagate(state.as_array()[None, :], dt, accel_noise_std, rng)[0]
    return TargetState.from_array(row, intensity=state.intensity)


# ─────────────────────────────────────────────
# 2. ScenarioSpec
# ─────────────────────────────────────────────

class SnrSegment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    start_step: int = Field(1, ge=1)
    snr_db: float = Field(..., gt=0)


def _check_schedule(schedule: List[SnrSegment]) -> List[SnrSegment]:
    steps = [seg.start_step for seg in schedule]
    if steps != sorted(steps) or len(set(steps)) != len(steps):
        raise ValueError("snr schedule start_step values must be strictly increasing")
    return schedule


def snr_at(schedule: Sequence[SnrSegment], step: int) -> float:
    value = schedule[0].snr_db
    for seg in schedule:
        if seg.start_step <= step:
            value = seg.snr_db
    return value


class BirthEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["birth"] = "birth"
    track_id: int
    step: int = Field(..., ge=1)
    state: Tuple[float, float, float, float]
    snr: List[SnrSegment] = Field(..., min_length=1)
    death_step: Optional[int] = None

    @field_validator("snr")
    @classmethod
    def check_snr(cls, value: List[SnrSegment]) -> List[SnrSegment]:
        return _check_schedule(value)


class SpawnEvent(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["spawn"] = "spawn"
    track_id: int
    parent_id: int
    step: int = Field(..., ge=1)
    velocity_offset: Tuple[float, float] = (0.0, 0.0)
    snr: List[SnrSegment] = Field(..., min_length=1)
    death_step: Optional[int] = None

    @field_validator("snr")
    @classmethod
    def check_snr(cls, value: List[SnrSegment]) -> List[SnrSegment]:
        return _check_schedule(value)


ScenarioEvent = Annotated[Union[BirthEvent, SpawnEvent], Field(discriminator="kind")]

SnrMode = Literal["known", "per-target", "unknown"]


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "custom"
    grid: GridSpec
    sigma0: float = Field(0.25, gt=0)
    duration: int = Field(20, ge=1)
    dt: float = Field(1.0, gt=0)
    accel_noise_std: float = Field(1.0, ge=0)
    events: List[ScenarioEvent] = Field(default_factory=list)
    snr_mode: SnrMode = "known"
    snr_range: Optional[Tuple[float, float]] = None

    @model_validator(mode="after")
    def check_events_and_range(self) -> "ScenarioSpec":
        ids = [ev.track_id for ev in self.events]
        if len(set(ids)) != len(ids):
            raise ValueError("track_id values must be unique")
        for ev in self.events:
            if ev.step > self.duration:
                raise ValueError(f"event for track {ev.track_id} at step {ev.step} is after duration {self.duration}")
            if ev.death_step is not None and ev.death_step <= ev.step:
                raise ValueError(f"track {ev.track_id}: death_step must be after the event step")
        if self.snr_mode == "unknown":
            if self.snr_range is None:
                raise ValueError("snr_mode 'unknown' needs snr_range")
        if self.snr_range is not None and not self.snr_range[0] <= self.snr_range[1]:
            raise ValueError("snr_range must be (low, high) with low <= high")
        return self

    # ── SNR 정보 ───────────────────────────
    def scheduled_snrs(self) -> List[float]:
        values = {seg.snr_db for ev in self.events for seg in ev.snr}
        return sorted(values)

    def snr_span(self) -> Tuple[float, float]:
        """filter prior 가 다루는 SNR 범위. unknown 모드는 snr_range, 나머지는 스케줄 min/max."""
        if self.snr_mode == "unknown" and self.snr_range is not None:
            return float(self.snr_range[0]), float(self.snr_range[1])
        values = self.scheduled_snrs()
        if not values:
            if self.snr_range is not None:
                return float(self.snr_range[0]), float(self.snr_range[1])
            raise ValueError("scenario has no SNR information")
        return values[0], values[-1]

    def min_snr(self) -> float:
        return self.snr_span()[0]


def check_events(spec: ScenarioSpec) -> None:
    """spawn parent 가 spawn 시점에 살아 있는지 확인. 문제 있으면 ScenarioConfigError."""
    alive: Dict[int, Tuple[int, Optional[int]]] = {}
    order = sorted(range(len(spec.events)), key=lambda idx: (spec.events[idx].step, idx))
    for idx in order:
        ev = spec.events[idx]
        if isinstance(ev, SpawnEvent):
            parent = alive.get(ev.parent_id)
            if parent is None:
                raise ScenarioConfigError(
                    f"track {ev.track_id} spawns from unknown parent {ev.parent_id}", event_index=idx
                )
            _, death = parent
            if death is not None and death <= ev.step:
                raise ScenarioConfigError(
                    f"track {ev.track_id} spawns at step {ev.step} from parent {ev.parent_id} that died at step {death}",
                    event_index=idx,
                )
        alive[ev.track_id] = (ev.step, ev.death_step)


# ─────────────────────────────────────────────
# 3. TruthTrack / generate_scenario
# ─────────────────────────────────────────────

@dataclass
class TruthTrack:
    track_id: int
    birth_step: int
    death_step: Optional[int] = None  # 첫 번째로 존재하지 않는 step (None = 끝까지)
    states: List[TargetState] = field(default_factory=list)
    in_grid: List[bool] = field(default_factory=list)

    def alive_at(self, step: int) -> bool:
        return self.birth_step <= step < self.birth_step + len(self.states)

    def state_at(self, step: int) -> Optional[TargetState]:
        if not self.alive_at(step):
            return None
        return self.states[step - self.birth_step]

    @property
    def last_step(self) -> int:
        return self.birth_step + len(self.states) - 1


def truth_at(tracks: Sequence[TruthTrack], step: int) -> List[TargetState]:
    """step 에 살아있는 target 상태 (track 생성 순서)."""
    out = []
    for track in tracks:
        state = track.state_at(step)
        if state is not None:
            out.append(state)
    return out


def generate_scenario(spec: ScenarioSpec, rng: np.random.Generator) -> List[TruthTrack]:
    check_events(spec)

    by_step: Dict[int, List[Union[BirthEvent, SpawnEvent]]] = {}
    for ev in spec.events:
        by_step.setdefault(ev.step, []).append(ev)

    tracks: List[TruthTrack] = []
    index: Dict[int, TruthTrack] = {}
    schedules = {ev.track_id: ev.snr for ev in spec.events}

    def _intensity(track_id: int, step: int) -> float:
        return float(snr_to_intensity(snr_at(schedules[track_id], step), spec.sigma0))

    for step in range(1, spec.duration + 1):
        # 1) 기존 target 전이
        for track in tracks:
            if track.last_step != step - 1:
                continue
            if track.death_step is not None and step >= track.death_step:
                continue
            prev = track.states[-1]
            moved = cv_transition(prev, spec.dt, spec.accel_noise_std, rng)
            track.states.append(replace(moved, intensity=_intensity(track.track_id, step)))

        # 2) birth / spawn
        for ev in by_step.get(step, []):
            if isinstance(ev, BirthEvent):
                x, vx, y, vy = ev.state
            else:
                parent = index[ev.parent_id].state_at(step)
                if parent is None:
                    raise ScenarioConfigError(
                        f"track {ev.track_id}: parent {ev.parent_id} is not alive at step {step}",
                        event_index=spec.events.index(ev),
                    )
                x, y = parent.x, parent.y
                vx = parent.vx + ev.velocity_offset[0]
                vy = parent.vy + ev.velocity_offset[1]
            state = TargetState(x=x, vx=vx, y=y, vy=vy, intensity=_intensity(ev.track_id, step))
            track = TruthTrack(track_id=ev.track_id, birth_step=step, death_step=ev.death_step, states=[state])
            tracks.append(track)
            index[ev.track_id] = track

    for track in tracks:
        rows = np.array([s.as_array() for s in track.states])
        track.in_grid = [bool(c >= 0) for c in flat_cells(spec.grid, rows)]
        if not all(track.in_grid):
            first_out = track.birth_step + track.in_grid.index(False)
            logger.info("track %d leaves the grid at step %d", track.track_id, first_out)

    return tracks


# ─────────────────────────────────────────────
# 4. preset
# ─────────────────────────────────────────────

PRESET_GRID = GridSpec(
    r_min=80000.0, r_max=90000.0,
    d_min=-400.0, d_max=-150.0,
    b_min=-0.01, b_max=0.01,
    n_r=200, n_d=10, n_b=1,
)

FIRST_TARGET = (89000.0, -200.0, 0.0, 0.0)
SPAWN_OFFSET = (-100.0, 0.0)  # child vx = -300 m/s


def _seg(snr_db: float, start: int = 1) -> SnrSegment:
    return SnrSegment(start_step=start, snr_db=snr_db)


def _preset_62() -> ScenarioSpec:
    return ScenarioSpec(
        name="paper-6.2",
        grid=PRESET_GRID,
        accel_noise_std=0.0,
        events=[
            BirthEvent(track_id=1, step=1, state=FIRST_TARGET, snr=[_seg(9.0)]),
            SpawnEvent(track_id=2, parent_id=1, step=10, velocity_offset=SPAWN_OFFSET, snr=[_seg(9.0)]),
        ],
        snr_mode="known",
    )


def _preset_63() -> ScenarioSpec:
    return ScenarioSpec(
        name="paper-6.3",
        grid=PRESET_GRID,
        accel_noise_std=0.0,
        events=[
            BirthEvent(track_id=1, step=1, state=FIRST_TARGET, snr=[_seg(8.0)]),
            SpawnEvent(track_id=2, parent_id=1, step=7, velocity_offset=SPAWN_OFFSET, snr=[_seg(9.0)]),
            BirthEvent(track_id=3, step=13, state=(89000.0, -250.0, 0.0, 0.0), snr=[_seg(10.0)]),
        ],
        snr_mode="per-target",
    )


def _preset_64() -> ScenarioSpec:
    return ScenarioSpec(
        name="paper-6.4",
        grid=PRESET_GRID,
        accel_noise_std=0.0,
        events=[
            BirthEvent(track_id=1, step=1, state=FIRST_TARGET, snr=[_seg(9.0)]),
            SpawnEvent(
                track_id=2, parent_id=1, step=10, velocity_offset=SPAWN_OFFSET,
                snr=[_seg(9.0), _seg(10.0, start=11)],
            ),
        ],
        snr_mode="unknown",
        snr_range=(8.0, 11.0),
    )


PRESETS = {
    "paper-6.2": _preset_62,
    "paper-6.3": _preset_63,
    "paper-6.4": _preset_64,
}


def preset(name: str) -> ScenarioSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})") from None


def with_snr(spec: ScenarioSpec, snr_db: float) -> ScenarioSpec:
    """모든 target SNR 을 snr_db 하나로 고정한 사본 (SNR sweep 용)."""
    events = [ev.model_copy(update={"snr": [_seg(snr_db)]}) for ev in spec.events]
    update = {"events": events, "name": f"{spec.name}@{snr_db:g}dB"}
    if spec.snr_mode == "unknown":
        lo, hi = spec.snr_range or (snr_db, snr_db)
        width = (hi - lo) / 2.0
        update["snr_range"] = (snr_db - width, snr_db + width)
    return spec.model_copy(update=update)
