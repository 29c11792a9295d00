# utils/harness.py
# -*- coding: utf-8 -*-
"""
Monte Carlo 실험 하네스 + CLI.

서브커맨드
  simulate  truth + frame 파일 생성
  track     frame 파일에 filter 실행
  table1    SNR 별 θ, λ
  table2    SNR 별 σ_s^M / σ₀
  sweep     SNR 별 시간 평균 OSPA (plain vs shrinkage, paired)
  ospa      두 estimate CSV 채점
  presets   내장 시나리오 JSON 출력
  run       run_experiment (results.csv / summary.csv / diagnostics.jsonl)

난수는 (seed, trial, role) 로 정해지는 스트림을 쓰므로 worker 수와 관계없이 결과가 같다.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from tqdm import tqdm

from utils.config import (
    CONFIG_SCHEMA_VERSION,
    DEFAULT_OUT_DIR,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    DEFAULT_WORKERS,
    ConfigError,
    config_error_from_validation,
    configure_logging,
)
from utils.grid import GridSpec, PowerFrame, polar_coordinates, read_frames, render_frame, write_frames
from utils.likelihood import expected_clutter_count, snr_to_intensity, solve_threshold
from utils.ospa import POSITION_CUTOFF_CELLS, VELOCITY_CUTOFF_CELLS, ospa
from utils.phd_filter import FilterConfig, FilterModel, PhdFilter
from utils.result_evaluator import RESULT_COLUMNS, check_results, paired_comparison, summarize
from utils.runtime import substream
from utils.scenario import (
    PRESETS,
    ScenarioConfigError,
    ScenarioSpec,
    TargetState,
    TruthTrack,
    check_events,
    generate_scenario,
    preset,
    truth_at,
    with_snr,
)
from utils.shrinkage import DEFAULT_BETA, DEFAULT_SNR_GRID, build_shrinkage_table

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
TABLE1_SNRS = (6.0, 7.0, 8.0, 9.0, 10.0)
ALGORITHMS = ("plain", "shrinkage")

Mode = Literal["plain", "shrinkage", "both"]


# ============================================================
# 1) RunConfig
# ============================================================

class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: Literal[1] = CONFIG_SCHEMA_VERSION
    scenario: Union[str, ScenarioSpec] = "paper-6.2"
    filter: FilterConfig = Field(default_factory=FilterConfig)
    mc_trials: int = Field(DEFAULT_TRIALS, ge=1)
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2**64)
    outputs: str = DEFAULT_OUT_DIR
    mode: Mode = "both"
    snr_db: Optional[float] = Field(None, gt=0)  # 모든 target SNR 덮어쓰기
    record_timing: bool = False
    workers: int = Field(DEFAULT_WORKERS, ge=1)

    @field_validator("mode", mode="before")
    @classmethod
    def normalize_mode(cls, value: Any) -> Any:
        return "both" if value == "both-paired" else value

    @field_validator("scenario")
    @classmethod
    def known_preset(cls, value: Union[str, ScenarioSpec]) -> Union[str, ScenarioSpec]:
        if isinstance(value, str) and value not in PRESETS:
            raise ValueError(f"unknown preset {value!r} (available: {', '.join(PRESETS)})")
        return value

    def resolved_scenario(self) -> ScenarioSpec:
        spec = preset(self.scenario) if isinstance(self.scenario, str) else self.scenario
        if self.snr_db is not None:
            spec = with_snr(spec, self.snr_db)
        return spec

    def algorithms(self) -> List[str]:
        return list(ALGORITHMS) if self.mode == "both" else [self.mode]


def parse_run_config(data: Dict[str, Any]) -> RunConfig:
    """dict → RunConfig. 오류는 dotted 필드 경로가 있는 ConfigError."""
    scenario = data.get("scenario")
    if isinstance(scenario, dict):
        # 시나리오 오류 경로를 scenario.* 로 맞추기 위해 따로 검증
        try:
            data = {**data, "scenario": ScenarioSpec.model_validate(scenario)}
        except ValidationError as e:
            raise config_error_from_validation(e, prefix="scenario") from e
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise config_error_from_validation(e) from e
    try:
        check_events(config.resolved_scenario())
    except ScenarioConfigError as e:
        path = "scenario"
        if e.event_index is not None:
            path = f"scenario.events.{e.event_index}.{e.field_name}"
        raise ConfigError(f"{path}: {e}", [path]) from e
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_run_config(data)


# ============================================================
# 2) trial 실행
# ============================================================

def range_doppler(states: Sequence[TargetState]) -> Tuple[np.ndarray, np.ndarray]:
    """상태 목록 → (r, d) 점 집합 (각각 (k, 1))."""
    if not states:
        return np.zeros((0, 1)), np.zeros((0, 1))
    r, d, _ = polar_coordinates(np.array([s.as_array() for s in states]))
    return r[:, None], d[:, None]


def cutoffs(grid: GridSpec) -> Dict[str, float]:
    return {
        "ospa_position": POSITION_CUTOFF_CELLS * grid.R,
        "ospa_velocity": VELOCITY_CUTOFF_CELLS * grid.D,
    }


def simulate_trial(scenario: ScenarioSpec, seed: int, trial: int) -> Tuple[List[TruthTrack], List[PowerFrame]]:
    tracks = generate_scenario(scenario, substream(seed, trial, "truth"))
    frame_rng = substream(seed, trial, "frames")
    frames = [
        render_frame(truth_at(tracks, k), scenario.grid, scenario.sigma0, frame_rng, time_step=k)
        for k in range(1, scenario.duration + 1)
    ]
    return tracks, frames


def visible_truth(tracks: Sequence[TruthTrack], step: int) -> List[TargetState]:
    out = []
    for track in tracks:
        if track.alive_at(step) and track.in_grid[step - track.birth_step]:
            out.append(track.state_at(step))
    return out


@dataclass
class TrialOutput:
    trial: int
    rows: List[Dict[str, Any]] = field(default_factory=list)
    estimates: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)


def run_trial(
    scenario: ScenarioSpec,
    models: Dict[str, FilterModel],
    seed: int,
    trial: int,
    record_timing: bool = False,
) -> TrialOutput:
    """한 trial. 모든 알고리즘이 같은 truth / frame / filter 난수열을 쓴다 (common random numbers)."""
    tracks, frames = simulate_trial(scenario, seed, trial)
    c = cutoffs(scenario.grid)
    out = TrialOutput(trial=trial)

    for algorithm, model in models.items():
        tracker = PhdFilter(model, substream(seed, trial, "filter"), substream(seed, trial, "extract"))
        for frame in frames:
            estimates = tracker.process(frame)
            k = frame.time_step
            est_r, est_d = range_doppler(estimates)
            true_r, true_d = range_doppler(visible_truth(tracks, k))
            diag = tracker.history[-1]
            out.rows.append({
                "trial": trial,
                "step": k,
                "algorithm": algorithm,
                "n_hat": diag.n_hat,
                "ospa_position": ospa(est_r, true_r, c["ospa_position"]),
                "ospa_velocity": ospa(est_d, true_d, c["ospa_velocity"]),
                "wall_ms": diag.wall_ms if record_timing else None,
            })
            for est, r, d in zip(estimates, est_r[:, 0], est_d[:, 0]):
                out.estimates.append({
                    "trial": trial, "step": k, "algorithm": algorithm,
                    "x": est.x, "vx": est.vx, "y": est.y, "vy": est.vy,
                    "intensity": est.intensity, "r": r, "d": d,
                })
            record = diag.to_record(record_timing)
            record.update({"trial": trial, "algorithm": algorithm})
            out.diagnostics.append(record)
    return out


def _trial_job(args: Tuple[ScenarioSpec, Dict[str, FilterModel], int, int, bool]) -> TrialOutput:
    return run_trial(*args)


def build_models(config: RunConfig, scenario: ScenarioSpec) -> Dict[str, FilterModel]:
    return {
        algorithm: FilterModel.build(config.filter.model_copy(update={"algorithm": algorithm}), scenario)
        for algorithm in config.algorithms()
    }


def run_trials(config: RunConfig, scenario: ScenarioSpec, models: Dict[str, FilterModel],
               progress: bool = False) -> List[TrialOutput]:
    jobs = [(scenario, models, config.seed, t, config.record_timing) for t in range(config.mc_trials)]
    bar = tqdm(total=len(jobs), desc=scenario.name, unit="trial", disable=not progress)
    outputs: List[TrialOutput] = []
    try:
        if config.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                # map 은 입력 순서대로 돌려준다
                for result in pool.map(_trial_job, jobs):
                    outputs.append(result)
                    bar.update(1)
        else:
            for job in jobs:
                outputs.append(_trial_job(job))
                bar.update(1)
    finally:
        bar.close()
    return outputs


# ============================================================
# 3) run_experiment
# ============================================================

@dataclass
class ExperimentResult:
    out_dir: Optional[Path]
    results: pd.DataFrame
    summary: pd.DataFrame
    estimates: pd.DataFrame
    comparison: Optional[Dict[str, Any]] = None
    issues: List[str] = field(default_factory=list)


def _write_jsonl(path: Path, records: Sequence[Dict[str, Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def write_csv(df: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def run_experiment(config: RunConfig, write: bool = True, progress: bool = False) -> ExperimentResult:
    scenario = config.resolved_scenario()
    models = build_models(config, scenario)
    logger.info(
        "experiment %s: mode=%s trials=%d seed=%d workers=%d",
        scenario.name, config.mode, config.mc_trials, config.seed, config.workers,
    )
    outputs = run_trials(config, scenario, models, progress)

    results = pd.DataFrame([row for o in outputs for row in o.rows], columns=RESULT_COLUMNS)
    results["wall_ms"] = results["wall_ms"].astype(float)
    summary = summarize(results)
    estimates = pd.DataFrame(
        [row for o in outputs for row in o.estimates],
        columns=["trial", "step", "algorithm", "x", "vx", "y", "vy", "intensity", "r", "d"],
    )

    ok, issues = check_results(results, scenario.duration, cutoffs(scenario.grid), config.algorithms())
    for issue in issues:
        logger.warning("result check: %s", issue)

    comparison = None
    if config.mode == "both" and config.mc_trials >= 2:
        comparison = {
            metric: paired_comparison(results, metric).to_dict()
            for metric in ("ospa_position", "ospa_velocity")
        }
        pos = comparison["ospa_position"]
        logger.info(
            "paired position OSPA: shrinkage %.3f vs plain %.3f (p_less=%.4g)",
            pos["mean_a"], pos["mean_b"], pos["p_less"],
        )

    out_dir = None
    if write:
        out_dir = Path(config.outputs)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_csv(results, out_dir / "results.csv")
        write_csv(summary, out_dir / "summary.csv")
        write_csv(estimates, out_dir / "estimates.csv")
        _write_jsonl(out_dir / "diagnostics.jsonl", [d for o in outputs for d in o.diagnostics])
        (out_dir / "config.json").write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
        if comparison is not None:
            (out_dir / "comparison.json").write_text(json.dumps(comparison, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("결과 저장: %s", out_dir)

    return ExperimentResult(
        out_dir=out_dir, results=results, summary=summary, estimates=estimates,
        comparison=comparison, issues=issues,
    )


# ============================================================
# 4) 표 재현 / sweep
# ============================================================

def reproduce_table1(sigma0: float = 0.25, n_cells: int = 2000, snr_list: Sequence[float] = TABLE1_SNRS,
                     p_d_target: float = 0.99) -> pd.DataFrame:
    rows = []
    for snr in snr_list:
        intensity = float(snr_to_intensity(snr, sigma0))
        theta = solve_threshold(intensity, sigma0, p_d_target)
        rows.append({
            "snr_db": float(snr),
            "intensity": intensity,
            "theta": theta,
            "lambda": expected_clutter_count(theta, sigma0, n_cells),
        })
    return pd.DataFrame(rows, columns=["snr_db", "intensity", "theta", "lambda"])


def reproduce_table2(sigma0: float = 0.25, beta: float = DEFAULT_BETA,
                     snr_list: Sequence[float] = DEFAULT_SNR_GRID) -> pd.DataFrame:
    table = build_shrinkage_table(snr_list, sigma0, beta)
    return pd.DataFrame(table.rows(), columns=["snr_db", "sigma_ratio"])


def sweep_snr(config: RunConfig, snr_list: Sequence[float]) -> pd.DataFrame:
    """SNR 별 시간 평균 OSPA (trial 평균 ± 표준오차). 같은 seed → 같은 frame 스트림."""
    rows = []
    for snr in snr_list:
        result = run_experiment(config.model_copy(update={"snr_db": float(snr)}), write=False)
        per_trial = result.results.groupby(["algorithm", "trial"])[["ospa_position", "ospa_velocity"]].mean()
        for algorithm, block in per_trial.groupby(level="algorithm", sort=True):
            n = len(block)
            row = {"snr_db": float(snr), "algorithm": algorithm, "n_trials": n}
            for metric in ("ospa_position", "ospa_velocity"):
                values = block[metric].to_numpy()
                row[f"{metric}_mean"] = float(values.mean())
                row[f"{metric}_se"] = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            if result.comparison is not None:
                row["p_less_position"] = result.comparison["ospa_position"]["p_less"]
            rows.append(row)
    columns = ["snr_db", "algorithm", "n_trials", "ospa_position_mean", "ospa_position_se",
               "ospa_velocity_mean", "ospa_velocity_se", "p_less_position"]
    return pd.DataFrame(rows, columns=columns)


def score_estimate_files(estimates_path: Union[str, Path], truth_path: Union[str, Path],
                         c_position: float, c_velocity: float) -> pd.DataFrame:
    """(trial, step[, algorithm]) 별 OSPA. 두 파일 모두 r, d 컬럼 필요."""
    est = pd.read_csv(estimates_path)
    truth = pd.read_csv(truth_path)
    for name, df in (("estimates", est), ("truth", truth)):
        missing = {"step", "r", "d"} - set(df.columns)
        if missing:
            raise ValueError(f"{name} file lacks columns {sorted(missing)}")
    if "trial" not in est.columns:
        est = est.assign(trial=0)
    if "trial" not in truth.columns:
        truth = truth.assign(trial=0)
    if "in_grid" in truth.columns:
        truth = truth[truth["in_grid"].astype(bool)]
    if "algorithm" not in est.columns:
        est = est.assign(algorithm="estimate")

    keys = sorted(set(zip(truth["trial"], truth["step"])) | set(zip(est["trial"], est["step"])))
    truth_groups = {k: g for k, g in truth.groupby(["trial", "step"])}
    rows = []
    for algorithm, est_alg in est.groupby("algorithm", sort=True):
        est_groups = {k: g for k, g in est_alg.groupby(["trial", "step"])}
        for key in keys:
            e = est_groups.get(key, est_alg.iloc[0:0])
            t = truth_groups.get(key, truth.iloc[0:0])
            rows.append({
                "trial": int(key[0]), "step": int(key[1]), "algorithm": algorithm,
                "ospa_position": ospa(e[["r"]].to_numpy(), t[["r"]].to_numpy(), c_position),
                "ospa_velocity": ospa(e[["d"]].to_numpy(), t[["d"]].to_numpy(), c_velocity),
            })
    return pd.DataFrame(rows, columns=["trial", "step", "algorithm", "ospa_position", "ospa_velocity"])


def truth_table(tracks: Sequence[TruthTrack], trial: int = 0) -> pd.DataFrame:
    rows = []
    for track in tracks:
        r, d, _ = polar_coordinates(np.array([s.as_array() for s in track.states]))
        for offset, state in enumerate(track.states):
            rows.append({
                "trial": trial, "step": track.birth_step + offset, "track_id": track.track_id,
                "x": state.x, "vx": state.vx, "y": state.y, "vy": state.vy,
                "intensity": state.intensity, "r": r[offset], "d": d[offset],
                "in_grid": int(track.in_grid[offset]),
            })
    columns = ["trial", "step", "track_id", "x", "vx", "y", "vy", "intensity", "r", "d", "in_grid"]
    return pd.DataFrame(rows, columns=columns).sort_values(["trial", "step", "track_id"], kind="stable")


def preset_documents() -> Dict[str, Any]:
    return {name: json.loads(preset(name).model_dump_json()) for name in PRESETS}


# ============================================================
# 5) CLI
# ============================================================

def _add_run_flags(p: argparse.ArgumentParser, trials_default: Optional[int] = None) -> None:
    p.add_argument("--config", help="run config JSON (schema_version 1)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="내장 시나리오")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--out", help="출력 폴더")
    p.add_argument("--mode", choices=["plain", "shrinkage", "both", "both-paired"])
    p.add_argument("--snr", type=float, help="모든 target SNR (dB) 덮어쓰기")
    p.add_argument("--workers", type=int)
    p.add_argument("--record-timing", action="store_true", help="wall_ms 기록 (출력이 실행마다 달라짐)")


def build_run_config(args: argparse.Namespace) -> RunConfig:
    data: Dict[str, Any] = {}
    if getattr(args, "config", None):
        data = json.loads(load_run_config(args.config).model_dump_json())
    overrides = {
        "scenario": getattr(args, "preset", None),
        "seed": getattr(args, "seed", None),
        "mc_trials": getattr(args, "trials", None),
        "outputs": getattr(args, "out", None),
        "mode": getattr(args, "mode", None),
        "snr_db": getattr(args, "snr", None),
        "workers": getattr(args, "workers", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "record_timing", False):
        data["record_timing"] = True
    return parse_run_config(data)


def _parse_snr_list(text: Optional[str], default: Sequence[float]) -> List[float]:
    if not text:
        return list(default)
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--snr-list: not a comma separated list of numbers: {text!r}", ["snr_list"]) from None


def cmd_run(args: argparse.Namespace) -> int:
    result = run_experiment(build_run_config(args), progress=sys.stderr.isatty())
    print(f"results: {result.out_dir}")
    return 0 if not result.issues else 1


def cmd_simulate(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    scenario = config.resolved_scenario()
    out_dir = Path(config.outputs)
    tables = []
    for trial in range(config.mc_trials):
        tracks, frames = simulate_trial(scenario, config.seed, trial)
        write_frames(out_dir / f"frames_trial{trial:03d}.tbdf", frames)
        tables.append(truth_table(tracks, trial))
    write_csv(pd.concat(tables, ignore_index=True), out_dir / "truth.csv")
    print(f"simulated {config.mc_trials} trial(s) → {out_dir}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    scenario = config.resolved_scenario()
    frames = read_frames(args.frames)
    if frames and frames[0].grid != scenario.grid:
        raise ConfigError("frame file grid does not match the scenario grid", ["scenario.grid"])
    models = build_models(config, scenario)
    out_dir = Path(config.outputs)

    est_rows, diag_rows = [], []
    for algorithm, model in models.items():
        tracker = PhdFilter(model, substream(config.seed, 0, "filter"), substream(config.seed, 0, "extract"))
        for frame in frames:
            estimates = tracker.process(frame)
            est_r, est_d = range_doppler(estimates)
            for est, r, d in zip(estimates, est_r[:, 0], est_d[:, 0]):
                est_rows.append({
                    "trial": 0, "step": frame.time_step, "algorithm": algorithm,
                    "x": est.x, "vx": est.vx, "y": est.y, "vy": est.vy,
                    "intensity": est.intensity, "r": r, "d": d,
                })
            record = tracker.history[-1].to_record(config.record_timing)
            record.update({"trial": 0, "algorithm": algorithm})
            diag_rows.append(record)

    columns = ["trial", "step", "algorithm", "x", "vx", "y", "vy", "intensity", "r", "d"]
    write_csv(pd.DataFrame(est_rows, columns=columns), out_dir / "estimates.csv")
    _write_jsonl(out_dir / "diagnostics.jsonl", diag_rows)
    print(f"tracked {len(frames)} frame(s) → {out_dir}")
    return 0


def cmd_table1(args: argparse.Namespace) -> int:
    df = reproduce_table1(args.sigma0, args.cells, _parse_snr_list(args.snr_list, TABLE1_SNRS), args.p_d)
    write_csv(df, Path(args.out or DEFAULT_OUT_DIR) / "table1.csv")
    print(df.to_string(index=False))
    return 0


def cmd_table2(args: argparse.Namespace) -> int:
    df = reproduce_table2(args.sigma0, args.beta, _parse_snr_list(args.snr_list, DEFAULT_SNR_GRID))
    write_csv(df, Path(args.out or DEFAULT_OUT_DIR) / "table2.csv")
    print(df.to_string(index=False))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = build_run_config(args)
    df = sweep_snr(config, _parse_snr_list(args.snr_list, DEFAULT_SNR_GRID))
    write_csv(df, Path(config.outputs) / "sweep.csv")
    print(df.to_string(index=False))
    return 0


def cmd_ospa(args: argparse.Namespace) -> int:
    df = score_estimate_files(args.estimates, args.truth, args.c_position, args.c_velocity)
    write_csv(df, Path(args.out or DEFAULT_OUT_DIR) / "ospa.csv")
    print(df.groupby("algorithm")[["ospa_position", "ospa_velocity"]].mean().to_string())
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    docs = preset_documents()
    if args.name:
        docs = {args.name: docs[args.name]}
    text = json.dumps(docs, indent=2, sort_keys=True)
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ShrinkTBD", description="shrinkage-PHD track-before-detect toolkit")
    parser.add_argument("--log-level", default=None, help="DEBUG / INFO / WARNING (기본: SHRINKTBD_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo 실험")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="truth + frame 파일 생성")
    _add_run_flags(p, trials_default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="frame 파일에 filter 실행")
    _add_run_flags(p)
    p.add_argument("--frames", required=True, help="simulate 가 만든 .tbdf 파일")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("table1", help="SNR 별 threshold / clutter 수")
    p.add_argument("--sigma0", type=float, default=0.25)
    p.add_argument("--cells", type=int, default=2000)
    p.add_argument("--p-d", type=float, default=0.99)
    p.add_argument("--snr-list", help="예: 6,7,8,9,10")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", help="SNR 별 σ_s^M / σ₀")
    p.add_argument("--sigma0", type=float, default=0.25)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--snr-list", help="예: 6,7,8,9,10,11,12,13")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("sweep", help="SNR 별 시간 평균 OSPA")
    _add_run_flags(p)
    p.add_argument("--snr-list", help="예: 6,8,10,13")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ospa", help="estimate CSV 와 truth CSV 채점")
    p.add_argument("--estimates", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--c-position", type=float, default=250.0)
    p.add_argument("--c-velocity", type=float, default=50.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ospa)

    p = sub.add_parser("presets", help="내장 시나리오 JSON")
    p.add_argument("--name", choices=sorted(PRESETS))
    p.add_argument("--out", help="파일로 저장")
    p.set_defaults(func=cmd_presets)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        for path in e.field_paths:
            print(f"  field: {path}", file=sys.stderr)
        return 2
