"""
ShrinkTBD Backend Server
────────────────────────
threshold / 표 재현 / OSPA 계산 / 소규모 MC 실험을 HTTP 로 제공합니다.

실행: uvicorn backend.main:app --reload  (프로젝트 루트에서)
"""

import asyncio
import hashlib
import json
import logging
import math
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from slowapi import Limiter, _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded
from slowapi.util import get_remote_address

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from utils.config import ConfigError, _get_config, _get_int  # noqa: E402
from utils.harness import parse_run_config, preset_documents, reproduce_table1, reproduce_table2, run_experiment  # noqa: E402
from utils.likelihood import detection_probability, expected_clutter_count, snr_to_intensity, solve_threshold  # noqa: E402
from utils.ospa import ospa_components  # noqa: E402

logger = logging.getLogger(__name__)

# ── Config ──────────────────────────────────────────────────────────

APP_AUTH_TOKEN = _get_config("APP_AUTH_TOKEN", "")
MAX_SERVICE_TRIALS = _get_int("SHRINKTBD_SERVICE_MAX_TRIALS", 5)
MAX_SERVICE_PARTICLES = _get_int("SHRINKTBD_SERVICE_MAX_PARTICLES", 2000)
EXPERIMENT_CACHE_SIZE = 32

# ── FastAPI + Rate Limiter ──────────────────────────────────────────

app = FastAPI(title="ShrinkTBD API", docs_url=None, redoc_url=None)
limiter = Limiter(key_func=get_remote_address)
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    logger.warning("Validation error on %s %s: %s", request.method, request.url.path, exc.errors())
    return JSONResponse(
        status_code=422,
        content={"detail": exc.errors(), "body": str(exc.body)[:200] if exc.body else None},
    )


@app.exception_handler(ConfigError)
async def config_error_handler(request: Request, exc: ConfigError):
    logger.warning("Config error on %s %s: %s", request.method, request.url.path, exc.field_paths)
    return JSONResponse(status_code=422, content={"detail": str(exc), "fields": exc.field_paths})


@app.on_event("startup")
async def startup():
    logger.info("ShrinkTBD API started")
    if not APP_AUTH_TOKEN:
        logger.warning("⚠️ APP_AUTH_TOKEN 미설정! /api/experiment 인증이 꺼져 있음.")


# ── Auth Dependency ─────────────────────────────────────────────────


def verify_token(request: Request):
    """Static bearer token 인증. 토큰 미설정 시 인증 건너뜀 (로컬 개발용)."""
    if not APP_AUTH_TOKEN:
        return
    auth = request.headers.get("Authorization", "")
    if auth != f"Bearer {APP_AUTH_TOKEN}":
        raise HTTPException(status_code=401, detail="인증 실패")


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


# ── Health Check ────────────────────────────────────────────────────


@app.get("/health")
async def health():
    return {"status": "ok"}


# ── Threshold / Tables ──────────────────────────────────────────────


class ThresholdRequest(BaseModel):
    snr_db: float = Field(..., gt=0, le=40)
    sigma0: float = Field(0.25, gt=0)
    p_d_target: float = Field(0.99, gt=0, lt=1)
    n_cells: int = Field(2000, ge=1, le=10_000_000)


@app.post("/api/threshold")
@limiter.limit("60/minute")
async def threshold(request: Request, body: ThresholdRequest):
    intensity = float(snr_to_intensity(body.snr_db, body.sigma0))
    theta = solve_threshold(intensity, body.sigma0, body.p_d_target)
    return {
        "snr_db": body.snr_db,
        "intensity": intensity,
        "theta": theta,
        "lambda": expected_clutter_count(theta, body.sigma0, body.n_cells),
        "p_d": detection_probability(theta, intensity, body.sigma0),
    }


@app.get("/api/table1")
@limiter.limit("30/minute")
async def table1(
    request: Request,
    sigma0: float = Query(0.25, gt=0),
    cells: int = Query(2000, ge=1),
):
    df = reproduce_table1(sigma0, cells)
    return {"rows": df.to_dict(orient="records")}


@app.get("/api/table2")
@limiter.limit("30/minute")
async def table2(
    request: Request,
    sigma0: float = Query(0.25, gt=0),
    beta: float = Query(0.05, gt=0, lt=1),
):
    try:
        df = await asyncio.to_thread(reproduce_table2, sigma0, beta)
    except RuntimeError as e:
        raise _bad_request(e)
    return {"rows": df.to_dict(orient="records")}


# ── OSPA ────────────────────────────────────────────────────────────


class OspaRequest(BaseModel):
    estimates: List[List[float]] = Field(default_factory=list, max_length=1000)
    truth: List[List[float]] = Field(default_factory=list, max_length=1000)
    cutoff: float = Field(..., gt=0)


@app.post("/api/ospa")
@limiter.limit("60/minute")
async def ospa_distance(request: Request, body: OspaRequest):
    try:
        total, localisation, cardinality = ospa_components(body.estimates, body.truth, body.cutoff)
    except ValueError as e:
        raise _bad_request(e)
    return {"ospa": total, "localisation": localisation, "cardinality": cardinality}


# ── Presets ─────────────────────────────────────────────────────────


@app.get("/api/presets")
async def presets():
    return preset_documents()


# ── Experiment (작은 MC 실행) ───────────────────────────────────────

_experiment_cache: "OrderedDict[str, Dict[str, Any]]" = OrderedDict()


def _cache_key(payload: Dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _finite(value: Any) -> Any:
    """JSON 응답에 못 넣는 nan / inf → None."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _run_small_experiment(payload: Dict[str, Any]) -> Dict[str, Any]:
    config = parse_run_config(payload)
    if config.mc_trials > MAX_SERVICE_TRIALS:
        raise ConfigError(f"mc_trials must be <= {MAX_SERVICE_TRIALS} on the service", ["mc_trials"])
    if config.filter.n_particles > MAX_SERVICE_PARTICLES:
        raise ConfigError(f"filter.n_particles must be <= {MAX_SERVICE_PARTICLES} on the service", ["filter.n_particles"])
    config = config.model_copy(update={"workers": 1, "record_timing": False})
    result = run_experiment(config, write=False)
    return {
        "summary": json.loads(result.summary.to_json(orient="records")),
        "comparison": _finite(result.comparison) if result.comparison else None,
        "issues": result.issues,
    }


class ExperimentRequest(BaseModel):
    config: Dict[str, Any] = Field(default_factory=dict)


@app.post("/api/experiment")
@limiter.limit("10/minute")
async def experiment(request: Request, body: ExperimentRequest, _=Depends(verify_token)):
    payload = dict(body.config)
    payload.setdefault("mc_trials", 1)
    key = _cache_key(payload)
    if key in _experiment_cache:
        _experiment_cache.move_to_end(key)
        return {**_experiment_cache[key], "cached": True}

    try:
        data = await asyncio.to_thread(_run_small_experiment, payload)
    except ConfigError:
        raise
    except (ValueError, RuntimeError) as e:
        raise _bad_request(e)

    _experiment_cache[key] = data
    while len(_experiment_cache) > EXPERIMENT_CACHE_SIZE:
        _experiment_cache.popitem(last=False)
    return {**data, "cached": False}
