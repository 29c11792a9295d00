# utils/config.py
# -*- coding: utf-8 -*-
"""
공통 설정 모듈.

- .env / 환경변수에서 기본값을 읽는 헬퍼 (_get_config)
- 실행 기본값 (seed, MC trial 수, 출력 폴더, worker 수)
- 로깅 설정
- pydantic ValidationError → ConfigError (필드 경로 포함) 변환
"""

import logging
import os
from typing import List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()


# ------------------------------------------------------------
# 공통: 환경값 가져오는 헬퍼
#   1) os.getenv (.env 포함)
#   2) 없으면 default
# ------------------------------------------------------------
def _get_config(key: str, default: str = "") -> str:
    return os.getenv(key, default) or default


def _get_int(key: str, default: int) -> int:
    raw = _get_config(key, str(default))
    try:
        return int(raw)
    except ValueError:
        # 잘못된 값이면 기본값으로 폴백
        logging.getLogger(__name__).warning("%s=%r 는 정수가 아님 → %d 사용", key, raw, default)
        return default


# ============================================================
# 1) 실행 기본값
# ============================================================

DEFAULT_SEED = _get_int("SHRINKTBD_SEED", 20160607)
DEFAULT_TRIALS = _get_int("SHRINKTBD_TRIALS", 25)  # CI acceptance 기준 (논문 실험은 50회)
DEFAULT_OUT_DIR = _get_config("SHRINKTBD_OUT_DIR", "results")
DEFAULT_WORKERS = _get_int("SHRINKTBD_WORKERS", 1)
DEFAULT_LOG_LEVEL = _get_config("SHRINKTBD_LOG_LEVEL", "INFO")

CONFIG_SCHEMA_VERSION = 1


# ============================================================
# 2) 로깅
# ============================================================

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """루트 로거에 stream handler 하나만 붙인다 (중복 호출 안전)."""
    level_name = (level or DEFAULT_LOG_LEVEL).upper()
    root = logging.getLogger()
    if not any(getattr(h, "_shrinktbd", False) for h in root.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._shrinktbd = True  # type: ignore[attr-defined]
        root.addHandler(handler)
    root.setLevel(getattr(logging, level_name, logging.INFO))


# ============================================================
# 3) 설정 오류
# ============================================================


class ConfigError(ValueError):
    """설정 파일/요청 검증 실패. field_paths 에 'filter.n_particles' 같은 경로를 담는다."""

    def __init__(self, message: str, field_paths: Sequence[str] = ()):
        super().__init__(message)
        self.field_paths: List[str] = list(field_paths)


def config_error_from_validation(exc: ValidationError, prefix: str = "") -> ConfigError:
    """pydantic ValidationError 를 dotted 필드 경로 목록이 있는 ConfigError 로 바꾼다."""
    paths: List[str] = []
    lines: List[str] = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err.get("loc", ()))
        path = f"{prefix}.{loc}" if prefix and loc else (prefix or loc)
        paths.append(path)
        lines.append(f"{path}: {err.get('msg', 'invalid value')}")
    return ConfigError("설정 검증 실패\n" + "\n".join(lines), paths)
