# utils/runtime.py
import time
from typing import Dict, Optional

import numpy as np

# stream-role → spawn key 코드. 값은 바꾸지 말 것 (바꾸면 기존 결과 재현 불가)
STREAM_ROLES: Dict[str, int] = {
    "truth": 0,
    "frames": 1,
    "filter": 2,
    "extract": 3,
}


def substream(seed: int, trial: int = 0, role: str = "filter") -> np.random.Generator:
    """(seed, trial, role) 로 키가 정해지는 Philox 스트림.

    trial 실행 순서/프로세스 배치와 관계없이 같은 키 → 같은 난수열.
    """
    if role not in STREAM_ROLES:
        raise ValueError(f"unknown stream role: {role!r}")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), STREAM_ROLES[role]))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(rng: np.random.Generator) -> int:
    """외부 라이브러리(sklearn 등)에 넘길 32-bit seed 하나를 뽑는다."""
    return int(rng.integers(0, 2**31 - 1))


class Stopwatch:
    def __init__(self) -> None:
        self._start: Optional[float] = None

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        self.elapsed_ms = 0.0
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed_ms = (time.perf_counter() - (self._start or 0.0)) * 1000.0
