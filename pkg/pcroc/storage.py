from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict

from .models import StoredRun
from .time_utils import now_utc

try:
    import redis  # type: ignore
except Exception:  # pragma: no cover
    redis = None

logger = logging.getLogger(__name__)

KEY_PREFIX = "pcroc:"


class ResultStore:
    """Persists JSON results of CLI runs to a directory, or to Redis when configured."""

    def __init__(self, results_dir: Path, redis_url: str | None = None) -> None:
        self.results_dir = Path(results_dir)
        self.redis_url = redis_url
        self._redis = None
        if redis_url and redis:
            self._redis = redis.Redis.from_url(redis_url)
        else:
            self.results_dir.mkdir(parents=True, exist_ok=True)

    @property
    def backend(self) -> str:
        if self._redis:
            return "redis"
        return "file"

    def write(self, key: str, payload: Dict[str, Any]) -> None:
        text = json.dumps(payload, indent=2)
        if self._redis:
            self._redis.set(KEY_PREFIX + key, text)
            return
        path = self.results_dir / f"{key}.json"
        tmp_path = self.results_dir / f"{key}.json.tmp"
        tmp_path.write_text(text)
        tmp_path.replace(path)
        logger.info("stored %s at %s", key, path)

    def read(self, key: str) -> Dict[str, Any]:
        if self._redis:
            raw = self._redis.get(KEY_PREFIX + key)
            if not raw:
                return {}
            return json.loads(raw)
        path = self.results_dir / f"{key}.json"
        if not path.exists():
            return {}
        return json.loads(path.read_text())

    def save_run(self, key: str, command: str, payload: Dict[str, Any]) -> StoredRun:
        run = StoredRun(key=key, command=command, created=now_utc(), payload=payload)
        self.write(key, run.to_dict())
        return run
