"""
Disk cache for service responses.

Layout:
    <cache_dir>/<service_id>/<source>-<target>/<sha256-of-text>.txt
    <cache_dir>/<service_id>/<source>-<target>/<sha256-of-text>.meta

The .meta sidecar is JSON {service_id, source, target, text_sha256,
checksum, timestamp}; `checksum` is the sha256 of the cached response.
Entries are write-once: a valid entry is never rewritten. An entry whose
checksum does not match is logged, refetched and replaced.

With a warm cache a rating run makes no network calls at all.
"""

import asyncio
import hashlib
import json
import logging
import os
import re
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Awaitable, Callable, Dict, Optional, Union

logger = logging.getLogger(__name__)

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")
TRANSFORM_PAIR = "transform"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _safe(part: str) -> str:
    return _UNSAFE.sub("_", part) or "_"


def atomic_write(path: Path, content: str) -> None:
    """Write through a temp file in the same folder, then rename over the target"""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class ResponseCache:
    """Write-once, checksum-verified response store shared by cached services"""

    def __init__(self, cache_dir: Union[str, Path]):
        self.root = Path(cache_dir)
        self.hits = 0
        self.misses = 0
        # key -> [lock, users]; an entry lives only while a lookup for its key is running
        self._key_locks: Dict[str, list] = {}

    @property
    def open_locks(self) -> int:
        return len(self._key_locks)

    def entry_paths(self, service_id: str, pair: str, text: str):
        folder = self.root / _safe(service_id) / _safe(pair)
        digest = sha256_text(text)
        return folder / f"{digest}.txt", folder / f"{digest}.meta"

    def read(self, service_id: str, pair: str, text: str) -> Optional[str]:
        """Cached response, or None when absent or failing its checksum"""
        body_path, meta_path = self.entry_paths(service_id, pair, text)
        if not body_path.exists() and not meta_path.exists():
            return None
        try:
            body = body_path.read_text(encoding="utf-8")
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
            if meta.get("checksum") == sha256_text(body) and meta.get("text_sha256") == sha256_text(text):
                return body
            problem = "checksum mismatch"
        except (OSError, ValueError) as e:
            problem = f"{type(e).__name__}: {e}"
        logger.warning("⚠️ Corrupt cache entry %s (%s); refetching", body_path, problem)
        return None

    def write(self, service_id: str, pair: str, text: str, response: str) -> None:
        body_path, meta_path = self.entry_paths(service_id, pair, text)
        body_path.parent.mkdir(parents=True, exist_ok=True)
        source, _, target = pair.partition("-")
        meta = {
            "service_id": service_id,
            "source": source,
            "target": target,
            "text_sha256": sha256_text(text),
            "checksum": sha256_text(response),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        # body first: the sidecar is what makes an entry valid
        atomic_write(body_path, response)
        atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True))

    async def get_or_fetch(self, service_id: str, pair: str, text: str,
                           fetch: Callable[[], Awaitable[str]]) -> str:
        key = f"{service_id}\0{pair}\0{sha256_text(text)}"
        slot = self._key_locks.setdefault(key, [asyncio.Lock(), 0])
        slot[1] += 1
        try:
            async with slot[0]:
                cached = self.read(service_id, pair, text)
                if cached is not None:
                    self.hits += 1
                    return cached
                self.misses += 1
                response = await fetch()
                self.write(service_id, pair, text, response)
                return response
        finally:
            slot[1] -= 1
            if slot[1] == 0:
                del self._key_locks[key]


class CachedTranslationService:
    """TranslationService whose responses go through a ResponseCache"""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.id = inner.id
        self.supported_languages = inner.supported_languages
        self.stateful = inner.stateful

    async def translate(self, text: str, source_language: str, target_language: str) -> str:
        return await self.cache.get_or_fetch(
            self.id, f"{source_language}-{target_language}", text,
            lambda: self.inner.translate(text, source_language, target_language),
        )

    def begin_block(self) -> None:
        self.inner.begin_block()


class CachedServiceUnderTest:
    """ServiceUnderTest whose transform results go through a ResponseCache"""

    def __init__(self, inner, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.id = inner.id
        self.stateful = inner.stateful

    async def transform(self, text: str) -> str:
        return await self.cache.get_or_fetch(self.id, TRANSFORM_PAIR, text,
                                             lambda: self.inner.transform(text))

    def begin_block(self) -> None:
        self.inner.begin_block()


def cached(service, cache_dir: Union[str, Path, ResponseCache]):
    """Wrap a translator or service under test with the disk cache"""
    cache = cache_dir if isinstance(cache_dir, ResponseCache) else ResponseCache(cache_dir)
    if hasattr(service, "translate"):
        return CachedTranslationService(service, cache)
    return CachedServiceUnderTest(service, cache)
