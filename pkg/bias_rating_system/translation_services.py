"""
TRANSLATION SERVICES
====================
The service-under-test abstraction and everything that produces one:

1. Contracts - TranslationService (translate between languages) and
   ServiceUnderTest (transform text)
2. Experiment design - round_trip (home -> middle -> home) and
   sequential_compose (s2 after s1)
3. Mock translators - identity, collapse_to, equalize, flip; offline and
   analytically predictable because they use the extraction lexicons
4. Live HTTP adapter - httpx client with bounded concurrency, request
   spacing and exponential-backoff retries
5. Service configuration - JSON service files and `mock:` shorthands

Credentials are only ever read from the environment variable named in the
service config (a .env file is honoured).

Author: Bias Rating Team
"""

import asyncio
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Protocol, Tuple, Union

import httpx
from pydantic import BaseModel, Field, ValidationError, model_validator

from bias_core_model import (
    AttributeSpec,
    ConfigError,
    ExecutionError,
    NetworkExhaustedError,
    gender_attribute,
)

try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = None

logger = logging.getLogger(__name__)

DEFAULT_LANGUAGES: Tuple[str, ...] = ("en", "ar", "es", "fr", "hi", "it", "pt", "ru", "tr")


# ==================================================================================
# 1. CONTRACTS
# ==================================================================================
class TranslationService(Protocol):
    id: str
    supported_languages: Tuple[str, ...]
    stateful: bool

    async def translate(self, text: str, source_language: str, target_language: str) -> str:
        ...

    def begin_block(self) -> None:
        ...


class ServiceUnderTest(Protocol):
    id: str
    stateful: bool

    async def transform(self, text: str) -> str:
        ...

    def begin_block(self) -> None:
        ...


def check_language_pair(service: TranslationService, source: str, target: str) -> None:
    unsupported = [lang for lang in (source, target) if lang not in service.supported_languages]
    if unsupported:
        raise ConfigError(
            f"service '{service.id}' does not support {source}->{target} "
            f"(unsupported: {unsupported})"
        )


# ==================================================================================
# 2. EXPERIMENT DESIGN
# ==================================================================================
class RoundTripService:
    """home -> middle -> home through one translator"""

    def __init__(self, translator: TranslationService, middle: str, home: str = "en"):
        check_language_pair(translator, home, middle)
        self.translator = translator
        self.middle = middle
        self.home = home
        self.id = f"{translator.id}:{home}-{middle}-{home}"
        self.stateful = translator.stateful

    async def transform(self, text: str) -> str:
        there = await self.translator.translate(text, self.home, self.middle)
        return await self.translator.translate(there, self.middle, self.home)

    def begin_block(self) -> None:
        self.translator.begin_block()


def round_trip(translator: TranslationService, middle: str, home: str = "en") -> RoundTripService:
    return RoundTripService(translator, middle, home)


class SequentialService:
    """s2 applied to the output of s1"""

    def __init__(self, first: ServiceUnderTest, second: ServiceUnderTest):
        self.first = first
        self.second = second
        self.id = f"({first.id})*({second.id})"
        self.stateful = first.stateful or second.stateful

    async def transform(self, text: str) -> str:
        intermediate = await self._run(self.first, text, "stage 1")
        return await self._run(self.second, intermediate, "stage 2")

    @staticmethod
    async def _run(service: ServiceUnderTest, text: str, stage: str) -> str:
        try:
            return await service.transform(text)
        except ExecutionError as e:
            raise type(e)(str(e), stage=f"{stage} {service.id}") from e

    def begin_block(self) -> None:
        self.first.begin_block()
        self.second.begin_block()


def sequential_compose(first: ServiceUnderTest, second: ServiceUnderTest) -> SequentialService:
    return SequentialService(first, second)


# ==================================================================================
# 3. MOCK TRANSLATORS
# ==================================================================================
MockBehavior = Literal["identity", "collapse_to", "equalize", "flip"]

_WORD = re.compile(r"[A-Za-z]+")


def _match_case(original: str, replacement: str) -> str:
    if len(original) > 1 and original.isupper():
        return replacement.upper()
    if original[0].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement.lower()


class MockTranslator:
    """
    Offline translator that rewrites pronouns instead of translating.

    identity    : returns the input verbatim
    collapse_to : every pronoun of another value becomes `target`'s nominative
    flip        : swaps the two nominative pronouns (he <-> she)
    equalize    : every pronoun is reassigned He, She, He, ... from a counter
                  that begin_block() resets; the only stateful mock
    """

    def __init__(self,
                 behavior: MockBehavior,
                 seed: int = 0,
                 target: Optional[str] = None,
                 attribute: Optional[AttributeSpec] = None,
                 supported_languages: Tuple[str, ...] = DEFAULT_LANGUAGES,
                 service_id: Optional[str] = None):
        self.attribute = attribute or gender_attribute()
        self.behavior = behavior
        self.seed = seed
        self.supported_languages = tuple(supported_languages)
        self.stateful = behavior == "equalize"
        self._counter = 0

        values = self.attribute.non_trivial_values
        self._value_of = {w.lower(): v for v, words in self.attribute.lexicons.items() for w in words}
        if not self._value_of:
            raise ConfigError(f"attribute '{self.attribute.name}' has no lexicons to rewrite")
        self._nominatives = {self.attribute.nominative(v) for v in values}

        if behavior == "collapse_to":
            self.target = target or values[0]
            if self.target not in values:
                raise ConfigError(f"collapse_to target '{self.target}' is not one of {list(values)}")
            suffix = f"-{self.target.lower()}"
        elif behavior == "flip":
            if len(values) != 2:
                raise ConfigError("flip needs an attribute with exactly two non-catch-all values")
            self.target = None
            suffix = ""
        elif behavior in ("identity", "equalize"):
            self.target = None
            suffix = ""
        else:
            raise ConfigError(f"unknown mock behavior '{behavior}'")

        self.id = service_id or f"mock-{behavior}{suffix}-s{seed}"

    def begin_block(self) -> None:
        self._counter = 0

    async def translate(self, text: str, source_language: str, target_language: str) -> str:
        check_language_pair(self, source_language, target_language)
        if self.behavior == "identity":
            return text
        return _WORD.sub(self._rewrite, text)

    def _rewrite(self, match: "re.Match[str]") -> str:
        word = match.group(0)
        value = self._value_of.get(word.lower())
        if value is None:
            return word

        if self.behavior == "collapse_to":
            if value == self.target:
                return word
            return _match_case(word, self.attribute.nominative(self.target))

        if self.behavior == "flip":
            if word.lower() not in self._nominatives:
                return word
            other = next(v for v in self.attribute.non_trivial_values if v != value)
            return _match_case(word, self.attribute.nominative(other))

        # equalize
        values = self.attribute.non_trivial_values
        assigned = values[self._counter % len(values)]
        self._counter += 1
        return _match_case(word, self.attribute.nominative(assigned))


def mock_translator(behavior: MockBehavior, seed: int = 0, target: Optional[str] = None) -> MockTranslator:
    return MockTranslator(behavior, seed=seed, target=target)


class CountingService:
    """Wraps a translator and counts the calls that reach it"""

    def __init__(self, inner: TranslationService):
        self.inner = inner
        self.id = inner.id
        self.supported_languages = inner.supported_languages
        self.stateful = inner.stateful
        self.calls = 0

    async def translate(self, text: str, source_language: str, target_language: str) -> str:
        self.calls += 1
        return await self.inner.translate(text, source_language, target_language)

    def begin_block(self) -> None:
        self.inner.begin_block()


# ==================================================================================
# 4. LIVE HTTP ADAPTER
# ==================================================================================
class HttpAdapterConfig(BaseModel):
    """How to call a REST translation endpoint"""
    base_url: str = Field(..., description="Endpoint URL")
    http_method: Literal["GET", "POST"] = "POST"
    request_template: Dict[str, Any] = Field(
        ..., description="Query params (GET) or JSON body (POST); strings may use {text} {source} {target} {key}"
    )
    response_path: str = Field(..., description="Dot path to the translated text, e.g. data.translations.0.text")
    key_env: Optional[str] = Field(default=None, description="Environment variable holding the credential")
    headers: Dict[str, str] = Field(default_factory=dict)
    min_interval_ms: int = Field(default=0, ge=0)
    max_retries: int = Field(default=3, ge=0)
    max_concurrency: int = Field(default=4, ge=1)
    timeout_s: float = Field(default=30.0, gt=0)
    backoff_base_s: float = Field(default=0.5, ge=0)
    supported_languages: Tuple[str, ...] = DEFAULT_LANGUAGES


def _fill_placeholders(template: Any, values: Dict[str, str]) -> Any:
    if isinstance(template, str):
        for name, value in values.items():
            template = template.replace("{" + name + "}", value)
        return template
    if isinstance(template, dict):
        return {k: _fill_placeholders(v, values) for k, v in template.items()}
    if isinstance(template, list):
        return [_fill_placeholders(v, values) for v in template]
    return template


def _uses_placeholder(template: Any, name: str) -> bool:
    if isinstance(template, str):
        return "{" + name + "}" in template
    if isinstance(template, dict):
        return any(_uses_placeholder(v, name) for v in template.values())
    if isinstance(template, list):
        return any(_uses_placeholder(v, name) for v in template)
    return False


def extract_path(document: Any, path: str) -> Any:
    """Follow a dot path through dicts and lists ("data.items.0.text")"""
    node = document
    for part in path.split("."):
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise KeyError(path) from None
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


def resolve_credential(key_env: Optional[str]) -> Optional[str]:
    if key_env is None:
        return None
    if load_dotenv is not None:
        load_dotenv()
    key = os.getenv(key_env)
    if not key:
        raise ConfigError(
            f"{key_env} not found. Set it in the environment or in a .env file; "
            f"credentials are never read from config files"
        )
    return key


class HttpTranslationService:
    """
    Translator backed by a REST endpoint.

    At most max_concurrency requests are in flight, successive request
    starts are spaced by at least min_interval_ms, and transport errors,
    HTTP 429 and 5xx responses are retried with exponential backoff.
    """

    def __init__(self, service_id: str, config: HttpAdapterConfig,
                 transport: Optional[httpx.AsyncBaseTransport] = None):
        self.id = service_id
        self.config = config
        self.supported_languages = tuple(config.supported_languages)
        self.stateful = False
        if _uses_placeholder(config.request_template, "key") and config.key_env is None:
            raise ConfigError(f"service '{service_id}' uses {{key}} but names no key_env")
        self._key = resolve_credential(config.key_env)
        self._transport = transport
        self._client: Optional[httpx.AsyncClient] = None
        self._semaphore: Optional[asyncio.Semaphore] = None
        self._spacing_lock: Optional[asyncio.Lock] = None
        self._next_start = 0.0
        self.requests_sent = 0

    def begin_block(self) -> None:
        pass

    def _ensure_client(self) -> httpx.AsyncClient:
        if self._client is None:
            self._client = httpx.AsyncClient(
                transport=self._transport,
                timeout=self.config.timeout_s,
                headers=self.config.headers,
            )
            self._semaphore = asyncio.Semaphore(self.config.max_concurrency)
            self._spacing_lock = asyncio.Lock()
        return self._client

    async def aclose(self) -> None:
        if self._client is not None:
            await self._client.aclose()
            self._client = None

    async def _wait_for_slot(self) -> None:
        interval = self.config.min_interval_ms / 1000.0
        async with self._spacing_lock:
            loop = asyncio.get_running_loop()
            now = loop.time()
            if self._next_start > now:
                await asyncio.sleep(self._next_start - now)
                now = loop.time()
            self._next_start = max(now, self._next_start) + interval

    async def _send(self, client: httpx.AsyncClient, payload: Any) -> httpx.Response:
        self.requests_sent += 1
        if self.config.http_method == "GET":
            return await client.get(self.config.base_url, params=payload)
        return await client.post(self.config.base_url, json=payload)

    def _parse(self, response: httpx.Response, text: str) -> str:
        try:
            translated = extract_path(response.json(), self.config.response_path)
        except (ValueError, KeyError):
            raise ExecutionError(
                f"response has no '{self.config.response_path}': {response.text[:200]}", stage=self.id
            ) from None
        if not isinstance(translated, str) or (text.strip() and not translated.strip()):
            raise ExecutionError(f"empty or non-text translation: {translated!r}", stage=self.id)
        return translated

    async def translate(self, text: str, source_language: str, target_language: str) -> str:
        check_language_pair(self, source_language, target_language)
        client = self._ensure_client()
        payload = _fill_placeholders(self.config.request_template, {
            "text": text, "source": source_language, "target": target_language, "key": self._key or "",
        })

        last_problem = ""
        async with self._semaphore:
            for attempt in range(self.config.max_retries + 1):
                await self._wait_for_slot()
                try:
                    response = await self._send(client, payload)
                except httpx.HTTPError as e:
                    last_problem = f"{type(e).__name__}: {e}"
                else:
                    if response.status_code == 429 or response.status_code >= 500:
                        last_problem = f"HTTP {response.status_code}"
                    elif response.status_code >= 400:
                        raise ExecutionError(
                            f"HTTP {response.status_code} for {source_language}->{target_language}: "
                            f"{response.text[:200]}", stage=self.id
                        )
                    else:
                        return self._parse(response, text)

                if attempt < self.config.max_retries:
                    delay = self.config.backoff_base_s * (2 ** attempt)
                    logger.warning("⚠️ %s %s->%s failed (%s); retry %d/%d in %.2fs", self.id,
                                   source_language, target_language, last_problem,
                                   attempt + 1, self.config.max_retries, delay)
                    await asyncio.sleep(delay)

        raise NetworkExhaustedError(
            f"gave up after {self.config.max_retries + 1} attempts: {last_problem}", stage=self.id
        )


# ==================================================================================
# 5. SERVICE CONFIGURATION
# ==================================================================================
class MockConfig(BaseModel):
    behavior: MockBehavior
    seed: int = 0
    target: Optional[str] = None


class ServiceConfig(BaseModel):
    """Service config file: {id, type, http?, mock?}"""
    id: str = Field(..., min_length=1)
    type: Literal["http", "mock"]
    http: Optional[HttpAdapterConfig] = None
    mock: Optional[MockConfig] = None

    @model_validator(mode="after")
    def _check_section(self):
        if self.type == "http" and self.http is None:
            raise ValueError("an http service needs an 'http' section")
        if self.type == "mock" and self.mock is None:
            raise ValueError("a mock service needs a 'mock' section")
        return self


_MOCK_TOKEN = re.compile(r"^mock:(?P<behavior>[a-z_]+)(?:[:(](?P<target>[A-Za-z]+)\)?)?$")


def parse_mock_token(token: str) -> ServiceConfig:
    """'mock:identity', 'mock:collapse_to:He' or 'mock:collapse_to(He)'"""
    match = _MOCK_TOKEN.match(token.strip())
    if not match:
        raise ConfigError(f"bad mock service token '{token}'")
    behavior = match.group("behavior")
    if behavior not in ("identity", "collapse_to", "equalize", "flip"):
        raise ConfigError(f"unknown mock behavior '{behavior}' in '{token}'")
    mock = MockConfig(behavior=behavior, target=match.group("target"))
    return ServiceConfig(id=token.strip(), type="mock", mock=mock)


def load_service_config(path: Union[str, Path]) -> ServiceConfig:
    path = Path(path)
    try:
        return ServiceConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"service config not found: {path}") from None
    except ValidationError as e:
        raise ConfigError(f"malformed service config {path}: {e}") from None


def build_service(config: ServiceConfig,
                  transport: Optional[httpx.AsyncBaseTransport] = None) -> TranslationService:
    if config.type == "mock":
        return MockTranslator(config.mock.behavior, seed=config.mock.seed, target=config.mock.target,
                              service_id=config.id)
    return HttpTranslationService(config.id, config.http, transport=transport)


def load_service(token_or_path: str) -> TranslationService:
    """Build a translator from a `mock:` token or a service config file"""
    if token_or_path.startswith("mock:"):
        return build_service(parse_mock_token(token_or_path))
    return build_service(load_service_config(token_or_path))


async def close_service(service: Any) -> None:
    """Release network resources of a (possibly wrapped) translator"""
    while service is not None:
        closer = getattr(service, "aclose", None)
        if closer is not None:
            await closer()
        service = getattr(service, "inner", None)


def language_list(spec: str) -> List[str]:
    """'hi,fr, ar' -> ['hi', 'fr', 'ar']"""
    return [lang.strip() for lang in spec.split(",") if lang.strip()]
