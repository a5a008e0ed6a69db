"""
Tests for mock translators, round trips, composition and the HTTP adapter
"""

import asyncio
import json
from pathlib import Path

import httpx
import pytest

from bias_core_model import ConfigError, ExecutionError, NetworkExhaustedError, default_spec_set
from data_generator import default_template, generate_block
from translation_services import (
    CountingService,
    HttpAdapterConfig,
    HttpTranslationService,
    MockTranslator,
    extract_path,
    language_list,
    load_service,
    mock_translator,
    parse_mock_token,
    round_trip,
    sequential_compose,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config" / "services"


def translate(service, text, source="en", target="hi"):
    return asyncio.run(service.translate(text, source, target))


# ============================================================================
# MOCK TRANSLATORS
# ============================================================================

def test_identity_returns_input():
    assert translate(mock_translator("identity"), "She is a Nurse.") == "She is a Nurse."


def test_collapse_rewrites_every_other_pronoun():
    mock = mock_translator("collapse_to", target="He")
    assert mock.id == "mock-collapse_to-he-s0"
    assert translate(mock, "She is a Nurse. He is a Pilot.") == "He is a Nurse. He is a Pilot."
    assert translate(mock, "SHE said her cat") == "HE said he cat"


def test_collapse_target_must_be_a_value():
    with pytest.raises(ConfigError):
        MockTranslator("collapse_to", target="Other")


def test_flip_swaps_nominatives_only():
    mock = mock_translator("flip")
    assert translate(mock, "She is a Nurse. He is a Pilot.") == "He is a Nurse. She is a Pilot."
    assert translate(mock, "Call her now.") == "Call her now."


def test_equalize_alternates_and_resets_per_block():
    mock = mock_translator("equalize")
    assert mock.stateful
    assert translate(mock, "He is a Nurse. He is a Pilot.") == "He is a Nurse. She is a Pilot."
    assert translate(mock, "She is a Chef.") == "He is a Chef."
    mock.begin_block()
    assert translate(mock, "She is a Chef. She is a Baker.") == "He is a Chef. She is a Baker."


def test_unknown_behavior_is_rejected():
    with pytest.raises(ConfigError):
        MockTranslator("shuffle")


def test_unsupported_language_is_a_config_error():
    mock = MockTranslator("identity", supported_languages=("en", "hi"))
    with pytest.raises(ConfigError):
        translate(mock, "He is a Chef.", "en", "fr")
    with pytest.raises(ConfigError):
        round_trip(mock, "fr")


# ============================================================================
# ROUND TRIPS AND COMPOSITION
# ============================================================================

def test_round_trip_goes_there_and_back():
    counter = CountingService(mock_translator("flip"))
    service = round_trip(counter, "hi")
    assert service.id == "mock-flip-s0:en-hi-en"
    # flipping twice restores the input
    assert asyncio.run(service.transform("She is a Nurse. He is a Pilot.")) == "She is a Nurse. He is a Pilot."
    assert counter.calls == 2


def test_round_trip_of_collapse_is_collapse():
    service = round_trip(mock_translator("collapse_to", target="She"), "fr")
    assert asyncio.run(service.transform("He is a Nurse. He is a Pilot.")) == "She is a Nurse. She is a Pilot."


def test_sequential_compose_feeds_first_into_second():
    composed = sequential_compose(round_trip(mock_translator("collapse_to", target="He"), "hi"),
                                  round_trip(mock_translator("flip"), "fr"))
    assert composed.id.startswith("(mock-collapse_to-he-s0:en-hi-en)*(")
    assert asyncio.run(composed.transform("She is a Nurse. She is a Pilot.")) == "He is a Nurse. He is a Pilot."
    assert not composed.stateful
    assert sequential_compose(composed, round_trip(mock_translator("equalize"), "ar")).stateful


class Broken:
    id = "broken"
    stateful = False

    async def transform(self, text):
        raise NetworkExhaustedError("no route")

    def begin_block(self):
        pass


def test_composition_failures_name_the_stage():
    composed = sequential_compose(round_trip(mock_translator("identity"), "hi"), Broken())
    with pytest.raises(NetworkExhaustedError) as info:
        asyncio.run(composed.transform("He is a Chef."))
    assert info.value.stage == "stage 2 broken"


# ============================================================================
# HTTP ADAPTER
# ============================================================================

def http_config(**overrides):
    values = dict(
        base_url="https://mt.example/translate",
        request_template={"q": "{text}", "from": "{source}", "to": "{target}"},
        response_path="data.translations.0.text",
        backoff_base_s=0,
    )
    values.update(overrides)
    return HttpAdapterConfig(**values)


def ok_response(text):
    return httpx.Response(200, json={"data": {"translations": [{"text": text}]}})


def run_http(service, text="He is a Chef.", source="en", target="hi"):
    async def go():
        try:
            return await service.translate(text, source, target)
        finally:
            await service.aclose()
    return asyncio.run(go())


def test_post_sends_filled_template_as_json():
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        return ok_response("Il est chef.")

    service = HttpTranslationService("live", http_config(), transport=httpx.MockTransport(handler))
    assert run_http(service, target="fr") == "Il est chef."
    assert seen == [{"q": "He is a Chef.", "from": "en", "to": "fr"}]


def test_get_sends_query_params_with_credential(monkeypatch):
    monkeypatch.setenv("MT_TEST_KEY", "secret-123")
    seen = []

    def handler(request):
        seen.append(dict(request.url.params))
        return ok_response("ok")

    config = http_config(http_method="GET", key_env="MT_TEST_KEY",
                         request_template={"q": "{text}", "target": "{target}", "key": "{key}"})
    service = HttpTranslationService("live", config, transport=httpx.MockTransport(handler))
    run_http(service)
    assert seen == [{"q": "He is a Chef.", "target": "hi", "key": "secret-123"}]


def test_missing_credential_is_a_config_error(monkeypatch):
    monkeypatch.delenv("MT_MISSING_KEY", raising=False)
    with pytest.raises(ConfigError, match="MT_MISSING_KEY"):
        HttpTranslationService("live", http_config(key_env="MT_MISSING_KEY"))


def test_key_placeholder_needs_key_env():
    with pytest.raises(ConfigError):
        HttpTranslationService("live", http_config(request_template={"q": "{text}", "key": "{key}"}))


def test_server_errors_are_retried():
    replies = iter([httpx.Response(503), httpx.Response(429), ok_response("ok")])
    service = HttpTranslationService("live", http_config(), transport=httpx.MockTransport(lambda r: next(replies)))
    assert run_http(service) == "ok"
    assert service.requests_sent == 3


def test_transport_errors_exhaust_retries():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    service = HttpTranslationService("live", http_config(max_retries=2), transport=httpx.MockTransport(handler))
    with pytest.raises(NetworkExhaustedError):
        run_http(service)
    assert service.requests_sent == 3


def test_client_errors_are_not_retried():
    service = HttpTranslationService("live", http_config(),
                                     transport=httpx.MockTransport(lambda r: httpx.Response(403, text="denied")))
    with pytest.raises(ExecutionError) as info:
        run_http(service)
    assert not isinstance(info.value, NetworkExhaustedError)
    assert service.requests_sent == 1


def test_unexpected_response_shape_is_an_execution_error():
    service = HttpTranslationService("live", http_config(),
                                     transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"data": {}})))
    with pytest.raises(ExecutionError, match="data.translations.0.text"):
        run_http(service)


def test_empty_translation_is_an_execution_error():
    service = HttpTranslationService("live", http_config(), transport=httpx.MockTransport(lambda r: ok_response("  ")))
    with pytest.raises(ExecutionError):
        run_http(service)


def test_concurrency_is_bounded():
    in_flight = 0
    peak = 0

    class SlowTransport(httpx.AsyncBaseTransport):
        async def handle_async_request(self, request):
            nonlocal in_flight, peak
            in_flight += 1
            peak = max(peak, in_flight)
            await asyncio.sleep(0.01)
            in_flight -= 1
            return ok_response("ok")

    service = HttpTranslationService("live", http_config(max_concurrency=2), transport=SlowTransport())

    async def go():
        try:
            await asyncio.gather(*(service.translate(f"He is {i}.", "en", "hi") for i in range(8)))
        finally:
            await service.aclose()

    asyncio.run(go())
    assert peak == 2
    assert service.requests_sent == 8


def test_extract_path_walks_dicts_and_lists():
    doc = {"data": {"translations": [{"translatedText": "x"}]}}
    assert extract_path(doc, "data.translations.0.translatedText") == "x"
    with pytest.raises(KeyError):
        extract_path(doc, "data.translations.1.translatedText")


# ============================================================================
# SERVICE CONFIGURATION
# ============================================================================

def test_mock_tokens():
    assert parse_mock_token("mock:identity").mock.behavior == "identity"
    assert parse_mock_token("mock:collapse_to:He").mock.target == "He"
    assert parse_mock_token("mock:collapse_to(She)").mock.target == "She"
    with pytest.raises(ConfigError):
        parse_mock_token("mock:")
    with pytest.raises(ConfigError):
        parse_mock_token("mock:shuffle")


def test_load_service_from_token_and_file():
    assert load_service("mock:equalize").id == "mock:equalize"
    assert load_service(str(CONFIG_DIR / "mock_collapse_he.json")).id == "mock-collapse-he"
    with pytest.raises(ConfigError):
        load_service(str(CONFIG_DIR / "missing.json"))


def test_shipped_live_config_needs_its_credential(monkeypatch):
    monkeypatch.delenv("GOOGLE_TRANSLATE_API_KEY", raising=False)
    monkeypatch.setattr("translation_services.load_dotenv", None)
    with pytest.raises(ConfigError, match="GOOGLE_TRANSLATE_API_KEY"):
        load_service(str(CONFIG_DIR / "google_translate_v2.json"))


def test_language_list():
    assert language_list("hi, fr,,ar ") == ["hi", "fr", "ar"]


def test_request_starts_are_spaced_by_min_interval():
    interval_ms = 50
    starts = []

    def handler(request):
        starts.append(asyncio.get_running_loop().time())
        return ok_response("ok")

    service = HttpTranslationService("live", http_config(min_interval_ms=interval_ms, max_concurrency=4),
                                     transport=httpx.MockTransport(handler))

    async def go():
        try:
            await asyncio.gather(*(service.translate(f"He is {i}.", "en", "hi") for i in range(5)))
        finally:
            await service.aclose()

    asyncio.run(go())
    assert len(starts) == 5
    starts.sort()
    gaps = [b - a for a, b in zip(starts, starts[1:])]
    # timestamps are taken inside the transport, a little after each reserved slot
    assert all(gap >= interval_ms / 1000.0 - 0.01 for gap in gaps)
    assert starts[-1] - starts[0] >= 4 * interval_ms / 1000.0 - 0.01


def test_flip_twice_restores_generated_blocks():
    specs = default_spec_set(include_pure=True)
    service = round_trip(mock_translator("flip"), "ru")
    for spec in specs.specs:
        block = generate_block(spec, default_template(), 30, seed=5)
        outputs = [asyncio.run(service.transform(text)) for text in block.texts]
        assert outputs == list(block.texts)
