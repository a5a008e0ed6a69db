"""
Integration Test for the Mock Translation Server
Exercises the endpoints and rates the server through the live HTTP adapter
"""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "bias_rating_system"))

import asyncio

import httpx

from bias_core_model import BiasRating, default_spec_set
from rating_engine import RatingConfig, rate_service
from translation_server import app
from translation_services import build_service, close_service, load_service_config

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config", "services", "loopback_http.json")


def call(method, path, **kwargs):
    async def go():
        async with httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url="http://test") as client:
            return await client.request(method, path, **kwargs)
    return asyncio.run(go())


def test_health_check():
    response = call("GET", "/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_languages():
    response = call("GET", "/languages")
    assert "en" in response.json() and "hi" in response.json()


def test_translate_applies_the_behavior():
    response = call("POST", "/translate", json={
        "text": "She is a Nurse. He is a Pilot.", "source": "en", "target": "hi",
        "behavior": "collapse_to", "behavior_target": "He",
    })
    assert response.status_code == 200
    assert response.json()["translated_text"] == "He is a Nurse. He is a Pilot."


def test_unsupported_pair_is_a_bad_request():
    response = call("POST", "/translate", json={"text": "He is a Chef.", "source": "en", "target": "de"})
    assert response.status_code == 400
    assert "does not support" in response.json()["detail"]


def test_malformed_request_is_rejected():
    response = call("POST", "/translate", json={"source": "en", "target": "hi"})
    assert response.status_code == 422


def test_rating_the_server_through_http():
    print("\n" + "=" * 70)
    print("TEST: rating the loopback server over HTTP")
    print("=" * 70)

    service = build_service(load_service_config(CONFIG_PATH), transport=httpx.ASGITransport(app=app))

    async def go():
        try:
            return await rate_service(service, ["hi", "fr"], default_spec_set(include_pure=True), RatingConfig())
        finally:
            await close_service(service)

    report = asyncio.run(go())
    print(f"✅ {report.service_id}: {report.overall.value} after {service.requests_sent} requests")

    assert report.service_id == "loopback-collapse-he"
    assert report.overall is BiasRating.BS
    # collapse is caught in T1: one block of 20 texts, two legs, two languages
    assert service.requests_sent == 80
