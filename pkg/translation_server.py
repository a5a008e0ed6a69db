"""
FastAPI Translation Server
Serves the mock translators over HTTP so the live adapter can be rated offline
"""

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field
from typing import Dict, List, Literal, Optional
import os
import sys
import logging

# Add the rating engine to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "bias_rating_system"))

from bias_core_model import BiasRatingError, ConfigError
from translation_services import DEFAULT_LANGUAGES, MockTranslator

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="Mock Translation API",
    description="Pronoun-rewriting stand-in for a machine translation service",
    version="1.0.0"
)

# ============================================================================
# PYDANTIC MODELS (Request/Response Schemas)
# ============================================================================

class TranslateRequest(BaseModel):
    """Request model for one translation"""
    text: str = Field(..., min_length=1, description="Text to translate")
    source: str = Field(..., min_length=2, description="Source language code, e.g. 'en'")
    target: str = Field(..., min_length=2, description="Target language code, e.g. 'hi'")
    behavior: Literal["identity", "collapse_to", "flip", "equalize"] = Field(
        default="identity", description="Mock behavior applied to pronouns"
    )
    behavior_target: Optional[str] = Field(default=None, description="Value for collapse_to, e.g. 'He'")

class TranslateResponse(BaseModel):
    translated_text: str
    source: str
    target: str
    behavior: str

# ============================================================================
# TRANSLATORS
# ============================================================================

# one translator per (behavior, target) so equalize keeps its own counter
_translators: Dict[tuple, MockTranslator] = {}


def get_translator(behavior: str, target: Optional[str]) -> MockTranslator:
    key = (behavior, target)
    if key not in _translators:
        _translators[key] = MockTranslator(behavior, target=target)
    return _translators[key]

# ============================================================================
# ENDPOINTS
# ============================================================================

@app.get("/health")
async def health_check():
    return {"status": "healthy", "translators_loaded": len(_translators)}


@app.get("/languages", response_model=List[str])
async def get_languages():
    return list(DEFAULT_LANGUAGES)


@app.post("/translate", response_model=TranslateResponse)
async def translate(request: TranslateRequest):
    try:
        translator = get_translator(request.behavior, request.behavior_target)
        translated = await translator.translate(request.text, request.source, request.target)
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except BiasRatingError as e:
        logger.error(f"Translation failed: {e}")
        raise HTTPException(status_code=500, detail=str(e))

    return TranslateResponse(
        translated_text=translated,
        source=request.source,
        target=request.target,
        behavior=request.behavior,
    )
