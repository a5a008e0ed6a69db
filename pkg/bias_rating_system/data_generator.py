"""
DATA GENERATOR
==============
Generates deterministic data blocks of template sentences that realize a
declared attribute distribution exactly.

Each text is made of `sentences_per_text` sentences of the form
"{G} is a {O}." - e.g. "She is a Florist. He is a Gardener."

Slot counts follow the largest-remainder rounding of the spec's proportions,
so a block carries no sampling noise of its own. Gender-to-slot assignment and
occupation choice are driven by numpy's PCG64 generator, whose stream is
stable across platforms for a given seed.

Author: Bias Rating Team
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from bias_core_model import (
    AttributeSpec,
    ConfigError,
    DataBlock,
    DistributionSpec,
    SpecError,
    UsageError,
    ValueCounts,
    dump_json,
)

logger = logging.getLogger(__name__)


# ==================================================================================
# 1. TEMPLATE CONFIGURATION
# ==================================================================================
DEFAULT_SENTENCE_TEMPLATE = "{G} is a {O}."


class TemplateConfig(BaseModel):
    """How texts are assembled from gender words and occupations"""
    sentence_template: str = Field(default=DEFAULT_SENTENCE_TEMPLATE,
                                   description="Sentence with {G} and {O} placeholders")
    sentences_per_text: Optional[int] = Field(
        default=None, ge=1,
        description="Slots per text; defaults to the number of non-catch-all values",
    )
    gender_words: Dict[str, str] = Field(default_factory=lambda: {"He": "He", "She": "She"})
    occupations: Tuple[str, ...] = Field(default=())
    occupations_file: Optional[str] = Field(default=None, description="Newline-delimited occupation list")

    @model_validator(mode="after")
    def _check_template(self):
        if "{G}" not in self.sentence_template or "{O}" not in self.sentence_template:
            raise ValueError("sentence_template must contain both {G} and {O}")
        return self

    def resolved_sentences_per_text(self, attribute: AttributeSpec) -> int:
        return self.sentences_per_text or len(attribute.non_trivial_values)

    def render(self, gender_word: str, occupation: str) -> str:
        return self.sentence_template.replace("{G}", gender_word).replace("{O}", occupation)


def load_occupations(path: Union[str, Path]) -> Tuple[str, ...]:
    """Read a UTF-8 occupation list: one per line, '#' starts a comment"""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ConfigError(f"occupation list not found: {path}") from None
    occupations = []
    for line in lines:
        entry = line.split("#", 1)[0].strip()
        if entry:
            occupations.append(entry)
    return tuple(occupations)


def load_template(path: Union[str, Path]) -> TemplateConfig:
    """
    Read a template JSON file. An `occupations_file` entry is resolved relative
    to the template file and merged into `occupations`.
    """
    path = Path(path)
    try:
        template = TemplateConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"template file not found: {path}") from None
    except ValidationError as e:
        raise ConfigError(f"malformed template file {path}: {e}") from None

    if template.occupations_file:
        occupations = load_occupations(path.parent / template.occupations_file)
        template = template.model_copy(update={"occupations": template.occupations + occupations})
    return template


def default_template(occupations_path: Union[str, Path, None] = None) -> TemplateConfig:
    """Two-sentence gender template over the shipped occupation list"""
    if occupations_path is None:
        occupations_path = Path(__file__).resolve().parent.parent / "data" / "occupations.txt"
    return TemplateConfig(occupations=load_occupations(occupations_path))


# ==================================================================================
# 2. EXACT COUNTS
# ==================================================================================
def expected_counts(spec: DistributionSpec, total_slots: int) -> ValueCounts:
    """
    Convert a proportion vector into integer counts summing to total_slots.

    Uses largest-remainder rounding: floor every share, then hand the
    remaining units out in decreasing order of fractional part. Ties go to
    the value listed first in the attribute.
    """
    if total_slots <= 0:
        raise UsageError(f"total_slots must be positive, got {total_slots}")

    shares = np.asarray(spec.proportions, dtype=np.float64) * total_slots
    # the epsilon keeps 0.3 * 10 = 2.9999999999999996 from flooring to 2
    floors = np.floor(shares + 1e-9).astype(np.int64)
    remainders = shares - floors
    missing = total_slots - int(floors.sum())

    # stable sort on the negated remainder keeps positional order among ties
    order = np.argsort(-np.round(remainders, 9), kind="stable")
    counts = floors.copy()
    for idx in order[:missing]:
        counts[idx] += 1

    return ValueCounts(attribute=spec.attribute, counts=tuple(int(c) for c in counts))


# ==================================================================================
# 3. BLOCK GENERATION
# ==================================================================================
def _check_generation_inputs(spec: DistributionSpec, template: TemplateConfig, slots_per_text: int) -> None:
    if not spec.is_generation_spec:
        raise SpecError(
            f"spec '{spec.label}' gives the catch-all '{spec.attribute.catch_all}' a nonzero "
            f"proportion; it is never generated as input"
        )
    missing = [v for v in spec.attribute.non_trivial_values if v not in template.gender_words]
    if missing:
        raise ConfigError(f"template has no surface word for {missing}")
    if len(template.occupations) < slots_per_text:
        raise ConfigError(
            f"{len(template.occupations)} occupations cannot fill {slots_per_text} "
            f"distinct slots per text"
        )


def generate_block(spec: DistributionSpec,
                   template: TemplateConfig,
                   block_size: int,
                   seed: int) -> DataBlock:
    """
    Generate one data block realizing `spec` exactly.

    Parameters:
    -----------
    spec : DistributionSpec
        Distribution to realize; its catch-all proportion must be 0
    template : TemplateConfig
        Sentence template, gender words and occupations
    block_size : int
        Number of texts in the block
    seed : int
        PCG64 seed; identical inputs and seed give byte-identical output

    Returns:
    --------
    DataBlock with block_size texts and the slot-level truth
    """
    if block_size <= 0:
        raise UsageError(f"block_size must be positive, got {block_size}")
    slots_per_text = template.resolved_sentences_per_text(spec.attribute)
    _check_generation_inputs(spec, template, slots_per_text)

    total_slots = block_size * slots_per_text
    counts = expected_counts(spec, total_slots)

    rng = np.random.Generator(np.random.PCG64(seed))
    slots = np.repeat(np.arange(len(spec.attribute.values)), counts.counts)
    slots = rng.permutation(slots).reshape(block_size, slots_per_text)

    texts: List[str] = []
    slot_truth: List[Tuple[str, ...]] = []
    for row in slots:
        occupation_idx = rng.choice(len(template.occupations), size=slots_per_text, replace=False)
        values = tuple(spec.attribute.values[i] for i in row)
        sentences = [
            template.render(template.gender_words[value], template.occupations[j])
            for value, j in zip(values, occupation_idx)
        ]
        texts.append(" ".join(sentences))
        slot_truth.append(values)

    logger.debug("Generated block '%s' (seed=%d): %s", spec.label, seed, counts.as_dict())
    return DataBlock(
        spec=spec,
        texts=tuple(texts),
        slot_truth=tuple(slot_truth),
        block_size=block_size,
        slots_per_text=slots_per_text,
        seed=seed,
    )


# ==================================================================================
# 4. PERSISTENCE
# ==================================================================================
def save_block(block: DataBlock, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(block), encoding="utf-8")
    return path


def load_block(path: Union[str, Path]) -> DataBlock:
    path = Path(path)
    try:
        return DataBlock.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"block file not found: {path}") from None
    except ValidationError as e:
        raise SpecError(f"malformed block file {path}: {e}") from None
