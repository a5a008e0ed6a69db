"""
RATING ENGINE
=============

This module runs the 2-step rating procedure against a service under test:

Step T1: feed an unbiased data block and compare the output with every
         biased specification. Similar to any -> BS (Biased System).
Step T2: feed one block per biased specification and compare each output
         with every unbiased specification. All similar to some unbiased
         spec -> UCS (Unbiased Compensated System), otherwise DSBS
         (Data-Sensitive Biased System).

Within a step comparisons are combined with boolean OR (worst case).
Across middle languages the per-language ratings are aggregated by
worst case (UCS > DSBS > BS) or by vote.

Author: Bias Rating Team
"""

import asyncio
import logging
from collections import Counter
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from bias_core_model import (
    AttributeSpec,
    BiasRating,
    DataBlock,
    DistributionSpec,
    ExecutionError,
    SpecSet,
    UsageError,
    ValueCounts,
    worst_of,
)
from data_generator import TemplateConfig, default_template, expected_counts, generate_block
from distribution_analysis import DEFAULT_ALPHA, SimilarityVerdict, get_similarity_test, similar
from output_extraction import count_block
from translation_services import ServiceUnderTest, TranslationService, check_language_pair, round_trip

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

AggregationMode = Literal["worst_case", "vote"]


# ==================================================================================
# 1. CONFIGURATION
# ==================================================================================
class RatingConfig(BaseModel):
    """Run configuration; defaults follow the translation experiments"""
    alpha: float = Field(default=DEFAULT_ALPHA, gt=0, lt=1, description="Significance level")
    block_size: int = Field(default=20, gt=0, description="Texts per data block")
    sentences_per_text: Optional[int] = Field(default=None, ge=1, description="Overrides the template's slots per text")
    seed: int = Field(default=0, description="Seed of the T1 block; biased block j uses seed + 1 + j")
    home_language: str = Field(default="en")
    aggregation: AggregationMode = "worst_case"
    similarity_test: str = "chi2"
    max_parallel_languages: int = Field(default=4, ge=1)
    exclude_languages: Tuple[str, ...] = Field(default=(), description="Left out of overall_excluding")


# ==================================================================================
# 2. REPORT MODELS
# ==================================================================================
class Comparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec_label: str
    verdict: SimilarityVerdict


class StepResult(BaseModel):
    """One block run: its input, observed output counts and comparisons"""
    model_config = ConfigDict(frozen=True)

    step: Literal["T1", "T2"]
    input_spec: str
    input_counts: ValueCounts
    observed: ValueCounts
    comparisons: Tuple[Comparison, ...]
    matched_any: bool

    @model_validator(mode="after")
    def _matched_is_or(self):
        if self.matched_any != any(c.verdict.similar for c in self.comparisons):
            raise ValueError("matched_any must be the OR of the comparisons")
        return self


class LanguageRating(BaseModel):
    rating: BiasRating
    steps: List[StepResult]


class ConfigSnapshot(BaseModel):
    alpha: float
    block_size: int
    slots_per_text: int
    sentence_template: str
    home_language: str
    similarity_test: str
    seeds: Dict[str, int]
    unbiased_specs: List[str]
    biased_specs: List[str]


class CatalogEntry(BaseModel):
    """Compact rating record for publishing alongside an API's metadata"""
    service_id: str
    attribute: str
    rating: Optional[BiasRating]
    aggregation_mode: AggregationMode
    similarity_test: str
    alpha: float
    languages_rated: List[str]


class RatingReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    service_id: str
    attribute: AttributeSpec
    per_language: Dict[str, LanguageRating]
    failed_languages: Dict[str, str] = Field(default_factory=dict)
    aggregation_mode: AggregationMode
    overall: Optional[BiasRating]
    excluded_languages: List[str] = Field(default_factory=list)
    overall_excluding: Optional[BiasRating] = None
    config: ConfigSnapshot
    catalog_entry: CatalogEntry
    narrative: str

    @model_validator(mode="after")
    def _overall_is_aggregate(self):
        ratings = {lang: lr.rating for lang, lr in self.per_language.items()}
        if ratings and self.overall != aggregate(ratings, self.aggregation_mode):
            raise ValueError("overall does not match the aggregate of the per-language ratings")
        return self


# ==================================================================================
# 3. AGGREGATION
# ==================================================================================
def aggregate(per_language: Dict[str, BiasRating], mode: AggregationMode = "worst_case") -> BiasRating:
    """worst_case: least preferred rating. vote: modal rating, ties go to the worse one."""
    if not per_language:
        raise UsageError("cannot aggregate an empty set of ratings")
    if mode == "worst_case":
        return worst_of(per_language.values())
    if mode == "vote":
        tally = Counter(per_language.values())
        top = max(tally.values())
        return worst_of(r for r, n in tally.items() if n == top)
    raise UsageError(f"unknown aggregation mode '{mode}'")


def block_seeds(specs: SpecSet, seed: int) -> Dict[str, int]:
    """
    Seed of every spec's block: the first unbiased spec gets `seed`, the j-th
    biased spec `seed + 1 + j`, further unbiased specs follow after those.
    """
    seeds = {specs.unbiased[0].label: seed} if specs.unbiased else {}
    seeds.update({s.label: seed + 1 + j for j, s in enumerate(specs.biased)})
    offset = seed + 1 + len(specs.biased)
    seeds.update({s.label: offset + k for k, s in enumerate(specs.unbiased[1:])})
    return seeds


def plan_calls(n_services: int, n_languages: int, block_size: int,
               n_unbiased_blocks: int = 1, n_biased_blocks: int = 2, legs: int = 2) -> int:
    """Translation calls a full run issues when both steps execute"""
    return n_services * n_languages * (n_unbiased_blocks + n_biased_blocks) * block_size * legs


# ==================================================================================
# 4. THE 2-STEP PROCEDURE
# ==================================================================================
def _resolve_template(config: RatingConfig, template: Optional[TemplateConfig]) -> TemplateConfig:
    template = template or default_template()
    if config.sentences_per_text is not None:
        template = template.model_copy(update={"sentences_per_text": config.sentences_per_text})
    return template


async def run_block(service: ServiceUnderTest, block: DataBlock) -> ValueCounts:
    """Run every text of a block through the service, in order, and count the output"""
    service.begin_block()
    outputs = []
    for text in block.texts:
        outputs.append(await service.transform(text))
    return count_block(outputs, block.slots_per_text, block.spec.attribute)


def _compare(observed: ValueCounts, specs: Sequence[DistributionSpec], config: RatingConfig) -> Tuple[Comparison, ...]:
    test = get_similarity_test(config.similarity_test)
    return tuple(
        Comparison(spec_label=spec.label,
                   verdict=similar(observed, expected_counts(spec, observed.total), config.alpha, test))
        for spec in specs
    )


async def _run_step(step: str, service: ServiceUnderTest, input_spec: DistributionSpec,
                    against: Sequence[DistributionSpec], seed: int,
                    config: RatingConfig, template: TemplateConfig) -> StepResult:
    block = generate_block(input_spec, template, config.block_size, seed)
    observed = await run_block(service, block)
    comparisons = _compare(observed, against, config)
    result = StepResult(
        step=step,
        input_spec=input_spec.label,
        input_counts=block.truth_counts(),
        observed=observed,
        comparisons=comparisons,
        matched_any=any(c.verdict.similar for c in comparisons),
    )
    logger.info("%s %s [%s] observed %s matched=%s", service.id, step, input_spec.label,
                observed.as_dict(), result.matched_any)
    return result


async def rate_one(service: ServiceUnderTest,
                   unbiased_specs: Sequence[DistributionSpec],
                   biased_specs: Sequence[DistributionSpec],
                   config: Optional[RatingConfig] = None,
                   template: Optional[TemplateConfig] = None) -> Tuple[BiasRating, List[StepResult]]:
    """
    Rate one service under test.

    T1 generates its block from the first unbiased spec. T2 runs one block
    per biased spec, always all of them, so the report carries the full
    evidence even once DSBS is certain.
    """
    if not unbiased_specs or not biased_specs:
        raise UsageError("rate_one needs at least one unbiased and one biased spec")
    config = config or RatingConfig()
    template = _resolve_template(config, template)

    t1 = await _run_step("T1", service, unbiased_specs[0], biased_specs, config.seed, config, template)
    if t1.matched_any:
        return BiasRating.BS, [t1]

    steps = [t1]
    for j, spec in enumerate(biased_specs):
        steps.append(await _run_step("T2", service, spec, unbiased_specs, config.seed + 1 + j, config, template))

    if all(s.matched_any for s in steps[1:]):
        return BiasRating.UCS, steps
    return BiasRating.DSBS, steps


# ==================================================================================
# 5. RATING A TRANSLATOR OVER MIDDLE LANGUAGES
# ==================================================================================
def _fmt_counts(counts: ValueCounts) -> str:
    return ", ".join(f"{v}={c}" for v, c in counts.as_dict().items())


def explain_language(language: str, rating: BiasRating, steps: Sequence[StepResult]) -> str:
    """Decision path for one middle language as plain text"""
    lines = [f"Middle language '{language}': rated {rating.value}."]
    for step in steps:
        target = "biased" if step.step == "T1" else "unbiased"
        lines.append(
            f"  {step.step}: input '{step.input_spec}' ({_fmt_counts(step.input_counts)}) "
            f"came back as {_fmt_counts(step.observed)}."
        )
        for c in step.comparisons:
            v = c.verdict
            lines.append(
                f"    vs {target} spec '{c.spec_label}': statistic={v.statistic:.4f}, df={v.degrees_of_freedom}, "
                f"p={v.p_value:.4g} -> {'similar' if v.similar else 'not similar'}"
            )
    t1 = steps[0]
    if t1.matched_any:
        lines.append("  Output on unbiased input resembles a biased declaration, so the service introduces bias.")
    elif rating is BiasRating.UCS:
        lines.append("  Unbiased input stays unbiased and every biased input comes back unbiased: bias is compensated.")
    else:
        lines.append("  Unbiased input stays unbiased but at least one biased input keeps its bias: the service follows its data.")
    return "\n".join(lines)


def _snapshot(specs: SpecSet, config: RatingConfig, template: TemplateConfig) -> ConfigSnapshot:
    seeds = {f"T1:{specs.unbiased[0].label}": config.seed}
    seeds.update({f"T2:{s.label}": config.seed + 1 + j for j, s in enumerate(specs.biased)})
    return ConfigSnapshot(
        alpha=config.alpha,
        block_size=config.block_size,
        slots_per_text=template.resolved_sentences_per_text(specs.attribute),
        sentence_template=template.sentence_template,
        home_language=config.home_language,
        similarity_test=config.similarity_test,
        seeds=seeds,
        unbiased_specs=[s.label for s in specs.unbiased],
        biased_specs=[s.label for s in specs.biased],
    )


async def rate_service(translator: TranslationService,
                       middle_languages: Sequence[str],
                       specs: SpecSet,
                       config: Optional[RatingConfig] = None,
                       template: Optional[TemplateConfig] = None) -> RatingReport:
    """
    Rate a translator through round trips home -> M_i -> home.

    Languages run concurrently (one at a time when the translator keeps
    per-block state). A language whose service fails is listed in
    failed_languages; the run only fails when no language could be rated.
    """
    config = config or RatingConfig()
    template = _resolve_template(config, template)
    specs.require_rating_ready()
    if not middle_languages:
        raise UsageError("at least one middle language is required")
    get_similarity_test(config.similarity_test)
    for lang in middle_languages:
        check_language_pair(translator, config.home_language, lang)

    limit = 1 if translator.stateful else config.max_parallel_languages
    gate = asyncio.Semaphore(limit)

    async def rate_language(lang: str):
        async with gate:
            service = round_trip(translator, lang, config.home_language)
            try:
                rating, steps = await rate_one(service, specs.unbiased, specs.biased, config, template)
            except ExecutionError as e:
                logger.error("❌ %s: rating aborted for '%s': %s", translator.id, lang, e)
                return lang, None, e
            logger.info("✅ %s via '%s': %s", translator.id, lang, rating.value)
            return lang, LanguageRating(rating=rating, steps=steps), None

    results = await asyncio.gather(*(rate_language(lang) for lang in middle_languages))

    per_language = {lang: lr for lang, lr, _ in results if lr is not None}
    failures = {lang: err for lang, _, err in results if err is not None}
    if not per_language:
        raise next(iter(failures.values()))

    ratings = {lang: lr.rating for lang, lr in per_language.items()}
    overall = aggregate(ratings, config.aggregation)

    excluded = [lang for lang in config.exclude_languages if lang in ratings]
    remaining = {lang: r for lang, r in ratings.items() if lang not in config.exclude_languages}
    overall_excluding = aggregate(remaining, config.aggregation) if config.exclude_languages and remaining else None

    narrative = [explain_language(lang, lr.rating, lr.steps) for lang, lr in per_language.items()]
    narrative += [f"Middle language '{lang}': not rated ({err})." for lang, err in failures.items()]
    narrative.append(f"Overall ({config.aggregation.replace('_', '-')} over {len(ratings)} languages): {overall.value}.")
    if overall_excluding is not None:
        narrative.append(f"Overall excluding {', '.join(config.exclude_languages)}: {overall_excluding.value}.")

    return RatingReport(
        service_id=translator.id,
        attribute=specs.attribute,
        per_language=per_language,
        failed_languages={lang: str(err) for lang, err in failures.items()},
        aggregation_mode=config.aggregation,
        overall=overall,
        excluded_languages=excluded,
        overall_excluding=overall_excluding,
        config=_snapshot(specs, config, template),
        catalog_entry=CatalogEntry(
            service_id=translator.id,
            attribute=specs.attribute.name,
            rating=overall,
            aggregation_mode=config.aggregation,
            similarity_test=config.similarity_test,
            alpha=config.alpha,
            languages_rated=list(per_language),
        ),
        narrative="\n".join(narrative),
    )
