"""
Bias Rating CLI
Rates black-box services for bias and composes ratings of chained services

Commands:
    generate  write the data blocks of a spec set
    rate      rate translators through round trips and write reports
    compose   rating of a sequential chain of services
    render    re-render Markdown from saved JSON reports
    schema    print the report JSON schema

Exit codes: 0 ok, 2 usage/config/spec error, 3 --fail-on gate tripped,
4 service execution failure (also when only some middle languages failed;
the gate is checked first and wins).
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

# Add the rating engine to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "bias_rating_system"))

from bias_core_model import (
    BiasRating,
    BiasRatingError,
    ExecutionError,
    RatingSet,
    UsageError,
    default_spec_set,
    load_spec_set,
)
from composition_model import check_compatible, compose_chain, requires_retest
from data_generator import default_template, generate_block, load_template, save_block
from rating_engine import RatingConfig, block_seeds, plan_calls, rate_service
from report_generator import (
    load_report,
    render_markdown,
    report_schema,
    report_stem,
    write_comparison,
    write_report,
)
from response_cache import ResponseCache, atomic_write, cached
from translation_services import close_service, language_list, load_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATE = 3
EXIT_EXECUTION = 4

DEFAULT_MIDDLE_LANGUAGES = "ar,es,fr,hi,it,pt,ru,tr"
AGGREGATION_MODES = {"worst": "worst_case", "worst_case": "worst_case", "vote": "vote"}


# ============================================================================
# HELPER FUNCTIONS
# ============================================================================

def _specs(args):
    return load_spec_set(args.specs) if args.specs else default_spec_set()


def _template(args):
    return load_template(args.template) if args.template else default_template()


def _banner(title: str) -> None:
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_generate(args) -> int:
    specs = _specs(args)
    template = _template(args)
    seeds = block_seeds(specs, args.seed)
    out_dir = Path(args.out)

    _banner("DATA GENERATION")
    total_texts = 0
    for spec in specs.specs:
        if not spec.is_generation_spec:
            print(f"⚠️  {spec.label}: catch-all proportion is nonzero, skipped")
            continue
        block = generate_block(spec, template, args.block_size, seeds[spec.label])
        path = save_block(block, out_dir / f"{spec.label}.json")
        counts = ", ".join(f"{v}={c}" for v, c in block.truth_counts().as_dict().items())
        print(f"✅ {spec.label} ({spec.kind}): {block.block_size} texts, slots {counts} -> {path}")
        total_texts += block.block_size
    print(f"\nTotal: {total_texts} texts")
    print("=" * 70)
    return EXIT_OK


async def _rate_all(tokens: List[str], middle: List[str], specs, config: RatingConfig,
                    template, cache: Optional[ResponseCache]):
    reports = []
    for token in tokens:
        translator = load_service(token)
        if cache is not None:
            translator = cached(translator, cache)
        try:
            reports.append(await rate_service(translator, middle, specs, config, template))
        finally:
            await close_service(translator)
    return reports


def cmd_rate(args) -> int:
    specs = _specs(args)
    specs.require_rating_ready()
    template = _template(args)
    threshold = BiasRating.parse(args.fail_on) if args.fail_on else None
    middle = language_list(args.middle)
    if not middle:
        raise UsageError("--middle needs at least one language")
    config = RatingConfig(
        alpha=args.alpha,
        block_size=args.block_size,
        seed=args.seed,
        aggregation=AGGREGATION_MODES[args.aggregation],
        exclude_languages=tuple(language_list(args.exclude)) if args.exclude else (),
    )

    if args.dry_run:
        calls = plan_calls(len(args.service), len(middle), config.block_size,
                           n_unbiased_blocks=1, n_biased_blocks=len(specs.biased))
        blocks = 1 + len(specs.biased)
        _banner("RATING PLAN (dry run)")
        print(f"Services: {len(args.service)}  Middle languages: {len(middle)}  "
              f"Blocks: {blocks} x {config.block_size} texts")
        print(f"Planned translation calls: {calls}")
        print("=" * 70)
        return EXIT_OK

    cache = ResponseCache(args.cache) if args.cache else None
    reports = asyncio.run(_rate_all(args.service, middle, specs, config, template, cache))

    out_dir = Path(args.out)
    _banner("BIAS RATING RESULTS")
    for report in reports:
        json_path, md_path = write_report(report, out_dir)
        rated = ", ".join(f"{lang}={lr.rating.value}" for lang, lr in report.per_language.items())
        print(f"✅ {report.service_id}: overall {report.overall.value}")
        print(f"   {rated}")
        if report.overall_excluding is not None:
            print(f"   excluding {', '.join(report.excluded_languages)}: {report.overall_excluding.value}")
        for lang, err in report.failed_languages.items():
            print(f"   ⚠️  {lang} not rated: {err}")
        print(f"   -> {json_path}, {md_path}")
    if len(reports) > 1:
        print(f"Comparison: {write_comparison(reports, out_dir)}")
    if cache is not None:
        print(f"Cache: {cache.hits} hits, {cache.misses} misses")
    print("=" * 70)

    if threshold is not None:
        failing = [r.service_id for r in reports if r.overall <= threshold]
        if failing:
            print(f"❌ Rating gate: {', '.join(failing)} rated at or below {threshold.value}")
            return EXIT_GATE
    incomplete = [r.service_id for r in reports if r.failed_languages]
    if incomplete:
        print(f"❌ Incomplete rating: {', '.join(incomplete)} had languages that could not be rated",
              file=sys.stderr)
        return EXIT_EXECUTION
    return EXIT_OK


def cmd_compose(args) -> int:
    if len(args.tokens) < 2:
        raise UsageError("compose needs at least 2 ratings")
    chain = []
    reports = []
    for token in args.tokens:
        if token.startswith("@"):
            report = load_report(token[1:])
            if report.overall is None:
                raise UsageError(f"report {token[1:]} carries no overall rating")
            reports.append(report)
            chain.append(RatingSet.of(report.overall))
        else:
            chain.append(RatingSet.parse(token))
    check_compatible(reports)

    result = compose_chain(chain)
    if requires_retest(result):
        logger.warning("⚠️ Composite rating is indeterminate; rate the composed service directly")
    print(result.encode())
    return EXIT_OK


def cmd_render(args) -> int:
    reports = [load_report(path) for path in args.reports]
    for path, report in zip(args.reports, reports):
        out_dir = Path(args.out or Path(path).parent)
        out_dir.mkdir(parents=True, exist_ok=True)
        md_path = out_dir / f"{report_stem(report.service_id)}.md"
        atomic_write(md_path, render_markdown(report))
        print(f"✅ {report.service_id} -> {md_path}")
    if len(reports) > 1:
        print(f"Comparison: {write_comparison(reports, Path(args.out or Path(args.reports[0]).parent))}")
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(report_schema(), indent=2, sort_keys=True))
    return EXIT_OK


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bias-rating", description="Rate black-box services for bias")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_options(p):
        p.add_argument("--specs", help="Spec-set JSON (default: built-in gender specs)")
        p.add_argument("--template", help="Template JSON (default: built-in gender template)")
        p.add_argument("--block-size", type=int, default=20)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="Write one data block per spec")
    add_data_options(p)
    p.add_argument("--out", default="blocks")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("rate", help="Rate translators through round trips")
    add_data_options(p)
    p.add_argument("--service", action="append", required=True,
                   help="Service config JSON or mock:<behavior>[:<value>]; repeatable")
    p.add_argument("--middle", default=DEFAULT_MIDDLE_LANGUAGES, help="Comma-separated middle languages")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--aggregation", choices=sorted(AGGREGATION_MODES), default="worst")
    p.add_argument("--exclude", help="Languages left out of the secondary overall rating")
    p.add_argument("--cache", help="Response cache directory")
    p.add_argument("--out", default="reports")
    p.add_argument("--fail-on", help="Exit 3 when a service is rated at or below this rating")
    p.add_argument("--dry-run", action="store_true", help="Print the call plan without calling anything")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("compose", help="Rating of a sequential chain (first service first)")
    p.add_argument("tokens", nargs="+", help="BS, DSBS, UCS, set literals like BS|DSBS, or @report.json")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("render", help="Re-render Markdown from JSON reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("schema", help="Print the report JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ExecutionError as e:
        print(f"❌ Service execution failed: {e}", file=sys.stderr)
        return EXIT_EXECUTION
    except (BiasRatingError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
