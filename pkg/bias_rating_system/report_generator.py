"""
REPORT GENERATOR
================
Renders RatingReports as Markdown and writes them to disk.

Per middle language the Markdown shows the input counts (I-*) and output
counts (O-*) of every step, each comparison with its statistic and p-value,
and the decision taken. render_comparison lays several services side by
side, one column per service and one row per middle language.

Author: Bias Rating Team
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

from pydantic import ValidationError

from bias_core_model import UsageError, ValueCounts, dump_json
from rating_engine import LanguageRating, RatingReport, StepResult
from response_cache import atomic_write

logger = logging.getLogger(__name__)

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


# ==================================================================================
# 1. MARKDOWN
# ==================================================================================
def _counts_row(label: str, counts: ValueCounts) -> str:
    return "| " + " | ".join([label] + [str(c) for c in counts.counts]) + " |"


def _step_section(step: StepResult) -> List[str]:
    values = step.observed.attribute.values
    target = "biased" if step.step == "T1" else "unbiased"
    lines = [
        f"#### {step.step}: input `{step.input_spec}`",
        "",
        "| | " + " | ".join(values) + " |",
        "|---" * (len(values) + 1) + "|",
        _counts_row("Input (I)", step.input_counts),
        _counts_row("Output (O)", step.observed),
        "",
        f"| Compared with {target} spec | Statistic | df | p-value | Verdict |",
        "|---|---|---|---|---|",
    ]
    for c in step.comparisons:
        v = c.verdict
        verdict = "similar" if v.similar else "not similar"
        lines.append(f"| `{c.spec_label}` | {v.statistic:.4f} | {v.degrees_of_freedom} | {v.p_value:.4g} | {verdict} |")
    lines += ["", f"Matched any {target} spec: **{'yes' if step.matched_any else 'no'}**", ""]
    return lines


def _decision(rating: LanguageRating) -> str:
    if rating.steps[0].matched_any:
        return "T1 output resembles a biased spec, so the service is BS."
    if rating.rating.value == "UCS":
        return "T1 output is not biased and every T2 output resembles an unbiased spec, so the service is UCS."
    return "T1 output is not biased but some T2 output keeps its bias, so the service is DSBS."


def render_markdown(report: RatingReport) -> str:
    """Human-readable report: summary, per-language tables, decision paths"""
    cfg = report.config
    lines = [
        f"# Bias rating: `{report.service_id}`",
        "",
        f"- Attribute: **{report.attribute.name}** ({', '.join(report.attribute.values)})",
        f"- Overall rating ({report.aggregation_mode.replace('_', ' ')}): "
        f"**{report.overall.value if report.overall else 'n/a'}**",
    ]
    if report.overall_excluding is not None:
        lines.append(f"- Overall excluding {', '.join(report.excluded_languages)}: **{report.overall_excluding.value}**")
    lines += [
        f"- Similarity test: {cfg.similarity_test}, alpha = {cfg.alpha}",
        f"- Blocks: {cfg.block_size} texts x {cfg.slots_per_text} slots, template `{cfg.sentence_template}`",
        f"- Unbiased specs: {', '.join(cfg.unbiased_specs)}; biased specs: {', '.join(cfg.biased_specs)}",
        "",
        "## Ratings by middle language",
        "",
        "| Middle language | Rating |",
        "|---|---|",
    ]
    lines += [f"| {lang} | {lr.rating.value} |" for lang, lr in report.per_language.items()]
    lines += [f"| {lang} | failed |" for lang in report.failed_languages]
    lines.append("")

    for lang, lr in report.per_language.items():
        lines += [f"### Middle language `{lang}`: {lr.rating.value}", ""]
        for step in lr.steps:
            lines += _step_section(step)
        lines += [f"Decision: {_decision(lr)}", ""]

    if report.failed_languages:
        lines += ["## Failed languages", ""]
        lines += [f"- `{lang}`: {err}" for lang, err in report.failed_languages.items()]
        lines.append("")

    lines += ["## Catalog entry", "", "```json", dump_json(report.catalog_entry).rstrip(), "```", ""]
    return "\n".join(lines)


def render_comparison(reports: Sequence[RatingReport]) -> str:
    """Ratings of several services side by side"""
    if not reports:
        raise UsageError("render_comparison needs at least one report")
    languages: List[str] = []
    for report in reports:
        for lang in list(report.per_language) + list(report.failed_languages):
            if lang not in languages:
                languages.append(lang)

    def cell(report: RatingReport, lang: str) -> str:
        if lang in report.per_language:
            return report.per_language[lang].rating.value
        return "failed" if lang in report.failed_languages else "-"

    header = "| Middle language | " + " | ".join(f"`{r.service_id}`" for r in reports) + " |"
    lines = ["# Bias ratings by service", "", header, "|---" * (len(reports) + 1) + "|"]
    for lang in languages:
        lines.append(f"| {lang} | " + " | ".join(cell(r, lang) for r in reports) + " |")
    lines.append("| **Overall** | " + " | ".join(
        f"**{r.overall.value if r.overall else 'n/a'}**" for r in reports) + " |")
    if any(r.overall_excluding is not None for r in reports):
        excluded = sorted({lang for r in reports for lang in r.excluded_languages})
        lines.append(f"| Overall (excluding {', '.join(excluded)}) | " + " | ".join(
            r.overall_excluding.value if r.overall_excluding else "-" for r in reports) + " |")
    lines.append("")
    return "\n".join(lines)


# ==================================================================================
# 2. FILES
# ==================================================================================
def report_stem(service_id: str) -> str:
    return _UNSAFE.sub("_", service_id).strip("_") or "report"


def write_report(report: RatingReport, out_dir: Union[str, Path]) -> Tuple[Path, Path]:
    """Write <stem>.json and <stem>.md atomically; returns both paths"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = report_stem(report.service_id)
    json_path, md_path = out_dir / f"{stem}.json", out_dir / f"{stem}.md"
    atomic_write(json_path, dump_json(report))
    atomic_write(md_path, render_markdown(report))
    logger.info("Report for %s written to %s", report.service_id, json_path)
    return json_path, md_path


def write_comparison(reports: Sequence[RatingReport], out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / "comparison.md"
    atomic_write(path, render_comparison(reports))
    return path


def load_report(path: Union[str, Path]) -> RatingReport:
    path = Path(path)
    try:
        return RatingReport.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"report not found: {path}") from None
    except ValidationError as e:
        raise UsageError(f"malformed report {path}: {e}") from None


def report_schema() -> Dict:
    return RatingReport.model_json_schema()
