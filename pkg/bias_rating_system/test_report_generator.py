"""
Tests for Markdown rendering and report files
"""

import asyncio
import json

import pytest

from bias_core_model import BiasRating, RatingSet, UsageError, default_spec_set
from composition_model import compose_reports
from rating_engine import RatingConfig, rate_service
from report_generator import (
    load_report,
    render_comparison,
    render_markdown,
    report_schema,
    report_stem,
    write_comparison,
    write_report,
)
from translation_services import mock_translator


def make_report(behavior="identity", middle=("hi", "fr"), **overrides):
    translator = mock_translator(behavior, **overrides)
    return asyncio.run(rate_service(translator, list(middle), default_spec_set(), RatingConfig()))


def test_markdown_shows_counts_comparisons_and_decision():
    text = render_markdown(make_report())
    assert text.startswith("# Bias rating: `mock-identity-s0`")
    assert "Overall rating (worst case): **DSBS**" in text
    assert "| hi | DSBS |" in text
    assert "#### T1: input `unbiased-50-50`" in text
    assert "| Input (I) | 20 | 20 | 0 |" in text
    assert "| Output (O) | 4 | 36 | 0 |" in text
    assert "| `unbiased-50-50` | 15.2381 | 1 |" in text
    assert "Decision: T1 output is not biased but some T2 output keeps its bias" in text
    assert '"rating": "DSBS"' in text


def test_comparison_table_has_a_column_per_service():
    reports = [make_report("identity"), make_report("equalize")]
    text = render_comparison(reports)
    assert "| Middle language | `mock-identity-s0` | `mock-equalize-s0` |" in text
    assert "| hi | DSBS | UCS |" in text
    assert "| **Overall** | **DSBS** | **UCS** |" in text


def test_comparison_needs_reports():
    with pytest.raises(UsageError):
        render_comparison([])


def test_written_report_loads_back(tmp_path):
    report = make_report()
    json_path, md_path = write_report(report, tmp_path / "out")
    assert json_path.name == "mock-identity-s0.json"
    assert md_path.read_text(encoding="utf-8") == render_markdown(report)
    assert load_report(json_path) == report
    assert json.loads(json_path.read_text(encoding="utf-8"))["schema_version"] == "1.0"


def test_reports_are_byte_reproducible(tmp_path):
    first, _ = write_report(make_report(), tmp_path / "a")
    second, _ = write_report(make_report(), tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()


def test_comparison_file(tmp_path):
    path = write_comparison([make_report("identity"), make_report("flip")], tmp_path)
    assert path.name == "comparison.md"
    assert "| fr | DSBS | DSBS |" in path.read_text(encoding="utf-8")


def test_report_stem_is_filesystem_safe():
    assert report_stem("mock:collapse_to(He)") == "mock_collapse_to_He"


def test_bad_report_files(tmp_path):
    with pytest.raises(UsageError):
        load_report(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{}", encoding="utf-8")
    with pytest.raises(UsageError):
        load_report(bad)


def test_schema_names_the_report_fields():
    schema = report_schema()
    assert {"schema_version", "per_language", "overall", "narrative"} <= set(schema["properties"])


def test_saved_reports_compose_in_order():
    identity, equalize = make_report("identity"), make_report("equalize")
    assert compose_reports([identity, equalize]) == RatingSet.of(BiasRating.UCS)
    assert compose_reports([equalize, identity]) == RatingSet.of(BiasRating.DSBS)


def test_reports_over_different_specs_do_not_compose():
    extended = asyncio.run(rate_service(mock_translator("flip"), ["hi"], default_spec_set(include_pure=True),
                                        RatingConfig()))
    with pytest.raises(UsageError):
        compose_reports([make_report(), extended])
    with pytest.raises(UsageError):
        compose_reports([])
