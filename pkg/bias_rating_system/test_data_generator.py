"""
Tests for deterministic data block generation
"""

from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bias_core_model import ConfigError, SpecError, UsageError, build_spec_set, default_spec_set, gender_attribute
from data_generator import (
    TemplateConfig,
    default_template,
    expected_counts,
    generate_block,
    load_block,
    load_occupations,
    load_template,
    save_block,
)
from output_extraction import split_sentences

ROOT = Path(__file__).resolve().parent.parent

SPECS = default_spec_set(include_pure=True)
UNBIASED = SPECS.unbiased[0]
BIASED_10_90, BIASED_90_10 = SPECS.biased[0], SPECS.biased[1]


# ============================================================================
# EXPECTED COUNTS
# ============================================================================

def test_expected_counts_of_translation_specs():
    assert expected_counts(UNBIASED, 40).counts == (20, 20, 0)
    assert expected_counts(BIASED_10_90, 40).counts == (4, 36, 0)
    assert expected_counts(BIASED_90_10, 40).counts == (36, 4, 0)


def test_expected_counts_ties_go_to_the_first_value():
    thirds = build_spec_set(gender_attribute(), [("thirds", "biased", (1 / 3, 1 / 3, 1 / 3))]).specs[0]
    assert expected_counts(thirds, 10).counts == (4, 3, 3)
    assert expected_counts(thirds, 3).counts == (1, 1, 1)


def test_expected_counts_survive_float_noise():
    spec = build_spec_set(gender_attribute(), [("s", "biased", (0.3, 0.7, 0.0))]).specs[0]
    assert expected_counts(spec, 10).counts == (3, 7, 0)


def test_expected_counts_need_positive_total():
    with pytest.raises(UsageError):
        expected_counts(UNBIASED, 0)


@given(st.sampled_from(SPECS.specs), st.integers(min_value=1, max_value=1000))
def test_expected_counts_always_sum_to_total(spec, n):
    counts = expected_counts(spec, n)
    assert counts.total == n
    for c, p in zip(counts.counts, spec.proportions):
        assert abs(c - p * n) < 1


WEIGHTS = st.lists(st.integers(min_value=0, max_value=100), min_size=3, max_size=3).filter(lambda w: sum(w) > 0)


def spec_from_weights(w):
    total = sum(w)
    return build_spec_set(gender_attribute(), [("w", "biased", tuple(x / total for x in w))]).specs[0]


@settings(max_examples=200)
@given(WEIGHTS, st.integers(min_value=0, max_value=2), st.integers(min_value=1, max_value=100),
       st.integers(min_value=1, max_value=500))
def test_expected_counts_are_monotone_up_to_one_unit(w, i, extra, n):
    raised = list(w)
    raised[i] += extra
    before = expected_counts(spec_from_weights(w), n).counts[i]
    after = expected_counts(spec_from_weights(raised), n).counts[i]
    assert after >= before - 1


# ============================================================================
# BLOCKS
# ============================================================================

def test_block_realizes_its_spec_exactly():
    template = default_template()
    for spec in SPECS.specs:
        block = generate_block(spec, template, block_size=20, seed=7)
        assert len(block.texts) == 20
        assert block.slots_per_text == 2
        assert block.truth_counts() == expected_counts(spec, 40)


def test_block_texts_follow_the_template():
    block = generate_block(BIASED_90_10, default_template(), block_size=20, seed=1)
    for text, truth in zip(block.texts, block.slot_truth):
        sentences = split_sentences(text)
        assert len(sentences) == 2
        for sentence, value in zip(sentences, truth):
            assert sentence.startswith(value + " is a ")
        # occupations within a text are distinct
        assert sentences[0].split()[-1] != sentences[1].split()[-1]


def test_same_seed_gives_identical_blocks():
    template = default_template()
    first = generate_block(UNBIASED, template, 20, seed=42)
    second = generate_block(UNBIASED, template, 20, seed=42)
    assert first == second
    assert first.texts != generate_block(UNBIASED, template, 20, seed=43).texts


def test_sentences_per_text_override():
    template = default_template().model_copy(update={"sentences_per_text": 3})
    block = generate_block(UNBIASED, template, block_size=10, seed=0)
    assert block.slots_per_text == 3
    assert all(len(split_sentences(t)) == 3 for t in block.texts)
    assert block.truth_counts().counts == (15, 15, 0)


def test_catch_all_specs_cannot_be_generated():
    spec = build_spec_set(gender_attribute(), [("s", "biased", (0.4, 0.4, 0.2))]).specs[0]
    with pytest.raises(SpecError):
        generate_block(spec, default_template(), 20, 0)


def test_template_problems_are_config_errors():
    with pytest.raises(ConfigError):
        generate_block(UNBIASED, TemplateConfig(occupations=("Nurse",)), 20, 0)
    with pytest.raises(ConfigError):
        generate_block(UNBIASED, TemplateConfig(occupations=("Nurse", "Pilot"), gender_words={"He": "He"}), 20, 0)
    with pytest.raises(ValueError):
        TemplateConfig(sentence_template="{G} works.")


def test_block_size_must_be_positive():
    with pytest.raises(UsageError):
        generate_block(UNBIASED, default_template(), 0, 0)


# ============================================================================
# FILES
# ============================================================================

def test_template_render():
    assert TemplateConfig().render("She", "Florist") == "She is a Florist."


def test_shipped_template_uses_the_occupation_list():
    template = load_template(ROOT / "config" / "template_gender.json")
    assert template.occupations == load_occupations(ROOT / "data" / "occupations.txt")
    assert "Florist" in template.occupations
    assert template.resolved_sentences_per_text(gender_attribute()) == 2


def test_occupation_list_skips_comments(tmp_path):
    path = tmp_path / "jobs.txt"
    path.write_text("# header\nNurse\n\nPilot  # flies\n", encoding="utf-8")
    assert load_occupations(path) == ("Nurse", "Pilot")
    with pytest.raises(ConfigError):
        load_occupations(tmp_path / "missing.txt")


def test_saved_block_loads_back(tmp_path):
    block = generate_block(BIASED_10_90, default_template(), 20, seed=3)
    path = save_block(block, tmp_path / "blocks" / "b.json")
    assert load_block(path) == block
    assert path.read_text(encoding="utf-8") == save_block(block, tmp_path / "again.json").read_text(encoding="utf-8")
