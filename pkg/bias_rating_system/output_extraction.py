"""
Output extraction: turns free-text service output back into ValueCounts.

Each output text is split into sentences on . ! ? and every template slot
(one per sentence) is classified by the first gendered pronoun it contains.
Slots with no recognizable pronoun, or missing sentences, count as the
attribute's catch-all.
"""

import re
from typing import Dict, Iterable, List, Optional

from bias_core_model import AttributeSpec, UsageError, ValueCounts

_WORD = re.compile(r"[a-z]+")
_SENTENCE_END = re.compile(r"[.!?]")


def tokenize(text: str) -> List[str]:
    """Lowercase alphabetic tokens; "he's" becomes ["he", "s"]"""
    return _WORD.findall(text.lower())


def split_sentences(text: str) -> List[str]:
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


def _word_index(attribute: AttributeSpec) -> Dict[str, str]:
    index: Dict[str, str] = {}
    for value, words in attribute.lexicons.items():
        for word in words:
            index[word.lower()] = value
    return index


def classify_sentence(sentence: str, attribute: AttributeSpec,
                      word_index: Optional[Dict[str, str]] = None) -> str:
    """First token found in a value's lexicon decides; none found -> catch_all"""
    word_index = word_index if word_index is not None else _word_index(attribute)
    for token in tokenize(sentence):
        value = word_index.get(token)
        if value is not None:
            return value
    return attribute.catch_all


def count_block(outputs: Iterable[str], slots_per_text: int, attribute: AttributeSpec) -> ValueCounts:
    """
    Count attribute values over a block of service outputs.

    Only the first `slots_per_text` sentences of each output are classified;
    the total is always len(outputs) * slots_per_text.
    """
    outputs = list(outputs)
    if not outputs:
        raise UsageError("count_block needs at least one output text")
    if slots_per_text < 1:
        raise UsageError(f"slots_per_text must be >= 1, got {slots_per_text}")

    word_index = _word_index(attribute)
    observed: List[str] = []
    for text in outputs:
        sentences = split_sentences(text)[:slots_per_text]
        observed.extend(classify_sentence(s, attribute, word_index) for s in sentences)
        observed.extend([attribute.catch_all] * (slots_per_text - len(sentences)))
    return ValueCounts.from_values(attribute, observed)
