"""
BIAS RATING CORE MODEL
======================
Domain types shared by every part of the rating harness:

1. Errors - one hierarchy, mapped to CLI exit codes by main.py
2. BiasRating / RatingSet - the 3-level rating scale and its sets
3. AttributeSpec - a protected attribute and its category labels
4. DistributionSpec / SpecSet - declared biased and unbiased distributions
5. ValueCounts / DataBlock - observed counts and generated data blocks

All value objects are frozen pydantic models and serialize to JSON with
lowercase snake_case field names.

Author: Bias Rating Team
"""

import json
from enum import Enum
from functools import total_ordering
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


# ==================================================================================
# 1. ERRORS
# ==================================================================================
class BiasRatingError(Exception):
    """Base class for every error raised by the harness"""


class UsageError(BiasRatingError, ValueError):
    """Operation called with arguments outside its contract (e.g. empty list)"""


class SpecError(BiasRatingError, ValueError):
    """Malformed or unusable distribution specification"""


class ConfigError(BiasRatingError, ValueError):
    """Bad template, service, credential or run configuration"""


class InputError(BiasRatingError, ValueError):
    """Statistical routine called outside its domain"""


class ExecutionError(BiasRatingError, RuntimeError):
    """A service under test failed while transforming text"""

    def __init__(self, message: str, stage: str = ""):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class NetworkExhaustedError(ExecutionError):
    """A live adapter gave up after max_retries attempts"""


# ==================================================================================
# 2. RATINGS
# ==================================================================================
@total_ordering
class BiasRating(Enum):
    """
    3-level bias rating. Ordered by preference: BS < DSBS < UCS.

    - BS   : Biased System, biased output even on unbiased input
    - DSBS : Data-Sensitive Biased System, follows the bias of its input
    - UCS  : Unbiased Compensated System, unbiased output even on biased input
    """
    BS = "BS"
    DSBS = "DSBS"
    UCS = "UCS"

    @property
    def rank(self) -> int:
        return _RATING_RANK[self]

    def __lt__(self, other):
        if not isinstance(other, BiasRating):
            return NotImplemented
        return self.rank < other.rank

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> "BiasRating":
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise UsageError(f"Unknown rating '{token}'. Expected one of BS, DSBS, UCS") from None


_RATING_RANK = {BiasRating.BS: 0, BiasRating.DSBS: 1, BiasRating.UCS: 2}


def worst_of(ratings: Iterable[BiasRating]) -> BiasRating:
    """Least-preferred rating of a nonempty collection"""
    ratings = list(ratings)
    if not ratings:
        raise UsageError("worst_of needs at least one rating")
    return min(ratings)


def best_of(ratings: Iterable[BiasRating]) -> BiasRating:
    """Most-preferred rating of a nonempty collection"""
    ratings = list(ratings)
    if not ratings:
        raise UsageError("best_of needs at least one rating")
    return max(ratings)


class RatingSet:
    """
    Nonempty set of ratings. A singleton is a determinate rating, the full
    set {BS, DSBS, UCS} means the outcome is unknown and has to be tested.
    """

    __slots__ = ("_members",)

    def __init__(self, members: Iterable[Union[BiasRating, str]]):
        resolved = frozenset(m if isinstance(m, BiasRating) else BiasRating.parse(m) for m in members)
        if not resolved:
            raise UsageError("A RatingSet can never be empty")
        self._members: FrozenSet[BiasRating] = resolved

    @classmethod
    def of(cls, *ratings: Union[BiasRating, str]) -> "RatingSet":
        return cls(ratings)

    @classmethod
    def full(cls) -> "RatingSet":
        return cls(BiasRating)

    @classmethod
    def parse(cls, token: str) -> "RatingSet":
        """Parse 'UCS', 'BS|DSBS' or 'BS,DSBS'"""
        parts = [p for p in token.replace(",", "|").split("|") if p.strip()]
        if not parts:
            raise UsageError(f"Empty rating set literal '{token}'")
        return cls(parts)

    @property
    def members(self) -> FrozenSet[BiasRating]:
        return self._members

    @property
    def is_determinate(self) -> bool:
        return len(self._members) == 1

    def only(self) -> BiasRating:
        if not self.is_determinate:
            raise UsageError(f"{self.encode()} is not a determinate rating")
        return next(iter(self._members))

    def encode(self) -> str:
        return "|".join(sorted(r.value for r in self._members))

    def __iter__(self) -> Iterator[BiasRating]:
        return iter(sorted(self._members))

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, rating: BiasRating) -> bool:
        return rating in self._members

    def __eq__(self, other) -> bool:
        if isinstance(other, RatingSet):
            return self._members == other._members
        return NotImplemented

    def __le__(self, other: "RatingSet") -> bool:
        return self._members <= other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def __str__(self) -> str:
        return self.encode()

    def __repr__(self) -> str:
        return f"RatingSet({self.encode()})"


# ==================================================================================
# 3. ATTRIBUTES
# ==================================================================================
class AttributeSpec(BaseModel):
    """A protected attribute, e.g. Gender with values He, She, Other"""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Attribute identifier")
    values: Tuple[str, ...] = Field(..., description="Ordered category labels")
    catch_all: str = Field(default="Other", description="Label for unclassifiable output")
    lexicons: Dict[str, Tuple[str, ...]] = Field(
        default_factory=dict,
        description="Surface words per value; the first word is the nominative form",
    )

    @model_validator(mode="after")
    def _check_values(self):
        if len(self.values) < 2:
            raise ValueError("an attribute needs at least 2 values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"attribute values must be unique: {list(self.values)}")
        if self.catch_all not in self.values:
            raise ValueError(f"catch_all '{self.catch_all}' is not one of {list(self.values)}")
        for value, words in self.lexicons.items():
            if value not in self.values or value == self.catch_all:
                raise ValueError(f"lexicon given for unknown or catch-all value '{value}'")
            if not words:
                raise ValueError(f"lexicon for '{value}' is empty")
        return self

    @property
    def catch_all_index(self) -> int:
        return self.values.index(self.catch_all)

    @property
    def non_trivial_values(self) -> Tuple[str, ...]:
        """Values other than the catch-all"""
        return tuple(v for v in self.values if v != self.catch_all)

    def index_of(self, value: str) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise SpecError(f"'{value}' is not a value of attribute '{self.name}'") from None

    def nominative(self, value: str) -> str:
        words = self.lexicons.get(value)
        if not words:
            raise ConfigError(f"no lexicon configured for '{value}' of attribute '{self.name}'")
        return words[0]


GENDER_LEXICONS = {
    "He": ("he", "him", "his"),
    "She": ("she", "her", "hers"),
}


def gender_attribute() -> AttributeSpec:
    """The built-in Gender attribute with English pronoun lexicons"""
    return AttributeSpec(name="Gender", values=("He", "She", "Other"), catch_all="Other",
                         lexicons=GENDER_LEXICONS)


# ==================================================================================
# 4. DISTRIBUTION SPECIFICATIONS
# ==================================================================================
PROPORTION_TOLERANCE = 1e-9


class DistributionSpec(BaseModel):
    """A declared biased or unbiased proportion vector over attribute values"""
    model_config = ConfigDict(frozen=True)

    attribute: AttributeSpec
    proportions: Tuple[float, ...] = Field(..., description="Fractions aligned with attribute values")
    kind: Literal["biased", "unbiased"]
    label: str = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_proportions(self):
        if len(self.proportions) != len(self.attribute.values):
            raise ValueError(
                f"spec '{self.label}' has {len(self.proportions)} proportions "
                f"for {len(self.attribute.values)} attribute values"
            )
        if any(p < 0 or p > 1 for p in self.proportions):
            raise ValueError(f"spec '{self.label}' has a proportion outside [0, 1]")
        if abs(sum(self.proportions) - 1.0) > PROPORTION_TOLERANCE:
            raise ValueError(f"spec '{self.label}' proportions sum to {sum(self.proportions)}, not 1")
        return self

    def proportion_of(self, value: str) -> float:
        return self.proportions[self.attribute.index_of(value)]

    @property
    def is_generation_spec(self) -> bool:
        """True when the catch-all never has to be generated"""
        return self.proportions[self.attribute.catch_all_index] == 0


class SpecEntry(BaseModel):
    """One spec inside a spec-set file (the attribute is shared)"""
    label: str
    kind: Literal["biased", "unbiased"]
    proportions: Tuple[float, ...]


class SpecSetFile(BaseModel):
    """On-disk layout of a spec set"""
    attribute: AttributeSpec
    specs: List[SpecEntry]


class SpecSet(BaseModel):
    """Unbiased and biased specs declared over one attribute"""
    model_config = ConfigDict(frozen=True)

    attribute: AttributeSpec
    specs: Tuple[DistributionSpec, ...]

    @model_validator(mode="after")
    def _check_specs(self):
        labels = [s.label for s in self.specs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"spec labels must be unique: {labels}")
        for spec in self.specs:
            if spec.attribute != self.attribute:
                raise ValueError(f"spec '{spec.label}' is declared over a different attribute")
        return self

    @property
    def unbiased(self) -> List[DistributionSpec]:
        return [s for s in self.specs if s.kind == "unbiased"]

    @property
    def biased(self) -> List[DistributionSpec]:
        return [s for s in self.specs if s.kind == "biased"]

    def require_rating_ready(self) -> None:
        if not self.unbiased or not self.biased:
            raise SpecError("a rating run needs at least one unbiased and one biased spec")

    def to_file(self) -> SpecSetFile:
        return SpecSetFile(
            attribute=self.attribute,
            specs=[SpecEntry(label=s.label, kind=s.kind, proportions=s.proportions) for s in self.specs],
        )


def build_spec_set(attribute: AttributeSpec,
                   entries: Iterable[Tuple[str, str, Iterable[float]]]) -> SpecSet:
    """Build a SpecSet from (label, kind, proportions) triples"""
    try:
        specs = tuple(
            DistributionSpec(attribute=attribute, proportions=tuple(p), kind=kind, label=label)
            for label, kind, p in entries
        )
        return SpecSet(attribute=attribute, specs=specs)
    except ValidationError as e:
        raise SpecError(str(e)) from None


def default_spec_set(include_pure: bool = False) -> SpecSet:
    """
    Gender specs used in the translation experiments: unbiased (0.5, 0.5, 0.0),
    biased (0.1, 0.9, 0.0) and (0.9, 0.1, 0.0). With include_pure the all-He and
    all-She specs are added as further biased declarations.
    """
    entries = [
        ("unbiased-50-50", "unbiased", (0.5, 0.5, 0.0)),
        ("biased-10-90", "biased", (0.1, 0.9, 0.0)),
        ("biased-90-10", "biased", (0.9, 0.1, 0.0)),
    ]
    if include_pure:
        entries += [
            ("biased-pure-he", "biased", (1.0, 0.0, 0.0)),
            ("biased-pure-she", "biased", (0.0, 1.0, 0.0)),
        ]
    return build_spec_set(gender_attribute(), entries)


def load_spec_set(path: Union[str, Path]) -> SpecSet:
    """Read a spec-set JSON file"""
    path = Path(path)
    try:
        raw = SpecSetFile.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}") from None
    except ValidationError as e:
        raise SpecError(f"malformed spec file {path}: {e}") from None
    return build_spec_set(raw.attribute, ((s.label, s.kind, s.proportions) for s in raw.specs))


def save_spec_set(spec_set: SpecSet, path: Union[str, Path]) -> None:
    Path(path).write_text(spec_set.to_file().model_dump_json(indent=2), encoding="utf-8")


# ==================================================================================
# 5. COUNTS AND DATA BLOCKS
# ==================================================================================
class ValueCounts(BaseModel):
    """Observed integer counts per attribute value"""
    model_config = ConfigDict(frozen=True)

    attribute: AttributeSpec
    counts: Tuple[int, ...]

    @model_validator(mode="after")
    def _check_counts(self):
        if len(self.counts) != len(self.attribute.values):
            raise ValueError("counts must align with attribute values")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")
        return self

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    def as_dict(self) -> Dict[str, int]:
        return dict(zip(self.attribute.values, self.counts))

    @classmethod
    def from_values(cls, attribute: AttributeSpec, observed: Iterable[str]) -> "ValueCounts":
        counts = [0] * len(attribute.values)
        for value in observed:
            counts[attribute.index_of(value)] += 1
        return cls(attribute=attribute, counts=tuple(counts))


class DataBlock(BaseModel):
    """A generated batch of template texts with known slot-level assignments"""
    model_config = ConfigDict(frozen=True)

    spec: DistributionSpec
    texts: Tuple[str, ...]
    slot_truth: Tuple[Tuple[str, ...], ...]
    block_size: int = Field(..., gt=0)
    slots_per_text: int = Field(..., gt=0)
    seed: int

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.texts) != self.block_size or len(self.slot_truth) != self.block_size:
            raise ValueError("texts and slot_truth must both have block_size entries")
        if any(len(slots) != self.slots_per_text for slots in self.slot_truth):
            raise ValueError("every slot_truth entry must have slots_per_text values")
        return self

    def truth_counts(self) -> ValueCounts:
        """Aggregate of slot_truth over the whole block"""
        return ValueCounts.from_values(self.spec.attribute, (v for slots in self.slot_truth for v in slots))


def dump_json(model: BaseModel) -> str:
    """Stable JSON text for a model (sorted keys, 2-space indent)"""
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
