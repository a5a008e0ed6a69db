"""
DISTRIBUTION ANALYSIS
=====================
Decides whether two observed count vectors are statistically similar.

The default test is the two-sample chi-squared test on raw counts (never on
proportions). Categories that are zero in both samples are dropped first,
since they make the statistic's denominator vanish; "Other" is usually 0/0.

The p-value comes from the upper regularized incomplete gamma function,
computed here by series expansion (x < a + 1) or a Lentz continued
fraction (x >= a + 1).

Kolmogorov-Smirnov and Kullback-Leibler tests are registered names without
an implementation; asking for them raises ConfigError.
"""

import logging
import math
from typing import Dict, List, Optional, Protocol, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bias_core_model import ConfigError, InputError, ValueCounts

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05

_EPS = 1e-15
_MAX_ITERATIONS = 10_000
_TINY = 1e-300


# ==================================================================================
# 1. VERDICT
# ==================================================================================
class SimilarityVerdict(BaseModel):
    """Outcome of one similarity test between two count vectors"""
    model_config = ConfigDict(frozen=True)

    similar: bool
    statistic: float = Field(..., ge=0)
    degrees_of_freedom: int = Field(..., ge=0)
    p_value: float = Field(..., ge=0, le=1)
    alpha: float
    dropped_categories: Tuple[str, ...] = ()
    test: str = "chi2"


# ==================================================================================
# 2. INCOMPLETE GAMMA
# ==================================================================================
def _check_gamma_domain(a: float, x: float) -> None:
    if not a > 0:
        raise InputError(f"incomplete gamma needs a > 0, got a={a}")
    if not x >= 0:
        raise InputError(f"incomplete gamma needs x >= 0, got x={x}")


def _lower_series(a: float, x: float) -> float:
    """P(a, x) by the power series; converges fast for x < a + 1"""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITERATIONS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_continued_fraction(a: float, x: float) -> float:
    """Q(a, x) by the modified Lentz continued fraction; for x >= a + 1"""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITERATIONS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Lower regularized incomplete gamma P(a, x)"""
    _check_gamma_domain(a, x)
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _lower_series(a, x))
    return max(0.0, 1.0 - _upper_continued_fraction(a, x))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x)"""
    _check_gamma_domain(a, x)
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _lower_series(a, x))
    return min(1.0, _upper_continued_fraction(a, x))


def p_value(statistic: float, df: int) -> float:
    """Chi-squared survival function: Q(df/2, statistic/2)"""
    if df < 1:
        raise InputError(f"p_value needs df >= 1, got {df}")
    if statistic < 0:
        raise InputError(f"chi-squared statistic cannot be negative, got {statistic}")
    return regularized_gamma_q(df / 2.0, statistic / 2.0)


# ==================================================================================
# 3. TWO-SAMPLE CHI-SQUARED
# ==================================================================================
def chi_square_statistic(c1: ValueCounts, c2: ValueCounts) -> Tuple[float, int, List[str]]:
    """
    Two-sample chi-squared statistic for count vectors with different totals.

    statistic = sum_i (sqrt(N2/N1) * c1_i - sqrt(N1/N2) * c2_i)^2 / (c1_i + c2_i)

    Returns (statistic, degrees of freedom, labels of dropped categories).
    """
    if c1.attribute != c2.attribute:
        raise InputError(
            f"cannot compare counts over different attributes "
            f"('{c1.attribute.name}' vs '{c2.attribute.name}')"
        )
    n1, n2 = c1.total, c2.total
    if n1 <= 0 or n2 <= 0:
        raise InputError(f"both samples need a positive total, got {n1} and {n2}")

    a1, a2 = c1.as_array().astype(np.float64), c2.as_array().astype(np.float64)
    keep = (a1 + a2) > 0
    dropped = [label for label, k in zip(c1.attribute.values, keep) if not k]
    a1, a2 = a1[keep], a2[keep]
    if a1.size == 0:
        raise InputError("every category is empty in both samples")

    k1 = math.sqrt(n2 / n1)
    k2 = math.sqrt(n1 / n2)
    statistic = float(np.sum((k1 * a1 - k2 * a2) ** 2 / (a1 + a2)))
    return statistic, int(a1.size - 1), dropped


# ==================================================================================
# 4. PLUGGABLE SIMILARITY TESTS
# ==================================================================================
class SimilarityTest(Protocol):
    name: str

    def compare(self, c1: ValueCounts, c2: ValueCounts, alpha: float) -> SimilarityVerdict:
        ...


class ChiSquaredTest:
    """Two-sample chi-squared test; similar when p > alpha"""
    name = "chi2"

    def compare(self, c1: ValueCounts, c2: ValueCounts, alpha: float) -> SimilarityVerdict:
        if not 0 < alpha < 1:
            raise InputError(f"alpha must lie strictly between 0 and 1, got {alpha}")
        statistic, df, dropped = chi_square_statistic(c1, c2)

        if df == 0:
            # one retained category: both samples put all their mass there
            return SimilarityVerdict(similar=True, statistic=statistic, degrees_of_freedom=0,
                                     p_value=1.0, alpha=alpha, dropped_categories=tuple(dropped),
                                     test=self.name)

        p = p_value(statistic, df)
        return SimilarityVerdict(similar=p > alpha, statistic=statistic, degrees_of_freedom=df,
                                 p_value=p, alpha=alpha, dropped_categories=tuple(dropped),
                                 test=self.name)


_NOT_IMPLEMENTED_TESTS = {
    "ks": "Kolmogorov-Smirnov",
    "kl": "Kullback-Leibler divergence",
}

SIMILARITY_TESTS: Dict[str, SimilarityTest] = {
    ChiSquaredTest.name: ChiSquaredTest(),
}


def get_similarity_test(name: str) -> SimilarityTest:
    key = name.strip().lower()
    if key in SIMILARITY_TESTS:
        return SIMILARITY_TESTS[key]
    if key in _NOT_IMPLEMENTED_TESTS:
        raise ConfigError(f"similarity test '{key}' ({_NOT_IMPLEMENTED_TESTS[key]}) is not implemented")
    raise ConfigError(f"unknown similarity test '{name}'; available: {sorted(SIMILARITY_TESTS)}")


def similar(c1: ValueCounts, c2: ValueCounts, alpha: float = DEFAULT_ALPHA,
            test: Optional[SimilarityTest] = None) -> SimilarityVerdict:
    """Compare two count vectors with the given test (chi-squared by default)"""
    test = test or SIMILARITY_TESTS["chi2"]
    verdict = test.compare(c1, c2, alpha)
    logger.debug("%s vs %s -> stat=%.4f df=%d p=%.4g similar=%s",
                 c1.counts, c2.counts, verdict.statistic, verdict.degrees_of_freedom,
                 verdict.p_value, verdict.similar)
    return verdict
