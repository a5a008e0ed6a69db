"""
COMPOSITION MODEL
=================
Rating calculus for services composed sequentially (output of the first
feeds the second). Rows are the first service, columns the second:

            BS                DSBS     UCS
    BS      {BS, DSBS, UCS}   {BS}     {UCS}
    DSBS    {BS}              {DSBS}   {UCS}
    UCS     {BS}              {DSBS}   {UCS}

BS followed by BS can behave in every possible way, so the composite has to
be rated anew; that cell is the full set. Composition over sets is the
union of the cell lookups, which keeps the algebra closed over the 7
nonempty subsets.

The table is not associative once a chain starts with BS:
(BS * UCS) * DSBS = {DSBS} while BS * (UCS * DSBS) = {BS}. Chains are
always folded from the left, in the order the services run.

Author: Bias Rating Team
"""

import logging
from functools import reduce
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

from bias_core_model import BiasRating, RatingSet, UsageError

logger = logging.getLogger(__name__)

BS, DSBS, UCS = BiasRating.BS, BiasRating.DSBS, BiasRating.UCS

TABLE: Dict[Tuple[BiasRating, BiasRating], RatingSet] = {
    (BS, BS): RatingSet.full(),
    (BS, UCS): RatingSet.of(UCS),
    (BS, DSBS): RatingSet.of(BS),
    (UCS, BS): RatingSet.of(BS),
    (UCS, UCS): RatingSet.of(UCS),
    (UCS, DSBS): RatingSet.of(DSBS),
    (DSBS, BS): RatingSet.of(BS),
    (DSBS, UCS): RatingSet.of(UCS),
    (DSBS, DSBS): RatingSet.of(DSBS),
}


def _as_set(value: Union[BiasRating, RatingSet, str]) -> RatingSet:
    if isinstance(value, RatingSet):
        return value
    if isinstance(value, BiasRating):
        return RatingSet.of(value)
    return RatingSet.parse(value)


def compose_rating(first: BiasRating, second: BiasRating) -> RatingSet:
    """Table lookup for two determinate ratings"""
    return TABLE[(first, second)]


def compose_set(first: RatingSet, second: RatingSet) -> RatingSet:
    """Union of compose_rating over every pair drawn from the two sets"""
    members = set()
    for a in first:
        for b in second:
            members |= compose_rating(a, b).members
    return RatingSet(members)


def best_case_shortcut(sets: Sequence[RatingSet]) -> Optional[RatingSet]:
    """{UCS} when the last component is UCS, otherwise None"""
    if sets and sets[-1] == RatingSet.of(UCS):
        return sets[-1]
    return None


def compose_chain(ratings: Sequence[Union[BiasRating, RatingSet, str]]) -> RatingSet:
    """
    Rating of a left-to-right chain of services.

    Parameters:
    -----------
    ratings : sequence of BiasRating, RatingSet or textual tokens ("UCS", "BS|DSBS")

    Returns the left fold of compose_set. When the last component is UCS the
    chain is UCS whatever comes before it.
    """
    sets = [_as_set(r) for r in ratings]
    if not sets:
        raise UsageError("compose_chain needs at least one rating")
    shortcut = best_case_shortcut(sets)
    if shortcut is not None:
        return shortcut
    result = reduce(compose_set, sets)
    logger.debug("compose_chain(%s) -> %s", " ⋆ ".join(s.encode() for s in sets), result.encode())
    return result


def requires_retest(result: RatingSet) -> bool:
    """An indeterminate composite has to be rated by running it"""
    return not result.is_determinate


def check_compatible(reports: Sequence) -> None:
    """Reports can only be composed when they share attribute and spec labels"""
    if not reports:
        return
    first = reports[0]
    for report in reports[1:]:
        if report.attribute != first.attribute:
            raise UsageError(
                f"cannot compose '{first.service_id}' and '{report.service_id}': "
                f"attributes '{first.attribute.name}' and '{report.attribute.name}' differ"
            )
        if (report.config.unbiased_specs, report.config.biased_specs) != \
                (first.config.unbiased_specs, first.config.biased_specs):
            raise UsageError(
                f"cannot compose '{first.service_id}' and '{report.service_id}': spec declarations differ"
            )


def compose_reports(reports: Iterable) -> RatingSet:
    """Compose the overall ratings of saved RatingReports, in order"""
    reports = list(reports)
    if not reports:
        raise UsageError("compose_reports needs at least one report")
    check_compatible(reports)
    ratings = []
    for report in reports:
        if report.overall is None:
            raise UsageError(f"report for '{report.service_id}' carries no overall rating")
        ratings.append(report.overall)
    return compose_chain(ratings)
