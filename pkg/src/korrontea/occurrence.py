"""Time-stamp algebra over sets of synchronous flows of one site.

The first/last occurrence operators locate, for an instant t, the window of
slices the synchronization policies gather into one composed slice: the
first occurrence is the smallest stamp at or after t across the group, the
last occurrence the largest stamp among each flow's first slice at or after
t.  For every t where both are defined, last >= first >= t.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable

from .errors import (
    CrossSiteComparison,
    EmptySet,
    FlowWithoutQualifyingSlice,
    NoQualifyingSlice,
)
from .model import SiteId, SynchronousFlowHistory, SynchronousSlice


@dataclass(frozen=True)
class FlowGroup:
    """A set of synchronous flows captured at one common site."""

    flows: tuple[SynchronousFlowHistory, ...]
    site: SiteId

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        for f in self.flows:
            if f.site != self.site:
                raise CrossSiteComparison(
                    f"flow of site {f.site!r} in group of site {self.site!r}"
                )


def _common_site(slices: list[SynchronousSlice]) -> None:
    sites = {s.site for s in slices}
    if len(sites) > 1:
        raise CrossSiteComparison(f"slices span sites {sorted(sites)!r}")


def minimal_time_stamp(slices: Iterable[SynchronousSlice]) -> int:
    """Smallest time stamp over a non-empty set of same-site slices.

    Several slices may attain the minimum (stamps are unique only within
    one synchronous flow); the stamp value is returned either way.
    """
    items = list(slices)
    if not items:
        raise EmptySet("minimal_time_stamp of an empty set")
    _common_site(items)
    return min(s.time_stamp for s in items)


def maximal_time_stamp(slices: Iterable[SynchronousSlice]) -> int:
    """Greatest time stamp over a non-empty set of same-site slices."""
    items = list(slices)
    if not items:
        raise EmptySet("maximal_time_stamp of an empty set")
    _common_site(items)
    return max(s.time_stamp for s in items)


def first_slice(
    f: SynchronousFlowHistory, t: int
) -> tuple[SynchronousSlice, ...]:
    """The first slice of `f` stamped at or after `t`, as a 0/1-element tuple.

    A missing predecessor counts as being before `t`, so the head of a
    history qualifies; the result is empty when every stamp is below `t`.
    """
    i = bisect.bisect_left(f.stamps, t)
    if i == len(f.slices):
        return ()
    return (f.slices[i],)


def first_occurrence(g: FlowGroup, t: int) -> int:
    """Smallest stamp >= t over every slice of every flow of the group."""
    best: int | None = None
    for f in g.flows:
        found = first_slice(f, t)
        if found and (best is None or found[0].time_stamp < best):
            best = found[0].time_stamp
    if best is None:
        raise NoQualifyingSlice(f"no slice with stamp >= {t} in group")
    return best


def last_occurrence(g: FlowGroup, t: int) -> int:
    """Greatest stamp among each flow's first slice at or after `t`.

    Every flow of the group must hold a qualifying slice; the offending
    flow is named otherwise.
    """
    best: int | None = None
    for f in g.flows:
        found = first_slice(f, t)
        if not found:
            name = ",".join(sorted(f.flow_ids))
            raise FlowWithoutQualifyingSlice(name)
        if best is None or found[0].time_stamp > best:
            best = found[0].time_stamp
    if best is None:
        raise EmptySet("last_occurrence of an empty group")
    return best
