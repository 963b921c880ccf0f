"""Core data-flow model: flows, information units, synchronous slices and flows.

Heterogeneous media are modeled uniformly as data flows whose samples are
batched into information units (sequence-numbered per flow) and gathered into
synchronous slices (time-stamped per site).  A synchronous flow is an ordered
sequence of slices over a fixed flow set; it is primitive when that set has a
single flow and composed otherwise.

Time stamps are unitless integer ticks of the local physical clock of one
site.  All local clocks share one rate, so tick *differences* are comparable
across sites while absolute values are not; every cross-slice comparison in
this module therefore requires a common site.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    CrossSiteComparison,
    InsufficientHistory,
    SliceNotInHistory,
)

# Sites are opaque identifiers; equality is exact string equality.
SiteId = str


class Constraint(enum.Enum):
    """Temporal constraint declared for a flow at design time."""

    HARD = "hard"
    SOFT = "soft"


class Ordering(enum.Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class FlowDescriptor:
    """Identity and declared properties of one data flow.

    A flow is produced by exactly one located source, the pair of a source
    component and the site where it runs.  The temporal constraint is a
    design-time declaration; `check_constraint` validates it against an
    observed history but is not the source of truth.
    """

    flow_id: str
    source_id: str
    site: SiteId
    constraint: Constraint
    coding_format: str = ""
    nominal_period: Optional[int] = None  # None for irregular producers

    def __post_init__(self):
        if not self.flow_id:
            raise ValueError("flow_id must be non-empty")
        if not self.source_id:
            raise ValueError("source_id must be non-empty")
        if not self.site:
            raise ValueError("site must be non-empty")
        if self.nominal_period is not None and self.nominal_period <= 0:
            raise ValueError("nominal_period must be positive when given")


@dataclass(frozen=True)
class Sample:
    """One media sample: opaque payload bytes plus the flow's coding format.

    Payloads may be empty (control markers); the format tag is inherited
    from the flow that produced the sample.
    """

    payload: bytes
    format: str = ""


@dataclass(frozen=True)
class InformationUnit:
    """A finite, non-empty batch of samples with a per-flow sequence number."""

    flow_id: str
    sequence_number: int
    samples: tuple[Sample, ...]

    def __post_init__(self):
        if self.sequence_number < 1:
            raise ValueError("sequence_number must be >= 1")
        samples = tuple(self.samples)
        if not samples:
            raise ValueError("an information unit carries at least one sample")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class SynchronousSlice:
    """A time-stamped set of information units captured at one site.

    `units` maps each flow of the slice's declared flow set to the ordered
    units that flow contributes; the tuple may be empty for flows that are
    declared on the slice but contribute nothing (composed slices built by
    the mixed policy use this).  At least one flow must contribute a unit.
    Within each flow the sequence numbers are exactly 1..n.
    """

    time_stamp: int
    site: SiteId
    units: Mapping[str, tuple[InformationUnit, ...]]

    def __post_init__(self):
        normalized = {fid: tuple(ius) for fid, ius in self.units.items()}
        object.__setattr__(self, "units", normalized)
        problems = validate_slice(self)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def flow_ids(self) -> frozenset[str]:
        """Declared flow set of the slice (flows may be unit-less)."""
        return frozenset(self.units)

    @property
    def present_flow_ids(self) -> frozenset[str]:
        """Flows contributing at least one unit."""
        return frozenset(fid for fid, ius in self.units.items() if ius)

    def unit_count(self) -> int:
        return sum(len(ius) for ius in self.units.values())


def validate_slice(
    s: SynchronousSlice,
    flows: Optional[Mapping[str, FlowDescriptor]] = None,
) -> list[str]:
    """Check the slice invariants, returning a list of violations (empty = ok).

    Checks the per-flow sequence-number property (numbers are exactly 1..n,
    no gaps or duplicates), that units are keyed under their own flow, and
    that some flow contributes a unit.  When `flows` is given, each present
    flow's declared site must match the slice site.
    """
    problems: list[str] = []
    if not s.site:
        problems.append("slice site is empty")
    any_units = False
    for fid, ius in s.units.items():
        if not ius:
            continue
        any_units = True
        for iu in ius:
            if iu.flow_id != fid:
                problems.append(
                    f"unit of flow {iu.flow_id!r} keyed under flow {fid!r}"
                )
        numbers = [iu.sequence_number for iu in ius]
        if len(set(numbers)) != len(numbers):
            problems.append(f"duplicate sequence number in units of {fid}")
        elif set(numbers) != set(range(1, len(numbers) + 1)):
            problems.append(f"gap in sequence numbers of {fid}")
        elif numbers != sorted(numbers):
            problems.append(f"units of {fid} are out of sequence order")
        if flows is not None:
            desc = flows.get(fid)
            if desc is None:
                problems.append(f"unknown flow {fid!r}")
            elif desc.site != s.site:
                problems.append(
                    f"site mismatch: flow {fid!r} is of site {desc.site!r}, "
                    f"slice is of site {s.site!r}"
                )
    if not any_units:
        problems.append("slice has no information units")
    return problems


@dataclass(frozen=True)
class SynchronousFlowHistory:
    """Ordered sequence of synchronous slices over a fixed flow set.

    All slices share one declared flow set and one site, and their stamps
    strictly increase.  Primitive histories carry one flow, composed ones
    several.
    """

    flow_set: tuple[FlowDescriptor, ...]
    site: SiteId
    slices: tuple[SynchronousSlice, ...]
    _stamps: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        flow_set = tuple(self.flow_set)
        slices = tuple(self.slices)
        object.__setattr__(self, "flow_set", flow_set)
        object.__setattr__(self, "slices", slices)
        if not flow_set:
            raise ValueError("flow_set must be non-empty")
        ids = [f.flow_id for f in flow_set]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate flow_id in flow_set")
        for f in flow_set:
            if f.site != self.site:
                raise ValueError(
                    f"flow {f.flow_id!r} is of site {f.site!r}, "
                    f"history is of site {self.site!r}"
                )
        id_set = frozenset(ids)
        key_sets = {s.flow_ids for s in slices}
        if len(key_sets) > 1:
            raise ValueError("slices do not share one flow set")
        for ks in key_sets:
            if not ks <= id_set:
                raise ValueError("slice flow set is not a subset of flow_set")
        stamps = tuple(s.time_stamp for s in slices)
        for a, b in zip(stamps, stamps[1:]):
            if b <= a:
                raise ValueError("slice time stamps must strictly increase")
        for s in slices:
            if s.site != self.site:
                raise ValueError("slice site differs from history site")
        object.__setattr__(self, "_stamps", stamps)

    @property
    def flow_ids(self) -> frozenset[str]:
        return frozenset(f.flow_id for f in self.flow_set)

    @property
    def is_primitive(self) -> bool:
        return len(self.flow_set) == 1

    @property
    def is_composed(self) -> bool:
        return len(self.flow_set) > 1

    @property
    def stamps(self) -> tuple[int, ...]:
        return self._stamps

    def index_of(self, s: SynchronousSlice) -> int:
        """Position of `s` in the history; raises SliceNotInHistory."""
        i = bisect.bisect_left(self._stamps, s.time_stamp)
        if i < len(self.slices) and self.slices[i] == s:
            return i
        raise SliceNotInHistory(f"no slice with stamp {s.time_stamp} matches")


def compare_units(a: tuple[int, int], b: tuple[int, int]) -> Ordering:
    """Strict total order between information units of one data flow.

    Units are keyed by (slice time stamp, sequence number); order is by
    stamp first, sequence number second.
    """
    if a[0] != b[0]:
        return Ordering.LESS if a[0] < b[0] else Ordering.GREATER
    if a[1] != b[1]:
        return Ordering.LESS if a[1] < b[1] else Ordering.GREATER
    return Ordering.EQUAL


def compare_slices(a: SynchronousSlice, b: SynchronousSlice) -> Ordering:
    """Strict total order between slices of one synchronous flow (by stamp)."""
    if a.time_stamp < b.time_stamp:
        return Ordering.LESS
    if a.time_stamp > b.time_stamp:
        return Ordering.GREATER
    return Ordering.EQUAL


def prev(
    h: SynchronousFlowHistory, s: SynchronousSlice
) -> Optional[SynchronousSlice]:
    """Immediate predecessor of `s` in `h`, or None for the first slice."""
    i = h.index_of(s)
    return h.slices[i - 1] if i > 0 else None


def next(  # noqa: A001 - operator name from the domain model
    h: SynchronousFlowHistory, s: SynchronousSlice
) -> Optional[SynchronousSlice]:
    """Immediate successor of `s` in `h`, or None for the latest slice."""
    i = h.index_of(s)
    return h.slices[i + 1] if i + 1 < len(h.slices) else None


def time_interval(a: SynchronousSlice, b: SynchronousSlice) -> int:
    """Absolute tick distance between two slices of the same site."""
    if a.site != b.site:
        raise CrossSiteComparison(
            f"cannot compare stamps of sites {a.site!r} and {b.site!r}"
        )
    return abs(b.time_stamp - a.time_stamp)


def check_constraint(h: SynchronousFlowHistory, theta: int) -> Constraint:
    """Classify a complete history as HARD or SOFT for the bound `theta`.

    HARD when every gap between consecutive slices is at most theta, SOFT
    when some gap exceeds it.  Needs at least two slices.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    if len(h.slices) < 2:
        raise InsufficientHistory("constraint needs at least two slices")
    stamps = h.stamps
    for a, b in zip(stamps, stamps[1:]):
        if b - a > theta:
            return Constraint.SOFT
    return Constraint.HARD
