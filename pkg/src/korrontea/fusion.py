"""Inter-flow synchronization policies: fusion of flows into composed flows.

Three policies build composed flows from a group of same-site input flows,
chosen by the group's declared temporal constraints:

* hard policy (all flows hard): each round waits until every flow holds a
  slice beyond T_MAX, the greatest stamp among the flows' earliest pending
  slices, then gathers every pending slice stamped at most T_MAX.  Hard
  flows deliver within theta, so no timers are needed.
* mixed policy (both kinds): rounds are anchored on the hard flows only;
  pending soft slices inside the window ride along, ones beyond it stay
  buffered ("available too early").  Every hard arrival starts an alpha
  timer whose expiry authorizes consuming that slice, giving delayed soft
  slices of similar stamps time to arrive.
* soft policy (all flows soft): each round gathers every pending slice
  stamped within theta of the earliest pending stamp; arrivals start
  alpha+theta timers that authorize consumption.

The engine is a deterministic single-threaded state machine driven by a
totally ordered event stream (slice arrivals, timer expiries, end-of-flow
marks).  `oracle_compose` re-derives the composed flow offline from
complete histories, with no timers or buffering; with per-flow transport
delays bounded by alpha the online output equals it exactly.

The authorization counter follows semaphore discipline with per-slice
accounting: a timed slice's expired timer contributes one authorization,
composing a slice consumes the authorizations of exactly the timed slices
it uses (a consumed slice's still-pending timer is cancelled), so the
counter equals the number of pending authorized slices and never goes
negative.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    AlreadyPrimitive,
    EmptyConsumption,
    EmptyGroup,
    MixedSites,
    NonMonotonicStamps,
    UnknownFlow,
)
from .model import (
    Constraint,
    FlowDescriptor,
    InformationUnit,
    SiteId,
    SynchronousFlowHistory,
    SynchronousSlice,
)


class Policy(enum.Enum):
    HARD = "hard"
    MIXED = "mixed"
    SOFT = "soft"


@dataclass(frozen=True)
class PolicyParams:
    """Design-time parameters of the policies.

    `theta` bounds the gap between consecutive slices of a hard flow and
    sizes the soft-policy window; `alpha` is the assumed maximum transport
    delay of a slice, traded against latency.
    """

    theta: int
    alpha: int = 0

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


# --- engine events (inputs) ---

@dataclass(frozen=True)
class SliceArrived:
    flow_id: str
    slice: SynchronousSlice
    arrival_tick: int


@dataclass(frozen=True)
class TimerFired:
    token: int


@dataclass(frozen=True)
class FlowEnded:
    flow_id: str


EngineEvent = Union[SliceArrived, TimerFired, FlowEnded]


# --- engine outputs ---

@dataclass(frozen=True)
class TimerRequest:
    """Ask the driver to fire TimerFired(token) after `delay` ticks."""

    token: int
    delay: int


@dataclass(frozen=True)
class LateSlice:
    """A slice that arrived after its window was already emitted."""

    flow_id: str
    slice: SynchronousSlice
    arrival_tick: int


@dataclass(frozen=True)
class Emission:
    """One composed output slice plus its constitution report."""

    slice: SynchronousSlice
    t_max: Optional[int]
    used: Mapping[str, tuple[int, ...]]       # flow -> source stamps consumed
    too_early: Mapping[str, tuple[int, ...]]  # soft flows buffered beyond window


@dataclass(frozen=True)
class StepResult:
    emissions: tuple[Emission, ...] = ()
    timers: tuple[TimerRequest, ...] = ()
    late: tuple[LateSlice, ...] = ()


def select_policy(group: Iterable[FlowDescriptor]) -> Policy:
    """Pick the policy for a flow group from its declared constraints."""
    descs = list(group)
    if not descs:
        raise EmptyGroup("no flows in group")
    sites = {d.site for d in descs}
    if len(sites) > 1:
        raise MixedSites(f"group spans sites {sorted(sites)!r}")
    kinds = {d.constraint for d in descs}
    if kinds == {Constraint.HARD}:
        return Policy.HARD
    if kinds == {Constraint.SOFT}:
        return Policy.SOFT
    return Policy.MIXED


def compose_result_slice(
    consumed: Mapping[str, Sequence[SynchronousSlice]],
    output_ts: int,
    site: SiteId,
    declared_flows: Optional[Iterable[str]] = None,
) -> SynchronousSlice:
    """Build one composed slice from consumed source slices.

    Units are grouped by their data flow, kept in source order (slice stamp,
    then source sequence number) and renumbered from 1 per flow.  Flows in
    `declared_flows` that contribute nothing appear with an empty unit
    tuple, keeping the composed flow's slice flow-set constant.
    """
    gathered: dict[str, list[tuple[int, int, InformationUnit]]] = {}
    for slices in consumed.values():
        for src in sorted(slices, key=lambda s: s.time_stamp):
            for fid, ius in src.units.items():
                for iu in ius:
                    gathered.setdefault(fid, []).append(
                        (src.time_stamp, iu.sequence_number, iu)
                    )
    if not any(gathered.values()):
        raise EmptyConsumption("no information units to compose")
    units: dict[str, tuple[InformationUnit, ...]] = {}
    if declared_flows is not None:
        for fid in declared_flows:
            units[fid] = ()
    for fid, entries in gathered.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        units[fid] = tuple(
            InformationUnit(fid, i + 1, iu.samples)
            for i, (_, _, iu) in enumerate(entries)
        )
    return SynchronousSlice(time_stamp=output_ts, site=site, units=units)


def separate(h: SynchronousFlowHistory) -> list[SynchronousFlowHistory]:
    """Break a composed history into one primitive history per flow.

    Each primitive slice keeps the composed slice's time stamp and the
    flow's units with their sequence numbers; composed slices where a flow
    contributes nothing produce no slice for it.
    """
    if h.is_primitive:
        raise AlreadyPrimitive("history carries a single flow")
    out: list[SynchronousFlowHistory] = []
    for desc in h.flow_set:
        slices = []
        for s in h.slices:
            ius = s.units.get(desc.flow_id, ())
            if ius:
                slices.append(
                    SynchronousSlice(
                        time_stamp=s.time_stamp,
                        site=s.site,
                        units={desc.flow_id: ius},
                    )
                )
        out.append(
            SynchronousFlowHistory(
                flow_set=(desc,), site=h.site, slices=tuple(slices)
            )
        )
    return out


@dataclass
class _Buffered:
    slice: SynchronousSlice
    authorized: bool
    token: Optional[int] = None


class FusionEngine:
    """Event-driven state machine applying one synchronization policy.

    Inputs are primitive flows identified by flow id; slices of each flow
    must arrive in strictly increasing stamp order (the transport is FIFO).
    A flow that has ended is dropped from every "wait for each flow"
    condition, so finite flows drain instead of deadlocking; a slice whose
    stamp falls at or below the last emitted window bound can no longer
    join any window and is reported late instead of buffered.
    """

    def __init__(self, group: Iterable[FlowDescriptor], params: PolicyParams):
        descs = tuple(group)
        self.policy = select_policy(descs)
        self.params = params
        self.site = descs[0].site
        self.group = descs
        self.flows = {d.flow_id: d for d in descs}
        self.hard_ids = tuple(
            d.flow_id for d in descs if d.constraint is Constraint.HARD
        )
        self.soft_ids = tuple(
            d.flow_id for d in descs if d.constraint is Constraint.SOFT
        )
        self._buffers: dict[str, deque[_Buffered]] = {
            d.flow_id: deque() for d in descs
        }
        self._ended: set[str] = set()
        self._last_stamp: dict[str, int] = {}
        self._floor: Optional[int] = None
        self._last_out_ts: Optional[int] = None
        self._tokens: dict[int, _Buffered] = {}
        self._next_token = 0
        self.autorisation = 0
        self._out: list[SynchronousSlice] = []

    # --- public state views ---

    @property
    def output_slices(self) -> tuple[SynchronousSlice, ...]:
        return tuple(self._out)

    def history(self) -> SynchronousFlowHistory:
        """The composed flow emitted so far (validated on every call)."""
        return SynchronousFlowHistory(
            flow_set=self.group, site=self.site, slices=tuple(self._out)
        )

    @property
    def is_quiescent(self) -> bool:
        return len(self._ended) == len(self.flows) and not any(
            self._buffers.values()
        )

    def buffered_stamps(self, flow_id: str) -> tuple[int, ...]:
        return tuple(e.slice.time_stamp for e in self._buffers[flow_id])

    # --- event handling ---

    def step(self, ev: EngineEvent) -> StepResult:
        timers: list[TimerRequest] = []
        late: list[LateSlice] = []
        if isinstance(ev, SliceArrived):
            result = self._on_slice(ev)
            if isinstance(result, TimerRequest):
                timers.append(result)
            elif isinstance(result, LateSlice):
                late.append(result)
        elif isinstance(ev, TimerFired):
            self._on_timer(ev.token)
        elif isinstance(ev, FlowEnded):
            if ev.flow_id not in self.flows:
                raise UnknownFlow(ev.flow_id)
            self._ended.add(ev.flow_id)
        else:
            raise TypeError(f"unknown event {ev!r}")
        emissions = []
        while True:
            em = self._try_emit()
            if em is None:
                break
            emissions.append(em)
        return StepResult(tuple(emissions), tuple(timers), tuple(late))

    def _on_slice(
        self, ev: SliceArrived
    ) -> Union[TimerRequest, LateSlice, None]:
        fid = ev.flow_id
        if fid not in self.flows:
            raise UnknownFlow(fid)
        if fid in self._ended:
            raise ValueError(f"flow {fid!r} has already ended")
        s = ev.slice
        if s.site != self.site:
            raise MixedSites(
                f"slice of site {s.site!r} on engine of site {self.site!r}"
            )
        last = self._last_stamp.get(fid)
        if last is not None and s.time_stamp <= last:
            raise NonMonotonicStamps(
                f"flow {fid!r}: stamp {s.time_stamp} after {last}"
            )
        self._last_stamp[fid] = s.time_stamp
        if self._floor is not None and s.time_stamp <= self._floor:
            return LateSlice(fid, s, ev.arrival_tick)
        delay = self._timer_delay(fid)
        entry = _Buffered(slice=s, authorized=delay is None)
        self._buffers[fid].append(entry)
        if delay is None:
            return None
        token = self._next_token
        self._next_token += 1
        entry.token = token
        self._tokens[token] = entry
        return TimerRequest(token, delay)

    def _timer_delay(self, fid: str) -> Optional[int]:
        if self.policy is Policy.MIXED and fid in self.hard_ids:
            return self.params.alpha
        if self.policy is Policy.SOFT:
            return self.params.alpha + self.params.theta
        return None

    def _on_timer(self, token: int) -> None:
        entry = self._tokens.pop(token, None)
        if entry is not None and not entry.authorized:
            entry.authorized = True
            self.autorisation += 1

    # --- emission ---

    def _try_emit(self) -> Optional[Emission]:
        if self.policy is Policy.SOFT:
            return self._try_emit_soft()
        return self._try_emit_windowed()

    def _try_emit_soft(self) -> Optional[Emission]:
        heads = [buf[0].slice.time_stamp for buf in self._buffers.values() if buf]
        if not heads:
            return None
        t0 = min(heads)
        bound = t0 + self.params.theta
        for buf in self._buffers.values():
            for entry in buf:
                if entry.slice.time_stamp > bound:
                    break
                if not entry.authorized:
                    return None
        consumed = self._consume(bound)
        return self._finish(
            consumed, output_ts=t0, t_max=None, floor=t0, report_t_max=None
        )

    def _try_emit_windowed(self) -> Optional[Emission]:
        anchor_ids = self.hard_ids if self.policy is Policy.MIXED else tuple(
            self.flows
        )
        anchored = [fid for fid in anchor_ids if self._buffers[fid]]
        if not anchored:
            return self._try_emit_trailing()
        for fid in anchor_ids:
            if fid not in self._ended and not self._buffers[fid]:
                return None
        t_max = max(self._buffers[fid][0].slice.time_stamp for fid in anchored)
        for fid in anchor_ids:
            if fid in self._ended:
                continue
            if self._buffers[fid][-1].slice.time_stamp <= t_max:
                return None
        if self.policy is Policy.MIXED:
            for fid in self.hard_ids:
                for entry in self._buffers[fid]:
                    if entry.slice.time_stamp > t_max:
                        break
                    if not entry.authorized:
                        return None
        output_ts = min(
            self._buffers[fid][0].slice.time_stamp for fid in anchored
        )
        consumed = self._consume(t_max)
        return self._finish(
            consumed,
            output_ts=output_ts,
            t_max=t_max,
            floor=t_max,
            report_t_max=t_max,
        )

    def _try_emit_trailing(self) -> Optional[Emission]:
        # Mixed policy only: after every flow ended and the hard flows
        # drained, leftover soft slices form one final composed slice.
        if self.policy is not Policy.MIXED:
            return None
        if len(self._ended) != len(self.flows):
            return None
        stamps = [
            e.slice.time_stamp
            for fid in self.soft_ids
            for e in self._buffers[fid]
        ]
        if not stamps:
            return None
        consumed = self._consume(max(stamps))
        return self._finish(
            consumed,
            output_ts=min(stamps),
            t_max=None,
            floor=max(stamps),
            report_t_max=max(stamps),
        )

    def _consume(self, bound: int) -> dict[str, list[_Buffered]]:
        consumed: dict[str, list[_Buffered]] = {}
        for fid, buf in self._buffers.items():
            taken = []
            while buf and buf[0].slice.time_stamp <= bound:
                taken.append(buf.popleft())
            if taken:
                consumed[fid] = taken
        return consumed

    def _finish(
        self,
        consumed: dict[str, list[_Buffered]],
        output_ts: int,
        t_max: Optional[int],
        floor: int,
        report_t_max: Optional[int],
    ) -> Emission:
        for entries in consumed.values():
            for entry in entries:
                if entry.token is not None:
                    self._tokens.pop(entry.token, None)  # cancel pending timer
                    if entry.authorized:
                        self.autorisation -= 1
        assert self.autorisation >= 0
        slice_map = {
            fid: [e.slice for e in entries] for fid, entries in consumed.items()
        }
        out = compose_result_slice(
            slice_map, output_ts, self.site, declared_flows=self.flows
        )
        assert self._last_out_ts is None or output_ts > self._last_out_ts
        self._last_out_ts = output_ts
        self._floor = floor if self._floor is None else max(self._floor, floor)
        self._out.append(out)
        used = {
            fid: tuple(e.slice.time_stamp for e in entries)
            for fid, entries in consumed.items()
        }
        too_early = {}
        for fid in self.soft_ids:
            stamps = self.buffered_stamps(fid)
            if stamps:
                too_early[fid] = stamps
        return Emission(slice=out, t_max=report_t_max, used=used, too_early=too_early)


# --- offline oracle ---

@dataclass(frozen=True)
class OracleRound:
    """Constitution of one composed slice derived from complete histories."""

    output_ts: int
    t_max: Optional[int]
    used: Mapping[str, tuple[int, ...]]


def _primitive_inputs(
    histories: Sequence[SynchronousFlowHistory],
) -> dict[str, SynchronousFlowHistory]:
    by_id: dict[str, SynchronousFlowHistory] = {}
    for h in histories:
        if not h.is_primitive:
            raise ValueError(
                "oracle inputs must be primitive histories; separate() first"
            )
        fid = h.flow_set[0].flow_id
        if fid in by_id:
            raise ValueError(f"duplicate input flow {fid!r}")
        by_id[fid] = h
    return by_id


def oracle_rounds(
    histories: Sequence[SynchronousFlowHistory],
    params: PolicyParams,
    policy: Optional[Policy] = None,
) -> list[OracleRound]:
    """Window rounds the policies produce over fully materialized inputs.

    Evaluates the window predicates directly on complete primitive
    histories, with no timers or buffering; this is the reference the
    online engine is checked against.
    """
    by_id = _primitive_inputs(histories)
    descs = [h.flow_set[0] for h in by_id.values()]
    if policy is None:
        policy = select_policy(descs)
    else:
        select_policy(descs)  # validates non-empty, single site
    anchor_ids = [
        d.flow_id
        for d in descs
        if policy is not Policy.MIXED or d.constraint is Constraint.HARD
    ]
    pos = {fid: 0 for fid in by_id}
    rounds: list[OracleRound] = []

    def remaining(fid: str) -> bool:
        return pos[fid] < len(by_id[fid].slices)

    def head(fid: str) -> int:
        return by_id[fid].stamps[pos[fid]]

    def take(bound: int) -> dict[str, tuple[int, ...]]:
        used: dict[str, tuple[int, ...]] = {}
        for fid in by_id:
            stamps = []
            while remaining(fid) and head(fid) <= bound:
                stamps.append(head(fid))
                pos[fid] += 1
            if stamps:
                used[fid] = tuple(stamps)
        return used

    while True:
        if policy is Policy.SOFT:
            heads = [head(fid) for fid in by_id if remaining(fid)]
            if not heads:
                break
            t0 = min(heads)
            used = take(t0 + params.theta)
            rounds.append(OracleRound(output_ts=t0, t_max=None, used=used))
            continue
        anchor_heads = [head(fid) for fid in anchor_ids if remaining(fid)]
        if not anchor_heads:
            leftovers = [head(fid) for fid in by_id if remaining(fid)]
            if policy is Policy.MIXED and leftovers:
                used = take(max(leftovers))
                rounds.append(
                    OracleRound(
                        output_ts=min(leftovers),
                        t_max=max(leftovers),
                        used=used,
                    )
                )
            break
        t_max = max(anchor_heads)
        output_ts = min(anchor_heads)
        used = take(t_max)
        rounds.append(OracleRound(output_ts=output_ts, t_max=t_max, used=used))
    return rounds


def oracle_compose(
    histories: Sequence[SynchronousFlowHistory],
    params: PolicyParams,
    policy: Optional[Policy] = None,
) -> SynchronousFlowHistory:
    """Offline re-derivation of the composed flow from complete histories."""
    by_id = _primitive_inputs(histories)
    descs = tuple(h.flow_set[0] for h in by_id.values())
    if policy is None:
        policy = select_policy(descs)
    site = descs[0].site
    rounds = oracle_rounds(histories, params, policy)
    slice_index = {
        fid: {s.time_stamp: s for s in h.slices} for fid, h in by_id.items()
    }
    out_slices = []
    for rnd in rounds:
        consumed = {
            fid: [slice_index[fid][ts] for ts in stamps]
            for fid, stamps in rnd.used.items()
        }
        out_slices.append(
            compose_result_slice(
                consumed, rnd.output_ts, site, declared_flows=by_id
            )
        )
    return SynchronousFlowHistory(
        flow_set=descs, site=site, slices=tuple(out_slices)
    )
