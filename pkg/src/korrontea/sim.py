"""Synchronization-policy simulator: scenarios, traces, verification.

A scenario is described by a JSON document:

    {
      "theta": 10, "alpha": 5, "rounds": 100, "seed": 42,
      "hard_flows": [{"number": 0, "period": 10, "max_delay": 3}],
      "soft_flows": [{"number": 0, "period": 4,  "max_delay": 3}]
    }

Hard flows emit one slice per period tick; the period of a soft flow is the
maximal gap between two slices, actual gaps being drawn uniformly from
[1, period] with the scenario seed.  Each slice is delayed on its transport
channel by a seeded uniform draw from [0, max_delay].  Hard flows are named
F0, F1, ... and soft flows f0, f1, ...

Runs are fully deterministic per configuration (including the seed) and are
stored as line-oriented traces, one line per composed output slice:

    SLICE 3 ts=14 TMAX=26 F0:1{20} f0:2{14,21} {f1:30} late[f1:2@40]

with the output time stamp, the window bound T_MAX (absent under the soft
policy), the number and stamps of the source slices each flow contributed,
soft flows whose buffered slices were available too early for this window
in braces, and slices that arrived too late for any window as stamp@arrival.
`verify` re-derives the run from the configuration and diffs the trace
against the offline window oracle.
"""

from __future__ import annotations

import hashlib
import json
import re
import socket
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

from .clocks import VirtualTimeline
from .errors import InvalidConfig, TraceSyntaxError
from .fusion import (
    Emission,
    EngineEvent,
    FlowEnded,
    FusionEngine,
    OracleRound,
    Policy,
    PolicyParams,
    SliceArrived,
    TimerFired,
    oracle_rounds,
    select_policy,
)
from .model import (
    Constraint,
    FlowDescriptor,
    InformationUnit,
    Sample,
    SynchronousFlowHistory,
    SynchronousSlice,
)
from .transport import (
    Channel,
    ChannelConfig,
    client_handshake,
    read_frame,
    server_handshake,
    write_frame,
)

SIM_SITE = "sim"
TRACE_HEADER = "KORRONTEA-TRACE 1"


@dataclass(frozen=True)
class FlowSpec:
    """One simulated flow: index, slice period, and maximal transport delay."""

    number: int
    period: int
    max_delay: int = 0

    def __post_init__(self):
        if self.number < 0:
            raise InvalidConfig("flow number must be >= 0")
        if self.period < 1:
            raise InvalidConfig("period must be >= 1")
        if self.max_delay < 0:
            raise InvalidConfig("max_delay must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    theta: int
    alpha: int
    rounds: int
    seed: int
    hard_flows: tuple[FlowSpec, ...] = ()
    soft_flows: tuple[FlowSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "hard_flows", tuple(self.hard_flows))
        object.__setattr__(self, "soft_flows", tuple(self.soft_flows))
        if self.theta <= 0:
            raise InvalidConfig("theta must be positive")
        if self.alpha < 0:
            raise InvalidConfig("alpha must be non-negative")
        if self.rounds < 1:
            raise InvalidConfig("rounds must be >= 1")
        if not self.hard_flows and not self.soft_flows:
            raise InvalidConfig("scenario needs at least one flow")
        for spec in self.hard_flows:
            if spec.period > self.theta:
                raise InvalidConfig(
                    f"hard flow {spec.number} has period {spec.period} > "
                    f"theta {self.theta}"
                )
        for specs in (self.hard_flows, self.soft_flows):
            numbers = [s.number for s in specs]
            if len(set(numbers)) != len(numbers):
                raise InvalidConfig("duplicate flow numbers")

    @property
    def params(self) -> PolicyParams:
        return PolicyParams(theta=self.theta, alpha=self.alpha)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            return cls(
                theta=int(d["theta"]),
                alpha=int(d.get("alpha", 0)),
                rounds=int(d["rounds"]),
                seed=int(d.get("seed", 0)),
                hard_flows=tuple(
                    FlowSpec(
                        number=int(f["number"]),
                        period=int(f["period"]),
                        max_delay=int(f.get("max_delay", 0)),
                    )
                    for f in d.get("hard_flows", ())
                ),
                soft_flows=tuple(
                    FlowSpec(
                        number=int(f["number"]),
                        period=int(f["period"]),
                        max_delay=int(f.get("max_delay", 0)),
                    )
                    for f in d.get("soft_flows", ())
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"bad scenario document: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "alpha": self.alpha,
            "rounds": self.rounds,
            "seed": self.seed,
            "hard_flows": [
                {"number": f.number, "period": f.period, "max_delay": f.max_delay}
                for f in self.hard_flows
            ],
            "soft_flows": [
                {"number": f.number, "period": f.period, "max_delay": f.max_delay}
                for f in self.soft_flows
            ],
        }


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidConfig(f"{path}: expected a JSON object")
    return ScenarioConfig.from_dict(doc)


def flow_name(constraint: Constraint, number: int) -> str:
    """Hard flows get capital names (F0), soft flows small ones (f0)."""
    prefix = "F" if constraint is Constraint.HARD else "f"
    return f"{prefix}{number}"


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class FlowScenario:
    """One generated flow: its descriptor, full history, and arrival ticks."""

    descriptor: FlowDescriptor
    history: SynchronousFlowHistory
    arrivals: tuple[int, ...]

    @property
    def name(self) -> str:
        return self.descriptor.flow_id


def _make_flow(
    cfg: ScenarioConfig, spec: FlowSpec, constraint: Constraint
) -> FlowScenario:
    name = flow_name(constraint, spec.number)
    desc = FlowDescriptor(
        flow_id=name,
        source_id=f"src-{name}",
        site=SIM_SITE,
        constraint=constraint,
        nominal_period=spec.period if constraint is Constraint.HARD else None,
    )
    if constraint is Constraint.HARD:
        stamps = [i * spec.period for i in range(cfg.rounds)]
    else:
        rng = __import__("random").Random(_derive_seed(cfg.seed, f"gaps/{name}"))
        stamps = [0]
        for _ in range(cfg.rounds - 1):
            stamps.append(stamps[-1] + rng.randint(1, spec.period))
    slices = tuple(
        SynchronousSlice(
            time_stamp=ts,
            site=SIM_SITE,
            units={
                name: (
                    InformationUnit(
                        name, 1, (Sample(f"{name}#{i}".encode()),)
                    ),
                )
            },
        )
        for i, ts in enumerate(stamps)
    )
    history = SynchronousFlowHistory(
        flow_set=(desc,), site=SIM_SITE, slices=slices
    )
    channel = Channel(
        ChannelConfig(
            base_delay=0,
            jitter_bound=spec.max_delay,
            seed=_derive_seed(cfg.seed, f"delay/{name}"),
        )
    )
    arrivals = tuple(channel.send(s, s.time_stamp) for s in slices)
    return FlowScenario(descriptor=desc, history=history, arrivals=arrivals)


def generate_scenario(cfg: ScenarioConfig) -> list[FlowScenario]:
    """Deterministically build every flow of the scenario, hard flows first."""
    flows = [
        _make_flow(cfg, spec, Constraint.HARD)
        for spec in sorted(cfg.hard_flows, key=lambda s: s.number)
    ]
    flows += [
        _make_flow(cfg, spec, Constraint.SOFT)
        for spec in sorted(cfg.soft_flows, key=lambda s: s.number)
    ]
    return flows


# --- trace records ---

LateIncident = tuple[str, int, int]  # (flow name, stamp, arrival tick)


@dataclass(frozen=True)
class TraceRecord:
    """Constitution of one composed output slice, as traced."""

    index: int
    output_ts: int
    t_max: Optional[int]
    used: tuple[tuple[str, tuple[int, ...]], ...]
    too_early: tuple[tuple[str, tuple[int, ...]], ...] = ()
    late: tuple[LateIncident, ...] = ()

    def used_map(self) -> dict[str, tuple[int, ...]]:
        return dict(self.used)


@dataclass
class Trace:
    records: list[TraceRecord]
    trailing_late: tuple[LateIncident, ...] = ()

    def all_late(self) -> list[LateIncident]:
        out = [inc for r in self.records for inc in r.late]
        out.extend(self.trailing_late)
        return out


@dataclass
class RunResult:
    config: ScenarioConfig
    policy: Policy
    scenarios: list[FlowScenario]
    trace: Trace
    history: SynchronousFlowHistory
    emission_ticks: list[int]

    def mean_latency(self) -> float:
        """Average of emission tick minus output stamp over all slices."""
        if not self.trace.records:
            return 0.0
        return statistics.fmean(
            tick - rec.output_ts
            for tick, rec in zip(self.emission_ticks, self.trace.records)
        )


def _record_from_emission(
    index: int,
    em: Emission,
    pending_late: list[LateIncident],
) -> TraceRecord:
    return TraceRecord(
        index=index,
        output_ts=em.slice.time_stamp,
        t_max=em.t_max,
        used=tuple((fid, stamps) for fid, stamps in em.used.items()),
        too_early=tuple((fid, stamps) for fid, stamps in em.too_early.items()),
        late=tuple(pending_late),
    )


def run_simulation(cfg: ScenarioConfig) -> RunResult:
    """Drive clock, channels, and fusion engine to quiescence."""
    scenarios = generate_scenario(cfg)
    descs = tuple(sc.descriptor for sc in scenarios)
    engine = FusionEngine(descs, cfg.params)
    timeline = VirtualTimeline()
    payloads: dict[int, EngineEvent] = {}
    for sc in scenarios:
        for s, arrival in zip(sc.history.slices, sc.arrivals):
            payloads[timeline.schedule(arrival)] = SliceArrived(
                sc.name, s, arrival
            )
    for sc in scenarios:
        payloads[timeline.schedule(sc.arrivals[-1])] = FlowEnded(sc.name)

    records: list[TraceRecord] = []
    emission_ticks: list[int] = []
    pending_late: list[LateIncident] = []
    while (nxt := timeline.next_fire()) is not None:
        for timer_id in timeline.advance(nxt):
            result = engine.step(payloads.pop(timer_id))
            for incident in result.late:
                pending_late.append(
                    (incident.flow_id, incident.slice.time_stamp,
                     incident.arrival_tick)
                )
            for req in result.timers:
                payloads[timeline.schedule(req.delay)] = TimerFired(req.token)
            for em in result.emissions:
                records.append(
                    _record_from_emission(len(records) + 1, em, pending_late)
                )
                pending_late.clear()
                emission_ticks.append(nxt)
    if not engine.is_quiescent:
        raise RuntimeError("simulation ended with slices still buffered")
    return RunResult(
        config=cfg,
        policy=engine.policy,
        scenarios=scenarios,
        trace=Trace(records=records, trailing_late=tuple(pending_late)),
        history=engine.history(),
        emission_ticks=emission_ticks,
    )


# --- trace text format ---

def _fmt_stamps(stamps: Iterable[int]) -> str:
    return ",".join(str(s) for s in stamps)


def _record_line(r: TraceRecord) -> str:
    parts = [f"SLICE {r.index}", f"ts={r.output_ts}"]
    if r.t_max is not None:
        parts.append(f"TMAX={r.t_max}")
    for fid, stamps in r.used:
        parts.append(f"{fid}:{len(stamps)}{{{_fmt_stamps(stamps)}}}")
    for fid, stamps in r.too_early:
        parts.append(f"{{{fid}:{_fmt_stamps(stamps)}}}")
    if r.late:
        items = ",".join(f"{fid}:{ts}@{arr}" for fid, ts, arr in r.late)
        parts.append(f"late[{items}]")
    return " ".join(parts)


def emit_trace(trace: Trace) -> str:
    """Render a trace as line-oriented UTF-8 text; inverse of parse_trace."""
    lines = [TRACE_HEADER]
    lines.extend(_record_line(r) for r in trace.records)
    lines.extend(
        f"LATE {fid}:{ts}@{arr}" for fid, ts, arr in trace.trailing_late
    )
    return "\n".join(lines) + "\n"


_USED_RE = re.compile(r"^(\w+):(\d+)\{(-?[\d,\-]*)\}$")
_EARLY_RE = re.compile(r"^\{(\w+):(-?[\d,\-]+)\}$")
_LATE_ITEM_RE = re.compile(r"^(\w+):(-?\d+)@(-?\d+)$")


def _parse_stamps(text: str, line_no: int) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise TraceSyntaxError(line_no, f"bad stamp list {text!r}") from exc


def _parse_record_line(line: str, line_no: int) -> TraceRecord:
    tokens = line.split()
    if len(tokens) < 3 or tokens[0] != "SLICE":
        raise TraceSyntaxError(line_no, "expected 'SLICE <i> ts=<t> ...'")
    try:
        index = int(tokens[1])
    except ValueError as exc:
        raise TraceSyntaxError(line_no, "bad slice index") from exc
    if not tokens[2].startswith("ts="):
        raise TraceSyntaxError(line_no, "missing ts= field")
    try:
        output_ts = int(tokens[2][3:])
    except ValueError as exc:
        raise TraceSyntaxError(line_no, "bad ts= value") from exc
    t_max: Optional[int] = None
    used: list[tuple[str, tuple[int, ...]]] = []
    too_early: list[tuple[str, tuple[int, ...]]] = []
    late: list[LateIncident] = []
    for tok in tokens[3:]:
        if tok.startswith("TMAX="):
            try:
                t_max = int(tok[5:])
            except ValueError as exc:
                raise TraceSyntaxError(line_no, "bad TMAX= value") from exc
            continue
        if tok.startswith("late[") and tok.endswith("]"):
            for item in filter(None, tok[5:-1].split(",")):
                m = _LATE_ITEM_RE.match(item)
                if not m:
                    raise TraceSyntaxError(line_no, f"bad late item {item!r}")
                late.append((m.group(1), int(m.group(2)), int(m.group(3))))
            continue
        m = _EARLY_RE.match(tok)
        if m:
            too_early.append((m.group(1), _parse_stamps(m.group(2), line_no)))
            continue
        m = _USED_RE.match(tok)
        if m:
            stamps = _parse_stamps(m.group(3), line_no)
            if int(m.group(2)) != len(stamps):
                raise TraceSyntaxError(
                    line_no, f"count {m.group(2)} != {len(stamps)} stamps"
                )
            used.append((m.group(1), stamps))
            continue
        raise TraceSyntaxError(line_no, f"unrecognized token {tok!r}")
    return TraceRecord(
        index=index,
        output_ts=output_ts,
        t_max=t_max,
        used=tuple(used),
        too_early=tuple(too_early),
        late=tuple(late),
    )


def parse_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceSyntaxError(1, f"missing header {TRACE_HEADER!r}")
    records: list[TraceRecord] = []
    trailing: list[LateIncident] = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("SLICE"):
            if trailing:
                raise TraceSyntaxError(line_no, "SLICE after trailing LATE")
            records.append(_parse_record_line(line, line_no))
        elif line.startswith("LATE "):
            m = _LATE_ITEM_RE.match(line[5:].strip())
            if not m:
                raise TraceSyntaxError(line_no, "bad LATE line")
            trailing.append((m.group(1), int(m.group(2)), int(m.group(3))))
        else:
            raise TraceSyntaxError(line_no, f"unrecognized line {line!r}")
    return Trace(records=records, trailing_late=tuple(trailing))


# --- verification ---

@dataclass
class VerifyReport:
    mismatches: int
    violations: list[str]
    late_count: int
    record_count: int
    oracle_round_count: int

    @property
    def ok(self) -> bool:
        return self.mismatches == 0 and not self.violations

    def summary(self) -> str:
        lines = [
            f"records: {self.record_count}",
            f"oracle rounds: {self.oracle_round_count}",
            f"mismatched slices: {self.mismatches}",
            f"late slices: {self.late_count}",
            f"invariant violations: {len(self.violations)}",
        ]
        lines.extend(f"  - {v}" for v in self.violations)
        lines.append("result: " + ("OK" if self.ok else "MISMATCH"))
        return "\n".join(lines)


def count_mismatches(
    records: Sequence[TraceRecord], rounds: Sequence[OracleRound]
) -> int:
    """Positions where the traced constitution differs from the oracle's."""
    n = 0
    for rec, rnd in zip(records, rounds):
        same = (
            rec.output_ts == rnd.output_ts
            and rec.t_max == rnd.t_max
            and rec.used_map() == dict(rnd.used)
        )
        n += 0 if same else 1
    n += abs(len(records) - len(rounds))
    return n


def verify(trace: Trace, cfg: ScenarioConfig) -> VerifyReport:
    """Diff a trace against the offline oracle and check its invariants."""
    scenarios = generate_scenario(cfg)
    histories = [sc.history for sc in scenarios]
    policy = select_policy([sc.descriptor for sc in scenarios])
    rounds = oracle_rounds(histories, cfg.params, policy)
    violations: list[str] = []

    hard_names = {
        sc.name for sc in scenarios
        if sc.descriptor.constraint is Constraint.HARD
    }
    last_ts: Optional[int] = None
    for rec in trace.records:
        used = rec.used_map()
        if last_ts is not None and rec.output_ts <= last_ts:
            violations.append(
                f"slice {rec.index}: output ts {rec.output_ts} does not "
                f"increase past {last_ts}"
            )
        last_ts = rec.output_ts
        if not used:
            violations.append(f"slice {rec.index}: no source slices listed")
            continue
        anchors = {
            fid: stamps for fid, stamps in used.items() if fid in hard_names
        } or used
        first = min(min(stamps) for stamps in anchors.values() if stamps)
        if rec.output_ts != first:
            violations.append(
                f"slice {rec.index}: ts {rec.output_ts} is not the first "
                f"occurrence {first} of its sources"
            )
        if rec.t_max is not None:
            for fid, stamps in used.items():
                beyond = [s for s in stamps if s > rec.t_max]
                if beyond:
                    violations.append(
                        f"slice {rec.index}: {fid} stamps {beyond} exceed "
                        f"TMAX {rec.t_max}"
                    )
        if policy is Policy.SOFT:
            if rec.t_max is not None:
                violations.append(
                    f"slice {rec.index}: TMAX present under the soft policy"
                )
            beyond = [
                s
                for stamps in used.values()
                for s in stamps
                if s > rec.output_ts + cfg.theta
            ]
            if beyond:
                violations.append(
                    f"slice {rec.index}: stamps {beyond} outside the "
                    f"theta window"
                )

    # every too-early slice must be consumed by a later record
    used_after: dict[str, set[int]] = {}
    for rec in reversed(trace.records):
        for fid, stamps in rec.too_early:
            missing = [
                s for s in stamps if s not in used_after.get(fid, set())
            ]
            if missing:
                violations.append(
                    f"slice {rec.index}: too-early stamps {missing} of {fid} "
                    f"never consumed"
                )
        for fid, stamps in rec.used:
            used_after.setdefault(fid, set()).update(stamps)

    # conservation: generated = used + late, each exactly once
    late_by_flow: dict[str, list[int]] = {}
    for fid, ts, _ in trace.all_late():
        late_by_flow.setdefault(fid, []).append(ts)
    for sc in scenarios:
        produced = list(sc.history.stamps)
        consumed = [
            s for rec in trace.records for s in rec.used_map().get(sc.name, ())
        ]
        consumed += late_by_flow.get(sc.name, [])
        if sorted(consumed) != produced:
            missing = set(produced) - set(consumed)
            extra = set(consumed) - set(produced)
            dupes = len(consumed) - len(set(consumed))
            violations.append(
                f"conservation failure for {sc.name}: missing {sorted(missing)}, "
                f"unknown {sorted(extra)}, duplicated {dupes}"
            )

    return VerifyReport(
        mismatches=count_mismatches(trace.records, rounds),
        violations=violations,
        late_count=len(trace.all_late()),
        record_count=len(trace.records),
        oracle_round_count=len(rounds),
    )


# --- alpha sweep ---

@dataclass(frozen=True)
class SweepRow:
    alpha: int
    slices: int
    mismatches: int
    late: int
    mean_latency: float


def sweep_alpha(
    cfg: ScenarioConfig, alpha_from: int, alpha_to: int
) -> list[SweepRow]:
    """Run the scenario for each alpha in [alpha_from, alpha_to]."""
    if alpha_from < 0 or alpha_to < alpha_from:
        raise InvalidConfig("need 0 <= from <= to")
    histories = [sc.history for sc in generate_scenario(cfg)]
    rounds = oracle_rounds(histories, cfg.params)
    rows = []
    for alpha in range(alpha_from, alpha_to + 1):
        result = run_simulation(replace(cfg, alpha=alpha))
        rows.append(
            SweepRow(
                alpha=alpha,
                slices=len(result.trace.records),
                mismatches=count_mismatches(result.trace.records, rounds),
                late=len(result.trace.all_late()),
                mean_latency=round(result.mean_latency(), 3),
            )
        )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["alpha,slices,mismatches,late,mean_latency"]
    lines.extend(
        f"{r.alpha},{r.slices},{r.mismatches},{r.late},{r.mean_latency}"
        for r in rows
    )
    return "\n".join(lines) + "\n"


# --- socket demo (wall-clock mode) ---

def serve_once(
    host: str,
    port: int,
    cfg: ScenarioConfig,
    ready: Optional["__import__('threading').Event"] = None,
) -> RunResult:
    """Accept one feeder connection and fuse everything it sends.

    Wall-clock ticks are milliseconds since the session started; this path
    is a demo of the socket conduit and is not deterministic.
    """
    scenarios = generate_scenario(cfg)
    descs = tuple(sc.descriptor for sc in scenarios)
    registry = {d.flow_id: d for d in descs}
    engine = FusionEngine(descs, cfg.params)
    timeline = VirtualTimeline()
    payloads: dict[int, EngineEvent] = {}
    records: list[TraceRecord] = []
    emission_ticks: list[int] = []
    pending_late: list[LateIncident] = []

    def handle(result, tick):
        for incident in result.late:
            pending_late.append(
                (incident.flow_id, incident.slice.time_stamp,
                 incident.arrival_tick)
            )
        for req in result.timers:
            payloads[timeline.schedule(req.delay)] = TimerFired(req.token)
        for em in result.emissions:
            records.append(
                _record_from_emission(len(records) + 1, em, pending_late)
            )
            pending_late.clear()
            emission_ticks.append(tick)

    with socket.create_server((host, port)) as server:
        if ready is not None:
            ready.bound_port = server.getsockname()[1]  # type: ignore[attr-defined]
            ready.set()
        conn, _ = server.accept()
        with conn:
            server_handshake(conn)
            start = time.monotonic()

            def tick() -> int:
                return int((time.monotonic() - start) * 1000)

            def fire_due(now: int):
                for timer_id in timeline.advance(max(now, timeline.now)):
                    handle(engine.step(payloads.pop(timer_id)), now)

            while True:
                nxt = timeline.next_fire()
                timeout = 0.05
                if nxt is not None:
                    timeout = min(timeout, max(nxt - tick(), 0) / 1000)
                conn.settimeout(timeout or 0.001)
                try:
                    s = read_frame(conn, registry)
                except socket.timeout:
                    fire_due(tick())
                    continue
                now = tick()
                fire_due(now)
                if s is None:
                    break
                (fid,) = s.units.keys()
                handle(engine.step(SliceArrived(fid, s, now)), now)
            for sc in scenarios:
                handle(engine.step(FlowEnded(sc.name)), tick())
            while timeline.next_fire() is not None:
                wait = (timeline.next_fire() - tick()) / 1000
                if wait > 0:
                    time.sleep(wait)
                fire_due(tick())
    return RunResult(
        config=cfg,
        policy=engine.policy,
        scenarios=scenarios,
        trace=Trace(records=records, trailing_late=tuple(pending_late)),
        history=engine.history(),
        emission_ticks=emission_ticks,
    )


def feed_scenario(
    host: str, port: int, cfg: ScenarioConfig, tick_ms: float = 1.0
) -> int:
    """Stream a generated scenario to a server; returns slices sent."""
    sends = sorted(
        (
            (arrival, i, sc.name, s)
            for i, sc in enumerate(generate_scenario(cfg))
            for s, arrival in zip(sc.history.slices, sc.arrivals)
        ),
        key=lambda item: (item[0], item[1], item[3].time_stamp),
    )
    sent = 0
    with socket.create_connection((host, port)) as conn:
        client_handshake(conn)
        start = time.monotonic()
        for arrival, _, _, s in sends:
            due = start + arrival * tick_ms / 1000
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            write_frame(conn, s)
            sent += 1
    return sent
