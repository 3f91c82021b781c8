"""Transition traces: JSONL emission and deterministic replay.

A trace is one record per transition (snake_case keys, hex digests). Traces
carry enough to replay: re-executing the recorded event sequence from the
same initial state and run seed must reproduce every post-status, which is
how counterexamples are validated.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .crypto import CryptoProvider, Drbg
from .domain import ProtocolState, Run
from .events import Actor, Event, EventKind
from .protocol import FaultInjection, step


class ReplayError(Exception):
    """A replay diverged from its recorded trace."""


@dataclass(frozen=True)
class TraceRecord:
    step: int
    actor: str
    event: str
    pre_status: str
    post_status: str
    parse_failure: str | None
    packet_digest: str | None


_EVENT_BY_NAME = {kind.value: kind for kind in EventKind}


def _event_from_record(record: TraceRecord) -> Event:
    kind = _EVENT_BY_NAME.get(record.event)
    if kind is None:
        raise ReplayError(f"unknown event name {record.event!r}")
    actor = None if record.actor == "BOTH" else Actor(record.actor)
    return Event(kind, actor)


def trace_of_run(
    run: Run,
    provider: CryptoProvider,
    run_seed: bytes,
    faults: FaultInjection | None = None,
) -> list[TraceRecord]:
    """Re-execute a run's events to recover per-step metadata.

    The re-execution doubles as a fidelity check: any divergence from the
    stored states raises instead of producing a silently wrong trace.
    """
    rng = Drbg(run_seed)
    records: list[TraceRecord] = []
    steps = run.steps
    for index, (pre, event) in enumerate(steps):
        result = step(pre, event, provider, rng, faults)
        expected = steps[index + 1][0] if index + 1 < len(steps) else run.final
        if result.state != expected:
            raise ReplayError(f"step {index} ({event}) does not reproduce the stored successor")
        records.append(
            TraceRecord(
                step=index,
                actor=event.actor_name,
                event=event.kind.value,
                pre_status=str(pre.status),
                post_status=str(result.state.status),
                parse_failure=result.parse_failure,
                packet_digest=result.packet_digest,
            )
        )
    return records


def write_trace(records: list[TraceRecord], path: Path) -> None:
    lines = [json.dumps(asdict(r), separators=(",", ":")) for r in records]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_trace(path: Path) -> list[TraceRecord]:
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        records.append(TraceRecord(**doc))
    return records


def replay_trace(
    records: list[TraceRecord],
    initial: ProtocolState,
    provider: CryptoProvider,
    run_seed: bytes,
    faults: FaultInjection | None = None,
) -> ProtocolState:
    """Feed a trace back through the machine, checking every post-status."""
    state = initial
    rng = Drbg(run_seed)
    for record in records:
        if str(state.status) != record.pre_status:
            raise ReplayError(f"step {record.step}: expected pre-status {record.pre_status}, got {state.status}")
        result = step(state, _event_from_record(record), provider, rng, faults)
        if str(result.state.status) != record.post_status:
            raise ReplayError(
                f"step {record.step}: expected post-status {record.post_status}, got {result.state.status}"
            )
        if result.parse_failure != record.parse_failure:
            raise ReplayError(f"step {record.step}: parse outcome diverged from the trace")
        state = result.state
    return state
