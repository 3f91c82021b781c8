"""Protocol-state data types and the run-level indicator functions.

States are immutable values: every transition produces a fresh state, so
copies can be explored in parallel without coordination. The security
context of a state is the (bsp, ap, env) projection with the status dropped;
benignity compares that context against provisioned ground truth, and
free-of-attack asks whether a run ever carries the attack event.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterator

from .crypto import CertificateChain, EphemeralKeyPair
from .events import Event, EventKind
from .packets import Packet, encode_packet, packet_to_json

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .provisioning import ProvisionRecord


class Phase(Enum):
    READ_ROM = "READ_ROM"
    READ_NVM = "READ_NVM"
    RCHASH_A = "RCHASH_A"
    A_CERTS = "A_CERTS"
    RCHASH_B = "RCHASH_B"
    B_CERTS = "B_CERTS"
    GEN_NONCE = "GEN_NONCE"
    SEND_CHAL = "SEND_CHAL"
    RECV_CHAL = "RECV_CHAL"
    CHAL = "CHAL"
    GEN_NONCE_B = "GEN_NONCE_B"
    GEN_EPHE_B = "GEN_EPHE_B"
    SEND_CHALRESP = "SEND_CHALRESP"
    RECV_CHALRESP = "RECV_CHALRESP"
    CHALRESP = "CHALRESP"
    GEN_EPHE_A = "GEN_EPHE_A"
    SEND_RESP = "SEND_RESP"
    RECV_RESP = "RECV_RESP"
    RESP = "RESP"
    SESSKEY_B = "SESSKEY_B"
    SESSKEY_A = "SESSKEY_A"


class StatusKind(Enum):
    INIT = "INIT"
    OK = "OK"
    ERR = "ERR"
    ATTK = "ATTK"
    END = "END"
    ABORT = "ABORT"


# Error states exist only for validation/parsing phases; attack states only
# for the three in-flight packets.
ERR_PHASES = frozenset({Phase.A_CERTS, Phase.B_CERTS, Phase.CHAL, Phase.CHALRESP, Phase.RESP})
ATTK_PHASES = frozenset({Phase.CHAL, Phase.CHALRESP, Phase.RESP})
PACKET_PHASES = (Phase.CHAL, Phase.CHALRESP, Phase.RESP)


@dataclass(frozen=True)
class Status:
    """Tagged protocol status; INIT/END/ABORT carry no phase."""

    kind: StatusKind
    phase: Phase | None = None

    def __post_init__(self) -> None:
        bare = self.kind in (StatusKind.INIT, StatusKind.END, StatusKind.ABORT)
        if bare and self.phase is not None:
            raise ValueError(f"{self.kind.value} carries no phase")
        if not bare and self.phase is None:
            raise ValueError(f"{self.kind.value} requires a phase")
        if self.kind is StatusKind.ERR and self.phase not in ERR_PHASES:
            raise ValueError(f"no error status for phase {self.phase}")
        if self.kind is StatusKind.ATTK and self.phase not in ATTK_PHASES:
            raise ValueError(f"no attack status for phase {self.phase}")

    def __str__(self) -> str:
        if self.phase is None:
            return self.kind.value
        return f"{self.phase.value}_{self.kind.value}"


INIT = Status(StatusKind.INIT)
END = Status(StatusKind.END)
ABORT = Status(StatusKind.ABORT)


def ok(phase: Phase) -> Status:
    return Status(StatusKind.OK, phase)


def err(phase: Phase) -> Status:
    return Status(StatusKind.ERR, phase)


def attk(phase: Phase) -> Status:
    return Status(StatusKind.ATTK, phase)


def parse_status(text: str) -> Status:
    """Inverse of ``str(status)``."""
    if text in ("INIT", "END", "ABORT"):
        return Status(StatusKind(text))
    stem, _, suffix = text.rpartition("_")
    try:
        return Status(StatusKind(suffix), Phase(stem))
    except ValueError as exc:
        raise ValueError(f"not a status: {text!r}") from exc


@dataclass(frozen=True)
class ProcessorState:
    """One processor's view: burned-in trust anchors plus per-run scratch fields.

    `root_cert_hash` and `private_key` are fixed at construction and never
    replaced by any protocol event; everything else starts empty.
    """

    root_cert_hash: bytes
    private_key: bytes
    packet_buffer: Packet | None = None
    cert_chain: CertificateChain | None = None
    local_nonce: bytes | None = None
    remote_nonce: bytes | None = None
    local_ephe_key: EphemeralKeyPair | None = None
    remote_ephe_key: bytes | None = None
    session_key: bytes | None = None

    def __post_init__(self) -> None:
        if not self.root_cert_hash or not self.private_key:
            raise ValueError("root_cert_hash and private_key can never be empty")


@dataclass(frozen=True)
class EnvironmentState:
    """The shared environment: certificate store plus the one-slot channel."""

    nvm: CertificateChain
    channel: Packet | None = None


@dataclass(frozen=True)
class ProtocolState:
    bsp: ProcessorState
    ap: ProcessorState
    env: EnvironmentState
    status: Status


@dataclass(frozen=True)
class SecurityContext:
    """Status-free projection of a state: exactly the security assets."""

    bsp: ProcessorState
    ap: ProcessorState
    env: EnvironmentState


def security_context(state: ProtocolState) -> SecurityContext:
    return SecurityContext(state.bsp, state.ap, state.env)


def benignity(ctx: SecurityContext, ground_truth: "ProvisionRecord") -> bool:
    """True iff the AP identity and the NVM contents match provisioned ground truth."""
    return (
        ctx.ap.private_key == ground_truth.ap_keypair.private_key
        and ctx.env.nvm == ground_truth.chain
    )


def is_terminal(state: ProtocolState) -> bool:
    return state.status.kind in (StatusKind.END, StatusKind.ABORT)


@dataclass(frozen=True)
class Run:
    """A maximal execution: (state, event) steps from the initial state to a terminal one."""

    steps: tuple[tuple[ProtocolState, Event], ...]
    final: ProtocolState

    @property
    def initial(self) -> ProtocolState:
        return self.steps[0][0] if self.steps else self.final

    def states(self) -> Iterator[ProtocolState]:
        for state, _ in self.steps:
            yield state
        yield self.final

    def events(self) -> Iterator[Event]:
        for _, event in self.steps:
            yield event

    def statuses(self) -> list[str]:
        return [str(s.status) for s in self.states()]


def free_of_attack(run: Run) -> bool:
    """True iff no step of the run is the attack event."""
    return all(ev.kind is not EventKind.ATTACK for ev in run.events())


def step_projection(state: ProtocolState) -> tuple:
    """Distinctness key for run states: status, channel, buffers, nonces, ephemerals."""

    def enc(pkt: Packet | None) -> bytes | None:
        return None if pkt is None else encode_packet(pkt)

    def proc(p: ProcessorState) -> tuple:
        ephe = p.local_ephe_key.public_key if p.local_ephe_key else None
        return (enc(p.packet_buffer), p.local_nonce, p.remote_nonce, ephe, p.remote_ephe_key)

    return (str(state.status), enc(state.env.channel), proc(state.bsp), proc(state.ap))


def validate_run(run: Run) -> None:
    """Check run well-formedness: chained steps, terminal tail, pairwise-distinct states."""
    states = list(run.states())
    if not is_terminal(run.final):
        raise ValueError("run does not end in a terminal state")
    seen = set()
    for state in states:
        key = step_projection(state)
        if key in seen:
            raise ValueError(f"run revisits state projection {key[0]}")
        seen.add(key)


# ---------------------------------------------------------------------------
# Canonical JSON form (byte fields hex-encoded, lowercase)
# ---------------------------------------------------------------------------


def _hex(value: bytes | None) -> str | None:
    return None if value is None else value.hex()


def _cert_to_json(cert) -> dict:
    return {
        "subject_id": cert.subject_id,
        "subject_public_key": cert.subject_public_key.hex(),
        "issuer_id": cert.issuer_id,
        "signature": cert.signature.hex(),
    }


def _chain_to_json(chain: CertificateChain | None) -> dict | None:
    if chain is None:
        return None
    return {"root": _cert_to_json(chain.root), "bsp": _cert_to_json(chain.bsp), "ap": _cert_to_json(chain.ap)}


def _processor_to_json(p: ProcessorState) -> dict:
    ephe = None
    if p.local_ephe_key is not None:
        ephe = {"public_key": p.local_ephe_key.public_key.hex(), "private_key": p.local_ephe_key.private_key.hex()}
    return {
        "root_cert_hash": p.root_cert_hash.hex(),
        "private_key": p.private_key.hex(),
        "packet_buffer": None if p.packet_buffer is None else packet_to_json(p.packet_buffer),
        "cert_chain": _chain_to_json(p.cert_chain),
        "local_nonce": _hex(p.local_nonce),
        "remote_nonce": _hex(p.remote_nonce),
        "local_ephe_key": ephe,
        "remote_ephe_key": _hex(p.remote_ephe_key),
        "session_key": _hex(p.session_key),
    }


def state_to_json_dict(state: ProtocolState) -> dict:
    return {
        "bsp": _processor_to_json(state.bsp),
        "ap": _processor_to_json(state.ap),
        "env": {
            "nvm": _chain_to_json(state.env.nvm),
            "channel": None if state.env.channel is None else packet_to_json(state.env.channel),
        },
        "status": str(state.status),
    }


def state_to_json(state: ProtocolState) -> str:
    return json.dumps(state_to_json_dict(state), separators=(",", ":"))


def with_status(state: ProtocolState, status: Status) -> ProtocolState:
    return replace(state, status=status)
