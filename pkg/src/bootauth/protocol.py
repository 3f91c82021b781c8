"""The two-phase authentication machine as a deterministic transition system.

Certificate validation happens first (each side checks the stored root
against its burned-in hash, then validates the peer certificate), then the
three-packet exchange: challenge, challenge-response, response, ending in
session-key derivation on both sides. Every transition consumes exactly one
event label and lands in a distinct status, so runs are acyclic by
construction. Error statuses send a one-byte alarm and abort; the completed
machine sends a zero-code alarm as its boot-continue signal and ends.

A replaced processor is the one behavioral fork: an AP whose private key
does not match the certificate stored for it cannot open the
challenge-response packet, and rather than alarming it forges a response to
try to pass authentication — the peer then catches the stale echo when
parsing the response.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import adversary
from .crypto import CryptoProvider, Drbg, NONCE_LEN
from .domain import (
    ABORT,
    END,
    INIT,
    Phase,
    ProcessorState,
    ProtocolState,
    Status,
    StatusKind,
    attk,
    err,
    ok,
)
from .events import ATTACK, Actor, Event, EventKind
from .packets import (
    ALARM_OK,
    Alarm,
    Challenge,
    ChallengeResponse,
    Packet,
    Response,
    packet_digest,
)


class ProtocolError(Exception):
    """Precondition violation: disabled event or malformed machine state."""


@dataclass(frozen=True)
class FaultInjection:
    """Debug-build switches that weaken packet checks; used to exercise the verifier."""

    skip_nonce_check: bool = False
    skip_ephe_hash_check: bool = False


@dataclass(frozen=True)
class ParseOutcome:
    """Result of decrypting and integrity-checking a packet."""

    ok: bool
    processor: ProcessorState | None = None
    reason: str | None = None

    @staticmethod
    def success(processor: ProcessorState) -> "ParseOutcome":
        return ParseOutcome(True, processor=processor)

    @staticmethod
    def failure(reason: str) -> "ParseOutcome":
        return ParseOutcome(False, reason=reason)


DECRYPT_FAIL = "decrypt_fail"
NONCE_MISMATCH = "nonce_mismatch"
EPHE_HASH_MISMATCH = "ephe_hash_mismatch"
WRONG_PACKET_TYPE = "wrong_packet_type"
MALFORMED_PLAINTEXT = "malformed_plaintext"

ALARM_CODES = {
    Phase.A_CERTS: 0x01,
    Phase.B_CERTS: 0x02,
    Phase.CHAL: 0x03,
    Phase.CHALRESP: 0x04,
    Phase.RESP: 0x05,
}


# ---------------------------------------------------------------------------
# Packet construction and parsing
# ---------------------------------------------------------------------------


def _make_challenge(proc: ProcessorState, recipient_public: bytes, provider: CryptoProvider, rng: Drbg) -> Challenge:
    if proc.local_nonce is None:
        raise ProtocolError("challenge requires a generated nonce")
    return Challenge(provider.encrypt(recipient_public, proc.local_nonce, rng))


def _make_challenge_response(
    proc: ProcessorState, recipient_public: bytes, provider: CryptoProvider, rng: Drbg
) -> ChallengeResponse:
    if proc.remote_nonce is None or proc.local_nonce is None or proc.local_ephe_key is None:
        raise ProtocolError("challenge-response requires echo nonce, fresh nonce, and ephemeral key")
    ephe_public = proc.local_ephe_key.public_key
    plaintext = proc.remote_nonce + proc.local_nonce + provider.hash(ephe_public)
    return ChallengeResponse(provider.encrypt(recipient_public, plaintext, rng), ephe_public)


def _make_response(proc: ProcessorState, recipient_public: bytes, provider: CryptoProvider, rng: Drbg) -> Response:
    if proc.remote_nonce is None or proc.local_ephe_key is None:
        raise ProtocolError("response requires echo nonce and ephemeral key")
    ephe_public = proc.local_ephe_key.public_key
    plaintext = proc.remote_nonce + provider.hash(ephe_public)
    return Response(provider.encrypt(recipient_public, plaintext, rng), ephe_public)


def build_challenge(
    ap: ProcessorState, bsp_public: bytes, provider: CryptoProvider, rng: Drbg
) -> tuple[Packet, ProcessorState]:
    """Draw a fresh challenge nonce and seal it for the peer."""
    updated = replace(ap, local_nonce=provider.gen_nonce(rng))
    return _make_challenge(updated, bsp_public, provider, rng), updated


def parse_challenge(
    bsp: ProcessorState, pkt: Packet, provider: CryptoProvider, faults: FaultInjection | None = None
) -> ParseOutcome:
    """Open a challenge; on success the sender's nonce becomes our echo obligation."""
    if not isinstance(pkt, Challenge):
        return ParseOutcome.failure(WRONG_PACKET_TYPE)
    plaintext = provider.decrypt(bsp.private_key, pkt.ciphertext)
    if plaintext is None:
        return ParseOutcome.failure(DECRYPT_FAIL)
    if len(plaintext) != NONCE_LEN:
        return ParseOutcome.failure(MALFORMED_PLAINTEXT)
    return ParseOutcome.success(replace(bsp, remote_nonce=plaintext))


def build_challenge_response(
    bsp: ProcessorState, ap_public: bytes, provider: CryptoProvider, rng: Drbg
) -> tuple[Packet, ProcessorState]:
    """Draw a response nonce and an ephemeral pair, then seal the echo/nonce/key-digest triple."""
    if bsp.remote_nonce is None:
        raise ProtocolError("nothing to echo: challenge not parsed yet")
    updated = replace(bsp, local_nonce=provider.gen_nonce(rng), local_ephe_key=provider.gen_ephemeral(rng))
    return _make_challenge_response(updated, ap_public, provider, rng), updated


def parse_challenge_response(
    ap: ProcessorState, pkt: Packet, provider: CryptoProvider, faults: FaultInjection | None = None
) -> ParseOutcome:
    """Open a challenge-response and check the nonce echo and the ephemeral-key digest."""
    if not isinstance(pkt, ChallengeResponse):
        return ParseOutcome.failure(WRONG_PACKET_TYPE)
    if ap.local_nonce is None:
        raise ProtocolError("no local nonce to compare the echo against")
    faults = faults or FaultInjection()
    plaintext = provider.decrypt(ap.private_key, pkt.ciphertext)
    if plaintext is None:
        return ParseOutcome.failure(DECRYPT_FAIL)
    if len(plaintext) != 3 * NONCE_LEN:
        return ParseOutcome.failure(MALFORMED_PLAINTEXT)
    echo, fresh, ephe_hash = plaintext[:32], plaintext[32:64], plaintext[64:]
    if echo != ap.local_nonce and not faults.skip_nonce_check:
        return ParseOutcome.failure(NONCE_MISMATCH)
    if ephe_hash != provider.hash(pkt.ephe_public) and not faults.skip_ephe_hash_check:
        return ParseOutcome.failure(EPHE_HASH_MISMATCH)
    return ParseOutcome.success(replace(ap, remote_nonce=fresh, remote_ephe_key=pkt.ephe_public))


def build_response(
    ap: ProcessorState, bsp_public: bytes, provider: CryptoProvider, rng: Drbg
) -> tuple[Packet, ProcessorState]:
    """Draw an ephemeral pair and seal the echo plus its key digest."""
    if ap.remote_nonce is None:
        raise ProtocolError("nothing to echo: challenge-response not parsed yet")
    updated = replace(ap, local_ephe_key=provider.gen_ephemeral(rng))
    return _make_response(updated, bsp_public, provider, rng), updated


def parse_response(
    bsp: ProcessorState, pkt: Packet, provider: CryptoProvider, faults: FaultInjection | None = None
) -> ParseOutcome:
    """Open a response and check the nonce echo and the ephemeral-key digest."""
    if not isinstance(pkt, Response):
        return ParseOutcome.failure(WRONG_PACKET_TYPE)
    if bsp.local_nonce is None:
        raise ProtocolError("no local nonce to compare the echo against")
    faults = faults or FaultInjection()
    plaintext = provider.decrypt(bsp.private_key, pkt.ciphertext)
    if plaintext is None:
        return ParseOutcome.failure(DECRYPT_FAIL)
    if len(plaintext) != 2 * NONCE_LEN:
        return ParseOutcome.failure(MALFORMED_PLAINTEXT)
    echo, ephe_hash = plaintext[:32], plaintext[32:]
    if echo != bsp.local_nonce and not faults.skip_nonce_check:
        return ParseOutcome.failure(NONCE_MISMATCH)
    if ephe_hash != provider.hash(pkt.ephe_public) and not faults.skip_ephe_hash_check:
        return ParseOutcome.failure(EPHE_HASH_MISMATCH)
    return ParseOutcome.success(replace(bsp, remote_ephe_key=pkt.ephe_public))


# ---------------------------------------------------------------------------
# Event gating
# ---------------------------------------------------------------------------

_EV = Event
_ENABLED: dict[Status, tuple[Event, ...]] = {
    INIT: (_EV(EventKind.READ_ROM),),
    ok(Phase.READ_ROM): (_EV(EventKind.READ_NVM),),
    ok(Phase.READ_NVM): (_EV(EventKind.VERIFY_RCHASH, Actor.AP),),
    ok(Phase.RCHASH_A): (_EV(EventKind.VERIFY_CERT, Actor.AP),),
    ok(Phase.A_CERTS): (_EV(EventKind.VERIFY_RCHASH, Actor.BSP),),
    ok(Phase.RCHASH_B): (_EV(EventKind.VERIFY_CERT, Actor.BSP),),
    ok(Phase.B_CERTS): (_EV(EventKind.GEN_NONCE, Actor.AP),),
    ok(Phase.GEN_NONCE): (_EV(EventKind.SEND_PACKET, Actor.AP),),
    ok(Phase.SEND_CHAL): (_EV(EventKind.RECEIVE_PACKET, Actor.BSP), ATTACK),
    attk(Phase.CHAL): (_EV(EventKind.RECEIVE_PACKET, Actor.BSP),),
    ok(Phase.RECV_CHAL): (_EV(EventKind.PARSE_PACKET, Actor.BSP),),
    ok(Phase.CHAL): (_EV(EventKind.GEN_NONCE, Actor.BSP),),
    ok(Phase.GEN_NONCE_B): (_EV(EventKind.GEN_EPHE_KEY, Actor.BSP),),
    ok(Phase.GEN_EPHE_B): (_EV(EventKind.SEND_PACKET, Actor.BSP),),
    ok(Phase.SEND_CHALRESP): (_EV(EventKind.RECEIVE_PACKET, Actor.AP), ATTACK),
    attk(Phase.CHALRESP): (_EV(EventKind.RECEIVE_PACKET, Actor.AP),),
    ok(Phase.RECV_CHALRESP): (_EV(EventKind.PARSE_PACKET, Actor.AP),),
    ok(Phase.CHALRESP): (_EV(EventKind.GEN_EPHE_KEY, Actor.AP),),
    ok(Phase.GEN_EPHE_A): (_EV(EventKind.SEND_PACKET, Actor.AP),),
    ok(Phase.SEND_RESP): (_EV(EventKind.RECEIVE_PACKET, Actor.BSP), ATTACK),
    attk(Phase.RESP): (_EV(EventKind.RECEIVE_PACKET, Actor.BSP),),
    ok(Phase.RECV_RESP): (_EV(EventKind.PARSE_PACKET, Actor.BSP),),
    ok(Phase.RESP): (_EV(EventKind.GEN_SESS_KEY, Actor.BSP),),
    ok(Phase.SESSKEY_B): (_EV(EventKind.GEN_SESS_KEY, Actor.AP),),
    ok(Phase.SESSKEY_A): (_EV(EventKind.SEND_PACKET, Actor.BSP),),
    err(Phase.A_CERTS): (_EV(EventKind.SEND_PACKET, Actor.AP),),
    err(Phase.B_CERTS): (_EV(EventKind.SEND_PACKET, Actor.BSP),),
    err(Phase.CHAL): (_EV(EventKind.SEND_PACKET, Actor.BSP),),
    err(Phase.CHALRESP): (_EV(EventKind.SEND_PACKET, Actor.AP),),
    err(Phase.RESP): (_EV(EventKind.SEND_PACKET, Actor.BSP),),
}


def event_enabled(state: ProtocolState, event: Event) -> bool:
    """Total gating predicate over status x event label."""
    return event in _ENABLED.get(state.status, ())


def enabled_events(state: ProtocolState) -> list[Event]:
    """All enabled events, protocol step first, attack (where possible) second."""
    return list(_ENABLED.get(state.status, ()))


# ---------------------------------------------------------------------------
# The step function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepResult:
    """Successor state plus trace metadata for the consumed event."""

    state: ProtocolState
    parse_failure: str | None = None
    packet_digest: str | None = None


def _side(state: ProtocolState, actor: Actor) -> ProcessorState:
    return state.bsp if actor is Actor.BSP else state.ap


def _with_side(state: ProtocolState, actor: Actor, proc: ProcessorState, status: Status) -> ProtocolState:
    if actor is Actor.BSP:
        return replace(state, bsp=proc, status=status)
    return replace(state, ap=proc, status=status)


def _peer_public(proc: ProcessorState, peer: str) -> bytes:
    if proc.cert_chain is None:
        raise ProtocolError("certificate chain not read yet")
    cert = getattr(proc.cert_chain, peer)
    return cert.subject_public_key


def ap_is_impostor(state: ProtocolState, provider: CryptoProvider) -> bool:
    """Whether the AP's private key contradicts the AP certificate it read from NVM."""
    chain = state.ap.cert_chain
    if chain is None:
        return False
    try:
        return provider.derive_public(state.ap.private_key) != chain.ap.subject_public_key
    except Exception:
        return True


def _exec_verify_rchash(state: ProtocolState, actor: Actor, provider: CryptoProvider) -> ProtocolState:
    from .crypto import encode_certificate

    proc = _side(state, actor)
    if proc.cert_chain is None:
        raise ProtocolError("NVM not read yet")
    valid = provider.hash(encode_certificate(proc.cert_chain.root)) == proc.root_cert_hash
    if actor is Actor.AP:
        return replace(state, status=ok(Phase.RCHASH_A) if valid else err(Phase.A_CERTS))
    return replace(state, status=ok(Phase.RCHASH_B) if valid else err(Phase.B_CERTS))


def _exec_verify_cert(state: ProtocolState, actor: Actor, provider: CryptoProvider) -> ProtocolState:
    proc = _side(state, actor)
    if proc.cert_chain is None:
        raise ProtocolError("NVM not read yet")
    # Each side validates the *peer's* certificate against the root.
    target = proc.cert_chain.bsp if actor is Actor.AP else proc.cert_chain.ap
    outcome = provider.verify_certificate(proc.cert_chain.root, target)
    if actor is Actor.AP:
        return replace(state, status=ok(Phase.A_CERTS) if outcome.valid else err(Phase.A_CERTS))
    return replace(state, status=ok(Phase.B_CERTS) if outcome.valid else err(Phase.B_CERTS))


def _exec_send(state: ProtocolState, provider: CryptoProvider, rng: Drbg) -> StepResult:
    status = state.status
    if status.kind is StatusKind.ERR:
        pkt: Packet = Alarm(ALARM_CODES[status.phase])
        nxt = replace(state, env=replace(state.env, channel=pkt), status=ABORT)
        return StepResult(nxt, packet_digest=packet_digest(pkt))
    if status == ok(Phase.GEN_NONCE):
        pkt = _make_challenge(state.ap, _peer_public(state.ap, "bsp"), provider, rng)
        nxt = replace(state, env=replace(state.env, channel=pkt), status=ok(Phase.SEND_CHAL))
        return StepResult(nxt, packet_digest=packet_digest(pkt))
    if status == ok(Phase.GEN_EPHE_B):
        pkt = _make_challenge_response(state.bsp, _peer_public(state.bsp, "ap"), provider, rng)
        nxt = replace(state, env=replace(state.env, channel=pkt), status=ok(Phase.SEND_CHALRESP))
        return StepResult(nxt, packet_digest=packet_digest(pkt))
    if status == ok(Phase.GEN_EPHE_A):
        pkt = _make_response(state.ap, _peer_public(state.ap, "bsp"), provider, rng)
        nxt = replace(state, env=replace(state.env, channel=pkt), status=ok(Phase.SEND_RESP))
        return StepResult(nxt, packet_digest=packet_digest(pkt))
    if status == ok(Phase.SESSKEY_A):
        # Authentication complete: the boot-continue signal concludes the machine.
        pkt = Alarm(ALARM_OK)
        nxt = replace(state, env=replace(state.env, channel=pkt), status=END)
        return StepResult(nxt, packet_digest=packet_digest(pkt))
    raise ProtocolError(f"nothing to send in status {status}")


_RECV_TARGET = {
    Phase.SEND_CHAL: (Actor.BSP, ok(Phase.RECV_CHAL)),
    Phase.CHAL: (Actor.BSP, ok(Phase.RECV_CHAL)),
    Phase.SEND_CHALRESP: (Actor.AP, ok(Phase.RECV_CHALRESP)),
    Phase.CHALRESP: (Actor.AP, ok(Phase.RECV_CHALRESP)),
    Phase.SEND_RESP: (Actor.BSP, ok(Phase.RECV_RESP)),
    Phase.RESP: (Actor.BSP, ok(Phase.RECV_RESP)),
}


def _exec_receive(state: ProtocolState) -> StepResult:
    pkt = state.env.channel
    if pkt is None:
        raise ProtocolError("channel is empty")
    actor, status = _RECV_TARGET[state.status.phase]
    proc = replace(_side(state, actor), packet_buffer=pkt)
    nxt = _with_side(state, actor, proc, status)
    nxt = replace(nxt, env=replace(nxt.env, channel=None))
    return StepResult(nxt, packet_digest=packet_digest(pkt))


def _exec_parse(
    state: ProtocolState, provider: CryptoProvider, rng: Drbg, faults: FaultInjection | None
) -> StepResult:
    phase = state.status.phase
    if phase is Phase.RECV_CHAL:
        actor, parser, ok_status, err_status = Actor.BSP, parse_challenge, ok(Phase.CHAL), err(Phase.CHAL)
    elif phase is Phase.RECV_CHALRESP:
        actor, parser, ok_status, err_status = (
            Actor.AP,
            parse_challenge_response,
            ok(Phase.CHALRESP),
            err(Phase.CHALRESP),
        )
    else:
        actor, parser, ok_status, err_status = Actor.BSP, parse_response, ok(Phase.RESP), err(Phase.RESP)
    proc = _side(state, actor)
    pkt = proc.packet_buffer
    if pkt is None:
        raise ProtocolError("no packet to parse")
    outcome = parser(proc, pkt, provider, faults)
    digest = packet_digest(pkt)
    if outcome.ok:
        updated = replace(outcome.processor, packet_buffer=None)
        return StepResult(_with_side(state, actor, updated, ok_status), packet_digest=digest)
    if phase is Phase.RECV_CHALRESP and ap_is_impostor(state, provider):
        # A replaced AP cannot open the packet, but it does not alarm: it
        # forges an echo and keeps playing to try to pass authentication.
        forged = replace(
            proc,
            packet_buffer=None,
            remote_nonce=provider.gen_nonce(rng),
            remote_ephe_key=pkt.ephe_public if isinstance(pkt, ChallengeResponse) else None,
        )
        return StepResult(
            _with_side(state, actor, forged, ok_status),
            parse_failure=outcome.reason,
            packet_digest=digest,
        )
    updated = replace(proc, packet_buffer=None)
    return StepResult(
        _with_side(state, actor, updated, err_status),
        parse_failure=outcome.reason,
        packet_digest=digest,
    )


def _exec_gen_sess_key(state: ProtocolState, actor: Actor, provider: CryptoProvider) -> ProtocolState:
    proc = _side(state, actor)
    if proc.local_ephe_key is None or proc.remote_ephe_key is None:
        raise ProtocolError("both ephemeral keys required for session-key derivation")
    key = provider.derive_session_key(proc.local_ephe_key.private_key, proc.remote_ephe_key)
    status = ok(Phase.SESSKEY_B) if actor is Actor.BSP else ok(Phase.SESSKEY_A)
    return _with_side(state, actor, replace(proc, session_key=key), status)


_ATTACK_PHASE = {Phase.SEND_CHAL: Phase.CHAL, Phase.SEND_CHALRESP: Phase.CHALRESP, Phase.SEND_RESP: Phase.RESP}


def attack_opportunity(state: ProtocolState) -> Phase | None:
    """The packet phase an enabled attack would hit, or None if attacking is impossible here."""
    if state.status.kind is StatusKind.OK:
        return _ATTACK_PHASE.get(state.status.phase)
    return None


def _exec_attack(state: ProtocolState, provider: CryptoProvider, rng: Drbg) -> StepResult:
    pkt = state.env.channel
    if pkt is None:
        raise ProtocolError("no packet in flight to attack")
    mutated = adversary.mitm_mutate(pkt, rng.take(16), provider)
    phase = _ATTACK_PHASE[state.status.phase]
    nxt = replace(state, env=replace(state.env, channel=mutated), status=attk(phase))
    return StepResult(nxt, packet_digest=packet_digest(mutated))


def step(
    state: ProtocolState,
    event: Event,
    provider: CryptoProvider,
    rng: Drbg,
    faults: FaultInjection | None = None,
) -> StepResult:
    """Execute one enabled event; returns the successor plus trace metadata."""
    if not event_enabled(state, event):
        raise ProtocolError(f"event {event} is not enabled in status {state.status}")
    kind = event.kind
    if kind is EventKind.READ_ROM:
        return StepResult(replace(state, status=ok(Phase.READ_ROM)))
    if kind is EventKind.READ_NVM:
        chain = state.env.nvm
        return StepResult(
            replace(
                state,
                bsp=replace(state.bsp, cert_chain=chain),
                ap=replace(state.ap, cert_chain=chain),
                status=ok(Phase.READ_NVM),
            )
        )
    if kind is EventKind.VERIFY_RCHASH:
        return StepResult(_exec_verify_rchash(state, event.actor, provider))
    if kind is EventKind.VERIFY_CERT:
        return StepResult(_exec_verify_cert(state, event.actor, provider))
    if kind is EventKind.GEN_NONCE:
        proc = replace(_side(state, event.actor), local_nonce=provider.gen_nonce(rng))
        status = ok(Phase.GEN_NONCE) if event.actor is Actor.AP else ok(Phase.GEN_NONCE_B)
        return StepResult(_with_side(state, event.actor, proc, status))
    if kind is EventKind.GEN_EPHE_KEY:
        proc = replace(_side(state, event.actor), local_ephe_key=provider.gen_ephemeral(rng))
        status = ok(Phase.GEN_EPHE_B) if event.actor is Actor.BSP else ok(Phase.GEN_EPHE_A)
        return StepResult(_with_side(state, event.actor, proc, status))
    if kind is EventKind.SEND_PACKET:
        return _exec_send(state, provider, rng)
    if kind is EventKind.RECEIVE_PACKET:
        return _exec_receive(state)
    if kind is EventKind.PARSE_PACKET:
        return _exec_parse(state, provider, rng, faults)
    if kind is EventKind.GEN_SESS_KEY:
        return StepResult(_exec_gen_sess_key(state, event.actor, provider))
    return _exec_attack(state, provider, rng)


def exec_event(state: ProtocolState, event: Event, provider: CryptoProvider, rng: Drbg) -> ProtocolState:
    """Deterministic successor of `state` under `event`; raises if the event is disabled."""
    return step(state, event, provider, rng).state
