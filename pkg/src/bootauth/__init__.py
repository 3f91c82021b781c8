"""Mutual processor-authentication boot protocol: simulator, adversaries, verifier."""

from .adversary import AttackScenario, ScenarioConfig, apply_supply_chain, mitm_mutate
from .crypto import (
    CONCRETE,
    SYMBOLIC,
    Certificate,
    CertificateChain,
    ConcreteProvider,
    CryptoProvider,
    Drbg,
    EphemeralKeyPair,
    KeyPair,
    SymbolicProvider,
    make_provider,
)
from .domain import (
    ABORT,
    END,
    INIT,
    EnvironmentState,
    Phase,
    ProcessorState,
    ProtocolState,
    Run,
    SecurityContext,
    Status,
    StatusKind,
    benignity,
    free_of_attack,
    is_terminal,
    security_context,
)
from .events import Actor, Event, EventKind
from .packets import Alarm, Challenge, ChallengeResponse, Packet, Response, decode_packet, encode_packet
from .protocol import enabled_events, event_enabled, exec_event
from .provisioning import ProvisionRecord, initial_state, provision
from .verifier import (
    HighLevelState,
    HighLevelStatus,
    LemmaReport,
    abstract_run,
    check_functional_correctness,
    check_high_level,
    check_security_mitm,
    check_security_normal,
    check_security_tampered,
    explore,
    full_lattice,
    single_run,
    verify_all,
)

__version__ = "0.1.0"
