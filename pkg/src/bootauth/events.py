"""Event labels of the transition system: ten processor actions plus the attack."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Actor(Enum):
    BSP = "BSP"
    AP = "AP"
    ATTACKER = "ATTACKER"


class EventKind(Enum):
    READ_ROM = "Read_ROM"
    READ_NVM = "Read_NVM"
    VERIFY_RCHASH = "Verify_RCHash"
    VERIFY_CERT = "Verify_Cert"
    GEN_NONCE = "Gen_Nonce"
    SEND_PACKET = "Send_Packet"
    RECEIVE_PACKET = "Receive_Packet"
    PARSE_PACKET = "Parse_Packet"
    GEN_EPHE_KEY = "Gen_EpheKey"
    GEN_SESS_KEY = "Gen_SessKey"
    ATTACK = "Attack"


@dataclass(frozen=True)
class Event:
    """An event label; `actor` is None for the joint initiation reads."""

    kind: EventKind
    actor: Actor | None = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.ATTACK and self.actor is not Actor.ATTACKER:
            raise ValueError("Attack is always performed by the attacker")
        if self.kind is not EventKind.ATTACK and self.actor is Actor.ATTACKER:
            raise ValueError("processor events are never performed by the attacker")

    @property
    def actor_name(self) -> str:
        return self.actor.value if self.actor is not None else "BOTH"

    def __str__(self) -> str:
        return f"{self.kind.value}({self.actor_name})"


ATTACK = Event(EventKind.ATTACK, Actor.ATTACKER)
