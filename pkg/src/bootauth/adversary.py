"""The threat model: supply-chain mutations and in-flight packet manipulation.

Supply-chain attacks happen before the machine starts (a replaced AP private
key, a tampered root or AP certificate in NVM); the interposer acts during
the run by mutating whichever in-flight packets the scenario targets.
Passive sniffing is represented by doing nothing: detection concerns
modification, and confidentiality against a listener is carried by the
packet encryption itself.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .crypto import Certificate, CryptoProvider, Drbg
from .domain import PACKET_PHASES, Phase, ProtocolState
from .packets import Alarm, Challenge, ChallengeResponse, Packet, Response
from .provisioning import (
    DEFAULT_AP_SEED,
    DEFAULT_BSP_SEED,
    DEFAULT_OEM_SEED,
    ProvisionRecord,
    initial_state,
)

DEFAULT_MUTATION_SEED = b"seed:mitm:v1"
DEFAULT_RUN_SEED = b"seed:run:v1"


class AdversaryError(Exception):
    """Attack applied to something the threat model does not cover."""


class ScenarioError(Exception):
    """Malformed scenario description."""


@dataclass(frozen=True)
class AttackScenario:
    """Which adversarial behaviors are active for a run; all-off means benign."""

    ap_replaced: bool = False
    root_cert_tampered: bool = False
    ap_cert_tampered: bool = False
    mitm_targets: frozenset[Phase] = frozenset()
    mutation_seed: bytes = DEFAULT_MUTATION_SEED

    def __post_init__(self) -> None:
        if not self.mitm_targets <= set(PACKET_PHASES):
            raise ScenarioError("mitm targets must be packet phases (CHAL/CHALRESP/RESP)")

    @property
    def is_benign(self) -> bool:
        return not (self.ap_replaced or self.root_cert_tampered or self.ap_cert_tampered or self.mitm_targets)


@dataclass(frozen=True)
class ScenarioConfig:
    """A scenario plus the seeds that make its runs reproducible."""

    scenario: AttackScenario
    oem_seed: bytes = DEFAULT_OEM_SEED
    bsp_seed: bytes = DEFAULT_BSP_SEED
    ap_seed: bytes = DEFAULT_AP_SEED
    run_seed: bytes = DEFAULT_RUN_SEED


def tamper_certificate(cert: Certificate, seed: bytes) -> Certificate:
    """Deterministically corrupt one byte of a certificate.

    The signature field is the default target; some seeds pick the embedded
    public key instead. Either way validation must reject the result.
    """
    digest = hashlib.sha256(b"cert-tamper:" + seed).digest()
    target_key = digest[0] % 4 == 0
    field = cert.subject_public_key if target_key else cert.signature
    if not field:
        raise AdversaryError("certificate field too short to tamper with")
    index = digest[1] % len(field)
    flip = (digest[2] % 255) + 1
    mutated = field[:index] + bytes([field[index] ^ flip]) + field[index + 1 :]
    if target_key:
        return replace(cert, subject_public_key=mutated)
    return replace(cert, signature=mutated)


def apply_supply_chain(
    record: ProvisionRecord, scenario: AttackScenario, provider: CryptoProvider
) -> ProtocolState:
    """Initial state after the supply-chain attacker is done with the device.

    A replaced AP gets a fresh attacker key while the NVM certificate stays
    untouched (the honest private key is unknown, so the new key necessarily
    mismatches the stored certificate). Tampered certificates are mutated in
    NVM; the burned-in ROM hash is out of the attacker's reach.
    """
    state = initial_state(record)
    if scenario.ap_replaced:
        attacker = provider.gen_keypair(b"attacker-ap:" + scenario.mutation_seed)
        state = replace(state, ap=replace(state.ap, private_key=attacker.private_key))
    nvm = state.env.nvm
    if scenario.root_cert_tampered:
        nvm = replace(nvm, root=tamper_certificate(nvm.root, b"rct:" + scenario.mutation_seed))
    if scenario.ap_cert_tampered:
        nvm = replace(nvm, ap=tamper_certificate(nvm.ap, b"apct:" + scenario.mutation_seed))
    if nvm is not state.env.nvm:
        state = replace(state, env=replace(state.env, nvm=nvm))
    return state


def mitm_mutate(pkt: Packet, seed: bytes, provider: CryptoProvider) -> Packet:
    """Deterministic in-flight manipulation of a protocol packet.

    Challenges get a one-byte ciphertext flip. For the other two packets the
    seed selects between a ciphertext flip and the skilled-attacker move:
    replacing the cleartext ephemeral key with one the attacker generated.
    """
    if isinstance(pkt, Alarm):
        raise AdversaryError("alarm packets are not attacked")
    digest = hashlib.sha256(b"mitm:" + seed).digest()

    def flip_ciphertext(ct: bytes) -> bytes:
        index = digest[1] % len(ct)
        flip = (digest[2] % 255) + 1
        return ct[:index] + bytes([ct[index] ^ flip]) + ct[index + 1 :]

    if isinstance(pkt, Challenge):
        return Challenge(flip_ciphertext(pkt.ciphertext))
    replace_ephe = digest[0] % 2 == 1
    if replace_ephe:
        attacker_key = provider.gen_ephemeral(Drbg(b"attacker-ephe:" + seed)).public_key
        return replace(pkt, ephe_public=attacker_key)
    return replace(pkt, ciphertext=flip_ciphertext(pkt.ciphertext))


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

_PHASE_NAMES = {"CHAL": Phase.CHAL, "CHALRESP": Phase.CHALRESP, "RESP": Phase.RESP}


def scenario_to_json_dict(config: ScenarioConfig) -> dict:
    sc = config.scenario
    return {
        "ap_replaced": sc.ap_replaced,
        "root_cert_tampered": sc.root_cert_tampered,
        "ap_cert_tampered": sc.ap_cert_tampered,
        "mitm_targets": sorted(p.value for p in sc.mitm_targets),
        "seeds": {
            "oem": config.oem_seed.hex(),
            "bsp": config.bsp_seed.hex(),
            "ap": config.ap_seed.hex(),
            "run": config.run_seed.hex(),
            "mutation": sc.mutation_seed.hex(),
        },
    }


def scenario_from_json_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    try:
        targets = frozenset(_PHASE_NAMES[name] for name in doc.get("mitm_targets", []))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"unknown mitm target: {exc}") from exc
    seeds = doc.get("seeds", {})
    if not isinstance(seeds, dict):
        raise ScenarioError("seeds must be an object of hex strings")

    def seed(name: str, default: bytes) -> bytes:
        raw = seeds.get(name)
        if raw is None:
            return default
        try:
            value = bytes.fromhex(raw)
        except (ValueError, TypeError) as exc:
            raise ScenarioError(f"seed {name!r} is not valid hex") from exc
        if not value:
            raise ScenarioError(f"seed {name!r} must be non-empty")
        return value

    for key in ("ap_replaced", "root_cert_tampered", "ap_cert_tampered"):
        if key in doc and not isinstance(doc[key], bool):
            raise ScenarioError(f"{key} must be a boolean")
    scenario = AttackScenario(
        ap_replaced=doc.get("ap_replaced", False),
        root_cert_tampered=doc.get("root_cert_tampered", False),
        ap_cert_tampered=doc.get("ap_cert_tampered", False),
        mitm_targets=targets,
        mutation_seed=seed("mutation", DEFAULT_MUTATION_SEED),
    )
    return ScenarioConfig(
        scenario=scenario,
        oem_seed=seed("oem", DEFAULT_OEM_SEED),
        bsp_seed=seed("bsp", DEFAULT_BSP_SEED),
        ap_seed=seed("ap", DEFAULT_AP_SEED),
        run_seed=seed("run", DEFAULT_RUN_SEED),
    )


def load_scenario(path: Path) -> ScenarioConfig:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_json_dict(doc)
