"""OEM provisioning: key pairs, the certificate chain, and the initial state.

The OEM acts as the single certificate authority: a self-signed root plus
one certificate per processor, all stored in NVM, with the root
certificate's digest burned into both processors' ROM. Everything is
deterministic in the three seeds, so fixtures and runs reproduce
byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .crypto import (
    Certificate,
    CertificateChain,
    CryptoProvider,
    KeyPair,
    encode_certificate,
)
from .domain import INIT, EnvironmentState, ProcessorState, ProtocolState

ROOT_ID = "oem-root"
BSP_ID = "bsp"
AP_ID = "ap"

# Documented defaults; scenario files may override any of them.
DEFAULT_OEM_SEED = b"seed:oem:v1"
DEFAULT_BSP_SEED = b"seed:bsp:v1"
DEFAULT_AP_SEED = b"seed:ap:v1"


class ProvisionError(Exception):
    """Seed misuse that would collapse identities."""


@dataclass(frozen=True)
class ProvisionRecord:
    """Ground truth produced at the factory; benignity is judged against it."""

    oem_keypair: KeyPair
    bsp_keypair: KeyPair
    ap_keypair: KeyPair
    chain: CertificateChain
    root_cert_hash: bytes


def provision(
    oem_seed: bytes, bsp_seed: bytes, ap_seed: bytes, provider: CryptoProvider
) -> ProvisionRecord:
    """Generate key pairs, issue the certificate chain, and compute the ROM digest."""
    if len({oem_seed, bsp_seed, ap_seed}) != 3:
        raise ProvisionError("provisioning seeds must be pairwise distinct")
    oem = provider.gen_keypair(oem_seed)
    bsp = provider.gen_keypair(bsp_seed)
    ap = provider.gen_keypair(ap_seed)
    root = provider.sign_certificate(oem.private_key, ROOT_ID, oem.public_key, ROOT_ID)
    chain = CertificateChain(
        root=root,
        bsp=provider.sign_certificate(oem.private_key, BSP_ID, bsp.public_key, ROOT_ID),
        ap=provider.sign_certificate(oem.private_key, AP_ID, ap.public_key, ROOT_ID),
    )
    return ProvisionRecord(oem, bsp, ap, chain, provider.hash(encode_certificate(root)))


def initial_state(record: ProvisionRecord) -> ProtocolState:
    """Freshly powered-on configuration: anchors set, NVM loaded, everything else empty."""
    return ProtocolState(
        bsp=ProcessorState(record.root_cert_hash, record.bsp_keypair.private_key),
        ap=ProcessorState(record.root_cert_hash, record.ap_keypair.private_key),
        env=EnvironmentState(nvm=record.chain, channel=None),
        status=INIT,
    )


def write_record(record: ProvisionRecord, out_dir: Path) -> list[Path]:
    """Write the record as on-disk fixtures (certs in canonical layout, keys/hash as hex)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, data: bytes) -> None:
        path = out_dir / name
        path.write_bytes(data)
        written.append(path)

    emit("root.cert", encode_certificate(record.chain.root))
    emit("bsp.cert", encode_certificate(record.chain.bsp))
    emit("ap.cert", encode_certificate(record.chain.ap))
    emit("rom_hash.hex", record.root_cert_hash.hex().encode("ascii") + b"\n")
    emit("oem.key", record.oem_keypair.private_key.hex().encode("ascii") + b"\n")
    emit("bsp.key", record.bsp_keypair.private_key.hex().encode("ascii") + b"\n")
    emit("ap.key", record.ap_keypair.private_key.hex().encode("ascii") + b"\n")
    return written
