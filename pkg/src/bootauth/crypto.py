"""Cryptographic backends behind one byte-level provider interface.

Two interchangeable providers exist: a concrete backend on NIST P-256
(deterministic ECDSA certificates, ECIES-style authenticated packet
encryption, ECDH session keys) and a symbolic perfect-cryptography backend
whose values are canonical self-describing terms that only open with the
matching key. The protocol machine consumes providers purely through this
interface, so the choice of backend must never change control flow.

All randomness is drawn from a seeded deterministic stream (`Drbg`): a fixed
seed plus a fixed call sequence reproduces byte-identical outputs, which is
what makes traces and fixtures replayable.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import encode_dss_signature
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

NONCE_LEN = 32
DIGEST_LEN = 32

CONCRETE = "concrete"
SYMBOLIC = "symbolic"
BACKENDS = (CONCRETE, SYMBOLIC)


class CryptoError(Exception):
    """Malformed key material or misuse of a provider."""


class Drbg:
    """Deterministic byte stream: SHA-256 over (seed key, block counter).

    One instance drives all randomness of a single protocol run.  ``copy()``
    snapshots the stream position so explorer branches stay independent and
    replayable.
    """

    __slots__ = ("_key", "_counter")

    def __init__(self, seed: bytes) -> None:
        if not seed:
            raise CryptoError("drbg seed must be non-empty")
        self._key = hashlib.sha256(b"drbg:" + seed).digest()
        self._counter = 0

    def take(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            block = self._key + self._counter.to_bytes(8, "big")
            out += hashlib.sha256(block).digest()
            self._counter += 1
        return bytes(out[:n])

    def copy(self) -> Drbg:
        clone = object.__new__(Drbg)
        clone._key = self._key
        clone._counter = self._counter
        return clone


@dataclass(frozen=True)
class KeyPair:
    """Static key pair; the public half is derivable from the private half."""

    public_key: bytes
    private_key: bytes
    key_id: str = ""


@dataclass(frozen=True)
class EphemeralKeyPair:
    """Per-run key pair for session-key agreement; never provisioned."""

    public_key: bytes
    private_key: bytes
    key_id: str = "ephemeral"


@dataclass(frozen=True)
class Certificate:
    """Minimal certificate: the signature covers the first three fields."""

    subject_id: str
    subject_public_key: bytes
    issuer_id: str
    signature: bytes


@dataclass(frozen=True)
class CertificateChain:
    root: Certificate
    bsp: Certificate
    ap: Certificate


@dataclass(frozen=True)
class CertVerification:
    """Outcome of certificate validation; invalidity is a result, not an error."""

    valid: bool
    subject_public_key: bytes | None


def _lp(field: bytes) -> bytes:
    """Length-prefix a field with 4 big-endian bytes."""
    return len(field).to_bytes(4, "big") + field


def _take_lp(blob: bytes, offset: int) -> tuple[bytes, int]:
    if offset + 4 > len(blob):
        raise CryptoError("truncated length prefix")
    n = int.from_bytes(blob[offset : offset + 4], "big")
    offset += 4
    if offset + n > len(blob):
        raise CryptoError("truncated field")
    return blob[offset : offset + n], offset + n


def certificate_signed_payload(subject_id: str, subject_public_key: bytes, issuer_id: str) -> bytes:
    """Canonical byte string a certificate signature is computed over."""
    return _lp(subject_id.encode("utf-8")) + _lp(subject_public_key) + _lp(issuer_id.encode("utf-8"))


def encode_certificate(cert: Certificate) -> bytes:
    """Canonical wire layout: signed payload followed by the signature, all length-prefixed."""
    payload = certificate_signed_payload(cert.subject_id, cert.subject_public_key, cert.issuer_id)
    return payload + _lp(cert.signature)


def decode_certificate(blob: bytes) -> Certificate:
    subject_id, off = _take_lp(blob, 0)
    subject_public_key, off = _take_lp(blob, off)
    issuer_id, off = _take_lp(blob, off)
    signature, off = _take_lp(blob, off)
    if off != len(blob):
        raise CryptoError("trailing bytes after certificate")
    return Certificate(subject_id.decode("utf-8"), subject_public_key, issuer_id.decode("utf-8"), signature)


class CryptoProvider(ABC):
    """Backend-neutral interface the protocol machine runs against.

    Providers hold no state of their own; every random choice comes from the
    caller-supplied `Drbg`.
    """

    name: str

    @abstractmethod
    def hash(self, data: bytes) -> bytes:
        """32-byte deterministic digest of `data`."""

    @abstractmethod
    def gen_keypair(self, seed: bytes) -> KeyPair:
        """Deterministic static key pair from a non-empty seed."""

    @abstractmethod
    def derive_public(self, private_key: bytes) -> bytes:
        """Public key corresponding to `private_key`."""

    @abstractmethod
    def sign(self, private_key: bytes, payload: bytes) -> bytes:
        """Deterministic signature over `payload`."""

    @abstractmethod
    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool:
        """True iff `signature` is valid for `payload` under `public_key`."""

    @abstractmethod
    def encrypt(self, recipient_public: bytes, plaintext: bytes, rng: Drbg) -> bytes:
        """Authenticated public-key encryption; only the matching private key opens it."""

    @abstractmethod
    def decrypt(self, recipient_private: bytes, ciphertext: bytes) -> bytes | None:
        """Plaintext on success, None on any decryption or integrity failure."""

    @abstractmethod
    def gen_ephemeral(self, rng: Drbg) -> EphemeralKeyPair:
        """Fresh key pair drawn from the run's random stream."""

    @abstractmethod
    def derive_session_key(self, local_ephe_private: bytes, remote_ephe_public: bytes) -> bytes:
        """Shared symmetric key; symmetric in the two ephemeral pairs."""

    def gen_nonce(self, rng: Drbg) -> bytes:
        return rng.take(NONCE_LEN)

    def sign_certificate(
        self, issuer_private: bytes, subject_id: str, subject_public: bytes, issuer_id: str
    ) -> Certificate:
        payload = certificate_signed_payload(subject_id, subject_public, issuer_id)
        return Certificate(subject_id, subject_public, issuer_id, self.sign(issuer_private, payload))

    def verify_certificate(self, root: Certificate, cert: Certificate) -> CertVerification:
        payload = certificate_signed_payload(cert.subject_id, cert.subject_public_key, cert.issuer_id)
        if self.verify(root.subject_public_key, payload, cert.signature):
            return CertVerification(True, cert.subject_public_key)
        return CertVerification(False, None)


# ---------------------------------------------------------------------------
# Concrete backend: NIST P-256
# ---------------------------------------------------------------------------

_P256 = ec.SECP256R1()
_P256_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


def _int2octets(x: int, rlen: int) -> bytes:
    return x.to_bytes(rlen, "big")


def _bits2int(b: bytes, qlen: int) -> int:
    x = int.from_bytes(b, "big")
    blen = len(b) * 8
    if blen > qlen:
        x >>= blen - qlen
    return x


def rfc6979_nonce(private_scalar: int, message_hash: bytes, order: int = _P256_ORDER) -> int:
    """Deterministic ECDSA nonce per RFC 6979 (HMAC-SHA-256 construction)."""
    qlen = order.bit_length()
    rlen = (qlen + 7) // 8
    bx = _int2octets(private_scalar, rlen)
    bh = _int2octets(_bits2int(message_hash, qlen) % order, rlen)
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.new(k, v + b"\x00" + bx + bh, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    k = hmac.new(k, v + b"\x01" + bx + bh, hashlib.sha256).digest()
    v = hmac.new(k, v, hashlib.sha256).digest()
    while True:
        t = b""
        while len(t) * 8 < qlen:
            v = hmac.new(k, v, hashlib.sha256).digest()
            t += v
        nonce = _bits2int(t, qlen)
        if 1 <= nonce < order:
            return nonce
        k = hmac.new(k, v + b"\x00", hashlib.sha256).digest()
        v = hmac.new(k, v, hashlib.sha256).digest()


class ConcreteProvider(CryptoProvider):
    """P-256 backend: SHA-256, deterministic ECDSA, ECIES packet encryption, ECDH."""

    name = CONCRETE

    # -- scalars and points --------------------------------------------------

    def _scalar_from(self, material: bytes, context: bytes) -> int:
        digest = hashlib.sha256(context + material).digest()
        return int.from_bytes(digest, "big") % (_P256_ORDER - 1) + 1

    def _load_private(self, private_key: bytes) -> ec.EllipticCurvePrivateKey:
        if len(private_key) != 32:
            raise CryptoError("p256 private key must be 32 bytes")
        scalar = int.from_bytes(private_key, "big")
        if not 1 <= scalar < _P256_ORDER:
            raise CryptoError("p256 private scalar out of range")
        return ec.derive_private_key(scalar, _P256)

    def _load_public(self, public_key: bytes) -> ec.EllipticCurvePublicKey:
        try:
            return ec.EllipticCurvePublicKey.from_encoded_point(_P256, public_key)
        except ValueError as exc:
            raise CryptoError("malformed p256 public key") from exc

    @staticmethod
    def _encode_public(key: ec.EllipticCurvePublicKey) -> bytes:
        return key.public_bytes(Encoding.X962, PublicFormat.UncompressedPoint)

    # -- provider interface ---------------------------------------------------

    def hash(self, data: bytes) -> bytes:
        return hashlib.sha256(data).digest()

    def gen_keypair(self, seed: bytes) -> KeyPair:
        if not seed:
            raise CryptoError("keypair seed must be non-empty")
        scalar = self._scalar_from(seed, b"p256-keygen:")
        private = scalar.to_bytes(32, "big")
        return KeyPair(self.derive_public(private), private, key_id=seed[:12].hex())

    def derive_public(self, private_key: bytes) -> bytes:
        return self._encode_public(self._load_private(private_key).public_key())

    def sign(self, private_key: bytes, payload: bytes) -> bytes:
        key = self._load_private(private_key)
        scalar = key.private_numbers().private_value
        digest = hashlib.sha256(payload).digest()
        z = _bits2int(digest, _P256_ORDER.bit_length()) % _P256_ORDER
        nonce = rfc6979_nonce(scalar, digest)
        r = ec.derive_private_key(nonce, _P256).public_key().public_numbers().x % _P256_ORDER
        s = (pow(nonce, -1, _P256_ORDER) * (z + r * scalar)) % _P256_ORDER
        if r == 0 or s == 0:
            raise CryptoError("degenerate signature")
        return encode_dss_signature(r, s)

    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool:
        try:
            key = self._load_public(public_key)
            key.verify(signature, payload, ec.ECDSA(hashes.SHA256()))
            return True
        except (CryptoError, InvalidSignature, ValueError):
            return False

    def _ecies_keys(self, shared: bytes, ephe_public: bytes) -> tuple[bytes, bytes]:
        material = HKDF(
            algorithm=hashes.SHA256(), length=44, salt=ephe_public, info=b"packet-ecies"
        ).derive(shared)
        return material[:32], material[32:]

    def encrypt(self, recipient_public: bytes, plaintext: bytes, rng: Drbg) -> bytes:
        recipient = self._load_public(recipient_public)
        ephe = self.gen_ephemeral(rng)
        shared = self._load_private(ephe.private_key).exchange(ec.ECDH(), recipient)
        key, nonce = self._ecies_keys(shared, ephe.public_key)
        sealed = AESGCM(key).encrypt(nonce, plaintext, ephe.public_key)
        return ephe.public_key + sealed

    def decrypt(self, recipient_private: bytes, ciphertext: bytes) -> bytes | None:
        private = self._load_private(recipient_private)
        if len(ciphertext) < 65 + 16:
            return None
        ephe_public, sealed = ciphertext[:65], ciphertext[65:]
        try:
            shared = private.exchange(ec.ECDH(), self._load_public(ephe_public))
            key, nonce = self._ecies_keys(shared, ephe_public)
            return AESGCM(key).decrypt(nonce, sealed, ephe_public)
        except (CryptoError, InvalidTag, ValueError):
            return None

    def gen_ephemeral(self, rng: Drbg) -> EphemeralKeyPair:
        scalar = self._scalar_from(rng.take(32), b"p256-ephemeral:")
        private = scalar.to_bytes(32, "big")
        return EphemeralKeyPair(self.derive_public(private), private)

    def derive_session_key(self, local_ephe_private: bytes, remote_ephe_public: bytes) -> bytes:
        shared = self._load_private(local_ephe_private).exchange(
            ec.ECDH(), self._load_public(remote_ephe_public)
        )
        return HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=b"session-key").derive(shared)


# ---------------------------------------------------------------------------
# Symbolic backend: perfect cryptography over canonical terms
# ---------------------------------------------------------------------------


def _term(kind: str, **fields: str) -> bytes:
    doc = {"kind": kind, **fields}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("ascii")


def _parse_term(blob: bytes, kind: str) -> dict | None:
    try:
        doc = json.loads(blob.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        return None
    return doc


class SymbolicProvider(CryptoProvider):
    """Idealized backend: ciphertexts are terms that open only with the right key.

    Key identities are hashes of their seeds, so distinct seeds cannot collide
    in practice and every value is a fixed-size, human-readable term. Sealed
    terms carry a binding digest, so any byte-level mutation is detected on
    decryption (the concrete backend's AEAD behaves the same way).
    """

    name = SYMBOLIC

    def hash(self, data: bytes) -> bytes:
        return hashlib.sha256(b"sym-hash:" + data).digest()

    @staticmethod
    def _key_id(seed: bytes) -> str:
        return hashlib.sha256(b"sym-key:" + seed).hexdigest()

    def gen_keypair(self, seed: bytes) -> KeyPair:
        if not seed:
            raise CryptoError("keypair seed must be non-empty")
        ident = self._key_id(seed)
        return KeyPair(_term("pub", id=ident), _term("priv", id=ident), key_id=seed[:12].hex())

    def derive_public(self, private_key: bytes) -> bytes:
        doc = _parse_term(private_key, "priv")
        if doc is None:
            raise CryptoError("malformed symbolic private key")
        return _term("pub", id=doc["id"])

    def sign(self, private_key: bytes, payload: bytes) -> bytes:
        doc = _parse_term(private_key, "priv")
        if doc is None:
            raise CryptoError("malformed symbolic private key")
        return _term("sig", by=doc["id"], digest=self.hash(payload).hex())

    def verify(self, public_key: bytes, payload: bytes, signature: bytes) -> bool:
        pub = _parse_term(public_key, "pub")
        sig = _parse_term(signature, "sig")
        if pub is None or sig is None:
            return False
        return sig.get("by") == pub["id"] and sig.get("digest") == self.hash(payload).hex()

    def _seal_digest(self, to: str, body: str, salt: str) -> str:
        return hashlib.sha256(_term("seal", to=to, body=body, salt=salt)).hexdigest()

    def encrypt(self, recipient_public: bytes, plaintext: bytes, rng: Drbg) -> bytes:
        pub = _parse_term(recipient_public, "pub")
        if pub is None:
            raise CryptoError("malformed symbolic public key")
        body = plaintext.hex()
        salt = rng.take(8).hex()
        return _term("enc", to=pub["id"], body=body, salt=salt, bind=self._seal_digest(pub["id"], body, salt))

    def decrypt(self, recipient_private: bytes, ciphertext: bytes) -> bytes | None:
        priv = _parse_term(recipient_private, "priv")
        if priv is None:
            raise CryptoError("malformed symbolic private key")
        doc = _parse_term(ciphertext, "enc")
        if doc is None:
            return None
        expected = {"kind", "to", "body", "salt", "bind"}
        if set(doc) != expected or doc["bind"] != self._seal_digest(doc["to"], doc["body"], doc["salt"]):
            return None
        if doc["to"] != priv["id"]:
            return None
        try:
            return bytes.fromhex(doc["body"])
        except ValueError:
            return None

    def gen_ephemeral(self, rng: Drbg) -> EphemeralKeyPair:
        ident = self._key_id(rng.take(32))
        return EphemeralKeyPair(_term("pub", id=ident), _term("priv", id=ident))

    def derive_session_key(self, local_ephe_private: bytes, remote_ephe_public: bytes) -> bytes:
        priv = _parse_term(local_ephe_private, "priv")
        pub = _parse_term(remote_ephe_public, "pub")
        if priv is None or pub is None:
            raise CryptoError("malformed symbolic key material")
        low, high = sorted((priv["id"], pub["id"]))
        return _term("dh", a=low, b=high)


def make_provider(backend: str) -> CryptoProvider:
    """Instantiate a provider by backend tag ("concrete" or "symbolic")."""
    if backend == CONCRETE:
        return ConcreteProvider()
    if backend == SYMBOLIC:
        return SymbolicProvider()
    raise CryptoError(f"unknown backend {backend!r}")
