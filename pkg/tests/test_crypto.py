from __future__ import annotations

import pytest
from cryptography.hazmat.primitives.asymmetric.utils import decode_dss_signature

from bootauth.crypto import (
    Certificate,
    CryptoError,
    Drbg,
    certificate_signed_payload,
    decode_certificate,
    encode_certificate,
    make_provider,
    rfc6979_nonce,
)

# NIST vector for the empty input.
SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

# Published P-256/SHA-256 deterministic-nonce test vector (message "sample").
RFC6979_KEY = 0xC9AFA9D845BA75166B5C215767B1D6934E50C3DB36E89B127B8A622B120F6721
RFC6979_K = 0xA6E3C57DD01ABE90086538398355DD4C3B17AA873382B0F24D6129493D8AAD60
RFC6979_R = 0xEFD48B2AACB6A8FD1140DD9CD45E81D69D2C877B56AAF991C34D0EA84EAF3716
RFC6979_S = 0xF7CB1C942D657C41D436C7A1B6E29F65F3E900DBB9AFF4064DC4AB2F843ACDA8


def test_drbg_is_deterministic_and_copyable():
    a = Drbg(b"seed")
    b = Drbg(b"seed")
    assert a.take(40) == b.take(40)
    snap = a.copy()
    assert a.take(16) == snap.take(16)
    assert Drbg(b"seed").take(8) != Drbg(b"other").take(8)


def test_drbg_rejects_empty_seed():
    with pytest.raises(CryptoError):
        Drbg(b"")


def test_hash_is_deterministic_32_bytes(provider):
    for data in (b"", b"x", b"hello world" * 100):
        assert provider.hash(data) == provider.hash(data)
        assert len(provider.hash(data)) == 32


def test_concrete_hash_matches_sha256_empty_vector(concrete):
    assert concrete.hash(b"").hex() == SHA256_EMPTY


def test_rfc6979_nonce_matches_published_vector(concrete):
    import hashlib

    h1 = hashlib.sha256(b"sample").digest()
    assert rfc6979_nonce(RFC6979_KEY, h1) == RFC6979_K


def test_concrete_signature_matches_published_vector(concrete):
    private = RFC6979_KEY.to_bytes(32, "big")
    sig = concrete.sign(private, b"sample")
    r, s = decode_dss_signature(sig)
    assert (r, s) == (RFC6979_R, RFC6979_S)
    assert concrete.verify(concrete.derive_public(private), b"sample", sig)


def test_gen_keypair_deterministic(provider):
    assert provider.gen_keypair(b"seed-a") == provider.gen_keypair(b"seed-a")


def test_gen_keypair_rejects_empty_seed(provider):
    with pytest.raises(CryptoError):
        provider.gen_keypair(b"")


def test_gen_keypair_distinct_seeds_distinct_keys(provider):
    seen = set()
    for i in range(200):
        kp = provider.gen_keypair(b"collision-%d" % i)
        assert kp.public_key not in seen
        seen.add(kp.public_key)


def test_derive_public_matches_keypair(provider):
    kp = provider.gen_keypair(b"derive-check")
    assert provider.derive_public(kp.private_key) == kp.public_key


def test_sign_verify_round_trip(provider):
    kp = provider.gen_keypair(b"signer")
    sig = provider.sign(kp.private_key, b"payload")
    assert provider.verify(kp.public_key, b"payload", sig)
    assert not provider.verify(kp.public_key, b"other payload", sig)


def test_verify_rejects_flipped_signature_bytes(provider):
    kp = provider.gen_keypair(b"signer")
    sig = provider.sign(kp.private_key, b"payload")
    for index in range(0, len(sig), 7):
        broken = sig[:index] + bytes([sig[index] ^ 0x20]) + sig[index + 1 :]
        assert not provider.verify(kp.public_key, b"payload", broken)


def test_certificate_round_trip_and_tamper(provider):
    issuer = provider.gen_keypair(b"issuer")
    subject = provider.gen_keypair(b"subject")
    root = provider.sign_certificate(issuer.private_key, "root", issuer.public_key, "root")
    cert = provider.sign_certificate(issuer.private_key, "dev", subject.public_key, "root")
    outcome = provider.verify_certificate(root, cert)
    assert outcome.valid and outcome.subject_public_key == subject.public_key

    # Replacing the embedded key while keeping the old signature must fail.
    other = provider.gen_keypair(b"other-subject")
    swapped = Certificate(cert.subject_id, other.public_key, cert.issuer_id, cert.signature)
    assert not provider.verify_certificate(root, swapped).valid


def test_certificate_rejected_under_foreign_root(provider):
    issuer = provider.gen_keypair(b"issuer")
    foreign = provider.gen_keypair(b"foreign-issuer")
    subject = provider.gen_keypair(b"subject")
    foreign_root = provider.sign_certificate(foreign.private_key, "root", foreign.public_key, "root")
    cert = provider.sign_certificate(issuer.private_key, "dev", subject.public_key, "root")
    assert not provider.verify_certificate(foreign_root, cert).valid


def test_encrypt_decrypt_round_trip(provider):
    kp = provider.gen_keypair(b"recipient")
    rng = Drbg(b"enc-rng")
    for i in range(50):
        msg = bytes([i % 256]) * (i + 1)
        ct = provider.encrypt(kp.public_key, msg, rng)
        assert provider.decrypt(kp.private_key, ct) == msg


def test_decrypt_with_wrong_key_fails(provider):
    kp = provider.gen_keypair(b"recipient")
    wrong = provider.gen_keypair(b"impostor")
    ct = provider.encrypt(kp.public_key, b"secret", Drbg(b"enc"))
    assert provider.decrypt(wrong.private_key, ct) is None


def test_decrypt_detects_any_single_byte_flip(provider):
    kp = provider.gen_keypair(b"recipient")
    ct = provider.encrypt(kp.public_key, b"integrity matters", Drbg(b"enc"))
    for index in range(len(ct)):
        broken = ct[:index] + bytes([ct[index] ^ 0x01]) + ct[index + 1 :]
        assert provider.decrypt(kp.private_key, broken) is None, f"flip at {index} accepted"


def test_encryption_is_randomized_per_stream(provider):
    kp = provider.gen_keypair(b"recipient")
    rng = Drbg(b"enc")
    assert provider.encrypt(kp.public_key, b"m", rng) != provider.encrypt(kp.public_key, b"m", rng)
    # ... but reproducible from the same stream position.
    assert provider.encrypt(kp.public_key, b"m", Drbg(b"enc")) == provider.encrypt(
        kp.public_key, b"m", Drbg(b"enc")
    )


def test_gen_nonce_contract(provider):
    rng = Drbg(b"nonce")
    first, second = provider.gen_nonce(rng), provider.gen_nonce(rng)
    assert len(first) == 32 and len(second) == 32
    assert first != second
    assert provider.gen_nonce(Drbg(b"nonce")) == first


def test_session_key_symmetry(provider):
    rng = Drbg(b"dh")
    for _ in range(25):
        a = provider.gen_ephemeral(rng)
        b = provider.gen_ephemeral(rng)
        left = provider.derive_session_key(a.private_key, b.public_key)
        right = provider.derive_session_key(b.private_key, a.public_key)
        assert left == right


def test_session_key_differs_for_third_party(provider):
    rng = Drbg(b"dh3")
    a, b, attacker = (provider.gen_ephemeral(rng) for _ in range(3))
    honest = provider.derive_session_key(a.private_key, b.public_key)
    assert provider.derive_session_key(a.private_key, attacker.public_key) != honest


def test_ephemeral_generation_deterministic_per_stream(provider):
    assert provider.gen_ephemeral(Drbg(b"e")) == provider.gen_ephemeral(Drbg(b"e"))
    rng = Drbg(b"e")
    assert provider.gen_ephemeral(rng) != provider.gen_ephemeral(rng)


def test_symbolic_session_key_is_order_canonical(symbolic):
    rng = Drbg(b"sym-dh")
    a = symbolic.gen_ephemeral(rng)
    b = symbolic.gen_ephemeral(rng)
    key = symbolic.derive_session_key(a.private_key, b.public_key)
    assert key.startswith(b'{"a":')  # canonical unordered pair term
    assert key == symbolic.derive_session_key(b.private_key, a.public_key)


def test_certificate_codec_round_trip(provider):
    kp = provider.gen_keypair(b"codec")
    cert = provider.sign_certificate(kp.private_key, "root", kp.public_key, "root")
    blob = encode_certificate(cert)
    assert decode_certificate(blob) == cert
    with pytest.raises(CryptoError):
        decode_certificate(blob + b"extra")
    with pytest.raises(CryptoError):
        decode_certificate(blob[:-1])


def test_signed_payload_layout_is_length_prefixed():
    payload = certificate_signed_payload("ab", b"\x01\x02\x03", "cd")
    assert payload == b"\x00\x00\x00\x02ab" + b"\x00\x00\x00\x03\x01\x02\x03" + b"\x00\x00\x00\x02cd"


def test_make_provider_rejects_unknown_backend():
    with pytest.raises(CryptoError):
        make_provider("quantum")


def test_concrete_rejects_malformed_private_key(concrete):
    with pytest.raises(CryptoError):
        concrete.sign(b"short", b"payload")
    with pytest.raises(CryptoError):
        concrete.decrypt(b"short", b"x" * 100)


def test_symbolic_rejects_malformed_private_key(symbolic):
    with pytest.raises(CryptoError):
        symbolic.sign(b"not-a-term", b"payload")
    with pytest.raises(CryptoError):
        symbolic.decrypt(b"not-a-term", b"x")
