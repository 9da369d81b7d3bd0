"""Deterministic simulation crypto: hash, unique signatures and a VRF.

Everything here is keyed pseudorandomness built on BLAKE2b/SHA-256, chosen
for speed and seed reproducibility rather than security. Public keys are an
invertible keyed permutation (a 4-round Feistel network) of the secret key,
which lets a verifier recompute VRF outputs and signatures from the public
key alone. Code playing the adversary must not call ``_recover_secret``.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

DIGEST_BITS = 256
DIGEST_SPACE = 1 << DIGEST_BITS
VRF_OUTPUT_BYTES = 32
VRF_PROOF_BYTES = 64
SIGNATURE_BYTES = 64
KEY_BYTES = 32

_TRAPDOOR = b"crystalsim/sim-crypto/v1"
_ROUNDS = 4


def hash_digest(data: bytes) -> int:
    """SHA-256 of ``data`` as a 256-bit unsigned integer."""
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def digest_bytes(value: int) -> bytes:
    return value.to_bytes(32, "big")


def _round_fn(i: int, half: bytes) -> bytes:
    return hashlib.blake2b(half, digest_size=16, key=_TRAPDOOR,
                           person=b"feistel%d" % i).digest()


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _derive_public(sk: bytes) -> bytes:
    left, right = sk[:16], sk[16:]
    for i in range(_ROUNDS):
        left, right = right, _xor(left, _round_fn(i, right))
    return left + right


def _recover_secret(pk: bytes) -> bytes:
    left, right = pk[:16], pk[16:]
    for i in reversed(range(_ROUNDS)):
        left, right = _xor(right, _round_fn(i, left)), left
    return left + right


@dataclass(frozen=True)
class KeyPair:
    sk: bytes
    pk: bytes

    def __repr__(self):
        return f"KeyPair(pk={self.pk.hex()[:12]}...)"


def keygen(seed: bytes | str | int) -> KeyPair:
    """Derive a key pair deterministically from ``seed``."""
    if isinstance(seed, int):
        seed = seed.to_bytes((seed.bit_length() + 8) // 8, "big", signed=True)
    elif isinstance(seed, str):
        seed = seed.encode()
    sk = hashlib.sha256(b"crystalsim/sk" + seed).digest()
    return KeyPair(sk, _derive_public(sk))


@dataclass(frozen=True)
class VrfOutput:
    y: int
    proof: bytes


def vrf_value(sk: bytes, x: bytes) -> int:
    """The VRF output alone, without building the proof."""
    h = hashlib.blake2b(x, digest_size=VRF_OUTPUT_BYTES, key=sk, person=b"vrf-y")
    return int.from_bytes(h.digest(), "big")


def _vrf_proof(sk: bytes, x: bytes) -> bytes:
    return hashlib.blake2b(x, digest_size=VRF_PROOF_BYTES, key=sk, person=b"vrf-pi").digest()


def vrf_prove(sk: bytes, x: bytes) -> VrfOutput:
    return VrfOutput(vrf_value(sk, x), _vrf_proof(sk, x))


def vrf_verify(pk: bytes, x: bytes, out: VrfOutput) -> bool:
    if len(pk) != KEY_BYTES:
        return False
    sk = _recover_secret(pk)
    return (out.y == vrf_value(sk, x)
            and hmac.compare_digest(out.proof, _vrf_proof(sk, x)))


def sign(sk: bytes, msg: bytes) -> bytes:
    return hashlib.blake2b(msg, digest_size=SIGNATURE_BYTES, key=sk, person=b"sig").digest()


def verify(pk: bytes, sig: bytes, msg: bytes) -> bool:
    if len(pk) != KEY_BYTES:
        return False
    return hmac.compare_digest(sig, sign(_recover_secret(pk), msg))
