"""Blocks, votes, quorum certificates and the per-node block tree.

Canonical byte layouts (all integers big-endian)::

    header  = 0x01 | tx_root:32 | parent_hash:32 | qc_root:32 | reward_pk:32
              | election_pk:32 | target:32 | timestamp_us:u64 | nonce:u64
    vote    = 0x02 | voter_pk:32 | block_hash:32 | window_index:u32
              | vrf_y:32 | vrf_proof:64
    ballot  = 0x03 | voter_pk:32 | block_hash:32 | shares:u32
    payload = 0x04 | tx_count:u32 | size:u64

Block hashes are SHA-256 over the header layout. A QC's Merkle root is built
over SHA-256 leaves of the serialized votes in canonical (sorted) order, with
the last node duplicated on odd levels; the empty QC has root 0.
"""
from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Optional, Protocol, Sequence, Union

from .crypto import DIGEST_SPACE, VRF_OUTPUT_BYTES, VRF_PROOF_BYTES, digest_bytes, hash_digest

MAX_TARGET = DIGEST_SPACE - 1
NULL_KEY = bytes(32)

_HEADER = struct.Struct(">B32s32s32s32s32s32sQQ")


@dataclass(frozen=True)
class Payload:
    """Opaque transaction batch: only its count and byte size matter."""

    tx_count: int = 0
    size: int = 0

    def serialize(self) -> bytes:
        return struct.pack(">BIQ", 4, self.tx_count, self.size)

    @property
    def root(self) -> int:
        return hash_digest(self.serialize())

    def well_formed(self) -> bool:
        return 0 <= self.tx_count < 1 << 32 and 0 <= self.size < 1 << 64


@dataclass(frozen=True)
class BlockHeader:
    tx_root: int
    parent_hash: int
    qc_root: int
    reward_pk: bytes
    election_pk: bytes
    target: int
    timestamp: float
    nonce: int = 0

    def serialize(self) -> bytes:
        return _HEADER.pack(
            1,
            digest_bytes(self.tx_root),
            digest_bytes(self.parent_hash),
            digest_bytes(self.qc_root),
            self.reward_pk,
            self.election_pk,
            digest_bytes(self.target),
            round(self.timestamp * 1_000_000),
            self.nonce,
        )

    @cached_property
    def hash(self) -> int:
        return hash_digest(self.serialize())


@dataclass(frozen=True)
class Vote:
    """One committee membership share: a VRF win on (block hash, window slot)."""

    voter_pk: bytes
    block_hash: int
    window_index: int
    vrf_y: int
    vrf_proof: bytes

    shares = 1

    @property
    def key(self):
        return (self.voter_pk, self.window_index)

    def serialize(self) -> bytes:
        return (b"\x02" + self.voter_pk + digest_bytes(self.block_hash)
                + struct.pack(">I", self.window_index)
                + digest_bytes(self.vrf_y) + self.vrf_proof)


@dataclass(frozen=True)
class Ballot:
    """Aggregate vote used by the abstract committee model: one voter, many shares."""

    voter_pk: bytes
    block_hash: int
    shares: int

    @property
    def key(self):
        return (self.voter_pk, 0)

    def serialize(self) -> bytes:
        return (b"\x03" + self.voter_pk + digest_bytes(self.block_hash)
                + struct.pack(">I", self.shares))


AnyVote = Union[Vote, Ballot]


def merkle_root(leaves: Sequence[bytes]) -> int:
    if not leaves:
        return 0
    level = [hashlib.sha256(x).digest() for x in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [hashlib.sha256(level[i] + level[i + 1]).digest()
                 for i in range(0, len(level), 2)]
    return int.from_bytes(level[0], "big")


@dataclass(frozen=True)
class QuorumCertificate:
    block_hash: int
    votes: tuple = ()

    @classmethod
    def build(cls, block_hash: int, votes: Iterable[AnyVote]) -> "QuorumCertificate":
        """Deduplicate on the vote key and sort into canonical order."""
        unique = {}
        for v in votes:
            unique.setdefault(v.key, v)
        ordered = tuple(unique[k] for k in sorted(unique))
        return cls(block_hash, ordered)

    @property
    def share_count(self) -> int:
        return sum(v.shares for v in self.votes)

    @cached_property
    def root(self) -> int:
        return merkle_root([v.serialize() for v in self.votes])

    def is_canonical(self) -> bool:
        keys = [v.key for v in self.votes]
        return keys == sorted(set(keys))


def qc_byte_size(qc: QuorumCertificate | int, window_size: int = 3024) -> int:
    """Compressed on-chain size: VRF output + proof per vote plus a W-bit bitmap.

    ``qc`` may also be a plain vote count.
    """
    n = qc if isinstance(qc, int) else len(qc.votes)
    return n * (VRF_OUTPUT_BYTES + VRF_PROOF_BYTES) + math.ceil(window_size / 8)


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    payload: Payload = field(default_factory=Payload)
    parent_qc: QuorumCertificate = field(default_factory=lambda: QuorumCertificate(0))

    @property
    def hash(self) -> int:
        return self.header.hash

    @property
    def parent_hash(self) -> int:
        return self.header.parent_hash


def make_genesis() -> Block:
    payload = Payload()
    header = BlockHeader(payload.root, 0, 0, NULL_KEY, NULL_KEY, MAX_TARGET, 0.0, 0)
    return Block(header, payload, QuorumCertificate(0))


def solve_pow(header: BlockHeader, start_nonce: int = 0) -> BlockHeader:
    """Grind the nonce until the header hash falls below its target."""
    nonce = start_nonce
    while True:
        h = BlockHeader(header.tx_root, header.parent_hash, header.qc_root,
                        header.reward_pk, header.election_pk, header.target,
                        header.timestamp, nonce)
        if h.hash < h.target:
            return h
        nonce += 1


def make_block(parent_hash: int, qc: QuorumCertificate, reward_pk: bytes, election_pk: bytes,
               target: int, timestamp: float, payload: Optional[Payload] = None) -> Block:
    payload = payload or Payload()
    header = BlockHeader(payload.root, parent_hash, qc.root, reward_pk, election_pk,
                         target, timestamp)
    return Block(solve_pow(header), payload, qc)


class Rejection(enum.Enum):
    BAD_POW = "BadPow"
    MISSING_PARENT = "MissingParent"
    BAD_PAYLOAD = "BadPayload"
    BAD_QC = "BadQC"


class QcRule(Protocol):
    """What block validation needs to know about certificates."""

    def needs_qc(self, tree: "BlockTree", block_hash: int) -> bool: ...

    def qc_valid(self, qc: QuorumCertificate, tree: "BlockTree") -> bool: ...


class BlockTree:
    """All blocks a node knows, with heights and a longest-chain view."""

    def __init__(self, genesis: Optional[Block] = None):
        genesis = genesis or make_genesis()
        self.genesis = genesis.hash
        self.blocks: dict[int, Block] = {genesis.hash: genesis}
        self.heights: dict[int, int] = {genesis.hash: 0}
        self.by_height: dict[int, list[int]] = {0: [genesis.hash]}
        self.certified: dict[int, QuorumCertificate] = {}
        self.max_height = 0
        self.memo: dict = {}

    def __contains__(self, block_hash: int) -> bool:
        return block_hash in self.blocks

    def __len__(self) -> int:
        return len(self.blocks)

    def insert(self, block: Block) -> bool:
        """Store a block whose parent is already present; False on duplicates."""
        h = block.hash
        if h in self.blocks:
            return False
        parent = block.parent_hash
        if parent not in self.blocks:
            raise KeyError(f"parent {parent:#x} missing")
        height = self.heights[parent] + 1
        self.blocks[h] = block
        self.heights[h] = height
        self.by_height.setdefault(height, []).append(h)
        if height > self.max_height:
            self.max_height = height
        return True

    def height(self, block_hash: int) -> int:
        return self.heights[block_hash]

    def parent(self, block_hash: int) -> int:
        return self.blocks[block_hash].parent_hash

    def ancestor(self, block_hash: int, height: int) -> int:
        """Ancestor of ``block_hash`` at ``height`` (the block itself if equal)."""
        h = block_hash
        blocks = self.blocks
        for _ in range(self.heights[block_hash] - height):
            h = blocks[h].parent_hash
        return h

    def chain(self, block_hash: int) -> list[int]:
        """Hashes from genesis to ``block_hash`` inclusive."""
        out = []
        h = block_hash
        while True:
            out.append(h)
            if h == self.genesis:
                break
            h = self.blocks[h].parent_hash
        out.reverse()
        return out

    def is_ancestor(self, a: int, b: int) -> bool:
        ha = self.heights[a]
        return ha <= self.heights[b] and self.ancestor(b, ha) == a

    def tip_of_longest_chain(self, rng, eligible: Optional[Callable[[int], bool]] = None) -> int:
        """Uniformly random block among the highest eligible ones."""
        for height in range(self.max_height, -1, -1):
            candidates = self.by_height.get(height, ())
            if eligible is not None:
                candidates = [h for h in candidates if eligible(h)]
            if candidates:
                if len(candidates) == 1:
                    return candidates[0]
                return candidates[rng.randrange(len(candidates))]
        return self.genesis

    def longest_candidates(self, eligible: Optional[Callable[[int], bool]] = None) -> tuple:
        for height in range(self.max_height, -1, -1):
            candidates = self.by_height.get(height, ())
            if eligible is not None:
                candidates = [h for h in candidates if eligible(h)]
            if candidates:
                return tuple(candidates)
        return (self.genesis,)


def qc_target(tree: BlockTree, parent_hash: int, distance: int = 1) -> int:
    """Block whose certificate a child of ``parent_hash`` must carry."""
    height = max(tree.height(parent_hash) - (distance - 1), 0)
    return tree.ancestor(parent_hash, height)


def validate_block(block: Block, tree: BlockTree, target: int, rule: Optional[QcRule],
                   qc_distance: int = 1) -> Optional[Rejection]:
    """Check proof of work, parent, payload and certificate, in that order.

    Returns None for a valid block, otherwise the first failing check.
    ``rule=None`` disables certificates (plain Nakamoto consensus).
    """
    header = block.header
    if header.hash >= target or header.target != target:
        return Rejection.BAD_POW
    if header.parent_hash not in tree:
        return Rejection.MISSING_PARENT
    if not block.payload.well_formed() or header.tx_root != block.payload.root:
        return Rejection.BAD_PAYLOAD
    if rule is None:
        return None
    qc = block.parent_qc
    if qc.block_hash != qc_target(tree, header.parent_hash, qc_distance):
        return Rejection.BAD_QC
    if qc.root != header.qc_root or not qc.is_canonical():
        return Rejection.BAD_QC
    if not rule.needs_qc(tree, qc.block_hash):
        return None
    if not rule.qc_valid(qc, tree):
        return Rejection.BAD_QC
    return None


def commit_rule(tree: BlockTree, tip: int, k: int) -> list[int]:
    """Committed prefix under k-deep confirmation: the tip's chain minus its last k-1 blocks."""
    chain = tree.chain(tip)
    keep = max(len(chain) - (k - 1), 1)
    return chain[:keep]
