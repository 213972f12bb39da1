"""Merkle commitment over a product's compartment list.

Leaves are SHA-256 of each compartment DID's text, in input order. Internal
nodes hash left || right; a node without a sibling is promoted unchanged to
the next level (no duplication), so its proof simply skips that level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .canonical import sha256
from .errors import EmptyInput
from .identity import Did

# One proof step: (sibling hash, side the sibling sits on).
ProofStep = tuple[bytes, str]
Proof = list[ProofStep]

_LEFT = "left"
_RIGHT = "right"


def leaf_hash(did: Did) -> bytes:
    return sha256(did.text().encode("utf-8"))


def build_tree(leaves: Sequence[bytes]) -> tuple[bytes, list[Proof]]:
    """Root and one inclusion proof per leaf, in input order."""
    if not leaves:
        raise EmptyInput("cannot build a Merkle tree over zero leaves")
    proofs: list[Proof] = [[] for _ in leaves]
    # positions[i] = index of leaf i's ancestor in the current level
    positions = list(range(len(leaves)))
    level = list(leaves)
    while len(level) > 1:
        next_level: list[bytes] = []
        for i in range(0, len(level) - 1, 2):
            next_level.append(sha256(level[i] + level[i + 1]))
        if len(level) % 2 == 1:
            next_level.append(level[-1])  # promoted unchanged
        for leaf_index, pos in enumerate(positions):
            sibling = pos ^ 1
            if sibling < len(level):
                side = _LEFT if sibling < pos else _RIGHT
                proofs[leaf_index].append((level[sibling], side))
                positions[leaf_index] = pos // 2
            else:
                # promoted: index shifts with the pairs below it
                positions[leaf_index] = pos // 2
        level = next_level
    return level[0], proofs


def verify_proof(leaf: bytes, proof: Proof, root: bytes) -> bool:
    node = leaf
    for sibling, side in proof:
        if side == _LEFT:
            node = sha256(sibling + node)
        elif side == _RIGHT:
            node = sha256(node + sibling)
        else:
            return False
    return node == root


@dataclass(frozen=True)
class CompartmentCommitment:
    root: bytes
    proofs: tuple[Proof, ...]  # aligned with the input DID order

    @property
    def root_hex(self) -> str:
        return self.root.hex()


def build_compartment_merkle(compartments: Iterable[Did]) -> CompartmentCommitment:
    dids = list(compartments)
    if not dids:
        raise EmptyInput("compartment list is empty")
    root, proofs = build_tree([leaf_hash(d) for d in dids])
    return CompartmentCommitment(root=root, proofs=tuple(proofs))
