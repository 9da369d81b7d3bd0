"""Chain-building helpers shared by the tests."""
from crystalsim.chain import MAX_TARGET, BlockTree, QuorumCertificate, make_block, make_genesis
from crystalsim.crypto import keygen


def grow(tree: BlockTree, parent: int, n: int, owners=None, t0: float = 1.0) -> list[int]:
    """Append ``n`` bootstrap-style blocks (empty QCs) on ``parent``."""
    out = []
    for i in range(n):
        pk = owners[i % len(owners)].pk if owners else keygen("filler").pk
        b = make_block(parent, QuorumCertificate(parent), pk, pk, MAX_TARGET, t0 + i)
        tree.insert(b)
        parent = b.hash
        out.append(parent)
    return out


def fresh_tree() -> BlockTree:
    return BlockTree(make_genesis())
