"""Constructive lower-bound families: tree encodings, chains, ordered trees,
and the small formula sequences that separate them.

These artifacts witness that prefix-normal local formulas must blow up:
a linear-size sentence can say "every component has an isomorphic twin"
over families whose member count towers, while any equivalent BSNF
sentence needs one named witness per isomorphism class.
"""

from __future__ import annotations

from .errors import InputError, ResourceError
from .structures import Signature, Structure, disjoint_union
from .syntax import (
    And,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Rel,
    disj,
    substitute_avoiding,
)

CHAIN_SIG = Signature((("E", 2), ("L", 1)))
TREE_ENCODING_SIG = Signature((("E", 2),))


def bit(i: int, n: int) -> int:
    """The i-th binary digit of n."""
    if i < 0 or n < 0:
        raise InputError("bit is defined for naturals")
    return (n >> i) & 1


def tower(k: int) -> int:
    """Iterated exponential: a tower of 2s of height k (tower(0) = 1)."""
    if k < 0:
        raise InputError("tower is defined for naturals")
    if k > 5:
        raise ResourceError(f"tower({k}) is astronomically large")
    value = 1
    for _ in range(k):
        value = 2**value
    return value


def tree_encoding(i: int, node_budget: int = 100_000) -> Structure:
    """The recursive {E}-tree encoding of the natural number i.

    Zero encodes as a single node; a positive i becomes a fresh root with
    children encoding every set bit position, attached in increasing bit
    order.  Node ids follow preorder (root first, children in bit order).
    """
    if i < 0:
        raise InputError("tree encodings are defined for naturals")
    edges: list[tuple[int, int]] = []
    counter = [0]

    def build(value: int) -> int:
        root = counter[0]
        counter[0] += 1
        if counter[0] > node_budget:
            raise ResourceError(f"tree encoding exceeds the node budget {node_budget}")
        j = 0
        while value >> j:
            if bit(j, value):
                child = build(j)
                edges.append((root, child))
            j += 1
        return root

    build(i)
    return Structure(TREE_ENCODING_SIG, counter[0], {"E": edges})


def tree_height(s: Structure) -> int:
    """Longest directed path length from a root (indegree-0 node)."""
    out: dict[int, list[int]] = {e: [] for e in range(s.size)}
    indeg = [0] * s.size
    for name in s.sig.relation_names():
        if name == "L":
            continue
        for a, b in s.rels[name]:
            out[a].append(b)
            indeg[b] += 1

    def depth(v: int) -> int:
        return 1 + max((depth(w) for w in out[v]), default=-1)

    return max((depth(v) for v in range(s.size) if indeg[v] == 0), default=0)


def chain_family(h: int, budget: int = 1 << 16) -> list[Structure]:
    """All labeled chains of height h (h+1 nodes), one per iso class.

    Members are ordered by their label bit string read from the root;
    the d = 2 instance of the ordered-tree families, with the single
    child relation written E.
    """
    if h < 0:
        raise InputError("height must be a natural number")
    count = 2 ** (h + 1)
    if count > budget:
        raise ResourceError(f"chain family of height {h} has {count} members")
    out = []
    for labels in range(count):
        edges = [(i, i + 1) for i in range(h)]
        labeled = [(i,) for i in range(h + 1) if bit(h - i, labels)]
        out.append(Structure(CHAIN_SIG, h + 1, {"E": edges, "L": labeled}))
    return out


def tree_signature(d: int) -> Signature:
    """Signature of ordered labeled trees of arity d-1: E_1..E_{d-1}, L."""
    if d < 2:
        raise InputError("tree families need d >= 2")
    if d == 2:
        return CHAIN_SIG
    return Signature(tuple((f"E{i}", 2) for i in range(1, d)) + (("L", 1),))


def _edge_names(d: int) -> list[str]:
    return ["E"] if d == 2 else [f"E{i}" for i in range(1, d)]


def tree_family(d: int, h: int, budget: int = 1 << 16) -> list[Structure]:
    """All complete labeled ordered (d-1)-ary trees of height h, up to iso.

    Node ids are breadth-first (root 0, then level by level, children in
    sibling order); label bit strings enumerate members in that node order.
    """
    if d < 2:
        raise InputError("tree families need d >= 2")
    if d == 2:
        return chain_family(h, budget)
    arity = d - 1
    sig = tree_signature(d)
    nodes = (arity ** (h + 1) - 1) // (arity - 1)
    count = 2**nodes
    if count > budget:
        raise ResourceError(f"tree family ({d}, {h}) has {count} members")
    rels_base: dict[str, list[tuple[int, ...]]] = {name: [] for name in _edge_names(d)}
    level = [0]
    next_id = 1
    for _ in range(h):
        new_level = []
        for parent in level:
            for i in range(arity):
                rels_base[f"E{i + 1}"].append((parent, next_id))
                new_level.append(next_id)
                next_id += 1
        level = new_level
    out = []
    for labels in range(count):
        rels = dict(rels_base)
        rels["L"] = [(v,) for v in range(nodes) if bit(nodes - 1 - v, labels)]
        out.append(Structure(sig, nodes, rels))
    return out


def family_members(name: str) -> list[Structure]:
    """Resolve a family name like ``chain:2``, ``tree:3:2``, ``encoding:3``."""
    parts = name.split(":")
    try:
        if parts[0] == "chain":
            return chain_family(int(parts[1]))
        if parts[0] == "tree":
            return tree_family(int(parts[1]), int(parts[2]))
        if parts[0] == "encoding":
            h = int(parts[1])
            return [tree_encoding(i) for i in range(tower(h))]
    except (IndexError, ValueError) as exc:
        raise InputError(f"bad family name {name!r}") from exc
    raise InputError(f"unknown family {parts[0]!r}")


# ---------------------------------------------------------------------------
# co-reachability and isomorphism formulas

def coreach_formula(d: int, ell: int) -> Formula:
    """Free x, y, xp, yp: y and yp are reachable from x and xp by paths
    using the same child relations in the same order, within ell steps.

    Built by halving, with the shared recursive copy behind universally
    quantified endpoints, so the size grows logarithmically in ell.
    """
    if d < 2:
        raise InputError("co-reachability formulas need d >= 2")
    if ell < 0:
        raise InputError("distance must be a natural number")
    names = _edge_names(d)
    counter = [1]

    def base(x: str, y: str, xp: str, yp: str) -> Formula:
        return And(Eq(x, y), Eq(xp, yp))

    def step(x: str, y: str, xp: str, yp: str) -> Formula:
        hop = disj([And(Rel(e, (x, y)), Rel(e, (xp, yp))) for e in names])
        return Or(base(x, y, xp, yp), hop)

    def build(bound: int, x: str, y: str, xp: str, yp: str) -> Formula:
        if bound == 0:
            return base(x, y, xp, yp)
        if bound == 1:
            return step(x, y, xp, yp)
        i = counter[0]
        counter[0] += 1
        if bound % 2 == 0:
            z, zp = f"z{i}", f"zp{i}"
            u, v, up, vp = f"u{i}", f"v{i}", f"up{i}", f"vp{i}"
            first = And(And(Eq(u, x), Eq(up, xp)), And(Eq(v, z), Eq(vp, zp)))
            second = And(And(Eq(u, z), Eq(up, zp)), And(Eq(v, y), Eq(vp, yp)))
            inner = Implies(Or(first, second), build(bound // 2, u, v, up, vp))
            return Exists(
                z, Exists(zp, Forall(u, Forall(v, Forall(up, Forall(vp, inner)))))
            )
        z, zp = f"z{i}", f"zp{i}"
        return Exists(
            z,
            Exists(
                zp,
                And(step(x, z, xp, zp), build(bound - 1, z, y, zp, yp)),
            ),
        )

    return build(ell, "x", "y", "xp", "yp")


def iso_formula(d: int, h: int) -> Formula:
    """Free x, y: on forests whose components are complete members of
    height 2^h, the components rooted at x and y are isomorphic.

    Two descendants reached by the same child-relation word must agree on
    the label; for complete trees of the right height that pins the whole
    component.
    """
    if h < 1:
        raise InputError("isomorphism formulas need h >= 1")
    co = coreach_formula(d, 2**h)
    # wire (start1, end1, start2, end2) = (x, xd, y, yd)
    co = substitute_avoiding(co, {"x": "x", "y": "xd", "xp": "y", "yp": "yd"})
    body = Implies(co, Iff(Rel("L", ("xd",)), Rel("L", ("yd",))))
    return Forall("xd", Forall("yd", body))


def root_formula(d: int, var: str = "x") -> Formula:
    """No incoming child edge: the variable is a root."""
    other = "r0" if var != "r0" else "r1"
    return Not(Exists(other, disj([Rel(e, (other, var)) for e in _edge_names(d)])))


def duplication_sentence(d: int, h: int) -> Formula:
    """Every root has a different root whose component is isomorphic.

    On forests from the matching family this says every connected
    component is isomorphic to another one.
    """
    iso = iso_formula(d, h)
    witness = Exists(
        "y",
        And(root_formula(d, "y"), And(Not(Eq("x", "y")), iso)),
    )
    return Forall("x", Implies(root_formula(d, "x"), witness))


def duplication_scenario(members: list[Structure]) -> tuple[Structure, Structure]:
    """Two copies of every member, and the same with one component removed.

    The first structure satisfies the duplication sentence; deleting one
    copy of the first member leaves a component without a twin.
    """
    from .structures import components

    if not members:
        raise InputError("need at least one member")
    for m in members:
        if len(components(m)) != 1:
            raise InputError("scenario members must be connected")
    for i, a in enumerate(members):
        for b in members[i + 1 :]:
            if a.sig != b.sig:
                raise InputError("scenario members must share a signature")
    doubled = disjoint_union([m for m in members for _ in range(2)])
    pruned = disjoint_union([m for m in members for _ in range(2)][1:])
    return doubled, pruned
