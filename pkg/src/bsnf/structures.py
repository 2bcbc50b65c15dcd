"""Finite relational structures and their Gaifman-graph machinery.

Element ids are dense naturals ``0 .. size-1``.  Structures are immutable
once built; derived data (adjacency, distances) is computed lazily and
cached on the instance, so all operations here are safe to share across
threads.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .errors import InputError, ParseError, ResourceError

INF = math.inf


@dataclass(frozen=True)
class Signature:
    """Relation symbols with arities, plus optional constant names.

    Constants only occur inside neighborhood types and the structure text
    format; plain formulas never mention them.
    """

    relations: tuple[tuple[str, int], ...]
    constants: tuple[str, ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.relations] + list(self.constants)
        if len(set(names)) != len(names):
            raise InputError(f"duplicate symbol names in signature: {names}")
        for name, arity in self.relations:
            if arity < 1:
                raise InputError(f"relation {name} has arity {arity}, need >= 1")

    def arity(self, name: str) -> int:
        for rel, ar in self.relations:
            if rel == name:
                return ar
        raise InputError(f"unknown relation symbol {name!r}")

    def relation_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.relations)

    def __str__(self) -> str:
        return " ".join(f"{name}/{arity}" for name, arity in self.relations)


def sig(*relations: tuple[str, int], constants: Sequence[str] = ()) -> Signature:
    """Shorthand constructor: ``sig(("E", 2), ("L", 1))``."""
    return Signature(tuple(relations), tuple(constants))


class Structure:
    """A finite relational structure over a fixed signature.

    The universe is ``range(size)``.  Every relation of the signature is
    present in ``rels`` (empty by default); constants map names to
    elements.
    """

    __slots__ = ("sig", "size", "rels", "consts", "_adj", "_dist", "_hash")

    def __init__(
        self,
        signature: Signature,
        size: int,
        rels: Mapping[str, Iterable[tuple[int, ...]]] | None = None,
        consts: Mapping[str, int] | None = None,
    ):
        if size < 1:
            raise InputError("universe must be non-empty")
        rels = dict(rels or {})
        known = set(signature.relation_names())
        for name in rels:
            if name not in known:
                raise InputError(f"relation {name!r} not in signature")
        normalized: dict[str, frozenset[tuple[int, ...]]] = {}
        for name, arity in signature.relations:
            tuples = frozenset(tuple(t) for t in rels.get(name, ()))
            for t in tuples:
                if len(t) != arity:
                    raise InputError(f"tuple {t} has wrong arity for {name}/{arity}")
                if any(not (0 <= e < size) for e in t):
                    raise InputError(f"tuple {t} mentions an element outside 0..{size - 1}")
            normalized[name] = tuples
        consts = dict(consts or {})
        if set(consts) != set(signature.constants):
            raise InputError(
                f"constants {sorted(consts)} do not match signature constants "
                f"{sorted(signature.constants)}"
            )
        for cname, e in consts.items():
            if not (0 <= e < size):
                raise InputError(f"constant {cname} maps to invalid element {e}")
        object.__setattr__(self, "sig", signature)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "rels", normalized)
        object.__setattr__(self, "consts", consts)
        object.__setattr__(self, "_adj", None)
        object.__setattr__(self, "_dist", None)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Structure is immutable")

    # -- identity ---------------------------------------------------------

    def encoding(self) -> tuple:
        """Deterministic value encoding used for equality and ordering."""
        rel_part = tuple(
            (name, tuple(sorted(self.rels[name]))) for name in self.sig.relation_names()
        )
        const_part = tuple(sorted(self.consts.items()))
        return (self.size, rel_part, const_part)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Structure):
            return NotImplemented
        return self.sig == other.sig and self.encoding() == other.encoding()

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.sig, self.encoding())))
        return self._hash

    def __repr__(self) -> str:
        tuples = sum(len(ts) for ts in self.rels.values())
        return f"Structure(|A|={self.size}, tuples={tuples})"

    # -- Gaifman graph ----------------------------------------------------

    def adjacency(self) -> tuple[frozenset[int], ...]:
        """Neighbor sets of the Gaifman graph (undirected, loop-free)."""
        if self._adj is None:
            neigh: list[set[int]] = [set() for _ in range(self.size)]
            for tuples in self.rels.values():
                for t in tuples:
                    distinct = set(t)
                    if len(distinct) < 2:
                        continue
                    for a in distinct:
                        for b in distinct:
                            if a != b:
                                neigh[a].add(b)
            object.__setattr__(self, "_adj", tuple(frozenset(s) for s in neigh))
        return self._adj

    def distance_row(self, a: int) -> tuple[float, ...]:
        """BFS distances from ``a`` to every element (inf if unreachable)."""
        if self._dist is None:
            object.__setattr__(self, "_dist", {})
        cached = self._dist.get(a)
        if cached is None:
            adj = self.adjacency()
            row = [INF] * self.size
            row[a] = 0
            queue = deque([a])
            while queue:
                u = queue.popleft()
                du = row[u]
                for v in adj[u]:
                    if row[v] is INF:
                        row[v] = du + 1
                        queue.append(v)
            cached = tuple(row)
            self._dist[a] = cached
        return cached

    def ball(self, a: int, r: int) -> frozenset[int]:
        row = self.distance_row(a)
        return frozenset(b for b in range(self.size) if row[b] <= r)

    def check_element(self, e: int) -> int:
        if not isinstance(e, int) or not (0 <= e < self.size):
            raise InputError(f"invalid element id {e!r} for universe of size {self.size}")
        return e


# ---------------------------------------------------------------------------
# basic operations


def gaifman_distance(a_struct: Structure, a: int, b: int) -> int | float:
    """Length of a shortest Gaifman-graph path, or inf when disconnected."""
    a_struct.check_element(a)
    a_struct.check_element(b)
    d = a_struct.distance_row(a)[b]
    return d if d is INF else int(d)


def neighborhood(a_struct: Structure, centers: Sequence[int], r: int) -> frozenset[int]:
    """Union of the ``r``-balls around the given centers."""
    if not centers:
        raise InputError("need at least one center")
    out: set[int] = set()
    for c in centers:
        a_struct.check_element(c)
        out |= a_struct.ball(c, r)
    return frozenset(out)


def nu(d: int, r: int) -> int:
    """Upper bound on the size of an r-ball in a d-bounded structure."""
    if d < 0 or r < 0:
        raise InputError("nu is defined for naturals")
    if r > 100_000 or (d > 1 and r * math.log2(max(d - 1, 2)) > 1_000_000):
        raise OverflowError(f"nu({d}, {r}) would be astronomically large")
    return 1 + d * sum((d - 1) ** i for i in range(r))


def degree(a_struct: Structure) -> int:
    """Maximum vertex degree of the Gaifman graph."""
    return max((len(s) for s in a_struct.adjacency()), default=0)


def induced(a_struct: Structure, elements: Sequence[int]) -> Structure:
    """Substructure induced by ``elements``, renumbered by list position.

    ``elements`` must be distinct; position ``i`` becomes the new id ``i``.
    Constants are dropped (callers re-attach centers explicitly).
    """
    index = {e: i for i, e in enumerate(elements)}
    if len(index) != len(elements):
        raise InputError("induced substructure needs distinct elements")
    keep = set(elements)
    rels = {
        name: [tuple(index[e] for e in t) for t in tuples if set(t) <= keep]
        for name, tuples in a_struct.rels.items()
    }
    base = Signature(a_struct.sig.relations)
    return Structure(base, len(elements), rels)


class Component(NamedTuple):
    structure: Structure
    elements: tuple[int, ...]  # new id i  ->  original id elements[i]


def components(a_struct: Structure) -> list[Component]:
    """Maximal connected pieces of the Gaifman graph, as induced substructures.

    Pieces are ordered by their smallest original element id; within a
    piece, elements keep ascending original order.
    """
    adj = a_struct.adjacency()
    seen = [False] * a_struct.size
    out: list[Component] = []
    for start in range(a_struct.size):
        if seen[start]:
            continue
        comp = {start}
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.add(v)
                    queue.append(v)
        ordered = tuple(sorted(comp))
        out.append(Component(induced(a_struct, ordered), ordered))
    return out


def disjoint_union(parts: Sequence[Structure]) -> Structure:
    """Disjoint union with parts laid out consecutively.

    Part ``i`` occupies ids ``offset[i] .. offset[i]+|A_i|-1`` where
    ``offset`` is the running sum of part sizes; that layout is the
    recorded component boundary convention.
    """
    if not parts:
        raise InputError("disjoint union of zero structures is undefined")
    signature = parts[0].sig
    for p in parts:
        if p.sig != signature:
            raise InputError("disjoint union requires a common signature")
        if p.consts:
            raise InputError("disjoint union is undefined for structures with constants")
    offset = 0
    rels: dict[str, list[tuple[int, ...]]] = {name: [] for name in signature.relation_names()}
    for p in parts:
        for name, tuples in p.rels.items():
            rels[name].extend(tuple(e + offset for e in t) for t in tuples)
        offset += p.size
    return Structure(signature, offset, rels)


# ---------------------------------------------------------------------------
# exhaustive enumeration

def _candidate_tuples(signature: Signature, size: int) -> list[tuple[str, tuple[int, ...]]]:
    """All possible relation facts over a universe of ``size`` elements.

    Sorted by (relation position in the signature, tuple); the i-th
    candidate corresponds to bit i of the tuple-set encoding.
    """
    out: list[tuple[str, tuple[int, ...]]] = []
    for name, arity in signature.relations:
        tuples: list[tuple[int, ...]] = [()]
        for _ in range(arity):
            tuples = [t + (e,) for t in tuples for e in range(size)]
        out.extend((name, t) for t in sorted(tuples))
    return out


def count_relation_positions(signature: Signature, size: int) -> int:
    return sum(size ** arity for _, arity in signature.relations)


def enumerate_structures(
    signature: Signature,
    max_size: int,
    degree_bound: int | None = None,
    exact_size: int | None = None,
) -> Iterator[Structure]:
    """Every structure with ``1 <= |A| <= max_size`` in deterministic order.

    Order: by universe size, then ascending tuple-set encoding (candidate
    fact i present <=> bit i of the encoding integer set).  With a degree
    bound, violating tuple sets are pruned during generation rather than
    filtered afterwards.
    """
    sizes = [exact_size] if exact_size is not None else list(range(1, max_size + 1))
    base = Signature(signature.relations)
    for n in sizes:
        candidates = _candidate_tuples(base, n)
        yield from _enumerate_fixed_size(base, n, candidates, degree_bound)


def _enumerate_fixed_size(
    signature: Signature,
    size: int,
    candidates: list[tuple[str, tuple[int, ...]]],
    degree_bound: int | None,
) -> Iterator[Structure]:
    m = len(candidates)
    chosen: list[tuple[str, tuple[int, ...]]] = []
    neigh: list[set[int]] = [set() for _ in range(size)]

    def build() -> Structure:
        rels: dict[str, list[tuple[int, ...]]] = {}
        for name, t in chosen:
            rels.setdefault(name, []).append(t)
        return Structure(signature, size, rels)

    def admissible(t: tuple[int, ...]) -> list[tuple[int, int]] | None:
        """New Gaifman edges this fact adds, or None if degree would break."""
        distinct = sorted(set(t))
        added: list[tuple[int, int]] = []
        for i, a in enumerate(distinct):
            for b in distinct[i + 1 :]:
                if b not in neigh[a]:
                    added.append((a, b))
        if degree_bound is not None:
            delta: dict[int, int] = {}
            for a, b in added:
                delta[a] = delta.get(a, 0) + 1
                delta[b] = delta.get(b, 0) + 1
            for v, extra in delta.items():
                if len(neigh[v]) + extra > degree_bound:
                    return None
        return added

    # Bit i of the encoding toggles fastest for small i, so recurse with
    # candidate m-1 outermost: masks come out in ascending numeric order.
    def rec(i: int) -> Iterator[Structure]:
        if i < 0:
            yield build()
            return
        name_t = candidates[i]
        yield from rec(i - 1)
        added = admissible(name_t[1])
        if added is None:
            return
        chosen.append(name_t)
        for a, b in added:
            neigh[a].add(b)
            neigh[b].add(a)
        yield from rec(i - 1)
        for a, b in added:
            neigh[a].discard(b)
            neigh[b].discard(a)
        chosen.pop()

    yield from rec(m - 1)


def guard_enumeration(signature: Signature, max_size: int, ceiling: int) -> None:
    """Refuse exhaustive enumeration when the naive count estimate explodes."""
    positions = count_relation_positions(signature, max_size)
    if positions > math.log2(ceiling):
        raise ResourceError(
            f"exhaustive enumeration refused: 2**{positions} candidate tuple sets "
            f"exceeds the ceiling of {ceiling} evaluations"
        )


# ---------------------------------------------------------------------------
# structure canonicalization (whole structures, no centers)

def _initial_colors(s: Structure) -> list[tuple]:
    colors = []
    for e in range(s.size):
        facts = []
        for name in s.sig.relation_names():
            for t in sorted(s.rels[name]):
                if len(set(t)) == 1 and t[0] == e:
                    facts.append((name, len(t)))
        colors.append((len(s.adjacency()[e]), tuple(facts)))
    return colors


def _refine_colors(s: Structure, colors: list) -> list[int]:
    """Iterated neighbor-multiset refinement; returns stable integer colors."""
    adj = s.adjacency()
    current = colors
    for _ in range(s.size):
        keys = [
            (current[e], tuple(sorted(current[v] for v in adj[e]))) for e in range(s.size)
        ]
        palette = {k: i for i, k in enumerate(sorted(set(keys)))}
        new = [palette[k] for k in keys]
        if new == current:
            return new
        current = new
    return current


def _relabel_encoding(s: Structure, perm: Sequence[int]) -> tuple:
    """Encoding of the structure with element e renamed to perm[e]."""
    rel_part = tuple(
        tuple(sorted(tuple(perm[e] for e in t) for t in s.rels[name]))
        for name in s.sig.relation_names()
    )
    return (s.size, rel_part)


def _class_permutations(classes: list[list[int]], size: int) -> Iterator[list[int]]:
    """All bijections universe -> 0..size-1 that respect the class blocks.

    Classes are laid out consecutively in the given order; elements of a
    class may land in any order inside their block.
    """
    from itertools import permutations

    def rec(idx: int, start: int, perm: list[int]) -> Iterator[list[int]]:
        if idx == len(classes):
            yield perm.copy()
            return
        block = classes[idx]
        for arrangement in permutations(block):
            for pos, e in enumerate(arrangement):
                perm[e] = start + pos
            yield from rec(idx + 1, start + len(block), perm)

    yield from rec(0, 0, [0] * size)


def canonical_structure_key(s: Structure) -> tuple:
    """A canonical encoding: equal keys iff the structures are isomorphic.

    Components are canonicalized separately and combined as a sorted
    multiset, which keeps the permutation search small.
    """
    comps = components(s)
    if len(comps) == 1:
        return ("c", _canonical_connected_key(s))
    return ("m", tuple(sorted(_canonical_connected_key(c.structure) for c in comps)))


def _canonical_connected_key(s: Structure) -> tuple:
    stable = _refine_colors(s, _initial_colors(s))
    classes: dict[int, list[int]] = {}
    for e, c in enumerate(stable):
        classes.setdefault(c, []).append(e)
    ordered = [classes[c] for c in sorted(classes)]
    best = None
    for perm in _class_permutations(ordered, s.size):
        enc = _relabel_encoding(s, perm)
        if best is None or enc < best:
            best = enc
    return best


def structures_isomorphic(a: Structure, b: Structure) -> bool:
    """Exact isomorphism test via per-component canonical keys."""
    if a.sig != b.sig or a.size != b.size:
        return False
    return canonical_structure_key(a) == canonical_structure_key(b)


# ---------------------------------------------------------------------------
# text format

def structure_to_text(s: Structure) -> str:
    """Serialize in the one-structure-per-file text format."""
    lines = [f"signature: {s.sig}", f"universe: {s.size}"]
    for name in s.sig.relation_names():
        tuples = " ".join(
            "(" + ",".join(str(e) for e in t) + ")" for t in sorted(s.rels[name])
        )
        lines.append(f"{name}: {tuples}".rstrip())
    if s.consts:
        pairs = " ".join(f"{c}={e}" for c, e in sorted(s.consts.items()))
        lines.append(f"constants: {pairs}")
    return "\n".join(lines) + "\n"


def structure_from_text(text: str) -> Structure:
    """Parse the text format; ``#`` starts a comment."""
    signature: Signature | None = None
    size: int | None = None
    rels: dict[str, list[tuple[int, ...]]] = {}
    consts: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {line!r}", lineno, 1)
        key, _, value = line.partition(":")
        key = key.strip()
        value = value.strip()
        if key == "signature":
            relations = []
            constants = []
            for item in value.split():
                if "/" not in item:
                    raise ParseError(f"bad signature item {item!r}", lineno, 1)
                name, _, arity = item.partition("/")
                relations.append((name, int(arity)))
            signature = Signature(tuple(relations), tuple(constants))
        elif key == "universe":
            size = int(value)
        elif key == "constants":
            for item in value.split():
                cname, _, e = item.partition("=")
                consts[cname] = int(e)
        else:
            tuples = []
            for item in value.split():
                if not (item.startswith("(") and item.endswith(")")):
                    raise ParseError(f"bad tuple {item!r}", lineno, 1)
                tuples.append(tuple(int(x) for x in item[1:-1].split(",") if x != ""))
            rels[key] = tuples
    if signature is None or size is None:
        raise ParseError("missing signature or universe line", 1, 1)
    if consts:
        signature = Signature(signature.relations, tuple(sorted(consts)))
    return Structure(signature, size, rels, consts)
