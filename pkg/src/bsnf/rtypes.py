"""Neighborhood types: extraction, isomorphism, canonical forms, registries.

An r-type with n centers is a structure together with n distinguished
elements whose r-balls cover the whole universe.  Registries enumerate one
canonical representative per isomorphism class of d-bounded types; their
sizes grow doubly exponentially, so enumeration is budget-guarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product
from typing import Iterator, Sequence

from .config import Budget, DEFAULT_BUDGET
from .errors import InputError, ResourceError
from .structures import (
    Signature,
    Structure,
    enumerate_structures,
    induced,
    neighborhood,
    nu,
)


class RType:
    """A structure with an ordered, possibly repeating list of centers.

    Invariant: every carrier element lies within Gaifman distance
    ``radius`` of some center (checked at construction).
    """

    __slots__ = ("carrier", "centers", "radius", "_canon_key")

    def __init__(self, carrier: Structure, centers: Sequence[int], radius: int):
        if not centers:
            raise InputError("a type needs at least one center")
        if radius < 0:
            raise InputError("radius must be a natural number")
        for c in centers:
            carrier.check_element(c)
        covered = neighborhood(carrier, tuple(dict.fromkeys(centers)), radius)
        if len(covered) != carrier.size:
            missing = sorted(set(range(carrier.size)) - covered)
            raise InputError(
                f"carrier elements {missing} lie outside the {radius}-neighborhood "
                "of the centers"
            )
        object.__setattr__(self, "carrier", carrier)
        object.__setattr__(self, "centers", tuple(centers))
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "_canon_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("RType is immutable")

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    def encoding(self) -> tuple:
        return (self.carrier.size, self.centers) + self.carrier.encoding()[1:]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RType):
            return NotImplemented
        return (
            self.carrier.sig == other.carrier.sig
            and self.radius == other.radius
            and self.encoding() == other.encoding()
        )

    def __hash__(self) -> int:
        return hash((self.carrier.sig, self.radius, self.encoding()))

    def __repr__(self) -> str:
        return f"RType(|A|={self.carrier.size}, centers={self.centers}, r={self.radius})"


def extract_rtype(a_struct: Structure, centers: Sequence[int], r: int) -> RType:
    """The r-type realized by ``centers`` in ``a_struct``.

    The carrier is the induced substructure on the r-neighborhood, with
    elements renumbered deterministically: distinct centers first in order
    of first occurrence, then the rest by (distance to nearest center,
    original id).
    """
    if not centers:
        raise InputError("need at least one center")
    for c in centers:
        a_struct.check_element(c)
    ball = neighborhood(a_struct, centers, r)
    distinct_centers = list(dict.fromkeys(centers))
    rest = sorted(
        (e for e in ball if e not in set(distinct_centers)),
        key=lambda e: (min(a_struct.distance_row(c)[e] for c in distinct_centers), e),
    )
    order = distinct_centers + rest
    carrier = induced(a_struct, order)
    index = {e: i for i, e in enumerate(order)}
    return RType(carrier, tuple(index[c] for c in centers), r)


# ---------------------------------------------------------------------------
# isomorphism (independent backtracking search, not via canonical forms)

def isomorphic(t1: RType, t2: RType) -> bool:
    """Center-respecting isomorphism test by backtracking search."""
    if t1.carrier.sig != t2.carrier.sig:
        raise InputError("types over different signatures are not comparable")
    if t1.n_centers != t2.n_centers:
        raise InputError("types with different center counts are not comparable")
    a, b = t1.carrier, t2.carrier
    if a.size != b.size:
        return False
    if any(len(a.rels[n]) != len(b.rels[n]) for n in a.sig.relation_names()):
        return False

    def profile(s: Structure, t: RType) -> list[tuple]:
        adj = s.adjacency()
        out = []
        for e in range(s.size):
            loops = tuple(
                sum(1 for tu in s.rels[name] if set(tu) == {e})
                for name in s.sig.relation_names()
            )
            dists = tuple(s.distance_row(c)[e] for c in t.centers)
            out.append((len(adj[e]), loops, dists))
        return out

    prof_a, prof_b = profile(a, t1), profile(b, t2)
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def consistent(e: int, f: int) -> bool:
        if prof_a[e] != prof_b[f]:
            return False
        for u, v in mapping.items():
            if (f in b.adjacency()[v]) != (e in a.adjacency()[u]):
                return False
        return True

    def assign(e: int, f: int) -> bool:
        if e in mapping:
            return mapping[e] == f
        if f in used or not consistent(e, f):
            return False
        mapping[e] = f
        used.add(f)
        return True

    def unassign(order_mark: list[int]):
        for e in order_mark:
            used.discard(mapping.pop(e))

    for ca, cb in zip(t1.centers, t2.centers):
        if ca in mapping:
            if mapping[ca] != cb:
                return False
        else:
            if not assign(ca, cb):
                return False

    free_elems = [e for e in range(a.size) if e not in mapping]

    def verify() -> bool:
        for name in a.sig.relation_names():
            image = {tuple(mapping[e] for e in t) for t in a.rels[name]}
            if image != set(b.rels[name]):
                return False
        return True

    def search(i: int) -> bool:
        if i == len(free_elems):
            return verify()
        e = free_elems[i]
        for f in range(b.size):
            if f in used or not consistent(e, f):
                continue
            mapping[e] = f
            used.add(f)
            if search(i + 1):
                return True
            used.discard(f)
            del mapping[e]
        return False

    return search(0)


# ---------------------------------------------------------------------------
# canonical forms

def canonical_key(t: RType) -> tuple:
    """Lexicographically least encoding over center-fixing relabelings.

    Distinct centers are pinned to ids 0..k-1 in first-occurrence order;
    all placements of the remaining elements are tried and the least
    (size, centers, relation tuples) encoding wins.
    """
    if t._canon_key is not None:
        return t._canon_key
    carrier = t.carrier
    distinct = list(dict.fromkeys(t.centers))
    k = len(distinct)
    others = [e for e in range(carrier.size) if e not in set(distinct)]
    perm = [0] * carrier.size
    for i, c in enumerate(distinct):
        perm[c] = i
    center_pattern = tuple(distinct.index(c) for c in t.centers)
    best: tuple | None = None
    rel_names = carrier.sig.relation_names()
    rel_tuples = [sorted(carrier.rels[name]) for name in rel_names]
    for arrangement in permutations(others):
        for pos, e in enumerate(arrangement):
            perm[e] = k + pos
        enc = tuple(
            tuple(sorted(tuple(perm[e] for e in tu) for tu in tuples))
            for tuples in rel_tuples
        )
        if best is None or enc < best:
            best = enc
    key = (carrier.size, t.radius, center_pattern, best)
    object.__setattr__(t, "_canon_key", key)
    return key


def canonical_form(t: RType) -> RType:
    """The canonical representative of ``t``'s isomorphism class.

    Idempotent; two types get equal canonical forms iff they are
    isomorphic (the key is a complete invariant for center-fixing
    isomorphism).
    """
    size, radius, center_pattern, enc = canonical_key(t)
    rels = {
        name: list(tuples)
        for name, tuples in zip(t.carrier.sig.relation_names(), enc)
    }
    carrier = Structure(Signature(t.carrier.sig.relations), size, rels)
    return RType(carrier, center_pattern, radius)


# ---------------------------------------------------------------------------
# registries

@dataclass(frozen=True)
class TypeRegistry:
    """Canonical, pairwise non-isomorphic d-bounded r-types with n centers.

    ``universe_cap`` records the carrier-size bound the enumeration used;
    members with larger carriers exist mathematically but cannot be
    realized inside structures of that size.
    """

    signature: Signature
    degree_bound: int
    radius: int
    n_centers: int
    universe_cap: int
    members: tuple[RType, ...]
    _index: dict = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __post_init__(self):
        for i, m in enumerate(self.members):
            self._index[canonical_key(m)] = i

    def lookup(self, t: RType) -> RType:
        return self.members[self.index_of(t)]

    def index_of(self, t: RType) -> int:
        key = canonical_key(t)
        if key not in self._index:
            raise InputError(
                "type is not represented in this registry (degree bound or "
                "carrier-size cap violated)"
            )
        return self._index[key]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[RType]:
        return iter(self.members)


def enumerate_types(
    signature: Signature,
    d: int,
    r: int,
    n: int,
    budget: Budget = DEFAULT_BUDGET,
    max_size: int | None = None,
) -> TypeRegistry:
    """All d-bounded r-types with n centers, one canonical member per class.

    Enumeration walks structures by universe size then tuple-set encoding,
    tries every center tuple, keeps covering candidates, and dedupes by
    canonical key.  ``max_size`` optionally caps the carrier size below
    the theoretical bound n * nu_d(r).
    """
    if d < 2:
        raise InputError("degree bound must be at least 2")
    if n < 1:
        raise InputError("need at least one center")
    bound = n * nu(d, r)
    if bound > budget.type_cap:
        raise ResourceError(
            f"type enumeration refused: carrier bound n*nu_d(r) = {bound} exceeds "
            f"the configured cap {budget.type_cap}"
        )
    cap = bound if max_size is None else min(bound, max_size)
    base = Signature(signature.relations)
    return _enumerate_types_cached(base, d, r, n, cap)


@lru_cache(maxsize=None)
def _enumerate_types_cached(
    signature: Signature, d: int, r: int, n: int, cap: int
) -> TypeRegistry:
    members: list[RType] = []
    seen: set[tuple] = set()
    for a_struct in enumerate_structures(signature, cap, degree_bound=d):
        balls = [a_struct.ball(e, r) for e in range(a_struct.size)]
        full = frozenset(range(a_struct.size))
        for centers in product(range(a_struct.size), repeat=n):
            covered: set[int] = set()
            for c in set(centers):
                covered |= balls[c]
            if covered != full:
                continue
            t = RType(a_struct, centers, r)
            key = canonical_key(t)
            if key not in seen:
                seen.add(key)
                members.append(canonical_form(t))
    return TypeRegistry(signature, d, r, n, cap, tuple(members))
