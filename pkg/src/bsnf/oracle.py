"""Ground truth by exhaustion: structure pools and equivalence verdicts."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator

from .errors import InputError, ResourceError
from .rtypes import RType, extract_rtype, isomorphic
from .semantics import evaluate, prepare
from .structures import (
    Signature,
    Structure,
    canonical_structure_key,
    count_relation_positions,
    degree,
    disjoint_union,
    enumerate_structures,
)
from .syntax import Formula, free_vars


@dataclass(frozen=True)
class PoolSpec:
    """What to enumerate: signature, degree bound, sizes, mode.

    Exhaustive mode yields every structure with ``|A| <= max_size`` (and
    degree within the bound) exactly once in the deterministic encoding
    order; isomorphic duplicates are retained unless ``dedup`` is set.
    Random mode draws ``samples`` structures reproducibly from ``seed``.
    ``family`` restricts members to disjoint unions of the named
    lower-bound family (see :mod:`bsnf.lowerbound`).
    """

    signature: Signature
    degree_bound: int | None = None
    max_size: int = 4
    mode: str = "exhaustive"
    seed: int | None = None
    samples: int = 100
    dedup: bool = False
    ceiling: int = 2**24
    family: str | None = None

    def __post_init__(self):
        if self.max_size < 1:
            raise InputError("pool max size must be at least 1")
        if self.mode not in ("exhaustive", "random"):
            raise InputError(f"unknown pool mode {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise InputError("random pools require a seed")


@dataclass(frozen=True)
class EquivalenceVerdict:
    agree: bool
    witness: tuple[Structure, dict] | None = None
    checked: int = 0

    def __bool__(self) -> bool:
        return self.agree


def enumerate_pool(spec: PoolSpec) -> Iterator[Structure]:
    if spec.family is not None:
        yield from _family_pool(spec)
        return
    if spec.mode == "random":
        yield from _random_pool(spec)
        return
    positions = count_relation_positions(spec.signature, spec.max_size)
    if 2**positions > spec.ceiling:
        raise ResourceError(
            f"exhaustive enumeration refused: 2**{positions} candidate tuple sets "
            f"exceeds the ceiling of {spec.ceiling}"
        )
    seen: set = set()
    for s in enumerate_structures(spec.signature, spec.max_size, spec.degree_bound):
        if spec.dedup:
            key = canonical_structure_key(s)
            if key in seen:
                continue
            seen.add(key)
        yield s


def _random_pool(spec: PoolSpec) -> Iterator[Structure]:
    rng = random.Random(spec.seed)
    produced = 0
    attempts = 0
    while produced < spec.samples:
        attempts += 1
        if attempts > 1000 * spec.samples:
            raise ResourceError("random pool rejection rate too high for the degree bound")
        n = rng.randint(1, spec.max_size)
        rels: dict[str, list[tuple[int, ...]]] = {}
        for name, arity in spec.signature.relations:
            chosen = []
            count = rng.randint(0, n * arity)
            for _ in range(count):
                chosen.append(tuple(rng.randrange(n) for _ in range(arity)))
            rels[name] = chosen
        s = Structure(Signature(spec.signature.relations), n, rels)
        if spec.degree_bound is not None and degree(s) > spec.degree_bound:
            continue
        produced += 1
        yield s


def _family_pool(spec: PoolSpec) -> Iterator[Structure]:
    from . import lowerbound

    members = lowerbound.family_members(spec.family)
    if spec.mode == "exhaustive":
        raise InputError("family pools are sampled; use random mode with a seed")
    rng = random.Random(spec.seed)
    for _ in range(spec.samples):
        budget = spec.max_size
        parts = []
        while parts == [] or (budget >= members[0].size and rng.random() < 0.8):
            fitting = [m for m in members if m.size <= budget]
            if not fitting:
                break
            pick = fitting[rng.randrange(len(fitting))]
            parts.append(pick)
            budget -= pick.size
        yield disjoint_union(parts)


def check_equivalence(phi: Formula, psi: Formula, spec: PoolSpec) -> EquivalenceVerdict:
    """First (structure, assignment) disagreement in enumeration order, if any.

    Both formulas are evaluated as full truth tables per structure, so all
    assignments of one structure cost a single relational evaluation each.
    """
    fv_phi, fv_psi = free_vars(phi), free_vars(psi)
    if fv_phi != fv_psi:
        raise InputError(
            f"free-variable sets differ: {sorted(fv_phi)} vs {sorted(fv_psi)}"
        )
    names = tuple(sorted(fv_phi))
    p_phi, p_psi = prepare(phi), prepare(psi)
    checked = 0
    for s in enumerate_pool(spec):
        cache: dict = {}
        vars_a, rows_a = evaluate(s, p_phi, cache)
        vars_b, rows_b = evaluate(s, p_psi, cache)
        checked += 1
        full_a = _expand(vars_a, rows_a, names, s.size)
        full_b = _expand(vars_b, rows_b, names, s.size)
        if full_a == full_b:
            continue
        first = min(full_a.symmetric_difference(full_b))
        return EquivalenceVerdict(False, (s, dict(zip(names, first))), checked)
    return EquivalenceVerdict(True, None, checked)


def _expand(
    vs: tuple[str, ...], rows: set, names: tuple[str, ...], size: int
) -> set[tuple[int, ...]]:
    """Re-express a table over the full, sorted free-variable tuple."""
    if vs == names:
        return rows
    missing = [v for v in names if v not in vs]
    pos = {v: i for i, v in enumerate(vs)}
    out = set()
    extras = [()]
    for _ in missing:
        extras = [t + (e,) for t in extras for e in range(size)]
    for row in rows:
        for extra in extras:
            fill = dict(zip(missing, extra))
            out.add(tuple(row[pos[v]] if v in pos else fill[v] for v in names))
    return out


def realization_check(a_struct: Structure, centers, tau: RType) -> bool:
    """Does the tuple realize the type?  Extraction plus isomorphism test."""
    if len(centers) != tau.n_centers:
        raise InputError("center tuple length does not match the type")
    if tau.radius < 0:
        raise InputError("type radius must be a natural")
    got = extract_rtype(a_struct, centers, tau.radius)
    return isomorphic(got, tau)
