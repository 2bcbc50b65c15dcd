"""Hanf normal form: counting sentences, sphere histograms, compilation.

``fo_to_hnf`` realizes a desk-scale Hanf-normal-form constructor: it
tabulates, over an exhaustive witness pool of d-bounded structures, which
(free-tuple type, capped sphere histogram) configurations make the input
true, and emits one disjunct per true configuration.  The output is
d-equivalent to the input on every structure up to the witness pool size;
beyond the pool it is correct whenever the pool realizes every realizable
configuration, which locality theory guarantees for radii and thresholds
at least as generous as the ones used here.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator

from .config import Budget, DEFAULT_BUDGET
from .constructions import type_formula
from .errors import InputError, ResourceError
from .oracle import PoolSpec, enumerate_pool, realization_check
from .rtypes import RType, TypeRegistry, canonical_key, enumerate_types, extract_rtype
from .semantics import evaluate, prepare
from .structures import Signature, Structure, nu
from .syntax import (
    Count,
    Formula,
    Not,
    conj,
    disj,
    free_vars,
    quantifier_rank,
    substitute,
    substitute_avoiding,
)


def hanf_radius(q: int) -> int:
    """Locality radius used for rank-q formulas: (3^q - 1) / 2.

    This is the classical sufficient radius for rank-q equivalence; it
    stays within the 4^q contract while keeping registries desk-sized.
    """
    return (3**q - 1) // 2


def hanf_threshold(q: int, d: int) -> int:
    """Counting cap q * nu_d(4^q) + 1; dominates what q rounds can pin down."""
    return q * nu(d, 4**q) + 1


@dataclass(frozen=True)
class CountingSentence:
    """At least / exactly k elements realize a 1-center type."""

    mode: str  # ">=" or "="
    k: int
    rtype: RType

    def __post_init__(self):
        if self.rtype.n_centers != 1:
            raise InputError("counting sentences use 1-center types")
        if self.mode not in (">=", "="):
            raise InputError(f"counting mode must be '>=' or '=', got {self.mode!r}")
        if self.k < 0 or (self.mode == ">=" and self.k == 0):
            raise InputError("thresholds need k >= 1; exact counts need k >= 0")

    def to_formula(self) -> Formula:
        body = substitute(type_formula(self.rtype), {"x1": "y0"})
        if self.mode == "=" and self.k == 0:
            return Not(Count(">=", 1, "y0", body))
        return Count(self.mode, self.k, "y0", body)


# HNF combination trees -----------------------------------------------------


@dataclass(frozen=True)
class HCounting:
    sentence: CountingSentence


@dataclass(frozen=True)
class HTypeAtom:
    rtype: RType
    variables: tuple[str, ...]

    def __post_init__(self):
        if len(self.variables) != self.rtype.n_centers:
            raise InputError("type atom variable tuple must match the center count")


@dataclass(frozen=True)
class HNot:
    child: object


@dataclass(frozen=True)
class HAnd:
    children: tuple


@dataclass(frozen=True)
class HOr:
    children: tuple


@dataclass(frozen=True)
class HnfFormula:
    """Boolean combination of type atoms and counting sentences."""

    root: object

    @property
    def positive(self) -> bool:
        return not any(isinstance(n, HNot) for n in self._walk())

    @property
    def radius(self) -> int:
        radii = [leaf.rtype.radius for leaf in self.leaves(HTypeAtom)] + [
            leaf.sentence.rtype.radius for leaf in self.leaves(HCounting)
        ]
        return max(radii, default=0)

    def _walk(self) -> Iterator[object]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, HNot):
                stack.append(node.child)
            elif isinstance(node, (HAnd, HOr)):
                stack.extend(node.children)

    def leaves(self, kind=None) -> Iterator[object]:
        for node in self._walk():
            if isinstance(node, (HCounting, HTypeAtom)) and (
                kind is None or isinstance(node, kind)
            ):
                yield node

    def to_formula(self) -> Formula:
        def rec(node) -> Formula:
            if isinstance(node, HCounting):
                return node.sentence.to_formula()
            if isinstance(node, HTypeAtom):
                phi = type_formula(node.rtype)
                mapping = {f"x{i + 1}": v for i, v in enumerate(node.variables)}
                return substitute_avoiding(phi, mapping)
            if isinstance(node, HNot):
                return Not(rec(node.child))
            if isinstance(node, HAnd):
                return conj([rec(c) for c in node.children])
            if isinstance(node, HOr):
                return disj([rec(c) for c in node.children])
            raise InputError(f"unknown HNF node {node!r}")

        return rec(self.root)

    def holds(self, a_struct: Structure, asg: dict) -> bool:
        """Semantic evaluation via realization checks and direct counting."""
        census: dict = {}

        def count_realizers(tau: RType) -> int:
            key = canonical_key(tau)
            if key not in census:
                census[key] = sum(
                    1
                    for e in range(a_struct.size)
                    if realization_check(a_struct, (e,), tau)
                )
            return census[key]

        def rec(node) -> bool:
            if isinstance(node, HCounting):
                c = count_realizers(node.sentence.rtype)
                return c >= node.sentence.k if node.sentence.mode == ">=" else c == node.sentence.k
            if isinstance(node, HTypeAtom):
                centers = tuple(asg[v] for v in node.variables)
                return realization_check(a_struct, centers, node.rtype)
            if isinstance(node, HNot):
                return not rec(node.child)
            if isinstance(node, HAnd):
                return all(rec(c) for c in node.children)
            if isinstance(node, HOr):
                return any(rec(c) for c in node.children)
            raise InputError(f"unknown HNF node {node!r}")

        return rec(self.root)


# sphere histograms ----------------------------------------------------------


@dataclass(frozen=True)
class SphereHistogram:
    """Per-type realization counts, capped at the threshold."""

    registry: TypeRegistry
    threshold: int
    counts: tuple[int, ...]

    @property
    def radius(self) -> int:
        return self.registry.radius


def histogram(
    a_struct: Structure, r: int, t: int, registry: TypeRegistry
) -> SphereHistogram:
    """Count, for every registry type, its realizers; cap counts at t."""
    if registry.radius != r or registry.n_centers != 1:
        raise InputError("histogram needs the 1-center registry at the same radius")
    counts = [0] * len(registry)
    for e in range(a_struct.size):
        tau = extract_rtype(a_struct, (e,), r)
        counts[registry.index_of(tau)] += 1
    return SphereHistogram(registry, t, tuple(min(c, t) for c in counts))


def _counting_for(count: int, t: int, tau: RType) -> CountingSentence:
    if count >= t:
        return CountingSentence(">=", t, tau)
    return CountingSentence("=", count, tau)


# compilation ----------------------------------------------------------------


@dataclass(frozen=True)
class HnfCompilation:
    hnf: HnfFormula
    radius: int
    threshold: int
    witness_pool_size: int
    witnesses_scanned: int
    registry_1: TypeRegistry
    registry_n: TypeRegistry | None


def fo_to_hnf_detailed(
    phi: Formula,
    d: int,
    signature: Signature,
    budget: Budget = DEFAULT_BUDGET,
) -> HnfCompilation:
    if signature.constants:
        raise InputError("Hanf compilation needs a purely relational signature")
    if d < 2:
        raise InputError("degree bound must be at least 2")
    q = quantifier_rank(phi, signature)
    if q > 8:
        raise ResourceError(f"quantifier rank {q} is beyond desk scale")
    xs = tuple(sorted(free_vars(phi)))
    n = len(xs)
    r = hanf_radius(q)
    t = hanf_threshold(q, d)

    reg1 = enumerate_types(
        signature, d, r, 1, budget, max_size=min(nu(d, r), budget.witness_size)
    )
    pool_size = min(budget.witness_size, (len(reg1) * t + n) * nu(d, r))
    regn = None
    if n >= 1:
        regn = enumerate_types(
            signature, d, r, n, budget, max_size=min(n * nu(d, r), pool_size)
        )

    prepared = prepare(phi)
    # (type index or None, capped counts) -> truth on the first witness
    seen: dict[tuple, bool] = {}
    scanned = 0
    spec = PoolSpec(
        signature,
        degree_bound=d,
        max_size=pool_size,
        dedup=True,
        ceiling=budget.pool_ceiling,
    )
    for witness in enumerate_pool(spec):
        scanned += 1
        hist = histogram(witness, r, t, reg1)
        cache: dict = {}
        vs, rows = evaluate(witness, prepared, cache)
        for assignment in product(range(witness.size), repeat=n):
            asg = dict(zip(xs, assignment))
            if n >= 1:
                rho_idx = regn.index_of(extract_rtype(witness, assignment, r))
            else:
                rho_idx = None
            key = (rho_idx, hist.counts)
            if key not in seen:
                seen[key] = tuple(asg[v] for v in vs) in rows

    def sort_key(item: tuple) -> tuple:
        rho_idx, counts = item
        rho_part = canonical_key(regn.members[rho_idx]) if rho_idx is not None else ()
        return (rho_part, counts)

    disjuncts = []
    for rho_idx, counts in sorted((k for k, true in seen.items() if true), key=sort_key):
        parts: list = []
        if rho_idx is not None:
            parts.append(HTypeAtom(regn.members[rho_idx], xs))
        parts.extend(
            HCounting(_counting_for(c, t, tau)) for c, tau in zip(counts, reg1.members)
        )
        disjuncts.append(HAnd(tuple(parts)))
    hnf = HnfFormula(HOr(tuple(disjuncts)))
    return HnfCompilation(hnf, r, t, pool_size, scanned, reg1, regn)


def fo_to_hnf(
    phi: Formula, d: int, signature: Signature, budget: Budget = DEFAULT_BUDGET
) -> HnfFormula:
    return fo_to_hnf_detailed(phi, d, signature, budget).hnf


def hnf_to_positive(
    hnf: HnfFormula, d: int, signature: Signature, budget: Budget = DEFAULT_BUDGET
) -> HnfFormula:
    """Push negations to the leaves, then replace negated leaves positively.

    A negated threshold becomes the disjunction of the smaller exact
    counts; a negated exact count becomes the other exact counts plus the
    next threshold; a negated type atom becomes the disjunction of all
    non-isomorphic registry types with the same parameters.
    """

    def registry_for(tau: RType) -> TypeRegistry:
        cap = None
        if budget.registry_universe is not None:
            cap = budget.registry_universe
        return enumerate_types(
            signature, d, tau.radius, tau.n_centers, budget, max_size=cap
        )

    def positive_leaf_negation(leaf) -> object:
        if isinstance(leaf, HCounting):
            s = leaf.sentence
            below = [
                HCounting(CountingSentence("=", i, s.rtype)) for i in range(s.k)
            ]
            if s.mode == ">=":
                return HOr(tuple(below))
            above = HCounting(CountingSentence(">=", s.k + 1, s.rtype))
            return HOr(tuple(below) + (above,))
        if isinstance(leaf, HTypeAtom):
            own = canonical_key(leaf.rtype)
            others = [
                HTypeAtom(member, leaf.variables)
                for member in registry_for(leaf.rtype)
                if canonical_key(member) != own
            ]
            return HOr(tuple(others))
        raise InputError(f"cannot negate non-leaf {leaf!r}")

    def push(node, negated: bool):
        if isinstance(node, HNot):
            return push(node.child, not negated)
        if isinstance(node, HAnd):
            children = tuple(push(c, negated) for c in node.children)
            return HOr(children) if negated else HAnd(children)
        if isinstance(node, HOr):
            children = tuple(push(c, negated) for c in node.children)
            return HAnd(children) if negated else HOr(children)
        if negated:
            return positive_leaf_negation(node)
        return node

    return HnfFormula(push(hnf.root, False))
