"""Compilation into Barthelmann-Schwentick normal form.

Stages after Hanf normalization: counting sentences become BSNF sentences
(exactly, on all structures), type formulas become d-equivalent BSNF
formulas via a per-component localization, and positive combinations fuse
into a single prefix-normal formula.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import Budget, DEFAULT_BUDGET
from .constructions import atomic_diagram, type_formula
from .errors import InputError
from .hanf import (
    CountingSentence,
    HAnd,
    HCounting,
    HnfCompilation,
    HnfFormula,
    HOr,
    HTypeAtom,
    fo_to_hnf_detailed,
    hnf_to_positive,
)
from .normalform import BsnfForm
from .rtypes import RType, enumerate_types, extract_rtype, isomorphic
from .structures import Signature, components, neighborhood, nu
from .syntax import (
    And,
    DistAtom,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    all_var_names,
    conj,
    disj,
    fresh_names,
    free_vars,
    quantifier_rank,
    substitute_avoiding,
)


# ---------------------------------------------------------------------------
# counting sentences (exact equivalence, no degree assumption)

def counting_to_bsnf(sentence: CountingSentence) -> BsnfForm:
    """BSNF sentence equivalent to the counting sentence on all structures.

    Threshold: witnesses are named, pairwise distinct, and every named
    element must realize the type.  Exact: additionally every realizer is
    one of the named witnesses.  Count zero: no element realizes the type.
    """
    tau = sentence.rtype
    z = "z"
    type_z = substitute_avoiding(type_formula(tau), {"x1": z})
    if sentence.mode == "=" and sentence.k == 0:
        return BsnfForm((), z, Not(type_z), tau.radius)
    k = sentence.k
    ys = [f"y{i + 1}" for i in range(k)]
    distinct = [Not(Eq(ys[i], ys[j])) for i in range(k) for j in range(i + 1, k)]
    member = disj([Eq(z, y) for y in ys])
    if sentence.mode == ">=":
        matrix = conj(distinct + [Implies(member, type_z)])
    else:
        matrix = conj(distinct + [Iff(type_z, member)])
    return BsnfForm(tuple(ys), z, matrix, tau.radius)


# ---------------------------------------------------------------------------
# type formulas (d-equivalence via per-component localization)

@dataclass(frozen=True)
class ComponentPart:
    center_indices: tuple[int, ...]  # 0-based positions into the center tuple
    local_radius: int
    subtype: RType


@dataclass(frozen=True)
class ComponentSplit:
    rho: RType
    parts: tuple[ComponentPart, ...]


def component_split(rho: RType) -> ComponentSplit:
    """Partition the centers by connected component of the carrier.

    Every component holds at least one center (the covering invariant),
    and a component with L centers is reachable within L*(2r+1) steps of
    its first center.
    """
    r = rho.radius
    parts: list[ComponentPart] = []
    for comp, elements in components(rho.carrier):
        index = {orig: new for new, orig in enumerate(elements)}
        idxs = tuple(i for i, c in enumerate(rho.centers) if c in index)
        if not idxs:
            raise InputError("component without a center violates the type invariant")
        local_radius = len(idxs) * (2 * r + 1)
        sub = RType(comp, tuple(index[rho.centers[i]] for i in idxs), r)
        parts.append(ComponentPart(idxs, local_radius, sub))
    covered = sorted(i for p in parts for i in p.center_indices)
    assert covered == list(range(rho.n_centers))
    return ComponentSplit(rho, parts)


def _localized_types(
    part: ComponentPart,
    d: int,
    signature: Signature,
    budget: Budget,
) -> list[RType]:
    """Representatives of all d-bounded types matching the component.

    Filtered from the full registry at the enlarged radius: the carrier
    must sit inside the first center's ball, and the centers must realize
    the component subtype at the original radius.
    """
    ell = len(part.center_indices)
    r_i = part.local_radius
    cap = budget.registry_universe
    registry = enumerate_types(
        signature,
        d,
        r_i,
        ell,
        budget,
        max_size=None if cap is None else min(ell * nu(d, r_i), cap),
    )
    out = []
    for tau in registry:
        ball = neighborhood(tau.carrier, (tau.centers[0],), r_i)
        if len(ball) != tau.carrier.size:
            continue
        realized = extract_rtype(tau.carrier, tau.centers, part.subtype.radius)
        if isomorphic(realized, part.subtype):
            out.append(tau)
    return out


def component_formula(
    part: ComponentPart,
    rho: RType,
    anchor: str,
    d: int,
    signature: Signature,
    budget: Budget,
) -> Formula:
    """Local formula for one component, anchored at a single variable.

    Holds of a center tuple on d-bounded structures iff (1) the component
    centers realize the component subtype and (2) every foreign center
    stays at distance at least 2r+1 from them.  All quantifiers are
    distance-guarded with chains starting at ``anchor``.
    """
    r = rho.radius
    n = rho.n_centers
    r_i = part.local_radius

    def xvar(m: int) -> str:
        if m == part.center_indices[0]:
            return anchor
        return f"x{m + 1}"

    foreign = [m for m in range(n) if m not in part.center_indices]
    blocks: list[Formula] = []
    for tau in _localized_types(part, d, signature, budget):
        big_n = tau.carrier.size
        zs = [f"z{j + 1}" for j in range(big_n)]
        w = "z0"
        completeness = Forall(
            w,
            Implies(DistAtom(r_i, anchor, w), disj([Eq(w, zj) for zj in zs])),
        )
        center_eqs = [
            Eq(xvar(part.center_indices[j]), zs[tau.centers[j]])
            for j in range(len(part.center_indices))
        ]
        exclusion = []
        if foreign:
            for j in range(len(part.center_indices)):
                guard = DistAtom(2 * r + 1, zs[tau.centers[j]], w)
                body = Not(disj([Eq(w, xvar(m)) for m in foreign]))
                exclusion.append(Forall(w, Implies(guard, body)))
        matrix = conj([completeness] + center_eqs + atomic_diagram(tau.carrier, zs) + exclusion)
        block: Formula = matrix
        for j in reversed(range(big_n)):
            block = Exists(zs[j], And(DistAtom(r_i, anchor, zs[j]), block))
        blocks.append(block)
    return disj(blocks)


def type_to_bsnf(
    rho: RType,
    d: int,
    signature: Signature,
    budget: Budget = DEFAULT_BUDGET,
) -> BsnfForm:
    """BSNF formula d-equivalent to the type formula of ``rho``.

    Shape: no existential prefix; one universal variable that is matched
    against each component's first center and then constrains that
    component locally.
    """
    split = component_split(rho)
    y = "y0"
    conjuncts = []
    radius = 0
    for part in split.parts:
        gamma = component_formula(part, rho, y, d, signature, budget)
        first = f"x{part.center_indices[0] + 1}"
        conjuncts.append(Implies(Eq(y, first), gamma))
        chain = part.local_radius
        if len(split.parts) > 1:
            chain += 2 * rho.radius + 1
        radius = max(radius, chain)
    return BsnfForm((), y, conj(conjuncts), radius)


# ---------------------------------------------------------------------------
# combination rules

def _rename_apart(
    forms: list[BsnfForm],
) -> tuple[list[tuple[tuple[str, ...], Formula]], str]:
    """Give every prefix variable a fresh name and share one universal z."""
    used: set[str] = set()
    for b in forms:
        used |= all_var_names(b.matrix)
        used |= set(b.prefix) | {b.univ}
    z = fresh_names("z", set(used), 1)[0]
    out = []
    taken = set(used) | {z}
    for b in forms:
        new_names = fresh_names("y", taken, len(b.prefix))
        mapping = dict(zip(b.prefix, new_names))
        mapping[b.univ] = z
        out.append((tuple(new_names), substitute_avoiding(b.matrix, mapping)))
    return out, z


def combine_and(b1: BsnfForm, b2: BsnfForm) -> BsnfForm:
    """Conjunction of two BSNF formulas as one BSNF formula (exact)."""
    renamed, z = _rename_apart([b1, b2])
    (p1, m1), (p2, m2) = renamed
    return BsnfForm(p1 + p2, z, And(m1, m2), max(b1.radius, b2.radius))


def combine_or(b1: BsnfForm, b2: BsnfForm) -> BsnfForm:
    """Disjunction via a two-witness selector.

    Equivalent to the plain disjunction on every structure with at least
    two elements; on one-element structures both selector values coincide
    and only the first branch can fire.
    """
    renamed, z = _rename_apart([b1, b2])
    (p1, m1), (p2, m2) = renamed
    used = set(p1) | set(p2) | {z} | all_var_names(m1) | all_var_names(m2)
    used |= set(free_vars(m1)) | set(free_vars(m2))
    sa, sb = fresh_names("y", set(used), 2)
    matrix = Or(And(Eq(sa, sb), m1), And(Not(Eq(sa, sb)), m2))
    return BsnfForm((sa, sb) + p1 + p2, z, matrix, max(b1.radius, b2.radius))


# ---------------------------------------------------------------------------
# the full pipeline

@dataclass(frozen=True)
class PipelineResult:
    hnf: HnfFormula
    positive: HnfFormula
    bsnf: BsnfForm
    compilation: HnfCompilation


def _combine_tree(node, leaf_forms: dict) -> BsnfForm:
    if isinstance(node, (HCounting, HTypeAtom)):
        return leaf_forms[id(node)]
    if isinstance(node, HAnd):
        return _fold(node.children, leaf_forms, combine_and, empty="true")
    if isinstance(node, HOr):
        return _fold(node.children, leaf_forms, combine_or, empty="false")
    raise InputError(f"positive HNF expected, found {node!r}")


def _fold(children, leaf_forms, op, empty: str) -> BsnfForm:
    if not children:
        return _constant_bsnf(empty == "true", ())
    if len(children) == 1:
        return _combine_tree(children[0], leaf_forms)
    mid = len(children) // 2
    left = _fold(children[:mid], leaf_forms, op, empty)
    right = _fold(children[mid:], leaf_forms, op, empty)
    return op(left, right)


def _constant_bsnf(value: bool, mention: tuple[str, ...]) -> BsnfForm:
    z = "z"
    core: Formula = Eq(z, z) if value else Not(Eq(z, z))
    matrix = conj([Eq(x, x) for x in mention] + [core])
    return BsnfForm((), z, matrix, 0)


def fo_to_bsnf_detailed(
    phi: Formula,
    d: int,
    signature: Signature,
    budget: Budget = DEFAULT_BUDGET,
) -> PipelineResult:
    compilation = fo_to_hnf_detailed(phi, d, signature, budget)
    positive = hnf_to_positive(compilation.hnf, d, signature, budget)
    leaf_forms: dict[int, BsnfForm] = {}
    for leaf in positive.leaves():
        if isinstance(leaf, HCounting):
            leaf_forms[id(leaf)] = counting_to_bsnf(leaf.sentence)
        else:
            base = type_to_bsnf(leaf.rtype, d, signature, budget)
            mapping = {f"x{i + 1}": v for i, v in enumerate(leaf.variables)}
            matrix = substitute_avoiding(base.matrix, mapping)
            leaf_forms[id(leaf)] = BsnfForm(base.prefix, base.univ, matrix, base.radius)
    root = positive.root
    if isinstance(root, HOr) and not root.children:
        return PipelineResult(
            compilation.hnf,
            positive,
            _constant_bsnf(False, tuple(sorted(free_vars(phi)))),
            compilation,
        )
    bsnf = _combine_tree(root, leaf_forms)
    return PipelineResult(compilation.hnf, positive, bsnf, compilation)


def fo_to_bsnf(
    phi: Formula,
    d: int,
    signature: Signature,
    budget: Budget = DEFAULT_BUDGET,
) -> BsnfForm:
    """Compile a formula into a d-equivalent BSNF formula.

    The guarantee is relative to the witness budget: the output agrees
    with the input on every d-bounded structure up to the witness pool
    size, with locality radius at most (n+1) * (2 * 4**q + 1).
    """
    return fo_to_bsnf_detailed(phi, d, signature, budget).bsnf


def radius_bound(phi: Formula, signature: Signature) -> int:
    """The radius bound (n+1)(2*4^q+1) from the compilation contract."""
    q = quantifier_rank(phi, signature)
    n = len(free_vars(phi))
    return (n + 1) * (2 * 4**q + 1)
