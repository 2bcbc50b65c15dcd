"""Derived formula constructions: bounded distance, counting, type formulas."""

from __future__ import annotations

from .errors import InputError
from .rtypes import RType
from .structures import Signature
from .syntax import (
    And,
    Count,
    DistAtom,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Rel,
    all_var_names,
    conj,
    disj,
    fresh_names,
    substitute,
)


def _edge_formula(signature: Signature, x: str, y: str, used: set[str]) -> Formula:
    """Gaifman adjacency of two distinct elements as a disjunction.

    For every relation and every ordered pair of distinct argument
    positions, assert a tuple with x and y at those positions, remaining
    positions existentially closed.
    """
    disjuncts: list[Formula] = []
    for name, arity in signature.relations:
        if arity < 2:
            continue
        for i in range(arity):
            for j in range(arity):
                if i == j:
                    continue
                others = fresh_names("w", set(used) | {x, y}, arity)
                args = list(others[:arity])
                args[i] = x
                args[j] = y
                atom: Formula = Rel(name, tuple(args))
                for w in reversed(args):
                    if w not in (x, y):
                        atom = Exists(w, atom)
                disjuncts.append(atom)
    return disj(disjuncts)


def dist_formula(signature: Signature, d: int) -> Formula:
    """A formula with free x, y that holds iff Gaifman distance <= d.

    Doubling construction.  A bound of 2k routes both half-paths through
    one shared copy of the bound-k formula behind universally quantified
    endpoints, so each doubling adds a constant number of symbols and the
    total size is proportional to the signature size times log d.
    """
    if d < 0:
        raise InputError("distance bound must be a natural number")
    used = {"x", "y"}
    counter = [1]

    def build(bound: int, a: str, b: str) -> Formula:
        if bound == 0:
            return Eq(a, b)
        if bound == 1:
            return Or(Eq(a, b), _edge_formula(signature, a, b, used))
        i = counter[0]
        counter[0] += 1
        mid, u, v = f"m{i}", f"u{i}", f"v{i}"
        used.update((mid, u, v))
        if bound % 2 == 0:
            hop = Or(And(Eq(u, a), Eq(v, mid)), And(Eq(u, mid), Eq(v, b)))
            half = build(bound // 2, u, v)
            return Exists(mid, Forall(u, Forall(v, Implies(hop, half))))
        return Exists(mid, And(build(1, a, mid), build(bound - 1, mid, b)))

    return build(d, "x", "y")


def counting_expand(mode: str, k: int, var: str, phi: Formula) -> Formula:
    """Core-language expansion of a counting quantifier.

    At-least-k uses k existentials, pairwise distinctness, and a single
    copy of the body behind a universally quantified membership guard,
    which keeps the size quadratic in k plus one body.
    """
    if mode not in (">=", "="):
        raise InputError(f"counting mode must be '>=' or '=', got {mode!r}")
    if k < 0:
        raise InputError("counting bound must be a natural number")
    if mode == "=":
        if k == 0:
            return Not(Exists(var, phi))
        return And(
            counting_expand(">=", k, var, phi),
            Not(counting_expand(">=", k + 1, var, phi)),
        )
    if k == 0:
        raise InputError("threshold counting is only defined for k >= 1")
    if k == 1:
        return Exists(var, phi)
    used = all_var_names(phi) | {var}
    ys = fresh_names("y", set(used), k)
    z = fresh_names("z", set(used) | set(ys), 1)[0]
    distinct = [Not(Eq(ys[i], ys[j])) for i in range(k) for j in range(i + 1, k)]
    member = disj([Eq(z, y) for y in ys])
    body = substitute(phi, {var: z})
    matrix = conj(distinct + [Forall(z, Implies(member, body))])
    out: Formula = matrix
    for y in reversed(ys):
        out = Exists(y, out)
    return out


def type_formula(tau: RType) -> Formula:
    """A formula with free x1..xn holding of a tuple iff its r-neighborhood
    is isomorphic to ``tau``.

    Shape: existentials z1..zN enumerate the carrier, each introduced
    directly behind its distance guard; the matrix asserts ball
    completeness, the center equations, and the full atomic diagram of
    the carrier.
    """
    carrier = tau.carrier
    n = tau.n_centers
    big_n = carrier.size
    xs = [f"x{i + 1}" for i in range(n)]
    zs = [f"z{j + 1}" for j in range(big_n)]
    z = "z0"
    r = tau.radius

    def ball_guard(target: str) -> Formula:
        return disj([DistAtom(r, x, target) for x in xs])

    completeness = Forall(z, Implies(ball_guard(z), disj([Eq(z, zj) for zj in zs])))
    center_eqs = [Eq(xs[i], zs[tau.centers[i]]) for i in range(n)]
    diagram = atomic_diagram(carrier, zs)
    matrix = conj([completeness] + center_eqs + diagram)
    out: Formula = matrix
    for j in reversed(range(big_n)):
        out = Exists(zs[j], And(ball_guard(zs[j]), out))
    return out


def atomic_diagram(carrier, zs: list[str]) -> list[Formula]:
    """All atomic and negated atomic facts of the carrier, over zs.

    Includes distinctness of the carrier elements (negated equality atoms),
    so models must embed the carrier exactly.
    """
    facts: list[Formula] = []
    for i in range(len(zs)):
        for j in range(i + 1, len(zs)):
            facts.append(Not(Eq(zs[i], zs[j])))
    for name, arity in carrier.sig.relations:
        present = carrier.rels[name]
        all_tuples: list[tuple[int, ...]] = [()]
        for _ in range(arity):
            all_tuples = [t + (e,) for t in all_tuples for e in range(carrier.size)]
        for t in sorted(all_tuples):
            atom = Rel(name, tuple(zs[e] for e in t))
            facts.append(atom if t in present else Not(atom))
    return facts
