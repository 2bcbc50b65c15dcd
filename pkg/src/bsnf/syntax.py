"""First-order formula ASTs with size and quantifier-rank accounting.

The core language is negation, disjunction, existential quantification,
equality atoms and relation atoms.  Everything else (conjunction, both
arrows, universal quantification, counting quantifiers, bounded-distance
atoms) is sugar with a deterministic expansion into the core; ``size``
counts the word length of that expansion.

Distance-guarded quantification is not a separate node: a guard is the
syntactic pattern ``exists w. (dist<=b(anchor, w) & phi)`` respectively
``forall w. (dist<=b(anchor, w) -> phi)``, which keeps every formula
printable in the concrete grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .errors import InputError
from .structures import Signature

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class Formula:
    """Base class; subclasses are frozen dataclasses."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return Or(self, other)

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Eq(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Rel(Formula):
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    sub: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    sub: Formula


@dataclass(frozen=True)
class Count(Formula):
    """Counting quantifier: at least k / exactly k witnesses."""

    mode: str  # ">=" or "="
    k: int
    var: str
    sub: Formula

    def __post_init__(self):
        if self.mode not in (">=", "="):
            raise InputError(f"counting mode must be '>=' or '=', got {self.mode!r}")
        if self.k < 0:
            raise InputError("counting bound must be a natural number")
        if self.mode == ">=" and self.k == 0:
            raise InputError("threshold counting is only defined for k >= 1")


@dataclass(frozen=True)
class DistAtom(Formula):
    """dist<=bound(left, right): Gaifman distance at most ``bound``."""

    bound: int
    left: str
    right: str

    def __post_init__(self):
        if self.bound < 0:
            raise InputError("distance bound must be a natural number")


def conj(parts: list[Formula]) -> Formula:
    """Balanced conjunction; empty list is the fixed tautology x0=x0."""
    if not parts:
        return TAUTOLOGY
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return And(conj(parts[:mid]), conj(parts[mid:]))


def disj(parts: list[Formula]) -> Formula:
    """Balanced disjunction; empty list is the negated tautology."""
    if not parts:
        return Not(TAUTOLOGY)
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return Or(disj(parts[:mid]), disj(parts[mid:]))


TAUTOLOGY = Eq("x0", "x0")


# ---------------------------------------------------------------------------
# variables

def free_vars(phi: Formula) -> frozenset[str]:
    out: set[str] = set()
    _collect_free(phi, set(), out)
    return frozenset(out)


def _collect_free(phi: Formula, bound: set[str], out: set[str]) -> None:
    stack = [(phi, frozenset(bound))]
    while stack:
        node, b = stack.pop()
        if isinstance(node, Eq):
            out.update(v for v in (node.left, node.right) if v not in b)
        elif isinstance(node, DistAtom):
            out.update(v for v in (node.left, node.right) if v not in b)
        elif isinstance(node, Rel):
            out.update(v for v in node.args if v not in b)
        elif isinstance(node, Not):
            stack.append((node.sub, b))
        elif isinstance(node, (Or, And, Implies, Iff)):
            stack.append((node.left, b))
            stack.append((node.right, b))
        elif isinstance(node, (Exists, Forall)):
            stack.append((node.sub, b | {node.var}))
        elif isinstance(node, Count):
            stack.append((node.sub, b | {node.var}))
        else:
            raise InputError(f"unknown formula node {node!r}")


def all_var_names(phi: Formula) -> set[str]:
    """Every variable name occurring anywhere, free or bound."""
    out: set[str] = set()
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, (Eq, DistAtom)):
            out.add(node.left)
            out.add(node.right)
        elif isinstance(node, Rel):
            out.update(node.args)
        elif isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (Or, And, Implies, Iff)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, (Exists, Forall, Count)):
            out.add(node.var)
            stack.append(node.sub)
    return out


def fresh_names(base: str, used: set[str], count: int = 1) -> list[str]:
    """Deterministic fresh variables: base with the smallest unused suffixes."""
    out: list[str] = []
    i = 1
    while len(out) < count:
        cand = f"{base}{i}"
        if cand not in used:
            used.add(cand)
            out.append(cand)
        i += 1
    return out


def substitute(phi: Formula, mapping: dict[str, str]) -> Formula:
    """Rename free variable occurrences; refuses capture instead of fixing it."""
    if not mapping:
        return phi

    def sub_var(v: str, bound: frozenset[str]) -> str:
        if v in bound or v not in mapping:
            return v
        return mapping[v]

    def rec(node: Formula, bound: frozenset[str]) -> Formula:
        if isinstance(node, Eq):
            return Eq(sub_var(node.left, bound), sub_var(node.right, bound))
        if isinstance(node, DistAtom):
            return DistAtom(node.bound, sub_var(node.left, bound), sub_var(node.right, bound))
        if isinstance(node, Rel):
            return Rel(node.name, tuple(sub_var(a, bound) for a in node.args))
        if isinstance(node, Not):
            return Not(rec(node.sub, bound))
        if isinstance(node, (Or, And, Implies, Iff)):
            return type(node)(rec(node.left, bound), rec(node.right, bound))
        if isinstance(node, (Exists, Forall)):
            _check_capture(node.var, node.sub, bound)
            return type(node)(node.var, rec(node.sub, bound | {node.var}))
        if isinstance(node, Count):
            _check_capture(node.var, node.sub, bound)
            return Count(node.mode, node.k, node.var, rec(node.sub, bound | {node.var}))
        raise InputError(f"unknown formula node {node!r}")

    def _check_capture(binder: str, body: Formula, bound: frozenset[str]) -> None:
        for src, dst in mapping.items():
            if dst == binder and src not in bound and src in free_vars(body):
                raise InputError(
                    f"substituting {src} -> {dst} would be captured by a binder"
                )

    return rec(phi, frozenset())


# ---------------------------------------------------------------------------
# desugaring into the core language

def substitute_avoiding(phi: Formula, mapping: dict[str, str]) -> Formula:
    """Capture-avoiding variant: binders clashing with targets are renamed."""
    if not mapping:
        return phi
    targets = set(mapping.values())

    def rec(node: Formula, live: dict[str, str], taken: set[str]) -> Formula:
        if isinstance(node, Eq):
            return Eq(live.get(node.left, node.left), live.get(node.right, node.right))
        if isinstance(node, DistAtom):
            return DistAtom(
                node.bound, live.get(node.left, node.left), live.get(node.right, node.right)
            )
        if isinstance(node, Rel):
            return Rel(node.name, tuple(live.get(a, a) for a in node.args))
        if isinstance(node, Not):
            return Not(rec(node.sub, live, taken))
        if isinstance(node, (Or, And, Implies, Iff)):
            return type(node)(rec(node.left, live, taken), rec(node.right, live, taken))
        if isinstance(node, (Exists, Forall, Count)):
            var = node.var
            inner = {k: v for k, v in live.items() if k != var}
            if var in targets:
                new_var = fresh_names(var + "_", set(taken) | targets | set(inner), 1)[0]
                inner[var] = new_var
                var = new_var
            taken = taken | {var}
            body = rec(node.sub, inner, taken)
            if isinstance(node, Count):
                return Count(node.mode, node.k, var, body)
            return type(node)(var, body)
        raise InputError(f"unknown formula node {node!r}")

    return rec(phi, dict(mapping), set(all_var_names(phi)) | targets)


def desugar(phi: Formula, signature: Signature | None = None) -> Formula:
    """Expand all sugar into the core (not / or / exists / atoms).

    ``signature`` is only required when the formula contains bounded
    distance atoms, whose expansion enumerates the signature's relations.
    """
    if isinstance(phi, (Eq, Rel)):
        return phi
    if isinstance(phi, Not):
        return Not(desugar(phi.sub, signature))
    if isinstance(phi, Or):
        return Or(desugar(phi.left, signature), desugar(phi.right, signature))
    if isinstance(phi, And):
        return Not(Or(Not(desugar(phi.left, signature)), Not(desugar(phi.right, signature))))
    if isinstance(phi, Implies):
        return Or(Not(desugar(phi.left, signature)), desugar(phi.right, signature))
    if isinstance(phi, Iff):
        a = desugar(phi.left, signature)
        b = desugar(phi.right, signature)
        return Not(Or(Not(Or(Not(a), b)), Not(Or(Not(b), a))))
    if isinstance(phi, Exists):
        return Exists(phi.var, desugar(phi.sub, signature))
    if isinstance(phi, Forall):
        return Not(Exists(phi.var, Not(desugar(phi.sub, signature))))
    if isinstance(phi, Count):
        from .constructions import counting_expand

        return desugar(counting_expand(phi.mode, phi.k, phi.var, phi.sub), signature)
    if isinstance(phi, DistAtom):
        if signature is None:
            raise InputError("desugaring dist<= atoms requires a signature")
        from .constructions import dist_formula

        base = dist_formula(signature, phi.bound)
        return desugar(substitute(base, {"x": phi.left, "y": phi.right}), signature)
    raise InputError(f"unknown formula node {phi!r}")


def size(phi: Formula, signature: Signature | None = None) -> int:
    """Word length of the fully desugared formula.

    Alphabet: relation symbols, variables, comma, and {=, exists, not, or,
    parentheses}; every symbol counts one.  Convention: atoms render as
    ``x=y`` (3) and ``R(x1,...,xk)`` (2k+2), negation prefixes one symbol,
    disjunctions are wrapped in parentheses (3 extra), quantifiers prefix
    two symbols.
    """
    return _core_size(desugar(phi, signature))


def _core_size(phi: Formula) -> int:
    total = 0
    stack = [phi]
    while stack:
        node = stack.pop()
        if isinstance(node, Eq):
            total += 3
        elif isinstance(node, Rel):
            total += 2 * len(node.args) + 2
        elif isinstance(node, Not):
            total += 1
            stack.append(node.sub)
        elif isinstance(node, Or):
            total += 3
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Exists):
            total += 2
            stack.append(node.sub)
        else:
            raise InputError(f"size: non-core node {node!r} survived desugaring")
    return total


def quantifier_rank(phi: Formula, signature: Signature | None = None) -> int:
    """Maximal quantifier nesting depth of the desugared formula."""
    core = desugar(phi, signature)
    depth = 0
    stack: list[tuple[Formula, int]] = [(core, 0)]
    while stack:
        node, d = stack.pop()
        if isinstance(node, (Eq, Rel)):
            depth = max(depth, d)
        elif isinstance(node, Not):
            stack.append((node.sub, d))
        elif isinstance(node, Or):
            stack.append((node.left, d))
            stack.append((node.right, d))
        elif isinstance(node, Exists):
            stack.append((node.sub, d + 1))
    return depth


# ---------------------------------------------------------------------------
# printing (deterministic, fully parenthesized, parseable)

_BINARY_OPS = {Or: "|", And: "&", Implies: "->", Iff: "<->"}


def to_text(phi: Formula) -> str:
    """Deterministic concrete syntax; ``parse(to_text(phi))`` equals ``phi``.

    Binary connectives always print their own parentheses; quantifier
    bodies print bare and extend maximally, so quantified children of
    binary nodes get an extra pair.
    """
    parts: list[str] = []
    # Explicit work stack: pipeline outputs nest thousands deep.
    # Items are literal strings or (node, as_operand) pairs.
    stack: list[object] = [(phi, False)]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        node, as_operand = item
        if isinstance(node, Eq):
            parts.append(f"{node.left} = {node.right}")
        elif isinstance(node, DistAtom):
            parts.append(f"dist<={node.bound}({node.left}, {node.right})")
        elif isinstance(node, Rel):
            parts.append(f"{node.name}({', '.join(node.args)})")
        elif isinstance(node, Not):
            parts.append("~")
            if isinstance(node.sub, (Rel, DistAtom)):
                stack.append((node.sub, False))
            else:
                stack.append(")")
                stack.append((node.sub, False))
                stack.append("(")
        elif isinstance(node, (Or, And, Implies, Iff)):
            op = _BINARY_OPS[type(node)]
            stack.append(")")
            stack.append((node.right, True))
            stack.append(f" {op} ")
            stack.append((node.left, True))
            stack.append("(")
        elif isinstance(node, (Exists, Forall, Count)):
            if as_operand:
                stack.append(")")
                stack.append((node, False))
                stack.append("(")
                continue
            if isinstance(node, Count):
                parts.append(f"exists{node.mode}{node.k} {node.var}. ")
            elif isinstance(node, Exists):
                parts.append(f"exists {node.var}. ")
            else:
                parts.append(f"forall {node.var}. ")
            stack.append((node.sub, False))
        else:
            raise InputError(f"unknown formula node {node!r}")
    return "".join(parts)


def subformulas(phi: Formula) -> Iterator[Formula]:
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Not):
            stack.append(node.sub)
        elif isinstance(node, (Or, And, Implies, Iff)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, (Exists, Forall, Count)):
            stack.append(node.sub)


def check_ident(name: str) -> str:
    if not _IDENT.match(name):
        raise InputError(f"invalid identifier {name!r}")
    return name
