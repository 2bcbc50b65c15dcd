"""BSNF syntax: prefix-normal local formulas, recognition, locality checking.

A formula is in Barthelmann-Schwentick normal form when it looks like
``exists y1 .. yn forall z M`` and every quantifier inside the matrix M is
introduced behind a bounded-distance guard whose anchor chains back to z.
The locality radius is the largest anchor-chain depth reached by a guard.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import InputError
from .semantics import model_check
from .structures import Structure, induced, neighborhood
from .syntax import (
    And,
    Count,
    DistAtom,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Rel,
    free_vars,
)


@dataclass(frozen=True)
class BsnfForm:
    """Existential prefix, one universal variable, guarded-local matrix."""

    prefix: tuple[str, ...]
    univ: str
    matrix: Formula
    radius: int

    def __post_init__(self):
        if len(set(self.prefix)) != len(self.prefix) or self.univ in self.prefix:
            raise InputError("prefix variables must be distinct and differ from z")

    def free_variables(self) -> frozenset[str]:
        return free_vars(self.matrix) - set(self.prefix) - {self.univ}

    def to_formula(self) -> Formula:
        out: Formula = Forall(self.univ, self.matrix)
        for y in reversed(self.prefix):
            out = Exists(y, out)
        return out


@dataclass(frozen=True)
class BsnfRejection:
    reason: str

    def __bool__(self) -> bool:
        return False


def is_bsnf(phi: Formula) -> BsnfForm | BsnfRejection:
    """Recognize the prefix shape and check every matrix quantifier is guarded.

    Guards are the patterns ``exists w. (dist<=b(anchor, w) & ...)`` and
    ``forall w. (dist<=b(anchor, w) -> ...)`` where the anchor is the
    universal variable or a variable introduced by an enclosing guard.
    The reported radius is the maximum over guards (and stray distance
    atoms) of the guard bound plus the anchor's own chain depth.
    """
    prefix: list[str] = []
    node = phi
    while isinstance(node, Exists):
        if node.var in prefix:
            return BsnfRejection(f"prefix variable {node.var} repeats")
        prefix.append(node.var)
        node = node.sub
    if not isinstance(node, Forall):
        return BsnfRejection("missing universal quantifier after the existential prefix")
    z = node.var
    if z in prefix:
        return BsnfRejection(f"universal variable {z} collides with the prefix")
    matrix = node.sub

    radius = [0]
    anchors: dict[str, int] = {z: 0}

    def guard_of(quant: Formula) -> tuple[str, int, Formula] | None:
        """Return (bound var, chain depth, body) when ``quant`` is guarded."""
        if isinstance(quant, Exists) and isinstance(quant.sub, And):
            guard, body = quant.sub.left, quant.sub.right
        elif isinstance(quant, Forall) and isinstance(quant.sub, Implies):
            guard, body = quant.sub.left, quant.sub.right
        else:
            return None
        if not isinstance(guard, DistAtom):
            return None
        w = quant.var
        if guard.left == w and guard.right in anchors and guard.right != w:
            anchor = guard.right
        elif guard.right == w and guard.left in anchors and guard.left != w:
            anchor = guard.left
        else:
            return None
        return w, anchors[anchor] + guard.bound, body

    def scan(n: Formula) -> str | None:
        if isinstance(n, (Eq, Rel)):
            return None
        if isinstance(n, DistAtom):
            known = [anchors[v] for v in (n.left, n.right) if v in anchors]
            if known:
                radius[0] = max(radius[0], n.bound + max(known))
            return None
        if isinstance(n, Not):
            return scan(n.sub)
        if isinstance(n, (Or, And, Implies, Iff)):
            return scan(n.left) or scan(n.right)
        if isinstance(n, Count):
            return f"counting quantifier over {n.var} is not distance-guarded"
        if isinstance(n, (Exists, Forall)):
            if n.var == z:
                return f"the universal variable {z} is re-bound in the matrix"
            got = guard_of(n)
            if got is None:
                return f"quantifier over {n.var} is not distance-guarded"
            w, depth, body = got
            radius[0] = max(radius[0], depth)
            had = anchors.get(w)
            anchors[w] = depth
            err = scan(body)
            if had is None:
                del anchors[w]
            else:
                anchors[w] = had
            return err
        return f"unknown node {n!r}"

    err = scan(matrix)
    if err:
        return BsnfRejection(err)
    return BsnfForm(tuple(prefix), z, matrix, radius[0])


@dataclass(frozen=True)
class LocalityReport:
    local: bool
    witness: tuple[Structure, dict] | None = None

    def __bool__(self) -> bool:
        return self.local


def semantic_locality_check(
    phi: Formula,
    around: Sequence[str],
    r: int,
    pool: Sequence[Structure],
) -> LocalityReport:
    """Test r-locality of ``phi`` around the given variables on a pool.

    For every pool structure and assignment, the truth value must survive
    restriction to the substructure induced by the other free variables'
    values together with the r-neighborhood of the around-values.
    """
    fv = free_vars(phi)
    if not set(around) <= fv:
        raise InputError(f"around-variables {around} must be free in the formula")
    others = sorted(fv - set(around))
    around = list(around)
    for a_struct in pool:
        names = others + around
        assignments = _all_assignments(a_struct.size, len(names))
        for values in assignments:
            asg = dict(zip(names, values))
            whole = model_check(a_struct, phi, asg)
            carrier = sorted(
                set(values[: len(others)])
                | neighborhood(a_struct, [asg[v] for v in around], r)
            )
            small = induced(a_struct, carrier)
            remap = {e: i for i, e in enumerate(carrier)}
            small_asg = {v: remap[e] for v, e in asg.items()}
            if model_check(small, phi, small_asg) != whole:
                return LocalityReport(False, (a_struct, asg))
    return LocalityReport(True)


def _all_assignments(size: int, arity: int):
    out = [()]
    for _ in range(arity):
        out = [t + (e,) for t in out for e in range(size)]
    return out
