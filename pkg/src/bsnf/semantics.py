"""Model checking of first-order formulas on finite structures.

Two evaluators share the same semantics:

``model_check_naive``
    Textbook Tarskian recursion.  Counting quantifiers count witnesses
    directly; bounded-distance atoms consult BFS distances.  Exponential
    in quantifier nesting, used as the independent reference.

``evaluate`` / ``model_check``
    Bottom-up relational evaluation.  The formula is first rewritten by
    scope minimization (quantifiers distribute over their junctions,
    independent conjuncts split, equality conjuncts propagate), then every
    subformula is evaluated once as a table of satisfying assignments over
    its free variables.  Tables are memoized per structure under keys that
    ignore bound-variable names, so the renamed-apart copies produced by
    normal-form combinators share work.  This is what makes the outputs of
    the compilation pipeline, whose existential prefixes run into the
    hundreds, checkable against exhaustive pools.
"""

from __future__ import annotations

from itertools import product
from typing import Mapping, Sequence

from .errors import InputError, ResourceError
from .structures import Structure
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

Assignment = Mapping[str, int]

_MAX_ROWS = 2_000_000
_MAX_WIDTH = 9


# ---------------------------------------------------------------------------
# naive reference evaluator

def model_check_naive(a_struct: Structure, phi: Formula, asg: Assignment) -> bool:
    """Direct recursive evaluation; reference implementation."""
    missing = free_vars(phi) - set(asg)
    if missing:
        raise InputError(f"assignment does not cover free variables {sorted(missing)}")
    env = dict(asg)
    return _naive(a_struct, phi, env)


def _naive(s: Structure, phi: Formula, env: dict[str, int]) -> bool:
    if isinstance(phi, Eq):
        return env[phi.left] == env[phi.right]
    if isinstance(phi, Rel):
        return tuple(env[a] for a in phi.args) in s.rels[phi.name]
    if isinstance(phi, DistAtom):
        return s.distance_row(env[phi.left])[env[phi.right]] <= phi.bound
    if isinstance(phi, Not):
        return not _naive(s, phi.sub, env)
    if isinstance(phi, Or):
        return _naive(s, phi.left, env) or _naive(s, phi.right, env)
    if isinstance(phi, And):
        return _naive(s, phi.left, env) and _naive(s, phi.right, env)
    if isinstance(phi, Implies):
        return (not _naive(s, phi.left, env)) or _naive(s, phi.right, env)
    if isinstance(phi, Iff):
        return _naive(s, phi.left, env) == _naive(s, phi.right, env)
    if isinstance(phi, Exists):
        saved = env.get(phi.var)
        hit = False
        for e in range(s.size):
            env[phi.var] = e
            if _naive(s, phi.sub, env):
                hit = True
                break
        _restore(env, phi.var, saved)
        return hit
    if isinstance(phi, Forall):
        saved = env.get(phi.var)
        ok = True
        for e in range(s.size):
            env[phi.var] = e
            if not _naive(s, phi.sub, env):
                ok = False
                break
        _restore(env, phi.var, saved)
        return ok
    if isinstance(phi, Count):
        saved = env.get(phi.var)
        count = 0
        for e in range(s.size):
            env[phi.var] = e
            if _naive(s, phi.sub, env):
                count += 1
        _restore(env, phi.var, saved)
        return count >= phi.k if phi.mode == ">=" else count == phi.k
    raise InputError(f"unknown formula node {phi!r}")


def _restore(env: dict[str, int], var: str, saved: int | None) -> None:
    if saved is None:
        env.pop(var, None)
    else:
        env[var] = saved


# ---------------------------------------------------------------------------
# prepared nodes (internal IR with n-ary junctions and quantifier blocks)

class _P:
    __slots__ = ("free", "binders", "akey")

    def __init__(self, free: frozenset[str], binders: frozenset[str]):
        self.free = free
        self.binders = binders
        self.akey: object = None


class PConst(_P):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        super().__init__(frozenset(), frozenset())
        self.value = value


class PEq(_P):
    __slots__ = ("u", "v")

    def __init__(self, u: str, v: str):
        super().__init__(frozenset((u, v)), frozenset())
        self.u = u
        self.v = v


class PRel(_P):
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: tuple[str, ...]):
        super().__init__(frozenset(args), frozenset())
        self.name = name
        self.args = args


class PDist(_P):
    __slots__ = ("bound", "u", "v")

    def __init__(self, bound: int, u: str, v: str):
        super().__init__(frozenset((u, v)), frozenset())
        self.bound = bound
        self.u = u
        self.v = v


class PNot(_P):
    __slots__ = ("child",)

    def __init__(self, child: _P):
        super().__init__(child.free, child.binders)
        self.child = child


class PAnd(_P):
    __slots__ = ("children",)

    def __init__(self, children: tuple[_P, ...]):
        free = frozenset().union(*(c.free for c in children)) if children else frozenset()
        binders = frozenset().union(*(c.binders for c in children)) if children else frozenset()
        super().__init__(free, binders)
        self.children = children


class POr(_P):
    __slots__ = ("children",)

    def __init__(self, children: tuple[_P, ...]):
        free = frozenset().union(*(c.free for c in children)) if children else frozenset()
        binders = frozenset().union(*(c.binders for c in children)) if children else frozenset()
        super().__init__(free, binders)
        self.children = children


class PExists(_P):
    __slots__ = ("vars", "child")

    def __init__(self, vs: tuple[str, ...], child: _P):
        super().__init__(child.free - set(vs), child.binders | set(vs))
        self.vars = vs
        self.child = child


class PForall(_P):
    __slots__ = ("vars", "child")

    def __init__(self, vs: tuple[str, ...], child: _P):
        super().__init__(child.free - set(vs), child.binders | set(vs))
        self.vars = vs
        self.child = child


class PCount(_P):
    __slots__ = ("mode", "k", "var", "child")

    def __init__(self, mode: str, k: int, var: str, child: _P):
        super().__init__(child.free - {var}, child.binders | {var})
        self.mode = mode
        self.k = k
        self.var = var
        self.child = child


_TRUE = PConst(True)
_FALSE = PConst(False)


def _pand(children: Sequence[_P]) -> _P:
    flat: list[_P] = []
    for c in children:
        if isinstance(c, PConst):
            if not c.value:
                return _FALSE
            continue
        if isinstance(c, PAnd):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        return _TRUE
    if len(flat) == 1:
        return flat[0]
    return PAnd(tuple(flat))


def _por(children: Sequence[_P]) -> _P:
    flat: list[_P] = []
    for c in children:
        if isinstance(c, PConst):
            if c.value:
                return _TRUE
            continue
        if isinstance(c, POr):
            flat.extend(c.children)
        else:
            flat.append(c)
    if not flat:
        return _FALSE
    if len(flat) == 1:
        return flat[0]
    selected = _selector_split(flat)
    if selected is not None:
        return selected
    return POr(tuple(flat))


def _pnot(child: _P) -> _P:
    if isinstance(child, PConst):
        return _FALSE if child.value else _TRUE
    if isinstance(child, PNot):
        return child.child
    return PNot(child)


def _eq_nodes_equal(a: _P, b: _P) -> bool:
    return isinstance(a, PEq) and isinstance(b, PEq) and a.u == b.u and a.v == b.v


def _selector_split(children: list[_P]) -> _P | None:
    """Rewrite (g & r1) | (~g & r2) into (~g | r1) & (g | r2).

    Sound for any g; fires on the equality selectors introduced when
    disjunctions of prefix-normal formulas are fused, and turns the result
    back into independently evaluable branches.
    """
    if len(children) != 2:
        return None
    a, b = children
    if not (isinstance(a, PAnd) and isinstance(b, PAnd)):
        return None
    for ga in a.children:
        pos, neg = None, None
        if isinstance(ga, PEq):
            pos = ga
            for gb in b.children:
                if isinstance(gb, PNot) and _eq_nodes_equal(gb.child, ga):
                    neg = gb
                    break
        if pos is None or neg is None:
            continue
        rest1 = _pand(tuple(c for c in a.children if c is not pos))
        rest2 = _pand(tuple(c for c in b.children if c is not neg))
        return _pand((_por((_pnot(pos), rest1)), _por((pos, rest2))))
    return None


# ---------------------------------------------------------------------------
# preparation: syntax tree -> scope-minimized prepared tree

def prepare(phi: Formula) -> _P:
    node = _prep(phi)
    _assign_keys(node, {})
    return node


def _prep(phi: Formula) -> _P:
    if isinstance(phi, Eq):
        return _TRUE if phi.left == phi.right else PEq(phi.left, phi.right)
    if isinstance(phi, Rel):
        return PRel(phi.name, phi.args)
    if isinstance(phi, DistAtom):
        return _TRUE if phi.left == phi.right else PDist(phi.bound, phi.left, phi.right)
    if isinstance(phi, Not):
        # collapse ~~ chains iteratively
        flips = 0
        inner: Formula = phi
        while isinstance(inner, Not):
            flips += 1
            inner = inner.sub
        node = _prep(inner)
        return _pnot(node) if flips % 2 else node
    if isinstance(phi, And):
        return _pand((_prep(phi.left), _prep(phi.right)))
    if isinstance(phi, Or):
        return _por((_prep(phi.left), _prep(phi.right)))
    if isinstance(phi, Implies):
        return _por((_pnot(_prep(phi.left)), _prep(phi.right)))
    if isinstance(phi, Iff):
        a, b = _prep(phi.left), _prep(phi.right)
        return _pand((_por((_pnot(a), b)), _por((_pnot(b), a))))
    if isinstance(phi, (Exists, Forall)):
        kind = type(phi)
        vs: list[str] = []
        body: Formula = phi
        while isinstance(body, kind):
            vs.append(body.var)
            body = body.sub
        inner = _prep(body)
        if kind is Exists:
            return _push_exists(tuple(vs), inner)
        return _push_forall(tuple(vs), inner)
    if isinstance(phi, Count):
        inner = _prep(phi.sub)
        if phi.mode == "=" and phi.k == 0:
            return _pnot(_push_exists((phi.var,), inner))
        return PCount(phi.mode, phi.k, phi.var, inner)
    raise InputError(f"unknown formula node {phi!r}")


class _Unsafe(Exception):
    pass


def _psubst(node: _P, mapping: dict[str, str]) -> _P:
    """Rename free variables in a prepared tree; raises _Unsafe on capture."""
    live = {k: v for k, v in mapping.items() if k in node.free}
    if not live:
        return node
    if node.binders & set(live.values()):
        raise _Unsafe
    if isinstance(node, PEq):
        return _prep(Eq(live.get(node.u, node.u), live.get(node.v, node.v)))
    if isinstance(node, PDist):
        return _prep(DistAtom(node.bound, live.get(node.u, node.u), live.get(node.v, node.v)))
    if isinstance(node, PRel):
        return PRel(node.name, tuple(live.get(a, a) for a in node.args))
    if isinstance(node, PNot):
        return _pnot(_psubst(node.child, live))
    if isinstance(node, PAnd):
        return _pand(tuple(_psubst(c, live) for c in node.children))
    if isinstance(node, POr):
        return _por(tuple(_psubst(c, live) for c in node.children))
    if isinstance(node, PExists):
        inner = {k: v for k, v in live.items() if k not in node.vars}
        return _push_exists(node.vars, _psubst(node.child, inner))
    if isinstance(node, PForall):
        inner = {k: v for k, v in live.items() if k not in node.vars}
        return _push_forall(node.vars, _psubst(node.child, inner))
    if isinstance(node, PCount):
        inner = {k: v for k, v in live.items() if k != node.var}
        return PCount(node.mode, node.k, node.var, _psubst(node.child, inner))
    raise InputError(f"unknown prepared node {node!r}")


def _push_exists(vs: tuple[str, ...], body: _P) -> _P:
    vs = tuple(v for v in dict.fromkeys(vs) if v in body.free)
    if not vs:
        return body
    if isinstance(body, POr):
        return _por(tuple(_push_exists(vs, c) for c in body.children))
    if isinstance(body, PExists):
        return _push_exists(vs + body.vars, body.child)
    if isinstance(body, PAnd):
        # equality propagation: exists x. (x = t & rest)  ->  rest[x := t]
        for c in body.children:
            if not isinstance(c, PEq):
                continue
            for var, term in ((c.u, c.v), (c.v, c.u)):
                if var in vs and term != var and term not in vs:
                    rest = tuple(x for x in body.children if x is not c)
                    try:
                        new_body = _pand(tuple(_psubst(x, {var: term}) for x in rest))
                    except _Unsafe:
                        continue
                    return _push_exists(tuple(v for v in vs if v != var), new_body)
            if c.u in vs and c.v in vs and c.u != c.v:
                rest = tuple(x for x in body.children if x is not c)
                try:
                    new_body = _pand(tuple(_psubst(x, {c.u: c.v}) for x in rest))
                except _Unsafe:
                    continue
                return _push_exists(tuple(v for v in vs if v != c.u), new_body)
        outside = [c for c in body.children if not (c.free & set(vs))]
        inside = [c for c in body.children if c.free & set(vs)]
        if outside:
            return _pand(tuple(outside) + (_push_exists(vs, _pand(tuple(inside))),))
        clusters = _var_clusters(inside, set(vs))
        if len(clusters) > 1:
            parts = []
            for cluster_vars, cluster_children in clusters:
                parts.append(_push_exists(tuple(sorted(cluster_vars)), _pand(tuple(cluster_children))))
            return _pand(tuple(parts))
    return PExists(vs, body)


def _push_forall(vs: tuple[str, ...], body: _P) -> _P:
    vs = tuple(v for v in dict.fromkeys(vs) if v in body.free)
    if not vs:
        return body
    if isinstance(body, PAnd):
        return _pand(tuple(_push_forall(vs, c) for c in body.children))
    if isinstance(body, PForall):
        return _push_forall(vs + body.vars, body.child)
    if isinstance(body, POr):
        # forall x. (~(x = t) | rest)  ->  rest[x := t]
        for c in body.children:
            if not (isinstance(c, PNot) and isinstance(c.child, PEq)):
                continue
            eq = c.child
            for var, term in ((eq.u, eq.v), (eq.v, eq.u)):
                if var in vs and term != var and term not in vs:
                    rest = tuple(x for x in body.children if x is not c)
                    try:
                        new_body = _por(tuple(_psubst(x, {var: term}) for x in rest))
                    except _Unsafe:
                        continue
                    return _push_forall(tuple(v for v in vs if v != var), new_body)
        # forall x. (~(x=t1 | ... | x=tk) | rest)  ->  AND_i rest[x := t_i]
        for c in body.children:
            if not (isinstance(c, PNot) and isinstance(c.child, POr)):
                continue
            terms = _eq_disjunction_terms(c.child, set(vs))
            if terms is None:
                continue
            var, values = terms
            rest = tuple(x for x in body.children if x is not c)
            try:
                branches = tuple(
                    _por(tuple(_psubst(x, {var: t}) for x in rest)) for t in values
                )
            except _Unsafe:
                continue
            return _push_forall(tuple(v for v in vs if v != var), _pand(branches))
        outside = [c for c in body.children if not (c.free & set(vs))]
        inside = [c for c in body.children if c.free & set(vs)]
        if outside:
            return _por(tuple(outside) + (_push_forall(vs, _por(tuple(inside))),))
        # fall back to the dual: forall = not exists not
        return _pnot(_push_exists(vs, _pand(tuple(_pnot(c) for c in body.children))))
    if isinstance(body, PNot):
        return _pnot(_push_exists(vs, body.child))
    return PForall(vs, body)


def _eq_disjunction_terms(node: POr, vs: set[str]) -> tuple[str, list[str]] | None:
    """Match (x=t1 | ... | x=tk) with one quantified x and terms outside vs."""
    var = None
    values: list[str] = []
    for c in node.children:
        if not isinstance(c, PEq):
            return None
        if c.u in vs and c.v not in vs:
            v, t = c.u, c.v
        elif c.v in vs and c.u not in vs:
            v, t = c.v, c.u
        else:
            return None
        if var is None:
            var = v
        elif var != v:
            return None
        values.append(t)
    if var is None:
        return None
    return var, values


def _var_clusters(children: list[_P], vs: set[str]) -> list[tuple[set[str], list[_P]]]:
    """Group conjuncts into clusters connected via shared quantified vars."""
    parent: dict[str, str] = {v: v for v in vs}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in children:
        touched = sorted(c.free & vs)
        for a, b in zip(touched, touched[1:]):
            parent[find(a)] = find(b)
    clusters: dict[str, tuple[set[str], list[_P]]] = {}
    for c in children:
        root = find(sorted(c.free & vs)[0])
        cluster = clusters.setdefault(root, (set(), []))
        cluster[0].update(c.free & vs)
        cluster[1].append(c)
    return [clusters[k] for k in sorted(clusters)]


def _assign_keys(node: _P, env: dict[str, str]) -> object:
    """Compute memo keys that ignore bound-variable names."""

    def tr(v: str) -> str:
        return env.get(v, v)

    if isinstance(node, PConst):
        key = ("const", node.value)
    elif isinstance(node, PEq):
        key = ("eq", tr(node.u), tr(node.v))
    elif isinstance(node, PRel):
        key = ("rel", node.name, tuple(tr(a) for a in node.args))
    elif isinstance(node, PDist):
        key = ("dist", node.bound, tr(node.u), tr(node.v))
    elif isinstance(node, PNot):
        key = ("not", _assign_keys(node.child, env))
    elif isinstance(node, (PAnd, POr)):
        kind = "and" if isinstance(node, PAnd) else "or"
        key = (kind, tuple(sorted((_assign_keys(c, env) for c in node.children), key=repr)))
    elif isinstance(node, (PExists, PForall)):
        kind = "ex" if isinstance(node, PExists) else "fa"
        inner = dict(env)
        for i, v in enumerate(node.vars):
            inner[v] = f"β{len(env) + i}"
        key = (kind, len(node.vars), _assign_keys(node.child, inner))
    elif isinstance(node, PCount):
        inner = dict(env)
        inner[node.var] = f"β{len(env)}"
        key = ("count", node.mode, node.k, _assign_keys(node.child, inner))
    else:
        raise InputError(f"unknown prepared node {node!r}")
    node.akey = key
    return key


# ---------------------------------------------------------------------------
# relational evaluation

Table = tuple[tuple[str, ...], set[tuple[int, ...]]]


def _guard(rows_estimate: int) -> None:
    if rows_estimate > _MAX_ROWS:
        raise ResourceError(
            f"relational evaluation would materialize about {rows_estimate} rows; "
            "the formula resists scope minimization at this scale"
        )


def _project(table: Table, keep: tuple[str, ...]) -> Table:
    vs, rows = table
    idx = [vs.index(v) for v in keep]
    return keep, {tuple(r[i] for i in idx) for r in rows}


def _join(t1: Table, t2: Table) -> Table:
    v1, r1 = t1
    v2, r2 = t2
    shared = tuple(v for v in v1 if v in v2)
    out_vars = v1 + tuple(v for v in v2 if v not in v1)
    if not shared:
        _guard(len(r1) * len(r2))
        rows = {a + b for a in r1 for b in r2}
        return out_vars, rows
    i1 = [v1.index(v) for v in shared]
    i2 = [v2.index(v) for v in shared]
    rest2 = [i for i, v in enumerate(v2) if v not in v1]
    index: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for b in r2:
        index.setdefault(tuple(b[i] for i in i2), []).append(tuple(b[i] for i in rest2))
    rows = set()
    for a in r1:
        for tail in index.get(tuple(a[i] for i in i1), ()):
            rows.add(a + tail)
            if len(rows) > _MAX_ROWS:
                _guard(len(rows))
    return out_vars, rows


def _pad(table: Table, out_vars: tuple[str, ...], n: int) -> Table:
    vs, rows = table
    missing = tuple(v for v in out_vars if v not in vs)
    if not missing:
        return _project(table, out_vars)
    _guard(len(rows) * n ** len(missing))
    src = vs + missing
    padded = {r + extra for r in rows for extra in product(range(n), repeat=len(missing))}
    return _project((src, padded), out_vars)


def evaluate(a_struct: Structure, node: _P, cache: dict | None = None) -> Table:
    """Table of satisfying assignments over the node's free variables."""
    if cache is None:
        cache = {}
    return _eval(a_struct, node, cache)


def _eval(s: Structure, node: _P, cache: dict) -> Table:
    hit = cache.get(node.akey)
    if hit is not None:
        return hit
    n = s.size
    if isinstance(node, PConst):
        table: Table = ((), {()} if node.value else set())
    elif isinstance(node, PEq):
        vs = tuple(sorted({node.u, node.v}))
        table = (vs, {(e, e) for e in range(n)}) if len(vs) == 2 else (vs, {(e,) for e in range(n)})
    elif isinstance(node, PDist):
        vs = tuple(sorted({node.u, node.v}))
        rows = set()
        for a in range(n):
            row = s.distance_row(a)
            for b in range(n):
                if row[b] <= node.bound:
                    rows.add((a, b) if vs == (node.u, node.v) else (b, a))
        table = (vs, rows)
    elif isinstance(node, PRel):
        vs = tuple(sorted(set(node.args)))
        pos = {v: node.args.index(v) for v in vs}
        rows = set()
        for t in s.rels[node.name]:
            if all(t[i] == t[node.args.index(a)] for i, a in enumerate(node.args)):
                rows.add(tuple(t[pos[v]] for v in vs))
        table = (vs, rows)
    elif isinstance(node, PNot):
        inner = _eval(s, node.child, cache)
        vs = inner[0]
        _guard(n ** len(vs))
        if len(vs) > _MAX_WIDTH:
            raise ResourceError("complement over too many free variables")
        rows = set(product(range(n), repeat=len(vs))) - inner[1]
        table = (vs, rows)
    elif isinstance(node, PAnd):
        tables = [_eval(s, c, cache) for c in node.children]
        tables.sort(key=lambda t: (len(t[1]), t[0]))
        acc = tables[0]
        for t in tables[1:]:
            acc = _join(acc, t)
        table = _project(acc, tuple(sorted(node.free)))
    elif isinstance(node, POr):
        out_vars = tuple(sorted(node.free))
        rows: set[tuple[int, ...]] = set()
        for c in node.children:
            rows |= _pad(_eval(s, c, cache), out_vars, n)[1]
        table = (out_vars, rows)
    elif isinstance(node, PExists):
        inner = _eval(s, node.child, cache)
        keep = tuple(v for v in inner[0] if v not in node.vars)
        table = _project(inner, keep)
    elif isinstance(node, PForall):
        inner = _eval(s, node.child, cache)
        qvars = tuple(v for v in inner[0] if v in node.vars)
        keep = tuple(v for v in inner[0] if v not in node.vars)
        expected = n ** len(qvars)
        counts: dict[tuple[int, ...], int] = {}
        ki = [inner[0].index(v) for v in keep]
        for r in inner[1]:
            key = tuple(r[i] for i in ki)
            counts[key] = counts.get(key, 0) + 1
        table = (keep, {g for g, c in counts.items() if c == expected})
    elif isinstance(node, PCount):
        inner = _eval(s, node.child, cache)
        if node.var not in inner[0]:
            ok = (n >= node.k) if node.mode == ">=" else (n == node.k)
            rows = inner[1] if ok else set()
            table = (inner[0], set(rows))
        else:
            keep = tuple(v for v in inner[0] if v != node.var)
            ki = [inner[0].index(v) for v in keep]
            counts = {}
            for r in inner[1]:
                key = tuple(r[i] for i in ki)
                counts[key] = counts.get(key, 0) + 1
            if node.mode == ">=":
                good = {g for g, c in counts.items() if c >= node.k}
            else:
                good = {g for g, c in counts.items() if c == node.k}
            table = (keep, good)
    else:
        raise InputError(f"unknown prepared node {node!r}")
    cache[node.akey] = table
    return table


def model_check(a_struct: Structure, phi: Formula, asg: Assignment) -> bool:
    """Tarskian truth of ``phi`` in ``a_struct`` under ``asg``."""
    fv = free_vars(phi)
    missing = fv - set(asg)
    if missing:
        raise InputError(f"assignment does not cover free variables {sorted(missing)}")
    for v in fv:
        a_struct.check_element(asg[v])
    node = prepare(phi)
    vs, rows = evaluate(a_struct, node)
    return tuple(asg[v] for v in vs) in rows
