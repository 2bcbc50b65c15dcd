"""Batch command-line front end.

Exit codes: 0 success or pool agreement, 1 semantic counterexample,
2 usage or parse problem, 3 budget or resource refusal.  All output on
stdout is a pure function of the arguments (and seed); timing information
goes to stderr so reruns stay byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import lowerbound
from .config import Budget
from .errors import InputError, ParseError, ResourceError
from .normalform import is_bsnf
from .oracle import PoolSpec, check_equivalence
from .parser import parse
from .structures import Signature, structure_from_text, structure_to_text
from .syntax import Formula, free_vars, quantifier_rank, size, to_text
from .transform import fo_to_bsnf_detailed, radius_bound


def _parse_signature(text: str) -> Signature:
    relations = []
    for item in text.split():
        name, _, arity = item.partition("/")
        if not arity:
            raise InputError(f"signature items look like E/2, got {item!r}")
        relations.append((name, int(arity)))
    return Signature(tuple(relations))


def _load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _budget(args, config: dict[str, str]) -> Budget:
    type_cap = int(config.get("budget-type-size", args.budget_type_size))
    pool_ceiling = int(config.get("budget-pool", args.budget_pool))
    witness = int(config.get("pool-size", args.pool_size))
    return Budget(
        type_cap=type_cap,
        witness_size=witness,
        pool_ceiling=pool_ceiling,
        registry_universe=witness,
    )


def _emit_record(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def cmd_normalize(args) -> int:
    config = _load_config(args.config)
    signature = _parse_signature(config.get("signature", args.signature))
    budget = _budget(args, config)
    if args.formula is None and args.infile is None:
        raise InputError("normalize needs a formula argument or --in FILE")
    text = args.formula if args.formula is not None else Path(args.infile).read_text()
    phi = parse(text)
    started = time.perf_counter()
    result = fo_to_bsnf_detailed(phi, args.degree, signature, budget)
    elapsed = time.perf_counter() - started
    stage_formulas = {
        "hnf": result.hnf.to_formula(),
        "hnf+": result.positive.to_formula(),
        "bsnf": result.bsnf.to_formula(),
    }
    emitted = stage_formulas[args.stage]
    out_text = to_text(emitted)
    if args.out:
        Path(args.out).write_text(out_text + "\n")
    else:
        print(out_text)
    form = is_bsnf(result.bsnf.to_formula())
    _emit_record(
        {
            "stage": args.stage,
            "input_size": size(phi, signature),
            "sizes": {name: size(f, signature) for name, f in stage_formulas.items()},
            "locality_radius": result.bsnf.radius,
            "radius_bound": radius_bound(phi, signature),
            "bsnf_accepted": bool(form),
            "registry_1_size": len(result.compilation.registry_1),
            "registry_n_size": (
                len(result.compilation.registry_n)
                if result.compilation.registry_n is not None
                else 0
            ),
            "witness_pool_size": result.compilation.witness_pool_size,
            "witnesses_scanned": result.compilation.witnesses_scanned,
        }
    )
    print(f"wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def cmd_check(args) -> int:
    config = _load_config(args.config)
    signature = _parse_signature(config.get("signature", args.signature))
    phi = parse(Path(args.phi).read_text())
    psi = parse(Path(args.psi).read_text())
    spec = PoolSpec(
        signature,
        degree_bound=args.degree if args.degree >= 0 else None,
        max_size=int(config.get("pool-size", args.pool_size)),
        mode="random" if args.random_pool else "exhaustive",
        seed=args.seed,
        samples=args.samples,
        dedup=args.dedup,
        ceiling=int(config.get("budget-pool", args.budget_pool)),
    )
    verdict = check_equivalence(phi, psi, spec)
    if verdict.agree:
        _emit_record({"status": "agree-on-pool", "structures_checked": verdict.checked})
        return 0
    witness_struct, assignment = verdict.witness
    _emit_record(
        {
            "status": "counterexample",
            "assignment": assignment,
            "structures_checked": verdict.checked,
        }
    )
    print(structure_to_text(witness_struct), end="")
    return 1


def cmd_generate(args) -> int:
    out_dir = Path(args.out or "generated")
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def write(name: str, payload: str) -> None:
        path = out_dir / name
        path.write_text(payload)
        written.append(name)

    kind = args.family
    if kind == "chain-family":
        for idx, member in enumerate(lowerbound.chain_family(args.height)):
            write(f"chain-h{args.height}-{idx:03d}.structure", structure_to_text(member))
    elif kind == "tree-family":
        for idx, member in enumerate(lowerbound.tree_family(args.degree, args.height)):
            write(
                f"tree-d{args.degree}-h{args.height}-{idx:03d}.structure",
                structure_to_text(member),
            )
    elif kind == "tree-encoding":
        member = lowerbound.tree_encoding(args.index)
        write(f"tree-encoding-{args.index}.structure", structure_to_text(member))
    elif kind == "phi":
        phi = lowerbound.duplication_sentence(args.degree, args.height)
        write(f"phi-d{args.degree}-h{args.height}.formula", to_text(phi) + "\n")
    elif kind == "iso":
        phi = lowerbound.iso_formula(args.degree, args.height)
        write(f"iso-d{args.degree}-h{args.height}.formula", to_text(phi) + "\n")
    elif kind == "coreach":
        phi = lowerbound.coreach_formula(args.degree, args.distance)
        write(f"coreach-d{args.degree}-l{args.distance}.formula", to_text(phi) + "\n")
    else:
        raise InputError(f"unknown family {kind!r}")
    _emit_record({"written": written, "directory": str(out_dir)})
    return 0


def cmd_stats(args) -> int:
    d = args.degree
    sig = lowerbound.tree_signature(d)
    for h in range(args.h_from, args.h_to + 1):
        row: dict[str, object] = {"h": h}
        phi = lowerbound.duplication_sentence(d, h)
        row["phi_size"] = size(phi, sig)
        row["phi_qr"] = quantifier_rank(phi, sig)
        try:
            row["family_size"] = len(lowerbound.tree_family(d, 2**h, budget=args.budget_pool))
        except ResourceError:
            row["family_size"] = "budget"
        try:
            row["coreach_size"] = size(lowerbound.coreach_formula(d, 2**h), sig)
        except ResourceError:
            row["coreach_size"] = "budget"
        # compiling the duplication sentences themselves is far beyond any
        # desk budget; mark the column rather than fail the row
        row["bsnf_size"] = "budget"
        _emit_record(row)
    return 0


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="bsnf",
        description="Compile first-order formulas into Barthelmann-Schwentick "
        "normal form on bounded-degree structures, check equivalences by "
        "exhaustion, and generate lower-bound families.",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--signature", default="E/2", help="relations, e.g. 'E/2 L/1'")
        p.add_argument("--degree", type=int, default=2)
        p.add_argument("--budget-type-size", type=int, default=9)
        p.add_argument("--budget-pool", type=int, default=2**24)
        p.add_argument("--pool-size", type=int, default=3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="key=value file")
        p.add_argument("--out", default=None)

    norm = sub.add_parser("normalize", help="compile a formula to BSNF")
    common(norm)
    norm.add_argument("formula", nargs="?", default=None)
    norm.add_argument("--in", dest="infile", default=None)
    norm.add_argument("--stage", choices=["hnf", "hnf+", "bsnf"], default="bsnf")
    norm.set_defaults(func=cmd_normalize)

    check = sub.add_parser("check", help="pool-equivalence of two formula files")
    common(check)
    check.add_argument("phi")
    check.add_argument("psi")
    check.add_argument("--random-pool", action="store_true")
    check.add_argument("--samples", type=int, default=100)
    check.add_argument("--dedup", action="store_true")
    check.set_defaults(func=cmd_check)

    gen = sub.add_parser("generate", help="emit lower-bound structures/formulas")
    common(gen)
    gen.add_argument(
        "family",
        choices=["chain-family", "tree-family", "tree-encoding", "phi", "iso", "coreach"],
    )
    gen.add_argument("--height", type=int, default=2)
    gen.add_argument("--index", type=int, default=0)
    gen.add_argument("--distance", type=int, default=2)
    gen.set_defaults(func=cmd_generate)

    stats = sub.add_parser("stats", help="growth table for the formula families")
    common(stats)
    stats.add_argument("--h-from", type=int, default=1)
    stats.add_argument("--h-to", type=int, default=4)
    stats.set_defaults(func=cmd_stats)
    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
