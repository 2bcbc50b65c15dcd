"""Budget knobs that guard the exponential parts of the pipeline.

Registries of neighborhood types and exhaustive structure pools grow
doubly exponentially in their parameters; every entry point that could
blow up takes a ``Budget`` and refuses loudly instead of hanging.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Budget:
    """Resource limits for type enumeration and pool evaluation.

    type_cap:
        Refuse enumerating a type registry whose carrier-size bound
        n * nu_d(r) exceeds this value.
    witness_size:
        Maximum universe size of the witness pool used when compiling a
        formula into Hanf normal form.  The compiled output is guaranteed
        d-equivalent to the input on structures up to this size.
    pool_ceiling:
        Refuse exhaustive pool enumeration when the candidate-count
        estimate 2**(#relation positions) exceeds this value.
    registry_universe:
        Optional cap on the carrier size of materialized registry members.
        ``None`` means the theoretical bound n * nu_d(r).  Types with
        larger carriers cannot be realized inside structures of the
        configured pool sizes, so capping keeps registries desk-sized
        without changing any verdict on the pools.
    """

    type_cap: int = 9
    witness_size: int = 3
    pool_ceiling: int = 2**24
    registry_universe: int | None = None

    def __post_init__(self):
        if self.type_cap < 1 or self.witness_size < 1 or self.pool_ceiling < 1:
            raise ValueError("budgets must be positive")


DEFAULT_BUDGET = Budget()
