"""Multi-channel jamming layer: per-state priority indices and the budgeted policy.

Each of N independent subsystems carries its own (p, q, r) triple and age.
With a budget of M < N simultaneous jams, the heuristic of choice jams the
M channels whose current age has the highest index value, where the index
of age k is exactly the tie subsidy ``lambda_seq(params, k)`` of the
single-channel problem. This module provides the closed-form index, an
iterative construction used purely as a cross-check, the indexability
verification that justifies the index, and the budgeted selection rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    SubsystemParams,
    avg_aat_closed,
    intersection_lambda,
    lambda_curve,
    lambda_seq,
)

__all__ = [
    "SubsystemState",
    "FleetConfig",
    "IndexStructureError",
    "whittle_index_closed",
    "whittle_table_closed",
    "whittle_index_iterative",
    "indexability_check",
    "select_jam_set",
]

# Extra states scanned past the requested table when hunting each infimum.
SCAN_MARGIN = 1000

# Ratios within this relative tolerance of an infimum count as co-minimizers.
# The pairwise ratio is evaluated with cancellations removed analytically, so
# its float error is a few ULP; anything tighter than ~1e-13 risks splitting
# genuine ties, anything looser merges states whose indices still differ.
_TIE_RTOL = 1e-12


class IndexStructureError(RuntimeError):
    """An infimum scan contradicted the proven index structure."""


@dataclass(frozen=True)
class SubsystemState:
    """One channel of a fleet: identity, parameters, and current age."""

    subsystem_id: int
    params: SubsystemParams
    age: int

    def __post_init__(self):
        if self.age < 0:
            raise ValueError(f"age must be >= 0, got {self.age}")


@dataclass(frozen=True)
class FleetConfig:
    """Immutable fleet description: per-channel parameters and jam budget."""

    subsystems: tuple[SubsystemParams, ...]
    budget: int

    def __post_init__(self):
        if len(self.subsystems) == 0:
            raise ValueError("fleet must contain at least one subsystem")
        if not 0 <= self.budget < len(self.subsystems):
            raise ValueError(
                f"budget must satisfy 0 <= M < N, got M={self.budget}, N={len(self.subsystems)}"
            )

    @property
    def size(self) -> int:
        return len(self.subsystems)

    @property
    def alpha(self) -> float:
        return self.budget / self.size

    @classmethod
    def from_classes(
        cls, classes: list[tuple[SubsystemParams, float]], n_total: int, budget: int
    ) -> "FleetConfig":
        """Build a fleet from (params, fraction) classes.

        Class sizes are round(fraction * n_total); a hard error if the
        rounded counts do not add up to n_total.
        """
        counts = [round(frac * n_total) for _, frac in classes]
        if sum(counts) != n_total:
            raise ValueError(
                f"class fractions {[f for _, f in classes]} with N={n_total} give counts "
                f"{counts}, which do not sum to N"
            )
        subsystems = []
        for (params, _), count in zip(classes, counts):
            subsystems.extend([params] * count)
        return cls(subsystems=tuple(subsystems), budget=budget)


def whittle_index_closed(params: SubsystemParams, n: int) -> float:
    """Priority index of age n: the subsidy making jam and idle tie there.

    Identical to ``lambda_seq``; the single-channel tie sequence is what the
    budgeted policy ranks on.
    """
    return lambda_seq(params, n)


def whittle_table_closed(params: SubsystemParams, n_max: int) -> np.ndarray:
    """Closed-form index table over ages 0 .. n_max."""
    return lambda_curve(params, n_max)


def whittle_index_iterative(
    params: SubsystemParams, n_max: int, scan_margin: int = SCAN_MARGIN
) -> np.ndarray:
    """Index table built by the iterative infimum construction.

    Starting from an empty assigned set with boundary age 0, each step finds
    the infimum over unassigned ages of the pairwise tie subsidy against the
    current boundary, assigns that value to every age up to the largest
    co-minimizer, and advances the boundary. For this chain the minimizer is
    provably the state right after the boundary, so each step assigns one
    age; a scan finding a strictly smaller ratio further out contradicts
    that structure and raises rather than being silently accepted. Ages
    whose ratios tie all the way to the scan edge (q = 0, or increments
    below float resolution) share the current infimum.

    Retained as a verification oracle for ``whittle_table_closed``; the
    closed form is what production callers use.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if scan_margin < 1:
        raise ValueError("scan_margin must be >= 1")
    bound = n_max + scan_margin
    table = np.empty(n_max + 1)
    boundary = 0
    while boundary <= n_max:
        candidates = np.arange(boundary + 1, bound + 1, dtype=np.float64)
        ratios = intersection_lambda(params, boundary, candidates)
        low = float(ratios.min())
        tol = _TIE_RTOL * max(1.0, abs(low))
        if low < ratios[0] - tol:
            where = boundary + 1 + int(np.argmin(ratios))
            if where == bound:
                raise IndexStructureError(
                    f"infimum at the scan edge {bound} from boundary {boundary}; "
                    "the scan window cannot certify the infimum"
                )
            raise IndexStructureError(
                f"infimum from boundary {boundary} attained at {where}, not at "
                f"{boundary + 1}: ratio {low:.12g} < {float(ratios[0]):.12g}"
            )
        value = float(ratios[0])
        ties = np.nonzero(ratios <= low + tol)[0]
        largest = boundary + 1 + int(ties.max())
        if largest >= bound:
            # Tie plateau runs to the scan edge: every remaining age shares
            # the current infimum (exact for q = 0, and the correct float
            # semantics once increments fall below resolution).
            table[boundary:] = value
            return table
        table[boundary : min(largest, n_max + 1)] = value
        boundary = largest
    return table


def indexability_check(params: SubsystemParams, n_max: int) -> bool:
    """True when the average attack time strictly decreases in the threshold.

    That monotonicity is what makes the passive set grow with the subsidy,
    i.e. makes the index well defined. It holds for every valid parameter
    triple; the one degenerate corner is p = 1, where the attack time is
    already 0 from threshold 1 on and further strictness is vacuous (ages
    above 0 are unreachable without jamming), so zero differences are
    accepted there.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    prev = avg_aat_closed(params, 0)
    for n in range(1, n_max + 1):
        cur = avg_aat_closed(params, n)
        if cur > prev or (cur == prev and prev > 0.0):
            return False
        prev = cur
    return True


def select_jam_set(fleet: list[SubsystemState], budget: int) -> set[int]:
    """Ids of the min(budget, N) channels with the highest current indices.

    Ties break toward the lower subsystem id so replays are deterministic.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    ids = [sub.subsystem_id for sub in fleet]
    if len(set(ids)) != len(ids):
        raise ValueError("subsystem ids must be unique within a fleet")
    if budget > len(fleet):
        raise ValueError(f"budget {budget} exceeds fleet size {len(fleet)}")
    ranked = sorted(
        fleet,
        key=lambda sub: (-whittle_index_closed(sub.params, sub.age), sub.subsystem_id),
    )
    return {sub.subsystem_id for sub in ranked[:budget]}
