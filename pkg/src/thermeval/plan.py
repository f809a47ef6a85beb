"""Experiment planning: the hyperparameter-combination grid, nested
cross-validation split plans, and best-epoch selection.

The split scheme shuffles once per seed, carves the pool into k_outer
near-equal test folds, and partitions each fold's remainder into k_inner
validation folds; every (outer, inner) pair is one run whose training
set is the remainder.  Inner models are evaluated on the outer test fold
directly, so a plan with k_outer = k_inner = 5 yields 25 runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PlanError",
    "HPC",
    "hpc_grid",
    "CANONICAL_HPC_ORDER",
    "RunSplit",
    "SplitPlan",
    "plan_splits",
    "write_plan",
    "read_plan",
    "select_best_epoch",
]

_BATCH_SIZES = (16, 4)
_WEIGHTINGS = ("original", "reduced")   # reduced = class weights scaled down 100x
_STATUSES = ("pretrained", "untrained")


class PlanError(ValueError):
    """Raised for invalid grid names or infeasible split requests."""


@dataclass(frozen=True)
class HPC:
    """One training-configuration cell of the 2x2x2 grid."""

    batch_size: int
    loss_weighting: str
    training_status: str

    def __post_init__(self) -> None:
        if self.batch_size not in _BATCH_SIZES:
            raise PlanError(f"batch_size must be one of {_BATCH_SIZES}, got {self.batch_size}")
        if self.loss_weighting not in _WEIGHTINGS:
            raise PlanError(
                f"loss_weighting must be one of {_WEIGHTINGS}, got {self.loss_weighting!r}"
            )
        if self.training_status not in _STATUSES:
            raise PlanError(
                f"training_status must be one of {_STATUSES}, got {self.training_status!r}"
            )

    @property
    def name(self) -> str:
        """Canonical short name: batch, weighting letter, status letter.

        Original weighting is uppercase L, the reduced variant lowercase;
        pretrained is p, untrained u.  Example: ``16_L_p``.
        """
        weight = "L" if self.loss_weighting == "original" else "l"
        status = "p" if self.training_status == "pretrained" else "u"
        return f"{self.batch_size}_{weight}_{status}"

    @classmethod
    def from_name(cls, name: str) -> "HPC":
        parts = name.split("_")
        if len(parts) != 3:
            raise PlanError(f"malformed combination name {name!r}")
        batch_s, weight, status = parts
        try:
            batch = int(batch_s)
        except ValueError:
            raise PlanError(f"malformed combination name {name!r}") from None
        if weight not in ("L", "l") or status not in ("p", "u"):
            raise PlanError(f"malformed combination name {name!r}")
        return cls(
            batch_size=batch,
            loss_weighting="original" if weight == "L" else "reduced",
            training_status="pretrained" if status == "p" else "untrained",
        )


def hpc_grid() -> tuple[HPC, ...]:
    """All eight combinations, pretrained rows first, larger batch first."""
    return tuple(
        HPC(batch, weight, status)
        for status in _STATUSES
        for batch in _BATCH_SIZES
        for weight in _WEIGHTINGS
    )


# column order used by the results tables: batch 4 block first
CANONICAL_HPC_ORDER: tuple[str, ...] = (
    "4_L_p",
    "4_L_u",
    "4_l_p",
    "4_l_u",
    "16_L_p",
    "16_L_u",
    "16_l_p",
    "16_l_u",
)


@dataclass(frozen=True)
class RunSplit:
    """One run of the plan: indexes of its outer/inner fold plus id sets."""

    outer_fold: int
    inner_fold: int
    train_ids: tuple[int, ...]
    val_ids: tuple[int, ...]
    test_ids: tuple[int, ...]


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    k_outer: int
    k_inner: int
    runs: tuple[RunSplit, ...]


def _chunks(ids: Sequence[int], k: int) -> list[list[int]]:
    """k near-equal contiguous chunks; the remainder goes one per leading chunk."""
    n = len(ids)
    base, extra = divmod(n, k)
    out = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        out.append(list(ids[start : start + size]))
        start += size
    return out


def plan_splits(
    image_ids: Iterable[int],
    k_outer: int = 5,
    k_inner: int = 5,
    seed: int = 0,
) -> SplitPlan:
    """Build the full nested split plan; a pure function of its arguments.

    Ids are deduplicated, shuffled once with the seeded generator, and
    divided as described in the module docstring.  Within each run the
    three id sets are disjoint and cover the pool.
    """
    ids = sorted(set(int(i) for i in image_ids))
    if k_outer < 2 or k_inner < 2:
        raise PlanError(f"fold counts must be at least 2, got {k_outer}/{k_inner}")
    if len(ids) < k_outer * k_inner:
        raise PlanError(
            f"{len(ids)} ids cannot fill {k_outer}x{k_inner} folds"
        )
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]

    runs = []
    outer_chunks = _chunks(shuffled, k_outer)
    for oi in range(k_outer):
        test = outer_chunks[oi]
        rest = [v for ci, chunk in enumerate(outer_chunks) if ci != oi for v in chunk]
        inner_chunks = _chunks(rest, k_inner)
        for ii in range(k_inner):
            val = inner_chunks[ii]
            val_set = set(val)
            train = [v for v in rest if v not in val_set]
            runs.append(
                RunSplit(
                    outer_fold=oi,
                    inner_fold=ii,
                    train_ids=tuple(sorted(train)),
                    val_ids=tuple(sorted(val)),
                    test_ids=tuple(sorted(test)),
                )
            )
    return SplitPlan(seed=int(seed), k_outer=k_outer, k_inner=k_inner, runs=tuple(runs))


def write_plan(plan: SplitPlan) -> str:
    doc = {
        "seed": plan.seed,
        "k_outer": plan.k_outer,
        "k_inner": plan.k_inner,
        "runs": [
            {
                "outer_fold": r.outer_fold,
                "inner_fold": r.inner_fold,
                "train": list(r.train_ids),
                "val": list(r.val_ids),
                "test": list(r.test_ids),
            }
            for r in plan.runs
        ],
    }
    return json.dumps(doc, indent=2)


def read_plan(text: str | bytes) -> SplitPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanError(f"malformed plan document: {exc}") from None
    try:
        runs = tuple(
            RunSplit(
                outer_fold=int(r["outer_fold"]),
                inner_fold=int(r["inner_fold"]),
                train_ids=tuple(int(v) for v in r["train"]),
                val_ids=tuple(int(v) for v in r["val"]),
                test_ids=tuple(int(v) for v in r["test"]),
            )
            for r in doc["runs"]
        )
        return SplitPlan(
            seed=int(doc["seed"]),
            k_outer=int(doc["k_outer"]),
            k_inner=int(doc["k_inner"]),
            runs=runs,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanError(f"malformed plan document: {exc}") from None


def select_best_epoch(ap_log: Sequence[float]) -> int:
    """1-based epoch with the highest validation AP; ties take the earliest."""
    if len(ap_log) == 0:
        raise PlanError("empty epoch log")
    best = 0
    for i, v in enumerate(ap_log):
        if v > ap_log[best]:
            best = i
    return best + 1
