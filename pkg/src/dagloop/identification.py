"""Back-door identification and propensity-score overlap."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

import numpy as np
from scipy.special import expit

from .dag import Dag, d_separated, descendants
from .data import PanelDataset
from .stats import RegressionError, RegressionFit, fit_logit

MAX_ADJUSTMENT_SIZE = 8
OVERLAP_LOW, OVERLAP_HIGH = 0.05, 0.95
OVERLAP_MIN_SHARE = 0.90


@dataclass
class IdentificationResult:
    identifiable: bool
    minimal_adjustment_set: list[str] | None
    candidate_count_examined: int
    search_capped: bool = False

    def to_dict(self) -> dict:
        return {
            "identifiable": self.identifiable,
            "minimal_adjustment_set": self.minimal_adjustment_set,
            "candidate_count_examined": self.candidate_count_examined,
            "search_capped": self.search_capped,
        }


@dataclass
class PositivityResult:
    overlap_share: float
    positivity_ok: bool
    propensity_model: RegressionFit | None = None
    skipped: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overlap_share": self.overlap_share,
            "positivity_ok": self.positivity_ok,
            "skipped": self.skipped,
            "propensity_model": self.propensity_model.to_dict() if self.propensity_model else None,
            "notes": list(self.notes),
        }


def backdoor_valid(dag: Dag, treatment: str, outcome: str, z: Iterable[str]) -> bool:
    z = set(z)
    dag._check(treatment, outcome, *z)
    if treatment in z or outcome in z:
        raise ValueError("adjustment set must exclude treatment and outcome")
    if z & descendants(dag, treatment):
        return False
    cut = dag.without_edges([(treatment, c) for c in dag.children(treatment)])
    return d_separated(cut, treatment, outcome, z)


def minimal_adjustment_set(
    dag: Dag, treatment: str, outcome: str, max_size: int = MAX_ADJUSTMENT_SIZE
) -> IdentificationResult:
    """Smallest valid back-door set; ties go to the lexicographically first sorted set."""
    dag._check(treatment, outcome)
    excluded = {treatment, outcome} | descendants(dag, treatment)
    pool = sorted(n for n in dag.nodes if n not in excluded)
    examined = 0
    for k in range(min(max_size, len(pool)) + 1):
        for cand in combinations(pool, k):
            examined += 1
            if backdoor_valid(dag, treatment, outcome, cand):
                return IdentificationResult(True, list(cand), examined)
    return IdentificationResult(False, None, examined, search_capped=len(pool) > max_size)


def _binarize_treatment(t: np.ndarray) -> tuple[np.ndarray, str | None]:
    uniq = np.unique(t)
    if uniq.size == 2 and uniq[0] == 0.0 and uniq[1] == 1.0:
        return t, None
    med = float(np.median(t))
    tb = (t > med).astype(float)
    if tb.min() == tb.max():
        tb = (t >= med).astype(float)
    return tb, f"continuous treatment split at its median ({med:.6g})"


def positivity_check(ds: PanelDataset, treatment: str, z: Iterable[str]) -> PositivityResult:
    z = list(z)
    if not z:
        return PositivityResult(1.0, True, skipped=True, notes=["empty adjustment set"])
    t, note = _binarize_treatment(ds.column(treatment))
    notes = [note] if note else []
    if t.min() == t.max():
        return PositivityResult(0.0, False, notes=notes + ["treatment has a single class"])
    try:
        model = fit_logit(t, ds.matrix(z), z)
    except RegressionError as exc:
        return PositivityResult(0.0, False, notes=notes + [f"propensity model failed: {exc}"])
    eta = model.params[0] + ds.matrix(z) @ model.params[1:]
    e = expit(eta)
    share = float(np.mean((e >= OVERLAP_LOW) & (e <= OVERLAP_HIGH)))
    ok = share > OVERLAP_MIN_SHARE
    if not model.converged:
        notes.append("propensity model did not converge")
        ok = False
    return PositivityResult(share, ok, propensity_model=model, notes=notes)
