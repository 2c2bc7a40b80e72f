"""Synthetic panels with known causal structure, for tests and demo runs."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.special import expit

from .dag import Dag
from .data import PanelDataset


def simulate_sem(
    weights: Mapping[tuple[str, str], float],
    n: int,
    seed: int,
    noise_sd: Mapping[str, float] | float = 1.0,
    binary: frozenset[str] | set[str] = frozenset(),
    nodes: list[str] | None = None,
) -> dict[str, np.ndarray]:
    """Linear SEM; binary nodes are Bernoulli draws through a logistic link."""
    names = list(nodes or [])
    for p, c in weights:
        for v in (p, c):
            if v not in names:
                names.append(v)
    dag = Dag(tuple(names), tuple(weights))
    if not dag.is_acyclic():
        raise ValueError("weights must describe a DAG")
    order = _topological(dag)
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for v in order:
        lin = np.zeros(n)
        for p in dag.parents(v):
            lin += weights[(p, v)] * out[p]
        sd = noise_sd if isinstance(noise_sd, (int, float)) else noise_sd.get(v, 1.0)
        if v in binary:
            out[v] = (rng.random(n) < expit(lin)).astype(float)
        else:
            out[v] = lin + sd * rng.standard_normal(n)
    return {v: out[v] for v in names}


def _topological(dag: Dag) -> list[str]:
    done: list[str] = []
    remaining = list(dag.nodes)
    while remaining:
        for v in remaining:
            if all(p in done for p in dag.parents(v)):
                done.append(v)
                remaining.remove(v)
                break
    return done


def to_dataset(columns: Mapping[str, np.ndarray], treatment: str, outcome: str, **kw) -> PanelDataset:
    names = list(columns)
    return PanelDataset.from_array(names, np.column_stack([columns[c] for c in names]), treatment, outcome, **kw)


def confounded_triangle(n: int = 1000, seed: int = 0, effect: float = 0.5) -> PanelDataset:
    """C -> T, C -> Y, T -> Y with continuous columns.

    Noise scales make the treatment the higher-variance variable, which the
    bivariate BIC orientation check rewards.
    """
    cols = simulate_sem(
        {("C", "T"): 0.8, ("C", "Y"): 0.5, ("T", "Y"): effect},
        n,
        seed,
        noise_sd={"C": 1.0, "T": 1.5, "Y": 0.5},
        nodes=["C", "T", "Y"],
    )
    return to_dataset(cols, "T", "Y")


TREATMENT = "delta_ebitda_margin_2015_2016"
OUTCOME = "bankruptcy_2018_2019"
_STEMS = ["roa", "roe", "ros", "leverage", "liquidity", "sales", "assets", "debt_ebitda",
          "interest_cov", "employees", "net_equity", "fin_charges"]


def temporal_panel(n: int = 400, seed: int = 0, per_bucket: int = 12, n_atemporal: int = 3) -> PanelDataset:
    """Firm-like panel whose names follow the temporal naming convention.

    Columns come from five buckets (deltas 2015-16 and 2016-17, levels 2015,
    2016, 2017) plus a few atemporal dummies; each column depends linearly on
    a handful of earlier columns, and the binary outcome on the treatment and
    several 2016-2017 columns.
    """
    rng = np.random.default_rng(seed)
    stems = (_STEMS * (per_bucket // len(_STEMS) + 1))[:per_bucket]
    stems = [f"{s}{i // len(_STEMS) or ''}" for i, s in enumerate(stems)]
    ordered: list[tuple[str, float]] = []
    for i in range(n_atemporal):
        ordered.append((f"province_{i}", -np.inf))
    ordered += [(f"{s}_{2015}", 2015) for s in stems]
    ordered += [(f"delta_{s}_2015_2016", 2016) for s in stems]
    ordered.append((TREATMENT, 2016))
    ordered += [(f"{s}_{2016}", 2016) for s in stems]
    ordered += [(f"delta_{s}_2016_2017", 2017) for s in stems]
    ordered += [(f"{s}_{2017}", 2017) for s in stems]

    cols: dict[str, np.ndarray] = {}
    for name, when in ordered:
        if name.startswith("province_"):
            cols[name] = (rng.random(n) < 0.3).astype(float)
            continue
        earlier = [c for c, w in ordered if c in cols and w <= when]
        k = min(len(earlier), 3)
        parents = rng.choice(earlier, size=k, replace=False) if k else []
        lin = sum(rng.uniform(0.3, 0.8) * rng.choice([-1, 1]) * _std(cols[p]) for p in parents)
        cols[name] = lin + rng.standard_normal(n)
    drivers = [TREATMENT] + [c for c, w in ordered if w == 2017][:4]
    lin = sum(rng.uniform(0.4, 0.9) * _std(cols[d]) for d in drivers)
    cols[OUTCOME] = (rng.random(n) < expit(lin - np.median(lin))).astype(float)
    return to_dataset(cols, TREATMENT, OUTCOME)


def _std(x: np.ndarray) -> np.ndarray:
    s = x.std()
    return (x - x.mean()) / s if s > 0 else x - x.mean()


def write_csv(ds: PanelDataset, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ds.names)
        for row in ds.values:
            w.writerow([repr(float(v)) if v != int(v) else int(v) for v in row])
    return path
