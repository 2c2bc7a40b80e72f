"""Compare pruning counts of temporally aware and random proposals.

The heuristic proposer orients every edge by effective time, so it should
never lose edges or nodes to pruning; uniformly random graphs over the same
columns do.

    python scripts/structural_pruning.py --runs 20
"""

import argparse

import numpy as np

from dagloop.config import Hyperparameters
from dagloop.dag import build_dag, structural_preprocess
from dagloop.data import sample_balanced_subset
from dagloop.proposer import heuristic_propose
from dagloop.synthetic import temporal_panel


def random_edges(names, treatment, outcome, n_nodes, n_edges, rng):
    pool = [n for n in names if n not in (treatment, outcome)]
    nodes = [treatment, outcome] + list(rng.choice(pool, size=n_nodes - 2, replace=False))
    edges = {(treatment, outcome)}
    while len(edges) < n_edges:
        a, b = rng.choice(nodes, size=2, replace=False)
        edges.add((str(a), str(b)))
    return sorted(edges)


def main() -> None:
    ap = argparse.ArgumentParser(description="pruning counts: heuristic vs random proposals")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--budget", type=int, default=20)
    args = ap.parse_args()

    rows = {"heuristic": [], "random": []}
    for seed in range(args.runs):
        ds = temporal_panel(300, seed=seed)
        ds = ds.subset(sample_balanced_subset(ds, args.budget, seed))
        hp = Hyperparameters(ds.treatment, ds.outcome)
        prop = heuristic_propose(ds, hp, seed)
        rng = np.random.default_rng(seed)
        n_edges = len(prop.edges)
        candidates = {
            "heuristic": prop.edges,
            "random": random_edges(ds.names, ds.treatment, ds.outcome, len(prop.nodes), n_edges, rng),
        }
        for name, edges in candidates.items():
            _, rep = structural_preprocess(build_dag(edges, ds.names), ds.tags(), ds.treatment, ds.outcome)
            rows[name].append((len(rep.temporal_edges_pruned), len(rep.cycle_edges_pruned),
                               len(rep.disconnected_nodes_pruned)))

    print(f"{'proposer':<10} {'temporal':>16} {'cycle':>16} {'disconnected':>16}")
    for name, counts in rows.items():
        arr = np.array(counts, dtype=float)
        cells = [f"{m:.3f} +/- {s:.3f}" for m, s in zip(arr.mean(0), arr.std(0))]
        print(f"{name:<10} " + " ".join(f"{c:>16}" for c in cells))


if __name__ == "__main__":
    main()
