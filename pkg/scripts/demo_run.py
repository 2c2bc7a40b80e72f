"""Write a synthetic firm panel to CSV and run the discovery loop on it.

    python scripts/demo_run.py --out-dir runs/demo --budget 20 --iterations 5
"""

import argparse
from pathlib import Path

from dagloop.config import Hyperparameters
from dagloop.data import IngestConfig
from dagloop.orchestrator import RunConfig, run
from dagloop.synthetic import OUTCOME, TREATMENT, temporal_panel, write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="runs/demo")
    ap.add_argument("--rows", type=int, default=1000)
    ap.add_argument("--budget", type=int, default=20, help="columns to sample (M)")
    ap.add_argument("--iterations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(temporal_panel(args.rows, seed=args.seed), out / "panel.csv")
    hp = Hyperparameters(TREATMENT, OUTCOME, m=args.budget, t_max=args.iterations)
    cfg = RunConfig(hp=hp, data_path=csv_path, ingest=IngestConfig(TREATMENT, OUTCOME),
                    out_dir=out / "run", seed=args.seed)
    tr = run(cfg)
    print(f"terminated by {tr.terminated_by}; best iteration {tr.best_iteration} "
          f"(composite {tr.best_score:.3f})")
    for it in tr.iterations:
        failed = [c.name for c in it.diagnostics.criteria if not c.passed]
        print(f"  iter {it.iteration}: {len(it.proposal.nodes):2d} nodes, "
              f"composite {it.diagnostics.composite_score:.3f}, failed: {', '.join(failed) or '-'}")
    print(f"artifacts: {out / 'run'}")


if __name__ == "__main__":
    main()
