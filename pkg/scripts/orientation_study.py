"""How often does the bivariate BIC comparison favour the true direction x -> y?

For linear-Gaussian pairs the difference reduces to n * ln(var(x) / var(y)),
so its sign tracks the variance ratio rather than the causal direction. The
script sweeps the slope and the noise scale of y to show this.

    python scripts/orientation_study.py --seeds 100
"""

import argparse

import numpy as np

from dagloop.stats import delta_bic
from dagloop.synthetic import to_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description="delta-BIC sign rate for x -> y")
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n", type=int, default=1000)
    args = ap.parse_args()

    print(f"{'beta':>6} {'noise sd':>9} {'var(y)/var(x)':>14} {'share > 0':>10} {'share > 2':>10} {'median':>10}")
    for beta, sd in ((1.0, 1.0), (1.0, 0.3), (0.8, 0.5), (0.5, 0.5), (0.5, 0.3), (0.3, 0.3)):
        vals = []
        for seed in range(args.seeds):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal(args.n)
            y = beta * x + sd * rng.standard_normal(args.n)
            vals.append(delta_bic("x", "y", to_dataset({"x": x, "y": y}, "x", "y")))
        vals = np.array(vals)
        ratio = beta**2 + sd**2
        print(f"{beta:>6.2f} {sd:>9.2f} {ratio:>14.2f} {np.mean(vals > 0):>10.2f} {np.mean(vals > 2):>10.2f} "
              f"{np.median(vals):>10.1f}")


if __name__ == "__main__":
    main()
