"""Command line entry point: ``dagloop --data panel.csv --treatment T --outcome Y ...``.

Exit status: 0 when a DAG is accepted, 2 when the iteration budget or the
script runs out without acceptance, 1 on any error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, Hyperparameters
from .data import DataError, IngestConfig
from .orchestrator import RunConfig, run
from .proposer import EndpointConfig, ScriptError

EXIT_ACCEPTED, EXIT_ERROR, EXIT_EXHAUSTED = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagloop", description="Iterative causal DAG discovery on panel data.")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--config", help="JSON ingest config (treatment, outcome, tag_overrides, binary_columns, missing)")
    p.add_argument("--treatment")
    p.add_argument("--outcome")
    p.add_argument("--budget", "-M", type=int, dest="m", help="columns to sample (default: all)")
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--k-refine", type=int, default=5)
    p.add_argument("--k-init-min", type=int, default=5)
    p.add_argument("--k-init-max", type=int, default=15)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--theta-global", type=float, default=0.60)
    p.add_argument("--theta-r2", type=float, default=0.05)
    p.add_argument("--theta-vif", type=float, default=10.0)
    p.add_argument("--proposer", choices=["llm", "scripted", "heuristic"], default="heuristic")
    p.add_argument("--script", help="JSON array of proposals for --proposer scripted")
    p.add_argument("--llm-endpoint", help="chat-completions URL")
    p.add_argument("--llm-model")
    p.add_argument("--llm-key-env", default="DAGLOOP_LLM_API_KEY",
                   help="environment variable holding the API key")
    p.add_argument("--llm-timeout", type=float, default=120.0)
    p.add_argument("--strict-missing", action="store_true", help="fail on missing cells instead of dropping rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="dagloop_run")
    p.add_argument("--accept-negligible-effect", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            ingest = IngestConfig.from_json(args.config, treatment=args.treatment, outcome=args.outcome)
        elif args.treatment and args.outcome:
            ingest = IngestConfig(args.treatment, args.outcome)
        else:
            raise ConfigError("--treatment and --outcome (or --config) are required")
        if args.strict_missing:
            ingest.missing = "error"
        endpoint = None
        if args.proposer == "llm":
            if not (args.llm_endpoint and args.llm_model):
                raise ConfigError("--proposer llm needs --llm-endpoint and --llm-model")
            endpoint = EndpointConfig(args.llm_endpoint, args.llm_model, api_key_env=args.llm_key_env,
                                      timeout=args.llm_timeout)
        hp = Hyperparameters(
            treatment=ingest.treatment,
            outcome=ingest.outcome,
            k_init_min=args.k_init_min,
            k_init_max=args.k_init_max,
            k_refine=args.k_refine,
            t_max=args.max_iterations,
            m=args.m,
            alpha=args.alpha,
            theta_global=args.theta_global,
            theta_r2=args.theta_r2,
            theta_vif=args.theta_vif,
            accept_negligible_effect=args.accept_negligible_effect,
        )
        config = RunConfig(
            hp=hp,
            data_path=args.data,
            ingest=ingest,
            proposer=args.proposer,
            script_path=args.script,
            endpoint=endpoint,
            out_dir=args.out_dir,
            seed=args.seed,
        )
        transcript = run(config)
    except (ConfigError, DataError, ScriptError, OSError) as exc:
        print(f"dagloop: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"terminated by {transcript.terminated_by} after {len(transcript.iterations)} iteration(s); "
          f"best composite score {transcript.best_score:.4f}; artifacts in {args.out_dir}")
    if transcript.terminated_by == "accepted":
        return EXIT_ACCEPTED
    if transcript.terminated_by in ("budget_exhausted", "script_exhausted"):
        return EXIT_EXHAUSTED
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
