"""The propose -> evaluate loop, best-graph tracking and run artifacts."""

from __future__ import annotations

import hashlib
import logging
import math
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ._json import dumps
from .config import ConfigError, Hyperparameters
from .dag import Dag, DagError, build_dag
from .data import IngestConfig, PanelDataset, load_csv, sample_balanced_subset
from .evaluator import Diagnostics, FailureMemo, build_failure_memo, evaluate_dag
from .proposer import (
    BudgetCheck,
    EndpointConfig,
    LLMProposer,
    Proposal,
    ProposalError,
    ProposerFailed,
    ScriptedProposer,
    ScriptExhausted,
    enforce_refinement_budget,
    heuristic_propose,
    render_prompt,
)

log = logging.getLogger(__name__)

# fields excluded when comparing two runs for reproducibility
NONDETERMINISTIC_KEYS = frozenset({"run_id", "started_at", "finished_at", "elapsed_seconds"})


@dataclass
class RunConfig:
    hp: Hyperparameters
    data_path: str | Path | None = None
    ingest: IngestConfig | None = None
    proposer: str = "heuristic"  # "llm" | "scripted" | "heuristic"
    script_path: str | Path | None = None
    endpoint: EndpointConfig | None = None
    out_dir: str | Path = "dagloop_run"
    seed: int = 0

    def validate(self) -> "RunConfig":
        self.hp.validate()
        if self.proposer not in ("llm", "scripted", "heuristic"):
            raise ConfigError(f"unknown proposer {self.proposer!r}")
        if self.proposer == "scripted" and self.script_path is None:
            raise ConfigError("scripted proposer needs a script path")
        if self.proposer == "llm" and self.endpoint is None:
            raise ConfigError("llm proposer needs an endpoint URL and model")
        return self


@dataclass
class IterationRecord:
    iteration: int
    prompt: list[dict]
    exchange: list[dict]
    proposal: Proposal | None
    budget: BudgetCheck | None
    diagnostics: Diagnostics | None
    memo: FailureMemo | None
    started_at: str = ""
    elapsed_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "started_at": self.started_at,
            "elapsed_seconds": self.elapsed_seconds,
            "prompt": self.prompt,
            "exchange": self.exchange,
            "proposal": self.proposal.to_dict() if self.proposal else None,
            "budget": self.budget.to_dict() if self.budget else None,
            "diagnostics": self.diagnostics.to_dict() if self.diagnostics else None,
            "memo": self.memo.to_dict() if self.memo else None,
        }


@dataclass
class RunTranscript:
    run_id: str
    hp: Hyperparameters
    columns: list[str]
    seed: int
    proposer: str
    iterations: list[IterationRecord] = field(default_factory=list)
    best_iteration: int | None = None
    best_score: float = -math.inf
    terminated_by: str | None = None
    error: str | None = None
    rows: int = 0
    rows_dropped: int = 0
    started_at: str = ""
    finished_at: str = ""
    elapsed_seconds: float = 0.0

    @property
    def best(self) -> IterationRecord | None:
        if self.best_iteration is None:
            return None
        return self.iterations[self.best_iteration - 1]

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "elapsed_seconds": self.elapsed_seconds,
            "proposer": self.proposer,
            "seed": self.seed,
            "hyperparameters": self.hp.to_dict(),
            "columns": list(self.columns),
            "rows": self.rows,
            "rows_dropped": self.rows_dropped,
            "terminated_by": self.terminated_by,
            "error": self.error,
            "best_iteration": self.best_iteration,
            "best_score": self.best_score,
            "iterations": [it.to_dict() for it in self.iterations],
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _check_writable(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out_dir} is not writable: {exc}") from exc


def prepare_dataset(config: RunConfig, ds: PanelDataset | None = None) -> PanelDataset:
    """Load the panel and, when M is below the column count, draw the balanced subset."""
    if ds is None:
        if config.data_path is None or config.ingest is None:
            raise ConfigError("a dataset or a data path plus ingest config is required")
        ds = load_csv(config.data_path, config.ingest)
    if ds.treatment != config.hp.treatment or ds.outcome != config.hp.outcome:
        raise ConfigError("dataset treatment/outcome differ from the hyperparameters")
    if config.hp.m is not None and config.hp.m < len(ds.names):
        ds = ds.subset(sample_balanced_subset(ds, config.hp.m, config.seed))
    return ds


def run(config: RunConfig, ds: PanelDataset | None = None, proposer: Any = None) -> RunTranscript:
    """Initialise, loop propose/evaluate up to ``T_max`` times, persist artifacts.

    ``proposer`` overrides the one built from the config (an ``LLMProposer``,
    ``ScriptedProposer`` or ``"heuristic"``).
    """
    config.validate()
    hp = config.hp
    out_dir = Path(config.out_dir)
    _check_writable(out_dir)
    ds = prepare_dataset(config, ds)
    t0 = time.perf_counter()
    transcript = RunTranscript(
        run_id=uuid.uuid4().hex,
        hp=hp,
        columns=ds.names,
        seed=config.seed,
        proposer=config.proposer,
        rows=ds.n_rows,
        rows_dropped=ds.rows_dropped,
        started_at=_now(),
    )
    if proposer is None:
        if config.proposer == "scripted":
            proposer = ScriptedProposer.from_file(config.script_path)
        elif config.proposer == "llm":
            proposer = LLMProposer(config.endpoint)
        else:
            proposer = "heuristic"

    try:
        _loop(transcript, ds, hp, proposer, config.seed)
    except Exception as exc:
        transcript.terminated_by = "proposer_failed"
        transcript.error = f"{type(exc).__name__}: {exc}"
        log.exception("run aborted")
    finally:
        transcript.finished_at = _now()
        transcript.elapsed_seconds = time.perf_counter() - t0
        persist(transcript, out_dir)
    return transcript


def _loop(transcript: RunTranscript, ds: PanelDataset, hp: Hyperparameters, proposer: Any, seed: int) -> None:
    prev: Proposal | None = None
    for t in range(1, hp.t_max + 1):
        started, t_start = _now(), time.perf_counter()
        kind = "bootstrap" if t == 1 else "refinement"
        prompt = render_prompt(kind, hp, ds.names, transcript)
        exchange: list[dict] = []
        try:
            proposal = _propose(proposer, prompt, t, ds, hp, prev, seed, exchange)
        except ScriptExhausted as exc:
            log.info("%s", exc)
            transcript.terminated_by = "script_exhausted"
            return
        except (ProposerFailed, ProposalError) as exc:
            transcript.terminated_by = "proposer_failed"
            transcript.error = str(exc)
            return
        budget = enforce_refinement_budget(prev, proposal, hp.k_refine) if prev else None
        try:
            dag = build_dag(proposal.edges, ds.names)
        except DagError as exc:
            transcript.terminated_by = "proposer_failed"
            transcript.error = f"iteration {t}: {exc}"
            return
        diag = evaluate_dag(dag, ds, hp, proposal.negligible_effect_claimed)
        memo = build_failure_memo(diag, hp)
        transcript.iterations.append(IterationRecord(
            iteration=t,
            prompt=prompt,
            exchange=exchange,
            proposal=proposal,
            budget=budget,
            diagnostics=diag,
            memo=memo,
            started_at=started,
            elapsed_seconds=time.perf_counter() - t_start,
        ))
        prev = proposal
        score = diag.composite_score
        if diag.ok:
            transcript.best_iteration, transcript.best_score = t, score
            transcript.terminated_by = "accepted"
            return
        if score is not None and score > transcript.best_score:
            transcript.best_iteration, transcript.best_score = t, score
    transcript.terminated_by = "budget_exhausted"


def _propose(proposer, prompt, t, ds, hp, prev, seed, exchange) -> Proposal:
    if proposer == "heuristic":
        return heuristic_propose(ds, hp, seed + t - 1)
    if isinstance(proposer, ScriptedProposer):
        return proposer.propose(t)
    if isinstance(proposer, LLMProposer):
        def validate(obj: dict) -> Proposal:
            prop = Proposal.from_obj(obj, ds.names, hp.treatment, hp.outcome)
            if prev is not None:
                check = enforce_refinement_budget(prev, prop, hp.k_refine)
                if not check.accepted:
                    raise ProposalError(
                        f"{check.changes} column changes (added {check.added}, removed "
                        f"{check.removed}) exceed the limit of {hp.k_refine}"
                    )
            return prop

        start = len(proposer.exchanges)
        try:
            return proposer.propose(prompt, validate)
        finally:
            exchange.extend(proposer.exchanges[start:])
    if callable(proposer):
        return proposer(t, prompt)
    raise ConfigError(f"unsupported proposer {proposer!r}")


def _summary(tr: RunTranscript) -> str:
    lines = [
        "# Causal DAG discovery run",
        "",
        f"- run id: `{tr.run_id}`",
        f"- proposer: {tr.proposer}, seed {tr.seed}",
        f"- treatment: `{tr.hp.treatment}`, outcome: `{tr.hp.outcome}`",
        f"- data: {tr.rows} rows ({tr.rows_dropped} dropped for missing values), {len(tr.columns)} columns",
        f"- iterations: {len(tr.iterations)} of at most {tr.hp.t_max}",
        f"- terminated by: **{tr.terminated_by}**",
        f"- wall-clock: {tr.elapsed_seconds:.2f} s",
        f"- alpha: {tr.hp.alpha}",
    ]
    if tr.error:
        lines.append(f"- error: {tr.error}")
    best = tr.best
    if best is None:
        lines += ["", "No structurally valid DAG was produced."]
        return "\n".join(lines) + "\n"
    d = best.diagnostics
    lines += [
        "",
        f"## Best DAG (iteration {best.iteration}, composite score {tr.best_score:.4f})",
        "",
        f"Final decision: {'ACCEPTED' if d.ok else 'REJECTED'}",
        "",
        "| criterion | passed | observed | threshold |",
        "|---|---|---|---|",
    ]
    for c in d.criteria:
        lines.append(f"| {c.name} | {'yes' if c.passed else 'no'} | {_cell(c.observed)} | {c.comparison} {_cell(c.threshold)} |")
    rep = d.structural
    lines += [
        "",
        f"Pruning: {len(rep.temporal_edges_pruned)} temporal edges, "
        f"{len(rep.cycle_edges_pruned)} cycle edges, "
        f"{len(rep.disconnected_nodes_pruned)} disconnected nodes.",
        f"Final graph: {len(d.dag.nodes)} nodes, {len(d.dag.edges)} edges.",
    ]
    if d.global_:
        g = d.global_
        lines.append(f"Mean node R^2 {g.mean_r2:.4f}, mean adjusted R^2 {g.mean_adj_r2:.4f}.")
    lines += ["", "## Iterations", "", "| # | ok | composite | seconds |", "|---|---|---|---|"]
    for it in tr.iterations:
        cs = it.diagnostics.composite_score
        lines.append(
            f"| {it.iteration} | {'yes' if it.diagnostics.ok else 'no'} | "
            f"{'n/a' if cs is None else f'{cs:.4f}'} | {it.elapsed_seconds:.2f} |"
        )
    return "\n".join(lines) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.4g}"
    return str(v).replace("|", "/")


def persist(transcript: RunTranscript, out_dir: str | Path) -> dict[str, str]:
    """Write transcript, per-iteration diagnostics, best DAG and summary; return ``{path: sha256}``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {"transcript.json": dumps(transcript)}
    for it in transcript.iterations:
        files[f"diagnostics_{it.iteration}.json"] = dumps(it.diagnostics)
    best = transcript.best
    dag = best.diagnostics.dag if best else Dag((), ())
    files["best_dag.dot"] = dag.to_dot(transcript.hp.treatment, transcript.hp.outcome)
    files["summary.md"] = _summary(transcript)
    manifest = {}
    for name, text in files.items():
        path = out_dir / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"failed to write {path}: {exc}") from exc
        manifest[str(path)] = hashlib.sha256(text.encode("utf-8")).hexdigest()
    (out_dir / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return manifest
