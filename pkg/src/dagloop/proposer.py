"""DAG proposers: an HTTP chat-completion LLM, a scripted replay, and a correlation heuristic."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import httpx
import numpy as np

from . import prompts
from .config import Hyperparameters
from .data import PanelDataset

log = logging.getLogger(__name__)

DEFAULT_RETRIES = 3


class ProposalError(ValueError):
    """A reply that does not satisfy the proposal schema or the run's constraints."""


class ProposerFailed(RuntimeError):
    pass


class ScriptExhausted(Exception):
    pass


class ScriptError(ValueError):
    pass


@dataclass
class Proposal:
    reasoning: str
    assumptions: str
    edges: list[tuple[str, str]]
    negligible_effect_claimed: bool = False

    @property
    def nodes(self) -> list[str]:
        seen: list[str] = []
        for e in self.edges:
            for n in e:
                if n not in seen:
                    seen.append(n)
        return seen

    def to_dict(self) -> dict:
        d = {
            "reasoning": self.reasoning,
            "assumptions": self.assumptions,
            "edges": [list(e) for e in self.edges],
        }
        if self.negligible_effect_claimed:
            d["negligible_effect_claimed"] = True
        return d

    @classmethod
    def from_obj(
        cls,
        obj: Any,
        known_columns: Iterable[str] | None = None,
        treatment: str | None = None,
        outcome: str | None = None,
    ) -> "Proposal":
        if not isinstance(obj, dict):
            raise ProposalError("proposal must be a JSON object")
        for key in ("reasoning", "assumptions", "edges"):
            if key not in obj:
                raise ProposalError(f"missing required field {key!r}")
        for key in ("reasoning", "assumptions"):
            if not isinstance(obj[key], str):
                raise ProposalError(f"field {key!r} must be a string")
        raw_edges = obj["edges"]
        if not isinstance(raw_edges, list) or not raw_edges:
            raise ProposalError("'edges' must be a non-empty array")
        edges = []
        for i, e in enumerate(raw_edges):
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(n, str) for n in e)):
                raise ProposalError(
                    f"edges[{i}] = {json.dumps(e)} is not a [\"parent\", \"child\"] pair of strings"
                )
            edges.append((e[0], e[1]))
        flag = obj.get("negligible_effect_claimed", False)
        if not isinstance(flag, bool):
            raise ProposalError("'negligible_effect_claimed' must be a boolean")
        prop = cls(obj["reasoning"], obj["assumptions"], edges, flag)
        if known_columns is not None:
            known = set(known_columns)
            unknown = [n for n in prop.nodes if n not in known]
            if unknown:
                raise ProposalError(f"unknown column names: {unknown}")
        for role, name in (("treatment", treatment), ("outcome", outcome)):
            if name is not None and name not in prop.nodes:
                raise ProposalError(f"{role} {name!r} MUST BE IN THE DAG but is missing")
        for p, c in edges:
            if p == c:
                raise ProposalError(f"self-loop on {p!r}")
        if len(set(edges)) != len(edges):
            raise ProposalError("duplicate edges")
        return prop


def extract_json_object(text: str) -> dict:
    """The single top-level ``{...}`` object embedded in ``text``.

    Tolerates code fences and surrounding prose; zero or several top-level
    objects are rejected.
    """
    spans = []
    depth, start, in_str, esc = 0, None, False, False
    for i, ch in enumerate(text):
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"' and depth > 0:
            in_str = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                spans.append((start, i + 1))
    if not spans:
        raise ProposalError("no JSON object found in the reply")
    if len(spans) > 1:
        raise ProposalError(f"reply contains {len(spans)} top-level JSON objects; expected exactly one")
    a, b = spans[0]
    try:
        return json.loads(text[a:b])
    except json.JSONDecodeError as exc:
        raise ProposalError(f"invalid JSON: {exc}") from None


@dataclass
class BudgetCheck:
    accepted: bool
    changes: int
    added: list[str]
    removed: list[str]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def enforce_refinement_budget(prev: Proposal, nxt: Proposal, k_refine: int) -> BudgetCheck:
    """Variable changes between proposals; an add plus a remove count as one swap."""
    before, after = set(prev.nodes), set(nxt.nodes)
    added, removed = sorted(after - before), sorted(before - after)
    changes = max(len(added), len(removed))
    return BudgetCheck(changes <= k_refine, changes, added, removed)


def _history_items(history) -> list:
    if history is None:
        return []
    return list(getattr(history, "iterations", history))


def render_prompt(
    kind: str,
    hp: Hyperparameters,
    columns: Sequence[str],
    history=None,
    dataset_description: str = prompts.DEFAULT_DATASET_DESCRIPTION,
) -> list[dict]:
    """Chat messages for the bootstrap or a refinement turn.

    ``history`` is a run transcript (or its iteration list); every entry needs
    ``iteration``, ``proposal``, ``diagnostics`` and ``memo`` attributes.
    """
    past = [h for h in _history_items(history) if h.proposal is not None]
    values = {
        "treatment": hp.treatment,
        "outcome": hp.outcome,
        "initial_min_cols": hp.k_init_min,
        "initial_max_cols": hp.k_init_max,
        "all_cols_str": ", ".join(columns),
        "max_refinement_cols": hp.k_refine,
        "alpha": hp.alpha,
        "global_validity_threshold": hp.theta_global,
        "r2_threshold": hp.theta_r2,
        "vif_threshold": hp.theta_vif,
        "dataset_description": dataset_description,
    }
    system = {"role": "system", "content": prompts.render(prompts.SYSTEM_INITIAL, values)}
    if kind == "bootstrap":
        if past:
            raise ValueError("bootstrap prompt is only valid for the first iteration")
        user = prompts.render(prompts.USER_CURRENT, {**values, "iteration": 1})
        return [system, {"role": "user", "content": user}]
    if kind != "refinement":
        raise ValueError(f"unknown prompt kind {kind!r}")
    if not past:
        raise ValueError("refinement prompt needs at least one evaluated proposal")
    messages = [
        system,
        {"role": "system", "content": prompts.render(prompts.SYSTEM_REFINEMENT, values)},
    ]
    for h in past:
        template = prompts.USER_CURRENT if h.iteration == 1 else prompts.USER_PREVIOUS
        messages.append({"role": "user", "content": prompts.render(template, {**values, "iteration": h.iteration})})
        messages.append({"role": "assistant", "content": json.dumps(h.proposal.to_dict(), indent=2)})
        messages.append({"role": "user", "content": _feedback(h)})
    nxt = past[-1].iteration + 1
    messages.append({
        "role": "user",
        "content": prompts.render(prompts.USER_PREVIOUS, {**values, "iteration": nxt}),
    })
    return messages


def _feedback(h) -> str:
    d = h.diagnostics
    g = d.global_ if d is not None else None
    ident = d.identification if d is not None else None
    orientation = None
    if d is not None and d.criteria and any(c.name == "orientation" for c in d.criteria):
        orientation = d.criterion("orientation").passed
    return prompts.render(prompts.FEEDBACK, {
        "iteration": h.iteration,
        "verdict": "VERIFIED" if d is not None and d.ok else "NOT VERIFIED",
        "composite_score": f"{g.composite_score:.4f}" if g else "n/a",
        "mean_r2": f"{g.mean_r2:.4f}" if g else "n/a",
        "minimal_adj_set": json.dumps(ident.minimal_adjustment_set) if ident else "null",
        "orientation_ok": json.dumps(orientation),
        "memo": h.memo.text if h.memo is not None else "(none)",
    })


@dataclass
class EndpointConfig:
    url: str
    model: str
    api_key_env: str = "DAGLOOP_LLM_API_KEY"
    temperature: float = 0.0
    timeout: float = 120.0
    max_retries: int = DEFAULT_RETRIES
    backoff: float = 2.0
    content_path: tuple = ("choices", 0, "message", "content")

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["content_path"] = list(self.content_path)
        return d


def _dig(obj: Any, path: Sequence) -> Any:
    for key in path:
        obj = obj[key]
    return obj


class LLMProposer:
    """Chat-completion client with schema validation and retry-with-feedback."""

    def __init__(
        self,
        endpoint: EndpointConfig,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.client = client or httpx.Client(timeout=endpoint.timeout)
        self.sleep = sleep
        self.exchanges: list[dict] = []

    def _post(self, messages: list[dict]) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.endpoint.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": self.endpoint.temperature,
        }
        record: dict = {"request": body}
        self.exchanges.append(record)
        resp = self.client.post(self.endpoint.url, json=body, headers=headers, timeout=self.endpoint.timeout)
        record["status"] = resp.status_code
        record["response"] = resp.text
        resp.raise_for_status()
        return _dig(resp.json(), self.endpoint.content_path)

    def propose(self, messages: list[dict], validate: Callable[[dict], Proposal] | None = None) -> Proposal:
        validate = validate or Proposal.from_obj
        convo = list(messages)
        last_error = None
        for attempt in range(self.endpoint.max_retries + 1):
            try:
                content = self._post(convo)
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_error = f"request failed: {exc}"
                self.exchanges[-1]["error"] = last_error
                log.warning("LLM attempt %d: %s", attempt + 1, last_error)
                if attempt < self.endpoint.max_retries:
                    self.sleep(self.endpoint.backoff * 2**attempt)
                continue
            try:
                return validate(extract_json_object(content))
            except ProposalError as exc:
                last_error = str(exc)
                self.exchanges[-1]["error"] = last_error
                log.warning("LLM attempt %d rejected: %s", attempt + 1, last_error)
                convo = convo + [
                    {"role": "assistant", "content": content},
                    {"role": "user", "content": (
                        f"Your reply was rejected: {last_error}. Return exactly one JSON object "
                        "with string fields \"reasoning\" and \"assumptions\" and an \"edges\" array "
                        "of [\"parent\", \"child\"] pairs."
                    )},
                ]
        raise ProposerFailed(f"no valid proposal after {self.endpoint.max_retries + 1} attempts: {last_error}")


class ScriptedProposer:
    """Replays a JSON array of proposals, one per iteration."""

    def __init__(self, proposals: Sequence[Proposal]):
        self.proposals = list(proposals)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProposer":
        text = Path(path).read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScriptError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        if not isinstance(raw, list):
            raise ScriptError(f"{path}: line 1: script must be a JSON array of proposals")
        out = []
        for i, obj in enumerate(raw):
            try:
                out.append(Proposal.from_obj(obj))
            except ProposalError as exc:
                raise ScriptError(f"{path}: entry {i + 1}: {exc}") from None
        return cls(out)

    def propose(self, iteration: int) -> Proposal:
        if not 1 <= iteration <= len(self.proposals):
            raise ScriptExhausted(f"script has {len(self.proposals)} proposals, asked for #{iteration}")
        return self.proposals[iteration - 1]


def _abs_corr(ds: PanelDataset, a: str, b: str) -> float:
    x, y = ds.column(a), ds.column(b)
    if x.std() == 0 or y.std() == 0:
        return 0.0
    return abs(float(np.corrcoef(x, y)[0, 1]))


def heuristic_propose(ds: PanelDataset, hp: Hyperparameters, rng_seed: int) -> Proposal:
    """Temporally consistent star around the outcome, ranked by correlation.

    Every candidate is linked to the outcome in the direction its temporal tag
    allows, and additionally feeds the treatment when it is both allowed and
    correlated with it, so the graph is connected, acyclic and needs no pruning.
    """
    t, y = ds.treatment, ds.outcome
    tags = ds.tags()
    time_of = {n: tag.effective_time for n, tag in tags.items()}
    rng = np.random.default_rng(rng_seed)
    others = [n for n in ds.names if n not in (t, y)]
    hi = min(hp.k_init_max, len(others) + 2)
    lo = min(hp.k_init_min, hi)
    k = int(rng.integers(lo, hi + 1))
    jitter = rng.random(len(others))
    score = {n: max(_abs_corr(ds, n, y), _abs_corr(ds, n, t)) for n in others}
    ranked = sorted(zip(others, jitter), key=lambda nj: (-score[nj[0]], nj[1]))
    chosen = [n for n, _ in ranked[: k - 2]]

    edges = [(t, y) if time_of[t] <= time_of[y] else (y, t)]
    for c in chosen:
        edges.append((c, y) if time_of[c] <= time_of[y] else (y, c))
        if time_of[c] <= time_of[t] and _abs_corr(ds, c, t) >= 0.1:
            edges.append((c, t))
    return Proposal(
        reasoning=(
            f"Heuristic proposal: {len(chosen)} covariates ranked by absolute correlation "
            f"with {y} or {t}, oriented by temporal order."
        ),
        assumptions="Temporal ordering enforced by construction; no claims about latent confounding.",
        edges=edges,
    )
