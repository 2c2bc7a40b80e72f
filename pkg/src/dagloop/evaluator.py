"""Full statistical verification of one candidate DAG against the data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .config import Hyperparameters
from .dag import Dag, StructuralReport, structural_preprocess
from .data import PanelDataset
from .identification import (
    IdentificationResult,
    PositivityResult,
    minimal_adjustment_set,
    positivity_check,
)
from .stats import (
    RegressionError,
    RegressionFit,
    delta_bic,
    fdr_adjust,
    fit_node,
    residual_correlation,
    vif,
)

DIRECTION_BIC_MARGIN = 2.0

CRITERIA = (
    "identifiability",
    "orientation",
    "edge_significance",
    "global_validity",
    "model_fit",
    "multicollinearity",
    "positivity",
)


@dataclass
class NodeDiagnostics:
    node: str
    parents: list[str]
    fit: RegressionFit | None
    vifs: dict[str, float]
    adequate: bool
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "parents": list(self.parents),
            "fit": self.fit.to_dict() if self.fit else None,
            "vifs": dict(self.vifs),
            "adequate": self.adequate,
            "error": self.error,
        }


@dataclass
class EdgeStats:
    parent: str
    child: str
    coefficient: float
    p_raw: float
    p_fdr: float
    residual_corr: float
    residual_corr_defined: bool
    delta_bic: float
    mixed_response: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GlobalDiagnostics:
    n_edges: int
    n_significant_edges: int
    n_models: int
    n_significant_models: int
    n_oriented_edges: int
    sig_edge_ratio: float
    sig_model_ratio: float
    direction_accuracy: float
    mean_r2: float
    mean_adj_r2: float
    composite_score: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TreatmentEffect:
    in_dag: bool
    adjustment_set: list[str]
    fit: RegressionFit | None
    coefficient: float
    p_raw: float
    p_value: float  # the one judged against alpha
    p_is_fdr_adjusted: bool
    delta_bic: float
    mixed_response: bool
    error: str | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["fit"] = self.fit.to_dict() if self.fit else None
        return d


@dataclass
class Criterion:
    name: str
    passed: bool
    observed: Any
    threshold: Any
    comparison: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CriteriaInputs:
    identifiable: bool
    adjustment_set: list[str] | None
    treatment_delta_bic: float
    treatment_p: float
    negligible_effect_claimed: bool
    composite_score: float
    mean_r2: float
    vifs: list[tuple[str, str, float]]  # (node, parent, vif)
    positivity_ok: bool
    overlap_share: float


@dataclass
class Diagnostics:
    structural: StructuralReport
    dag: Dag
    nodes: list[NodeDiagnostics] = field(default_factory=list)
    edges: list[EdgeStats] = field(default_factory=list)
    global_: GlobalDiagnostics | None = None
    identification: IdentificationResult | None = None
    positivity: PositivityResult | None = None
    treatment_edge: TreatmentEffect | None = None
    criteria: list[Criterion] = field(default_factory=list)
    ok: bool = False

    @property
    def composite_score(self) -> float | None:
        return self.global_.composite_score if self.global_ else None

    def criterion(self, name: str) -> Criterion:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "structural": self.structural.to_dict(),
            "final_dag": {"nodes": list(self.dag.nodes), "edges": [list(e) for e in self.dag.edges]},
            "criteria": [c.to_dict() for c in self.criteria],
            "global": self.global_.to_dict() if self.global_ else None,
            "identification": self.identification.to_dict() if self.identification else None,
            "positivity": self.positivity.to_dict() if self.positivity else None,
            "treatment_edge": self.treatment_edge.to_dict() if self.treatment_edge else None,
            "nodes": [n.to_dict() for n in self.nodes],
            "edges": [e.to_dict() for e in self.edges],
        }


def decide(inputs: CriteriaInputs, hp: Hyperparameters) -> tuple[bool, list[Criterion]]:
    max_vif = max((v for *_, v in inputs.vifs), default=None)
    p_ok = inputs.treatment_p < hp.alpha or (
        hp.accept_negligible_effect and inputs.negligible_effect_claimed
    )
    records = [
        Criterion("identifiability", inputs.identifiable, inputs.adjustment_set, "valid set exists", "exists"),
        Criterion(
            "orientation",
            not math.isnan(inputs.treatment_delta_bic) and inputs.treatment_delta_bic > 0,
            inputs.treatment_delta_bic, 0.0, ">",
        ),
        Criterion("edge_significance", p_ok, inputs.treatment_p, hp.alpha, "<"),
        Criterion("global_validity", inputs.composite_score >= hp.theta_global,
                  inputs.composite_score, hp.theta_global, ">="),
        Criterion("model_fit", inputs.mean_r2 >= hp.theta_r2, inputs.mean_r2, hp.theta_r2, ">="),
        Criterion("multicollinearity", max_vif is None or max_vif <= hp.theta_vif,
                  max_vif, hp.theta_vif, "<="),
        Criterion("positivity", inputs.positivity_ok, inputs.overlap_share, 0.90, ">"),
    ]
    return all(r.passed for r in records), records


def _node_models(dag: Dag, ds: PanelDataset) -> list[NodeDiagnostics]:
    out = []
    for node in dag.nodes:
        parents = dag.parents(node)
        if not parents:
            continue
        vifs = vif(parents, ds)
        try:
            fit, error = fit_node(ds, node, parents), None
            if not fit.converged:
                error = "model did not converge"
        except RegressionError as exc:
            fit, error = None, str(exc)
        adequate = fit is not None and fit.converged and all(math.isfinite(v) for v in vifs.values())
        out.append(NodeDiagnostics(node, parents, fit, vifs, adequate, error))
    return out


def _usable(fit: RegressionFit | None) -> bool:
    return fit is not None and fit.converged


def _treatment_effect(
    ds: PanelDataset, dag: Dag, adjustment: list[str] | None
) -> TreatmentEffect:
    t, y = ds.treatment, ds.outcome
    covars = list(adjustment or [])
    mixed = ds.is_binary(t) != ds.is_binary(y)
    dbic = delta_bic(t, y, ds)
    try:
        fit, error = fit_node(ds, y, [t] + covars), None
    except RegressionError as exc:
        fit, error = None, str(exc)
    if _usable(fit):
        coef, p = fit.coef(t), fit.pvalue(t)
    else:
        coef, p = math.nan, 1.0
        error = error or "treatment model did not converge"
    return TreatmentEffect(
        in_dag=(t, y) in dag.edges,
        adjustment_set=covars,
        fit=fit,
        coefficient=coef,
        p_raw=p,
        p_value=p,
        p_is_fdr_adjusted=False,
        delta_bic=dbic,
        mixed_response=mixed,
        error=error,
    )


def evaluate_dag(
    dag: Dag,
    ds: PanelDataset,
    hp: Hyperparameters,
    negligible_effect_claimed: bool = False,
) -> Diagnostics:
    t, y = ds.treatment, ds.outcome
    final, report = structural_preprocess(dag, ds.tags(), t, y)
    diag = Diagnostics(structural=report, dag=final)
    if not report.structurally_valid:
        diag.criteria = [Criterion("graph_validity", False, list(final.nodes), [t, y], "contains")]
        return diag

    nodes = _node_models(final, ds)
    by_node = {n.node: n for n in nodes}

    ident = minimal_adjustment_set(final, t, y)
    effect = _treatment_effect(ds, final, ident.minimal_adjustment_set)

    p_raw, partial = [], []
    for parent, child in final.edges:
        nd = by_node[child]
        if (parent, child) == (t, y):
            p_raw.append(effect.p_raw)
        else:
            p_raw.append(nd.fit.pvalue(parent) if _usable(nd.fit) else 1.0)
        others = [q for q in nd.parents if q != parent]
        partial.append(residual_correlation(child, parent, others, ds))
    p_fdr = fdr_adjust(p_raw)

    edges = []
    for (parent, child), pr, pa, (rho, rho_ok) in zip(final.edges, p_raw, p_fdr, partial):
        fit = by_node[child].fit
        edges.append(EdgeStats(
            parent=parent,
            child=child,
            coefficient=fit.coef(parent) if _usable(fit) else math.nan,
            p_raw=pr,
            p_fdr=pa,
            residual_corr=rho,
            residual_corr_defined=rho_ok,
            delta_bic=delta_bic(parent, child, ds),
            mixed_response=ds.is_binary(parent) != ds.is_binary(child),
        ))
    if effect.in_dag:
        effect.p_value = edges[final.edges.index((t, y))].p_fdr
        effect.p_is_fdr_adjusted = True

    n_edges = len(edges)
    n_sig_edges = sum(e.p_fdr < hp.alpha for e in edges)
    n_oriented = sum(e.delta_bic > DIRECTION_BIC_MARGIN for e in edges if not math.isnan(e.delta_bic))
    n_models = len(nodes)
    n_sig_models = sum(_usable(n.fit) and n.fit.joint_p < hp.alpha for n in nodes)
    r2s = [n.fit.r2 if _usable(n.fit) else 0.0 for n in nodes]
    adj_r2s = [n.fit.adj_r2 if _usable(n.fit) else 0.0 for n in nodes]
    sig_edge_ratio = n_sig_edges / n_edges if n_edges else 0.0
    sig_model_ratio = n_sig_models / n_models if n_models else 0.0
    direction_accuracy = n_oriented / n_edges if n_edges else 0.0
    glob = GlobalDiagnostics(
        n_edges=n_edges,
        n_significant_edges=n_sig_edges,
        n_models=n_models,
        n_significant_models=n_sig_models,
        n_oriented_edges=n_oriented,
        sig_edge_ratio=sig_edge_ratio,
        sig_model_ratio=sig_model_ratio,
        direction_accuracy=direction_accuracy,
        mean_r2=sum(r2s) / n_models if n_models else 0.0,
        mean_adj_r2=sum(adj_r2s) / n_models if n_models else 0.0,
        composite_score=(sig_edge_ratio + sig_model_ratio + direction_accuracy) / 3.0,
    )

    positivity = positivity_check(ds, t, ident.minimal_adjustment_set or [])

    ok, records = decide(
        CriteriaInputs(
            identifiable=ident.identifiable,
            adjustment_set=ident.minimal_adjustment_set,
            treatment_delta_bic=effect.delta_bic,
            treatment_p=effect.p_value,
            negligible_effect_claimed=negligible_effect_claimed,
            composite_score=glob.composite_score,
            mean_r2=glob.mean_r2,
            vifs=[(n.node, p, v) for n in nodes for p, v in n.vifs.items()],
            positivity_ok=positivity.positivity_ok,
            overlap_share=positivity.overlap_share,
        ),
        hp,
    )
    diag.nodes = nodes
    diag.edges = edges
    diag.global_ = glob
    diag.identification = ident
    diag.positivity = positivity
    diag.treatment_edge = effect
    diag.criteria = [Criterion("graph_validity", True, list(final.nodes), [t, y], "contains")] + records
    diag.ok = ok
    return diag


@dataclass
class FailureMemo:
    ok: bool
    failed_criteria: list[Criterion]
    offending_edges: list[tuple[str, str, float]]
    offending_nodes: list[tuple[str, str]]
    vif_violations: list[tuple[str, str, float]]
    identification: str
    pruning: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "failed_criteria": [c.to_dict() for c in self.failed_criteria],
            "offending_edges": [list(e) for e in self.offending_edges],
            "offending_nodes": [list(n) for n in self.offending_nodes],
            "vif_violations": [list(v) for v in self.vif_violations],
            "identification": self.identification,
            "pruning": dict(self.pruning),
            "text": self.text,
        }

    @property
    def text(self) -> str:
        if self.ok:
            return "All criteria satisfied."
        lines = ["Failed criteria:"]
        for c in self.failed_criteria:
            lines.append(f"- {c.name}: observed {_fmt(c.observed)}, required {c.comparison} {_fmt(c.threshold)}")
        lines.append(f"Identification: {self.identification}")
        if any(self.pruning.values()):
            lines.append(
                "Structural pruning: "
                + ", ".join(f"{k}={v}" for k, v in self.pruning.items())
            )
        if self.offending_edges:
            lines.append("Edges not significant after FDR correction (parent -> child, adjusted p):")
            lines += [f"- {p} -> {c}: {_fmt(q)}" for p, c, q in self.offending_edges]
        if self.offending_nodes:
            lines.append("Inadequate node models:")
            lines += [f"- {n}: {why}" for n, why in self.offending_nodes]
        if self.vif_violations:
            lines.append("VIF violations (node, parent, VIF):")
            lines += [f"- ({n}, {p}, {_fmt(v)})" for n, p, v in self.vif_violations]
        return "\n".join(lines)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.4g}"
    return str(v)


def build_failure_memo(diag: Diagnostics, hp: Hyperparameters) -> FailureMemo:
    rep = diag.structural
    pruning = {
        "temporal_edges_pruned": len(rep.temporal_edges_pruned),
        "cycle_edges_pruned": len(rep.cycle_edges_pruned),
        "disconnected_nodes_pruned": len(rep.disconnected_nodes_pruned),
    }
    if diag.identification is None:
        ident = "not evaluated (treatment or outcome missing from the pruned graph)"
    elif diag.identification.identifiable:
        ident = f"identifiable; minimal adjustment set {sorted(diag.identification.minimal_adjustment_set)}"
    else:
        ident = "not identifiable; minimal adjustment set is absent"
        if diag.identification.search_capped:
            ident += " (none found within the size cap)"
    offending_nodes = []
    for n in diag.nodes:
        if n.fit is None or not n.fit.converged:
            offending_nodes.append((n.node, n.error or "model failed"))
        elif n.fit.joint_p >= hp.alpha:
            offending_nodes.append((n.node, f"parents jointly insignificant (p={n.fit.joint_p:.4g})"))
    return FailureMemo(
        ok=diag.ok,
        failed_criteria=[c for c in diag.criteria if not c.passed],
        offending_edges=[(e.parent, e.child, e.p_fdr) for e in diag.edges if e.p_fdr >= hp.alpha],
        offending_nodes=offending_nodes,
        vif_violations=[
            (n.node, p, v) for n in diag.nodes for p, v in n.vifs.items() if not v <= hp.theta_vif
        ],
        identification=ident,
        pruning=pruning,
    )
