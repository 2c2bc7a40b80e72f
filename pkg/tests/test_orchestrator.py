import json
import os
from pathlib import Path

import numpy as np
import pytest

from dagloop.config import ConfigError, Hyperparameters
from dagloop.orchestrator import NONDETERMINISTIC_KEYS, RunConfig, run
from dagloop.proposer import Proposal, ProposerFailed
from dagloop.synthetic import confounded_triangle, to_dataset

TRUE = {"reasoning": "truth", "assumptions": "none", "edges": [["C", "T"], ["C", "Y"], ["T", "Y"]]}


def null_effect(n=1000, seed=0):
    """Confounded triangle without a T -> Y effect, plus an independent column N."""
    ds = confounded_triangle(n, seed=seed, effect=0.0)
    cols = {name: ds.column(name) for name in ds.names}
    cols["N"] = np.random.default_rng(seed + 1000).standard_normal(n)
    return to_dataset(cols, "T", "Y")


def strip(obj):
    if isinstance(obj, dict):
        return {k: strip(v) for k, v in obj.items() if k not in NONDETERMINISTIC_KEYS}
    if isinstance(obj, list):
        return [strip(v) for v in obj]
    return obj


def scripted_run(tmp_path, proposals, ds, t_max=10, out="out", seed=0):
    script = tmp_path / "script.json"
    script.write_text(json.dumps(proposals))
    hp = Hyperparameters("T", "Y", k_init_min=2, t_max=t_max)
    cfg = RunConfig(hp=hp, proposer="scripted", script_path=script, out_dir=tmp_path / out, seed=seed)
    return run(cfg, ds=ds)


def test_true_dag_is_accepted_in_one_iteration(tmp_path):
    tr = scripted_run(tmp_path, [TRUE], confounded_triangle(1000, seed=0))
    assert tr.terminated_by == "accepted"
    assert len(tr.iterations) == 1 and tr.best_iteration == 1
    dot = (tmp_path / "out" / "best_dag.dot").read_text()
    assert '"C" -> "T";' in dot


def test_budget_exhausted_keeps_argmax(tmp_path):
    ds = null_effect()
    proposals = [
        {**TRUE, "edges": TRUE["edges"] + [["N", "Y"]]},
        TRUE,
        {**TRUE, "edges": TRUE["edges"] + [["N", "T"], ["N", "Y"]]},
    ]
    tr = scripted_run(tmp_path, proposals, ds, t_max=3)
    assert tr.terminated_by == "budget_exhausted"
    assert len(tr.iterations) == 3
    scores = [it.diagnostics.composite_score for it in tr.iterations]
    assert not any(it.diagnostics.ok for it in tr.iterations)
    assert tr.best_iteration == 1 + scores.index(max(scores))
    assert tr.best_score == max(scores)


def test_script_exhaustion(tmp_path):
    tr = scripted_run(tmp_path, [TRUE], null_effect(), t_max=5)
    assert tr.terminated_by == "script_exhausted"
    assert len(tr.iterations) == 1


def test_structurally_invalid_iteration_does_not_become_best(tmp_path):
    proposals = [{"reasoning": "", "assumptions": "", "edges": [["C", "T"]]}]
    tr = scripted_run(tmp_path, proposals, confounded_triangle(300, seed=0), t_max=1)
    assert tr.best_iteration is None
    assert json.loads((tmp_path / "out" / "transcript.json").read_text())["best_score"] == "-inf"


def test_t_max_zero_is_rejected(tmp_path):
    hp = Hyperparameters("T", "Y", t_max=0)
    with pytest.raises(ConfigError):
        run(RunConfig(hp=hp, out_dir=tmp_path), ds=confounded_triangle(100))


def test_artifacts_written(tmp_path):
    proposals = [TRUE, {**TRUE, "edges": TRUE["edges"] + [["N", "Y"]]}]
    tr = scripted_run(tmp_path, proposals, null_effect(), t_max=2)
    files = sorted(p.name for p in (tmp_path / "out").iterdir())
    assert files == ["best_dag.dot", "diagnostics_1.json", "diagnostics_2.json", "manifest.json",
                     "summary.md", "transcript.json"]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert len(manifest) == 5
    assert "terminated by: **" + tr.terminated_by in (tmp_path / "out" / "summary.md").read_text()


def test_rerun_is_identical_modulo_run_metadata(tmp_path):
    ds = confounded_triangle(400, seed=5, effect=0.1)
    proposals = [{"reasoning": "", "assumptions": "", "edges": [["T", "Y"]]}, TRUE]
    scripted_run(tmp_path, proposals, ds, out="a")
    scripted_run(tmp_path, proposals, ds, out="b")
    a = json.loads((tmp_path / "a" / "transcript.json").read_text())
    b = json.loads((tmp_path / "b" / "transcript.json").read_text())
    assert a["run_id"] != b["run_id"]
    assert strip(a) == strip(b)
    for name in ("diagnostics_1.json", "best_dag.dot"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_out_dir_fails_before_loop(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    calls = []
    with pytest.raises(OSError):
        run(RunConfig(hp=Hyperparameters("T", "Y"), out_dir=locked / "x"), ds=confounded_triangle(100),
            proposer=lambda t, prompt: calls.append(t))
    assert calls == []


def test_out_dir_that_is_a_file_fails_before_loop(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    calls = []
    with pytest.raises(OSError):
        run(RunConfig(hp=Hyperparameters("T", "Y"), out_dir=blocker / "x"), ds=confounded_triangle(100),
            proposer=lambda t, prompt: calls.append(t))
    assert calls == []


def test_proposer_failure_preserves_best_so_far(tmp_path):
    def proposer(t, prompt):
        if t == 1:
            return Proposal("", "", [("C", "T"), ("C", "Y"), ("T", "Y")])
        raise ProposerFailed("endpoint down")

    ds = confounded_triangle(400, seed=0, effect=0.0)
    tr = run(RunConfig(hp=Hyperparameters("T", "Y", k_init_min=2), out_dir=tmp_path), ds=ds, proposer=proposer)
    assert tr.terminated_by == "proposer_failed"
    assert tr.best_iteration == 1 and "endpoint down" in tr.error
    assert (tmp_path / "best_dag.dot").exists()


def test_refinement_prompt_carries_memo(tmp_path):
    seen = []

    def proposer(t, prompt):
        seen.append(prompt)
        return Proposal("", "", [("C", "T"), ("C", "Y"), ("T", "Y")])

    ds = null_effect()
    tr = run(RunConfig(hp=Hyperparameters("T", "Y", k_init_min=2, t_max=3), out_dir=tmp_path), ds=ds,
             proposer=proposer)
    memo2 = tr.iterations[1].memo.text
    assert memo2 in "\n".join(m["content"] for m in seen[2])


def test_sampling_applies_when_budget_below_column_count(tmp_path, panel):
    hp = Hyperparameters(panel.treatment, panel.outcome, m=20, t_max=1)
    tr = run(RunConfig(hp=hp, out_dir=tmp_path, seed=3), ds=panel)
    assert len(tr.columns) == 20 and tr.columns[:2] == [panel.treatment, panel.outcome]
