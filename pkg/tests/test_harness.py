import csv
import json
from decimal import Decimal

import pytest

from cook2ltl import harness
from cook2ltl.core import AblationMode, Recipe
from cook2ltl.harness import (REPORT_HEADER, SUMMARY_HEADER, HarnessConfig, MetricsRow, ablate, emit_report,
                              emit_summary, executability, mock_config, read_report, run_corpus, run_corpus_detailed,
                              summary_path)
from cook2ltl.llm_client import MockLLM

STEPS = ["Boil the eggs.", "Peel the potato.", "Mash the potato."]


def three_verb_corpus():
    out = []
    for i in range(10):
        steps = [STEPS[i % 3], STEPS[(i + 1) % 3]] + (["Slice the tomato."] if i % 2 else [])
        out.append(Recipe.from_dict({"id": f"t{i:02d}", "steps": steps}))
    return out


@pytest.fixture(scope="module")
def config():
    return mock_config(harness.demo_fixtures_path())


def _row(mode=AblationMode.AR, run=0, **kw):
    base = dict(recipes=2, actions_total=10, actions_admissible=9, executability=0.9, llm_calls=3, prompt_tokens=120,
                completion_tokens=40, cost_usd=Decimal("0.00026"), wall_time_ms=5, run_index=run)
    base.update(kw)
    return MetricsRow(mode, **base)


def test_three_verbs_three_calls(config):
    corpus = three_verb_corpus()
    run = run_corpus_detailed(corpus, AblationMode.AR_LIB, config)
    assert run.row.llm_calls == run.distinct_non_identity_keys == 3
    assert run_corpus(corpus, AblationMode.AR_STAR, config).llm_calls == run.action_instances == 25
    assert run_corpus(corpus, AblationMode.AR, config).llm_calls == run.non_identity_instances == 20


def test_shipped_corpus_call_counts(config):
    corpus = harness.demo_corpus()
    assert len(corpus) == 20
    star, ar, lib = (run_corpus_detailed(corpus, m, config) for m in harness.MODE_ORDER)
    assert star.row.llm_calls == star.action_instances
    assert ar.row.llm_calls == ar.non_identity_instances
    assert lib.row.llm_calls == lib.distinct_non_identity_keys
    assert lib.row.llm_calls <= 0.6 * star.row.llm_calls
    assert lib.row.executability >= ar.row.executability >= star.row.executability
    assert not lib.failures


def test_starting_library_is_copied(config):
    first = run_corpus_detailed(three_verb_corpus(), AblationMode.AR_LIB, config)
    warm = HarnessConfig(config.client_factory, library=first.library)
    again = run_corpus_detailed(three_verb_corpus(), AblationMode.AR_LIB, warm)
    assert again.row.llm_calls == 0
    assert again.library is not first.library


def test_failures_are_recorded_and_run_continues():
    corpus = three_verb_corpus() + [Recipe.from_dict({"id": "odd", "steps": ["Flambe the banana."]})]
    run = run_corpus_detailed(corpus, AblationMode.AR_LIB, mock_config(harness.demo_fixtures_path()))
    assert list(run.failures) == ["odd"] and "MissingFixture" in run.failures["odd"]
    assert len(run.translations) == 10 and run.row.recipes == 11


def test_parallel_workers_match_serial(config):
    corpus = harness.demo_corpus()
    serial = run_corpus(corpus, AblationMode.AR_LIB, config)
    par = run_corpus(corpus, AblationMode.AR_LIB, HarnessConfig(config.client_factory, workers=8))
    assert par.llm_calls == serial.llm_calls
    assert par.actions_total == serial.actions_total


def test_executability_zero_total_flagged(caplog):
    assert executability(0, 0) == 0.0
    assert "executability" in caplog.text
    assert executability(3, 4) == 0.75


def test_metrics_row_validation():
    with pytest.raises(ValueError):
        _row(llm_calls=-1)
    with pytest.raises(ValueError):
        _row(actions_admissible=11)


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "r.csv"
    emit_report([], path)
    assert path.read_text() == ",".join(REPORT_HEADER) + "\n"
    assert read_report(path) == []


def test_report_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    rows = [_row(executability=2 / 3, actions_total=3, actions_admissible=2)]
    emit_report(rows, path)
    assert read_report(path) == rows
    with open(path, newline="") as fh:
        assert next(csv.reader(fh)) == REPORT_HEADER


def test_ablate_matrix_has_thirty_rows(tmp_path):
    config = HarnessConfig(lambda: MockLLM(json.loads(harness.demo_fixtures_path().read_text())))
    rows = ablate(three_verb_corpus()[:2], harness.MODE_ORDER, 10, config)
    assert len(rows) == 30
    assert [(r.mode, r.run_index) for r in rows] == [(m, i) for m in harness.MODE_ORDER for i in range(10)]
    emit_report(rows, tmp_path / "r.csv")
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 31


def test_summary_sidecar(tmp_path):
    rows = [_row(run=0, wall_time_ms=4), _row(run=1, wall_time_ms=8), _row(AblationMode.AR_LIB)]
    report = tmp_path / "ablation.csv"
    assert summary_path(report) == tmp_path / "ablation.summary.csv"
    emit_summary(rows, summary_path(report))
    with open(summary_path(report), newline="") as fh:
        recs = list(csv.DictReader(fh))
    assert list(recs[0]) == SUMMARY_HEADER
    assert recs[0]["mode"] == "ar" and recs[0]["runs"] == "2"
    assert float(recs[0]["wall_time_ms_mean"]) == 6 and float(recs[0]["wall_time_ms_std"]) == pytest.approx(2 ** 1.5, rel=1e-5)
    assert recs[1]["executability_std"] == "0"


def test_latency_injection_shows_in_wall_time():
    config = mock_config(harness.demo_fixtures_path(), latency_ms=20)
    row = run_corpus(three_verb_corpus()[:1], AblationMode.AR_STAR, config)
    assert row.wall_time_ms >= 20 * row.llm_calls


def test_load_corpus_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        harness.load_corpus(tmp_path / "missing")
    (tmp_path / "a.txt").write_text("Boil the eggs.\nPeel the eggs.\n")
    assert harness.load_corpus(tmp_path)[0].steps[1].text == "Peel the eggs."
