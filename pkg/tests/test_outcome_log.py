import json
from datetime import date

import pytest

from desk.agents import AgentCall, AnalystReport, HeadTraderVerdict, TraderSuggestion, Verdict
from desk.domain import AgentAction, Decision, PromptVariant, StrategyKind, StrategyName
from desk.errors import DataError, SchemaMismatch
from desk.outcome_log import (OutcomeRecord, OutcomeWriter, RunManifest, manifest_digest, read_outcomes,
                              read_transcripts, repair_tail, transcripts_path, utc_now, write_manifest)
from desk.strategies import PipelineOutcome


def ho_outcome(aid="a1", calls=()):
    return PipelineOutcome(
        article_id=aid,
        ticker="2330",
        published_at=date(2024, 1, 6),
        effective_date=date(2024, 1, 6),
        strategy=StrategyKind(StrategyName.HO),
        variant=PromptVariant("long_term", "senior"),
        final=Decision.UNDERWEIGHT,
        trader_suggestions=(TraderSuggestion(AgentAction.SHORT, "costs", "p", "[Action]: short\n[Thoughts]: costs"),),
        head_verdict=HeadTraderVerdict(Verdict.FOLLOW, "", "[Action]: Follow", "h"),
        analyst_report=AnalystReport(aid, "scenarios", "p"),
        presented=(0,),
        backends={"analyst": "p", "trader": "p", "trader_b": None, "head": "h"},
        group="HO[p] (long_term, senior)",
        calls=tuple(calls),
    )


def call(role):
    return AgentCall(role, "p", "k" * 64, f"{role} prompt", f"{role} raw", "parsed")


def test_record_preserves_outcome_fields():
    o = ho_outcome()
    back = OutcomeRecord.from_outcome(o).to_outcome()
    assert back == o
    assert back.analyst_report.backend == "p"
    skipped = PipelineOutcome("b", "2330", date(2024, 1, 2), date(2024, 1, 2), StrategyKind("cot"),
                              PromptVariant(), None, skip_reason="trader: UnparsableAction: no [Action] marker")
    rec = OutcomeRecord.from_outcome(skipped)
    assert rec.final == "skipped"
    assert rec.to_outcome().skipped


def test_writer_links_transcripts(tmp_path):
    log = tmp_path / "outcomes.jsonl"
    with OutcomeWriter(log) as w:
        w.write(ho_outcome("a1", [call("analyst"), call("trader_from_both"), call("head_trader")]))
        w.write(ho_outcome("a2", [call("analyst")]))
    outcomes = read_outcomes(log)
    assert [o.transcript_refs for o in outcomes] == [(0, 1, 2), (3,)]
    rows = read_transcripts(transcripts_path(log))
    assert [r["id"] for r in rows] == [0, 1, 2, 3]
    assert rows[2]["role"] == "head_trader" and rows[2]["article_id"] == "a1"
    # reopening continues the id sequence
    with OutcomeWriter(log) as w:
        w.write(ho_outcome("a3", [call("analyst")]))
    assert read_outcomes(log)[-1].transcript_refs == (4,)
    line = log.read_text(encoding="utf-8").splitlines()[0]
    assert json.loads(line)["schema_version"] == "1"


def test_schema_mismatch_names_the_log(tmp_path):
    log = tmp_path / "old.jsonl"
    payload = OutcomeRecord.from_outcome(ho_outcome()).model_dump(mode="json")
    payload["schema_version"] = "0"
    log.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch) as err:
        read_outcomes(log)
    assert "old.jsonl" in str(err.value)
    with pytest.raises(DataError):
        read_outcomes(tmp_path / "absent.jsonl")


def test_repair_tail_drops_partial_line(tmp_path):
    log = tmp_path / "outcomes.jsonl"
    with OutcomeWriter(log) as w:
        w.write(ho_outcome("a1"))
    with open(log, "a", encoding="utf-8") as fh:
        fh.write('{"schema_version": "1", "article_')
    assert repair_tail(log) == 1
    assert len(read_outcomes(log)) == 1


def test_manifest_written_next_to_log(tmp_path):
    log = tmp_path / "outcomes.jsonl"
    with OutcomeWriter(log) as w:
        w.write(ho_outcome())
    manifest = RunManifest(run_name="r", command="simulate", code_version="0", config_digest="c",
                           started_at=utc_now())
    path = write_manifest(log, manifest)
    assert path.name == "outcomes.manifest.json"
    data = json.loads(path.read_text(encoding="utf-8"))
    assert len(data["outcome_log_digest"]) == 64
    assert manifest_digest(log) is not None
    assert manifest_digest(tmp_path / "other.jsonl") is None
