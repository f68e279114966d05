# desk/outcome_log.py
"""
Persistence for runs.

  <stem>.jsonl                 one OutcomeRecord per line, in corpus order
  <stem>.transcripts.jsonl.gz  one record per agent call; ids are sequential offsets
  <stem>.manifest.json         RunManifest, written atomically at run end
"""
import gzip
import json
import logging
import os
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError

from .agents import AnalystReport, HeadTraderVerdict, TraderSuggestion, Verdict
from .domain import AgentAction, Decision, Horizon, PromptVariant, Seniority, StrategyKind, StrategyName
from .errors import DataError, SchemaMismatch
from .strategies import PipelineOutcome
from .utils import atomic_write, file_digest

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
SKIPPED = "skipped"


def transcripts_path(log_path) -> Path:
    p = Path(log_path)
    return p.with_name(p.stem + ".transcripts.jsonl.gz")


def manifest_path(log_path) -> Path:
    p = Path(log_path)
    return p.with_name(p.stem + ".manifest.json")


class SuggestionRecord(BaseModel):
    action: AgentAction
    thoughts: str = ""
    backend: str
    raw: str


class VerdictRecord(BaseModel):
    verdict: Verdict
    thoughts: str = ""
    backend: str = ""
    raw: str


class OutcomeRecord(BaseModel):
    schema_version: str = SCHEMA_VERSION
    article_id: str
    ticker: str
    published_at: date
    effective_date: date
    strategy: StrategyName
    head_backend: Optional[str] = None
    group: str
    horizon: Horizon
    seniority: Seniority
    backends: dict[str, Optional[str]] = Field(default_factory=dict)
    final: Literal["overweight", "neutral", "underweight", "skipped"]
    skip_reason: str = ""
    analyst_report: Optional[str] = None
    trader_suggestions: list[SuggestionRecord] = Field(default_factory=list)
    head_verdict: Optional[VerdictRecord] = None
    presented: list[int] = Field(default_factory=list)
    mode: Literal["simulated", "replayed"] = "simulated"
    transcript_refs: list[int] = Field(default_factory=list)

    @classmethod
    def from_outcome(cls, o: PipelineOutcome, transcript_refs=None) -> "OutcomeRecord":
        verdict = None
        if o.head_verdict is not None:
            hv = o.head_verdict
            verdict = VerdictRecord(verdict=hv.verdict, thoughts=hv.thoughts, backend=hv.backend, raw=hv.raw)
        return cls(
            article_id=o.article_id,
            ticker=o.ticker,
            published_at=o.published_at,
            effective_date=o.effective_date,
            strategy=o.strategy.name,
            head_backend=o.strategy.head_backend,
            group=o.group,
            horizon=o.variant.horizon,
            seniority=o.variant.seniority,
            backends=dict(o.backends),
            final=SKIPPED if o.skipped else o.final.value,
            skip_reason=o.skip_reason,
            analyst_report=o.analyst_report.text if o.analyst_report else None,
            trader_suggestions=[SuggestionRecord(action=s.action, thoughts=s.thoughts, backend=s.backend, raw=s.raw)
                                for s in o.trader_suggestions],
            head_verdict=verdict,
            presented=list(o.presented),
            mode=o.mode,
            transcript_refs=list(transcript_refs if transcript_refs is not None else o.transcript_refs),
        )

    def to_outcome(self) -> PipelineOutcome:
        report = None
        if self.analyst_report is not None:
            report = AnalystReport(self.article_id, self.analyst_report, self.backends.get("analyst") or "")
        verdict = None
        if self.head_verdict is not None:
            hv = self.head_verdict
            verdict = HeadTraderVerdict(hv.verdict, hv.thoughts, hv.raw, hv.backend)
        return PipelineOutcome(
            article_id=self.article_id,
            ticker=self.ticker,
            published_at=self.published_at,
            effective_date=self.effective_date,
            strategy=StrategyKind(self.strategy, self.head_backend),
            variant=PromptVariant(self.horizon, self.seniority),
            final=None if self.final == SKIPPED else Decision(self.final),
            trader_suggestions=tuple(TraderSuggestion(s.action, s.thoughts, s.backend, s.raw)
                                     for s in self.trader_suggestions),
            head_verdict=verdict,
            analyst_report=report,
            presented=tuple(self.presented),
            skip_reason=self.skip_reason,
            backends=dict(self.backends),
            group=self.group,
            mode=self.mode,
            transcript_refs=tuple(self.transcript_refs),
        )


def dump_record(record: OutcomeRecord) -> str:
    return record.model_dump_json() + "\n"


def read_records(path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataError(f"outcome log not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: not JSON ({e})")
            found = payload.get("schema_version") if isinstance(payload, dict) else None
            if found != SCHEMA_VERSION:
                raise SchemaMismatch(path, found, SCHEMA_VERSION)
            try:
                records.append(OutcomeRecord.model_validate(payload))
            except ValidationError as e:
                raise DataError(f"{path}:{lineno}: invalid outcome record\n{e}")
    return records


def read_outcomes(path) -> list:
    return [r.to_outcome() for r in read_records(path)]


def repair_tail(path) -> int:
    """Drop an unterminated last line left by an interrupted run; return complete line count."""
    path = Path(path)
    if not path.exists():
        return 0
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        logger.warning("%s: dropping %d bytes of a partial record", path, len(data) - cut)
        with open(path, "r+b") as fh:
            fh.truncate(cut)
        data = data[:cut]
    return data.count(b"\n")


class TranscriptStore:
    """Append-only gzip JSON lines; mtime is pinned so identical runs give identical bytes."""

    def __init__(self, path):
        self.path = Path(path)
        self.next_id = self._count()

    def _count(self):
        if not self.path.exists():
            return 0
        n = 0
        try:
            with gzip.open(self.path, "rt", encoding="utf-8") as fh:
                for _ in fh:
                    n += 1
        except (EOFError, OSError) as e:
            logger.warning("%s: unreadable tail (%s); continuing after %d records", self.path, e, n)
        return n

    def append(self, article_id, group, calls) -> list:
        if not calls:
            return []
        refs = []
        lines = []
        for call in calls:
            refs.append(self.next_id)
            lines.append(json.dumps({
                "id": self.next_id,
                "article_id": article_id,
                "group": group,
                "role": call.role,
                "backend": call.backend,
                "cache_key": call.cache_key,
                "prompt": call.prompt,
                "raw": call.raw,
                "parsed": call.parsed,
            }, ensure_ascii=False) + "\n")
            self.next_id += 1
        with open(self.path, "ab") as raw:
            with gzip.GzipFile(filename="", mode="ab", fileobj=raw, mtime=0) as gz:
                gz.write("".join(lines).encode("utf-8"))
        return refs


def read_transcripts(path) -> list:
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def trim_transcripts(path, keep: int) -> int:
    """Cut a transcript file back to its first `keep` records; returns the number dropped."""
    path = Path(path)
    if not path.exists():
        return 0
    lines, broken = [], False
    try:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            for line in fh:
                lines.append(line)
    except (EOFError, OSError) as e:
        logger.warning("%s: unreadable tail (%s)", path, e)
        broken = True
    if len(lines) <= keep and not broken:
        return 0
    dropped = max(len(lines) - keep, 0)
    atomic_write(path, gzip.compress("".join(lines[:keep]).encode("utf-8"), mtime=0), mode="wb")
    if dropped:
        logger.warning("%s: dropped %d transcript record(s) not referenced by the log", path, dropped)
    return dropped


class OutcomeWriter:
    """Appends outcome records and their transcripts, one flush per outcome."""

    def __init__(self, log_path):
        self.path = Path(log_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.transcripts = TranscriptStore(transcripts_path(self.path))
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    def write(self, outcome: PipelineOutcome) -> OutcomeRecord:
        refs = self.transcripts.append(outcome.article_id, outcome.group, outcome.calls)
        record = OutcomeRecord.from_outcome(outcome, refs)
        self._fh.write(dump_record(record))
        self._fh.flush()
        return record

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class RunManifest(BaseModel):
    schema_version: str = SCHEMA_VERSION
    run_name: str
    command: str
    code_version: str
    config_digest: str
    template_digests: dict[str, str] = Field(default_factory=dict)
    models: dict[str, str] = Field(default_factory=dict)
    effective_date: str = "published"
    started_at: str
    finished_at: Optional[str] = None
    coverage: dict[str, int] = Field(default_factory=dict)
    gateway: dict[str, int] = Field(default_factory=dict)
    source_log: Optional[str] = None
    outcome_log_digest: Optional[str] = None


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(log_path, manifest: RunManifest) -> Path:
    log_path = Path(log_path)
    if log_path.exists():
        manifest.outcome_log_digest = file_digest(log_path)
    target = manifest_path(log_path)
    atomic_write(target, manifest.model_dump_json(indent=2) + "\n")
    return target


def manifest_digest(log_path) -> Optional[str]:
    """sha256 of the manifest next to a log; None for logs without one."""
    target = manifest_path(log_path)
    if not target.exists():
        return None
    return file_digest(target)


def remove_run_files(log_path):
    for p in (Path(log_path), transcripts_path(log_path), manifest_path(log_path)):
        if os.path.exists(p):
            os.remove(p)
