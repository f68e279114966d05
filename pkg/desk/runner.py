# desk/runner.py
"""
Entry points behind the CLI: simulate, evaluate, replay-seniority, validate-data.
"""
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__, create_desk
from .domain import (EffectiveDate, PromptVariant, Seniority, StrategyKind, StrategyName, TradingCalendar,
                     effective_date)
from .errors import CalendarExhausted, ConfigError, DataError, ReplayPreconditionError
from .loaders import load_calendar, load_market, load_news, load_prices, load_trading_records, validate_corpus
from .outcome_log import (OutcomeWriter, RunManifest, manifest_digest, read_outcomes, read_records,
                          remove_run_files, repair_tail, transcripts_path, trim_transcripts, utc_now,
                          write_manifest)
from .reports import NEEDS_MARKET, write_reports
from .strategies import RunSpec, group_label

logger = logging.getLogger(__name__)

LOG_NAME = "outcomes.jsonl"


@dataclass
class RunResult:
    log_path: Path
    manifest_path: Path
    written: int
    skipped: int
    resumed: int = 0


def run_dir(cfg) -> Path:
    return Path(cfg.output_dir) / cfg.run_name


def expand_specs(cfg) -> list:
    """One RunSpec per (strategy entry, horizon, seniority); seniority only varies with a head trader."""
    specs = []
    for s in cfg.strategies:
        kind = StrategyKind(s.kind, s.head if s.kind is StrategyName.HOM else None)
        seniorities = s.seniorities if kind.has_head else [Seniority.JUNIOR]
        for horizon in s.horizons:
            for seniority in seniorities:
                specs.append(RunSpec(kind, PromptVariant(horizon, seniority), trader=s.trader,
                                     trader_b=s.trader_b, head=s.head if kind.has_head else None,
                                     analyst=s.analyst if kind.has_analyst else None))
    return specs


def _calendar(corpus) -> TradingCalendar:
    if corpus.calendar is not None:
        return load_calendar(corpus.calendar)
    days = set()
    if corpus.trading_records is not None:
        days |= {r.trade_date for r in load_trading_records(corpus.trading_records)}
    if corpus.prices is not None:
        days |= {p.trade_date for p in load_prices(corpus.prices)}
    return TradingCalendar(days)


def _articles(cfg):
    if cfg.corpus.news is None:
        raise ConfigError("corpus.news is not set")
    articles = load_news(cfg.corpus.news)
    if not articles:
        raise DataError(f"{cfg.corpus.news}: no articles")
    return articles


def _effective_dates(cfg, articles) -> dict:
    mode = EffectiveDate(cfg.effective_date)
    if mode is EffectiveDate.PUBLISHED:
        return {a.article_id: a.published_at for a in articles}
    calendar = _calendar(cfg.corpus)
    out = {}
    for a in articles:
        try:
            out[a.article_id] = effective_date(a, calendar, mode)
        except CalendarExhausted:
            # past the calendar's end; keep the publication date and let evaluation count the gap
            out[a.article_id] = a.published_at
    return out


def _manifest(cfg, desk, command, started, coverage, source_log=None):
    return RunManifest(
        run_name=cfg.run_name,
        command=command,
        code_version=__version__,
        config_digest=cfg.digest(),
        template_digests=desk.forge.digests(),
        models=dict(desk.gateway.models),
        effective_date=EffectiveDate(cfg.effective_date).value,
        started_at=started,
        finished_at=utc_now(),
        coverage=dict(coverage),
        gateway=dict(desk.gateway.stats),
        source_log=str(source_log) if source_log else None,
    )


def cmd_simulate(cfg, desk=None, log_path=None) -> RunResult:
    """Run every configured strategy over the corpus; resumes an interrupted log."""
    if not cfg.strategies:
        raise ConfigError("no strategies configured")
    desk = desk or create_desk(cfg)
    articles = _articles(cfg)
    eff = _effective_dates(cfg, articles)
    specs = expand_specs(cfg)
    log_path = Path(log_path) if log_path else run_dir(cfg) / LOG_NAME
    started = utc_now()

    done = set()
    if log_path.exists():
        repair_tail(log_path)
        records = read_records(log_path)
        done = {(r.article_id, r.group) for r in records}
        keep = max((max(r.transcript_refs) for r in records if r.transcript_refs), default=-1) + 1
        trim_transcripts(transcripts_path(log_path), keep)
    tasks = [(spec, a) for spec in specs for a in articles if (a.article_id, spec.group) not in done]
    logger.info("simulate %s: %d article(s) x %d run spec(s), %d already logged, %d to run",
                cfg.run_name, len(articles), len(specs), len(done), len(tasks))

    def run_one(task):
        spec, article = task
        return desk.engine.run(article, spec, eff[article.article_id])

    coverage = Counter(outcomes=0, skipped=0)
    with OutcomeWriter(log_path) as writer, ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for outcome in pool.map(run_one, tasks):
            writer.write(outcome)
            coverage["outcomes"] += 1
            coverage["skipped" if outcome.skipped else outcome.final.value] += 1
    coverage["resumed"] = len(done)
    path = write_manifest(log_path, _manifest(cfg, desk, "simulate", started, coverage))
    logger.info("simulate %s done: %d written, %d skipped, gateway %s",
                cfg.run_name, coverage["outcomes"], coverage["skipped"], desk.gateway.stats)
    return RunResult(log_path, path, coverage["outcomes"], coverage["skipped"], len(done))


def cmd_evaluate(cfg, log_paths, kinds=None, out_dir=None) -> list:
    """Compute the requested report kinds over one or more outcome logs."""
    kinds = list(cfg.reports if kinds is None else kinds)
    if not kinds:
        logger.warning("no report kinds requested; nothing to do")
        return []
    log_paths = [Path(p) for p in log_paths]
    if not log_paths:
        raise ConfigError("no outcome logs given")
    outcomes, sources = [], []
    for p in log_paths:
        these = read_outcomes(p)
        outcomes += these
        sources.append({"log": f"{p.parent.name}/{p.name}", "manifest_digest": manifest_digest(p),
                        "mode": ",".join(sorted({o.mode for o in these})) or "-"})
    market = None
    corpus = cfg.corpus
    if NEEDS_MARKET & set(kinds) or (corpus.trading_records and corpus.prices):
        market = load_market(corpus, cfg.label_ties)
    out_dir = Path(out_dir) if out_dir else run_dir(cfg) / "reports"
    paths = write_reports(out_dir, kinds, outcomes, sources, market, tuple(cfg.market_horizons))
    if market is not None:
        logger.info("evaluation coverage: %s", dict(market.coverage))
    return paths


def replay_paths(log_path) -> dict:
    p = Path(log_path)
    return {s: p.with_name(f"{p.stem}.{s.value}.jsonl") for s in Seniority}


def cmd_replay_seniority(cfg, log_path, desk=None) -> dict:
    """
    Re-run only the head trader under both seniorities against the frozen
    analyst report and trader suggestions of an HO / HOm log.
    """
    log_path = Path(log_path)
    source = read_outcomes(log_path)
    hierarchy = [o for o in source if o.strategy.has_head]
    if len(hierarchy) != len(source) or not source:
        raise ReplayPreconditionError(f"{log_path}: replay needs a log of HO / HOm outcomes only")

    def expected(o):
        return 2 if o.strategy.name is StrategyName.HOM else 1

    replayable = {id(o) for o in hierarchy
                  if o.analyst_report is not None and len(o.trader_suggestions) == expected(o)}
    if not replayable:
        raise ReplayPreconditionError(f"{log_path}: no outcome carries trader suggestions to replay")

    desk = desk or create_desk(cfg)
    articles = {a.article_id: a for a in _articles(cfg)}
    missing = sorted({o.article_id for o in source if id(o) in replayable} - set(articles))
    if missing:
        raise DataError(f"{log_path}: {len(missing)} article(s) not in the news corpus, e.g. {missing[0]}")

    # one row per (article, strategy, horizon) even if the source already ran both seniorities
    seen, frozen = set(), []
    for o in source:
        key = (o.article_id, o.strategy, o.variant.horizon, tuple(sorted((k, v or "") for k, v in o.backends.items())))
        if key not in seen:
            seen.add(key)
            frozen.append(o)

    def replay(o, seniority):
        variant = PromptVariant(o.variant.horizon, seniority)
        group = group_label(o.strategy, variant, o.backends.get("trader") or "", "replayed")
        if id(o) not in replayable:
            return replace(o, variant=variant, group=group, mode="replayed", calls=(), transcript_refs=(),
                           skip_reason=o.skip_reason or "replay: source outcome has no trader suggestions")
        out = desk.engine.review(articles[o.article_id], o.strategy, variant, o.analyst_report,
                                 o.trader_suggestions, o.backends.get("head"), o.effective_date, mode="replayed")
        return replace(out, backends=dict(o.backends), group=group)

    started = utc_now()
    written = {}
    for seniority, target in replay_paths(log_path).items():
        remove_run_files(target)
        coverage = Counter(outcomes=0, skipped=0)
        with OutcomeWriter(target) as writer, ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            for outcome in pool.map(lambda o: replay(o, seniority), frozen):
                writer.write(outcome)
                coverage["outcomes"] += 1
                coverage["skipped" if outcome.skipped else outcome.final.value] += 1
        write_manifest(target, _manifest(cfg, desk, "replay-seniority", started, coverage, log_path))
        logger.info("replayed %d outcome(s) as %s into %s", coverage["outcomes"], seniority.value, target)
        written[seniority] = target
    return written


def cmd_validate_data(cfg) -> dict:
    summary = validate_corpus(cfg.corpus, cfg.label_ties, cfg.effective_date, tuple(cfg.market_horizons))
    logger.info("corpus summary: %s", summary)
    return summary
