# desk/strategies.py
"""
The four communication strategies and how their final decision is composed.

    Single Trader : news -> trader
    CoT           : news -> analyst -> trader
    HO            : news -> analyst -> trader -> head trader
    HOm           : news -> analyst -> trader A, trader B -> head trader

The head trader only filters: Follow keeps the trader's decision, Not Follow
turns it into Neutral, and a Neither suggestion never reaches the head trader.
"""
import logging
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Optional

from .agents import Agency, AnalystReport, HeadTraderVerdict, Verdict
from .domain import (Decision, NewsArticle, PromptVariant, StrategyKind, StrategyName,
                     action_to_decision, is_actionable)
from .errors import ArticleSkipped

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSpec:
    """One (strategy, variant, backends) combination to run over the corpus."""

    strategy: StrategyKind
    variant: PromptVariant
    trader: str
    trader_b: Optional[str] = None
    head: Optional[str] = None
    analyst: Optional[str] = None

    def __post_init__(self):
        name = self.strategy.name
        if name is not StrategyName.SINGLE_TRADER and not self.analyst:
            raise ValueError(f"{name.value} needs an analyst backend")
        if self.strategy.has_head and not self.head:
            raise ValueError(f"{name.value} needs a head trader backend")
        if name is StrategyName.HOM:
            if not self.trader_b or self.trader_b == self.trader:
                raise ValueError("HOm needs two distinct trader backends")
            if self.strategy.head_backend != self.head:
                raise ValueError("HOm strategy kind must name the head backend it runs with")

    @property
    def group(self) -> str:
        return group_label(self.strategy, self.variant, self.trader)

    @property
    def backends(self) -> dict:
        return {"analyst": self.analyst, "trader": self.trader, "trader_b": self.trader_b, "head": self.head}


def group_label(strategy: StrategyKind, variant: PromptVariant, trader: str, mode: str = "simulated") -> str:
    if strategy.name is StrategyName.HOM:
        name = f"HOm[{strategy.head_backend}]"
    elif strategy.has_head:
        name = f"HO[{trader}]"
    else:
        name = f"{strategy.title}[{trader}]"
    parts = [variant.horizon.value]
    if strategy.has_head:
        parts.append(variant.seniority.value)
    if mode != "simulated":
        parts.append(mode)
    return f"{name} ({', '.join(parts)})"


@dataclass(frozen=True)
class PipelineOutcome:
    article_id: str
    ticker: str
    published_at: date
    effective_date: date
    strategy: StrategyKind
    variant: PromptVariant
    final: Optional[Decision]            # None == Skipped
    trader_suggestions: tuple = ()
    head_verdict: Optional[HeadTraderVerdict] = None
    analyst_report: Optional[AnalystReport] = None
    presented: tuple = ()                # indices of suggestions the head trader saw
    skip_reason: str = ""
    backends: dict = field(default_factory=dict, compare=False)
    group: str = ""
    mode: str = "simulated"
    calls: tuple = field(default=(), compare=False)
    transcript_refs: tuple = ()

    @property
    def skipped(self) -> bool:
        return self.final is None


def compose_final(suggestions, presented, verdict: Optional[HeadTraderVerdict]) -> Decision:
    """Final decision from trader suggestions and the head trader's verdict."""
    if not presented:
        return Decision.NEUTRAL
    if verdict is None:
        raise ValueError("suggestions were presented but no verdict recorded")
    if verdict.verdict is Verdict.NOT_FOLLOW:
        return Decision.NEUTRAL
    if verdict.verdict is Verdict.FOLLOW_TRADER_B:
        chosen = presented[1]
    else:
        chosen = presented[0]
    return action_to_decision(suggestions[chosen].action)


def validate_outcome(outcome: PipelineOutcome) -> list:
    """Composition invariants that must hold for every outcome record."""
    problems = []
    name = outcome.strategy.name
    if outcome.skipped:
        return problems
    decisions = {action_to_decision(s.action) for s in outcome.trader_suggestions}
    if name is StrategyName.SINGLE_TRADER and (outcome.analyst_report or outcome.head_verdict):
        problems.append("single trader has an analyst report or head verdict")
    if name is not StrategyName.SINGLE_TRADER and outcome.analyst_report is None:
        problems.append("missing analyst report")
    if name is StrategyName.COT and outcome.head_verdict is not None:
        problems.append("CoT has a head verdict")
    if outcome.strategy.has_head:
        any_actionable = any(is_actionable(s.action) for s in outcome.trader_suggestions)
        if any_actionable != (outcome.head_verdict is not None):
            problems.append("head verdict present iff some trader is actionable")
        if outcome.head_verdict is not None and outcome.head_verdict.verdict.approves:
            expected = compose_final(outcome.trader_suggestions, outcome.presented, outcome.head_verdict)
            if outcome.final != expected:
                problems.append("followed verdict but final differs from the followed trader")
        if outcome.final not in decisions | {Decision.NEUTRAL}:
            problems.append("final decision proposed by no trader")
    elif len(outcome.trader_suggestions) == 1:
        if outcome.final != action_to_decision(outcome.trader_suggestions[0].action):
            problems.append("final differs from trader decision")
    return problems


class StrategyEngine:
    def __init__(self, agency: Agency):
        self.agency = agency

    def _outcome(self, article, strategy, variant, eff_date, **kw):
        return PipelineOutcome(
            article_id=article.article_id,
            ticker=article.ticker,
            published_at=article.published_at,
            effective_date=eff_date or article.published_at,
            strategy=strategy,
            variant=variant,
            **kw,
        )

    def _skipped(self, article, strategy, variant, eff_date, err: ArticleSkipped, calls, **kw):
        logger.warning("article %s skipped under %s: %s", article.article_id, strategy.title, err)
        return self._outcome(article, strategy, variant, eff_date, final=None, skip_reason=str(err),
                             calls=tuple(calls) + err.calls, **kw)

    def run_single_trader(self, article: NewsArticle, variant: PromptVariant, backend: str,
                          eff_date: date = None) -> PipelineOutcome:
        strategy = StrategyKind(StrategyName.SINGLE_TRADER)
        calls = []
        try:
            step = self.agency.run_trader(article, None, variant, backend)
        except ArticleSkipped as e:
            return self._skipped(article, strategy, variant, eff_date, e, calls)
        calls += step.calls
        s = step.value
        return self._outcome(article, strategy, variant, eff_date, final=action_to_decision(s.action),
                             trader_suggestions=(s,), calls=tuple(calls))

    def run_cot(self, article, variant, trader_backend, analyst_backend, eff_date=None) -> PipelineOutcome:
        strategy = StrategyKind(StrategyName.COT)
        calls = []
        report = None
        try:
            step = self.agency.run_analyst(article, analyst_backend)
            calls += step.calls
            report = step.value
            step = self.agency.run_trader(article, report, variant, trader_backend)
            calls += step.calls
        except ArticleSkipped as e:
            return self._skipped(article, strategy, variant, eff_date, e, calls, analyst_report=report)
        s = step.value
        return self._outcome(article, strategy, variant, eff_date, final=action_to_decision(s.action),
                             trader_suggestions=(s,), analyst_report=report, calls=tuple(calls))

    def run_ho(self, article, variant, trader_backend, head_backend, analyst_backend,
               eff_date=None) -> PipelineOutcome:
        return self._hierarchy(article, variant, StrategyKind(StrategyName.HO),
                               [trader_backend], head_backend, analyst_backend, eff_date)

    def run_hom(self, article, variant, trader_a_backend, trader_b_backend, head_backend, analyst_backend,
                eff_date=None) -> PipelineOutcome:
        if trader_a_backend == trader_b_backend:
            raise ValueError("HOm needs two distinct trader backends")
        return self._hierarchy(article, variant, StrategyKind(StrategyName.HOM, head_backend),
                               [trader_a_backend, trader_b_backend], head_backend, analyst_backend, eff_date)

    def _hierarchy(self, article, variant, strategy, trader_backends, head_backend, analyst_backend, eff_date):
        calls = []
        report = None
        suggestions = []
        try:
            step = self.agency.run_analyst(article, analyst_backend)
            calls += step.calls
            report = step.value
            for backend in trader_backends:
                step = self.agency.run_trader(article, report, variant, backend)
                calls += step.calls
                suggestions.append(step.value)
        except ArticleSkipped as e:
            return self._skipped(article, strategy, variant, eff_date, e, calls,
                                 analyst_report=report, trader_suggestions=tuple(suggestions))
        return self.review(article, strategy, variant, report, tuple(suggestions), head_backend, eff_date, calls)

    def review(self, article, strategy, variant, report, suggestions, head_backend, eff_date=None,
               calls=(), mode="simulated") -> PipelineOutcome:
        """Head-trader stage on fixed suggestions; shared by simulation and seniority replay."""
        calls = list(calls)
        presented = tuple(i for i, s in enumerate(suggestions) if is_actionable(s.action))
        verdict = None
        if presented:
            try:
                step = self.agency.run_head_trader(article, report, [suggestions[i] for i in presented],
                                                   variant, head_backend)
            except ArticleSkipped as e:
                return self._skipped(article, strategy, variant, eff_date, e, calls, analyst_report=report,
                                     trader_suggestions=suggestions, presented=presented, mode=mode)
            calls += step.calls
            verdict = step.value
        final = compose_final(suggestions, presented, verdict)
        return self._outcome(article, strategy, variant, eff_date, final=final, trader_suggestions=suggestions,
                             head_verdict=verdict, analyst_report=report, presented=presented,
                             calls=tuple(calls), mode=mode)

    def run(self, article: NewsArticle, spec: RunSpec, eff_date: date = None) -> PipelineOutcome:
        name = spec.strategy.name
        v = spec.variant
        if name is StrategyName.SINGLE_TRADER:
            out = self.run_single_trader(article, v, spec.trader, eff_date)
        elif name is StrategyName.COT:
            out = self.run_cot(article, v, spec.trader, spec.analyst, eff_date)
        elif name is StrategyName.HO:
            out = self.run_ho(article, v, spec.trader, spec.head, spec.analyst, eff_date)
        else:
            out = self.run_hom(article, v, spec.trader, spec.trader_b, spec.head, spec.analyst, eff_date)
        return replace(out, backends=spec.backends, group=spec.group)
