# desk/domain.py
"""
Shared vocabulary: decisions, agent actions, strategies, prompt variants,
corpus rows and the trading calendar. Everything here is immutable.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Iterable

from .errors import CalendarExhausted, InvalidRecord


class Decision(str, Enum):
    OVERWEIGHT = "overweight"
    NEUTRAL = "neutral"
    UNDERWEIGHT = "underweight"


class AgentAction(str, Enum):
    LONG = "long"
    SHORT = "short"
    NEITHER = "neither"


_ACTION_TO_DECISION = {
    AgentAction.LONG: Decision.OVERWEIGHT,
    AgentAction.SHORT: Decision.UNDERWEIGHT,
    AgentAction.NEITHER: Decision.NEUTRAL,
}
_DECISION_TO_ACTION = {v: k for k, v in _ACTION_TO_DECISION.items()}


def action_to_decision(action: AgentAction) -> Decision:
    return _ACTION_TO_DECISION[AgentAction(action)]


def decision_to_action(decision: Decision) -> AgentAction:
    return _DECISION_TO_ACTION[Decision(decision)]


def is_actionable(action: AgentAction) -> bool:
    return action in (AgentAction.LONG, AgentAction.SHORT)


class StrategyName(str, Enum):
    SINGLE_TRADER = "single_trader"
    COT = "cot"
    HO = "ho"
    HOM = "hom"


_STRATEGY_TITLES = {
    StrategyName.SINGLE_TRADER: "Single Trader",
    StrategyName.COT: "CoT",
    StrategyName.HO: "HO",
    StrategyName.HOM: "HOm",
}


@dataclass(frozen=True)
class StrategyKind:
    """A communication strategy; HOm also names the backend acting as head trader."""

    name: StrategyName
    head_backend: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "name", StrategyName(self.name))
        if self.name is StrategyName.HOM and not self.head_backend:
            raise ValueError("HOm needs the head trader backend identifier")

    @property
    def has_analyst(self) -> bool:
        return self.name is not StrategyName.SINGLE_TRADER

    @property
    def has_head(self) -> bool:
        return self.name in (StrategyName.HO, StrategyName.HOM)

    @property
    def title(self) -> str:
        return _STRATEGY_TITLES[self.name]


class Horizon(str, Enum):
    SHORT_TERM = "short_term"   # one week
    LONG_TERM = "long_term"     # one year


class Seniority(str, Enum):
    JUNIOR = "junior"
    SENIOR = "senior"


@dataclass(frozen=True)
class PromptVariant:
    horizon: Horizon = Horizon.SHORT_TERM
    seniority: Seniority = Seniority.JUNIOR

    def __post_init__(self):
        object.__setattr__(self, "horizon", Horizon(self.horizon))
        object.__setattr__(self, "seniority", Seniority(self.seniority))


@dataclass(frozen=True)
class NewsArticle:
    article_id: str
    ticker: str
    published_at: date
    title: str
    content: str
    source: str = ""
    company: str = ""

    def __post_init__(self):
        if not self.article_id:
            raise InvalidRecord("article_id must be non-empty")
        if not str(self.ticker).strip():
            raise InvalidRecord(f"article {self.article_id}: empty ticker")
        if not isinstance(self.published_at, date):
            raise InvalidRecord(f"article {self.article_id}: published_at is not a date")

    @property
    def company_name(self) -> str:
        # the prompts address the stock by company; fall back to the ticker
        return self.company or self.ticker


@dataclass(frozen=True)
class TradingRecord:
    ticker: str
    trade_date: date
    total_buy_volume: int
    total_sell_volume: int
    institution_count: int

    def __post_init__(self):
        if min(self.total_buy_volume, self.total_sell_volume, self.institution_count) < 0:
            raise InvalidRecord(f"{self.ticker} {self.trade_date}: negative volume or count")
        if self.institution_count == 0 and (self.total_buy_volume or self.total_sell_volume):
            raise InvalidRecord(f"{self.ticker} {self.trade_date}: volume without institutions")


@dataclass(frozen=True)
class PricePoint:
    ticker: str
    trade_date: date
    close_price: float

    def __post_init__(self):
        if not self.close_price > 0:
            raise InvalidRecord(f"{self.ticker} {self.trade_date}: close must be > 0, got {self.close_price}")


class TradingCalendar:
    """Strictly increasing trading dates of one exchange."""

    __slots__ = ("_days",)

    def __init__(self, days: Iterable[date]):
        ordered = sorted(set(days))
        object.__setattr__(self, "_days", tuple(ordered))

    def __setattr__(self, name, value):
        raise AttributeError("TradingCalendar is immutable")

    def __len__(self):
        return len(self._days)

    def __contains__(self, d):
        i = bisect.bisect_left(self._days, d)
        return i < len(self._days) and self._days[i] == d

    def __iter__(self):
        return iter(self._days)

    @property
    def first(self) -> date | None:
        return self._days[0] if self._days else None

    @property
    def last(self) -> date | None:
        return self._days[-1] if self._days else None

    def next(self, d: date, k: int = 1) -> date:
        if k < 1:
            raise ValueError(f"offset must be >= 1, got {k}")
        start = bisect.bisect_right(self._days, d)
        idx = start + k - 1
        if idx >= len(self._days):
            raise CalendarExhausted(d, k, len(self._days) - start)
        return self._days[idx]

    def on_or_before(self, d: date) -> date | None:
        i = bisect.bisect_right(self._days, d)
        return self._days[i - 1] if i else None


def next_trading_day(calendar: TradingCalendar, d: date, k: int = 1) -> date:
    """k-th trading date strictly after d."""
    return calendar.next(d, k)


class EffectiveDate(str, Enum):
    PUBLISHED = "published"
    NEXT_TRADING_DAY = "next_trading_day"


def effective_date(article: NewsArticle, calendar: TradingCalendar,
                   mode: EffectiveDate = EffectiveDate.PUBLISHED) -> date:
    """Date the news is treated as known; non-trading days are kept as-is."""
    if EffectiveDate(mode) is EffectiveDate.NEXT_TRADING_DAY:
        return calendar.next(article.published_at, 1)
    return article.published_at
