# desk/loaders.py
"""
Corpus ingestion and market-data lookups.

Inputs (paths come from the run config):
  news            line-delimited JSON: date, ticker, title, content, source [, id, company]
  trading records CSV: date, ticker, total_buy_volume, total_sell_volume, institution_count
  prices          CSV: date, ticker, close
  calendar        CSV: date   (optional; else the union of record and price dates)
Vendor headers are mapped onto these names through the alias tables below.
"""
import hashlib
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date
from enum import Enum

import pandas as pd

from .domain import (Decision, EffectiveDate, NewsArticle, PricePoint, TradingCalendar, TradingRecord,
                     effective_date)
from .errors import AmbiguousLabel, CalendarExhausted, DataError, MissingLabel, MissingPrice

logger = logging.getLogger(__name__)

NEWS_COLUMNS = {
    "article_id": ["article_id", "id", "news_id"],
    "published_at": ["date", "published_at", "publish_date", "news_date"],
    "ticker": ["ticker", "stock_id", "symbol", "security_code", "code"],
    "title": ["title", "headline", "news_title"],
    "content": ["content", "body", "text", "news_content"],
    "source": ["source", "vendor", "media"],
    "company": ["company", "company_name", "stock_name", "name"],
}
RECORD_COLUMNS = {
    "ticker": ["ticker", "stock_id", "symbol", "security_code", "code"],
    "trade_date": ["date", "trade_date", "trading_date"],
    "total_buy_volume": ["total_buy_volume", "buy_volume", "buy", "total_buy"],
    "total_sell_volume": ["total_sell_volume", "sell_volume", "sell", "total_sell"],
    "institution_count": ["institution_count", "institutions", "n_institutions"],
}
PRICE_COLUMNS = {
    "ticker": ["ticker", "stock_id", "symbol", "security_code", "code"],
    "trade_date": ["date", "trade_date", "trading_date"],
    "close": ["close", "close_price", "closing_price", "adj_close"],
}
CALENDAR_COLUMNS = {"trade_date": ["date", "trade_date", "trading_date"]}
OPTIONAL = {"article_id", "source", "company"}


def _norm(s):
    s = str(s).strip()
    s = re.sub(r"[-_/\\(),.\s]+", " ", s)
    return s.strip().lower()


def _read_csv_safe(path, **kwargs):
    try:
        return pd.read_csv(path, low_memory=False, dtype=str, **kwargs)
    except UnicodeDecodeError:
        return pd.read_csv(path, encoding="big5", low_memory=False, dtype=str, **kwargs)


def _rename_columns(df: pd.DataFrame, aliases: dict, path) -> pd.DataFrame:
    """Map vendor headers onto canonical names; fail on missing required columns."""
    by_norm = {_norm(c): c for c in df.columns}
    rename = {}
    for canonical, cands in aliases.items():
        for cand in cands:
            orig = by_norm.get(_norm(cand))
            if orig is not None:
                rename[orig] = canonical
                break
    df = df.rename(columns=rename)
    missing = [c for c in aliases if c not in df.columns and c not in OPTIONAL]
    if missing:
        raise DataError(f"{os.path.basename(str(path))}: missing column(s) {missing}; found {list(by_norm.values())}")
    return df


def _dates(series: pd.Series, path, column):
    parsed = pd.to_datetime(series, errors="coerce")
    bad = series[parsed.isna()]
    if len(bad):
        raise DataError(f"{os.path.basename(str(path))}: {len(bad)} unparsable {column} value(s), "
                        f"first at row {bad.index[0]}: {bad.iloc[0]!r}")
    return parsed.dt.date


def _ints(series: pd.Series, path, column):
    nums = pd.to_numeric(series.astype(str).str.replace(",", "", regex=False), errors="coerce")
    if nums.isna().any():
        row = nums[nums.isna()].index[0]
        raise DataError(f"{os.path.basename(str(path))}: non-numeric {column} at row {row}")
    return nums.astype("int64")


def _check_unique(df, keys, path):
    dupes = df[df.duplicated(subset=keys, keep=False)]
    if len(dupes):
        first = dupes.iloc[0]
        raise DataError(f"{os.path.basename(str(path))}: {len(dupes)} rows share a "
                        f"({', '.join(keys)}) key, e.g. {tuple(first[k] for k in keys)}")


def _article_id(row):
    raw = f"{row['published_at']}|{row['ticker']}|{row['title']}"
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def load_news(path) -> list:
    try:
        raw = pd.read_json(path, lines=True, dtype=False, convert_dates=False)
    except ValueError as e:
        raise DataError(f"{os.path.basename(str(path))}: not line-delimited JSON ({e})")
    if raw.empty:
        return []
    df = _rename_columns(raw, NEWS_COLUMNS, path)
    for col in ("ticker", "title", "content", "source", "company", "article_id"):
        if col in df.columns:
            df[col] = df[col].where(df[col].notna(), "").astype(str)
    df["published_at"] = _dates(df["published_at"], path, "date")
    if "article_id" not in df.columns:
        df["article_id"] = ""
    missing_id = df["article_id"].str.strip() == ""
    df.loc[missing_id, "article_id"] = df[missing_id].apply(_article_id, axis=1)
    _check_unique(df, ["article_id"], path)
    return [
        NewsArticle(
            article_id=r.article_id,
            ticker=r.ticker.strip(),
            published_at=r.published_at,
            title=r.title,
            content=r.content,
            source=getattr(r, "source", ""),
            company=getattr(r, "company", ""),
        )
        for r in df.itertuples(index=False)
    ]


def load_trading_records(path) -> list:
    df = _rename_columns(_read_csv_safe(path), RECORD_COLUMNS, path)
    df["ticker"] = df["ticker"].astype(str).str.strip()
    df["trade_date"] = _dates(df["trade_date"], path, "date")
    for col in ("total_buy_volume", "total_sell_volume", "institution_count"):
        df[col] = _ints(df[col], path, col)
    _check_unique(df, ["ticker", "trade_date"], path)
    return [
        TradingRecord(r.ticker, r.trade_date, int(r.total_buy_volume), int(r.total_sell_volume),
                      int(r.institution_count))
        for r in df.itertuples(index=False)
    ]


def load_prices(path) -> list:
    df = _rename_columns(_read_csv_safe(path), PRICE_COLUMNS, path)
    df["ticker"] = df["ticker"].astype(str).str.strip()
    df["trade_date"] = _dates(df["trade_date"], path, "date")
    raw = df["close"].fillna("").astype(str).str.strip()
    blank = raw.isin(["", "--"])
    if blank.any():
        # halted days carry no close
        logger.warning("%s: dropping %d rows without a close", os.path.basename(str(path)), int(blank.sum()))
    df = df[~blank].copy()
    df["close"] = pd.to_numeric(raw[~blank].str.replace(",", "", regex=False), errors="coerce")
    if df["close"].isna().any():
        row = df.index[df["close"].isna()][0]
        raise DataError(f"{os.path.basename(str(path))}: non-numeric close at row {row}")
    _check_unique(df, ["ticker", "trade_date"], path)
    return [PricePoint(r.ticker, r.trade_date, float(r.close)) for r in df.itertuples(index=False)]


def load_calendar(path) -> TradingCalendar:
    df = _rename_columns(_read_csv_safe(path), CALENDAR_COLUMNS, path)
    return TradingCalendar(_dates(df["trade_date"], path, "date"))


# --- labels ---

@dataclass(frozen=True)
class InstitutionLabel:
    ticker: str
    trade_date: date
    label: Decision


def label_record(record: TradingRecord) -> Decision:
    if record.institution_count == 0:
        return Decision.NEUTRAL
    if record.total_buy_volume > record.total_sell_volume:
        return Decision.OVERWEIGHT
    if record.total_sell_volume > record.total_buy_volume:
        return Decision.UNDERWEIGHT
    raise AmbiguousLabel(record.ticker, record.trade_date, record.total_buy_volume)


class LabelBook:
    """Institution labels keyed by (ticker, trade_date), plus the excluded ties."""

    def __init__(self):
        self._labels = {}
        self.ambiguous = []

    def add(self, label: InstitutionLabel):
        self._labels[(label.ticker, label.trade_date)] = label

    def get(self, ticker, day):
        return self._labels.get((ticker, day))

    def __len__(self):
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels.values())

    def proportions(self):
        counts = Counter(l.label for l in self._labels.values())
        total = sum(counts.values())
        return {d: (counts[d] / total if total else None) for d in Decision}


def build_labels(records, on_tie="exclude") -> LabelBook:
    if on_tie not in ("exclude", "raise"):
        raise ValueError(f"on_tie must be 'exclude' or 'raise', got {on_tie!r}")
    book = LabelBook()
    for rec in records:
        try:
            book.add(InstitutionLabel(rec.ticker, rec.trade_date, label_record(rec)))
        except AmbiguousLabel as e:
            if on_tie == "raise":
                raise
            book.ambiguous.append(e)
    if book.ambiguous:
        logger.info("excluded %d tied buy == sell record(s)", len(book.ambiguous))
    return book


def align_label(ticker, eff_date, labels, calendar: TradingCalendar) -> InstitutionLabel:
    """Label on the first trading day after the effective date."""
    try:
        day = calendar.next(eff_date, 1)
    except CalendarExhausted:
        raise MissingLabel(f"{ticker} {eff_date}: no trading day after it in the calendar")
    label = labels.get(ticker, day)
    if label is None:
        raise MissingLabel(f"{ticker}: no institution label on {day}")
    return label


def align_article(article: NewsArticle, labels, calendar: TradingCalendar,
                  mode=EffectiveDate.PUBLISHED) -> InstitutionLabel:
    return align_label(article.ticker, effective_date(article, calendar, mode), labels, calendar)


# --- prices ---

class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    FLAT = "flat"


@dataclass(frozen=True)
class ForwardMove:
    ticker: str
    base_date: date
    horizon: int
    direction: Direction
    base_close: float
    forward_close: float


class PriceBook:
    def __init__(self, points=()):
        self._close = {(p.ticker, p.trade_date): p.close_price for p in points}

    def close(self, ticker, day):
        return self._close.get((ticker, day))

    def __len__(self):
        return len(self._close)


def forward_move(prices: PriceBook, ticker, t, horizon, calendar: TradingCalendar) -> ForwardMove:
    """
    Direction of close(t+T) vs close(t) with T counted in trading days.
    A non-trading t takes the last close on or before it as the base.
    """
    base_day = t if t in calendar else calendar.on_or_before(t)
    base = prices.close(ticker, base_day) if base_day else None
    if base is None:
        raise MissingPrice(f"{ticker}: no close on or before {t}")
    try:
        fwd_day = calendar.next(t, horizon)
    except CalendarExhausted:
        raise MissingPrice(f"{ticker}: calendar ends before {t}+{horizon}")
    fwd = prices.close(ticker, fwd_day)
    if fwd is None:
        raise MissingPrice(f"{ticker}: no close on {fwd_day} ({t}+{horizon})")
    if fwd > base:
        direction = Direction.UP
    elif fwd < base:
        direction = Direction.DOWN
    else:
        direction = Direction.FLAT
    return ForwardMove(ticker, t, horizon, direction, base, fwd)


# --- bundle ---

class MarketData:
    """Read-only lookups over labels, prices and the calendar, with coverage counters."""

    def __init__(self, calendar: TradingCalendar, labels: LabelBook, prices: PriceBook):
        self.calendar = calendar
        self.labels = labels
        self.prices = prices
        self.coverage = Counter(ambiguous_label=len(labels.ambiguous))

    def aligned_labels(self, outcomes) -> dict:
        """article_id -> institution Decision for every outcome whose label exists."""
        out = {}
        missing = set()
        for o in outcomes:
            if o.article_id in out or o.article_id in missing:
                continue
            try:
                out[o.article_id] = align_label(o.ticker, o.effective_date, self.labels, self.calendar).label
            except MissingLabel:
                missing.add(o.article_id)
        self.coverage["missing_label"] = len(missing)
        return out

    def forward_move(self, ticker, t, horizon) -> ForwardMove:
        return forward_move(self.prices, ticker, t, horizon, self.calendar)


def load_market(corpus, on_tie="exclude") -> MarketData:
    if corpus.trading_records is None or corpus.prices is None:
        raise DataError("corpus.trading_records and corpus.prices are required for evaluation")
    records = load_trading_records(corpus.trading_records)
    points = load_prices(corpus.prices)
    if corpus.calendar is not None:
        calendar = load_calendar(corpus.calendar)
    else:
        calendar = TradingCalendar({r.trade_date for r in records} | {p.trade_date for p in points})
    labels = build_labels(records, on_tie)
    logger.info("market data: %d labels, %d closes, %d trading days", len(labels), len(points), len(calendar))
    return MarketData(calendar, labels, PriceBook(points))


def validate_corpus(corpus, on_tie="exclude", effective=EffectiveDate.PUBLISHED, horizons=(1, 5)) -> dict:
    """Load every configured file and summarise the coverage the evaluator will see."""
    summary = {}
    articles = load_news(corpus.news) if corpus.news is not None else []
    summary["articles"] = len(articles)
    summary["tickers"] = len({a.ticker for a in articles})
    if corpus.trading_records is None or corpus.prices is None:
        return summary
    market = load_market(corpus, on_tie)
    cal = market.calendar
    summary["trading_days"] = len(cal)
    summary["calendar_span"] = [str(cal.first), str(cal.last)] if len(cal) else []
    summary["labels"] = len(market.labels)
    summary["ambiguous_label"] = len(market.labels.ambiguous)
    summary["label_proportions"] = {d.value: p for d, p in market.labels.proportions().items()}
    missing_label = missing_price = 0
    for a in articles:
        try:
            eff = effective_date(a, cal, effective)
            align_label(a.ticker, eff, market.labels, cal)
        except (MissingLabel, CalendarExhausted):
            missing_label += 1
            continue
        for h in horizons:
            try:
                market.forward_move(a.ticker, eff, h)
            except MissingPrice:
                missing_price += 1
    summary["missing_label"] = missing_label
    summary["missing_price"] = missing_price
    return summary
