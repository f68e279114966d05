from datetime import date

import pytest

from desk.config import CorpusConfig
from desk.domain import Decision, EffectiveDate, NewsArticle, PricePoint, TradingCalendar, TradingRecord
from desk.errors import AmbiguousLabel, DataError, MissingLabel, MissingPrice
from desk.loaders import (Direction, PriceBook, align_article, build_labels, forward_move, label_record,
                          load_market, load_news, load_prices, load_trading_records, validate_corpus)

D = date


def rec(buy, sell, inst, day=D(2024, 1, 2), ticker="2330"):
    return TradingRecord(ticker, day, buy, sell, inst)


def test_label_rule():
    assert label_record(rec(1000, 400, 3)) is Decision.OVERWEIGHT
    assert label_record(rec(400, 1000, 3)) is Decision.UNDERWEIGHT
    assert label_record(rec(0, 0, 0)) is Decision.NEUTRAL
    with pytest.raises(AmbiguousLabel):
        label_record(rec(500, 500, 2))


def test_ties_excluded_and_counted():
    records = [rec(500, 500, 2), rec(9, 1, 1, D(2024, 1, 3)), rec(0, 0, 0, D(2024, 1, 4))]
    book = build_labels(records)
    assert len(book) == 2
    assert len(book.ambiguous) == 1
    assert book.get("2330", D(2024, 1, 2)) is None
    props = book.proportions()
    assert sum(props.values()) == pytest.approx(1.0)
    with pytest.raises(AmbiguousLabel):
        build_labels(records, on_tie="raise")


def test_align_article_uses_next_trading_day():
    # Mon 1 .. Fri 5, Mon 8
    cal = TradingCalendar([D(2024, 1, d) for d in (1, 2, 3, 4, 5, 8)])
    book = build_labels([rec(9, 1, 1, D(2024, 1, 2)), rec(1, 9, 1, D(2024, 1, 8))])
    monday = NewsArticle("a", "2330", D(2024, 1, 1), "t", "c")
    friday = NewsArticle("b", "2330", D(2024, 1, 5), "t", "c")
    last = NewsArticle("c", "2330", D(2024, 1, 8), "t", "c")
    assert align_article(monday, book, cal).label is Decision.OVERWEIGHT
    assert align_article(friday, book, cal).trade_date == D(2024, 1, 8)
    with pytest.raises(MissingLabel):
        align_article(last, book, cal)
    with pytest.raises(MissingLabel):
        align_article(NewsArticle("d", "2330", D(2024, 1, 2), "t", "c"), book, cal)
    # released after the close: Friday news moves to Monday, whose next day has no label
    with pytest.raises(MissingLabel):
        align_article(friday, book, cal, EffectiveDate.NEXT_TRADING_DAY)


def test_forward_move_directions():
    cal = TradingCalendar([D(2024, 1, d) for d in (1, 2, 3, 4, 5, 8)])
    closes = {1: 100, 2: 101, 3: 99, 4: 100, 5: 100, 8: 102}
    prices = PriceBook([PricePoint("x", D(2024, 1, d), c) for d, c in closes.items()])
    assert forward_move(prices, "x", D(2024, 1, 1), 1, cal).direction is Direction.UP
    assert forward_move(prices, "x", D(2024, 1, 2), 1, cal).direction is Direction.DOWN
    assert forward_move(prices, "x", D(2024, 1, 4), 1, cal).direction is Direction.FLAT
    # Saturday news: base is Friday's close, t+1 is Monday
    sat = forward_move(prices, "x", D(2024, 1, 6), 1, cal)
    assert (sat.base_close, sat.forward_close, sat.direction) == (100, 102, Direction.UP)
    assert forward_move(prices, "x", D(2024, 1, 1), 5, cal).direction is Direction.UP
    with pytest.raises(MissingPrice):
        forward_move(prices, "x", D(2024, 1, 2), 5, cal)
    with pytest.raises(MissingPrice):
        forward_move(prices, "x", D(2024, 1, 8), 1, cal)
    with pytest.raises(MissingPrice):
        forward_move(prices, "y", D(2024, 1, 1), 1, cal)


def test_load_news_normalises_headers(tmp_path):
    path = tmp_path / "news.jsonl"
    path.write_text(
        '{"Date": "2024-01-02", "Stock_ID": 2330, "Headline": "h1", "Body": "b1", "Source": "s"}\n'
        '{"Date": "2024-01-03", "Stock_ID": "2317", "Headline": "h2", "Body": "b2", "Source": "s"}\n',
        encoding="utf-8",
    )
    articles = load_news(path)
    assert [a.ticker for a in articles] == ["2330", "2317"]
    assert articles[0].published_at == D(2024, 1, 2)
    assert len({a.article_id for a in articles}) == 2
    assert load_news(path)[0].article_id == articles[0].article_id


def test_load_news_rejects_bad_dates_and_missing_columns(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"date": "someday", "ticker": "1", "title": "t", "content": "c"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_news(bad)
    missing = tmp_path / "missing.jsonl"
    missing.write_text('{"date": "2024-01-02", "ticker": "1", "title": "t"}\n', encoding="utf-8")
    with pytest.raises(DataError):
        load_news(missing)


def test_trading_records_duplicates_and_thousands(tmp_path):
    path = tmp_path / "records.csv"
    path.write_text('date,ticker,buy_volume,sell_volume,institutions\n2024-01-02,2330,"1,200",300,3\n',
                    encoding="utf-8")
    [r] = load_trading_records(path)
    assert (r.total_buy_volume, r.total_sell_volume) == (1200, 300)
    path.write_text("date,ticker,buy_volume,sell_volume,institutions\n"
                    "2024-01-02,2330,1,2,3\n2024-01-02,2330,4,5,6\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_trading_records(path)


def test_prices_drop_blank_closes_and_reject_garbage(tmp_path, caplog):
    path = tmp_path / "prices.csv"
    path.write_text("date,ticker,close\n2024-01-02,2330,\"1,050.5\"\n2024-01-03,2330,\n2024-01-04,2330,--\n",
                    encoding="utf-8")
    with caplog.at_level("WARNING", logger="desk.loaders"):
        assert load_prices(path) == [PricePoint("2330", D(2024, 1, 2), 1050.5)]
    assert "dropping 2 rows without a close" in caplog.text
    path.write_text("date,ticker,close\n2024-01-02,2330,580\n2024-01-03,2330,abc\n", encoding="utf-8")
    with pytest.raises(DataError, match="non-numeric close"):
        load_prices(path)


def test_market_bundle_and_validation(write_corpus):
    paths = write_corpus(10)
    corpus = CorpusConfig(**paths)
    market = load_market(corpus)
    assert len(market.calendar) == 30
    assert len(market.labels) == 30 * 7
    summary = validate_corpus(corpus)
    assert summary["articles"] == 10
    assert summary["tickers"] == 7
    assert summary["missing_label"] == 0
    assert summary["ambiguous_label"] == 0
    assert summary["calendar_span"] == ["2024-01-01", "2024-02-09"]
