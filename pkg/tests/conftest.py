import json
from datetime import date, timedelta

import pytest

from desk.config import load_config
from desk.domain import NewsArticle, TradingCalendar

TRADER_RULES = [
    {"match": r"(?s)^You're an equity trader.*bullish", "regex": True,
     "reply": "[Action]: long\n[Thoughts]: Demand looks strong."},
    {"match": r"(?s)^You're an equity trader.*bearish", "regex": True,
     "reply": "[Action]: short\n[Thoughts]: Margins are under pressure."},
    {"match": "You're an equity trader", "reply": "[Action]: neither\n[Thoughts]: Nothing material."},
]
ANALYST_RULE = {"match": "Based on the following news",
                "reply": "Positive: orders may rise.\nNegative: input costs may climb."}
FOLLOW_RULE = {"match": "As the leader of our trading desk", "reply": "[Action]: Follow"}


def weekdays(start, n):
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


@pytest.fixture
def calendar():
    return TradingCalendar(weekdays(date(2024, 1, 1), 30))


@pytest.fixture
def article():
    return NewsArticle("a1", "2330", date(2024, 1, 2), "TSMC raises guidance, bullish tone",
                       "The company expects stronger demand.", "cnyes", "TSMC")


@pytest.fixture
def write_corpus(tmp_path):
    """
    Writes news.jsonl / records.csv / prices.csv / calendar.csv under tmp_path.
    Article i is published on trading day i % 20 for ticker 1000 + i % 7, with a
    bullish, bearish or quiet title in rotation.
    """
    def _write(n_articles=3, n_days=30):
        days = weekdays(date(2024, 1, 1), n_days)
        tones = ["bullish", "bearish", "quiet"]
        with open(tmp_path / "news.jsonl", "w", encoding="utf-8") as fh:
            for i in range(n_articles):
                fh.write(json.dumps({
                    "id": f"n{i:04d}",
                    "date": days[i % 20].isoformat(),
                    "ticker": str(1000 + i % 7),
                    "title": f"Company {1000 + i % 7} update {i}: {tones[i % 3]} outlook",
                    "content": f"Body of article {i}.",
                    "source": "wire",
                }) + "\n")
        with open(tmp_path / "records.csv", "w", encoding="utf-8") as fh:
            fh.write("date,stock_id,total_buy_volume,total_sell_volume,institution_count\n")
            for j, d in enumerate(days):
                for t in range(7):
                    k = (j + t) % 3
                    buy, sell, inst = [(900, 100, 3), (0, 0, 0), (100, 900, 2)][k]
                    fh.write(f"{d.isoformat()},{1000 + t},{buy},{sell},{inst}\n")
        with open(tmp_path / "prices.csv", "w", encoding="utf-8") as fh:
            fh.write("date,stock_id,close\n")
            for j, d in enumerate(days):
                for t in range(7):
                    fh.write(f"{d.isoformat()},{1000 + t},{100 + ((j * (t + 1)) % 5) - 2}\n")
        with open(tmp_path / "calendar.csv", "w", encoding="utf-8") as fh:
            fh.write("date\n")
            for d in days:
                fh.write(d.isoformat() + "\n")
        return {
            "news": str(tmp_path / "news.jsonl"),
            "trading_records": str(tmp_path / "records.csv"),
            "prices": str(tmp_path / "prices.csv"),
            "calendar": str(tmp_path / "calendar.csv"),
        }
    return _write


@pytest.fixture
def make_config(tmp_path, write_corpus):
    """RunConfig with one scripted backend ('scripted') unless backends are given."""
    def _make(strategies, n_articles=3, backends=None, **extra):
        corpus = write_corpus(n_articles)
        data = {
            "run_name": "t",
            "corpus": corpus,
            "backends": backends or [
                {"name": "scripted", "kind": "scripted", "script": TRADER_RULES + [ANALYST_RULE, FOLLOW_RULE]},
            ],
            "strategies": strategies,
            "workers": 4,
            "cache_dir": str(tmp_path / "cache"),
            "output_dir": str(tmp_path / "runs"),
            "retry": {"max_attempts": 2, "initial_delay": 0},
        }
        data.update(extra)
        return load_config(data=data)
    return _make
