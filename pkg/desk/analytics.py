# desk/analytics.py
"""
Table-style measurements over outcome logs.

Every ratio keeps its integer numerator and denominator; a zero denominator
is an undefined value, never 0%.
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .domain import Decision, Seniority
from .errors import DataError, DisjointLogs, EmptyInput, MissingPrice
from .loaders import Direction

ORDER = [Decision.OVERWEIGHT, Decision.NEUTRAL, Decision.UNDERWEIGHT]
CLASSED = (Decision.OVERWEIGHT, Decision.UNDERWEIGHT)
UNDEFINED = "—"


@dataclass(frozen=True)
class Ratio:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator < 0 or not 0 <= self.numerator <= max(self.denominator, 0):
            raise ValueError(f"invalid ratio {self.numerator}/{self.denominator}")

    @property
    def value(self) -> Optional[float]:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator

    def __add__(self, other):
        return Ratio(self.numerator + other.numerator, self.denominator + other.denominator)

    def percent(self) -> str:
        if self.value is None:
            return f"{UNDEFINED} ({self.numerator}/{self.denominator})"
        return f"{self.value * 100:.2f}%"

    def to_dict(self):
        return {"numerator": self.numerator, "denominator": self.denominator, "value": self.value}


def group_outcomes(outcomes) -> dict:
    """group label -> outcomes, groups in order of first appearance."""
    groups = {}
    for o in outcomes:
        groups.setdefault(o.group, []).append(o)
    return groups


# --- decision statistics ---

@dataclass(frozen=True)
class DecisionStats:
    counts: dict
    skipped: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def proportions(self) -> dict:
        return {d: self.counts.get(d, 0) / self.total for d in ORDER}

    def ratio(self, decision) -> Ratio:
        return Ratio(self.counts.get(Decision(decision), 0), self.total)


def _stats(decisions, skipped=0) -> DecisionStats:
    counts = Counter(decisions)
    if not counts:
        raise EmptyInput("no decided outcomes to summarise")
    return DecisionStats({d: counts.get(d, 0) for d in ORDER}, skipped)


def decision_stats(outcomes) -> DecisionStats:
    outcomes = list(outcomes)
    decided = [o.final for o in outcomes if not o.skipped]
    return _stats(decided, skipped=len(outcomes) - len(decided))


def label_stats(labels) -> DecisionStats:
    """Institutions row: one weight per evaluated article (article_id -> Decision)."""
    return _stats(labels.values())


# --- consistency with institutions ---

@dataclass(frozen=True)
class ConsistencyReport:
    overweight: Ratio
    underweight: Ratio
    excluded: Counter = field(default_factory=Counter, compare=False)

    @property
    def overall(self) -> Ratio:
        return self.overweight + self.underweight

    def merge(self, other: "ConsistencyReport") -> "ConsistencyReport":
        return ConsistencyReport(self.overweight + other.overweight, self.underweight + other.underweight,
                                 self.excluded + other.excluded)

    def to_dict(self):
        return {
            "overall": self.overall.to_dict(),
            "overweight": self.overweight.to_dict(),
            "underweight": self.underweight.to_dict(),
            "excluded": dict(self.excluded),
        }


def consistency(outcomes, labels) -> ConsistencyReport:
    """
    Agreement of agent decisions with institution labels (article_id -> Decision).
    Only agent Overweight/Underweight decisions enter a denominator; each class
    ratio uses the agent's decisions of that class.
    """
    excluded = Counter()
    rows = []
    for o in outcomes:
        if o.skipped:
            excluded["skipped"] += 1
        elif o.final is Decision.NEUTRAL:
            excluded["neutral"] += 1
        elif o.article_id not in labels:
            excluded["missing_label"] += 1
        else:
            rows.append((o.final.value, Decision(labels[o.article_id]).value))
    df = pd.DataFrame(rows, columns=["agent", "label"])
    df["hit"] = df["agent"] == df["label"]
    agg = df.groupby("agent")["hit"].agg(["sum", "count"])
    agg = agg.reindex([d.value for d in CLASSED], fill_value=0)

    def ratio(d):
        return Ratio(int(agg.loc[d.value, "sum"]), int(agg.loc[d.value, "count"]))

    return ConsistencyReport(ratio(Decision.OVERWEIGHT), ratio(Decision.UNDERWEIGHT), excluded)


def find_consistency_counts(overall, overweight, underweight, max_denominator=10000):
    """
    Smallest integer vectors (m_O, a_O, m_U, a_U) whose class ratios round to
    the given percentages (2 decimals) and whose pooled ratio rounds to
    `overall`. Returns None when nothing fits under max_denominator.
    """
    def candidates(pct):
        a = np.arange(1, max_denominator + 1)
        m = np.rint(a * pct / 100.0).astype(np.int64)
        ok = np.abs(m / a * 100.0 - pct) <= 0.005
        return m[ok], a[ok]

    m_o, a_o = candidates(overweight)
    m_u, a_u = candidates(underweight)
    best = None
    for mu, au in zip(m_u.tolist(), a_u.tolist()):
        pooled = (m_o + mu) / (a_o + au) * 100.0
        hits = np.nonzero(np.abs(pooled - overall) <= 0.005)[0]
        if len(hits) == 0:
            continue
        i = hits[0]     # a_o ascending, so the first hit has the smallest total for this a_u
        total = int(a_o[i]) + au
        if best is None or total < best[0]:
            best = (total, {"m_overweight": int(m_o[i]), "a_overweight": int(a_o[i]),
                            "m_underweight": mu, "a_underweight": au})
    return None if best is None else best[1]


# --- short vs long horizon ---

@dataclass(frozen=True)
class CrossTab:
    counts: pd.DataFrame          # rows: log A decision, columns: log B decision
    excluded: Counter = field(default_factory=Counter)

    @property
    def n(self) -> int:
        return int(self.counts.to_numpy().sum())

    @property
    def proportions(self) -> pd.DataFrame:
        return self.counts / self.n if self.n else self.counts.astype(float)

    @property
    def row_marginals(self) -> pd.Series:
        return self.proportions.sum(axis=1)

    @property
    def col_marginals(self) -> pd.Series:
        return self.proportions.sum(axis=0)

    def cell(self, a, b) -> Ratio:
        return Ratio(int(self.counts.loc[Decision(a).value, Decision(b).value]), self.n)


def _by_article(outcomes, which):
    out = {}
    for o in outcomes:
        if o.article_id in out:
            raise DataError(f"log {which} has more than one outcome for article {o.article_id}")
        out[o.article_id] = o
    return out


def cross_tab(outcomes_a, outcomes_b) -> CrossTab:
    a = _by_article(outcomes_a, "A")
    b = _by_article(outcomes_b, "B")
    shared = [k for k in a if k in b]
    if not shared:
        raise DisjointLogs("the two logs share no article")
    excluded = Counter(unmatched=len(a) + len(b) - 2 * len(shared))
    pairs = []
    for k in shared:
        if a[k].skipped or b[k].skipped:
            excluded["skipped"] += 1
            continue
        pairs.append((a[k].final.value, b[k].final.value))
    labels = [d.value for d in ORDER]
    if pairs:
        df = pd.DataFrame(pairs, columns=["a", "b"])
        counts = pd.crosstab(df["a"], df["b"]).reindex(index=labels, columns=labels, fill_value=0)
    else:
        counts = pd.DataFrame(0, index=labels, columns=labels)
    counts.index.name, counts.columns.name = "a", "b"
    return CrossTab(counts.astype(int), excluded)


# --- head trader approval ---

@dataclass(frozen=True)
class ApprovalStats:
    rates: dict       # Seniority -> Ratio

    def rate(self, seniority) -> Ratio:
        return self.rates.get(Seniority(seniority), Ratio(0, 0))


def approval_stats(outcomes) -> ApprovalStats:
    """Follow verdicts over head-trader invocations, per stated seniority."""
    hierarchy = [o for o in outcomes if o.strategy.has_head]
    if not hierarchy:
        raise EmptyInput("no HO / HOm outcomes to measure approval on")
    follows, calls = Counter(), Counter()
    for o in hierarchy:
        if o.skipped or o.head_verdict is None:
            continue
        s = o.variant.seniority
        calls[s] += 1
        if o.head_verdict.verdict.approves:
            follows[s] += 1
    seen = [s for s in Seniority if any(o.variant.seniority is s for o in hierarchy)]
    return ApprovalStats({s: Ratio(follows[s], calls[s]) for s in seen})


# --- agreement with later price moves ---

_ALIGNED = {Decision.OVERWEIGHT: Direction.UP, Decision.UNDERWEIGHT: Direction.DOWN}


@dataclass(frozen=True)
class MarketConsistency:
    cells: dict                   # (Decision, horizon) -> Ratio
    coverage: Counter = field(default_factory=Counter)

    @property
    def horizons(self):
        return sorted({h for _, h in self.cells})

    def ratio(self, decision, horizon) -> Ratio:
        return self.cells[(Decision(decision), horizon)]

    def overall(self, horizon) -> Ratio:
        return self.ratio(Decision.OVERWEIGHT, horizon) + self.ratio(Decision.UNDERWEIGHT, horizon)

    def to_dict(self):
        out = {}
        for (d, h), r in sorted(self.cells.items(), key=lambda kv: (kv[0][1], kv[0][0].value)):
            out[f"{d.value}@t+{h}"] = r.to_dict()
        out["coverage"] = dict(self.coverage)
        return out


@dataclass(frozen=True)
class InstitutionDecision:
    """An institution label shaped like an outcome, so it can be scored the same way."""

    article_id: str
    ticker: str
    effective_date: object
    final: Decision
    skipped: bool = False
    group: str = "Institutions"


def institution_decisions(outcomes, labels) -> list:
    """One institution decision per evaluated article (first outcome wins for its date)."""
    seen = {}
    for o in outcomes:
        if o.article_id in labels and o.article_id not in seen:
            seen[o.article_id] = InstitutionDecision(o.article_id, o.ticker, o.effective_date,
                                                     Decision(labels[o.article_id]))
    return list(seen.values())


def market_consistency(outcomes, market, horizons=(1, 5)) -> MarketConsistency:
    """Overweight aligned iff the close T trading days later is strictly higher; Underweight iff lower."""
    hits, totals, coverage = Counter(), Counter(), Counter()
    for o in outcomes:
        if o.skipped or o.final not in _ALIGNED:
            continue
        for h in horizons:
            try:
                move = market.forward_move(o.ticker, o.effective_date, h)
            except MissingPrice:
                coverage[f"missing_price@t+{h}"] += 1
                continue
            totals[(o.final, h)] += 1
            if move.direction is _ALIGNED[o.final]:
                hits[(o.final, h)] += 1
    cells = {(d, h): Ratio(hits[(d, h)], totals[(d, h)]) for d in CLASSED for h in horizons}
    return MarketConsistency(cells, coverage)
