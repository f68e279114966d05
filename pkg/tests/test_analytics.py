from collections import Counter
from datetime import date

import numpy as np
import pytest

from desk.agents import HeadTraderVerdict, Verdict
from desk.analytics import (Ratio, approval_stats, consistency, cross_tab, decision_stats,
                            find_consistency_counts, institution_decisions, label_stats, market_consistency)
from desk.domain import Decision, PricePoint, PromptVariant, StrategyKind, StrategyName, TradingCalendar
from desk.errors import DisjointLogs, EmptyInput
from desk.loaders import LabelBook, MarketData, PriceBook
from desk.strategies import PipelineOutcome

O, N, U = Decision.OVERWEIGHT, Decision.NEUTRAL, Decision.UNDERWEIGHT
HO = StrategyKind(StrategyName.HO)

# count vectors realizing published rows
SINGLE_TRADER_COUNTS = {O: 1986, N: 7027, U: 987}
HO_CONSISTENCY = {"m_o": 3406, "a_o": 7553, "m_u": 66, "a_u": 203}  # smallest vector find_consistency_counts returns
HORIZON_CELLS = [  # rows short-term, columns long-term, order O N U, out of 100000
    [15150, 3047, 10],
    [6179, 65723, 384],
    [64, 7103, 2340],
]
APPROVALS = {"junior": (2156, 10000), "senior": (3865, 10000)}


def outcome(aid, final, ticker="2330", eff=date(2024, 1, 2), variant=PromptVariant(), verdict=None,
            strategy=HO, group="G"):
    return PipelineOutcome(article_id=aid, ticker=ticker, published_at=eff, effective_date=eff,
                           strategy=strategy, variant=variant, final=final, head_verdict=verdict, group=group)


def pct(ratio):
    return round(ratio.value * 100, 2)


def test_ratio_formatting():
    assert Ratio(1, 3).percent() == "33.33%"
    assert Ratio(0, 0).value is None
    assert Ratio(0, 0).percent() == "— (0/0)"
    assert (Ratio(1, 2) + Ratio(2, 3)) == Ratio(3, 5)
    with pytest.raises(ValueError):
        Ratio(3, 2)


def test_decision_stats_single_trader_row():
    log, i = [], 0
    for d, n in SINGLE_TRADER_COUNTS.items():
        for _ in range(n):
            log.append(outcome(f"a{i}", d))
            i += 1
    log.append(outcome("skipped", None))
    stats = decision_stats(log)
    assert [pct(stats.ratio(d)) for d in (O, N, U)] == [19.86, 70.27, 9.87]
    assert sum(stats.proportions.values()) == pytest.approx(1.0, abs=1e-9)
    assert stats.skipped == 1


def test_decision_stats_edges():
    stats = decision_stats([outcome("a", N), outcome("b", N)])
    assert stats.proportions == {O: 0.0, N: 1.0, U: 0.0}
    with pytest.raises(EmptyInput):
        decision_stats([])
    with pytest.raises(EmptyInput):
        decision_stats([outcome("a", None)])
    assert label_stats({"a": O, "b": U}).proportions[U] == 0.5


def test_consistency_single_class():
    log = [outcome(f"a{i}", O) for i in range(100)]
    labels = {f"a{i}": (O if i < 45 else U) for i in range(100)}
    rep = consistency(log, labels)
    assert pct(rep.overall) == pct(rep.overweight) == 45.0
    assert rep.underweight.value is None
    assert rep.underweight.percent() == "— (0/0)"


def test_consistency_ho_row():
    g = HO_CONSISTENCY
    log, labels = [], {}
    for i in range(g["a_o"]):
        log.append(outcome(f"o{i}", O))
        labels[f"o{i}"] = O if i < g["m_o"] else (U if i % 2 else N)
    for i in range(g["a_u"]):
        log.append(outcome(f"u{i}", U))
        labels[f"u{i}"] = U if i < g["m_u"] else O
    rep = consistency(log, labels)
    assert (pct(rep.overall), pct(rep.overweight), pct(rep.underweight)) == (44.77, 45.09, 32.51)
    assert rep.overall == Ratio(g["m_o"] + g["m_u"], g["a_o"] + g["a_u"])


def test_feasibility_search_finds_a_vector():
    hit = find_consistency_counts(44.77, 45.09, 32.51, max_denominator=10000)
    g = HO_CONSISTENCY
    assert hit == {"m_overweight": g["m_o"], "a_overweight": g["a_o"],
                   "m_underweight": g["m_u"], "a_underweight": g["a_u"]}
    m = hit["m_overweight"] + hit["m_underweight"]
    a = hit["a_overweight"] + hit["a_underweight"]
    assert abs(100 * hit["m_overweight"] / hit["a_overweight"] - 45.09) <= 0.005
    assert abs(100 * hit["m_underweight"] / hit["a_underweight"] - 32.51) <= 0.005
    assert abs(100 * m / a - 44.77) <= 0.005


def brute_force(log, labels):
    """Loop-and-count reference for consistency()."""
    m = {O: 0, U: 0}
    a = {O: 0, U: 0}
    for o in log:
        if o.final in (O, U) and o.article_id in labels:
            a[o.final] += 1
            if labels[o.article_id] == o.final:
                m[o.final] += 1
    return m, a


def random_log(rng, n):
    choices = [O, N, U, None]
    log = [outcome(f"a{i}", choices[rng.integers(4)]) for i in range(n)]
    labels = {f"a{i}": [O, N, U][rng.integers(3)] for i in range(n) if rng.random() < 0.9}
    return log, labels


def test_consistency_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        log, labels = random_log(rng, int(rng.integers(0, 201)))
        rep = consistency(log, labels)
        m, a = brute_force(log, labels)
        assert rep.overweight == Ratio(m[O], a[O])
        assert rep.underweight == Ratio(m[U], a[U])


def test_consistency_properties():
    rng = np.random.default_rng(11)
    for _ in range(50):
        log, labels = random_log(rng, 150)
        rep = consistency(log, labels)
        # decomposition
        if rep.overall.denominator:
            parts = [r for r in (rep.overweight, rep.underweight) if r.denominator]
            weighted = sum(r.value * r.denominator for r in parts) / rep.overall.denominator
            assert rep.overall.value == pytest.approx(weighted, abs=1e-12)
        # neutral outcomes never move a ratio
        padded = log + [outcome(f"n{i}", N) for i in range(30)]
        padded_labels = {**labels, **{f"n{i}": O for i in range(30)}}
        assert consistency(padded, padded_labels) == rep
        # permutation
        shuffled = [log[i] for i in rng.permutation(len(log))]
        assert consistency(shuffled, labels) == rep
        # associative merge over a split
        half = len(log) // 2
        assert consistency(log[:half], labels).merge(consistency(log[half:], labels)) == rep


def test_cross_tab_identity_and_disjoint():
    log = [outcome(f"a{i}", d) for i, d in enumerate([O, N, U, O, None])]
    ct = cross_tab(log, log)
    off = ct.counts.to_numpy() - np.diag(np.diag(ct.counts.to_numpy()))
    assert off.sum() == 0
    assert ct.n == 4
    assert ct.excluded["skipped"] == 1
    with pytest.raises(DisjointLogs):
        cross_tab(log, [outcome("zzz", O)])


def test_cross_tab_horizon_table():
    order = [O, N, U]
    short, long_, i = [], [], 0
    for r, row in enumerate(HORIZON_CELLS):
        for c, n in enumerate(row):
            for _ in range(n):
                short.append(outcome(f"a{i}", order[r]))
                long_.append(outcome(f"a{i}", order[c]))
                i += 1
    ct = cross_tab(short, long_)
    rows = [round(v * 100, 2) for v in ct.row_marginals]
    cols = [round(v * 100, 2) for v in ct.col_marginals]
    diag = [round(ct.proportions.iloc[k, k] * 100, 2) for k in range(3)]
    assert rows == [18.21, 72.29, 9.51]
    assert cols == [21.39, 75.87, 2.73]
    assert diag == [15.15, 65.72, 2.34]
    assert ct.cell(O, U) == Ratio(10, 100000)


def test_cross_tab_marginals_match_decision_stats():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 120
        a = [outcome(f"a{i}", [O, N, U][rng.integers(3)]) for i in range(n)]
        b = [outcome(f"a{i}", [O, N, U][rng.integers(3)]) for i in range(n)]
        ct = cross_tab(a, b)
        sa, sb = decision_stats(a), decision_stats(b)
        for k, d in enumerate([O, N, U]):
            assert ct.row_marginals.iloc[k] == pytest.approx(sa.proportions[d])
            assert ct.col_marginals.iloc[k] == pytest.approx(sb.proportions[d])


def test_approval_by_seniority():
    log = []
    for seniority, (follows, calls) in APPROVALS.items():
        variant = PromptVariant("short_term", seniority)
        for i in range(calls):
            v = Verdict.FOLLOW if i < follows else Verdict.NOT_FOLLOW
            final = O if v is Verdict.FOLLOW else N
            log.append(outcome(f"{seniority}{i}", final, variant=variant, verdict=HeadTraderVerdict(v, "", "")))
        # no head call for a Neither suggestion
        log.append(outcome(f"{seniority}-neither", N, variant=variant))
    stats = approval_stats(log)
    assert pct(stats.rate("junior")) == 21.56
    assert pct(stats.rate("senior")) == 38.65
    assert stats.rate("junior").denominator == stats.rate("senior").denominator == 10000


def test_approval_edges():
    nf = HeadTraderVerdict(Verdict.NOT_FOLLOW, "", "")
    assert approval_stats([outcome("a", N, verdict=nf)]).rate("junior") == Ratio(0, 1)
    with pytest.raises(EmptyInput):
        approval_stats([outcome("a", O, strategy=StrategyKind("cot"))])


# Mon 1 .. Fri 5, Mon 8 .. Fri 12
DAYS = [date(2024, 1, d) for d in (1, 2, 3, 4, 5, 8, 9, 10, 11, 12)]
CLOSES = [100, 102, 101, 101, 105, 103, 103, 104, 100, 99]


def ten_day_market(closes=CLOSES):
    points = [PricePoint("A", d, c) for d, c in zip(DAYS, closes)]
    return MarketData(TradingCalendar(DAYS), LabelBook(), PriceBook(points))


def test_market_consistency_hand_computed():
    decisions = [(0, O), (1, U), (2, O), (3, U), (4, O), (5, U), (6, O), (7, U), (8, O), (9, U), (0, N)]
    log = [outcome(f"m{k}", d, ticker="A", eff=DAYS[i]) for k, (i, d) in enumerate(decisions)]
    log.append(outcome("sat", O, ticker="A", eff=date(2024, 1, 6)))
    mc = market_consistency(log, ten_day_market(), (1, 5))
    assert mc.ratio(O, 1) == Ratio(2, 6)
    assert mc.ratio(U, 1) == Ratio(2, 4)
    assert mc.ratio(O, 5) == Ratio(2, 4)
    assert mc.ratio(U, 5) == Ratio(1, 2)
    assert mc.coverage == Counter({"missing_price@t+1": 1, "missing_price@t+5": 5})


def test_market_consistency_one_rise_and_all_flat():
    single = market_consistency([outcome("x", O, ticker="A", eff=DAYS[0])], ten_day_market(), (1,))
    assert single.ratio(O, 1) == Ratio(1, 1)
    flat = ten_day_market([100] * 10)
    log = [outcome(f"f{i}", d, ticker="A", eff=DAYS[i]) for i, d in enumerate([O, U, O, U])]
    mc = market_consistency(log, flat, (1, 5))
    assert mc.ratio(O, 1).value == mc.ratio(U, 1).value == 0.0
    assert mc.ratio(O, 5).value == 0.0


def test_market_consistency_ho_junior_row():
    cal = TradingCalendar([date(2024, 1, 2), date(2024, 1, 3)])
    points, log = [], []
    for i in range(2000):
        t = f"T{i:04d}"
        points += [PricePoint(t, date(2024, 1, 2), 100.0), PricePoint(t, date(2024, 1, 3), 101.0 if i < 1211 else 99.0)]
        log.append(outcome(f"a{i}", O, ticker=t))
    mc = market_consistency(log, MarketData(cal, LabelBook(), PriceBook(points)), (1,))
    assert pct(mc.ratio(O, 1)) == 60.55


def test_institution_rows_use_the_same_scoring():
    log = [outcome("a", N, ticker="A", eff=DAYS[0]), outcome("a", O, ticker="A", eff=DAYS[0], group="H"),
           outcome("b", N, ticker="A", eff=DAYS[1])]
    inst = institution_decisions(log, {"a": O, "b": U})
    assert [(d.article_id, d.final) for d in inst] == [("a", O), ("b", U)]
    mc = market_consistency(inst, ten_day_market(), (1,))
    assert mc.ratio(O, 1) == Ratio(1, 1)
    assert mc.ratio(U, 1) == Ratio(1, 1)
