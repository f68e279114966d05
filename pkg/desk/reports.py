# desk/reports.py
"""
Report emitters. Each kind writes <kind>.txt (2-decimal percentages) and
<kind>.json (integer numerators/denominators plus full-precision values),
both stamped with the manifest digests of the logs they were computed from.
"""
import json
import logging
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

from . import analytics
from .analytics import ORDER, Ratio
from .domain import Horizon
from .errors import EmptyInput
from .utils import atomic_write, save_figure

logger = logging.getLogger(__name__)

INSTITUTIONS = "Institutions"
NEEDS_MARKET = {"consistency", "approval", "market"}


def _header(kind, sources):
    lines = [f"# {kind}"]
    for s in sources:
        lines.append(f"# source {s['log']} manifest {s['manifest_digest'] or '-'} mode {s.get('mode', '-')}")
    return "\n".join(lines) + "\n\n"


def _emit(out_dir, kind, sources, table: pd.DataFrame, payload, notes=()):
    out_dir = Path(out_dir)
    text = _header(kind, sources)
    text += table.to_string() if not table.empty else "(no rows)"
    text += "\n"
    for note in notes:
        text += f"\n{note}"
    if notes:
        text += "\n"
    body = {"kind": kind, "sources": sources, "rows": payload}
    txt = atomic_write(out_dir / f"{kind}.txt", text)
    js = atomic_write(out_dir / f"{kind}.json", json.dumps(body, indent=2, ensure_ascii=False) + "\n")
    return [Path(txt), Path(js)]


def _stats_row(stats):
    return {d.value: stats.ratio(d) for d in ORDER}


def decisions_report(out_dir, sources, groups, labels=None):
    rows, payload = {}, {}
    for name, outcomes in groups.items():
        try:
            stats = analytics.decision_stats(outcomes)
        except EmptyInput:
            logger.warning("group %s has no decided outcomes", name)
            continue
        rows[name] = {**_stats_row(stats), "skipped": stats.skipped}
    if labels:
        stats = analytics.label_stats(labels)
        rows[INSTITUTIONS] = {**_stats_row(stats), "skipped": 0}
    table = pd.DataFrame(
        {name: {**{k: v.percent() for k, v in r.items() if isinstance(v, Ratio)}, "n": r["overweight"].denominator,
                "skipped": r["skipped"]} for name, r in rows.items()}
    ).T
    for name, r in rows.items():
        payload[name] = {k: (v.to_dict() if isinstance(v, Ratio) else v) for k, v in r.items()}
    paths = _emit(out_dir, "decisions", sources, table, payload)
    if rows:
        paths.append(decisions_chart(Path(out_dir) / "decisions.png", rows))
    return paths


def decisions_chart(path, rows):
    frame = pd.DataFrame({name: {k: (r[k].value or 0.0) * 100 for k in ("overweight", "neutral", "underweight")}
                          for name, r in rows.items()}).T
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(frame)), 4))
    frame.plot(kind="bar", ax=ax, color=["#2e7d32", "#9e9e9e", "#c62828"])
    ax.set_ylabel("% of decisions")
    ax.set_ylim(0, 100)
    ax.set_title("Decision distribution")
    ax.legend(loc="upper right")
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    return Path(save_figure(fig, path))


def consistency_report(out_dir, sources, groups, labels):
    table, payload = {}, {}
    for name, outcomes in groups.items():
        rep = analytics.consistency(outcomes, labels)
        table[name] = {
            "overall": rep.overall.percent(),
            "overweight": rep.overweight.percent(),
            "underweight": rep.underweight.percent(),
            "n": rep.overall.denominator,
        }
        payload[name] = rep.to_dict()
    return _emit(out_dir, "consistency", sources, pd.DataFrame(table).T, payload)


def _horizon_pairs(groups):
    """(label, short-term outcomes, long-term outcomes) for strategies run under both horizons."""
    keyed = {}
    for name, outcomes in groups.items():
        o = outcomes[0]
        key = (o.strategy, tuple(sorted((k, v or "") for k, v in o.backends.items())),
               o.variant.seniority if o.strategy.has_head else None, o.mode)
        keyed.setdefault(key, {})[o.variant.horizon] = (name, outcomes)
    pairs = []
    for by_h in keyed.values():
        if Horizon.SHORT_TERM in by_h and Horizon.LONG_TERM in by_h:
            short_name, short = by_h[Horizon.SHORT_TERM]
            _, long_ = by_h[Horizon.LONG_TERM]
            pairs.append((short_name.replace(Horizon.SHORT_TERM.value, "short vs long"), short, long_))
    return pairs


def crosstab_report(out_dir, sources, groups):
    blocks, payload, notes = [], {}, []
    for label, short, long_ in _horizon_pairs(groups):
        ct = analytics.cross_tab(short, long_)
        props = ct.proportions * 100
        shown = props.map(lambda v: f"{v:.2f}%")
        shown["total"] = (ct.row_marginals * 100).map(lambda v: f"{v:.2f}%")
        totals = {**{c: f"{ct.col_marginals[c] * 100:.2f}%" for c in ct.counts.columns}, "total": "100.00%"}
        shown.loc["total"] = pd.Series(totals)
        shown.index.name = "short \\ long"
        blocks.append((label, shown))
        payload[label] = {
            "n": ct.n,
            "counts": {r: {c: int(v) for c, v in row.items()} for r, row in ct.counts.iterrows()},
            "proportions": ct.proportions.to_dict(orient="index"),
            "row_marginals": ct.row_marginals.to_dict(),
            "col_marginals": ct.col_marginals.to_dict(),
            "excluded": dict(ct.excluded),
        }
    if not blocks:
        notes.append("no strategy was run under both horizons")
        return _emit(out_dir, "crosstab", sources, pd.DataFrame(), payload, notes)
    table = pd.concat({label: frame for label, frame in blocks})
    return _emit(out_dir, "crosstab", sources, table, payload)


def approval_report(out_dir, sources, groups, labels):
    table, payload = {}, {}
    for name, outcomes in groups.items():
        if not outcomes[0].strategy.has_head:
            continue
        approval = analytics.approval_stats(outcomes)
        rep = analytics.consistency(outcomes, labels)
        seniority = outcomes[0].variant.seniority
        rate = approval.rate(seniority)
        table[name] = {
            "approval": rate.percent(),
            "invocations": rate.denominator,
            "overall": rep.overall.percent(),
            "overweight": rep.overweight.percent(),
            "underweight": rep.underweight.percent(),
        }
        payload[name] = {"seniority": seniority.value, "approval": rate.to_dict(), **rep.to_dict()}
    notes = () if table else ("no HO / HOm outcomes in the input logs",)
    return _emit(out_dir, "approval", sources, pd.DataFrame(table).T, payload, notes)


def _market_row(mc, horizons):
    row = {}
    for h in horizons:
        row[f"overweight@t+{h}"] = mc.ratio("overweight", h).percent()
        row[f"underweight@t+{h}"] = mc.ratio("underweight", h).percent()
    return row


def market_report(out_dir, sources, groups, market, horizons, labels):
    table, payload = {}, {}
    for name, outcomes in groups.items():
        mc = analytics.market_consistency(outcomes, market, horizons)
        table[name] = _market_row(mc, horizons)
        payload[name] = mc.to_dict()
    if labels:
        every = [o for outcomes in groups.values() for o in outcomes]
        inst = analytics.institution_decisions(every, labels)
        mc = analytics.market_consistency(inst, market, horizons)
        table[INSTITUTIONS] = _market_row(mc, horizons)
        payload[INSTITUTIONS] = mc.to_dict()
    return _emit(out_dir, "market", sources, pd.DataFrame(table).T, payload)


def write_reports(out_dir, kinds, outcomes, sources, market=None, horizons=(1, 5)):
    """Emit every requested kind; returns the written paths."""
    groups = analytics.group_outcomes(outcomes)
    labels = market.aligned_labels(outcomes) if market is not None else {}
    paths = []
    for kind in kinds:
        if kind in NEEDS_MARKET and market is None:
            raise ValueError(f"report kind '{kind}' needs market data")
        if kind == "decisions":
            paths += decisions_report(out_dir, sources, groups, labels)
        elif kind == "consistency":
            paths += consistency_report(out_dir, sources, groups, labels)
        elif kind == "crosstab":
            paths += crosstab_report(out_dir, sources, groups)
        elif kind == "approval":
            paths += approval_report(out_dir, sources, groups, labels)
        elif kind == "market":
            paths += market_report(out_dir, sources, groups, market, horizons, labels)
        else:
            raise ValueError(f"unknown report kind {kind!r}")
        logger.info("wrote %s report", kind)
    return paths
