# scripts/diagnose_data.py
# =========================================================
# diagnose_data.py — corpus file inspection helper
# =========================================================
# usage: python scripts/diagnose_data.py path/to/run.yaml

# --- PATH FIX (must be first) ---
import os, sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

# --- IMPORTS ---
import json
import pandas as pd
from pprint import pprint
from desk.config import load_config
from desk.errors import DeskError
from desk.loaders import (CALENDAR_COLUMNS, NEWS_COLUMNS, PRICE_COLUMNS, RECORD_COLUMNS,
                          _norm, _read_csv_safe, validate_corpus)

# --- UTILITIES ---
def column_info(df, aliases, n_sample=6):
    lookup = {_norm(a): canonical for canonical, cands in aliases.items() for a in cands}
    info = []
    for c in df.columns:
        dtype = str(df[c].dtype)
        nnull = int(df[c].notna().sum())
        sample = df[c].dropna().astype(str).unique()[:n_sample].tolist()
        info.append({"col": c, "maps_to": lookup.get(_norm(c), "-"), "dtype": dtype,
                     "non_null": nnull, "sample_values": sample})
    return info

def detect_date_columns(df):
    found = []
    for c in df.columns:
        parsed = pd.to_datetime(df[c].astype(str), errors="coerce", format="mixed")
        if parsed.notna().sum() >= max(3, len(df) // 2):
            found.append({"col": c, "min": str(parsed.min().date()), "max": str(parsed.max().date())})
    return found

def safe_print(title, obj=None):
    sep = "=" * 8
    print(f"\n{sep} {title} {sep}")
    if obj is None:
        return
    if isinstance(obj, (str, int, float)):
        print(obj)
    else:
        try:
            print(json.dumps(obj, indent=2, default=str))
        except Exception:
            pprint(obj)

# --- MAIN ---
def inspect_file(path, aliases, reader):
    if path is None:
        return {"status": "not configured"}
    try:
        df = reader(path)
    except Exception as e:
        return {"error": str(e)}
    out = {"path": str(path), "rows": int(df.shape[0]), "cols": int(df.shape[1])}
    out["columns_info"] = column_info(df, aliases)
    out["missing_required"] = [c for c in aliases if c not in {i["maps_to"] for i in out["columns_info"]}
                               and c not in ("article_id", "source", "company")]
    out["head"] = df.head(3).to_dict(orient="records")
    out["candidate_dates"] = detect_date_columns(df)
    return out

def main():
    if len(sys.argv) < 2:
        print("usage: python scripts/diagnose_data.py <run.yaml>")
        sys.exit(2)
    cfg = load_config(sys.argv[1])
    corpus = cfg.corpus
    print("Working dir:", os.getcwd())
    print("Python:", sys.executable)

    read_news = lambda p: pd.read_json(p, lines=True, dtype=False, convert_dates=False)
    safe_print("NEWS CORPUS", inspect_file(corpus.news, NEWS_COLUMNS, read_news))
    safe_print("TRADING RECORDS", inspect_file(corpus.trading_records, RECORD_COLUMNS, _read_csv_safe))
    safe_print("PRICES", inspect_file(corpus.prices, PRICE_COLUMNS, _read_csv_safe))
    safe_print("CALENDAR", inspect_file(corpus.calendar, CALENDAR_COLUMNS, _read_csv_safe))

    try:
        summary = validate_corpus(corpus, cfg.label_ties, cfg.effective_date, tuple(cfg.market_horizons))
    except DeskError as e:
        summary = {"error": str(e)}
    safe_print("COVERAGE SUMMARY", summary)

    print("\n=== Diagnostics complete ===")
    print("Unmapped columns show maps_to '-'; add their header to the alias tables in desk/loaders.py.")

if __name__ == "__main__":
    main()
