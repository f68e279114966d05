# scripts/find_consistency_counts.py
# Search integer (matches, decisions) vectors that realize a published consistency row.
# usage: python scripts/find_consistency_counts.py 44.77 45.09 32.51 [max_denominator]

# --- PATH FIX (must be first) ---
import os, sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import json
from desk.analytics import find_consistency_counts

def main():
    if len(sys.argv) < 4:
        print("usage: python scripts/find_consistency_counts.py OVERALL OVERWEIGHT UNDERWEIGHT [MAX_DEN]")
        sys.exit(2)
    overall, over, under = (float(x) for x in sys.argv[1:4])
    max_den = int(sys.argv[4]) if len(sys.argv) > 4 else 10000
    hit = find_consistency_counts(overall, over, under, max_den)
    if hit is None:
        print(f"no vector with denominators <= {max_den}")
        sys.exit(1)
    m = hit["m_overweight"] + hit["m_underweight"]
    a = hit["a_overweight"] + hit["a_underweight"]
    hit["check"] = {
        "overall": round(100 * m / a, 4),
        "overweight": round(100 * hit["m_overweight"] / hit["a_overweight"], 4),
        "underweight": round(100 * hit["m_underweight"] / hit["a_underweight"], 4),
    }
    print(json.dumps(hit, indent=2))

if __name__ == "__main__":
    main()
