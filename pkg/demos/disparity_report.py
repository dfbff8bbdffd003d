"""Disparity indices, a size correlation and compute shares on a made-up removal table.

The numbers are invented; the point is the shape of the report.
"""
import argparse

from corpusprep.analytics import (
    LanguageRemoval,
    RemovalStats,
    StageTiming,
    dedup_disparity,
    filtering_disparity,
    pearson,
    rounded_shares,
    stage_share,
)

# language, ingested, after filtering, after dedup
TABLE = [
    ("bg", 40_000, 1_800, 600),
    ("cs", 90_000, 3_500, 1_500),
    ("de", 400_000, 14_000, 7_000),
    ("en", 2_500_000, 90_000, 55_000),
    ("fr", 350_000, 12_000, 6_500),
    ("hu", 60_000, 2_100, 900),
    ("pl", 120_000, 4_400, 2_000),
    ("sk", 30_000, 1_100, 420),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mode", choices=("formula", "ratio"), default="formula")
    args = ap.parse_args()
    stats = RemovalStats(tuple(LanguageRemoval(*row) for row in TABLE))

    print("lang  r_filter  r_dedup")
    for r in stats:
        print(f"{r.language:<5} {r.r_filter:7.2f}  {r.r_dedup:7.2f}")

    for name, fn in (("filtering", filtering_disparity), ("dedup", dedup_disparity)):
        rep = fn(stats, args.mode)
        print(f"{name} disparity ({rep.mode}):", ", ".join(f"{k} {v:+.2f}" for k, v in rep.ranked()))

    res = pearson([r.docs_ingested for r in stats], [r.r_dedup for r in stats])
    print(f"dedup removal vs size: r={res.r:.3f}, t={res.t:.3f}, p={res.p_two_tailed:.4f} (n={res.n})")

    hours = [StageTiming("conversion", 6912), StageTiming("filtering", 45810), StageTiming("deduplication", 221230)]
    print("compute share:", rounded_shares(stage_share(hours)))


if __name__ == "__main__":
    main()
