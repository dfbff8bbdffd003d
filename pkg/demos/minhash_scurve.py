"""How often do two documents become LSH candidates, as a function of their Jaccard similarity?

Compares the banding curve 1 - (1 - J^r)^b with what the index actually does.
"""
import argparse
import random

from corpusprep import fixtures
from corpusprep.dedup import LshIndex, estimate_jaccard, minhash_signature


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bands", type=int, default=16)
    ap.add_argument("--rows", type=int, default=8)
    ap.add_argument("--pairs", type=int, default=300)
    args = ap.parse_args()
    k = args.bands * args.rows
    rng = random.Random(0)

    print(f"K={k} permutations, b={args.bands} bands of r={args.rows} rows")
    print(" J     estimate  candidate rate  predicted")
    for j in (0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9):
        est, hits = 0.0, 0
        for i in range(args.pairs):
            a, b = fixtures.planted_jaccard_sets(rng, j, union=200)
            sa, sb = minhash_signature(a, k, seed=i), minhash_signature(b, k, seed=i)
            est += estimate_jaccard(sa, sb)
            index = LshIndex(k, args.bands)
            index.insert("x/en/0/0", sa)
            index.insert("x/en/0/1", sb)
            hits += bool(index.candidate_pairs())
        predicted = 1 - (1 - j ** args.rows) ** args.bands
        print(f"{j:.1f}   {est / args.pairs:.3f}     {hits / args.pairs:.3f}           {predicted:.3f}")


if __name__ == "__main__":
    main()
