"""Run the web pipeline end to end on a generated dump and print what happened.

    python3 demos/web_pipeline.py --out /tmp/corpusprep-demo
"""
import argparse
import json
from pathlib import Path

from corpusprep import fixtures
from corpusprep.langid import train_profiles
from corpusprep.ngram_lm import train_from_texts
from corpusprep.pipeline import PipelineConfig, run_web


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="/tmp/corpusprep-demo")
    ap.add_argument("--docs", type=int, default=300)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    root = Path(args.out)

    # models: a character n-gram classifier from the bundled lines, a KN model on spam
    train, _ = fixtures.lid_split()
    models = root / "models"
    models.mkdir(parents=True, exist_ok=True)
    train_profiles(train).save(models / "lid.json")
    train_from_texts(fixtures.harmful_corpus()).save(models / "harmful.knlm")

    fx = fixtures.gen_synthetic_dump(args.seed, args.docs, 20, ("de", "en", "fr"), exact_pairs=5,
                                     low_pairs=10, harmful_docs=5, noisy_docs=5, short_docs=5)
    fixtures.write_synthetic_dump(root / "data", fx)
    print(f"dump {fx.dump}: {len(fx.documents)} documents, {len(fx.pairs('dup_pair'))} near-duplicate pairs")

    cfg = PipelineConfig(pipeline="web", input_root=str(root / "data"), output_root=str(root / "run"),
                         lid_model=str(models / "lid.json"), harmful_lm=str(models / "harmful.knlm"),
                         workers=args.workers)
    res = run_web(cfg)
    for stage, n in res.drops_by_stage().items():
        print(f"  {stage:<10} removed {n}")
    print(f"kept per language: {res.kept}")

    report = json.loads((root / "run" / "report" / "report.json").read_text())
    for row in report["removal"]:
        print(f"  {row['language']}: r_filter {row['r_filter']:.1f}%  r_dedup {row['r_dedup']:.1f}%")
    # the pipeline rewrites the language segment of each docid; the record number stays
    category = {m["docid"].rsplit("/", 1)[1]: m["category"] for m in fx.manifest if m["kind"] == "doc"}
    for stage in ("prefilter", "quality", "harmful"):
        lines = (root / "run" / "droplogs" / f"{stage}.jsonl").read_text().splitlines()
        hit = sorted({category[json.loads(x)["docid"].rsplit("/", 1)[1]] for x in lines})
        print(f"  {stage} drops came from planted categories {hit}")


if __name__ == "__main__":
    main()
