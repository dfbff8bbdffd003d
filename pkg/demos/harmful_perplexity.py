"""Train a small Kneser-Ney model on spam and see which texts it finds familiar.

Low perplexity under a model of unwanted text means the document looks like
that text; the web pipeline drops documents scoring below a threshold.
"""
import argparse

from corpusprep import fixtures
from corpusprep.ngram_lm import perplexity, train_from_texts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--order", type=int, default=5)
    ap.add_argument("--threshold", type=float, default=5.0)
    args = ap.parse_args()

    spam = fixtures.harmful_corpus(seed=0)
    model = train_from_texts(spam, args.order)
    print(f"order {model.order}, vocabulary {len(model.vocab)}, discounts:")
    for n, d in enumerate(model.discounts, start=1):
        note = " (fallback)" if n in model.fallback_orders else ""
        print(f"  n={n}: " + ", ".join(f"{x:.3f}" for x in d) + note)

    samples = {
        "spam seen in training": "\n".join(spam[:4]),
        "fresh spam": "\n".join(fixtures.harmful_corpus(seed=99, n_lines=4)),
        "english prose": "\n".join(fixtures.lid_lines("en")[:4]),
        "german prose": "\n".join(fixtures.lid_lines("de")[:4]),
    }
    for name, text in samples.items():
        ppl = perplexity(model, text).value
        verdict = "drop" if ppl < args.threshold else "keep"
        print(f"{name:<24} ppl {ppl:10.2f}  -> {verdict}")


if __name__ == "__main__":
    main()
