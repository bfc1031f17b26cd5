"""Train two tiny language models and watch decoding styles diverge.

The corpus chains simple clauses, which makes a likelihood-only model loop
badly under greedy decoding.  The contrast-trained model plus contrastive
search picks likely-but-novel tokens instead.

Run: python3 demos/01_train_and_decode.py  (~2 min)
"""

import numpy as np

from draftkit import lm
from draftkit.decode import DecoderConfig, decode, repetition_report
from draftkit.metrics import distinct_n, gen_diagnostics
from draftkit.rng import make_rng

NOUNS = ["cat", "dog", "fox", "bird", "fish", "horse"]
VERBS = ["saw", "chased", "found"]


def make_corpus(n_sentences: int, seed: int) -> list[list[str]]:
    rng = make_rng(seed)
    corpus = []
    for _ in range(n_sentences):
        words = []
        for j in range(int(rng.integers(2, 5))):
            words += [
                "the", NOUNS[int(rng.integers(0, 6))],
                VERBS[int(rng.integers(0, 3))],
                "the", NOUNS[int(rng.integers(0, 6))],
            ]
            words.append("and")
        words[-1] = "."
        corpus.append(words)
    return corpus


def main():
    corpus = make_corpus(3000, seed=12)
    base = dict(epochs=3, batch_size=32, learning_rate=3e-3,
                d=32, n_layers=1, n_heads=2, l_max=96)

    print("training likelihood-only model ...")
    mle = lm.train(corpus, lm.TrainConfig(objective="mle", seed=5, **base))
    print("  loss:", mle.training_log)

    print("training with the representation-contrast objective (rho=0.5) ...")
    ctg = lm.train(corpus, lm.TrainConfig(objective="contrastive", rho=0.5, seed=5, **base))
    print("  loss:", ctg.training_log)

    prefix = ["the", "cat", "saw"]
    print(f"\nprefix: {' '.join(prefix)}")

    out, _ = decode(mle, mle.vocab.encode(prefix),
                    DecoderConfig(strategy="greedy", max_new_tokens=40))
    text = mle.vocab.decode(out)
    print("\ngreedy, likelihood-only model:")
    print("  ", " ".join(text))
    report = repetition_report(text, [1, 2])
    print("   distinct-1/2:", report["distinct"])
    print("   longest repeated n-gram:", " ".join(map(str, report["longest_repeated_ngram"])))

    out, trace = decode(ctg, ctg.vocab.encode(prefix),
                        DecoderConfig(strategy="contrastive", k=5, alpha=0.6,
                                      max_new_tokens=40))
    text = ctg.vocab.decode(out)
    print("\ncontrastive search (k=5, alpha=0.6), contrast-trained model:")
    print("  ", " ".join(text))
    print("   distinct-2:", distinct_n([text], 2))
    step = trace.steps[1]
    print("   second-step candidates (token, confidence, penalty, score):")
    for c in step.candidates:
        print(f"     {ctg.vocab.tokens[c.token_id]:10s} {c.confidence:.3f} "
              f"{c.penalty:.3f} {c.score:+.3f}")

    diag = gen_diagnostics(ctg.vocab.encode(prefix), out, ctg)
    print("   diagnostics:", {k: round(v, 3) for k, v in diag.items()})


if __name__ == "__main__":
    main()
