"""Context-aware phrase polishing and two flavors of sentence expansion.

Polishing ranks graph neighbors of a selected phrase by a blend of offline
similarity and how well each candidate fits the surrounding words.
Expansion either trains on (skeleton, sentence) pairs built by dropping
modifiers, or plants masked sites around nouns and fills them.

Run: python3 demos/04_polish_and_expand.py  (~1 min)
"""

import numpy as np

from draftkit import lm
from draftkit.decode import DecoderConfig, decode
from draftkit.infill import make_example
from draftkit.lm import FRAME_PREFIX_SEP, FRAME_T_SEP_S_CLS, conditional_format
from draftkit.polish import (
    AnnotatedSentence,
    PolishConfig,
    build_graph,
    expansion_probe,
    local_expand,
    polish,
    skeleton_pairs,
)
from draftkit.rng import make_rng


def main():
    rng = make_rng(3)
    vocab_words = {
        "quick": [0.9, 0.3, 0.1], "fast": [0.95, 0.25, 0.05],
        "rapid": [0.85, 0.35, 0.05], "slow": [-0.9, 0.3, 0.1],
        "fox": [0.05, 0.9, 0.4], "dog": [0.0, 0.95, 0.35],
        "jumps": [0.3, 0.1, 0.9], "runs": [0.35, 0.05, 0.92],
    }
    emb = {w: np.array(v) for w, v in vocab_words.items()}
    graph = build_graph(emb, topn=4)

    sentence = "the quick fox jumps".split()
    print("sentence:", " ".join(sentence), "| polishing the span 'quick'")
    for lam in (1.0, 0.5, 0.0):
        ranked = polish(sentence, (1, 1), graph, PolishConfig(lam=lam, top_m=3))
        row = ", ".join(f"{c.phrase} ({c.score:+.2f})" for c in ranked)
        print(f"  lam={lam}: {row}")

    print("\nskeleton pairs for global expansion:")
    ann = AnnotatedSentence(
        tokens="red is a powerful color that attracts more attention".split(),
        modifiers=[(3, 1), (5, 4)],
    )
    for skeleton, sent in skeleton_pairs([ann], seed=1, drop_rate=1.0):
        print("  skeleton:", " ".join(skeleton))
        print("  sentence:", " ".join(sent))
        framed = conditional_format((skeleton, sent), FRAME_T_SEP_S_CLS)
        print("  training string:", " ".join(framed))

    print("\ntraining a tiny expansion model on skeleton pairs ...")
    base_corpus = []
    nouns = ["cat", "dog"]
    adjs = ["big", "small", "happy"]
    rng = make_rng(8)
    for _ in range(200):
        n1, n2 = nouns[int(rng.integers(0, 2))], nouns[int(rng.integers(0, 2))]
        a1, a2 = adjs[int(rng.integers(0, 3))], adjs[int(rng.integers(0, 3))]
        full = ["the", a1, n1, "saw", "the", a2, n2]
        skeleton = ["the", n1, "saw", "the", n2]
        base_corpus.append(conditional_format((skeleton, full), FRAME_T_SEP_S_CLS))
    expander = lm.train(
        base_corpus,
        lm.TrainConfig(objective="mle", epochs=16, batch_size=32, seed=2,
                       learning_rate=3e-3, d=32, n_layers=1, n_heads=2, l_max=24),
    )
    prompt = conditional_format((["the", "cat", "saw", "the", "dog"],), FRAME_PREFIX_SEP)
    ids, _ = decode(
        expander, expander.vocab.encode(prompt),
        DecoderConfig(strategy="greedy", max_new_tokens=10),
    )
    out = expander.vocab.decode(ids)
    if out and out[-1] == "[CLS]":
        out = out[:-1]
    print("  skeleton prompt -> expansion:", " ".join(out))

    print("\nlocal expansion probe (mask sites chosen from POS tags):")
    toks = "she saw flowers on the grass".split()
    tags = ["PRON", "VERB", "NOUN", "ADP", "DET", "NOUN"]
    print("  probe:", " ".join(expansion_probe(toks, tags)))

    print("training a small infill model for modifier prediction ...")
    trails = [["in", "the", "park"], ["at", "night"]]
    infill_corpus = []
    for _ in range(300):
        n1, n2 = nouns[int(rng.integers(0, 2))], nouns[int(rng.integers(0, 2))]
        a1 = adjs[int(rng.integers(0, 3))]
        trail = trails[int(rng.integers(0, 2))]
        sent = ["the", a1, n1, "saw", "the", n2] + trail
        infill_corpus.append(
            make_example(sent, spans=[(1, 1), (6, len(trail))]).train_tokens()
        )
    infiller = lm.train(
        infill_corpus,
        lm.TrainConfig(objective="mle", epochs=16, batch_size=32, seed=6,
                       learning_rate=3e-3, d=32, n_layers=1, n_heads=2, l_max=24),
    )
    expanded, spans = local_expand(
        ["the", "cat", "saw", "the", "dog"],
        ["DET", "NOUN", "VERB", "DET", "NOUN"],
        infiller,
        DecoderConfig(strategy="greedy", max_new_tokens=12),
    )
    print("  expanded:", " ".join(expanded), "| inserted spans:", spans)


if __name__ == "__main__":
    main()
