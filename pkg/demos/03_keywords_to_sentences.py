"""Turn keywords into sentences by filling blanks, with two baselines.

Training pairs mask segments of real sentences; the model learns to emit
the missing segments in order.  At inference the keywords are framed with
blanks and the model fills them.  Retrieval (BM25) and single-token masked
prediction serve as the comparison points.

Run: python3 demos/03_keywords_to_sentences.py  (~1 min)
"""

from draftkit import lm
from draftkit.decode import DecoderConfig
from draftkit.infill import (
    Bm25Index,
    bm25_search,
    build_mask_instances,
    infill_generate,
    make_example,
    mask_spans_keeping,
    mlm_fill,
    reassemble,
)
from draftkit.lm import train_masked
from draftkit.metrics import distinct_n, novelty
from draftkit.rng import make_rng
from draftkit.vocab import BLANK, Vocab

SENTENCE = (
    "although they did not have a lot of money she says that "
    "she was never so happy ."
).split()


def svo_corpus(n, seed):
    nouns = ["cat", "dog", "bird", "fox"]
    verbs = ["saw", "chased", "found"]
    objects = ["ball", "bone", "tree", "river"]
    rng = make_rng(seed)
    return [
        ["the", nouns[int(rng.integers(0, 4))], verbs[int(rng.integers(0, 3))],
         "the", objects[int(rng.integers(0, 4))], "."]
        for _ in range(n)
    ]


def main():
    print("pair construction on a real sentence:")
    spans = mask_spans_keeping(SENTENCE, ["money", "happy"])
    ex = make_example(SENTENCE, spans=spans)
    print("  input: ", " ".join(ex.input))
    print("  output:", " ".join(ex.output))
    print("  round-trips:", reassemble(ex.input, ex.output) == SENTENCE)

    print("\ntraining the blank-filling model on a toy corpus ...")
    corpus = svo_corpus(240, seed=7)
    examples = []
    for sent in corpus:
        examples.append(
            make_example(sent, spans=mask_spans_keeping(sent, [sent[1], sent[4]]))
            .train_tokens()
        )
        examples.append(make_example(sent, spans=[]).train_tokens())
    model = lm.train(
        examples,
        lm.TrainConfig(objective="mle", epochs=14, batch_size=32, seed=11,
                       learning_rate=3e-3, d=32, n_layers=2, n_heads=2, l_max=48),
    )

    keywords = [["cat"], ["ball"]]
    sentences, report = infill_generate(
        model, keywords, DecoderConfig(strategy="greedy", max_new_tokens=32), n_candidates=3
    )
    print("keywords:", [" ".join(k) for k in keywords], "->")
    for sent in sentences:
        nv = novelty([t for k in keywords for t in k], sent)
        print(f"   {' '.join(sent)}   (novelty {nv:.2f})")
    print("  report:", report)
    print("  distinct-2 of outputs:", round(distinct_n(sentences, 2), 3))

    print("\nretrieval baseline (BM25 over the training sentences):")
    index = Bm25Index.build(corpus)
    for doc_id, score in bm25_search(index, ["cat", "ball"], 3):
        print(f"   {score:.3f}  {' '.join(corpus[doc_id])}")

    print("\nsingle-token masked baseline:")
    vocab = Vocab.build(corpus)
    masked = train_masked(
        build_mask_instances(corpus, vocab, seed=2, per_sentence=2),
        vocab, epochs=20, batch_size=32, learning_rate=3e-3, seed=4,
        d=24, n_layers=1, n_heads=2, l_max=16,
    )
    frame = ["the", "cat", BLANK, "the", "ball", "."]
    print("  frame: ", " ".join(frame))
    print("  filled:", " ".join(mlm_fill(masked, frame)))


if __name__ == "__main__":
    main()
