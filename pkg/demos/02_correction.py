"""Fix typos with the CRF channel and missing/extra words with gap probes.

Two models split the work: a same-length CRF decoder rewrites substituted
tokens, and a masked predictor with a no-word token proposes insertions
and deletions.

Run: python3 demos/02_correction.py  (~1 min)
"""

from draftkit.corrector import (
    best_repair,
    correct_substitutions,
    null_detect,
    train_crf,
    train_null_tasks,
)
from draftkit.rng import make_rng
from draftkit.vocab import Vocab

FLIP = {"the": "teh", "saw": "swa", "found": "fuond"}


def svo_sentences(n, seed):
    nouns = ["cat", "dog", "fox", "bird"]
    verbs = ["saw", "found", "chased"]
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        out.append([
            "the", nouns[int(rng.integers(0, 4))],
            verbs[int(rng.integers(0, 3))],
            "the", nouns[int(rng.integers(0, 4))], ".",
        ])
    return out


def unit_sentences(n, seed):
    rng = make_rng(seed)
    corpus = []
    for _ in range(n):
        body = []
        for _ in range(int(rng.integers(3, 6))):
            k = int(rng.integers(0, 5))
            body += [f"a{k}", f"b{k}"] if rng.random() < 0.5 else [f"x{k}", f"y{k}", f"z{k}"]
        corpus.append(["<s>"] + body + ["</s>"])
    return corpus


def main():
    print("training the substitution CRF on (noisy, clean) pairs ...")
    rng = make_rng(9)
    clean = svo_sentences(1500, seed=4)
    pairs = [
        ([FLIP[t] if t in FLIP and rng.random() < 0.5 else t for t in s], list(s))
        for s in clean
    ]
    crf = train_crf(pairs, vocab=Vocab.build([x + y for x, y in pairs]),
                    epochs=3, batch_size=32, learning_rate=3e-3, seed=3,
                    d=24, n_layers=1, n_heads=2, l_max=16, d_m=6)

    noisy = "teh cat swa the dog .".split()
    corrected, edits = correct_substitutions(crf, noisy)
    print("  noisy:    ", " ".join(noisy))
    print("  corrected:", " ".join(corrected))
    for e in edits:
        print(f"   edit: {e.kind} @{e.position}: {e.old} -> {e.new}")

    print("\ntraining the insertion/deletion detector on masked gap/word probes ...")
    corpus = unit_sentences(600, seed=21)
    detector = train_null_tasks(
        corpus, insert_rate=0.5, mask_rate=0.5, seed=9, n_instances=6000,
        epochs=12, batch_size=32, learning_rate=3e-3,
        d=32, n_layers=2, n_heads=2, l_max=20, tau_ins=0.6, tau_del=0.6,
    )

    sent = corpus[0]
    dropped = sent[:3] + sent[4:]
    print("  clean:  ", " ".join(sent))
    print("  dropped:", " ".join(dropped))
    proposals = null_detect(detector, dropped)
    for e in proposals:
        print(f"   proposal: {e.kind} @{e.position} {e.new or e.old} (p={e.score:.2f})")
    print("  repaired:", " ".join(best_repair(detector, dropped, proposals)))

    doubled = sent[:4] + [sent[3]] + sent[4:]
    print("  doubled:", " ".join(doubled))
    proposals = null_detect(detector, doubled)
    deletes = [e for e in proposals if e.kind == "delete"]
    for e in deletes:
        print(f"   proposal: delete @{e.position} {e.old} (p={e.score:.2f})")
    print("  repaired:", " ".join(best_repair(detector, doubled, proposals)))


if __name__ == "__main__":
    main()
