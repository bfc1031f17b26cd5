"""Mine paraphrase pairs, then filter the near-duplicates and strangers.

Pairs arrive from a (mock) round-trip translation client and embedding
retrieval; the filter floors token edit distance, word mover's distance,
and mean-pooled cosine.

Run: python3 demos/05_paraphrase_mining.py  (seconds)
"""


from draftkit.datapipe import (
    MockTranslationClient,
    backtranslate,
    filter_pairs,
    levenshtein,
    mine_retrieval,
    wmd,
)
from draftkit.rng import make_rng


def main():
    words = ["sun", "sol", "star", "bright", "shiny", "dark", "moon", "light"]
    rng = make_rng(5)
    emb = {w: rng.normal(size=6) for w in words}
    emb["sol"] = emb["sun"] + 0.05 * rng.normal(size=6)     # near-synonyms
    emb["shiny"] = emb["bright"] + 0.05 * rng.normal(size=6)

    a, b = ["sun", "bright"], ["sol", "shiny"]
    print("edit distance:", levenshtein(a, b))
    print("word mover's distance:", round(wmd(a, b, emb), 4))
    print("identical wmd:", wmd(a, a, emb))

    print("\nback translation through a substitution-table mock:")
    client = MockTranslationClient(
        table={"sun": "sonne", "bright": "hell"},
        reverse_table={"sonne": "sol", "hell": "shiny"},
    )
    pair = backtranslate(client, ["the", "sun", "is", "bright"], "de")
    print("  ", " ".join(pair.s), "->", " ".join(pair.t))

    print("\nretrieval over a small corpus:")
    corpus = [
        ["the", "sun", "is", "bright"],
        ["the", "moon", "is", "dark"],
        ["a", "star", "is", "shiny"],
        ["the", "sun", "is", "bright"],  # duplicate of the query
    ]
    table = dict(emb)
    for w in ("the", "is", "a"):
        table[w] = rng.normal(size=6) * 0.1
    hits = mine_retrieval(corpus, ["the", "sun", "is", "bright"], 3, table)
    for hit in hits:
        print(f"   sim={hit.sem_sim:+.3f}  {' '.join(hit.t)}")

    print("\nfiltering mined pairs (floors: lex>=2, wmd>=0.02, sem>=0.3):")
    pairs = [pair] + hits
    kept, report = filter_pairs(pairs, 2, 0.02, 0.3, table)
    for p in kept:
        print("   kept:", " ".join(p.s), "<->", " ".join(p.t), f"({p.source})")
    print("  report:", report)


if __name__ == "__main__":
    main()
