"""Assemble every model, persist the archives, and exercise the HTTP API.

Writes trained archives plus a config file into demos/_assets/, then sends
one request per suggestion kind through an in-process client.  Start a
real server afterward with:

    draftkit serve --config demos/_assets/service.json

Run: python3 demos/06_service.py  (~2 min)
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from draftkit import lm, store
from draftkit.corrector import train_crf, train_null_tasks
from draftkit.infill import make_example, mask_spans_keeping
from draftkit.polish import build_graph
from draftkit.rng import make_rng
from draftkit.service import ModelBundle, build_app
from draftkit.vocab import Vocab

ASSETS = Path(__file__).parent / "_assets"

NOUNS = ["cat", "dog", "bird", "fox"]
VERBS = ["saw", "chased", "found"]
OBJECTS = ["ball", "bone", "tree", "river"]


def svo_corpus(n, seed):
    rng = make_rng(seed)
    return [
        ["the", NOUNS[int(rng.integers(0, 4))], VERBS[int(rng.integers(0, 3))],
         "the", OBJECTS[int(rng.integers(0, 4))], "."]
        for _ in range(n)
    ]


def main():
    ASSETS.mkdir(exist_ok=True)
    corpus = svo_corpus(240, seed=7)

    print("training the completion/infill model ...")
    examples = []
    for sent in corpus:
        spans = mask_spans_keeping(sent, [sent[1], sent[4]])
        examples.append(make_example(sent, spans=spans).train_tokens())
        examples.append(make_example(sent, spans=[]).train_tokens())
    lm_model = lm.train(
        examples,
        lm.TrainConfig(objective="mle", epochs=14, batch_size=32, seed=11,
                       learning_rate=3e-3, d=32, n_layers=2, n_heads=2, l_max=48),
    )
    store.save(lm_model, ASSETS / "lm.efd")

    print("training the substitution corrector ...")
    flip = {"the": "teh", "saw": "swa"}
    rng = make_rng(13)
    pairs = [
        ([flip[t] if t in flip and rng.random() < 0.5 else t for t in s], list(s))
        for s in corpus
    ]
    crf = train_crf(pairs, vocab=Vocab.build([x + y for x, y in pairs]),
                    epochs=4, batch_size=32, learning_rate=3e-3, seed=3,
                    d=24, n_layers=1, n_heads=2, l_max=24, d_m=6)
    store.save(crf, ASSETS / "crf.efd")

    print("training the insertion/deletion detector ...")
    detector = train_null_tasks(
        corpus, insert_rate=0.5, mask_rate=0.5, seed=17, n_instances=2000,
        epochs=6, batch_size=32, learning_rate=3e-3,
        d=24, n_layers=1, n_heads=2, l_max=16, tau_ins=0.9, tau_del=0.9,
    )
    store.save(detector, ASSETS / "null.efd")

    print("building the phrase graph and retrieval corpus ...")
    emb_rng = make_rng(4)
    emb = {w: emb_rng.normal(size=6) for w in NOUNS + VERBS + OBJECTS + ["the"]}
    graph = build_graph(emb, topn=4)
    graph.save(ASSETS / "graph.json")
    corpus_path = ASSETS / "corpus.txt"
    corpus_path.write_text(
        "\n".join(" ".join(s) for s in corpus[:40]), encoding="utf-8"
    )

    config = {
        "decoder": {"strategy": "greedy", "max_new_tokens": 16},
        "service": {
            "lm_model": str(ASSETS / "lm.efd"),
            "crf_model": str(ASSETS / "crf.efd"),
            "null_model": str(ASSETS / "null.efd"),
            "graph": str(ASSETS / "graph.json"),
            "corpus": str(corpus_path),
        },
    }
    (ASSETS / "service.json").write_text(json.dumps(config, indent=2), encoding="utf-8")

    bundle = ModelBundle.from_config(store.load_config(ASSETS / "service.json"))
    app = build_app(bundle)
    with TestClient(app) as client:
        print("\nhealth:", client.get("/v1/health").json())
        requests = [
            {"kind": "complete", "text": "the cat", "n": 2},
            {"kind": "polish", "text": "the cat saw the ball", "span": [1, 1], "n": 2},
            {"kind": "correct", "text": "teh cat swa the ball ."},
            {"kind": "infill", "keywords": ["cat", "ball"], "n": 2},
            {"kind": "expand", "text": "the cat", "n": 1},
            {"kind": "retrieve", "text": "cat ball", "n": 2},
        ]
        for req in requests:
            body = client.post("/v1/suggest", json=req).json()
            tops = [c["text"] for c in body["candidates"][:2]]
            print(f"\n{req['kind']:9s} -> {tops}")
            if req["kind"] == "correct" and body["candidates"]:
                print("           edits:", body["candidates"][0]["edits"])
    print(f"\nassets in {ASSETS}; run: draftkit serve --config {ASSETS / 'service.json'}")


if __name__ == "__main__":
    main()
