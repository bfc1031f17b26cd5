"""Shared fixtures: tiny vocabularies and session-scoped trained toy models."""

from __future__ import annotations

import pytest

from draftkit import lm
from draftkit.corrector import train_crf, train_null_tasks
from draftkit.decode import DecoderConfig
from draftkit.infill import Bm25Index, make_example, mask_spans_keeping
from draftkit.polish import PolishConfig, build_graph
from draftkit.rng import make_rng
from draftkit.service import ModelBundle
from draftkit.vocab import SPECIAL_TOKENS, Vocab


@pytest.fixture(scope="session")
def letters_vocab() -> Vocab:
    return Vocab(list(SPECIAL_TOKENS) + list("abcde"))


@pytest.fixture(scope="session")
def tiny_model(letters_vocab) -> lm.LmModel:
    """Untrained tiny LM; enough for contract and decoding-rule tests."""
    return lm.LmModel(letters_vocab, d=16, n_layers=1, n_heads=2, l_max=32, seed=41)


def _svo_corpus(n: int, seed: int) -> list[list[str]]:
    subjects = ["cat", "dog", "bird", "fox"]
    verbs = ["saw", "chased", "found"]
    objects = ["ball", "bone", "tree", "river"]
    rng = make_rng(seed)
    corpus = []
    for _ in range(n):
        s = subjects[rng.integers(0, len(subjects))]
        v = verbs[rng.integers(0, len(verbs))]
        o = objects[rng.integers(0, len(objects))]
        corpus.append(f"the {s} {v} the {o} .".split())
    return corpus


@pytest.fixture(scope="session")
def svo_corpus() -> list[list[str]]:
    return _svo_corpus(240, seed=7)


@pytest.fixture(scope="session")
def infill_lm(svo_corpus):
    """LM trained on blank-filling pairs over the subject-verb-object corpus."""
    examples = []
    for sent in svo_corpus:
        content = [sent[1], sent[4]]  # the two content words
        spans = mask_spans_keeping(sent, content)
        examples.append(make_example(sent, spans=spans).train_tokens())
        examples.append(make_example(sent, spans=[]).train_tokens() )
    cfg = lm.TrainConfig(
        objective="mle",
        epochs=14,
        batch_size=32,
        seed=11,
        learning_rate=3e-3,
        d=32,
        n_layers=2,
        n_heads=2,
        l_max=48,
    )
    return lm.train(examples, cfg)


def corrupt(sent: list[str], flip: dict[str, str], rng, rate: float = 0.5) -> list[str]:
    return [flip[t] if t in flip and rng.random() < rate else t for t in sent]


@pytest.fixture(scope="session")
def confusion_crf():
    """CRF trained to undo a deterministic token confusion."""
    flip = {"the": "teh", "saw": "swa"}
    rng = make_rng(13)
    clean = _svo_corpus(300, seed=5)
    pairs = [(corrupt(s, flip, rng), list(s)) for s in clean]
    vocab = Vocab.build([x + y for x, y in pairs])
    model = train_crf(
        pairs,
        vocab=vocab,
        epochs=4,
        batch_size=32,
        learning_rate=3e-3,
        seed=3,
        d=24,
        n_layers=1,
        n_heads=2,
        l_max=24,
        d_m=6,
    )
    return model, flip


def unit_corpus(n: int, seed: int, n_units: int = 5) -> list[list[str]]:
    """Sentences made of word units with internal determinism.

    A unit is either a pair (a_k b_k) or a triple (x_k y_k z_k); the unit
    sequence is random, so each word is predictable only from its unit
    mates, never from global sentence shape.
    """
    rng = make_rng(seed)
    corpus = []
    for _ in range(n):
        m = int(rng.integers(3, 6))
        body = []
        for _ in range(m):
            k = int(rng.integers(0, n_units))
            if rng.random() < 0.5:
                body += [f"a{k}", f"b{k}"]
            else:
                body += [f"x{k}", f"y{k}", f"z{k}"]
        corpus.append(["<s>"] + body + ["</s>"])
    return corpus


@pytest.fixture(scope="session")
def svo_null_detector(svo_corpus):
    """Same-domain detector for the service bundle; thresholds set high so
    the low-entropy grammar cannot trigger spurious edits."""
    return train_null_tasks(
        svo_corpus,
        insert_rate=0.5,
        mask_rate=0.5,
        seed=17,
        n_instances=2000,
        epochs=6,
        batch_size=32,
        learning_rate=3e-3,
        d=24,
        n_layers=1,
        n_heads=2,
        l_max=16,
        tau_ins=0.9,
        tau_del=0.9,
    )


@pytest.fixture(scope="session")
def service_bundle(infill_lm, confusion_crf, svo_null_detector, svo_corpus):
    """One immutable asset snapshot shared by every endpoint test."""
    rng = make_rng(4)
    emb = {
        w: rng.normal(size=6)
        for w in ("cat", "dog", "bird", "fox", "ball", "bone", "tree", "river", "the")
    }
    seen: dict[tuple, list[str]] = {}
    for s in svo_corpus:
        seen.setdefault(tuple(s), list(s))
    corpus = list(seen.values())[:20]
    return ModelBundle(
        lm=infill_lm,
        crf=confusion_crf[0],
        null=svo_null_detector,
        graph=build_graph(emb, topn=4),
        corpus=corpus,
        bm25=Bm25Index.build(corpus),
        decoder=DecoderConfig(strategy="greedy", max_new_tokens=16),
        polish_cfg=PolishConfig(),
        n_default=3,
        version="test-bundle",
    )


@pytest.fixture(scope="session")
def null_detector():
    corpus = unit_corpus(600, seed=21)
    return (
        train_null_tasks(
            corpus,
            insert_rate=0.5,
            mask_rate=0.5,
            seed=9,
            n_instances=6000,
            epochs=12,
            batch_size=32,
            learning_rate=3e-3,
            d=32,
            n_layers=2,
            n_heads=2,
            l_max=20,
            tau_ins=0.6,
            tau_del=0.6,
        ),
        corpus,
    )
