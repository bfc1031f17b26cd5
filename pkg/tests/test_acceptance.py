"""Acceptance suite: one test per release criterion, at pinned tolerances.

Each test prints a single PASS line on success; a pytest failure marks the
criterion red.  Heavy runs (degeneration direction, corrector end-to-end)
carry their stated wall-clock budgets.
"""

import itertools
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from fastapi.testclient import TestClient

from draftkit import lm, store
from draftkit import tensor as T
from draftkit.corrector import (
    CrfConfig,
    CrfModel,
    apply_edits,
    correct_substitutions,
    crf_log_likelihood,
    crf_losses,
    null_detect,
    train_crf,
    viterbi_best_score,
    viterbi_decode,
)
from draftkit.datapipe import wmd, word_centroid_distance
from draftkit.decode import DecoderConfig, decode
from draftkit.errors import ArchiveError
from draftkit.infill import (
    Bm25Index,
    bm25_search,
    contains_in_order,
    infill_generate,
    make_example,
    mask_spans_keeping,
    reassemble,
)
from draftkit.metrics import distinct_n, novelty, sentence_prf
from draftkit.optim import grad_check
from draftkit.polish import PolishConfig, build_graph, polish
from draftkit.rng import make_rng
from draftkit.service import SuggestResponse, build_app
from draftkit.vocab import SPECIAL_TOKENS, Vocab


def passed(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


LETTERS = list("abcde")  # 5 letters + 7 specials = |V| of 12


def tiny_lm(seed: int) -> lm.LmModel:
    vocab = Vocab(list(SPECIAL_TOKENS) + LETTERS)
    return lm.LmModel(vocab, d=8, n_layers=1, n_heads=2, l_max=24, seed=seed)


class TestGradientSuite:
    def test_all_losses_match_finite_differences(self):
        started = time.monotonic()
        tol = 1e-4
        model = tiny_lm(101)
        seqs = [
            model.vocab.encode(list("abcabcda")),  # T = 8
            model.vocab.encode(list("ebd")),
        ]
        checks = {"mle": lambda: lm.loss_mle(model, seqs)}
        for rho in (0.3, 0.5, 1.0):
            checks[f"cl rho={rho}"] = lambda rho=rho: lm.loss_cl(model, seqs, rho)
        checks["contrastive"] = lambda: lm.loss_combined(model, seqs, 0.5)

        crf = CrfModel(
            model.vocab, d=8, n_layers=1, n_heads=2, l_max=16, d_m=4, seed=7
        )
        x = crf.vocab.encode(list("abcde"))
        y = crf.vocab.encode(list("edcba"))
        plain = CrfConfig(gamma=0.0)
        checks["dp"] = lambda: crf_losses(crf, x, y, plain)["dp"]
        checks["crf exact-z"] = lambda: crf_losses(crf, x, y, plain)["crf"]
        for gamma in (0.5, 2.0):
            cfg = CrfConfig(gamma=gamma)
            checks[f"dp focal g={gamma}"] = (
                lambda cfg=cfg: crf_losses(crf, x, y, cfg)["dp_focal"]
            )
            checks[f"crf focal g={gamma}"] = (
                lambda cfg=cfg: crf_losses(crf, x, y, cfg)["crf_focal"]
            )

        for name, loss_fn in checks.items():
            params = model.params if name.split()[0] in ("mle", "cl", "contrastive") else crf.params
            err = grad_check(
                loss_fn, params, h=1e-5, seed=13, max_coords_per_param=3
            )
            assert err < tol, f"{name}: max relative error {err:.2e}"
        elapsed = time.monotonic() - started
        assert elapsed < 120, f"gradient suite took {elapsed:.0f}s"
        passed(f"gradient suite ({len(checks)} losses, {elapsed:.0f}s)")


class TestContrastiveReductions:
    def test_alpha_zero_and_k_one_match_greedy_100_pairs(self):
        mismatches = 0
        pairs = 0
        for model_seed in range(20):
            model = tiny_lm(500 + model_seed)
            rng = make_rng(model_seed)
            for _ in range(5):
                length = int(rng.integers(1, 4))
                prefix = [
                    model.vocab.index[LETTERS[int(rng.integers(0, 5))]]
                    for _ in range(length)
                ]
                pairs += 1
                greedy, _ = decode(
                    model, prefix, DecoderConfig(strategy="greedy", max_new_tokens=6)
                )
                a0, _ = decode(
                    model,
                    prefix,
                    DecoderConfig(
                        strategy="contrastive", k=4, alpha=0.0, max_new_tokens=6
                    ),
                )
                k1, _ = decode(
                    model,
                    prefix,
                    DecoderConfig(
                        strategy="contrastive", k=1, alpha=0.7, max_new_tokens=6
                    ),
                )
                mismatches += (greedy != a0) + (greedy != k1)
        assert pairs == 100
        assert mismatches == 0
        passed("contrastive reductions (alpha=0 and k=1 vs greedy, 100 pairs)")


class TestObjectiveReduction:
    def test_zero_margin_training_is_bit_identical_to_mle(self, tmp_path):
        corpus = [list("abcab"), list("deca"), list("bbade")] * 6
        base = dict(
            epochs=3, batch_size=4, seed=77, learning_rate=2e-3,
            d=16, n_layers=1, n_heads=2, l_max=12,
        )
        mle_model = lm.train(corpus, lm.TrainConfig(objective="mle", **base))
        ctg_model = lm.train(
            corpus, lm.TrainConfig(objective="contrastive", rho=0.0, **base)
        )
        store.save(mle_model, tmp_path / "mle.efd")
        store.save(ctg_model, tmp_path / "ctg.efd")
        assert (tmp_path / "mle.efd").read_bytes() == (tmp_path / "ctg.efd").read_bytes()
        passed("zero-margin objective reduction (bit-identical training)")


class TestCrfOracleEquivalence:
    def test_fifty_random_models(self):
        # Vocab floor is the 7 mandatory specials; enumeration stays 7^T.
        vocab = Vocab(list(SPECIAL_TOKENS))
        v = len(vocab)
        rng = make_rng(3)
        for trial in range(50):
            t_len = int(rng.integers(2, 6))
            crf = CrfModel(
                vocab, d=8, n_layers=1, n_heads=2, l_max=8, d_m=3,
                seed=1000 + trial,
            )
            x = [int(i) for i in rng.integers(0, v, t_len)]
            with T.no_grad():
                s = crf.emissions(np.asarray(x)[None, :]).data[0]
                m = crf.transitions().data

            # Vectorized enumeration of all v^T path scores.
            scores = s[0]
            for t in range(1, t_len):
                scores = scores[..., None] + m + s[t]
            flat = scores.reshape(-1)
            log_z = float(np.log(np.exp(flat - flat.max()).sum()) + flat.max())
            assert abs(np.exp(flat - log_z).sum() - 1.0) < 1e-8

            trunc = float(
                crf_log_likelihood(crf, x, x, exact=False, k=v).data
            )
            exact = float(crf_log_likelihood(crf, x, x, exact=True).data)
            assert abs(trunc - exact) < 1e-8

            best_flat = int(flat.argmax())
            best_path = list(np.unravel_index(best_flat, scores.shape))
            got_path = viterbi_decode(crf, x, k=v)
            assert got_path == [int(p) for p in best_path]
            assert abs(viterbi_best_score(crf, x, k=v) - float(flat.max())) < 1e-8

            y = [int(i) for i in rng.integers(0, v, t_len)]
            losses = crf_losses(crf, x, y, CrfConfig(gamma=0.0))
            assert abs(float(losses["crf"].data) - float(losses["crf_focal"].data)) < 1e-12
            assert abs(float(losses["dp"].data) - float(losses["dp_focal"].data)) < 1e-12
        passed("crf oracle equivalence (50 random models)")


def degeneration_corpus(target_bytes=1_000_000, seed=12):
    nouns = ["cat", "dog", "fox", "bird", "fish", "horse", "mouse", "wolf"]
    verbs = ["saw", "chased", "found", "followed"]
    rng = make_rng(seed)
    sentences, total = [], 0
    while total < target_bytes:
        n_clauses = int(rng.integers(3, 6))
        words = []
        for j in range(n_clauses):
            words += [
                "the", nouns[int(rng.integers(0, 8))],
                verbs[int(rng.integers(0, 4))],
                "the", nouns[int(rng.integers(0, 8))],
            ]
            if j < n_clauses - 1:
                words.append("and")
        words.append(".")
        sentences.append(words)
        total += sum(len(w) + 1 for w in words)
    return sentences


class TestDegenerationDirection:
    def test_contrastive_beats_greedy_on_diversity(self):
        started = time.monotonic()
        corpus = degeneration_corpus()
        assert sum(sum(len(w) + 1 for w in s) for s in corpus) >= 1_000_000
        base = dict(
            epochs=3, batch_size=32, learning_rate=3e-3,
            d=32, n_layers=1, n_heads=2, l_max=96,
        )
        mle_model = lm.train(corpus, lm.TrainConfig(objective="mle", seed=5, **base))
        ctg_model = lm.train(
            corpus, lm.TrainConfig(objective="contrastive", rho=0.5, seed=5, **base)
        )

        nouns = ["cat", "dog", "fox", "bird", "fish", "horse", "mouse", "wolf"]
        verbs = ["saw", "chased", "found", "followed"]
        rng = make_rng(77)
        prefixes = [
            ["the", nouns[int(rng.integers(0, 8))], verbs[int(rng.integers(0, 4))]]
            for _ in range(50)
        ]
        greedy_scores = []
        contrastive_scores = []
        for p in prefixes:
            out, _ = decode(
                mle_model,
                mle_model.vocab.encode(p),
                DecoderConfig(strategy="greedy", max_new_tokens=48),
            )
            greedy_scores.append(distinct_n([out], 2))
        for p in prefixes:
            out, _ = decode(
                ctg_model,
                ctg_model.vocab.encode(p),
                DecoderConfig(
                    strategy="contrastive", k=5, alpha=0.6, max_new_tokens=48
                ),
            )
            contrastive_scores.append(distinct_n([out], 2))
        gap = float(np.mean(contrastive_scores) - np.mean(greedy_scores))
        elapsed = time.monotonic() - started
        assert gap >= 0.2, f"distinct-2 gap {gap:.3f}"
        assert elapsed < 600, f"degeneration run took {elapsed:.0f}s"
        passed(
            f"degeneration direction (distinct-2 gap {gap:.3f}, {elapsed:.0f}s)"
        )


class TestInfillRoundTrip:
    SENTENCE = (
        "although they did not have a lot of money she says that "
        "she was never so happy ."
    ).split()

    def test_thousand_cycles_and_table_row(self):
        spans = mask_spans_keeping(self.SENTENCE, ["money", "happy"])
        ex = make_example(self.SENTENCE, spans=spans)
        assert ex.input == "[blank] money [blank] happy [blank]".split()
        assert ex.output == (
            "although they did not have a lot of [ans] she says that "
            "she was never so [ans] . [ans]"
        ).split()
        assert reassemble(ex.input, ex.output) == self.SENTENCE

        rng = make_rng(2024)
        base = "the quick brown fox jumps over the lazy dog again and again".split()
        failures = 0
        for i in range(1000):
            sentence = base if i % 2 else self.SENTENCE
            example = make_example(sentence, rng=rng, rate=0.35)
            failures += reassemble(example.input, example.output) != sentence
        assert failures == 0
        passed("infill round-trip (1000 cycles + table row verbatim)")


class TestK2sQualityGate:
    def test_accepted_outputs_contain_keywords_in_order(self, infill_lm):
        queries = [
            [["cat"], ["ball"]],
            [["dog"], ["bone"]],
            [["fox"], ["river"]],
            [["bird"], ["tree"]],
        ]
        cfg = DecoderConfig(strategy="greedy", max_new_tokens=32, seed=0)
        total_accepted = 0
        for keywords in queries:
            sentences, report = infill_generate(
                infill_lm, keywords, cfg, n_candidates=3
            )
            assert report["accepted"] == len(sentences)
            for sent in sentences:
                assert contains_in_order(sent, keywords), (keywords, sent)
            total_accepted += len(sentences)
        assert total_accepted > 0
        passed(f"k2s quality gate ({total_accepted} accepted, all in order)")


CONFUSION = {"teh": "the", "swa": "saw", "fuond": "found", "adn": "and"}


def corrector_sentences(n: int, seed: int) -> list[list[str]]:
    nouns = ["cat", "dog", "fox", "bird", "fish", "horse"]
    verbs = ["saw", "found", "chased"]
    rng = make_rng(seed)
    out = []
    for _ in range(n):
        sent = [
            "the", nouns[int(rng.integers(0, 6))],
            verbs[int(rng.integers(0, 3))],
            "the", nouns[int(rng.integers(0, 6))],
        ]
        if rng.random() < 0.5:
            sent += ["and", "the", nouns[int(rng.integers(0, 6))]]
        sent.append(".")
        out.append(sent)
    return out


class TestCorrectorEndToEnd:
    def test_substitution_f1_and_null_detection_f1(self, null_detector):
        started = time.monotonic()
        inverse = {clean: bad for bad, clean in CONFUSION.items()}
        rng = make_rng(31)

        def corrupt(sent):
            return [
                inverse[t] if t in inverse and rng.random() < 0.5 else t
                for t in sent
            ]

        train_clean = corrector_sentences(5000, seed=1)
        test_clean = corrector_sentences(500, seed=2)
        train_pairs = [(corrupt(s), list(s)) for s in train_clean]
        test_noisy = [corrupt(s) for s in test_clean]
        vocab = Vocab.build([x + y for x, y in train_pairs])
        model = train_crf(
            train_pairs, vocab=vocab, epochs=2, batch_size=32,
            learning_rate=3e-3, seed=3, d=24, n_layers=1, n_heads=2,
            l_max=16, d_m=6,
        )
        gold = []
        hyp = []
        for noisy, clean in zip(test_noisy, test_clean):
            corrected, _ = correct_substitutions(model, noisy, k=8)
            gold.append((noisy, clean))
            hyp.append(corrected)
        _, correction = sentence_prf(gold, hyp)
        assert correction.f1 >= 0.8, f"substitution correction F1 {correction.f1:.3f}"

        detector, clean_corpus = null_detector
        probe_rng = make_rng(99)
        gold_del, hyp_del = [], []
        for sent in clean_corpus[100:200]:
            pos = int(probe_rng.integers(1, len(sent) - 1))
            noisy = sent[:pos] + sent[pos + 1 :]
            inserts = [e for e in null_detect(detector, noisy) if e.kind == "insert"]
            best = max(inserts, key=lambda e: (e.score, -e.position)) if inserts else None
            gold_del.append((noisy, sent))
            hyp_del.append(apply_edits(noisy, [best]) if best else list(noisy))
        _, deletion_fix = sentence_prf(gold_del, hyp_del)
        assert deletion_fix.f1 >= 0.8, f"single-deletion F1 {deletion_fix.f1:.3f}"

        gold_ins, hyp_ins = [], []
        for sent in clean_corpus[200:300]:
            pos = int(probe_rng.integers(1, len(sent) - 1))
            noisy = sent[:pos] + [sent[pos]] + sent[pos:]
            deletes = [e for e in null_detect(detector, noisy) if e.kind == "delete"]
            best = max(deletes, key=lambda e: (e.score, -e.position)) if deletes else None
            gold_ins.append((noisy, sent))
            hyp_ins.append(apply_edits(noisy, [best]) if best else list(noisy))
        _, insertion_fix = sentence_prf(gold_ins, hyp_ins)
        assert insertion_fix.f1 >= 0.8, f"single-insertion F1 {insertion_fix.f1:.3f}"

        elapsed = time.monotonic() - started
        assert elapsed < 600, f"corrector runs took {elapsed:.0f}s"
        passed(
            "corrector end-to-end (substitution F1 "
            f"{correction.f1:.2f}, deletion F1 {deletion_fix.f1:.2f}, "
            f"insertion F1 {insertion_fix.f1:.2f}, {elapsed:.0f}s)"
        )


class TestMetricExactness:
    def test_hand_fixtures(self):
        tol = 1e-9
        assert abs(distinct_n([["a", "b"], ["a", "b"]], 1) - 0.5) < tol
        assert abs(distinct_n([list("ababab")], 2) - 0.4) < tol
        assert abs(distinct_n([list("abcd")], 1) - 1.0) < tol

        out = ["k1"] + ["w"] * 4 + ["k2"] + ["w"] * 4
        assert abs(novelty(["k1", "k2"], out) - 0.8) < tol
        assert abs(novelty(["x", "y"], ["x", "y"]) - 0.0) < tol

        gold = [
            (["a", "b"], ["a", "c"]),
            (["d", "e"], ["d", "e"]),
            (["f", "g"], ["f", "h"]),
            (["i"], ["i"]),
        ]
        hyp = [["a", "c"], ["d", "x"], ["f", "g"], ["i"]]
        det, _ = sentence_prf(gold, hyp)
        assert abs(det.precision - 0.5) < tol
        assert abs(det.recall - 0.5) < tol
        assert abs(det.f1 - 0.5) < tol

        docs = [["cat", "sat", "mat"], ["dog", "sat"], ["cat", "cat", "dog"]]
        index = Bm25Index.build(docs, k1=1.2, b=0.75)
        got = bm25_search(index, ["cat"], 3)
        idf = np.log(1 + (3 - 2 + 0.5) / (2 + 0.5))
        avgdl = 8 / 3

        def hand(tf, dl):
            return idf * tf * 2.2 / (tf + 1.2 * (1 - 0.75 + 0.75 * dl / avgdl))

        expected = sorted(
            [(0, hand(1, 3)), (1, 0.0), (2, hand(2, 3))],
            key=lambda p: (-p[1], p[0]),
        )
        for (gi, gs), (ei, es) in zip(got, expected):
            assert gi == ei and abs(gs - es) < tol
        passed("metric exactness (distinct/novelty/prf/bm25 hand fixtures)")


class TestWmdProperties:
    def test_identity_symmetry_bound_and_oracle(self):
        rng = make_rng(8)
        words = list("abcdefgh")
        emb = {w: rng.normal(size=4) for w in words}

        for _ in range(100):
            length = int(rng.integers(1, 6))
            sent = [words[int(i)] for i in rng.integers(0, 8, length)]
            shuffled = list(sent)
            rng.shuffle(shuffled)
            assert wmd(sent, shuffled, emb) == 0.0

        for _ in range(200):
            a = [words[int(i)] for i in rng.integers(0, 8, int(rng.integers(1, 6)))]
            b = [words[int(i)] for i in rng.integers(0, 8, int(rng.integers(1, 6)))]
            forward = wmd(a, b, emb)
            assert forward == wmd(b, a, emb)
            assert forward + 1e-9 >= word_centroid_distance(a, b, emb)

        a, b = ["a", "b", "c"], ["d", "e", "f"]
        cost = np.array([[np.linalg.norm(emb[x] - emb[y]) for y in b] for x in a])
        oracle = min(
            sum(cost[i, p[i]] for i in range(3)) / 3.0
            for p in itertools.permutations(range(3))
        )
        assert abs(wmd(a, b, emb) - oracle) < 1e-9
        passed("wmd properties (identity, symmetry, bound, 3x3 oracle)")


class TestPolishInvariance:
    def test_scaling_preserves_rankings_on_fixture_set(self):
        rng = make_rng(44)
        phrases = [f"p{i}" for i in range(12)]
        emb = {p: rng.normal(size=5) for p in phrases}
        sentences = []
        for i in range(20):
            words = [phrases[int(j)] for j in rng.integers(0, 12, 6)]
            span = (int(rng.integers(0, 6)), 1)
            sentences.append((words, span))
        cfg = PolishConfig(lam=0.5, window=3, top_m=6)
        base_graph = build_graph(emb, topn=6)
        baseline = [
            [c.phrase for c in polish(words, span, base_graph, cfg)]
            for words, span in sentences
        ]
        for scale in (0.1, 10.0):
            scaled_graph = build_graph(
                {p: v * scale for p, v in emb.items()}, topn=6
            )
            ranked = [
                [c.phrase for c in polish(words, span, scaled_graph, cfg)]
                for words, span in sentences
            ]
            assert ranked == baseline, f"scale {scale} changed a ranking"
        passed("polish invariance (20 cases, scales 0.1 and 10)")


class TestPersistence:
    def test_round_trip_and_corruption_rejection(self, tmp_path):
        vocab = Vocab(list(SPECIAL_TOKENS) + LETTERS)
        model = lm.LmModel(vocab, d=16, n_layers=1, n_heads=2, l_max=16, seed=9)
        path = tmp_path / "model.efd"
        store.save(model, path)
        loaded = store.load(path)
        for prefix in (["a"], ["b", "c"], ["e", "d", "a"]):
            ids = vocab.encode(prefix)
            np.testing.assert_allclose(
                model.next_dist(ids), loaded.next_dist(ids), atol=1e-6
            )

        raw = path.read_bytes()
        rng = make_rng(55)
        rejected = 0
        attempts = 0
        for _ in range(10):
            corrupt = bytearray(raw)
            corrupt[int(rng.integers(0, len(raw)))] ^= 0xFF
            target = tmp_path / "bad.efd"
            target.write_bytes(bytes(corrupt))
            attempts += 1
            with pytest.raises(ArchiveError):
                store.load(target)
            rejected += 1
        for cut in (8, len(raw) // 3, len(raw) - 3):
            target = tmp_path / "cut.efd"
            target.write_bytes(raw[:cut])
            attempts += 1
            with pytest.raises(ArchiveError):
                store.load(target)
            rejected += 1
        assert rejected == attempts
        passed(f"persistence (round-trip <= 1e-6; {rejected} corruptions rejected)")


GOLDEN_REQUESTS = [
    {"kind": "complete", "text": "the cat", "n": 3},
    {"kind": "polish", "text": "the cat saw the ball", "span": [1, 1], "n": 2},
    {"kind": "correct", "text": "teh cat swa the ball ."},
    {"kind": "infill", "keywords": ["cat", "ball"], "n": 2},
    {"kind": "expand", "text": "the cat", "n": 1},
    {"kind": "retrieve", "text": "cat ball", "n": 3},
]


class TestServiceContract:
    def test_golden_fixtures_and_concurrency(self, service_bundle):
        app = build_app(service_bundle)
        with TestClient(app) as client:
            for request in GOLDEN_REQUESTS:
                got = client.post("/v1/suggest", json=request)
                assert got.status_code == 200, (request, got.text)
                body = SuggestResponse.model_validate(got.json())
                assert body.model_version == "test-bundle"
                assert len(body.candidates) <= request.get("n", 3)
                scores = [c.score for c in body.candidates]
                assert scores == sorted(scores, reverse=True)

        def run(payload):
            with TestClient(app) as local:
                body = local.post("/v1/suggest", json=payload).json()
            body.pop("latency_ms", None)
            return body

        requests = [GOLDEN_REQUESTS[i % len(GOLDEN_REQUESTS)] for i in range(32)]
        serial = [run(p) for p in requests]
        with ThreadPoolExecutor(max_workers=8) as pool:
            concurrent = list(pool.map(run, requests))
        assert serial == concurrent
        passed("service contract (6 golden kinds; 32 concurrent == serial)")
