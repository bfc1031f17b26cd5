"""Polishing and expansion: graph ranking, context fit, skeletons, masks."""

import json

import numpy as np
import pytest

from draftkit.decode import DecoderConfig
from draftkit.errors import (
    AnnotationError,
    DegenerateInputError,
    EmbeddingLookupError,
    InvalidArgumentError,
)
from draftkit.polish import (
    AnnotatedSentence,
    PolishConfig,
    build_graph,
    expansion_probe,
    load_annotations,
    local_expand,
    polish,
    s2_score,
    select_spaces,
    skeleton_pairs,
)


@pytest.fixture()
def embeddings():
    return {
        "big": np.array([1.0, 0.1, 0.0]),
        "large": np.array([0.95, 0.2, 0.0]),
        "huge": np.array([0.9, 0.3, 0.05]),
        "tiny": np.array([-1.0, 0.2, 0.0]),
        "dog": np.array([0.0, 1.0, 0.3]),
        "house": np.array([0.1, 0.9, 0.5]),
        "a": np.array([0.3, 0.3, 0.9]),
    }


class TestBuildGraph:
    def test_identical_vectors_mutual_unit_similarity(self):
        emb = {"p": np.array([1.0, 2.0]), "q": np.array([2.0, 4.0]), "r": np.array([1.0, 0.0])}
        g = build_graph(emb, topn=2)
        assert g.neighbors("p")[0][0] == "q"
        assert g.neighbors("p")[0][1] == pytest.approx(1.0, abs=1e-12)
        assert g.neighbors("q")[0][0] == "p"
        assert g.neighbors("q")[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_ties_lexicographic(self):
        emb = {
            "b": np.array([1.0, 0.0, 0.0]),
            "c": np.array([0.0, 1.0, 0.0]),
            "a": np.array([0.0, 0.0, 1.0]),
        }
        g = build_graph(emb, topn=2)
        assert [n for n, _ in g.neighbors("b")] == ["a", "c"]

    def test_matches_brute_force_ranking(self, embeddings):
        g = build_graph(embeddings, topn=len(embeddings) - 1)
        for phrase, vec in embeddings.items():
            pairs = []
            for other, ov in embeddings.items():
                if other == phrase:
                    continue
                sim = float(
                    np.clip(
                        vec @ ov / (np.linalg.norm(vec) * np.linalg.norm(ov)),
                        -1.0,
                        1.0,
                    )
                )
                pairs.append((other, sim))
            pairs.sort(key=lambda e: (-e[1], e[0]))
            got = g.neighbors(phrase)
            assert [n for n, _ in got] == [n for n, _ in pairs]
            for (_, gs), (_, es) in zip(got, pairs):
                assert gs == pytest.approx(es, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateInputError):
            build_graph({"p": np.zeros(2), "q": np.ones(2)})

    def test_needs_two_phrases(self):
        with pytest.raises(InvalidArgumentError):
            build_graph({"p": np.ones(2)})

    def test_round_trip(self, embeddings, tmp_path):
        g = build_graph(embeddings, topn=3)
        g.save(tmp_path / "g.json")
        g2 = type(g).load(tmp_path / "g.json")
        assert g2.edges == g.edges
        assert set(g2.in_emb) == set(g.in_emb)


class TestS2Score:
    def test_single_identical_context(self):
        emb = {"c1": np.array([1.0, 0.0]), "t": np.array([2.0, 0.0])}
        assert s2_score("t", ["c1"], emb, emb) == 1.0

    def test_mean_of_two(self):
        emb = {
            "c1": np.array([1.0, 0.0]),
            "c2": np.array([0.0, 1.0]),
            "t": np.array([1.0, 0.0]),
        }
        assert abs(s2_score("t", ["c1", "c2"], emb, emb) - 0.5) < 1e-12

    def test_three_word_hand_case(self):
        emb = {
            "u": np.array([1.0, 1.0]),
            "v": np.array([1.0, 0.0]),
            "w": np.array([0.0, 1.0]),
            "t": np.array([3.0, 4.0]),
        }
        t = emb["t"] / np.linalg.norm(emb["t"])
        expect = np.mean(
            [emb[c] @ t / np.linalg.norm(emb[c]) for c in ("u", "v", "w")]
        )
        got = s2_score("t", ["u", "v", "w"], emb, emb)
        assert abs(got - expect) < 1e-12

    def test_missing_embedding_names_phrase(self):
        emb = {"t": np.array([1.0, 0.0])}
        with pytest.raises(EmbeddingLookupError) as err:
            s2_score("t", ["ghost"], emb, emb)
        assert "ghost" in str(err.value)


class TestPolish:
    def test_lambda_one_equals_graph_order(self, embeddings):
        g = build_graph(embeddings, topn=4)
        cands = polish(
            ["a", "big", "dog"], (1, 1), g, PolishConfig(lam=1.0, top_m=4)
        )
        assert [c.phrase for c in cands] == [n for n, _ in g.neighbors("big")][:4]

    def test_lambda_zero_prefers_context_fit(self):
        # Candidate set limited to the two closest neighbors of "big";
        # "fits" aligns with the context word and must outrank "near".
        emb = {
            "big": np.array([1.0, 0.0, 0.0]),
            "near": np.array([0.9, 0.1, 0.0]),
            "fits": np.array([0.6, 0.0, 0.8]),
            "ctx": np.array([0.0, 0.0, 1.0]),
        }
        g = build_graph(emb, topn=2)
        cands = polish(["ctx", "big"], (1, 1), g, PolishConfig(lam=0.0, top_m=2))
        assert cands[0].phrase == "fits"

    def test_scale_invariance(self, embeddings):
        base = build_graph(embeddings, topn=4)
        for c in (0.1, 10.0):
            scaled = build_graph({k: v * c for k, v in embeddings.items()}, topn=4)
            for sentence, span in (
                (["a", "big", "dog"], (1, 1)),
                (["big", "house", "dog"], (1, 1)),
            ):
                a = [x.phrase for x in polish(sentence, span, base)]
                b = [x.phrase for x in polish(sentence, span, scaled)]
                assert a == b

    def test_unknown_span_phrase_empty(self, embeddings):
        g = build_graph(embeddings, topn=3)
        assert polish(["totally", "unknown"], (0, 1), g) == []

    def test_span_bounds_checked(self, embeddings):
        g = build_graph(embeddings, topn=3)
        with pytest.raises(InvalidArgumentError):
            polish(["big"], (1, 1), g)

    def test_score_recomputable(self, embeddings):
        g = build_graph(embeddings, topn=4)
        cfg = PolishConfig(lam=0.3, top_m=4)
        for c in polish(["a", "big", "dog"], (1, 1), g, cfg):
            assert abs(c.score - (0.3 * c.s1 + 0.7 * c.s2)) < 1e-12


SENT = "red is a powerful color that attracts more attention than probably any other color".split()


class TestSkeletonPairs:
    def test_drop_all_promotes_skeleton(self):
        ann = AnnotatedSentence(tokens=SENT, modifiers=[(3, 1), (5, 9)])
        pairs = skeleton_pairs([ann], seed=1, drop_rate=1.0)
        assert pairs == [("red is a color".split(), SENT)]

    def test_drop_rate_zero_identity(self):
        ann = AnnotatedSentence(tokens=SENT, modifiers=[(3, 1)])
        (skeleton, sentence), = skeleton_pairs([ann], seed=1, drop_rate=0.0)
        assert skeleton == sentence == SENT

    def test_seed_reproducible(self):
        ann = AnnotatedSentence(tokens=SENT, modifiers=[(3, 1), (5, 9)])
        a = skeleton_pairs([ann], seed=42, drop_rate=0.5)
        b = skeleton_pairs([ann], seed=42, drop_rate=0.5)
        assert a == b

    def test_skeleton_is_subsequence(self):
        ann = AnnotatedSentence(tokens=SENT, modifiers=[(3, 1), (5, 9)])
        for seed in range(10):
            (skeleton, sentence), = skeleton_pairs([ann], seed=seed, drop_rate=0.5)
            it = iter(sentence)
            assert all(tok in it for tok in skeleton)

    def test_annotation_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text(
            '{"tokens": ["a", "b"], "modifiers": [[0, 1]]}\n'
            '{"tokens": ["a"], "modifiers": [[0, 5]]}\n',
            encoding="utf-8",
        )
        with pytest.raises(AnnotationError) as err:
            load_annotations(path)
        assert "line 2" in str(err.value)

    def test_load_annotations(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        rows = [
            {"tokens": ["a", "b", "c"], "modifiers": [[1, 1]], "pos": ["X", "Y", "Z"]},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        anns = load_annotations(path)
        assert anns[0].tokens == ["a", "b", "c"]
        assert anns[0].modifiers == [(1, 1)]


class TestLocalExpand:
    POS = ["PRON", "VERB", "NOUN", "ADP", "DET", "NOUN"]
    TOKENS = "she saw flowers on the grass".split()

    def test_probe_string(self):
        probe = expansion_probe(self.TOKENS, self.POS)
        assert probe == "she saw [MASK] flowers on the grass [MASK]".split()

    def test_no_sites_identity(self, infill_lm):
        tokens = ["jump", "quickly"]
        out, spans = local_expand(tokens, ["VERB", "ADV"], infill_lm)
        assert out == tokens
        assert spans == []

    def test_insertion_only_contract(self, infill_lm):
        tokens = "the cat saw the ball .".split()
        pos = ["DET", "NOUN", "VERB", "DET", "NOUN", "PUNCT"]
        cfg = DecoderConfig(strategy="greedy", max_new_tokens=16, seed=1)
        out, spans = local_expand(tokens, pos, infill_lm, cfg)
        it = iter(out)
        assert all(tok in it for tok in tokens)

    def test_site_selection_caps_at_two(self):
        toks = "dog cat bird fish".split()
        pos = ["NOUN"] * 4
        assert len(select_spaces(toks, pos)) <= 2

    def test_pos_alignment_enforced(self):
        with pytest.raises(InvalidArgumentError):
            select_spaces(["a"], ["NOUN", "VERB"])
