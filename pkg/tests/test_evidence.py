import random

import pytest

from conftest import embedded_corpus
from oracles import entity_prf_oracle
from ragtrace import (
    EntityLexicon,
    MockGateway,
    annotate_answer,
    build_evidence_graph,
    compare_entity_sets,
    expand_entity,
    verify_citation,
)
from ragtrace.evidence import AnnotatedAnswer
from ragtrace.gateway import GenerationResult
from ragtrace.retrieval import RetrievalRun, RetrievalStrategy, RetrievedItem


def run_over(corpus, k=None):
    items = tuple(
        RetrievedItem(chunk_id=c.id, similarity=1.0 - 0.01 * i)
        for i, c in enumerate(corpus.chunks[: (k or len(corpus))])
    )
    return RetrievalRun(strategy=RetrievalStrategy(kind="plain", k=len(items)), query_text_used="q", results=items)


class TestLexicon:
    def test_cache_hit_skips_gateway(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        first = expand_entity("spike", "the context", lex, gateway)
        calls_after_first = gateway.call_counts.get("expand_entity", 0)
        second = expand_entity("spike", "the context", lex, gateway)
        assert second == first
        assert gateway.call_counts.get("expand_entity", 0) == calls_after_first == 1

    def test_mock_expansion_rule(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        syn, ant = expand_entity("spike", "ctx", lex, gateway)
        assert syn == {"spike_syn"}
        assert ant == {"spike_ant"}

    def test_empty_entity_rejected(self, gateway, tmp_path):
        with pytest.raises(ValueError):
            expand_entity("", "ctx", EntityLexicon(tmp_path / "lex.json"), gateway)

    def test_distinct_contexts_are_distinct_keys(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        expand_entity("spike", "context one", lex, gateway)
        expand_entity("spike", "context two", lex, gateway)
        assert gateway.call_counts["expand_entity"] == 2

    def test_call_count_equals_distinct_keys(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        rng = random.Random(4)
        keys = [(f"e{rng.randint(0, 3)}", f"ctx{rng.randint(0, 2)}") for _ in range(40)]
        for entity, ctx in keys:
            expand_entity(entity, ctx, lex, gateway)
        assert gateway.call_counts["expand_entity"] == len(set(keys))

    def test_persistence_round_trip(self, gateway, tmp_path):
        path = tmp_path / "lex.json"
        lex = EntityLexicon(path)
        expand_entity("spike", "ctx", lex, gateway)
        reloaded = EntityLexicon(path)
        assert reloaded.get("spike", "ctx") == ({"spike_syn"}, {"spike_ant"})


class TestCompareEntitySets:
    def test_identical_texts(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        text = "we met Alice and Bob in Paris"
        assert compare_entity_sets(text, text, lex, gateway) == (1.0, 1.0, 1.0)

    def test_disjoint_sets(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        p, r, f1 = compare_entity_sets("we met Alice there", "we saw Bob there", lex, gateway)
        assert (p, r, f1) == (0.0, 0.0, 0.0)

    def test_half_overlap(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        p, r, f1 = compare_entity_sets("we met Alpha and Bravo", "we saw Alpha and Casper", lex, gateway)
        assert (p, r, f1) == (0.5, 0.5, 0.5)

    def test_synonym_match(self, tmp_path):
        class SynonymGateway(MockGateway):
            def _expand_entity_impl(self, entity, context):
                self._count("expand_entity")
                if entity == "alpha":
                    return {"aleph"}, set()
                return set(), set()

        g = SynonymGateway()
        lex = EntityLexicon(tmp_path / "lex.json")
        p, r, f1 = compare_entity_sets("we met Alpha today", "we saw Aleph today", lex, g)
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_no_entities_both_sides(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        assert compare_entity_sets("all lowercase here", "also lowercase", lex, gateway) == (1.0, 1.0, 1.0)

    def test_matches_bipartite_oracle_random(self, gateway, tmp_path):
        lex = EntityLexicon(tmp_path / "lex.json")
        rng = random.Random(17)
        pool = ["Kara", "Lund", "Mira", "Nole", "Oren", "Pia", "Quin", "Rem"]
        for _ in range(60):
            truth_names = rng.sample(pool, rng.randint(1, 6))
            answer_names = rng.sample(pool, rng.randint(1, 6))
            truth = "we visited " + " and ".join(truth_names)
            answer = "they saw " + " and ".join(answer_names)
            got = compare_entity_sets(truth, answer, lex, gateway)
            synonyms = {t.lower(): {f"{t.lower()}_syn"} for t in truth_names}
            expected = entity_prf_oracle(
                [t.lower() for t in truth_names], [a.lower() for a in answer_names], synonyms
            )
            assert got == pytest.approx(expected, abs=1e-12)


class TestVerifyCitation:
    def test_id_not_in_run(self, gateway):
        corpus = embedded_corpus(["some text"], gateway)
        assert verify_citation("ghost", "claim", run_over(corpus), corpus, gateway) == (False, 0.0)

    def test_verbatim_claim_supported(self, gateway):
        corpus = embedded_corpus(["the sky is blue today"], gateway)
        valid, support = verify_citation("c0", "sky is blue", run_over(corpus), corpus, gateway)
        assert (valid, support) == (True, 1.0)

    def test_absent_claim_unsupported(self, gateway):
        corpus = embedded_corpus(["the sky is blue today"], gateway)
        valid, support = verify_citation("c0", "grass is red", run_over(corpus), corpus, gateway)
        assert (valid, support) == (False, 0.0)


class TestAnnotateAnswer:
    def answer(self, text):
        return GenerationResult(text=text, mean_confidence=0.9)

    def test_supported_sentence_no_entities(self, gateway):
        corpus = embedded_corpus(["the sky is blue today and calm"], gateway)
        ann = annotate_answer(self.answer("the sky is blue today."), run_over(corpus), corpus, gateway)
        assert len(ann.spans) == 1
        start, end, cls, ids = ann.spans[0]
        assert cls == "evidence_supported"
        assert ann.text[start:end] == "the sky is blue today."
        assert ids == frozenset({"c0"})

    def test_unsupported_sentence(self, gateway):
        corpus = embedded_corpus(["entirely different content"], gateway)
        ann = annotate_answer(self.answer("the moon is cheese."), run_over(corpus), corpus, gateway)
        assert [s[2] for s in ann.spans] == ["uncertain"]

    def test_entity_spans_carved_out(self, gateway):
        corpus = embedded_corpus(["the dog Spike chased Tom around"], gateway)
        ann = annotate_answer(self.answer("the dog Spike chased Tom."), run_over(corpus), corpus, gateway)
        rendered = [(ann.text[s:e], cls) for s, e, cls, _ in ann.spans]
        assert ("Spike", "named_entity") in rendered
        assert ("Tom", "named_entity") in rendered
        assert all(cls == "evidence_supported" for txt, cls in rendered if txt not in ("Spike", "Tom"))

    def test_spans_tile_sentences_no_overlap(self, gateway):
        corpus = embedded_corpus(["anything"], gateway)
        text = "First Alpha here. then nothing's there! Last Omega?"
        ann = annotate_answer(self.answer(text), run_over(corpus), corpus, gateway)
        spans = sorted(ann.spans)
        for (s1, e1, _, _), (s2, e2, _, _) in zip(spans, spans[1:]):
            assert e1 <= s2
        from ragtrace.textutils import sentence_spans

        covered = sum(e - s for s, e, _, _ in spans)
        expected = sum(e - s for s, e in sentence_spans(text))
        assert covered == expected

    def test_random_texts_tile_property(self, gateway):
        corpus = embedded_corpus(["support me"], gateway)
        rng = random.Random(9)
        words = ["alpha", "Beta", "gamma", "Delta Epsilon", "zeta", "may"]
        for _ in range(25):
            text = ""
            for _ in range(rng.randint(1, 4)):
                text += " ".join(rng.sample(words, rng.randint(1, 4))) + rng.choice([". ", "! ", "? "])
            ann = annotate_answer(self.answer(text), run_over(corpus), corpus, gateway)
            spans = sorted(ann.spans)
            for (s1, e1, _, _), (s2, e2, _, _) in zip(spans, spans[1:]):
                assert e1 <= s2
            for s, e, _, _ in spans:
                assert 0 <= s < e <= len(text)


class TestEvidenceGraph:
    def annotated(self, text, entity_names, gateway, corpus):
        return annotate_answer(GenerationResult(text=text, mean_confidence=0.5), run_over(corpus), corpus, gateway)

    def test_entity_in_two_chunks(self, gateway):
        corpus = embedded_corpus(["spike barked loudly", "spike slept all day", "nothing here"], gateway)
        ann = self.annotated("we watched Spike play.", ["spike"], gateway, corpus)
        graph = build_evidence_graph(ann, run_over(corpus), corpus)
        spike_edges = [e for e in graph.edges if e[0] == "spike"]
        assert len(spike_edges) == 2
        assert all(score == 1.0 for _, _, score in spike_edges)

    def test_absent_entity_isolated(self, gateway):
        corpus = embedded_corpus(["nothing relevant at all"], gateway)
        ann = self.annotated("we met Zorro yesterday.", ["zorro"], gateway, corpus)
        graph = build_evidence_graph(ann, run_over(corpus), corpus)
        assert "zorro" in graph.nodes
        assert not [e for e in graph.edges if e[0] == "zorro"]

    def test_synonym_containment_scores_lower(self, gateway, tmp_path):
        class Expander(MockGateway):
            def _expand_entity_impl(self, entity, context):
                self._count("expand_entity")
                return {"masked rider"}, set()

        g = Expander()
        lex = EntityLexicon(tmp_path / "lex.json")
        expand_entity("zorro", "ctx", lex, g)  # caches "masked rider"
        corpus = embedded_corpus(["the masked rider appears at dusk"], g)
        ann = self.annotated("we met Zorro yesterday.", ["zorro"], g, corpus)
        graph = build_evidence_graph(ann, run_over(corpus), corpus, lexicon=lex)
        assert [e for e in graph.edges if e[0] == "zorro"] == [("zorro", "c0", 0.7)]


class TestAnnotatedAnswerInvariants:
    def test_overlapping_spans_rejected(self):
        with pytest.raises(ValueError):
            AnnotatedAnswer(text="0123456789", spans=((0, 5, "uncertain", frozenset()), (3, 8, "uncertain", frozenset())))

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            AnnotatedAnswer(text="short", spans=((0, 99, "uncertain", frozenset()),))

    def test_unknown_class_rejected(self):
        with pytest.raises(ValueError):
            AnnotatedAnswer(text="text", spans=((0, 2, "sparkly", frozenset()),))
