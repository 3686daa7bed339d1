"""Corpus file round-trips, embedding tables, and evaluation scoring."""

import numpy as np
import pytest

import datagen
from jointparser.conll import (
    ConllError,
    EmbeddingTable,
    Metrics,
    Sentence,
    Token,
    evaluate,
    load_embeddings,
    read_conll,
    render_conll,
    write_conll,
)

GOLDEN = "tests/fixtures/golden.conll"


def make_sentence(forms, heads, labels, preds=None, sem=None):
    preds = preds or {}
    tokens = [
        Token(i + 1, f, f, "NN", i + 1 in preds, preds.get(i + 1))
        for i, f in enumerate(forms)
    ]
    syn = {(h, i + 1, l) for i, (h, l) in enumerate(zip(heads, labels))}
    return Sentence(tokens, syn, set(sem or ()))


class TestReadGolden:
    def test_token_fields(self):
        sent = read_conll(GOLDEN)[0]
        assert [t.form for t in sent.tokens] == [
            "all", "are", "expected", "to", "reopen", "soon"]
        assert sent.tokens[2].lemma == "expect"
        assert sent.tokens[1].pos == "VBP"

    def test_tree(self):
        sent = read_conll(GOLDEN)[0]
        assert sent.syn_arcs == {
            (2, 1, "sbj"), (0, 2, "root"), (2, 3, "vc"),
            (3, 4, "oprd"), (4, 5, "im"), (5, 6, "tmp")}

    def test_semantics(self):
        sent = read_conll(GOLDEN)[0]
        assert {t.index for t in sent.predicates()} == {3, 5}
        assert sent.tokens[2].sense == "expect.01"
        assert sent.tokens[4].sense == "reopen.01"
        assert sent.sem_arcs == {
            (3, 1, "A1"), (3, 4, "C-A1"), (5, 1, "A1"), (5, 6, "AM-TMP")}


class TestRoundTrip:
    @pytest.mark.parametrize("fmt", ["2009", "2008"])
    def test_golden(self, fmt, tmp_path):
        sents = read_conll(GOLDEN)
        path = tmp_path / "out.conll"
        write_conll(sents, str(path), fmt=fmt)
        back = read_conll(str(path), fmt=fmt)
        assert len(back) == 1
        assert back[0].syn_arcs == sents[0].syn_arcs
        assert back[0].sem_arcs == sents[0].sem_arcs
        assert [t.sense for t in back[0].tokens] == [
            t.sense for t in sents[0].tokens]

    @pytest.mark.parametrize("fmt", ["2009", "2008"])
    def test_random_corpus(self, fmt, tmp_path):
        rng = np.random.default_rng(11)
        sents = [datagen.random_sentence(rng, int(rng.integers(1, 10)),
                                         allow_crossing=True)
                 for _ in range(100)]
        path = tmp_path / "rand.conll"
        write_conll(sents, str(path), fmt=fmt)
        back = read_conll(str(path), fmt=fmt)
        assert len(back) == len(sents)
        for orig, rt in zip(sents, back):
            assert rt.syn_arcs == orig.syn_arcs
            assert rt.sem_arcs == orig.sem_arcs
            assert [(t.form, t.lemma, t.is_predicate, t.sense)
                    for t in rt.tokens] == [
                        (t.form, t.lemma, t.is_predicate, t.sense)
                        for t in orig.tokens]

    def test_render_is_stable(self):
        sents = read_conll(GOLDEN)
        assert render_conll(sents) == render_conll(sents)

    def test_single_token_sentence(self, tmp_path):
        sent = make_sentence(["hi"], [0], ["root"])
        path = tmp_path / "one.conll"
        write_conll([sent], str(path))
        back = read_conll(str(path))
        assert back[0].syn_arcs == {(0, 1, "root")}

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.conll"
        path.write_text("")
        assert read_conll(str(path)) == []

    def test_trailing_blank_lines(self, tmp_path):
        text = render_conll(read_conll(GOLDEN)) + "\n\n\n"
        path = tmp_path / "pad.conll"
        path.write_text(text)
        assert len(read_conll(str(path))) == 1


class TestReadErrors:
    def write(self, tmp_path, text):
        path = tmp_path / "bad.conll"
        path.write_text(text)
        return str(path)

    def row(self, idx, form, head, extra=""):
        cols = [str(idx), form, form, form, "NN", "NN", "_", "_",
                str(head), str(head), "dep", "dep", "_", "_"]
        return "\t".join(cols) + extra

    def test_too_few_columns(self, tmp_path):
        path = self.write(tmp_path, "1\tword\tword\n")
        with pytest.raises(ConllError, match="line 1"):
            read_conll(path)

    def test_bad_token_id(self, tmp_path):
        path = self.write(tmp_path, self.row("x", "word", 0) + "\n")
        with pytest.raises(ConllError, match="line 1.*token id"):
            read_conll(path)

    def test_out_of_sequence_id(self, tmp_path):
        path = self.write(tmp_path,
                          self.row(1, "a", 2) + "\n" + self.row(3, "b", 0) + "\n")
        with pytest.raises(ConllError, match="line 2.*out of sequence"):
            read_conll(path)

    def test_head_out_of_range(self, tmp_path):
        path = self.write(tmp_path, self.row(1, "a", 5) + "\n")
        with pytest.raises(ConllError, match="line 1.*head 5 out of range"):
            read_conll(path)

    def test_bad_head_cell(self, tmp_path):
        path = self.write(tmp_path, self.row(1, "a", "zero") + "\n")
        with pytest.raises(ConllError, match="line 1.*bad head"):
            read_conll(path)

    def test_cycle_rejected(self, tmp_path):
        path = self.write(tmp_path,
                          self.row(1, "a", 2) + "\n" + self.row(2, "b", 1) + "\n")
        with pytest.raises(ConllError, match="block at line 1.*cycle"):
            read_conll(path)

    def test_predicate_without_sense(self, tmp_path):
        cols = ["1", "w", "w", "w", "NN", "NN", "_", "_",
                "0", "0", "root", "root", "Y", "_"]
        path = self.write(tmp_path, "\t".join(cols) + "\n")
        with pytest.raises(ConllError, match="line 1.*predicate without a sense"):
            read_conll(path)

    def test_role_without_predicate_column(self, tmp_path):
        path = self.write(tmp_path, self.row(1, "a", 0, "\tA0") + "\n")
        with pytest.raises(ConllError, match="nonexistent predicate"):
            read_conll(path)

    def test_unknown_format(self, tmp_path):
        path = self.write(tmp_path, "")
        with pytest.raises(ValueError, match="unknown format"):
            read_conll(path, fmt="2010")


class TestValidate:
    def test_multiple_heads(self):
        sent = make_sentence(["a", "b"], [0, 1], ["root", "dep"])
        sent.syn_arcs.add((2, 1, "dep"))
        with pytest.raises(ValueError, match="multiple heads"):
            sent.validate()

    def test_partial_cover(self):
        sent = make_sentence(["a", "b"], [0, 1], ["root", "dep"])
        sent.syn_arcs = {(0, 1, "root")}
        with pytest.raises(ValueError, match="cover every token"):
            sent.validate()

    def test_duplicate_semantic_pair(self):
        sent = make_sentence(["a", "b"], [0, 1], ["root", "dep"],
                             preds={1: "a.01"},
                             sem=[(1, 2, "A0"), (1, 2, "A1")])
        with pytest.raises(ValueError, match="duplicate semantic"):
            sent.validate()

    def test_semantic_arc_from_nonpredicate(self):
        sent = make_sentence(["a", "b"], [0, 1], ["root", "dep"],
                             sem=[(2, 1, "A0")])
        with pytest.raises(ValueError, match="unmarked predicate"):
            sent.validate()

    def test_token_sense_consistency(self):
        with pytest.raises(ValueError, match="predicate without a sense"):
            Token(1, "w", "w", "NN", True, None)
        with pytest.raises(ValueError, match="sense on a non-predicate"):
            Token(1, "w", "w", "NN", False, "w.01")


class TestEmbeddings:
    def test_small_table(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("the 0.1 0.2 0.3\ncat -1.0 0.0 1.0\n")
        table = load_embeddings(str(path))
        assert table.dim == 3
        assert len(table) == 2
        assert "the" in table and "dog" not in table
        np.testing.assert_allclose(table.lookup("cat"), [-1.0, 0.0, 1.0])

    def test_oov_deterministic(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("the 0.1 0.2 0.3\n")
        a = load_embeddings(str(path), seed=5)
        b = load_embeddings(str(path), seed=5)
        np.testing.assert_array_equal(a.lookup("zzz"), b.lookup("qqq"))
        assert np.all(np.abs(a.lookup("zzz")) <= 0.1)

    def test_inconsistent_dim(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("the 0.1 0.2 0.3\ncat 1.0 2.0\n")
        with pytest.raises(ValueError, match="line 2.*expected 3"):
            load_embeddings(str(path))

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("the 0.1 oops\n")
        with pytest.raises(ValueError, match="line 1.*non-numeric"):
            load_embeddings(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("\n")
        with pytest.raises(ValueError, match="empty embeddings"):
            load_embeddings(str(path))

    def test_table_direct(self):
        table = EmbeddingTable({"a": np.ones(4)}, 4)
        assert table.lookup("a").shape == (4,)
        assert table.lookup("b").shape == (4,)


class TestEvaluate:
    def test_identity_is_perfect(self):
        sents = read_conll(GOLDEN)
        m = evaluate(sents, sents)
        assert m.las == 1.0
        assert m.sem_precision == 1.0
        assert m.sem_recall == 1.0
        assert m.sem_f1 == 1.0
        assert m.macro_f1 == 1.0

    def test_one_wrong_role_of_four_items(self):
        # Two sentences, four semantic items total (two senses, two arcs);
        # one arc role is wrong, so precision = recall = 3/4 and F1 = 0.75.
        g1 = make_sentence(["a", "b"], [0, 1], ["root", "dep"],
                           preds={1: "a.01"}, sem=[(1, 2, "A0")])
        g2 = make_sentence(["c", "d"], [2, 0], ["dep", "root"],
                           preds={2: "d.01"}, sem=[(2, 1, "A1")])
        p1 = make_sentence(["a", "b"], [0, 1], ["root", "dep"],
                           preds={1: "a.01"}, sem=[(1, 2, "A9")])
        p2 = make_sentence(["c", "d"], [2, 0], ["dep", "root"],
                           preds={2: "d.01"}, sem=[(2, 1, "A1")])
        m = evaluate([g1, g2], [p1, p2])
        assert m.las == 1.0
        assert m.sem_precision == 0.75
        assert m.sem_recall == 0.75
        assert m.sem_f1 == 0.75
        assert m.macro_f1 == 0.875

    def test_all_heads_wrong(self):
        gold = make_sentence(["a", "b"], [0, 1], ["root", "dep"],
                             preds={1: "a.01"}, sem=[(1, 2, "A0")])
        pred = make_sentence(["a", "b"], [2, 0], ["dep", "root"],
                             preds={1: "a.01"}, sem=[(1, 2, "A0")])
        m = evaluate([gold], [pred])
        assert m.las == 0.0
        assert m.sem_f1 == 1.0
        assert m.macro_f1 == 0.5

    def test_label_counts_for_las(self):
        gold = make_sentence(["a", "b"], [0, 1], ["root", "dep"])
        pred = make_sentence(["a", "b"], [0, 1], ["root", "obj"])
        m = evaluate([gold], [pred])
        assert m.las == 0.5

    def test_no_semantic_items_scores_one(self):
        gold = make_sentence(["a"], [0], ["root"])
        m = evaluate([gold], [gold])
        assert m.sem_f1 == 1.0
        assert m.macro_f1 == 1.0

    def test_sentence_count_mismatch(self):
        gold = make_sentence(["a"], [0], ["root"])
        with pytest.raises(ValueError, match="sentence count mismatch"):
            evaluate([gold], [gold, gold])

    def test_token_count_mismatch(self):
        gold = make_sentence(["a"], [0], ["root"])
        pred = make_sentence(["a", "b"], [0, 1], ["root", "dep"])
        with pytest.raises(ValueError, match="token count mismatch"):
            evaluate([gold], [pred])

    def test_as_dict_order(self):
        m = Metrics(1.0, 0.5, 0.25, 0.333, 0.666)
        assert list(m.as_dict()) == [
            "las", "sem_precision", "sem_recall", "sem_f1", "macro_f1"]
