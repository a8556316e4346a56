import random

import pytest

from config.tokens import UNK, UP
from core.corpus import (
    OovPolicy, Vocabulary, apply_case_transform, build_vocab, corpus_stats, count_tokens,
    deduplicate, format_stats_table, invert_case_transform, replace_oov, shuffle_sentences,
    split_train_valid
)
from core.errors import ConfigError, CorpusError, MalformedInputError


def test_count_tokens_accepts_strings_and_lists():
    counts = count_tokens(["a b a", ["b", "c"]])
    assert counts == {"a": 2, "b": 2, "c": 1}


def test_build_vocab_applies_threshold():
    vocab = build_vocab({"a": 3, "b": 2, "c": 5}, min_count=3)
    assert "a" in vocab and "c" in vocab
    assert "b" not in vocab
    # 控制符号在前, 其余按次数降序
    assert vocab.itos == [UNK, "<s>", "</s>", "c", "a"]
    assert vocab.lookup("b") == vocab.stoi[UNK]


def test_build_vocab_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        build_vocab({"a": 1}, min_count=0)


def test_vocabulary_rejects_control_tokens():
    with pytest.raises(ConfigError):
        Vocabulary({UNK: 4})


def test_vocabulary_file_round_trip(tmp_path):
    vocab = build_vocab({"kot": 7, "pies": 3, "ala": 7}, min_count=3)
    path = str(tmp_path / "vocab.tsv")
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.itos == vocab.itos
    assert loaded.entries == vocab.entries


def test_deduplicate_keeps_first_occurrence_order():
    out = list(deduplicate(["b a", "a b", "b  a", "c"]))
    assert out == [["b", "a"], ["a", "b"], ["c"]]


@pytest.mark.parametrize("sentence, expected", [
    (["Ala", "ma", "kota"], [UP, "ala", "ma", "kota"]),
    (["Łódź", "USA", "iPhone"], [UP, "łódź", "USA", "iPhone"]),
    (["A", "7x", "Ćma"], [UP, "a", "7x", UP, "ćma"]),
])
def test_case_transform(sentence, expected):
    assert apply_case_transform(sentence) == expected
    assert invert_case_transform(expected) == sentence


def test_case_transform_round_trip_on_random_unicode():
    rng = random.Random(11)
    alphabet = "aAbBzZąĄęĘłŁżŻśŚ019-"
    for _ in range(500):
        sentence = [
            ''.join(rng.choice(alphabet) for _ in range(rng.randint(1, 6)))
            for _ in range(rng.randint(0, 6))
        ]
        assert invert_case_transform(apply_case_transform(sentence)) == sentence


def test_case_transform_rejects_existing_marker():
    with pytest.raises(MalformedInputError):
        apply_case_transform(["a", UP, "b"])


@pytest.mark.parametrize("sentence", [["a", UP], [UP, UNK]])
def test_invert_case_transform_rejects_malformed(sentence):
    with pytest.raises(MalformedInputError):
        invert_case_transform(sentence)


def test_replace_oov_policies():
    vocab = Vocabulary({"a": 3, "b": 3})
    assert replace_oov(["a", "x", "b"], vocab) == ["a", UNK, "b"]
    assert replace_oov(["a", "x", "b"], vocab, OovPolicy.REMOVE) == ["a", "b"]
    assert replace_oov([UNK, "a"], vocab) == [UNK, "a"]


def test_replace_oov_handles_case_pairs():
    vocab = Vocabulary({"Ala": 3, "ma": 3})
    transformed = apply_case_transform(["Ala", "ma", "Kota"])
    assert replace_oov(transformed, vocab) == [UP, "ala", "ma", UNK]


def test_shuffle_is_seeded():
    sentences = [[str(i)] for i in range(50)]
    first = shuffle_sentences(sentences, seed=3)
    assert first == shuffle_sentences(sentences, seed=3)
    assert first != shuffle_sentences(sentences, seed=4)
    assert sorted(first) == sorted(sentences)


def test_split_train_valid_takes_shortest_prefix():
    sentences = [["a"] * 3, ["b"] * 4, ["c"] * 5, ["d"]]
    train, valid = split_train_valid(sentences, valid_target=6)
    assert valid == [["a"] * 3, ["b"] * 4]
    assert train == [["c"] * 5, ["d"]]


def test_split_train_valid_with_custom_count():
    pairs = [("x", [1, 2]), ("y", [3]), ("z", [4, 5, 6])]
    train, valid = split_train_valid(pairs, valid_target=3, token_count=lambda p: len(p[1]))
    assert [p[0] for p in valid] == ["x", "y"]
    assert [p[0] for p in train] == ["z"]


def test_split_train_valid_fails_on_small_corpus():
    with pytest.raises(CorpusError):
        split_train_valid([["a"]], valid_target=5)


def test_corpus_stats():
    vocab = Vocabulary({"a": 3})
    stats = corpus_stats(["a zzz", "a a"], vocab)
    assert stats.sentence_count == 2
    assert stats.token_count == 4
    assert stats.oov_token_count == 1
    assert stats.oov_rate == pytest.approx(0.25)


def test_corpus_stats_on_empty_corpus():
    stats = corpus_stats([], Vocabulary({"a": 3}))
    assert stats.oov_rate == 0.0


def test_format_stats_table():
    vocab = Vocabulary({"a": 3})
    lines = format_stats_table([("train", corpus_stats(["a b"], vocab))])
    assert lines[0] == "dataset\tsentences\ttokens\toov_rate"
    assert lines[1].split("\t")[:3] == ["train", "1", "2"]


def test_deduplicate_and_replace_oov_are_idempotent():
    rng = random.Random(19)
    pool = ["Ala", "ala", "ma", "Kot", "kota", "x", "Y", UNK]
    raw = [[rng.choice(pool) for _ in range(rng.randint(0, 6))] for _ in range(300)]
    once = list(deduplicate(raw))
    assert len(once) < len(raw)
    assert list(deduplicate(once)) == once

    vocab = Vocabulary({"Ala": 3, "ma": 3, "kota": 3})
    for policy in OovPolicy:
        for sentence in once:
            for prepared in (sentence, apply_case_transform(sentence)):
                replaced = replace_oov(prepared, vocab, policy)
                assert replace_oov(replaced, vocab, policy) == replaced
