import math
import random
from typing import List, Tuple

import numpy as np
import pytest

from config.tokens import UNK, UP, WORD_BOUNDARY
from core.corpus import build_vocab, count_tokens, replace_oov
from core.errors import ConfigError, SubwordError
from core.subword import (
    SegmentationLattice, SubwordModel, UnigramTrainer, collect_units, decode, e_step,
    encode_best, m_step, prune, seed_vocabulary, tokens_per_word_ratio, train_unigram
)

from conftest import syllable_sentences, toy_sentences


def enumerate_segmentations(text: str, pieces) -> List[Tuple[List[str], float]]:
    """穷举所有切分及其 log2 概率(从左到右累加)"""
    out = []

    def walk(pos: int, acc: List[str], score: float):
        if pos == len(text):
            out.append((list(acc), score))
            return
        for end in range(pos + 1, len(text) + 1):
            piece = text[pos:end]
            if piece in pieces:
                acc.append(piece)
                walk(end, acc, score + pieces[piece])
                acc.pop()

    walk(0, [], 0.0)
    return out


def random_inventory(rng: random.Random, alphabet: str, size: int):
    pieces = {ch: -rng.uniform(0.5, 6.0) for ch in alphabet}
    while len(pieces) < size:
        length = rng.randint(2, 4)
        pieces[''.join(rng.choice(alphabet) for _ in range(length))] = -rng.uniform(0.5, 6.0)
    return pieces


def test_forward_sum_matches_enumeration():
    rng = random.Random(5)
    cases = 0
    for _ in range(400):
        pieces = random_inventory(rng, "abc", rng.randint(3, 12))
        text = ''.join(rng.choice("abc") for _ in range(rng.randint(1, 10)))
        lattice = SegmentationLattice(text, pieces, max(len(p) for p in pieces))
        total = sum(2.0 ** score for _, score in enumerate_segmentations(text, pieces))
        assert 2.0 ** lattice.log_likelihood() == pytest.approx(total, rel=1e-9)
        # 前向与后向给出同一个边际似然
        assert lattice.backward()[0] == pytest.approx(lattice.forward()[-1], rel=1e-12, abs=1e-12)
        cases += 1
    assert cases == 400


def test_viterbi_matches_enumeration():
    rng = random.Random(17)
    for _ in range(1000):
        pieces = random_inventory(rng, "ab", rng.randint(2, 10))
        text = ''.join(rng.choice("ab") for _ in range(rng.randint(1, 12)))
        best, score = SegmentationLattice(text, pieces, max(len(p) for p in pieces)).viterbi()
        expected = max(
            enumerate_segmentations(text, pieces),
            key=lambda item: (item[1], -len(item[0]), tuple(len(p) for p in item[0]))
        )
        assert best == expected[0]
        assert score == expected[1]


def test_viterbi_tie_breaks():
    pieces = {"a": -1.0, "b": -1.0, "c": -1.0, "ab": -2.0, "bc": -2.0}
    # 概率相同时取子词更少者
    assert SegmentationLattice("ab", pieces, 2).viterbi()[0] == ["ab"]
    # 子词数也相同时取左侧最长者
    assert SegmentationLattice("abc", pieces, 2).viterbi()[0] == ["ab", "c"]


def test_unreachable_lattice():
    lattice = SegmentationLattice("ax", {"a": -1.0}, 1)
    assert lattice.viterbi() == ([], -math.inf)
    with pytest.raises(SubwordError):
        lattice.log_likelihood()


def test_expected_counts_sum_to_expected_length():
    pieces = {"a": -1.0, "b": -2.0, "ab": -1.5, "ba": -3.0}
    counts, _ = SegmentationLattice("abab", pieces, 2).expected_counts()
    # 每个字符恰好被一个子词覆盖
    covered = sum(len(p) * c for p, c in counts.items())
    assert covered == pytest.approx(4.0, rel=1e-12)


def test_seed_vocabulary_candidates():
    seed = seed_vocabulary([["abab"]], max_piece_len=2, seed_size=10, min_frequency=1)
    assert {"a", "b", "ab", "ba"} <= set(seed)
    assert all(WORD_BOUNDARY not in p[1:] for p in seed)
    assert math.fsum(2.0 ** lp for lp in seed.values()) == pytest.approx(1.0, abs=1e-12)


def test_seed_vocabulary_respects_frequency():
    seed = seed_vocabulary([["abab"]], max_piece_len=2, seed_size=10, min_frequency=2)
    assert "ab" in seed
    assert "ba" not in seed


def test_em_likelihood_is_monotone(toy_corpus):
    units = collect_units(toy_corpus)
    model = SubwordModel(seed_vocabulary(units, 6, 200))
    previous = -math.inf
    for _ in range(10):
        counts, log_likelihood = e_step(model, units)
        assert log_likelihood >= previous - 1e-9 * abs(log_likelihood)
        previous = log_likelihood
        model = m_step(counts)
        assert model.normalization_error() < 1e-9


def test_prune_never_removes_characters(toy_corpus):
    units = collect_units(toy_corpus)
    model = SubwordModel(seed_vocabulary(units, 6, 200))
    counts, _ = e_step(model, units)
    target = len(model.characters()) + model.reserved_count
    pruned = prune(model, target, 0.5, counts)
    assert pruned.size < model.size
    assert set(model.characters()) <= set(pruned.pieces)
    assert pruned.normalization_error() < 1e-9
    with pytest.raises(ConfigError):
        prune(model, target - 1, 0.5, counts)


def test_trainer_reaches_exact_size(toy_corpus):
    trainer = UnigramTrainer(40, max_piece_len=6)
    model = trainer.train(toy_corpus)
    assert model.size == 40
    assert model.normalization_error() < 1e-9
    assert trainer.history
    assert set(''.join(WORD_BOUNDARY + w for s in toy_corpus for w in s)) <= set(model.characters())


def test_trainer_rejects_infeasible_size(toy_corpus):
    with pytest.raises(ConfigError):
        UnigramTrainer(6).train(toy_corpus)


def test_encoding_is_reversible(toy_corpus):
    model = train_unigram(toy_corpus, 40, max_piece_len=6)
    for sentence in toy_sentences(200, seed=99) + [[], [UNK, "cat"]]:
        encoding = encode_best(model, sentence)
        assert encoding.source_word_count == len(sentence)
        assert decode(model, encoding.subword_tokens) == sentence


def test_user_symbols_encode_to_single_id(toy_corpus):
    model = train_unigram(toy_corpus, 41, user_symbols=(UP,))
    ids = model.encode_best([UP, "cat", UNK]).subword_tokens
    assert ids[0] == model.piece_to_id[UP]
    assert ids[-1] == model.piece_to_id[UNK]
    assert model.decode(ids) == [UP, "cat", UNK]


def test_character_only_model_ratio(toy_corpus):
    units = collect_units(toy_corpus)
    n_chars = len({ch for unit in units for ch in unit})
    model = train_unigram(toy_corpus, n_chars + 4)
    assert all(len(p) == 1 for p in model.pieces)
    words = [w for s in toy_corpus for w in s]
    expected = sum(len(w) + 1 for w in words) / len(words)
    assert tokens_per_word_ratio(model, toy_corpus) == pytest.approx(expected)


def test_larger_vocabulary_gives_shorter_encodings():
    corpus = syllable_sentences(1000)
    ratios = [tokens_per_word_ratio(train_unigram(corpus, size), corpus) for size in (30, 60, 100, 150)]
    assert ratios[0] > 1.0
    assert all(a > b for a, b in zip(ratios, ratios[1:])), ratios


def test_encode_rejects_unknown_character(toy_corpus):
    model = train_unigram(toy_corpus, 30)
    with pytest.raises(SubwordError):
        model.encode_best(["cat", "qq"])
    with pytest.raises(SubwordError):
        model.encode_best(["ca" + WORD_BOUNDARY + "t"])


def test_decode_from_mid_word():
    model = SubwordModel({"▁c": -1.0, "at": -1.0, "a": -2.0, "t": -2.0, "▁": -3.0, "c": -3.0})
    sentence, mid_word = model.decode_with_status([model.piece_to_id["at"], model.piece_to_id["▁c"]])
    assert mid_word
    assert sentence == ["at", "c"]
    with pytest.raises(SubwordError):
        model.decode([model.size])


def test_model_file_round_trip(tmp_path, toy_corpus):
    model = train_unigram(toy_corpus, 41, user_symbols=(UP,))
    path = str(tmp_path / "tokenizer.model")
    model.save(path)
    loaded = SubwordModel.load(path)
    assert loaded.id_to_piece == model.id_to_piece
    assert loaded.user_symbols == (UP,)
    for sentence in toy_corpus[:50]:
        assert loaded.encode_best(sentence) == model.encode_best(sentence)
    np.testing.assert_allclose(
        [loaded.pieces[p] for p in model.pieces], list(model.pieces.values()), rtol=0, atol=0
    )


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.model"
    path.write_text("not a model\n", encoding="utf-8")
    with pytest.raises(SubwordError):
        SubwordModel.load(str(path))


def test_m_step_with_subnormal_count():
    model = m_step({"a": 1000.0, "b": 5e-324, "c": 0.0})
    assert all(math.isfinite(lp) for lp in model.pieces.values())
    assert model.pieces["b"] == model.pieces["c"]
    assert model.normalization_error() < 1e-9


def test_trainer_on_syllable_corpus():
    corpus = syllable_sentences(2000)
    trainer = UnigramTrainer(150, em_iterations=3)
    model = trainer.train(corpus)
    assert model.size == 150
    assert all(math.isfinite(lp) for lp in model.pieces.values())
    assert model.normalization_error() < 1e-9
    for sentence in corpus[:100]:
        assert model.decode(model.encode_best(sentence).subword_tokens) == sentence


def test_trainer_history_likelihood_is_monotone(toy_corpus):
    trainer = UnigramTrainer(30, max_piece_len=6, em_iterations=4)
    trainer.train(toy_corpus)
    assert len(trainer.history) > 1
    sizes = [record.size for record in trainer.history]
    assert sizes == sorted(sizes, reverse=True)
    for record in trainer.history:
        assert len(record.log_likelihoods) == 4
        # 同一轮内 EM 不降低似然; 剪枝发生在两轮之间
        for before, after in zip(record.log_likelihoods, record.log_likelihoods[1:]):
            assert after >= before - 1e-9 * abs(before)


def test_decode_demo_sentence():
    chars = {ch: -8.0 for ch in "▁Bezbarwnzilo"}
    pieces = {**chars, "▁Bez": -3.0, "bar": -3.0, "wn": -3.0, "e": -2.0, "▁zielone": -3.0}
    total = math.log2(math.fsum(2.0 ** lp for lp in pieces.values()))
    model = SubwordModel({p: lp - total for p, lp in pieces.items()})
    assert model.decode_pieces(["▁Bez", "bar", "wn", "e", "▁zielone"]) == ["Bezbarwne", "zielone"]
    assert model.encode_as_pieces("Bezbarwne zielone") == ["▁Bez", "bar", "wn", "e", "▁zielone"]


def test_word_cache_is_bounded(toy_corpus):
    model = train_unigram(toy_corpus, 30)
    bounded = SubwordModel(model.pieces, cache_size=3)
    words = ["cat", "mat", "rat", "hat", "that", "cat"]
    for word in words:
        assert bounded.encode_word(word) == model.encode_word(word)
    assert len(bounded._word_cache) == 3
    # 最近使用的词排在最后
    assert list(bounded._word_cache) == ["hat", "that", "cat"]
    uncached = SubwordModel(model.pieces, cache_size=0)
    assert uncached.encode_word("cat") == model.encode_word("cat")
    assert not uncached._word_cache


def test_round_trip_after_oov_replacement():
    rng = random.Random(41)
    raw = toy_sentences(10000, seed=41)
    for i, sentence in enumerate(raw):
        if rng.random() < 0.2:
            sentence.insert(rng.randrange(len(sentence) + 1), f"rare{i}")
    vocab = build_vocab(count_tokens(raw), min_count=3)
    clean = [replace_oov(s, vocab) for s in raw]
    assert sum(s.count(UNK) for s in clean) > 1000
    model = train_unigram(clean[:2000], 35, max_piece_len=6)
    for sentence in clean:
        assert model.decode(model.encode_best(sentence).subword_tokens) == sentence
