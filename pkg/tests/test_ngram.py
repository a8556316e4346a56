import math
import random
from collections import Counter, defaultdict

import pytest

from config.tokens import BOS, EOS, UNK
from core.errors import ConfigError, LanguageModelError
from services.model_service import BaseLanguageModel
from services.ngram_service import KneserNeyModel, train_kn


def reference_kn(corpus, order, discount, support):
    """插值 Kneser-Ney 的直接递归求值"""
    width = order - 1
    highest = defaultdict(Counter)
    for sentence in corpus:
        padded = [BOS] * width + list(sentence) + [EOS]
        for i in range(width, len(padded)):
            highest[tuple(padded[i - width:i])][padded[i]] += 1

    # 低阶: 不同左扩展的个数
    tables = {order: highest}
    for k in range(order - 1, 0, -1):
        lower = defaultdict(Counter)
        for context, row in tables[k + 1].items():
            for token in row:
                lower[context[1:]][token] += 1
        tables[k] = lower

    def prob(k, context, token):
        if k == 0:
            return 1.0 / len(support)
        row = tables[k].get(context)
        if not row:
            return prob(k - 1, context[1:], token)
        total = sum(row.values())
        gamma = discount * len(row) / total
        return max(row.get(token, 0) - discount, 0) / total + gamma * prob(k - 1, context[1:], token)

    return prob


def random_corpus(rng, size, vocab):
    return [[rng.choice(vocab) for _ in range(rng.randint(0, 5))] for _ in range(size)]


def test_unigram_distribution_sums_to_one():
    model = train_kn(["a b"], order=1)
    assert model.vocabulary == {"a", "b", EOS, UNK}
    total = sum(2.0 ** model.log_prob([], t) for t in model.vocabulary)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_bigram_hand_computed_values():
    model = train_kn(["a a a"], order=2, discount=0.75)
    assert 2.0 ** model.log_prob(["a"], "a") == pytest.approx(0.708333333333, abs=1e-9)
    assert 2.0 ** model.log_prob(["a"], EOS) == pytest.approx(0.208333333333, abs=1e-9)
    assert model.log_prob(["a"], "a") > model.log_prob(["a"], EOS)


def test_uniform_unigram():
    model = train_kn([["a", "b", UNK]], order=1)
    for token in ("a", "b", UNK, EOS):
        assert model.log_prob([], token) == pytest.approx(-2.0)
    assert model.sequence_log_prob(["a", "b"]) == pytest.approx(-6.0)


def test_normalization_over_random_contexts():
    rng = random.Random(3)
    vocab = [f"w{i}" for i in range(18)]
    corpus = random_corpus(rng, 60, vocab)
    model = train_kn(corpus, order=3)
    support = sorted(model.vocabulary)
    assert len(support) <= 20
    for _ in range(1000):
        context = [rng.choice(vocab + [BOS]) for _ in range(rng.randint(0, 4))]
        total = math.fsum(2.0 ** model.log_prob(context, t) for t in support)
        assert total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_matches_direct_formula(order):
    rng = random.Random(order)
    vocab = ["a", "b", "c", "d", "e", "f"]
    corpus = random_corpus(rng, 5, vocab)
    model = train_kn(corpus, order=order, discount=0.6, vocabulary=vocab)
    prob = reference_kn(corpus, order, 0.6, model.vocabulary)
    contexts = [()] + [(x,) for x in vocab + [BOS]] + [(x, y) for x in vocab + [BOS] for y in vocab]
    for context in contexts:
        key = model._context_key(list(context))
        for token in model.vocabulary:
            expected = prob(order, key, token)
            assert 2.0 ** model.log_prob(list(context), token) == pytest.approx(expected, rel=1e-10)


def test_unseen_context_backs_off():
    corpus = [["a", "b"], ["b", "a"]]
    model = train_kn(corpus, order=2, vocabulary=["c"])
    prob = reference_kn(corpus, 2, 0.75, model.vocabulary)
    # "c" 从未作为上下文出现, 完全回退到一元分布
    for token in model.vocabulary:
        assert 2.0 ** model.log_prob(["c"], token) == pytest.approx(prob(1, (), token), rel=1e-10)


def test_longer_context_is_truncated():
    model = train_kn(["a b c d", "b c a"], order=3)
    assert model.log_prob(["x", "y", "b", "c"], "d") == model.log_prob(["b", "c"], "d")


def test_sequence_log_prob_decomposes():
    rng = random.Random(8)
    corpus = random_corpus(rng, 30, ["a", "b", "c"])
    model = train_kn(corpus, order=3)
    for sentence in corpus[:10] + [[]]:
        assert model.sequence_log_prob(sentence) == pytest.approx(
            BaseLanguageModel.sequence_log_prob(model, sentence), rel=1e-12
        )
    assert model.sequence_log_prob([]) == pytest.approx(model.log_prob([], EOS))


def test_more_data_never_lowers_probability():
    before = train_kn(["a b", "a c"], order=2)
    after = train_kn(["a b", "a c", "a b"], order=2)
    assert after.log_prob(["a"], "b") > before.log_prob(["a"], "b")


def test_unknown_token_rejected():
    model = train_kn(["a b"], order=2)
    with pytest.raises(LanguageModelError):
        model.log_prob(["a"], "zzz")
    with pytest.raises(LanguageModelError):
        model.sequence_log_prob(["zzz"])


@pytest.mark.parametrize("kwargs", [{"order": 0}, {"order": 2, "discount": 1.0}, {"order": 2, "discount": 0.0}])
def test_invalid_parameters(kwargs):
    with pytest.raises(ConfigError):
        train_kn(["a"], **kwargs)


def test_empty_stream_rejected():
    with pytest.raises(LanguageModelError):
        train_kn([], order=2)


def test_bos_in_training_data_rejected():
    with pytest.raises(LanguageModelError):
        train_kn([[BOS, "a"]], order=2)


def test_model_file_round_trip(tmp_path):
    rng = random.Random(4)
    corpus = random_corpus(rng, 40, ["x", "y", "z", "w"])
    model = train_kn(corpus, order=3, vocabulary=["v"])
    path = str(tmp_path / "lm.ngram")
    model.save(path)
    loaded = KneserNeyModel.load(path)
    assert loaded.order == 3
    assert loaded.vocabulary == model.vocabulary
    for sentence in corpus[:10] + [["v", "x"]]:
        assert loaded.sequence_log_prob(sentence) == model.sequence_log_prob(sentence)

    lines = (tmp_path / "lm.ngram").read_text(encoding="utf-8").splitlines()
    rows = [line.split("\t") for line in lines if not line.startswith("# ")]
    assert all(len(r) == 5 for r in rows)
    assert rows == sorted(rows, key=lambda r: (int(r[0]), r[1], r[2]))
