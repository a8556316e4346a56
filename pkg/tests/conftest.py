"""
测试公共夹具
"""

import os
import math
import random
import tempfile
from typing import List, Sequence

import pytest

# 日志目录必须在导入 utils.logger 之前设置
os.environ.setdefault('SUBWORD_LM_LOG_DIR', tempfile.mkdtemp(prefix='subword_lm_logs_'))

from config.tokens import EOS  # noqa: E402
from services.model_service import BaseLanguageModel  # noqa: E402

TOY_WORDS = ['the', 'cat', 'sat', 'on', 'mat', 'dog', 'ran', 'hat', 'a', 'rat', 'that', 'cart']


class UniformLM(BaseLanguageModel):
    """支持集上的均匀分布"""

    def __init__(self, tokens: Sequence[str]):
        self._vocabulary = frozenset(tokens) | {EOS}

    @property
    def vocabulary(self):
        return self._vocabulary

    def log_prob(self, context, token):
        return -math.log2(len(self._vocabulary))


class CertainLM(BaseLanguageModel):
    """每个位置概率都为 1"""

    def __init__(self, tokens: Sequence[str]):
        self._vocabulary = frozenset(tokens) | {EOS}

    @property
    def vocabulary(self):
        return self._vocabulary

    def log_prob(self, context, token):
        return 0.0


def toy_sentences(count: int, seed: int = 7, words: Sequence[str] = TOY_WORDS) -> List[List[str]]:
    """由固定词表随机拼成的句子"""
    rng = random.Random(seed)
    return [[rng.choice(words) for _ in range(rng.randint(2, 7))] for _ in range(count)]


@pytest.fixture
def toy_corpus() -> List[List[str]]:
    return toy_sentences(300)


@pytest.fixture
def work_dir(tmp_path):
    path = tmp_path / 'work'
    path.mkdir()
    return str(path)


SYLLABLES = ['ka', 'lo', 'mi', 'ne', 'su', 'ta', 'ri', 'po', 'de', 'gu', 'ba', 'ze']


def syllable_sentences(count: int, seed: int = 13, n_words: int = 300) -> List[List[str]]:
    """由音节拼成的词组成的句子, 词频近似 Zipf 分布"""
    rng = random.Random(seed)
    words = sorted({
        ''.join(rng.choice(SYLLABLES) for _ in range(rng.randint(1, 4)))
        for _ in range(n_words)
    })
    rng.shuffle(words)
    weights = [1.0 / (rank + 1) for rank in range(len(words))]
    return [rng.choices(words, weights, k=rng.randint(2, 8)) for _ in range(count)]
