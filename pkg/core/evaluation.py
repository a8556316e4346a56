"""
困惑度评估模块 (Perplexity Evaluation Module)

1. 经验交叉熵: H = -(1/N) Σ lg q(s), 单位为比特/句
2. 每符号困惑度: 2^(H / 平均每句预测数)
3. 子词模型的词级困惑度, 两条路径同时计算并互相校验:
   A. 直接用 q_W(s) = q_V(F(s)) 对词数归一化
   B. ppl_V ^ (E|F(s)|_V / E|s|_W)
4. 语料诊断: OOV 率, 测试集与训练集的句子重合率

归一化常数 Z 不计算, q_W 视为未归一化的上界。
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Iterable, List, Optional, Sequence

from pydantic import BaseModel, Field

from core.corpus import SentenceLike, Vocabulary, as_sentence, sentence_key
from core.errors import CorpusError, NumericalError
from core.subword import SubwordModel
from services.model_service import BaseLanguageModel
from utils.logger import logger

DUAL_PATH_TOLERANCE = 1e-9

NORMALIZATION_NOTE = "q_W is not renormalized over all tokenizations; Z is not computed"


class TokenCountPolicy(Enum):
    """每句预测数的计数方式"""
    WITH_EOS = "with_eos"  # 词元数 + 1 (句末 </s>)
    WORDS_ONLY = "words_only"


def _policy(policy) -> TokenCountPolicy:
    return policy if isinstance(policy, TokenCountPolicy) else TokenCountPolicy(policy)


def count_predictions(sentences: Iterable[Sequence[str]],
                      policy: TokenCountPolicy = TokenCountPolicy.WITH_EOS,
                      skip: Iterable[str] = ()) -> int:
    """
    按计数方式统计符号数

    Args:
        sentences: 句子
        policy: 是否为每句计入 </s>
        skip: 不计数的标记符号(如 <up>)

    Returns:
        int: 符号总数
    """
    extra = 1 if _policy(policy) is TokenCountPolicy.WITH_EOS else 0
    markers = frozenset(skip)
    if not markers:
        return sum(len(s) + extra for s in sentences)
    return sum(sum(1 for t in s if t not in markers) + extra for s in sentences)


def _materialize(sentences: Iterable[SentenceLike]) -> List[List[str]]:
    data = [as_sentence(s) for s in sentences]
    if not data:
        raise CorpusError("评估语料为空")
    return data


def cross_entropy(lm: BaseLanguageModel, sentences: Iterable[SentenceLike]) -> float:
    """
    经验交叉熵(比特/句)

    Args:
        lm: 语言模型
        sentences: 已映射到 lm 词表的句子

    Returns:
        float: -(1/N) Σ lg q(s)
    """
    data = _materialize(sentences)
    return -math.fsum(lm.sentence_log_probs(data)) / len(data)


def perplexity_per_token(lm: BaseLanguageModel,
                         sentences: Iterable[SentenceLike],
                         token_count_policy: TokenCountPolicy = TokenCountPolicy.WITH_EOS) -> float:
    """
    每符号困惑度 2^(H / 平均每句符号数)

    Args:
        lm: 语言模型
        sentences: 句子
        token_count_policy: 分母的计数方式

    Returns:
        float: 困惑度
    """
    data = _materialize(sentences)
    tokens = count_predictions(data, token_count_policy)
    if tokens == 0:
        raise CorpusError("评估语料没有可计数的符号")
    entropy = -math.fsum(lm.sentence_log_probs(data)) / len(data)
    return 2.0 ** (entropy / (tokens / len(data)))


def convert_perplexity(ppl_subword: float, subword_tokens: float, word_tokens: float) -> float:
    """
    子词困惑度换算为词级困惑度: ppl_V ^ (子词数 / 词数)

    Args:
        ppl_subword: 每子词困惑度
        subword_tokens: 子词总数(或每句平均)
        word_tokens: 词总数(或每句平均), 与 subword_tokens 同一口径

    Returns:
        float: 词级困惑度
    """
    if word_tokens <= 0:
        raise CorpusError("词数必须为正")
    return ppl_subword ** (subword_tokens / word_tokens)


@dataclass(frozen=True)
class WordLevelResult:
    """词级困惑度的两条计算路径"""
    sentence_count: int
    word_tokens: int
    subword_tokens: int
    cross_entropy_bits: float
    ppl_subword: float
    ppl_word_direct: float
    ppl_word_converted: float

    @property
    def ratio(self) -> float:
        return self.subword_tokens / self.word_tokens


def word_level_perplexity(subword_lm: BaseLanguageModel,
                          subword_model: SubwordModel,
                          sentences: Iterable[SentenceLike],
                          token_count_policy: TokenCountPolicy = TokenCountPolicy.WITH_EOS
                          ) -> WordLevelResult:
    """
    子词语言模型的词级困惑度

    Args:
        subword_lm: 子词符号上的语言模型
        subword_model: 子词模型 F
        sentences: 已做 OOV 处理的词级句子, 其中的用户符号不计入词数
        token_count_policy: 分母的计数方式

    Returns:
        WordLevelResult: 两条路径的结果

    Raises:
        NumericalError: 两条路径相对误差超过 1e-9
    """
    data = _materialize(sentences)
    encoded = [subword_model.encode_as_pieces(s) for s in data]
    n = len(data)
    # 大小写标记不是源语句中的词
    word_tokens = count_predictions(data, token_count_policy, skip=subword_model.user_symbols)
    subword_tokens = count_predictions(encoded, token_count_policy)
    if word_tokens == 0 or subword_tokens == 0:
        raise CorpusError("评估语料没有可计数的符号")

    entropy = -math.fsum(subword_lm.sentence_log_probs(encoded)) / n
    direct = 2.0 ** (entropy / (word_tokens / n))
    ppl_subword = 2.0 ** (entropy / (subword_tokens / n))
    converted = convert_perplexity(ppl_subword, subword_tokens / n, word_tokens / n)

    gap = abs(direct - converted) / max(abs(direct), abs(converted))
    if gap > DUAL_PATH_TOLERANCE:
        raise NumericalError(
            f"词级困惑度两条路径不一致: direct={direct!r} converted={converted!r} rel={gap:.3e}"
        )
    logger.info(
        "词级困惑度双路径校验通过",
        module='evaluation',
        details={'direct': direct, 'converted': converted, 'relative_gap': gap}
    )
    return WordLevelResult(
        sentence_count=n,
        word_tokens=word_tokens,
        subword_tokens=subword_tokens,
        cross_entropy_bits=entropy,
        ppl_subword=ppl_subword,
        ppl_word_direct=direct,
        ppl_word_converted=converted,
    )


def oov_rate(sentences: Iterable[SentenceLike], v: Vocabulary) -> float:
    """
    OOV 率: 不在词表中的词元所占比例(<unk> 计为 OOV)

    空词表返回 1.0, 没有词元时返回 0.0。
    """
    if not v.entries:
        return 1.0
    tokens = 0
    oov = 0
    for item in sentences:
        sentence = as_sentence(item)
        tokens += len(sentence)
        oov += sum(1 for t in sentence if t not in v)
    return oov / tokens if tokens else 0.0


def overlap_stats(train: Iterable[SentenceLike], test: Iterable[SentenceLike]) -> float:
    """
    测试句子中也出现在训练集中的比例(去重相等关系)

    Args:
        train: 训练句子
        test: 测试句子

    Returns:
        float: 重合率
    """
    test_keys = [sentence_key(s) for s in test]
    if not test_keys:
        raise CorpusError("测试集为空, 无法计算重合率")
    train_keys = {sentence_key(s) for s in train}
    return sum(1 for k in test_keys if k in train_keys) / len(test_keys)


class EvalReport(BaseModel):
    """评估报告(每个数据集一行)"""
    dataset: str
    sentence_count: int = Field(ge=0)
    word_tokens: int = Field(ge=0)
    subword_tokens: int = Field(ge=0)
    cross_entropy_bits: float = Field(ge=0.0)
    ppl_subword: float = Field(ge=1.0)
    ppl_word: float = Field(ge=1.0)
    token_count_policy: str = TokenCountPolicy.WITH_EOS.value
    oov_rate: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    overlap_fraction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    note: str = NORMALIZATION_NOTE

    TSV_HEADER: ClassVar[str] = (
        "dataset\tsentences\tword_tokens\tsubword_tokens\tratio\txent_bits\tppl_subword\tppl_word"
    )

    @classmethod
    def from_result(cls, dataset: str, result: WordLevelResult, policy: TokenCountPolicy,
                    oov: Optional[float] = None, overlap: Optional[float] = None) -> 'EvalReport':
        return cls(
            dataset=dataset,
            sentence_count=result.sentence_count,
            word_tokens=result.word_tokens,
            subword_tokens=result.subword_tokens,
            cross_entropy_bits=result.cross_entropy_bits,
            ppl_subword=result.ppl_subword,
            ppl_word=result.ppl_word_direct,
            token_count_policy=_policy(policy).value,
            oov_rate=oov,
            overlap_fraction=overlap,
        )

    @property
    def ratio(self) -> float:
        return self.subword_tokens / self.word_tokens if self.word_tokens else 0.0

    def to_tsv_row(self) -> str:
        return (
            f"{self.dataset}\t{self.sentence_count}\t{self.word_tokens}\t{self.subword_tokens}\t"
            f"{self.ratio:.6f}\t{self.cross_entropy_bits:.6f}\t{self.ppl_subword:.6f}\t{self.ppl_word:.6f}"
        )

    def to_text(self) -> str:
        """结构化文本报告"""
        lines = [
            f"dataset: {self.dataset}",
            f"sentences: {self.sentence_count}",
            f"word_tokens: {self.word_tokens}",
            f"subword_tokens: {self.subword_tokens}",
            f"ratio: {self.ratio:.6f}",
            f"xent_bits: {self.cross_entropy_bits:.6f}",
            f"ppl_subword: {self.ppl_subword:.6f}",
            f"ppl_word: {self.ppl_word:.6f}",
            f"token_count_policy: {self.token_count_policy}",
        ]
        if self.oov_rate is not None:
            lines.append(f"oov_rate: {self.oov_rate:.6f}")
        if self.overlap_fraction is not None:
            lines.append(f"overlap_fraction: {self.overlap_fraction:.6f}")
        lines.append(f"note: {self.note}")
        return "\n".join(lines) + "\n"
