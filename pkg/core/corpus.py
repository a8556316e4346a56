"""
语料预处理模块 (Corpus Preprocessing Module)

本模块实现训练数据的预处理流水线:
1. 词元计数: 统计每个词元出现次数
2. 词表抽取: 保留出现次数不少于 min_count 的词元
3. 去重: 精确去除重复句子, 保持首次出现顺序
4. 大小写变换: 可逆的 <up> 标记变换
5. 未登录词处理: 替换为 <unk> 或删除
6. 训练/验证集切分: 按子词数量切出验证集
7. 语料统计: 句子数、词元数、OOV 率

句子(Sentence)统一表示为词元列表, 词元为不含空白的非空 UTF-8 字符串。
"""

from collections import Counter
from enum import Enum
from typing import Callable, Dict, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from config.tokens import UNK, UP, WORD_CONTROL_TOKENS, is_control_token
from core.errors import ConfigError, CorpusError, MalformedInputError
from utils.fileio import read_lines, write_lines

Sentence = List[str]
SentenceLike = Union[Sentence, str]


class OovPolicy(Enum):
    """未登录词处理策略"""
    REPLACE = "replace"
    REMOVE = "remove"


def as_sentence(item: SentenceLike) -> Sentence:
    """把字符串或词元序列统一成词元列表"""
    if isinstance(item, str):
        return item.split()
    return list(item)


def sentence_key(item: SentenceLike) -> str:
    """去重使用的相等关系: 空白规范化后的词元序列"""
    return ' '.join(as_sentence(item))


# ---------------------------------------------------------------------------
# 计数与词表
# ---------------------------------------------------------------------------

def count_tokens(corpus: Iterable[SentenceLike]) -> Counter:
    """
    统计词元出现次数

    Args:
        corpus: 句子流

    Returns:
        Counter: 词元 -> 次数
    """
    counts: Counter = Counter()
    for item in corpus:
        counts.update(as_sentence(item))
    return counts


class Vocabulary:
    """
    词级词表

    属性:
        entries: 词元 -> 次数(均不小于 min_count)
        control: 控制符号 <unk> <s> </s>, 编号在最前
        min_count: 频次阈值
    """

    def __init__(self, entries: Dict[str, int], min_count: int = 1):
        """初始化词表"""
        for token, count in entries.items():
            if is_control_token(token):
                raise ConfigError(f"控制符号不能作为词表条目: {token}")
            if count < min_count:
                raise ConfigError(f"词元 {token} 的次数 {count} 小于阈值 {min_count}")
        self.entries: Dict[str, int] = dict(entries)
        self.min_count = min_count
        self.control: Tuple[str, ...] = WORD_CONTROL_TOKENS
        self.itos: List[str] = list(self.control) + sorted(
            self.entries, key=lambda t: (-self.entries[t], t)
        )
        self.stoi: Dict[str, int] = {t: i for i, t in enumerate(self.itos)}

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.itos)

    def lookup(self, token: str) -> int:
        """词元 -> 编号, 未登录词落到 <unk>"""
        return self.stoi.get(token, self.stoi[UNK])

    def save(self, path: str):
        """
        写出词表文件: 每行 token<TAB>count, 控制符号在前且次数为 -1,
        其余按次数降序、字典序升序
        """
        lines = [f"{t}\t-1" for t in self.control]
        lines += [f"{t}\t{self.entries[t]}" for t in self.itos[len(self.control):]]
        write_lines(path, lines)

    @classmethod
    def load(cls, path: str) -> 'Vocabulary':
        """读取词表文件"""
        entries: Dict[str, int] = {}
        for line_no, line in enumerate(read_lines(path), start=1):
            fields = line.split('\t')
            if len(fields) != 2:
                raise CorpusError("词表行格式应为 token<TAB>count", path=path, line=line_no)
            token, count = fields[0], int(fields[1])
            if count < 0:
                continue
            entries[token] = count
        min_count = min(entries.values()) if entries else 1
        return cls(entries, min_count=min_count)


def build_vocab(freq: Dict[str, int], min_count: int) -> Vocabulary:
    """
    抽取词表: 保留出现次数不少于 min_count 的词元

    Args:
        freq: 词频表
        min_count: 频次阈值(>= 1)

    Returns:
        Vocabulary: 词表
    """
    if min_count < 1:
        raise ConfigError(f"min_count 必须 >= 1, 当前为 {min_count}")
    entries = {
        t: c for t, c in freq.items()
        if c >= min_count and not is_control_token(t)
    }
    return Vocabulary(entries, min_count=min_count)


# ---------------------------------------------------------------------------
# 去重
# ---------------------------------------------------------------------------

def deduplicate(sentences: Iterable[SentenceLike]) -> Iterator[Sentence]:
    """
    精确去重, 保留首次出现的顺序

    Args:
        sentences: 句子流

    Returns:
        Iterator[Sentence]: 去重后的句子流
    """
    seen = set()
    for item in sentences:
        sentence = as_sentence(item)
        key = ' '.join(sentence)
        if key in seen:
            continue
        seen.add(key)
        yield sentence


# ---------------------------------------------------------------------------
# 大小写变换
# ---------------------------------------------------------------------------

def _is_initial_capital(token: str) -> bool:
    """首字母是唯一的大写字母, 且小写化后能原样恢复"""
    first = token[0]
    if not first.isupper():
        return False
    lowered = first.lower()
    if len(lowered) != 1 or lowered.upper() != first:
        return False
    return not any(ch.isupper() for ch in token[1:])


def capitalize_initial(token: str) -> str:
    """首字母大写, 其余不变"""
    return token[0].upper() + token[1:]


def apply_case_transform(s: SentenceLike) -> Sentence:
    """
    把首字母大写的词元替换为 (<up>, 小写形式)

    Args:
        s: 句子

    Returns:
        Sentence: 变换后的句子

    Raises:
        MalformedInputError: 输入已包含 <up>
    """
    sentence = as_sentence(s)
    if UP in sentence:
        raise MalformedInputError(f"输入已包含 {UP}, 变换不可逆")
    out: Sentence = []
    for token in sentence:
        if _is_initial_capital(token):
            out.append(UP)
            out.append(token[0].lower() + token[1:])
        else:
            out.append(token)
    return out


def invert_case_transform(s: SentenceLike) -> Sentence:
    """
    大小写变换的逆变换

    Args:
        s: 变换后的句子

    Returns:
        Sentence: 原句

    Raises:
        MalformedInputError: <up> 位于句末或后接控制符号
    """
    sentence = as_sentence(s)
    out: Sentence = []
    i = 0
    while i < len(sentence):
        token = sentence[i]
        if token != UP:
            out.append(token)
            i += 1
            continue
        if i + 1 >= len(sentence):
            raise MalformedInputError(f"句末出现孤立的 {UP}")
        following = sentence[i + 1]
        if is_control_token(following):
            raise MalformedInputError(f"{UP} 之后不能是控制符号 {following}")
        out.append(capitalize_initial(following))
        i += 2
    return out


# ---------------------------------------------------------------------------
# 未登录词
# ---------------------------------------------------------------------------

def replace_oov(s: SentenceLike,
                v: Vocabulary,
                policy: OovPolicy = OovPolicy.REPLACE) -> Sentence:
    """
    处理未登录词

    REPLACE 策略下每个不在词表中的词元变为 <unk>, 长度不变;
    REMOVE 策略下直接删除。若输入经过大小写变换, (<up>, w) 这一对按
    恢复大写后的形式查表, 未登录时整对折叠成一个 <unk>。

    Args:
        s: 句子
        v: 词表
        policy: 处理策略

    Returns:
        Sentence: 处理后的句子
    """
    sentence = as_sentence(s)
    out: Sentence = []
    i = 0
    while i < len(sentence):
        token = sentence[i]
        if token == UP and i + 1 < len(sentence):
            following = sentence[i + 1]
            if capitalize_initial(following) in v:
                out.extend((UP, following))
            elif policy is OovPolicy.REPLACE:
                out.append(UNK)
            i += 2
            continue
        if token in v or token == UNK:
            out.append(token)
        elif policy is OovPolicy.REPLACE:
            out.append(UNK)
        i += 1
    return out


# ---------------------------------------------------------------------------
# 打乱与切分
# ---------------------------------------------------------------------------

def shuffle_sentences(sentences: Sequence[Sentence], seed: int) -> List[Sentence]:
    """
    用带种子的 64 位生成器(PCG64)打乱句子顺序

    Args:
        sentences: 句子列表
        seed: 随机种子

    Returns:
        List[Sentence]: 打乱后的新列表
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    return [sentences[i] for i in order]


def split_train_valid(sentences: Sequence[Sentence],
                      valid_target: int,
                      token_count: Callable[[Sentence], int] = len
                      ) -> Tuple[List[Sentence], List[Sentence]]:
    """
    切出验证集: 取最短的前缀使其子词数不少于 valid_target

    Args:
        sentences: 已打乱的句子
        valid_target: 验证集目标子词数
        token_count: 单句计数函数, 默认为长度

    Returns:
        Tuple[List[Sentence], List[Sentence]]: (训练集, 验证集)
    """
    if valid_target < 0:
        raise ConfigError(f"valid_target 不能为负数: {valid_target}")
    if valid_target == 0:
        return list(sentences), []

    total = 0
    for cut, sentence in enumerate(sentences, start=1):
        total += token_count(sentence)
        if total >= valid_target:
            return list(sentences[cut:]), list(sentences[:cut])
    raise CorpusError(f"语料只有 {total} 个子词, 不足验证集目标 {valid_target}")


# ---------------------------------------------------------------------------
# 统计
# ---------------------------------------------------------------------------

class CorpusStats(BaseModel):
    """语料统计(不含句首句尾标记)"""
    sentence_count: int = Field(ge=0)
    token_count: int = Field(ge=0)
    oov_token_count: int = Field(ge=0)
    oov_rate: float = Field(ge=0.0, le=1.0)

    def to_text(self) -> str:
        """结构化文本报告"""
        return (
            f"sentences: {self.sentence_count}\n"
            f"tokens: {self.token_count}\n"
            f"oov_rate: {self.oov_rate:.6f}\n"
        )


def corpus_stats(sentences: Iterable[SentenceLike], v: Vocabulary) -> CorpusStats:
    """
    统计句子数、词元数与 OOV 率

    Args:
        sentences: 句子流
        v: 词表

    Returns:
        CorpusStats: 统计结果, 空语料的 OOV 率定义为 0
    """
    sentence_count = 0
    token_count = 0
    oov = 0
    for item in sentences:
        sentence = as_sentence(item)
        sentence_count += 1
        token_count += len(sentence)
        oov += sum(1 for t in sentence if t not in v)
    return CorpusStats(
        sentence_count=sentence_count,
        token_count=token_count,
        oov_token_count=oov,
        oov_rate=oov / token_count if token_count else 0.0,
    )


def format_stats_table(rows: Sequence[Tuple[str, CorpusStats]]) -> List[str]:
    """
    按数据集汇总表的列输出统计行

    Args:
        rows: (数据集名称, 统计) 列表

    Returns:
        List[str]: TSV 行, 第一行为表头
    """
    lines = ["dataset\tsentences\ttokens\toov_rate"]
    for name, stats in rows:
        lines.append(
            f"{name}\t{stats.sentence_count}\t{stats.token_count}\t{stats.oov_rate:.6f}"
        )
    return lines
