"""
n-gram 语言模型服务
固定折扣的插值 Kneser-Ney 模型, 可用于词级或子词级符号流
"""

import math
import time
from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from config.tokens import BOS, EOS, UNK
from core.corpus import SentenceLike, as_sentence
from core.errors import ConfigError, LanguageModelError
from services.model_service import BaseLanguageModel
from utils.fileio import read_lines, write_lines
from utils.logger import logger

Context = Tuple[str, ...]
# 每阶: 上下文 -> (log2 回退权重, 已见符号 -> log2 插值概率)
OrderTable = Dict[Context, Tuple[float, Dict[str, float]]]


class KneserNeyModel(BaseLanguageModel):
    """
    插值 Kneser-Ney 模型

    P_k(w|h) = max(c_k(h,w) - D, 0) / c_k(h) + γ_k(h) · P_{k-1}(w|h')
    γ_k(h)   = D · N1+(h•) / c_k(h)

    最高阶使用原始计数, 低阶使用接续计数(不同左扩展的个数),
    零阶为支持集上的均匀分布。未见过的上下文完全回退到低一阶。
    """

    def __init__(self,
                 order: int,
                 discount: float,
                 support: Iterable[str],
                 tables: List[OrderTable]):
        """
        Args:
            order: 阶数 n
            discount: 固定折扣 D
            support: 可被打分的符号(不含 <s>)
            tables: 第 1..n 阶的概率表, 下标 0 占位
        """
        self.order = order
        self.discount = discount
        self._support = frozenset(support)
        self.tables = tables
        self._uniform = -math.log2(len(self._support))

    @property
    def vocabulary(self) -> frozenset:
        return self._support

    def _context_key(self, context: Sequence[str]) -> Context:
        """截断或用 <s> 填充到 n-1 个符号"""
        width = self.order - 1
        if width == 0:
            return ()
        padded = [BOS] * width + list(context)
        return tuple(padded[-width:])

    def _lookup(self, k: int, context: Context, token: str) -> float:
        """第 k 阶插值概率(log2), context 长度为 k-1"""
        log_weight = 0.0
        while k > 0:
            entry = self.tables[k].get(context)
            if entry is not None:
                log_gamma, probs = entry
                log_prob = probs.get(token)
                if log_prob is not None:
                    return log_weight + log_prob
                log_weight += log_gamma
            k -= 1
            context = context[1:]
        return log_weight + self._uniform

    def log_prob(self, context: Sequence[str], token: str) -> float:
        """
        条件对数概率

        Args:
            context: 前文, 只使用最后 n-1 个符号
            token: 待预测符号

        Returns:
            float: lg P(token | context)

        Raises:
            LanguageModelError: token 不在支持集中
        """
        if token not in self._support:
            raise LanguageModelError(f"未知符号: {token!r} (调用方需先映射为 {UNK})")
        return self._lookup(self.order, self._context_key(context), token)

    def sequence_log_prob(self, s: Sequence[str]) -> float:
        """整句对数概率, 句首用 <s> 填充, 末尾预测 </s>"""
        width = self.order - 1
        padded = [BOS] * width + list(s) + [EOS]
        total = 0.0
        for i in range(width, len(padded)):
            token = padded[i]
            if token not in self._support:
                raise LanguageModelError(f"未知符号: {token!r} (调用方需先映射为 {UNK})")
            total += self._lookup(self.order, tuple(padded[i - width:i]), token)
        return total

    # ------------------------------------------------------------------
    # 持久化
    # ------------------------------------------------------------------

    def save(self, path: str) -> int:
        """
        写出模型: '#' 开头的表头行, 然后按 (阶, 上下文, 符号) 排序的
        order<TAB>context<TAB>token<TAB>logprob<TAB>backoff 行

        Returns:
            int: 写出的行数
        """
        lines = [
            f"# order\t{self.order}",
            f"# discount\t{self.discount:.17g}",
            f"# vocab\t{' '.join(sorted(self._support))}",
        ]
        rows = []
        for k in range(1, self.order + 1):
            for context, (log_gamma, probs) in self.tables[k].items():
                context_text = ' '.join(context)
                for token, log_prob in probs.items():
                    rows.append((k, context_text, token, log_prob, log_gamma))
        rows.sort(key=lambda r: (r[0], r[1], r[2]))
        lines += [f"{k}\t{c}\t{t}\t{lp:.17g}\t{bo:.17g}" for k, c, t, lp, bo in rows]
        return write_lines(path, lines)

    @classmethod
    def load(cls, path: str) -> 'KneserNeyModel':
        """读取模型文件"""
        header: Dict[str, str] = {}
        tables: List[OrderTable] = []
        for line_no, line in enumerate(read_lines(path), start=1):
            if line.startswith('# '):
                key, _, value = line[2:].partition('\t')
                header[key] = value
                if key == 'order':
                    tables = [dict() for _ in range(int(value) + 1)]
                continue
            fields = line.split('\t')
            if len(fields) != 5 or not tables:
                raise LanguageModelError(f"n-gram 模型文件格式错误 {path}:{line_no}")
            try:
                k = int(fields[0])
                context = tuple(fields[1].split(' ')) if fields[1] else ()
                log_prob = float(fields[3])
                log_gamma = float(fields[4])
                entry = tables[k].setdefault(context, (log_gamma, {}))
            except (ValueError, IndexError) as e:
                raise LanguageModelError(f"n-gram 模型文件格式错误 {path}:{line_no}") from e
            entry[1][fields[2]] = log_prob
        for key in ('order', 'discount', 'vocab'):
            if key not in header:
                raise LanguageModelError(f"n-gram 模型文件缺少表头 {key}: {path}")
        return cls(
            order=int(header['order']),
            discount=float(header['discount']),
            support=header['vocab'].split(' '),
            tables=tables
        )


def train_kn(stream: Iterable[SentenceLike],
             order: int,
             discount: float = 0.75,
             vocabulary: Optional[Iterable[str]] = None) -> KneserNeyModel:
    """
    训练插值 Kneser-Ney 模型

    Args:
        stream: 训练句子流
        order: 阶数(>= 1)
        discount: 固定折扣, (0, 1)
        vocabulary: 额外纳入支持集的符号(例如完整的子词表)

    Returns:
        KneserNeyModel: 训练好的模型

    Raises:
        ConfigError: 参数越界
        LanguageModelError: 语料为空或包含 <s>
    """
    if order < 1:
        raise ConfigError(f"order 必须 >= 1, 当前为 {order}")
    if not 0.0 < discount < 1.0:
        raise ConfigError(f"discount 必须在 (0, 1) 之间, 当前为 {discount}")

    start_time = time.time()
    width = order - 1
    counts: List[Dict[Context, Counter]] = [defaultdict(Counter) for _ in range(order + 1)]
    support = {UNK, EOS}
    if vocabulary is not None:
        support.update(t for t in vocabulary if t != BOS)

    sentences = 0
    tokens = 0
    for item in stream:
        sentence = as_sentence(item)
        if BOS in sentence:
            raise LanguageModelError(f"训练句子不能包含 {BOS}")
        sentences += 1
        tokens += len(sentence)
        support.update(sentence)
        padded = [BOS] * width + sentence + [EOS]
        for i in range(width, len(padded)):
            counts[order][tuple(padded[i - width:i])][padded[i]] += 1
    if sentences == 0:
        raise LanguageModelError("训练语料为空")

    # 接续计数: 第 k 阶 (h, w) 的次数 = 以它为后缀的不同 k+1 阶类型数
    for k in range(order - 1, 0, -1):
        for context, row in counts[k + 1].items():
            for token in row:
                counts[k][context[1:]][token] += 1

    model = KneserNeyModel(order, discount, support, [dict() for _ in range(order + 1)])
    for k in range(1, order + 1):
        table = model.tables[k]
        for context, row in counts[k].items():
            total = sum(row.values())
            gamma = discount * len(row) / total
            probs = {}
            for token, count in row.items():
                lower = model._lookup(k - 1, context[1:], token)
                probs[token] = math.log2((count - discount) / total + gamma * 2.0 ** lower)
            table[context] = (math.log2(gamma), probs)

    logger.performance(
        'train_kn', time.time() - start_time,
        order=order, sentences=sentences, tokens=tokens, support=len(support)
    )
    return model
