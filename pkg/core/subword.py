"""
一元子词切分模块 (Unigram Subword Module)

实现可逆的子词映射 F:
1. 候选集: 词内长度不超过 max_piece_len 的高频子串 + 全部单字符
2. EM 训练: 在切分格(lattice)上做前向-后向, 累计期望次数并归一化
3. 剪枝: 按似然损失近似值逐轮删除子词, 单字符永不删除
4. 编码: Viterbi 最优切分, 平局时取子词更少者, 再取左侧最长者
5. 解码: 拼接子词, 每个 ▁ 开启一个新词

句子字符串的约定: 每个词(包括第一个)前缀 ▁, 子词不跨越 ▁ 边界,
因此整句的 Viterbi 等价于逐词 Viterbi, 编码按词缓存。
所有概率以 2 为底取对数。
"""

import math
import time
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config.tokens import SUBWORD_CONTROL_TOKENS, UNK, WORD_BOUNDARY
from core.corpus import Sentence, SentenceLike, as_sentence
from core.errors import ConfigError, SubwordError
from utils.fileio import read_lines, write_lines
from utils.logger import logger

MODEL_HEADER = "unigram"
MODEL_VERSION = "1"

# m_step 中零期望次数的下限(相对总次数)
_RELATIVE_COUNT_FLOOR = 1e-12
# 词 -> 编号 的缓存上限(LRU)
WORD_CACHE_SIZE = 65536

_NEG_INF = -math.inf


@dataclass(frozen=True)
class Encoding:
    """一句话的子词编码"""
    subword_tokens: List[int]
    source_word_count: int


# ---------------------------------------------------------------------------
# 切分格
# ---------------------------------------------------------------------------

class SegmentationLattice:
    """
    单个字符串的切分格

    节点为字符边界位置 0..n, 边为 (start, end, piece) 且 piece 在子词表中。
    按构造无环。
    """

    def __init__(self,
                 text: str,
                 pieces: Mapping[str, float],
                 max_piece_len: int,
                 exclude: Optional[str] = None):
        """
        构建切分格

        Args:
            text: 待切分字符串
            pieces: 子词 -> log2 概率
            max_piece_len: 子词最大长度
            exclude: 构建时忽略的子词(剪枝时求替代切分用)
        """
        self.text = text
        n = len(text)
        self.edges: List[List[Tuple[int, str, float]]] = [[] for _ in range(n)]
        for start in range(n):
            for end in range(start + 1, min(n, start + max_piece_len) + 1):
                piece = text[start:end]
                if piece == exclude:
                    continue
                log_prob = pieces.get(piece)
                if log_prob is not None:
                    self.edges[start].append((end, piece, log_prob))

    def forward(self) -> List[float]:
        """前向 log2 和, alpha[i] 为前缀 text[:i] 所有切分的概率和"""
        n = len(self.text)
        alpha = [_NEG_INF] * (n + 1)
        alpha[0] = 0.0
        for start in range(n):
            a = alpha[start]
            if a == _NEG_INF:
                continue
            for end, _, log_prob in self.edges[start]:
                alpha[end] = float(np.logaddexp2(alpha[end], a + log_prob))
        return alpha

    def backward(self) -> List[float]:
        """后向 log2 和, beta[i] 为后缀 text[i:] 所有切分的概率和"""
        n = len(self.text)
        beta = [_NEG_INF] * (n + 1)
        beta[n] = 0.0
        for start in range(n - 1, -1, -1):
            acc = _NEG_INF
            for end, _, log_prob in self.edges[start]:
                if beta[end] != _NEG_INF:
                    acc = float(np.logaddexp2(acc, log_prob + beta[end]))
            beta[start] = acc
        return beta

    def log_likelihood(self) -> float:
        """
        整个字符串的边际似然(log2)

        Raises:
            SubwordError: 终点不可达(字符覆盖被破坏)
        """
        log_z = self.forward()[-1]
        if log_z == _NEG_INF:
            raise SubwordError(f"切分格终点不可达: {self.text!r}")
        return log_z

    def expected_counts(self) -> Tuple[Dict[str, float], float]:
        """
        每个子词在该字符串上的边际期望次数

        Returns:
            Tuple[Dict[str, float], float]: (子词 -> 期望次数, log2 似然)
        """
        alpha = self.forward()
        log_z = alpha[-1]
        if log_z == _NEG_INF:
            raise SubwordError(f"切分格终点不可达: {self.text!r}")
        beta = self.backward()
        counts: Dict[str, float] = {}
        for start, edges in enumerate(self.edges):
            if alpha[start] == _NEG_INF:
                continue
            for end, piece, log_prob in edges:
                if beta[end] == _NEG_INF:
                    continue
                posterior = 2.0 ** (alpha[start] + log_prob + beta[end] - log_z)
                counts[piece] = counts.get(piece, 0.0) + posterior
        return counts, log_z

    def viterbi(self) -> Tuple[List[str], float]:
        """
        最优切分

        平局规则: 概率相同取子词数更少者, 仍相同取左侧最长者(子词长度序列字典序最大)。

        Returns:
            Tuple[List[str], float]: (子词序列, log2 概率); 不可切分时返回 ([], -inf)
        """
        n = len(self.text)
        # best[i] = (log2 概率, 子词数, 子词长度序列)
        best: List[Optional[Tuple[float, int, Tuple[int, ...]]]] = [None] * (n + 1)
        best[0] = (0.0, 0, ())
        for start in range(n):
            current = best[start]
            if current is None:
                continue
            score, count, lengths = current
            for end, _, log_prob in self.edges[start]:
                candidate = (score + log_prob, count + 1, lengths + (end - start,))
                incumbent = best[end]
                if incumbent is None or _better_path(candidate, incumbent):
                    best[end] = candidate
        if best[n] is None:
            return [], _NEG_INF
        score, _, lengths = best[n]
        pieces = []
        pos = 0
        for length in lengths:
            pieces.append(self.text[pos:pos + length])
            pos += length
        return pieces, score


def _better_path(a: Tuple[float, int, Tuple[int, ...]],
                 b: Tuple[float, int, Tuple[int, ...]]) -> bool:
    """a 是否优于 b"""
    if a[0] != b[0]:
        return a[0] > b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] > b[2]


# ---------------------------------------------------------------------------
# 子词模型
# ---------------------------------------------------------------------------

class SubwordModel:
    """
    一元子词模型

    属性:
        pieces: 子词 -> log2 概率(概率和为 1)
        control: 控制符号 <unk> <s> </s> <pad>, 编号 0..3
        user_symbols: 用户定义符号(如 <up>), 整词匹配时直接编码为单个编号
        id_to_piece: 编号 -> 符号, 依次为控制符号、用户符号、按概率降序的子词
    """

    def __init__(self,
                 pieces: Mapping[str, float],
                 user_symbols: Sequence[str] = (),
                 cache_size: int = WORD_CACHE_SIZE):
        """初始化子词模型"""
        if not pieces:
            raise SubwordError("子词表为空")
        for piece in pieces:
            if not piece:
                raise SubwordError("子词不能为空串")
            if piece in SUBWORD_CONTROL_TOKENS or piece in user_symbols:
                raise SubwordError(f"子词与控制符号冲突: {piece}")
        self.pieces: Dict[str, float] = dict(pieces)
        self.control: Tuple[str, ...] = SUBWORD_CONTROL_TOKENS
        self.user_symbols: Tuple[str, ...] = tuple(user_symbols)
        ordered = sorted(self.pieces, key=lambda p: (-self.pieces[p], p))
        self.id_to_piece: List[str] = list(self.control) + list(self.user_symbols) + ordered
        self.piece_to_id: Dict[str, int] = {p: i for i, p in enumerate(self.id_to_piece)}
        self.max_piece_len = max(len(p) for p in self.pieces)
        self.alphabet = frozenset(''.join(self.pieces))
        self._symbol_words = {UNK, *self.user_symbols}
        self._cache_size = max(0, cache_size)
        self._word_cache: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()

    @property
    def size(self) -> int:
        """总条目数(含控制符号与用户符号)"""
        return len(self.id_to_piece)

    def __len__(self) -> int:
        return self.size

    @property
    def reserved_count(self) -> int:
        """控制符号与用户符号的个数"""
        return len(self.control) + len(self.user_symbols)

    def characters(self) -> List[str]:
        """单字符子词"""
        return sorted(p for p in self.pieces if len(p) == 1)

    def normalization_error(self) -> float:
        """|Σ 2^logprob - 1|"""
        return abs(math.fsum(2.0 ** lp for lp in self.pieces.values()) - 1.0)

    # ------------------------------------------------------------------
    # 编码
    # ------------------------------------------------------------------

    def encode_word(self, word: str) -> Tuple[int, ...]:
        """
        编码单个词: 在 ▁word 上做 Viterbi

        Args:
            word: 词元

        Returns:
            Tuple[int, ...]: 子词编号

        Raises:
            SubwordError: 含保留字符或未覆盖的字符
        """
        cached = self._word_cache.get(word)
        if cached is not None:
            self._word_cache.move_to_end(word)
            return cached
        if word in self._symbol_words:
            ids: Tuple[int, ...] = (self.piece_to_id[word],)
        else:
            if WORD_BOUNDARY in word:
                raise SubwordError(f"词元包含保留字符 {WORD_BOUNDARY}: {word!r}")
            text = WORD_BOUNDARY + word
            for ch in text:
                if ch not in self.alphabet:
                    raise SubwordError(
                        f"字符 {ch!r} (U+{ord(ch):04X}) 不在子词模型中, 词元: {word!r}"
                    )
            pieces, _ = SegmentationLattice(text, self.pieces, self.max_piece_len).viterbi()
            if not pieces:
                raise SubwordError(f"无法切分词元: {word!r}")
            ids = tuple(self.piece_to_id[p] for p in pieces)
        if self._cache_size:
            self._word_cache[word] = ids
            if len(self._word_cache) > self._cache_size:
                self._word_cache.popitem(last=False)
        return ids

    def encode_best(self, s: SentenceLike) -> Encoding:
        """
        编码一句话(映射 F)

        Args:
            s: 词级句子

        Returns:
            Encoding: 子词编号与原句词数(用户符号不计入)
        """
        sentence = as_sentence(s)
        ids: List[int] = []
        for word in sentence:
            ids.extend(self.encode_word(word))
        words = sum(1 for w in sentence if w not in self.user_symbols)
        return Encoding(subword_tokens=ids, source_word_count=words)

    def encode_as_pieces(self, s: SentenceLike) -> List[str]:
        """编码并返回子词字符串(编码语料文件的展示格式)"""
        return [self.id_to_piece[i] for i in self.encode_best(s).subword_tokens]

    # ------------------------------------------------------------------
    # 解码
    # ------------------------------------------------------------------

    def decode_with_status(self, tokens: Iterable[int]) -> Tuple[Sentence, bool]:
        """
        解码子词编号序列

        Args:
            tokens: 子词编号

        Returns:
            Tuple[Sentence, bool]: (词级句子, 是否从词中间开始)

        Raises:
            SubwordError: 编号越界
        """
        words: List[str] = []
        open_word = False
        mid_word = False
        n_control = len(self.control)
        for raw_id in tokens:
            token_id = int(raw_id)
            if not 0 <= token_id < self.size:
                raise SubwordError(f"子词编号越界: {token_id} (模型大小 {self.size})")
            piece = self.id_to_piece[token_id]
            if token_id < n_control:
                # <s> </s> <pad> 不属于句子内容
                if piece == UNK:
                    words.append(piece)
                open_word = False
                continue
            if piece in self.user_symbols:
                words.append(piece)
                open_word = False
                continue
            if piece.startswith(WORD_BOUNDARY):
                words.append(piece[1:])
                open_word = True
            elif open_word:
                words[-1] += piece
            else:
                mid_word = True
                words.append(piece)
                open_word = True
        return [w for w in words if w], mid_word

    def decode(self, tokens: Iterable[int]) -> Sentence:
        """
        解码(映射 F 的逆)

        Args:
            tokens: 子词编号

        Returns:
            Sentence: 词级句子
        """
        sentence, mid_word = self.decode_with_status(tokens)
        if mid_word:
            logger.warning(
                "子词序列从词中间开始, 已尽力解码",
                module='subword',
                details={'words': len(sentence)}
            )
        return sentence

    def decode_pieces(self, pieces: Iterable[str]) -> Sentence:
        """解码子词字符串序列"""
        ids = []
        for piece in pieces:
            if piece not in self.piece_to_id:
                raise SubwordError(f"未知子词: {piece!r}")
            ids.append(self.piece_to_id[piece])
        return self.decode(ids)

    # ------------------------------------------------------------------
    # 持久化
    # ------------------------------------------------------------------

    def save(self, path: str):
        """
        写出模型文件: 表头 unigram<TAB>版本, 控制符号, 用户符号,
        再逐行 piece<TAB>log2 概率(17 位有效数字)
        """
        lines = [f"{MODEL_HEADER}\t{MODEL_VERSION}"]
        lines += [f"{t}\tcontrol" for t in self.control]
        lines += [f"{t}\tuser_defined" for t in self.user_symbols]
        lines += [
            f"{p}\t{self.pieces[p]:.17g}"
            for p in self.id_to_piece[self.reserved_count:]
        ]
        write_lines(path, lines)

    @classmethod
    def load(cls, path: str) -> 'SubwordModel':
        """读取模型文件"""
        lines = read_lines(path)
        header = next(lines, None)
        if header != f"{MODEL_HEADER}\t{MODEL_VERSION}":
            raise SubwordError(f"不是子词模型文件: {path}")
        control: List[str] = []
        user_symbols: List[str] = []
        pieces: Dict[str, float] = {}
        for line_no, line in enumerate(lines, start=2):
            fields = line.split('\t')
            if len(fields) != 2:
                raise SubwordError(f"模型文件格式错误 {path}:{line_no}")
            token, value = fields
            if value == 'control':
                control.append(token)
            elif value == 'user_defined':
                user_symbols.append(token)
            else:
                try:
                    pieces[token] = float(value)
                except ValueError as e:
                    raise SubwordError(f"模型文件格式错误 {path}:{line_no}") from e
        if tuple(control) != SUBWORD_CONTROL_TOKENS:
            raise SubwordError(f"控制符号不匹配: {control}")
        return cls(pieces, user_symbols=user_symbols)


# ---------------------------------------------------------------------------
# 训练
# ---------------------------------------------------------------------------

def collect_units(corpus: Iterable[SentenceLike],
                  user_symbols: Sequence[str] = ()) -> Counter:
    """
    统计训练单元: 每个词加 ▁ 前缀后的字符串及其次数

    <unk> 与用户符号直接编码, 不参与训练。

    Args:
        corpus: 句子流
        user_symbols: 用户定义符号

    Returns:
        Counter: ▁word -> 次数
    """
    skip = {UNK, *user_symbols}
    units: Counter = Counter()
    for item in corpus:
        for word in as_sentence(item):
            if word in skip:
                continue
            if WORD_BOUNDARY in word:
                raise SubwordError(f"词元包含保留字符 {WORD_BOUNDARY}: {word!r}")
            units[WORD_BOUNDARY + word] += 1
    return units


def _as_units(corpus) -> Mapping[str, int]:
    """允许直接传入 collect_units 的结果"""
    if isinstance(corpus, Mapping):
        return corpus
    return collect_units(corpus)


def seed_vocabulary(corpus,
                    max_piece_len: int,
                    seed_size: int,
                    min_frequency: int = 2) -> Dict[str, float]:
    """
    构造初始候选子词集

    候选为词内(不跨 ▁ 边界)长度 2..max_piece_len 且次数不少于 min_frequency 的子串,
    按 次数×长度 取前 seed_size 个, 再并入所有单字符。初始概率由子串次数归一化得到。

    Args:
        corpus: 句子流或 collect_units 的结果
        max_piece_len: 子词最大长度(>= 1)
        seed_size: 多字符候选数上限
        min_frequency: 多字符候选的最小次数

    Returns:
        Dict[str, float]: 候选子词 -> log2 初始概率
    """
    if max_piece_len < 1:
        raise ConfigError(f"max_piece_len 必须 >= 1, 当前为 {max_piece_len}")
    units = _as_units(corpus)
    if not units:
        raise SubwordError("语料为空, 无法构造候选子词")

    chars: Counter = Counter()
    substrings: Counter = Counter()
    for unit, freq in units.items():
        for ch in unit:
            chars[ch] += freq
        n = len(unit)
        for start in range(n):
            for end in range(start + 2, min(n, start + max_piece_len) + 1):
                piece = unit[start:end]
                if WORD_BOUNDARY in piece[1:]:
                    break
                substrings[piece] += freq

    candidates = [p for p, c in substrings.items() if c >= min_frequency]
    candidates.sort(key=lambda p: (-substrings[p] * len(p), p))
    counts: Dict[str, int] = dict(chars)
    for piece in candidates[:seed_size]:
        counts[piece] = substrings[piece]

    total = sum(counts.values())
    return {p: math.log2(c / total) for p, c in counts.items()}


def e_step(model: SubwordModel, corpus) -> Tuple[Dict[str, float], float]:
    """
    E 步: 在每个训练单元的切分格上做前向-后向

    Args:
        model: 当前子词模型
        corpus: 句子流或 collect_units 的结果

    Returns:
        Tuple[Dict[str, float], float]: (子词期望次数, 语料 log2 似然)

    Raises:
        SubwordError: 某个单元不可切分
    """
    units = _as_units(corpus)
    counts: Dict[str, float] = {p: 0.0 for p in model.pieces}
    log_likelihood = 0.0
    for unit in sorted(units):
        freq = units[unit]
        lattice = SegmentationLattice(unit, model.pieces, model.max_piece_len)
        unit_counts, log_z = lattice.expected_counts()
        for piece, value in unit_counts.items():
            counts[piece] += freq * value
        log_likelihood += freq * log_z
    return counts, log_likelihood


def m_step(counts: Mapping[str, float],
           user_symbols: Sequence[str] = ()) -> SubwordModel:
    """
    M 步: 期望次数归一化为概率

    低于下限(含零与次正规数)的次数提升到一个极小的下限, 由后续剪枝删除。

    Args:
        counts: 子词期望次数(非负, 不全为零)
        user_symbols: 用户定义符号

    Returns:
        SubwordModel: 新模型
    """
    if any(c < 0 for c in counts.values()):
        raise SubwordError("期望次数不能为负")
    positive = math.fsum(c for c in counts.values() if c > 0)
    if positive <= 0:
        raise SubwordError("期望次数全为零")
    floor = positive * _RELATIVE_COUNT_FLOOR
    adjusted = {p: max(c, floor) for p, c in counts.items()}
    total = math.fsum(adjusted.values())
    return SubwordModel(
        {p: math.log2(c / total) for p, c in adjusted.items()},
        user_symbols=user_symbols
    )


def prune(model: SubwordModel,
          target_size: int,
          shrink: float,
          expected_counts: Mapping[str, float]) -> SubwordModel:
    """
    剪枝一轮: 模型大小乘以 shrink(不低于 target_size)

    损失近似为 期望次数 × (子词 log2 概率 - 其最优替代切分的 log2 概率),
    损失最小的先删; 单字符子词永不删除。剩余概率重新归一化。

    Args:
        model: 当前模型
        target_size: 目标大小(含控制符号与用户符号)
        shrink: 每轮收缩比例, (0, 1)
        expected_counts: 最近一次 E 步的期望次数

    Returns:
        SubwordModel: 剪枝后的模型
    """
    minimum = len(model.characters()) + model.reserved_count
    if target_size < minimum:
        raise ConfigError(f"目标大小 {target_size} 小于字符数加控制符号数 {minimum}")
    if not 0.0 < shrink < 1.0:
        raise ConfigError(f"shrink 必须在 (0, 1) 之间, 当前为 {shrink}")
    if model.size <= target_size:
        return model

    new_size = max(target_size, int(model.size * shrink))
    n_remove = model.size - new_size

    losses: List[Tuple[float, str]] = []
    for piece, log_prob in model.pieces.items():
        if len(piece) == 1:
            continue
        lattice = SegmentationLattice(piece, model.pieces, model.max_piece_len, exclude=piece)
        _, alternative = lattice.viterbi()
        loss = expected_counts.get(piece, 0.0) * (log_prob - alternative)
        losses.append((loss, piece))
    losses.sort()
    removed = {piece for _, piece in losses[:n_remove]}

    kept = {p: lp for p, lp in model.pieces.items() if p not in removed}
    log_total = math.log2(math.fsum(2.0 ** lp for lp in kept.values()))
    return SubwordModel(
        {p: lp - log_total for p, lp in kept.items()},
        user_symbols=model.user_symbols
    )


@dataclass
class TrainingRound:
    """一轮 EM + 剪枝的记录"""
    round: int
    size: int
    log_likelihoods: List[float] = field(default_factory=list)


class UnigramTrainer:
    """
    一元子词模型训练器

    每轮先做 em_iterations 次 EM, 若大小仍超过目标则按 shrink 剪枝,
    直到恰好达到 vocab_size(含 4 个控制符号与用户符号)。
    """

    def __init__(self,
                 vocab_size: int,
                 max_piece_len: int = 8,
                 seed_multiplier: int = 25,
                 min_frequency: int = 2,
                 shrink: float = 0.75,
                 em_iterations: int = 2,
                 user_symbols: Sequence[str] = ()):
        """初始化训练器"""
        self.vocab_size = vocab_size
        self.max_piece_len = max_piece_len
        self.seed_multiplier = seed_multiplier
        self.min_frequency = min_frequency
        self.shrink = shrink
        self.em_iterations = em_iterations
        self.user_symbols = tuple(user_symbols)
        self.history: List[TrainingRound] = []

    def train(self, corpus: Iterable[SentenceLike]) -> SubwordModel:
        """
        训练子词模型

        Args:
            corpus: 训练句子流

        Returns:
            SubwordModel: 大小恰为 vocab_size 的模型
        """
        start_time = time.time()
        units = collect_units(corpus, self.user_symbols)
        if not units:
            raise SubwordError("语料为空, 无法训练子词模型")

        reserved = len(SUBWORD_CONTROL_TOKENS) + len(self.user_symbols)
        n_chars = len({ch for unit in units for ch in unit})
        if self.vocab_size < n_chars + reserved:
            raise ConfigError(
                f"vocab_size {self.vocab_size} 小于字符数 {n_chars} 加保留符号数 {reserved}"
            )

        seed = seed_vocabulary(
            units,
            self.max_piece_len,
            self.seed_multiplier * self.vocab_size,
            self.min_frequency
        )
        if self.vocab_size > len(seed) + reserved:
            raise ConfigError(
                f"vocab_size {self.vocab_size} 超过候选集大小 {len(seed) + reserved}"
            )
        logger.info(
            "子词候选集构造完成",
            module='subword',
            details={'units': len(units), 'characters': n_chars, 'candidates': len(seed)}
        )

        model = SubwordModel(seed, user_symbols=self.user_symbols)
        self.history = []
        round_index = 0
        while True:
            record = TrainingRound(round=round_index, size=model.size)
            counts: Dict[str, float] = {}
            for _ in range(self.em_iterations):
                counts, log_likelihood = e_step(model, units)
                record.log_likelihoods.append(log_likelihood)
                model = m_step(counts, self.user_symbols)
            self.history.append(record)
            logger.info(
                f"EM 第 {round_index} 轮",
                module='subword',
                details={'size': record.size, 'log_likelihood': record.log_likelihoods}
            )
            if model.size <= self.vocab_size:
                break
            model = prune(model, self.vocab_size, self.shrink, counts)
            round_index += 1

        logger.performance(
            'train_unigram', time.time() - start_time,
            vocab_size=model.size, rounds=len(self.history)
        )
        return model


def train_unigram(corpus: Iterable[SentenceLike], vocab_size: int, **kwargs) -> SubwordModel:
    """
    训练一元子词模型的便捷入口

    Args:
        corpus: 训练句子流
        vocab_size: 目标大小(含控制符号)
        **kwargs: 传给 UnigramTrainer 的其他参数

    Returns:
        SubwordModel: 训练好的模型
    """
    return UnigramTrainer(vocab_size, **kwargs).train(corpus)


def encode_best(model: SubwordModel, s: SentenceLike) -> Encoding:
    """最优切分编码"""
    return model.encode_best(s)


def decode(model: SubwordModel, tokens: Iterable[int]) -> Sentence:
    """解码"""
    return model.decode(tokens)


def tokens_per_word_ratio(model: SubwordModel, corpus: Iterable[SentenceLike]) -> float:
    """
    平均每个输入词元对应的子词数

    Args:
        model: 子词模型
        corpus: 句子流

    Returns:
        float: 子词总数 / 词元总数
    """
    words = 0
    subwords = 0
    for item in corpus:
        encoding = model.encode_best(item)
        words += encoding.source_word_count
        subwords += len(encoding.subword_tokens)
    if words == 0:
        raise SubwordError("语料为空, 无法计算子词/词比例")
    return subwords / words
