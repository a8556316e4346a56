"""
网格实验服务
在 (词表大小 × 层数) 网格上训练子词 LSTM 语言模型, 以词级困惑度作为可比指标

结果文件首行为注释表头, 其余每行 `size layers perplexity`(空白分隔), 已完成的格子在重跑时跳过。
"""

import os
import math
import threading
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

from config.settings import LstmLmConfig, SweepConfig, TokenizerConfig, TrainingConfig
from core.evaluation import TokenCountPolicy, word_level_perplexity
from core.subword import SubwordModel, UnigramTrainer
from services.lstm_service import LstmLanguageModel, train_lstm
from utils.fileio import read_lines, read_sentences, write_lines
from utils.logger import logger

RESULT_HEADER = "# size layers perplexity"


@dataclass(frozen=True)
class SweepCell:
    """一个网格点的全部输入(可跨进程传递)"""
    vocab_size: int
    layers: int
    tokenizer_path: str
    train_path: str
    valid_path: str
    lstm: LstmLmConfig
    training: TrainingConfig
    token_count_policy: str
    seed: int


@dataclass(frozen=True)
class SweepResult:
    vocab_size: int
    layers: int
    perplexity: float

    def to_row(self) -> str:
        return f"{self.vocab_size} {self.layers} {self.perplexity:.6f}"


def sampled_softmax_size(vocab_size: int, sweep: SweepConfig) -> int:
    """词表达到阈值时的负样本数, 否则为 0(完整 softmax)"""
    if vocab_size < sweep.sampled_softmax_min_vocab:
        return 0
    return int(round(sweep.sampled_softmax_ratio * vocab_size))


def run_sweep_cell(cell: SweepCell) -> SweepResult:
    """
    训练并评估一个网格点

    Args:
        cell: 网格点

    Returns:
        SweepResult: 验证集上的词级困惑度
    """
    start_time = time.time()
    subword = SubwordModel.load(cell.tokenizer_path)
    train_words = list(read_sentences(cell.train_path))
    valid_words = list(read_sentences(cell.valid_path))
    train_ids = [subword.encode_best(s).subword_tokens for s in train_words]
    valid_ids = [subword.encode_best(s).subword_tokens for s in valid_words]

    lstm_config = replace(cell.lstm, layers=cell.layers, vocab_size=subword.size, seed=cell.seed)
    model, _ = train_lstm(lstm_config, cell.training, subword, train_ids, valid_ids, seed=cell.seed)
    result = word_level_perplexity(
        LstmLanguageModel(model, subword), subword, valid_words,
        TokenCountPolicy(cell.token_count_policy)
    )
    logger.performance(
        'sweep_cell', time.time() - start_time,
        vocab_size=cell.vocab_size, layers=cell.layers, ppl_word=result.ppl_word_direct
    )
    return SweepResult(cell.vocab_size, cell.layers, result.ppl_word_direct)


def read_results(path: str) -> Dict[Tuple[int, int], float]:
    """读取已有结果, 文件不存在时为空"""
    results: Dict[Tuple[int, int], float] = {}
    if not os.path.isfile(path):
        return results
    for line in read_lines(path):
        fields = line.split()
        if not fields or fields[0].startswith('#') or len(fields) != 3:
            continue
        results[(int(fields[0]), int(fields[1]))] = float(fields[2])
    return results


class SweepRunner:
    """
    网格实验调度

    先为每个词表大小训练一个子词模型, 再把各格子分发到进程池;
    父进程是结果文件的唯一写者, 每完成一个格子就在锁内追加一行。
    """

    def __init__(self,
                 sweep: SweepConfig,
                 tokenizer: TokenizerConfig,
                 lstm: LstmLmConfig,
                 training: TrainingConfig,
                 token_count_policy: str,
                 seed: int,
                 work_dir: str):
        self.sweep = sweep
        self.tokenizer = tokenizer
        self.lstm = lstm
        self.training = training
        self.token_count_policy = token_count_policy
        self.seed = seed
        self.work_dir = work_dir
        self.result_path = os.path.join(work_dir, 'sweep.dat')
        self._lock = threading.Lock()

    def tokenizer_path(self, vocab_size: int) -> str:
        return os.path.join(self.work_dir, 'sweep', f'tokenizer.{vocab_size}.model')

    def _prepare_tokenizers(self, tokenizer_corpus: List[List[str]], user_symbols: Sequence[str]):
        for vocab_size in self.sweep.vocab_sizes:
            path = self.tokenizer_path(vocab_size)
            if os.path.isfile(path):
                continue
            trainer = UnigramTrainer(
                vocab_size,
                max_piece_len=self.tokenizer.max_piece_len,
                seed_multiplier=self.tokenizer.seed_multiplier,
                min_frequency=self.tokenizer.min_frequency,
                shrink=self.tokenizer.shrink,
                em_iterations=self.tokenizer.em_iterations,
                user_symbols=user_symbols,
            )
            trainer.train(tokenizer_corpus).save(path)

    def cells(self, train_path: str, valid_path: str) -> List[SweepCell]:
        """按网格顺序列出所有格子"""
        out = []
        for vocab_size in self.sweep.vocab_sizes:
            training = replace(
                self.training,
                epochs=self.sweep.epochs,
                sampled_softmax=sampled_softmax_size(vocab_size, self.sweep),
            )
            for layers in self.sweep.layers:
                out.append(SweepCell(
                    vocab_size=vocab_size,
                    layers=layers,
                    tokenizer_path=self.tokenizer_path(vocab_size),
                    train_path=train_path,
                    valid_path=valid_path,
                    lstm=self.lstm,
                    training=training,
                    token_count_policy=self.token_count_policy,
                    seed=self.seed,
                ))
        return out

    def _append(self, result: SweepResult):
        with self._lock:
            existing = os.path.isfile(self.result_path)
            with open(self.result_path, 'a', encoding='utf-8', newline='\n') as f:
                if not existing:
                    f.write(RESULT_HEADER + '\n')
                f.write(result.to_row() + '\n')
        logger.info(
            "网格点完成",
            module='sweep',
            details={'size': result.vocab_size, 'layers': result.layers, 'perplexity': result.perplexity}
        )

    def run(self,
            tokenizer_corpus: List[List[str]],
            train_path: str,
            valid_path: str,
            user_symbols: Sequence[str] = ()) -> List[SweepResult]:
        """
        运行网格实验

        Args:
            tokenizer_corpus: 训练子词模型的语料
            train_path: 词级训练集
            valid_path: 词级验证集
            user_symbols: 子词模型的用户符号

        Returns:
            List[SweepResult]: 按网格顺序排列的全部结果
        """
        start_time = time.time()
        os.makedirs(self.work_dir, exist_ok=True)
        self._prepare_tokenizers(tokenizer_corpus, user_symbols)

        done = read_results(self.result_path)
        if os.path.isfile(self.result_path):
            # 中断留下的半行不能与之后追加的行连在一起
            rows = [SweepResult(v, n, p).to_row() for (v, n), p in done.items()]
            write_lines(self.result_path, [RESULT_HEADER] + rows)
        pending = [c for c in self.cells(train_path, valid_path) if (c.vocab_size, c.layers) not in done]
        logger.info(
            "开始网格实验",
            module='sweep',
            details={'completed': len(done), 'pending': len(pending), 'workers': self.sweep.workers}
        )

        if self.sweep.workers == 1:
            for cell in pending:
                result = run_sweep_cell(cell)
                self._append(result)
                done[(result.vocab_size, result.layers)] = result.perplexity
        else:
            with ProcessPoolExecutor(max_workers=self.sweep.workers) as pool:
                futures = [pool.submit(run_sweep_cell, cell) for cell in pending]
                for future in as_completed(futures):
                    result = future.result()
                    self._append(result)
                    done[(result.vocab_size, result.layers)] = result.perplexity

        ordered = [
            SweepResult(v, n, done[(v, n)])
            for v in self.sweep.vocab_sizes for n in self.sweep.layers
            if (v, n) in done and math.isfinite(done[(v, n)])
        ]
        # 全部完成后按网格顺序重写, 使输出与完成顺序无关
        write_lines(self.result_path, [RESULT_HEADER] + [r.to_row() for r in ordered])
        logger.performance('sweep', time.time() - start_time, cells=len(ordered))
        return ordered
