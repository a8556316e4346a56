"""
LSTM 语言模型服务
把 numpy LSTM 包装成子词符号上的语言模型, 并提供按轮训练、验证与检查点保存
"""

import math
import time
from dataclasses import dataclass, replace
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import LstmLmConfig, TrainingConfig
from config.tokens import BOS, EOS, PAD
from core.errors import LanguageModelError
from core.lstm import LN2, LstmLmModel, SampledSoftmax
from core.schedule import TrainSchedule, random_bptt_length
from core.subword import SubwordModel
from services.model_service import BaseLanguageModel
from utils.fileio import write_lines
from utils.logger import logger


class LstmLanguageModel(BaseLanguageModel):
    """
    子词级 LSTM 语言模型

    每句话以 <s> 作为第一个输入、从零状态开始, 依次预测子词并在末尾预测 </s>。
    """

    def __init__(self, model: LstmLmModel, subword: SubwordModel, batch_size: int = 32):
        """
        Args:
            model: 训练好的网络
            subword: 提供符号与编号映射的子词模型
            batch_size: 整句打分时的批大小
        """
        if model.vocab_size != subword.size:
            raise LanguageModelError(
                f"网络词表大小 {model.vocab_size} 与子词模型大小 {subword.size} 不一致"
            )
        self.model = model
        self.subword = subword
        self.batch_size = batch_size
        self._vocabulary = frozenset(p for p in subword.id_to_piece if p not in (BOS, PAD))

    @property
    def vocabulary(self) -> FrozenSet[str]:
        return self._vocabulary

    def _to_ids(self, tokens: Sequence[str]) -> List[int]:
        ids = []
        for token in tokens:
            token_id = self.subword.piece_to_id.get(token)
            if token_id is None:
                raise LanguageModelError(f"未知符号: {token!r}")
            ids.append(token_id)
        return ids

    def log_prob(self, context: Sequence[str], token: str) -> float:
        """lg P(token | <s> context)"""
        if token not in self._vocabulary:
            raise LanguageModelError(f"未知符号: {token!r}")
        inputs = [self.subword.piece_to_id[BOS]] + self._to_ids(context)
        log_probs, _ = self.model.forward(np.array([inputs]))
        return float(log_probs[0, -1, self.subword.piece_to_id[token]] / LN2)

    def sequence_log_prob(self, s: Sequence[str]) -> float:
        return self.id_sequence_log_probs([self._to_ids(s)])[0]

    def sentence_log_probs(self, sentences: Sequence[Sequence[str]]) -> List[float]:
        return self.id_sequence_log_probs([self._to_ids(s) for s in sentences])

    def id_sequence_log_probs(self, sentences: Sequence[Sequence[int]]) -> List[float]:
        """
        批量整句打分; 句尾之后用 <pad> 补齐, 补齐位置不计分

        Args:
            sentences: 子词编号序列

        Returns:
            List[float]: 每句的 lg q(s)
        """
        bos = self.subword.piece_to_id[BOS]
        eos = self.subword.piece_to_id[EOS]
        pad = self.subword.piece_to_id[PAD]
        scores: List[float] = []
        for start in range(0, len(sentences), self.batch_size):
            chunk = sentences[start:start + self.batch_size]
            width = max(len(s) for s in chunk) + 1
            inputs = np.full((len(chunk), width), pad, dtype=np.int64)
            targets = np.full((len(chunk), width), pad, dtype=np.int64)
            for row, ids in enumerate(chunk):
                inputs[row, :len(ids) + 1] = [bos] + list(ids)
                targets[row, :len(ids) + 1] = list(ids) + [eos]
            log_probs, _ = self.model.forward(inputs)
            picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0] / LN2
            for row, ids in enumerate(chunk):
                scores.append(float(picked[row, :len(ids) + 1].sum()))
        return scores


@dataclass
class EpochRecord:
    """一轮训练的记录"""
    epoch: int
    train_xent: float
    val_ppl: float
    lr: float

    def to_tsv(self) -> str:
        return f"{self.epoch}\t{self.train_xent:.6f}\t{self.val_ppl:.6f}\t{self.lr:.8g}"


def batchify(stream: np.ndarray, batch_size: int) -> np.ndarray:
    """
    把符号流切成 batch_size 行的矩阵, 每行是一段连续的流, 丢弃余数

    Args:
        stream: 一维编号流
        batch_size: 行数

    Returns:
        np.ndarray: [batch_size × n]
    """
    n = len(stream) // batch_size
    if n < 2:
        raise LanguageModelError(f"训练流只有 {len(stream)} 个符号, 不足以组成批大小 {batch_size}")
    return np.asarray(stream[:n * batch_size], dtype=np.int64).reshape(batch_size, n)


class LstmTrainer:
    """
    LSTM 语言模型训练器

    训练流为各句 <s> ids </s> 的拼接; 每个窗口长度随机, 状态在窗口之间传递(不回传梯度),
    每轮开始时清零。学习率按倾斜三角调度。
    """

    def __init__(self,
                 lstm_config: LstmLmConfig,
                 training: TrainingConfig,
                 subword: SubwordModel,
                 seed: int = 0):
        """
        Args:
            lstm_config: 网络配置(vocab_size 会被子词模型大小覆盖)
            training: 训练配置
            subword: 子词模型
            seed: 随机种子(dropout、窗口长度、负采样)
        """
        self.config = replace(lstm_config, vocab_size=subword.size)
        self.training = training
        self.subword = subword
        self.seed = seed
        self.history: List[EpochRecord] = []

    def _stream(self, sentences: Sequence[Sequence[int]]) -> np.ndarray:
        bos = self.subword.piece_to_id[BOS]
        eos = self.subword.piece_to_id[EOS]
        out: List[int] = []
        for ids in sentences:
            out.append(bos)
            out.extend(ids)
            out.append(eos)
        return np.asarray(out, dtype=np.int64)

    def validation_perplexity(self, model: LstmLmModel, valid: Sequence[Sequence[int]]) -> float:
        """验证集每符号困惑度(计入句末 </s>)"""
        if not valid:
            return math.nan
        scorer = LstmLanguageModel(model, self.subword)
        total = sum(scorer.id_sequence_log_probs(valid))
        predictions = sum(len(s) + 1 for s in valid)
        return 2.0 ** (-total / predictions)

    def train(self,
              train: Sequence[Sequence[int]],
              valid: Sequence[Sequence[int]],
              checkpoint_path: Optional[str] = None,
              log_path: Optional[str] = None) -> Tuple[LstmLmModel, List[EpochRecord]]:
        """
        训练并保留验证困惑度最好的模型

        Args:
            train: 训练句子(子词编号)
            valid: 验证句子(子词编号)
            checkpoint_path: 最优检查点路径
            log_path: TSV 训练日志路径

        Returns:
            Tuple[LstmLmModel, List[EpochRecord]]: (最优模型, 每轮记录)
        """
        start_time = time.time()
        cfg = self.training
        rng = np.random.default_rng(self.seed)

        n_sentences = max(1, math.ceil(len(train) * cfg.data_fraction))
        stream = self._stream(train[:n_sentences])
        data = batchify(stream, cfg.batch_size)
        steps_per_epoch = math.ceil((data.shape[1] - 1) / self.config.bptt_len)
        schedule = TrainSchedule(
            total_steps=cfg.epochs * steps_per_epoch,
            lr_max=cfg.lr_max,
            cut_frac=cfg.cut_frac,
            ratio=cfg.ratio
        )
        sampler = None
        if cfg.sampled_softmax > 0:
            sampler = SampledSoftmax.from_counts(stream, self.subword.size, cfg.sampled_softmax)

        model = LstmLmModel(self.config)
        logger.info(
            "开始训练 LSTM 语言模型",
            module='lstm',
            details={
                'parameters': model.parameter_count(),
                'stream_tokens': len(stream),
                'steps': schedule.total_steps,
                'sampled_softmax': cfg.sampled_softmax,
            }
        )

        best_ppl = math.inf
        best_params = None
        self.history = []
        step = 0
        for epoch in range(1, cfg.epochs + 1):
            state = model.zero_state(cfg.batch_size)
            position = 0
            loss_sum = 0.0
            token_sum = 0
            lr = schedule.learning_rate(min(step, schedule.total_steps))
            while position < data.shape[1] - 1:
                length = min(random_bptt_length(self.config.bptt_len, rng), data.shape[1] - 1 - position)
                x = data[:, position:position + length]
                y = data[:, position + 1:position + 1 + length]
                masks = model.sample_masks(cfg.batch_size, rng)
                lr = schedule.learning_rate(min(step, schedule.total_steps))
                loss, _, state = model.backward_and_step(
                    x, y, schedule, step,
                    state=state, clip_norm=cfg.clip_norm, masks=masks,
                    sampler=sampler, rng=rng, lr=lr
                )
                loss_sum += loss * y.size
                token_sum += y.size
                position += length
                step += 1

            train_xent = loss_sum / token_sum
            val_ppl = self.validation_perplexity(model, valid)
            record = EpochRecord(epoch, train_xent, val_ppl, lr)
            self.history.append(record)
            logger.info(
                f"第 {epoch} 轮结束",
                module='lstm',
                details={'train_xent': train_xent, 'val_ppl': val_ppl, 'lr': lr}
            )

            improved = math.isnan(val_ppl) or val_ppl < best_ppl
            if improved:
                best_ppl = val_ppl if not math.isnan(val_ppl) else best_ppl
                best_params = {k: v.copy() for k, v in model.params.items()}
                if checkpoint_path:
                    model.save(checkpoint_path)
            if log_path:
                write_lines(log_path, ["epoch\ttrain_xent\tval_ppl\tlr"] + [r.to_tsv() for r in self.history])

        best = LstmLmModel(self.config, params=best_params)
        logger.performance(
            'train_lstm', time.time() - start_time,
            epochs=cfg.epochs, steps=step, best_val_ppl=best_ppl
        )
        return best, self.history


def train_lstm(lstm_config: LstmLmConfig,
               training: TrainingConfig,
               subword: SubwordModel,
               train: Sequence[Sequence[int]],
               valid: Sequence[Sequence[int]],
               seed: int = 0,
               checkpoint_path: Optional[str] = None,
               log_path: Optional[str] = None) -> Tuple[LstmLmModel, List[EpochRecord]]:
    """训练 LSTM 语言模型的便捷入口"""
    trainer = LstmTrainer(lstm_config, training, subword, seed=seed)
    return trainer.train(train, valid, checkpoint_path=checkpoint_path, log_path=log_path)
