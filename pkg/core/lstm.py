"""
多层 LSTM 语言模型 (numpy 实现)

网络结构自下而上: 嵌入层 -> LSTM_0 ... LSTM_{L-1} -> 输出投影 -> log-softmax。
全部参数为 float64。门的排列顺序为 i, f, g, o。

- 变分 dropout: 嵌入、层间隐状态、输出各一个掩码, 同一序列内所有时间步共用
- 权重绑定: 输出投影即嵌入矩阵的转置(共享存储), 此时最后一层隐状态维度等于嵌入维度
- 训练目标: 以比特为单位的平均交叉熵, 梯度手工反向传播(截断 BPTT)
- 采样 softmax: 以平滑一元分布为建议分布, 逐位置做不放回的 π-ps 系统抽样,
  对负样本的 logit 做 -ln π 的包含概率校正
"""

import os
import math
import typing
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, log_softmax

from config.settings import LstmLmConfig, coerce_value
from core.errors import CheckpointError, ConfigError, LanguageModelError, NumericalError
from core.schedule import TrainSchedule

LN2 = math.log(2.0)
CHECKPOINT_FORMAT = "lstm-lm/1"

State = List[Tuple[np.ndarray, np.ndarray]]


@dataclass
class DropoutMasks:
    """一个批次的变分 dropout 掩码, 形状为 (batch, dim), 在时间维上广播"""
    embedding: Optional[np.ndarray] = None
    hidden: List[Optional[np.ndarray]] = field(default_factory=list)
    output: Optional[np.ndarray] = None


@dataclass
class LayerCache:
    """单层前向缓存"""
    inputs: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


@dataclass
class ForwardCache:
    """整网前向缓存"""
    ids: np.ndarray
    masks: DropoutMasks
    layers: List[LayerCache]
    top: np.ndarray


def _inverted_mask(rng: np.random.Generator, shape: Tuple[int, ...], rate: float) -> Optional[np.ndarray]:
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


class LstmLmModel:
    """
    LSTM 语言模型

    属性:
        config: 模型配置
        params: 参数名 -> 张量, 顺序固定(检查点按此顺序写出)
    """

    def __init__(self, config: LstmLmConfig, params: Optional[Dict[str, np.ndarray]] = None):
        """
        初始化模型

        Args:
            config: 模型配置
            params: 已有参数(读取检查点时使用), 为空时按 config.seed 随机初始化
        """
        errors = config.errors()
        if config.vocab_size < 1:
            errors.append("lstm.vocab_size 必须 >= 1")
        if errors:
            raise ConfigError("; ".join(errors))
        self.config = config
        self.hidden_sizes = [config.hidden_dim] * config.layers
        if config.tie_weights:
            self.hidden_sizes[-1] = config.embedding_dim
        self.params: Dict[str, np.ndarray] = params if params is not None else self._init_params()
        self._check_shapes()

    # ------------------------------------------------------------------
    # 参数
    # ------------------------------------------------------------------

    def _param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        cfg = self.config
        shapes: Dict[str, Tuple[int, ...]] = {'embedding': (cfg.vocab_size, cfg.embedding_dim)}
        in_dim = cfg.embedding_dim
        for layer, hidden in enumerate(self.hidden_sizes):
            shapes[f'lstm{layer}.W_x'] = (in_dim, 4 * hidden)
            shapes[f'lstm{layer}.W_h'] = (hidden, 4 * hidden)
            shapes[f'lstm{layer}.b'] = (4 * hidden,)
            in_dim = hidden
        if not cfg.tie_weights:
            shapes['decoder.W'] = (in_dim, cfg.vocab_size)
        shapes['decoder.b'] = (cfg.vocab_size,)
        return shapes

    def _init_params(self) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng(self.config.seed)
        params: Dict[str, np.ndarray] = {}
        for name, shape in self._param_shapes().items():
            if name == 'embedding' or name == 'decoder.W':
                params[name] = rng.uniform(-0.1, 0.1, size=shape)
            elif name.endswith('.b'):
                params[name] = np.zeros(shape)
            else:
                bound = 1.0 / math.sqrt(shape[1] // 4)
                params[name] = rng.uniform(-bound, bound, size=shape)
        return params

    def _check_shapes(self):
        expected = self._param_shapes()
        if list(expected) != list(self.params):
            raise CheckpointError(f"参数名不匹配: {list(self.params)}")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise CheckpointError(f"参数 {name} 形状为 {self.params[name].shape}, 应为 {shape}")

    def parameter_count(self) -> int:
        """参数总数"""
        return int(sum(p.size for p in self.params.values()))

    @property
    def num_layers(self) -> int:
        return self.config.layers

    @property
    def vocab_size(self) -> int:
        return self.config.vocab_size

    @property
    def decoder_weight(self) -> np.ndarray:
        """输出投影 (hidden_top, vocab); 绑定时为嵌入矩阵的转置视图"""
        if self.config.tie_weights:
            return self.params['embedding'].T
        return self.params['decoder.W']

    def zero_state(self, batch: int) -> State:
        """全零初始状态"""
        return [(np.zeros((batch, h)), np.zeros((batch, h))) for h in self.hidden_sizes]

    def sample_masks(self, batch: int, rng: np.random.Generator) -> DropoutMasks:
        """按配置的 dropout 比例采样一个批次的掩码"""
        cfg = self.config
        return DropoutMasks(
            embedding=_inverted_mask(rng, (batch, cfg.embedding_dim), cfg.dropout_embedding),
            hidden=[
                _inverted_mask(rng, (batch, h), cfg.dropout_hidden)
                for h in self.hidden_sizes[:-1]
            ],
            output=_inverted_mask(rng, (batch, self.hidden_sizes[-1]), cfg.dropout_output),
        )

    # ------------------------------------------------------------------
    # 前向
    # ------------------------------------------------------------------

    def _check_ids(self, batch) -> np.ndarray:
        ids = np.asarray(batch, dtype=np.int64)
        if ids.ndim != 2:
            raise LanguageModelError(f"输入应为 [batch × time] 矩阵, 实际维度 {ids.ndim}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise LanguageModelError(f"编号越界, 词表大小 {self.vocab_size}")
        return ids

    def _layer_forward(self, layer: int, inputs: np.ndarray, h: np.ndarray, c: np.ndarray
                       ) -> Tuple[np.ndarray, LayerCache, Tuple[np.ndarray, np.ndarray]]:
        W_x = self.params[f'lstm{layer}.W_x']
        W_h = self.params[f'lstm{layer}.W_h']
        b = self.params[f'lstm{layer}.b']
        hidden = W_h.shape[0]
        batch, steps = inputs.shape[:2]

        pre = inputs @ W_x + b
        shape = (batch, steps, hidden)
        cache = LayerCache(
            inputs=inputs,
            h_prev=np.empty(shape), c_prev=np.empty(shape),
            i=np.empty(shape), f=np.empty(shape), g=np.empty(shape), o=np.empty(shape),
            tanh_c=np.empty(shape),
        )
        outputs = np.empty(shape)
        for t in range(steps):
            cache.h_prev[:, t] = h
            cache.c_prev[:, t] = c
            z = pre[:, t] + h @ W_h
            i = expit(z[:, :hidden])
            f = expit(z[:, hidden:2 * hidden])
            g = np.tanh(z[:, 2 * hidden:3 * hidden])
            o = expit(z[:, 3 * hidden:])
            c = f * c + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            cache.i[:, t], cache.f[:, t], cache.g[:, t], cache.o[:, t] = i, f, g, o
            cache.tanh_c[:, t] = tanh_c
            outputs[:, t] = h
        return outputs, cache, (h, c)

    def run(self, batch, state: Optional[State] = None, masks: Optional[DropoutMasks] = None
            ) -> Tuple[np.ndarray, ForwardCache, State]:
        """
        前向计算 logits 并保留反向传播所需的缓存

        Args:
            batch: 输入编号 [batch × time]
            state: 每层的 (h, c), 为空时取零状态
            masks: dropout 掩码, 为空时不做 dropout

        Returns:
            Tuple[np.ndarray, ForwardCache, State]: (logits, 缓存, 新状态)
        """
        ids = self._check_ids(batch)
        n_batch = ids.shape[0]
        if state is None:
            state = self.zero_state(n_batch)
        if masks is None:
            masks = DropoutMasks(hidden=[None] * (self.num_layers - 1))

        inputs = self.params['embedding'][ids]
        if masks.embedding is not None:
            inputs = inputs * masks.embedding[:, None, :]
        layer_caches: List[LayerCache] = []
        new_state: State = []
        for layer in range(self.num_layers):
            h0, c0 = state[layer]
            outputs, cache, final = self._layer_forward(layer, inputs, h0, c0)
            layer_caches.append(cache)
            new_state.append(final)
            if layer < self.num_layers - 1 and masks.hidden[layer] is not None:
                outputs = outputs * masks.hidden[layer][:, None, :]
            inputs = outputs
        top = inputs
        if masks.output is not None:
            top = top * masks.output[:, None, :]
        logits = top @ self.decoder_weight + self.params['decoder.b']
        return logits, ForwardCache(ids, masks, layer_caches, top), new_state

    def forward(self, batch, state: Optional[State] = None, masks: Optional[DropoutMasks] = None
                ) -> Tuple[np.ndarray, State]:
        """
        前向计算

        Args:
            batch: 输入编号 [batch × time]
            state: 每层的 (h, c)
            masks: dropout 掩码

        Returns:
            Tuple[np.ndarray, State]: (自然对数概率 [batch × time × vocab], 新状态)
        """
        logits, _, new_state = self.run(batch, state, masks)
        return log_softmax(logits, axis=-1), new_state

    # ------------------------------------------------------------------
    # 反向
    # ------------------------------------------------------------------

    def _layer_backward(self, layer: int, cache: LayerCache, d_out: np.ndarray,
                        grads: Dict[str, np.ndarray]) -> np.ndarray:
        W_x = self.params[f'lstm{layer}.W_x']
        W_h = self.params[f'lstm{layer}.W_h']
        hidden = W_h.shape[0]
        batch, steps = d_out.shape[:2]

        dz = np.empty((batch, steps, 4 * hidden))
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            i, f, g, o = cache.i[:, t], cache.f[:, t], cache.g[:, t], cache.o[:, t]
            tanh_c = cache.tanh_c[:, t]
            dh = d_out[:, t] + dh_next
            do = dh * tanh_c
            dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
            dz[:, t, :hidden] = dc * g * i * (1.0 - i)
            dz[:, t, hidden:2 * hidden] = dc * cache.c_prev[:, t] * f * (1.0 - f)
            dz[:, t, 2 * hidden:3 * hidden] = dc * i * (1.0 - g * g)
            dz[:, t, 3 * hidden:] = do * o * (1.0 - o)
            dc_next = dc * f
            dh_next = dz[:, t] @ W_h.T

        grads[f'lstm{layer}.W_h'] += np.einsum('bth,btk->hk', cache.h_prev, dz)
        grads[f'lstm{layer}.W_x'] += np.einsum('bti,btk->ik', cache.inputs, dz)
        grads[f'lstm{layer}.b'] += dz.sum(axis=(0, 1))
        return dz @ W_x.T

    def backward(self, cache: ForwardCache, dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        """
        由 logits 的梯度反向传播到所有参数

        Args:
            cache: run 返回的缓存
            dlogits: 损失对 logits 的梯度 [batch × time × vocab]

        Returns:
            Dict[str, np.ndarray]: 参数名 -> 梯度
        """
        grads = {name: np.zeros_like(p) for name, p in self.params.items()}
        masks = cache.masks
        top = cache.top
        flat_top = top.reshape(-1, top.shape[-1])
        flat_d = dlogits.reshape(-1, self.vocab_size)

        d_decoder = flat_top.T @ flat_d
        if self.config.tie_weights:
            grads['embedding'] += d_decoder.T
        else:
            grads['decoder.W'] += d_decoder
        grads['decoder.b'] += flat_d.sum(axis=0)

        d_out = dlogits @ self.decoder_weight.T
        if masks.output is not None:
            d_out = d_out * masks.output[:, None, :]
        for layer in reversed(range(self.num_layers)):
            d_in = self._layer_backward(layer, cache.layers[layer], d_out, grads)
            if layer > 0:
                if masks.hidden[layer - 1] is not None:
                    d_in = d_in * masks.hidden[layer - 1][:, None, :]
                d_out = d_in
            else:
                if masks.embedding is not None:
                    d_in = d_in * masks.embedding[:, None, :]
                np.add.at(grads['embedding'], cache.ids, d_in)
        return grads

    def loss_and_gradients(self,
                           batch,
                           targets,
                           state: Optional[State] = None,
                           masks: Optional[DropoutMasks] = None,
                           sampler: Optional['SampledSoftmax'] = None,
                           rng: Optional[np.random.Generator] = None
                           ) -> Tuple[float, Dict[str, np.ndarray], State]:
        """
        计算损失(比特/符号)及梯度

        Args:
            batch: 输入编号 [batch × time]
            targets: 目标编号 [batch × time]
            state: 初始状态
            masks: dropout 掩码
            sampler: 采样 softmax, 为空时用完整 softmax
            rng: 采样 softmax 使用的随机数生成器

        Returns:
            Tuple[float, Dict[str, np.ndarray], State]: (损失, 梯度, 新状态)

        Raises:
            NumericalError: 损失不是有限值
        """
        logits, cache, new_state = self.run(batch, state, masks)
        targets = self._check_ids(targets)
        if targets.shape != cache.ids.shape:
            raise LanguageModelError(f"目标形状 {targets.shape} 与输入 {cache.ids.shape} 不一致")
        if sampler is None:
            loss, dlogits = softmax_loss_and_grad(logits, targets)
        else:
            if rng is None:
                raise ConfigError("采样 softmax 需要随机数生成器")
            loss, dlogits = sampler.loss_and_grad(logits, targets, rng)
        if not math.isfinite(loss):
            raise NumericalError(f"损失不是有限值: {loss}")
        return loss, self.backward(cache, dlogits), new_state

    def apply_gradients(self, grads: Dict[str, np.ndarray], lr: float, clip_norm: float = 0.0) -> float:
        """
        SGD 更新, 按全局范数裁剪

        Args:
            grads: 梯度
            lr: 学习率
            clip_norm: 裁剪阈值, 0 表示不裁剪

        Returns:
            float: 裁剪前的全局梯度范数
        """
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if not math.isfinite(norm):
            raise NumericalError(f"梯度范数不是有限值: {norm}")
        scale = clip_norm / norm if clip_norm > 0 and norm > clip_norm else 1.0
        for name, grad in grads.items():
            self.params[name] -= (lr * scale) * grad
        return norm

    def backward_and_step(self,
                          batch,
                          targets,
                          schedule: TrainSchedule,
                          step: int,
                          state: Optional[State] = None,
                          clip_norm: float = 0.25,
                          masks: Optional[DropoutMasks] = None,
                          sampler: Optional['SampledSoftmax'] = None,
                          rng: Optional[np.random.Generator] = None,
                          lr: Optional[float] = None
                          ) -> Tuple[float, float, State]:
        """
        一步训练: 前向、反向、按调度学习率做 SGD 更新

        Args:
            batch: 输入编号
            targets: 目标编号
            schedule: 学习率调度
            step: 当前步数
            state: 上一窗口传下来的状态(不回传梯度)
            clip_norm: 全局梯度裁剪阈值
            masks: dropout 掩码
            sampler: 采样 softmax
            rng: 随机数生成器
            lr: 覆盖调度给出的学习率

        Returns:
            Tuple[float, float, State]: (损失比特数, 梯度范数, 新状态)
        """
        loss, grads, new_state = self.loss_and_gradients(batch, targets, state, masks, sampler, rng)
        rate = schedule.learning_rate(step) if lr is None else lr
        norm = self.apply_gradients(grads, rate, clip_norm)
        return loss, norm, new_state

    # ------------------------------------------------------------------
    # 检查点
    # ------------------------------------------------------------------

    def save(self, path: str):
        """
        写出检查点: key=value 配置行, tensors 描述行, 空行,
        然后按顺序写出小端 float64 原始张量
        """
        header = [f"format={CHECKPOINT_FORMAT}"]
        header += [f"{k}={v}" for k, v in asdict(self.config).items()]
        header.append("tensors=" + ";".join(
            f"{name}:{'x'.join(str(d) for d in p.shape)}" for name, p in self.params.items()
        ))
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        tmp_path = f"{path}.tmp"
        with open(tmp_path, 'wb') as f:
            f.write(("\n".join(header) + "\n\n").encode('utf-8'))
            for p in self.params.values():
                f.write(np.ascontiguousarray(p, dtype='<f8').tobytes())
        os.replace(tmp_path, path)

    @classmethod
    def load(cls, path: str) -> 'LstmLmModel':
        """读取检查点"""
        if not os.path.isfile(path):
            raise CheckpointError(f"检查点不存在: {path}")
        with open(path, 'rb') as f:
            data = f.read()
        head, sep, body = data.partition(b"\n\n")
        if not sep:
            raise CheckpointError(f"检查点缺少表头: {path}")
        try:
            pairs = dict(line.split('=', 1) for line in head.decode('utf-8').split('\n'))
        except (UnicodeDecodeError, ValueError) as e:
            raise CheckpointError(f"检查点表头无法解析: {path}") from e
        if pairs.pop('format', None) != CHECKPOINT_FORMAT:
            raise CheckpointError(f"不是 LSTM 检查点: {path}")

        tensor_spec = pairs.pop('tensors', '')
        hints = typing.get_type_hints(LstmLmConfig)
        values = {}
        for f_ in fields(LstmLmConfig):
            if f_.name not in pairs:
                raise CheckpointError(f"检查点缺少配置项 {f_.name}: {path}")
            values[f_.name] = coerce_value(hints[f_.name], pairs[f_.name], f_.name)
        config = LstmLmConfig(**values)

        params: Dict[str, np.ndarray] = {}
        offset = 0
        for item in tensor_spec.split(';'):
            name, _, dims = item.partition(':')
            shape = tuple(int(d) for d in dims.split('x'))
            count = int(np.prod(shape))
            if offset + count * 8 > len(body):
                raise CheckpointError(f"检查点被截断: {path}")
            params[name] = np.frombuffer(body, dtype='<f8', count=count, offset=offset).reshape(shape).copy()
            offset += count * 8
        if offset != len(body):
            raise CheckpointError(f"检查点尾部有多余数据: {path}")
        return cls(config, params=params)


def init_model(config: LstmLmConfig) -> LstmLmModel:
    """按配置初始化模型(同一 seed 得到逐位相同的参数)"""
    return LstmLmModel(config)


# ---------------------------------------------------------------------------
# 损失
# ---------------------------------------------------------------------------

def sequence_loss(log_probs: np.ndarray, targets) -> float:
    """
    平均交叉熵(比特/位置)

    Args:
        log_probs: 自然对数概率 [... × vocab]
        targets: 目标编号, 形状与 log_probs 去掉最后一维一致

    Returns:
        float: mean(-lg P(target))
    """
    targets = np.asarray(targets, dtype=np.int64)
    if log_probs.shape[:-1] != targets.shape:
        raise LanguageModelError(f"形状不一致: {log_probs.shape} 与 {targets.shape}")
    if targets.size == 0:
        raise LanguageModelError("没有可打分的位置")
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    return float(-picked.mean() / LN2)


def softmax_loss_and_grad(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """完整 softmax 的损失(比特)与 logits 梯度"""
    log_probs = log_softmax(logits, axis=-1)
    loss = sequence_loss(log_probs, targets)
    grad = np.exp(log_probs)
    np.put_along_axis(
        grad, targets[..., None],
        np.take_along_axis(grad, targets[..., None], axis=-1) - 1.0,
        axis=-1
    )
    grad /= targets.size * LN2
    return loss, grad


def inclusion_probabilities(weights: np.ndarray, sample_count: int) -> np.ndarray:
    """
    与权重成比例的包含概率, 和为 sample_count, 超过 1 的单元定为必选

    Args:
        weights: 正权重
        sample_count: 样本数, 不超过单元数

    Returns:
        np.ndarray: 包含概率
    """
    weights = np.asarray(weights, dtype=np.float64)
    pi = np.zeros_like(weights)
    certain = np.zeros(weights.shape, dtype=bool)
    while True:
        free = ~certain
        remaining = sample_count - int(certain.sum())
        if remaining <= 0 or not free.any():
            break
        pi[free] = remaining * weights[free] / weights[free].sum()
        over = free & (pi >= 1.0)
        if not over.any():
            break
        certain |= over
        pi[certain] = 1.0
    pi[certain] = 1.0
    return pi


def systematic_sample(pi: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    不放回的系统抽样: 随机排列后在累积包含概率上等距取点

    Args:
        pi: 包含概率, 和为整数 k
        rng: 随机数生成器

    Returns:
        np.ndarray: 被选中单元的下标(k 个, 互不相同)
    """
    k = int(round(pi.sum()))
    order = rng.permutation(len(pi))
    cumulative = np.cumsum(pi[order])
    points = rng.random() + np.arange(k)
    positions = np.minimum(np.searchsorted(cumulative, points, side='right'), len(pi) - 1)
    return order[positions]


class SampledSoftmax:
    """
    采样 softmax

    每个位置在除目标外的词表上按建议分布抽取 sample_count 个负样本,
    负样本的 logit 减去 ln π 后与目标 logit 一起做 softmax。
    sample_count = vocab_size - 1 时所有负样本必选, 与完整 softmax 相同。
    """

    def __init__(self, proposal: Sequence[float], sample_count: int):
        """
        Args:
            proposal: 建议分布的权重(一元计数加一平滑)
            sample_count: 负样本数, 1 <= sample_count < vocab_size
        """
        self.proposal = np.asarray(proposal, dtype=np.float64)
        vocab_size = len(self.proposal)
        if sample_count >= vocab_size:
            raise ConfigError(
                f"sample_count {sample_count} 不小于词表大小 {vocab_size}, 请使用完整 softmax"
            )
        if sample_count < 1:
            raise ConfigError(f"sample_count 必须 >= 1, 当前为 {sample_count}")
        if np.any(self.proposal <= 0):
            raise ConfigError("建议分布的权重必须为正")
        self.sample_count = sample_count

    @classmethod
    def from_counts(cls, token_ids: np.ndarray, vocab_size: int, sample_count: int) -> 'SampledSoftmax':
        """由训练流的一元计数(加一平滑)构造"""
        counts = np.bincount(np.asarray(token_ids, dtype=np.int64), minlength=vocab_size) + 1.0
        return cls(counts, sample_count)

    def _candidates(self, target: int) -> Tuple[np.ndarray, np.ndarray]:
        """目标以外的候选编号及其包含概率, 不做缓存"""
        others = np.delete(np.arange(len(self.proposal)), target)
        return others, inclusion_probabilities(self.proposal[others], self.sample_count)

    def loss_and_grad(self, logits: np.ndarray, targets: np.ndarray, rng: np.random.Generator
                      ) -> Tuple[float, np.ndarray]:
        """
        采样 softmax 的损失(比特)与 logits 梯度

        Args:
            logits: [batch × time × vocab]
            targets: [batch × time]
            rng: 随机数生成器

        Returns:
            Tuple[float, np.ndarray]: (损失, 梯度; 只有候选位置非零)
        """
        flat_logits = logits.reshape(-1, logits.shape[-1])
        flat_targets = np.asarray(targets, dtype=np.int64).reshape(-1)
        n = flat_targets.size
        if n == 0:
            raise LanguageModelError("没有可打分的位置")
        grad = np.zeros_like(flat_logits)
        total = 0.0
        # 按目标分组, 同一目标的包含概率只算一次且用完即弃
        current = -1
        others = pi = None
        for row in np.argsort(flat_targets, kind='stable'):
            target = int(flat_targets[row])
            if target != current:
                others, pi = self._candidates(target)
                current = target
            chosen = systematic_sample(pi, rng)
            negatives = others[chosen]
            corrected = np.concatenate((
                flat_logits[row, target:target + 1],
                flat_logits[row, negatives] - np.log(pi[chosen])
            ))
            log_p = log_softmax(corrected)
            total -= log_p[0]
            p = np.exp(log_p)
            grad[row, target] += p[0] - 1.0
            grad[row, negatives] += p[1:]
        grad /= n * LN2
        return total / (n * LN2), grad.reshape(logits.shape)

    def loss(self, logits: np.ndarray, targets: np.ndarray, rng: np.random.Generator) -> float:
        """只计算损失"""
        return self.loss_and_grad(logits, targets, rng)[0]


def sampled_softmax_loss(model: LstmLmModel,
                         batch,
                         targets,
                         sample_count: int,
                         proposal: Sequence[float],
                         rng: np.random.Generator,
                         state: Optional[State] = None) -> float:
    """
    采样 softmax 损失(比特/位置)

    Args:
        model: 模型
        batch: 输入编号
        targets: 目标编号
        sample_count: 负样本数
        proposal: 建议分布权重
        rng: 随机数生成器
        state: 初始状态

    Returns:
        float: 损失
    """
    logits, _, _ = model.run(batch, state)
    return SampledSoftmax(proposal, sample_count).loss(logits, np.asarray(targets), rng)
