"""
配置管理模块
管理工具包的所有可配置参数

优先级由低到高: 数据类默认值 -> config/config.json -> key=value 配置文件
-> 命令行 --set key=value -> 专用命令行参数
"""

import os
import json
import threading
import typing
from dataclasses import dataclass, asdict, field, fields, is_dataclass
from typing import Any, Dict, List, Tuple

from dotenv import load_dotenv

from core.errors import ConfigError

# 加载环境变量
load_dotenv()

TRUE_VALUES = {'1', 'true', 'yes', 'on'}
FALSE_VALUES = {'0', 'false', 'no', 'off'}


@dataclass
class CorpusConfig:
    """语料配置"""
    train_path: str = ""  # 训练语料
    test_path: str = ""  # 测试语料(可选)
    min_count: int = 3  # 词表频次阈值
    case_transform: bool = False  # 是否做 <up> 大小写变换
    oov_policy: str = "replace"  # replace 或 remove

    def errors(self) -> List[str]:
        errors = []
        if self.min_count < 1:
            errors.append("corpus.min_count 必须 >= 1")
        if self.oov_policy not in ('replace', 'remove'):
            errors.append("corpus.oov_policy 必须是 'replace' 或 'remove'")
        return errors


@dataclass
class TokenizerConfig:
    """子词模型配置"""
    vocab_size: int = 4000  # 含控制符号
    max_piece_len: int = 8
    seed_multiplier: int = 25  # 候选集大小 = seed_multiplier × vocab_size
    min_frequency: int = 2
    shrink: float = 0.75
    em_iterations: int = 2

    def errors(self) -> List[str]:
        errors = []
        if self.vocab_size < 5:
            errors.append("tokenizer.vocab_size 必须 >= 5")
        if self.max_piece_len < 1:
            errors.append("tokenizer.max_piece_len 必须 >= 1")
        if self.seed_multiplier < 1:
            errors.append("tokenizer.seed_multiplier 必须 >= 1")
        if self.min_frequency < 1:
            errors.append("tokenizer.min_frequency 必须 >= 1")
        if not 0 < self.shrink < 1:
            errors.append("tokenizer.shrink 必须在 (0, 1) 之间")
        if self.em_iterations < 1:
            errors.append("tokenizer.em_iterations 必须 >= 1")
        return errors


@dataclass
class NgramConfig:
    """n-gram 模型配置"""
    order: int = 3
    discount: float = 0.75

    def errors(self) -> List[str]:
        errors = []
        if self.order < 1:
            errors.append("ngram.order 必须 >= 1")
        if not 0 < self.discount < 1:
            errors.append("ngram.discount 必须在 (0, 1) 之间")
        return errors


@dataclass
class LstmLmConfig:
    """LSTM 语言模型配置"""
    layers: int = 4
    embedding_dim: int = 400
    hidden_dim: int = 1150
    vocab_size: int = 0  # 训练时由子词模型决定
    bptt_len: int = 70
    dropout_embedding: float = 0.1
    dropout_hidden: float = 0.25
    dropout_output: float = 0.4
    tie_weights: bool = True
    seed: int = 0

    def errors(self) -> List[str]:
        errors = []
        if self.layers < 1:
            errors.append("lstm.layers 必须 >= 1")
        for name in ('embedding_dim', 'hidden_dim', 'bptt_len'):
            if getattr(self, name) < 1:
                errors.append(f"lstm.{name} 必须 >= 1")
        if self.vocab_size < 0:
            errors.append("lstm.vocab_size 不能为负数")
        for name in ('dropout_embedding', 'dropout_hidden', 'dropout_output'):
            if not 0 <= getattr(self, name) < 1:
                errors.append(f"lstm.{name} 必须在 [0, 1) 之间")
        return errors


@dataclass
class TrainingConfig:
    """语言模型训练配置"""
    lm_kind: str = "ngram"  # ngram 或 lstm
    epochs: int = 12
    batch_size: int = 20
    lr_max: float = 20.0
    cut_frac: float = 0.1
    ratio: float = 32.0
    clip_norm: float = 0.25
    sampled_softmax: int = 0  # 负样本数, 0 表示完整 softmax
    data_fraction: float = 1.0  # 使用打乱后训练流的前缀比例
    valid_tokens: int = 10000  # 验证集目标子词数

    def errors(self) -> List[str]:
        errors = []
        if self.lm_kind not in ('ngram', 'lstm'):
            errors.append("training.lm_kind 必须是 'ngram' 或 'lstm'")
        if self.epochs < 1:
            errors.append("training.epochs 必须 >= 1")
        if self.batch_size < 1:
            errors.append("training.batch_size 必须 >= 1")
        if self.lr_max <= 0:
            errors.append("training.lr_max 必须为正数")
        if not 0 < self.cut_frac < 1:
            errors.append("training.cut_frac 必须在 (0, 1) 之间")
        if self.ratio <= 1:
            errors.append("training.ratio 必须 > 1")
        if self.clip_norm < 0:
            errors.append("training.clip_norm 不能为负数")
        if self.sampled_softmax < 0:
            errors.append("training.sampled_softmax 不能为负数")
        if not 0 < self.data_fraction <= 1:
            errors.append("training.data_fraction 必须在 (0, 1] 之间")
        if self.valid_tokens < 0:
            errors.append("training.valid_tokens 不能为负数")
        return errors


@dataclass
class EvaluationConfig:
    """评估配置"""
    token_count_policy: str = "with_eos"  # with_eos 或 words_only

    def errors(self) -> List[str]:
        if self.token_count_policy not in ('with_eos', 'words_only'):
            return ["evaluation.token_count_policy 必须是 'with_eos' 或 'words_only'"]
        return []


@dataclass
class SweepConfig:
    """网格实验配置(词表大小 × 层数)"""
    vocab_sizes: List[int] = field(default_factory=lambda: [
        400, 800, 1200, 1600, 2000, 2500, 5000, 10000
    ])
    layers: List[int] = field(default_factory=lambda: [3, 4, 5])
    epochs: int = 12
    workers: int = 1
    sampled_softmax_min_vocab: int = 2500  # 达到该词表大小时改用采样 softmax
    sampled_softmax_ratio: float = 0.6  # 负样本数 = round(ratio × 词表大小)

    def errors(self) -> List[str]:
        errors = []
        if not self.vocab_sizes:
            errors.append("sweep.vocab_sizes 不能为空")
        if not self.layers:
            errors.append("sweep.layers 不能为空")
        if any(v < 5 for v in self.vocab_sizes):
            errors.append("sweep.vocab_sizes 中的值必须 >= 5")
        if any(n < 1 for n in self.layers):
            errors.append("sweep.layers 中的值必须 >= 1")
        if self.epochs < 1:
            errors.append("sweep.epochs 必须 >= 1")
        if self.workers < 1:
            errors.append("sweep.workers 必须 >= 1")
        if not 0 < self.sampled_softmax_ratio < 1:
            errors.append("sweep.sampled_softmax_ratio 必须在 (0, 1) 之间")
        return errors


@dataclass
class RunConfig:
    """一次命令运行的完整配置"""
    work_dir: str = field(default_factory=lambda: os.getenv('SUBWORD_LM_WORK_DIR', 'work'))
    seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    ngram: NgramConfig = field(default_factory=NgramConfig)
    lstm: LstmLmConfig = field(default_factory=LstmLmConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


def coerce_value(field_type: Any, raw: Any, key: str = "") -> Any:
    """
    把字符串(或 JSON 值)转换为字段类型

    Args:
        field_type: 数据类字段的类型注解
        raw: 原始值
        key: 用于报错的键名

    Returns:
        Any: 转换后的值

    Raises:
        ConfigError: 无法转换
    """
    try:
        if typing.get_origin(field_type) in (list, List):
            (item_type,) = typing.get_args(field_type)
            if isinstance(raw, str):
                items = [x for x in raw.replace(' ', '').split(',') if x]
            else:
                items = list(raw)
            return [coerce_value(item_type, x, key) for x in items]
        if field_type is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text in TRUE_VALUES:
                return True
            if text in FALSE_VALUES:
                return False
            raise ValueError(raw)
        if field_type is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if field_type is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"配置项 {key} 的值无法解析: {raw!r}") from e


def parse_key_value_lines(lines: List[str], source: str = "<args>") -> Dict[str, str]:
    """
    解析 key=value 行, 忽略空行与 # 注释

    Args:
        lines: 文本行
        source: 用于报错的来源

    Returns:
        Dict[str, str]: 点分键 -> 字符串值
    """
    pairs: Dict[str, str] = {}
    for line_no, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith('#'):
            continue
        key, sep, value = text.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f"配置行格式应为 key=value ({source}:{line_no})")
        pairs[key.strip()] = value.strip()
    return pairs


class ConfigManager:
    """配置管理器"""

    def __init__(self, config_file: str = "config/config.json"):
        """初始化配置管理器"""
        self.config_file = config_file
        self.lock = threading.Lock()
        self.config = self._load_config()

    def _load_config(self) -> RunConfig:
        """加载 JSON 默认配置, 文件不存在时使用数据类默认值"""
        with self.lock:
            if not os.path.exists(self.config_file):
                return RunConfig()
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"加载配置文件失败: {self.config_file}: {e}") from e
            return self._dict_to_config(data)

    def _dict_to_config(self, data: Dict) -> RunConfig:
        """将嵌套字典转换为配置对象"""
        config = RunConfig()
        self._merge(config, data, prefix="")
        return config

    def _merge(self, target: Any, data: Dict, prefix: str):
        hints = typing.get_type_hints(type(target))
        for key, value in data.items():
            dotted = f"{prefix}{key}"
            if key not in hints:
                raise ConfigError(f"未知配置项: {dotted}")
            current = getattr(target, key)
            if is_dataclass(current):
                if not isinstance(value, dict):
                    raise ConfigError(f"配置项 {dotted} 应为对象")
                self._merge(current, value, prefix=f"{dotted}.")
            else:
                setattr(target, key, coerce_value(hints[key], value, dotted))

    def load_overrides_file(self, path: str):
        """
        应用 key=value 配置文件

        Args:
            path: 配置文件路径
        """
        if not os.path.isfile(path):
            raise ConfigError(f"配置文件不存在: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            pairs = parse_key_value_lines(f.read().splitlines(), source=path)
        self.apply_overrides(pairs)

    def apply_overrides(self, pairs: Dict[str, Any]):
        """
        按点分键覆盖配置, 例如 tokenizer.vocab_size=4000

        Args:
            pairs: 点分键 -> 值
        """
        with self.lock:
            for dotted, value in pairs.items():
                *path, leaf = dotted.split('.')
                target: Any = self.config
                for part in path:
                    if not hasattr(target, part) or not is_dataclass(getattr(target, part)):
                        raise ConfigError(f"未知配置项: {dotted}")
                    target = getattr(target, part)
                hints = typing.get_type_hints(type(target))
                if leaf not in hints or is_dataclass(getattr(target, leaf)):
                    raise ConfigError(f"未知配置项: {dotted}")
                setattr(target, leaf, coerce_value(hints[leaf], value, dotted))

    def validate_config(self) -> Tuple[bool, List[str]]:
        """
        验证配置是否有效

        Returns:
            tuple[bool, list]: (是否有效, 错误信息列表)
        """
        errors: List[str] = []
        for f in fields(self.config):
            section = getattr(self.config, f.name)
            if is_dataclass(section):
                errors.extend(section.errors())
        return len(errors) == 0, errors

    def to_dict(self) -> Dict[str, Any]:
        """配置的字典形式(写入运行清单)"""
        return asdict(self.config)

    def save_config(self, path: str = ""):
        """保存配置为 JSON"""
        target = path or self.config_file
        with self.lock:
            directory = os.path.dirname(target)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(target, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=4, ensure_ascii=False)
