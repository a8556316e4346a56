"""
训练调度
倾斜三角学习率(STLR)与随机长度的 BPTT 窗口
"""

import math
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigError


@dataclass(frozen=True)
class TrainSchedule:
    """倾斜三角学习率调度"""
    total_steps: int
    lr_max: float
    cut_frac: float = 0.1
    ratio: float = 32.0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError(f"total_steps 必须 >= 1, 当前为 {self.total_steps}")
        if self.lr_max <= 0:
            raise ConfigError(f"lr_max 必须为正数, 当前为 {self.lr_max}")
        if not 0.0 < self.cut_frac < 1.0:
            raise ConfigError(f"cut_frac 必须在 (0, 1) 之间, 当前为 {self.cut_frac}")
        if self.ratio <= 1.0:
            raise ConfigError(f"ratio 必须 > 1, 当前为 {self.ratio}")

    @property
    def cut(self) -> int:
        """峰值所在步数, 至少为 1"""
        return max(1, math.floor(self.cut_frac * self.total_steps))

    def learning_rate(self, step: int) -> float:
        """
        第 step 步的学习率

        Args:
            step: 0 <= step <= total_steps

        Returns:
            float: 学习率, 两端为 lr_max/ratio, cut 处为 lr_max
        """
        if not 0 <= step <= self.total_steps:
            raise ConfigError(f"step 越界: {step} (total_steps {self.total_steps})")
        cut = self.cut
        if step < cut:
            p = step / cut
        else:
            p = 1.0 - (step - cut) / (cut * (1.0 / self.cut_frac - 1.0))
        p = max(p, 0.0)
        return self.lr_max * (1.0 + p * (self.ratio - 1.0)) / self.ratio


def stlr(step: int, schedule: TrainSchedule) -> float:
    """倾斜三角学习率"""
    return schedule.learning_rate(step)


def random_bptt_length(bptt_len: int, rng: np.random.Generator) -> int:
    """
    随机 BPTT 窗口长度

    以 0.95 的概率取 bptt_len, 否则取 bptt_len/2, 再加 σ=5 的高斯扰动,
    截断到 [5, 2·bptt_len](bptt_len < 5 时下限为 bptt_len)。

    Args:
        bptt_len: 基准窗口长度
        rng: 随机数生成器

    Returns:
        int: 本次窗口长度
    """
    if bptt_len < 1:
        raise ConfigError(f"bptt_len 必须 >= 1, 当前为 {bptt_len}")
    base = bptt_len if rng.random() < 0.95 else bptt_len / 2
    length = int(round(rng.normal(base, 5.0)))
    return int(min(max(length, min(5, bptt_len)), 2 * bptt_len))
