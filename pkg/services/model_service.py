"""
语言模型服务
定义所有语言模型后端(n-gram、LSTM)共用的接口
"""

from abc import ABC, abstractmethod
from typing import Collection, List, Sequence

from config.tokens import EOS


class BaseLanguageModel(ABC):
    """
    语言模型基类

    所有概率以 2 为底取对数。<s> 只作为条件上下文, 从不被打分;
    每句话末尾预测一次 </s>。
    """

    @property
    @abstractmethod
    def vocabulary(self) -> Collection[str]:
        """可被打分的符号集合"""
        pass

    @abstractmethod
    def log_prob(self, context: Sequence[str], token: str) -> float:
        """
        条件对数概率 lg P(token | context)

        Args:
            context: 前文符号(不含 <s> 填充)
            token: 待预测符号

        Returns:
            float: 以 2 为底的对数概率
        """
        pass

    def sequence_log_prob(self, s: Sequence[str]) -> float:
        """
        整句对数概率: 逐位置打分并在末尾预测 </s>

        Args:
            s: 符号序列(不含 <s> 与 </s>)

        Returns:
            float: lg q(s)
        """
        total = 0.0
        history = list(s)
        for i, token in enumerate(history):
            total += self.log_prob(history[:i], token)
        total += self.log_prob(history, EOS)
        return total

    def sentence_log_probs(self, sentences: Sequence[Sequence[str]]) -> List[float]:
        """逐句打分, 子类可以批量实现"""
        return [self.sequence_log_prob(s) for s in sentences]
