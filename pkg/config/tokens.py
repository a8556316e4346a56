"""
控制符号配置
定义词级与子词级词表共用的控制符号
"""

from enum import Enum
from typing import Tuple


class ControlToken(Enum):
    """控制符号枚举"""
    UNK = "<unk>"
    BOS = "<s>"
    EOS = "</s>"
    PAD = "<pad>"
    UP = "<up>"


UNK = ControlToken.UNK.value
BOS = ControlToken.BOS.value
EOS = ControlToken.EOS.value
PAD = ControlToken.PAD.value
UP = ControlToken.UP.value

# 词级词表 W 的控制符号
WORD_CONTROL_TOKENS: Tuple[str, ...] = (UNK, BOS, EOS)

# 子词词表 V 的控制符号(多一个 <pad>)
SUBWORD_CONTROL_TOKENS: Tuple[str, ...] = (UNK, BOS, EOS, PAD)

# 词首标记 U+2581
WORD_BOUNDARY = "▁"


def is_control_token(token: str) -> bool:
    """
    判断是否为控制符号

    Args:
        token: 待检查的符号

    Returns:
        bool: 是否为控制符号
    """
    return token in _ALL_CONTROL


_ALL_CONTROL = frozenset(t.value for t in ControlToken)
