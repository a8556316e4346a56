"""
语言模型服务包

提供子词符号上的不同语言模型实现与网格实验调度
"""

from .model_service import BaseLanguageModel
from .ngram_service import KneserNeyModel, train_kn
from .lstm_service import LstmLanguageModel, LstmTrainer, train_lstm
from .sweep_service import SweepRunner

__all__ = [
    'BaseLanguageModel',
    'KneserNeyModel',
    'train_kn',
    'LstmLanguageModel',
    'LstmTrainer',
    'train_lstm',
    'SweepRunner',
]
