"""
异常定义
工具包内所有错误的层次结构, 每类错误对应一个命令行退出码
"""


class LMToolkitError(Exception):
    """工具包异常基类"""

    exit_code = 1


class UsageError(LMToolkitError):
    """用法错误(参数、命令)"""

    exit_code = 1


class ConfigError(UsageError):
    """配置错误"""
    pass


class DataError(LMToolkitError):
    """数据错误(输入文件、模型文件)"""

    exit_code = 2


class CorpusError(DataError):
    """语料读取错误"""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        if path or line:
            message = f"{message} ({path or '<stream>'}:{line})"
        super().__init__(message)


class MalformedInputError(DataError):
    """输入格式不合法(例如无法逆变换的 <up> 序列)"""
    pass


class SubwordError(DataError):
    """子词模型错误"""
    pass


class LanguageModelError(DataError):
    """语言模型错误"""
    pass


class CheckpointError(DataError):
    """检查点文件错误"""
    pass


class NumericalError(LMToolkitError):
    """数值错误(非有限损失、困惑度双路径校验失败)"""

    exit_code = 3
