"""
运行清单
记录一次命令运行的输入哈希、配置、种子与版本, 不含时间戳
"""

import os
from typing import Any, Dict, List, Sequence

from pydantic import BaseModel, Field

from utils.fileio import sha256_file, write_lines

TOOL_VERSION = "1.0.0"


class InputRecord(BaseModel):
    """输入文件及其内容哈希"""
    path: str
    sha256: str


class RunManifest(BaseModel):
    """命令运行清单"""
    command: str
    tool_version: str = TOOL_VERSION
    seed: int
    config: Dict[str, Any]
    inputs: List[InputRecord] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)

    @classmethod
    def build(cls,
              command: str,
              seed: int,
              config: Dict[str, Any],
              inputs: Sequence[str],
              outputs: Sequence[str]) -> 'RunManifest':
        """
        构建清单

        Args:
            command: 子命令名
            seed: 随机种子
            config: 完整配置
            inputs: 输入文件路径(计算 SHA-256)
            outputs: 输出文件名

        Returns:
            RunManifest: 清单
        """
        return cls(
            command=command,
            seed=seed,
            config=config,
            inputs=[InputRecord(path=p, sha256=sha256_file(p)) for p in inputs if p and os.path.isfile(p)],
            outputs=list(outputs),
        )

    def write(self, path: str):
        """写出 JSON 清单"""
        write_lines(path, [self.model_dump_json(indent=2)])
