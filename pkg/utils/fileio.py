"""
文件读写工具
语料按行读取(UTF-8 校验带行号)、原子写出、内容哈希
"""

import os
import hashlib
from typing import Iterable, Iterator, List

from core.errors import CorpusError


def read_lines(path: str) -> Iterator[str]:
    """
    逐行读取 UTF-8 文本, 去掉行尾换行符

    Args:
        path: 文件路径

    Returns:
        Iterator[str]: 行内容

    Raises:
        CorpusError: 文件不存在或某行不是合法 UTF-8
    """
    if not os.path.isfile(path):
        raise CorpusError("文件不存在", path=path)
    with open(path, 'rb') as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode('utf-8')
            except UnicodeDecodeError as e:
                raise CorpusError(f"非法 UTF-8 编码: {e.reason}", path=path, line=line_no) from e
            yield line.rstrip('\r\n')


def read_sentences(path: str) -> Iterator[List[str]]:
    """
    读取语料: 每行一句, 空白分隔词元

    Args:
        path: 语料路径

    Returns:
        Iterator[List[str]]: 句子流
    """
    for line in read_lines(path):
        yield line.split()


def write_lines(path: str, lines: Iterable[str]) -> int:
    """
    原子写出文本(先写临时文件再替换)

    Args:
        path: 目标路径
        lines: 行内容(不含换行符)

    Returns:
        int: 写出的行数
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    count = 0
    with open(tmp_path, 'w', encoding='utf-8', newline='\n') as f:
        for line in lines:
            f.write(line)
            f.write('\n')
            count += 1
    os.replace(tmp_path, path)
    return count


def write_sentences(path: str, sentences: Iterable[List[str]]) -> int:
    """写出句子流, 词元之间单个空格"""
    return write_lines(path, (' '.join(s) for s in sentences))


def sha256_file(path: str) -> str:
    """计算文件内容的 SHA-256"""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()
