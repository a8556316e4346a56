"""
子词语言模型工具包核心模块 (Subword LM Toolkit Core Module)

本模块把各组件串成完整流水线:
1. preprocess: 计数 -> 词表 -> 去重 -> (可选)大小写变换 -> OOV 处理
2. train-tokenizer: 在去重语料上训练一元子词模型
3. encode / decode: 子词编码与解码
4. train-lm: 训练 n-gram 或 LSTM 语言模型
5. eval: 子词困惑度与词级困惑度(双路径校验)
6. sweep: 词表大小 × 层数 网格实验
7. stats: 语料统计表

主要组件:
- SubwordLMPipeline类: 持有配置与工作目录, 每个子命令对应一个 cmd_* 方法
- main(): 命令行入口, 把异常转换为退出码(0 成功, 1 用法, 2 数据, 3 数值)

每个命令都会在工作目录写出 <command>.manifest.json。
"""

import os
import sys
import time
import logging
import argparse
from dataclasses import asdict, replace
from typing import Dict, List, Optional, Sequence, Tuple

from config.settings import ConfigManager, RunConfig, parse_key_value_lines
from config.tokens import BOS, PAD, UP
from core.corpus import (
    CorpusStats, OovPolicy, Sentence, Vocabulary, apply_case_transform, build_vocab,
    corpus_stats, count_tokens, deduplicate, format_stats_table, invert_case_transform, replace_oov,
    shuffle_sentences, split_train_valid
)
from core.errors import CorpusError, LMToolkitError, UsageError
from core.evaluation import EvalReport, TokenCountPolicy, oov_rate, overlap_stats, word_level_perplexity
from core.lstm import LstmLmModel
from core.subword import SubwordModel, UnigramTrainer
from services import BaseLanguageModel, KneserNeyModel, LstmLanguageModel, SweepRunner, train_kn, train_lstm
from utils.fileio import read_lines, read_sentences, write_lines, write_sentences
from utils.logger import logger
from utils.manifest import TOOL_VERSION, RunManifest

DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'config', 'config.json')


class SubwordLMPipeline:
    """
    子词语言模型流水线

    属性:
        manager: 配置管理器(preprocess 用它把本次配置存入工作目录)
        config: 本次运行的完整配置
        work_dir: 所有中间文件与输出的目录
    """

    VOCAB = 'vocab.tsv'
    TRAIN_DEDUP = 'train.dedup.txt'
    TRAIN_CLEAN = 'train.clean.txt'
    TEST_CLEAN = 'test.clean.txt'
    VALID_CLEAN = 'valid.clean.txt'
    VALID_DEDUP = 'valid.dedup.txt'
    TOKENIZER = 'tokenizer.model'
    TRAIN_ENC = 'train.enc.txt'
    VALID_ENC = 'valid.enc.txt'
    TEST_ENC = 'test.enc.txt'
    NGRAM_MODEL = 'lm.ngram'
    LSTM_MODEL = 'lm.ckpt'
    LSTM_LOG = 'lm.log.tsv'
    RUN_CONFIG = 'run.config.json'

    def __init__(self, manager: ConfigManager):
        """初始化流水线"""
        self.manager = manager
        self.config: RunConfig = manager.config
        self.work_dir = self.config.work_dir
        os.makedirs(self.work_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.work_dir, name)

    def _require(self, name: str, producer: str) -> str:
        path = self.path(name)
        if not os.path.isfile(path):
            raise CorpusError(f"缺少 {name}, 请先运行 {producer}", path=path)
        return path

    def _write_manifest(self, command: str, inputs: Sequence[str], outputs: Sequence[str]):
        RunManifest.build(
            command=command,
            seed=self.config.seed,
            config=asdict(self.config),
            inputs=inputs,
            outputs=outputs,
        ).write(self.path(f'{command}.manifest.json'))

    @property
    def user_symbols(self) -> Tuple[str, ...]:
        return (UP,) if self.config.corpus.case_transform else ()

    def _clean(self, sentences: Sequence[Sentence], vocab: Vocabulary) -> List[Sentence]:
        """与训练集相同的处理: (可选)大小写变换, 再按策略处理 OOV"""
        policy = OovPolicy(self.config.corpus.oov_policy)
        out = []
        for sentence in sentences:
            if self.config.corpus.case_transform:
                sentence = apply_case_transform(sentence)
            out.append(replace_oov(sentence, vocab, policy))
        return out

    # ------------------------------------------------------------------
    # 子命令
    # ------------------------------------------------------------------

    def cmd_preprocess(self) -> Dict[str, str]:
        """
        预处理训练语料(与可选的测试语料)

        Returns:
            Dict[str, str]: 输出名 -> 路径
        """
        start_time = time.time()
        corpus = self.config.corpus
        if not corpus.train_path:
            raise UsageError("未指定训练语料 (corpus.train_path / --train)")
        sentences = list(read_sentences(corpus.train_path))
        if not any(sentences):
            raise CorpusError("训练语料为空", path=corpus.train_path)

        vocab = build_vocab(count_tokens(sentences), corpus.min_count)
        vocab.save(self.path(self.VOCAB))

        dedup = list(deduplicate(sentences))
        if corpus.case_transform:
            dedup = [apply_case_transform(s) for s in dedup]
        write_sentences(self.path(self.TRAIN_DEDUP), dedup)

        policy = OovPolicy(corpus.oov_policy)
        write_sentences(self.path(self.TRAIN_CLEAN), (replace_oov(s, vocab, policy) for s in dedup))
        outputs = [self.VOCAB, self.TRAIN_DEDUP, self.TRAIN_CLEAN]

        inputs = [corpus.train_path]
        if corpus.test_path:
            test = list(read_sentences(corpus.test_path))
            write_sentences(self.path(self.TEST_CLEAN), self._clean(test, vocab))
            outputs.append(self.TEST_CLEAN)
            inputs.append(corpus.test_path)

        # 后续命令以此为默认配置
        self.manager.save_config(self.path(self.RUN_CONFIG))
        outputs.append(self.RUN_CONFIG)

        self._write_manifest('preprocess', inputs, outputs)
        logger.info(
            "预处理完成",
            module='pipeline',
            details={'sentences': len(sentences), 'dedup': len(dedup), 'vocab': len(vocab)}
        )
        logger.performance('preprocess', time.time() - start_time, sentences=len(sentences))
        return {name: self.path(name) for name in outputs}

    def cmd_train_tokenizer(self) -> str:
        """在去重语料上训练子词模型"""
        start_time = time.time()
        source = self._require(self.TRAIN_DEDUP, 'preprocess')
        cfg = self.config.tokenizer
        trainer = UnigramTrainer(
            cfg.vocab_size,
            max_piece_len=cfg.max_piece_len,
            seed_multiplier=cfg.seed_multiplier,
            min_frequency=cfg.min_frequency,
            shrink=cfg.shrink,
            em_iterations=cfg.em_iterations,
            user_symbols=self.user_symbols,
        )
        model = trainer.train(read_sentences(source))
        model.save(self.path(self.TOKENIZER))
        self._write_manifest('train-tokenizer', [source], [self.TOKENIZER])
        logger.performance('train_tokenizer', time.time() - start_time, vocab_size=model.size)
        return self.path(self.TOKENIZER)

    def load_tokenizer(self) -> SubwordModel:
        return SubwordModel.load(self._require(self.TOKENIZER, 'train-tokenizer'))

    def cmd_encode(self, input_path: Optional[str] = None, output_path: Optional[str] = None) -> List[str]:
        """
        编码语料

        指定 input_path 时把该文件逐行编码到 output_path;
        否则编码预处理后的训练集(打乱并切出验证集)与测试集。

        Returns:
            List[str]: 写出的文件
        """
        start_time = time.time()
        subword = self.load_tokenizer()
        if input_path:
            if not output_path:
                raise UsageError("encode --input 需要同时指定 --output")
            write_lines(output_path, (' '.join(subword.encode_as_pieces(line)) for line in read_lines(input_path)))
            self._write_manifest('encode', [input_path, self.path(self.TOKENIZER)], [output_path])
            return [output_path]

        source = self._require(self.TRAIN_CLEAN, 'preprocess')
        dedup_source = self._require(self.TRAIN_DEDUP, 'preprocess')
        words = list(read_sentences(source))
        dedup = list(read_sentences(dedup_source))
        # train.clean.txt 与 train.dedup.txt 逐行对应
        if len(dedup) != len(words):
            raise CorpusError(f"{self.TRAIN_CLEAN} 与 {self.TRAIN_DEDUP} 行数不一致, 请重新运行 preprocess")
        triples = [(s, subword.encode_as_pieces(s), d) for s, d in zip(words, dedup)]
        triples = shuffle_sentences(triples, self.config.seed)
        train_triples, valid_triples = split_train_valid(
            triples, self.config.training.valid_tokens, token_count=lambda t: len(t[1])
        )
        write_sentences(self.path(self.TRAIN_ENC), (t[1] for t in train_triples))
        write_sentences(self.path(self.VALID_ENC), (t[1] for t in valid_triples))
        write_sentences(self.path(self.VALID_CLEAN), (t[0] for t in valid_triples))
        write_sentences(self.path(self.VALID_DEDUP), (t[2] for t in valid_triples))
        outputs = [self.TRAIN_ENC, self.VALID_ENC, self.VALID_CLEAN, self.VALID_DEDUP]
        inputs = [source, dedup_source, self.path(self.TOKENIZER)]

        test_path = self.path(self.TEST_CLEAN)
        if os.path.isfile(test_path):
            write_sentences(self.path(self.TEST_ENC), (subword.encode_as_pieces(s) for s in read_sentences(test_path)))
            outputs.append(self.TEST_ENC)
            inputs.append(test_path)

        self._write_manifest('encode', inputs, outputs)
        logger.performance('encode', time.time() - start_time, sentences=len(words))
        return [self.path(name) for name in outputs]

    def cmd_decode(self, input_path: str, output_path: str) -> str:
        """把子词文件解码回词级句子"""
        if not input_path or not output_path:
            raise UsageError("decode 需要 --input 与 --output")
        subword = self.load_tokenizer()
        write_lines(output_path, (' '.join(subword.decode_pieces(line.split())) for line in read_lines(input_path)))
        self._write_manifest('decode', [input_path, self.path(self.TOKENIZER)], [output_path])
        return output_path

    def _read_ids(self, name: str, subword: SubwordModel) -> List[List[int]]:
        path = self._require(name, 'encode')
        out = []
        for line_no, pieces in enumerate(read_sentences(path), start=1):
            try:
                out.append([subword.piece_to_id[p] for p in pieces])
            except KeyError as e:
                raise CorpusError(f"未知子词 {e.args[0]!r}", path=path, line=line_no) from e
        return out

    def cmd_train_lm(self) -> str:
        """
        训练语言模型(training.lm_kind 为 ngram 或 lstm)

        Returns:
            str: 模型文件路径
        """
        start_time = time.time()
        kind = self.config.training.lm_kind
        subword = self.load_tokenizer()
        train_path = self._require(self.TRAIN_ENC, 'encode')
        if kind == 'ngram':
            support = [p for p in subword.id_to_piece if p not in (BOS, PAD)]
            model = train_kn(read_sentences(train_path), self.config.ngram.order,
                             self.config.ngram.discount, vocabulary=support)
            model.save(self.path(self.NGRAM_MODEL))
            outputs = [self.NGRAM_MODEL]
        elif kind == 'lstm':
            lstm_config = replace(self.config.lstm, vocab_size=subword.size, seed=self.config.seed)
            train_lstm(
                lstm_config, self.config.training, subword,
                self._read_ids(self.TRAIN_ENC, subword),
                self._read_ids(self.VALID_ENC, subword),
                seed=self.config.seed,
                checkpoint_path=self.path(self.LSTM_MODEL),
                log_path=self.path(self.LSTM_LOG),
            )
            outputs = [self.LSTM_MODEL, self.LSTM_LOG]
        else:
            raise UsageError(f"未知的语言模型类型: {kind}")
        self._write_manifest('train-lm', [train_path, self.path(self.TOKENIZER)], outputs)
        logger.performance('train_lm', time.time() - start_time, kind=kind)
        return self.path(outputs[0])

    def default_model_path(self) -> str:
        name = self.NGRAM_MODEL if self.config.training.lm_kind == 'ngram' else self.LSTM_MODEL
        return self.path(name)

    def load_language_model(self, subword: SubwordModel, model_path: Optional[str] = None) -> BaseLanguageModel:
        """按 training.lm_kind 读取语言模型"""
        path = model_path or self._require(os.path.basename(self.default_model_path()), 'train-lm')
        if self.config.training.lm_kind == 'ngram':
            return KneserNeyModel.load(path)
        return LstmLanguageModel(LstmLmModel.load(path), subword)

    def _read_raw(self, path: str) -> Optional[List[Sentence]]:
        """读取原始语料, 未配置或文件不存在时返回 None"""
        if not path:
            return None
        if not os.path.isfile(path):
            logger.warning("原始语料不存在, 跳过相关统计", module='pipeline', details={'path': path})
            return None
        return list(read_sentences(path))

    def _raw_valid(self) -> Optional[List[Sentence]]:
        """验证集在 OOV 处理之前的形式(大小写变换已还原)"""
        path = self.path(self.VALID_DEDUP)
        if not os.path.isfile(path):
            return None
        sentences = list(read_sentences(path))
        if self.config.corpus.case_transform:
            sentences = [invert_case_transform(s) for s in sentences]
        return sentences

    def cmd_eval(self, model_path: Optional[str] = None, test_path: Optional[str] = None) -> List[EvalReport]:
        """
        评估验证集与测试集上的子词困惑度和词级困惑度

        Args:
            model_path: 模型文件, 默认取工作目录中的模型
            test_path: 额外的原始测试语料, 按训练集的方式预处理

        Returns:
            List[EvalReport]: 每个数据集一份报告
        """
        start_time = time.time()
        subword = self.load_tokenizer()
        lm = self.load_language_model(subword, model_path)
        policy = TokenCountPolicy(self.config.evaluation.token_count_policy)
        vocab = Vocabulary.load(self._require(self.VOCAB, 'preprocess'))
        raw_train = self._read_raw(self.config.corpus.train_path)

        # (名称, 处理后的句子, 原始句子, 来源文件); 原始句子未知时为 None
        datasets: List[Tuple[str, List[Sentence], Optional[List[Sentence]], str]] = []
        if test_path:
            raw = list(read_sentences(test_path))
            datasets.append(('test', self._clean(raw, vocab), raw, test_path))
        else:
            valid_path = self.path(self.VALID_CLEAN)
            if os.path.isfile(valid_path):
                datasets.append(('valid', list(read_sentences(valid_path)), self._raw_valid(), valid_path))
            clean_test_path = self.path(self.TEST_CLEAN)
            if os.path.isfile(clean_test_path):
                raw = self._read_raw(self.config.corpus.test_path)
                datasets.append(('test', list(read_sentences(clean_test_path)), raw, clean_test_path))
        if not datasets:
            raise CorpusError("没有可评估的数据集, 请先运行 encode 或指定 --test")

        reports = []
        for name, sentences, raw, _ in datasets:
            result = word_level_perplexity(lm, subword, sentences, policy)
            if raw is not None:
                oov = oov_rate(raw, vocab)
            else:
                plain = [invert_case_transform(s) for s in sentences] if self.config.corpus.case_transform else sentences
                oov = oov_rate(plain, vocab)
            # 验证集取自训练语料, 不统计重合率
            overlap = None
            if name == 'test' and raw is not None and raw_train is not None:
                overlap = overlap_stats(raw_train, raw)
            reports.append(EvalReport.from_result(name, result, policy, oov=oov, overlap=overlap))

        write_lines(self.path('eval.tsv'), [EvalReport.TSV_HEADER] + [r.to_tsv_row() for r in reports])
        write_lines(self.path('eval.txt'), [r.to_text() for r in reports])
        inputs = [p for _, _, _, p in datasets] + [self.path(self.TOKENIZER), model_path or self.default_model_path()]
        self._write_manifest('eval', inputs, ['eval.tsv', 'eval.txt'])
        logger.performance('eval', time.time() - start_time, datasets=len(reports))
        return reports

    def cmd_sweep(self) -> str:
        """
        网格实验: 词级训练集按词数切出验证集, 结果写入 sweep.dat

        Returns:
            str: 结果文件路径
        """
        source = self._require(self.TRAIN_CLEAN, 'preprocess')
        tokenizer_source = self._require(self.TRAIN_DEDUP, 'preprocess')
        words = shuffle_sentences(list(read_sentences(source)), self.config.seed)
        train, valid = split_train_valid(words, self.config.training.valid_tokens)
        train_path = self.path(os.path.join('sweep', 'train.words.txt'))
        valid_path = self.path(os.path.join('sweep', 'valid.words.txt'))
        write_sentences(train_path, train)
        write_sentences(valid_path, valid)

        runner = SweepRunner(
            self.config.sweep,
            self.config.tokenizer,
            self.config.lstm,
            self.config.training,
            self.config.evaluation.token_count_policy,
            self.config.seed,
            self.work_dir,
        )
        runner.run(list(read_sentences(tokenizer_source)), train_path, valid_path, self.user_symbols)
        self._write_manifest('sweep', [source, tokenizer_source], ['sweep.dat'])
        return runner.result_path

    def cmd_stats(self) -> List[str]:
        """
        语料统计表: train, train (dedup.), 以及配置了测试集时的 test, test (dedup.)

        Returns:
            List[str]: TSV 行(最后一行为测试集与训练集的重合率)
        """
        corpus = self.config.corpus
        if not corpus.train_path:
            raise UsageError("未指定训练语料 (corpus.train_path / --train)")
        train = list(read_sentences(corpus.train_path))
        vocab_path = self.path(self.VOCAB)
        if os.path.isfile(vocab_path):
            vocab = Vocabulary.load(vocab_path)
        else:
            vocab = build_vocab(count_tokens(train), corpus.min_count)

        rows: List[Tuple[str, CorpusStats]] = [
            ('train', corpus_stats(train, vocab)),
            ('train (dedup.)', corpus_stats(deduplicate(train), vocab)),
        ]
        inputs = [corpus.train_path]
        overlap = None
        if corpus.test_path:
            test = list(read_sentences(corpus.test_path))
            rows.append(('test', corpus_stats(test, vocab)))
            rows.append(('test (dedup.)', corpus_stats(deduplicate(test), vocab)))
            overlap = overlap_stats(train, test)
            inputs.append(corpus.test_path)

        lines = format_stats_table(rows)
        if overlap is not None:
            lines.append(f"# test_overlap\t{overlap:.6f}")
        write_lines(self.path('stats.tsv'), lines)
        self._write_manifest('stats', inputs, ['stats.tsv'])
        return lines


class _ArgumentParser(argparse.ArgumentParser):
    """参数错误转换为 UsageError"""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', help='key=value 配置文件')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE', help='覆盖配置项')
    common.add_argument('--work-dir', help='工作目录(默认取 SUBWORD_LM_WORK_DIR)')
    common.add_argument('--seed', type=int)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--quiet', action='store_true')
    verbosity.add_argument('--verbose', action='store_true')

    parser = _ArgumentParser(prog='subword-lm', description='子词语言模型工具包')
    parser.add_argument('--version', action='version', version=f'%(prog)s {TOOL_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('preprocess', parents=[common])
    p.add_argument('--train')
    p.add_argument('--test')
    p.add_argument('--min-count', type=int)
    p.add_argument('--case-transform', action='store_true', default=None)
    p.add_argument('--oov-policy', choices=['replace', 'remove'])

    p = sub.add_parser('train-tokenizer', parents=[common])
    p.add_argument('--vocab-size', type=int)

    p = sub.add_parser('encode', parents=[common])
    p.add_argument('--input')
    p.add_argument('--output')

    p = sub.add_parser('decode', parents=[common])
    p.add_argument('--input', required=True)
    p.add_argument('--output', required=True)

    p = sub.add_parser('train-lm', parents=[common])
    p.add_argument('--kind', choices=['ngram', 'lstm'])
    p.add_argument('--order', type=int)
    p.add_argument('--epochs', type=int)

    p = sub.add_parser('eval', parents=[common])
    p.add_argument('--kind', choices=['ngram', 'lstm'])
    p.add_argument('--model')
    p.add_argument('--test')

    p = sub.add_parser('sweep', parents=[common])
    p.add_argument('--vocab-sizes')
    p.add_argument('--layers')
    p.add_argument('--workers', type=int)

    p = sub.add_parser('stats', parents=[common])
    p.add_argument('--train')
    p.add_argument('--test')
    return parser


# 命令行参数 -> 点分配置键
FLAG_KEYS = {
    'work_dir': 'work_dir',
    'seed': 'seed',
    'train': 'corpus.train_path',
    'test': 'corpus.test_path',
    'min_count': 'corpus.min_count',
    'case_transform': 'corpus.case_transform',
    'oov_policy': 'corpus.oov_policy',
    'vocab_size': 'tokenizer.vocab_size',
    'kind': 'training.lm_kind',
    'order': 'ngram.order',
    'epochs': 'training.epochs',
    'vocab_sizes': 'sweep.vocab_sizes',
    'layers': 'sweep.layers',
    'workers': 'sweep.workers',
}


def _layer_config(args: argparse.Namespace, config_file: str) -> ConfigManager:
    """在 config_file 之上依次应用 --config, --set 与专用参数"""
    manager = ConfigManager(config_file)
    if args.config:
        manager.load_overrides_file(args.config)
    manager.apply_overrides(parse_key_value_lines(args.set, source='--set'))

    flags = {}
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        # eval --test 是待评估文件, 不是预处理配置
        if args.command == 'eval' and attr == 'test':
            continue
        if value is not None:
            flags[key] = value
    manager.apply_overrides(flags)
    return manager


def load_run_config(args: argparse.Namespace, config_file: str = DEFAULT_CONFIG_FILE) -> ConfigManager:
    """
    按优先级合并配置

    preprocess 之后的命令以工作目录中的 run.config.json 代替 config_file,
    从而沿用预处理时的语料路径、大小写变换与 OOV 策略。

    Args:
        args: 解析后的命令行参数
        config_file: JSON 默认配置

    Returns:
        ConfigManager: 合并并校验后的配置管理器
    """
    manager = _layer_config(args, config_file)
    saved = os.path.join(manager.config.work_dir, SubwordLMPipeline.RUN_CONFIG)
    if args.command != 'preprocess' and os.path.isfile(saved):
        logger.debug("使用工作目录中的运行配置", module='cli', details={'path': saved})
        manager = _layer_config(args, saved)

    is_valid, errors = manager.validate_config()
    if not is_valid:
        raise UsageError("配置无效: " + "; ".join(errors))
    return manager


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    命令行入口

    Args:
        argv: 参数列表, 默认取 sys.argv[1:]

    Returns:
        int: 退出码
    """
    start_time = time.time()
    command = 'unknown'
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        if args.quiet:
            logger.set_console_level(logging.WARNING)
        elif args.verbose:
            logger.set_console_level(logging.DEBUG)

        pipeline = SubwordLMPipeline(load_run_config(args))
        if command == 'preprocess':
            pipeline.cmd_preprocess()
        elif command == 'train-tokenizer':
            pipeline.cmd_train_tokenizer()
        elif command == 'encode':
            pipeline.cmd_encode(args.input, args.output)
        elif command == 'decode':
            pipeline.cmd_decode(args.input, args.output)
        elif command == 'train-lm':
            pipeline.cmd_train_lm()
        elif command == 'eval':
            for report in pipeline.cmd_eval(args.model, args.test):
                print(report.to_text())
        elif command == 'sweep':
            pipeline.cmd_sweep()
        elif command == 'stats':
            print("\n".join(pipeline.cmd_stats()))
    except LMToolkitError as e:
        logger.error(f"命令失败: {e}", module='cli', details={'command': command, 'error': type(e).__name__})
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    logger.performance(f'cli.{command}', time.time() - start_time)
    return 0


if __name__ == "__main__":
    sys.exit(main())
