"""Command-line entry point: ``trbf <subcommand> ...``.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, dump_config, load_config
from .dataset import CorpusIndex, concatenate, load_corpus, sequences_to_tokens, synth_utterances
from .errors import DimensionError, TrbfError
from .evaluation import accuracy, confusion_matrix, delay_sweep, format_report, noise_sweep
from .features import extract_sequence, write_segments, write_wav
from .formats import load_model, load_tokens, save_model, save_tokens
from .ols import format_training_log, train_ensemble
from .quantizer import codebook, train_som

log = logging.getLogger("trbf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--config", metavar="FILE", help="key: value configuration file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--threads", type=int, metavar="N", help="worker threads (default: CPU count)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trbf", description="Temporal RBF vowel classification toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("features", help="audio + segment files -> token file")
    _common(p)
    p.add_argument("--audio", action="append", required=True, metavar="WAV", help="16 kHz mono PCM file (repeatable)")
    p.add_argument("--segments", action="append", required=True, metavar="PHN", help="segment file matching each --audio")
    p.add_argument("--labels", help="comma-separated labels to keep (default: all)")
    p.add_argument("--out", required=True, metavar="FILE", help="token file to write")

    p = sub.add_parser("synth", help="generate the synthetic six-vowel corpus")
    _common(p)
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")

    p = sub.add_parser("quantize", help="tokens -> per-class SOM codebooks")
    _common(p)
    p.add_argument("--tokens", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="FILE", help="codebook token file")

    p = sub.add_parser("train", help="codebook + tokens -> model file and training log")
    _common(p)
    p.add_argument("--tokens", required=True, metavar="FILE", help="training tokens")
    p.add_argument("--codebook", metavar="FILE", help="candidate prototypes (default: the training tokens)")
    p.add_argument("--model", required=True, metavar="FILE", help="model file to write")
    p.add_argument("--log", metavar="FILE", help="tab-separated selection log")

    p = sub.add_parser("eval", help="model + tokens -> report")
    _common(p)
    p.add_argument("--model", required=True, metavar="FILE")
    p.add_argument("--tokens", required=True, metavar="FILE")
    p.add_argument("--report", metavar="FILE", help="report file (default: stdout)")

    p = sub.add_parser("classify", help="model + tokens -> one prediction per line")
    _common(p)
    p.add_argument("--model", required=True, metavar="FILE")
    p.add_argument("--tokens", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE", help="predictions file (default: stdout)")

    p = sub.add_parser("sweep-delay", help="retrain and test for each time delay")
    _common(p)
    p.add_argument("--tokens", required=True, metavar="FILE", help="training tokens")
    p.add_argument("--test", required=True, metavar="FILE", help="test tokens")
    p.add_argument("--codebook", metavar="FILE", help="candidate prototypes (default: the training tokens)")
    p.add_argument("--delays", help="comma-separated delays (default from config)")
    p.add_argument("--out", metavar="FILE", help="table file (default: stdout)")

    p = sub.add_parser("sweep-noise", help="accuracy under Gaussian feature noise")
    _common(p)
    p.add_argument("--model", required=True, metavar="FILE")
    p.add_argument("--tokens", required=True, metavar="FILE")
    p.add_argument("--sigmas", help="comma-separated noise levels (default from config)")
    p.add_argument("--out", metavar="FILE", help="table file (default: stdout)")

    p = sub.add_parser("config", help="print the effective configuration")
    _common(p)
    return parser


def _emit(text: str, path=None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _threads(args):
    return args.threads if args.threads else (os.cpu_count() or 1)


def _seed(args, cfg: RunConfig) -> int:
    return cfg.values["seed"] if args.seed is None else args.seed


def _csv(text, cast):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def cmd_features(args, cfg):
    if len(args.audio) != len(args.segments):
        raise UsageError("give one --segments file per --audio file")
    labels = args.labels.split(",") if args.labels else None
    index = CorpusIndex(list(zip(args.audio, args.segments)), labels)
    seqs, skipped = load_corpus(index, cfg.frame_config())
    for lab, count in sorted(skipped.items()):
        log.warning("skipped %d segment(s) labelled %s", count, lab)
    nfe = cfg.values["net.nfe"]
    X, y = sequences_to_tokens(seqs, nfe)
    if len(seqs) == 0:
        X = np.zeros((0, nfe, cfg.frame_config().n_features))
    save_tokens(args.out, X, y)
    log.info("wrote %d tokens to %s", len(y), args.out)


def cmd_synth(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scfg = cfg.synth_config(_seed(args, cfg))
    fcfg = cfg.frame_config()
    nfe = cfg.values["net.nfe"]
    for split in ("train", "test"):
        signal, segments = concatenate(synth_utterances(scfg, split))
        write_wav(out / f"{split}.wav", signal)
        write_segments(out / f"{split}.phn", segments)
        seqs, _ = extract_sequence(signal, segments, fcfg)
        X, y = sequences_to_tokens(seqs, nfe)
        save_tokens(out / f"{split}.tok", X, y)
        log.info("%s: %d tokens", split, len(y))


def cmd_quantize(args, cfg):
    X, y = load_tokens(args.tokens)
    seed = _seed(args, cfg)
    flat = X.reshape(len(X), -1)
    books, labels = [], []
    for k, cls in enumerate(np.unique(y)):
        grid = train_som(flat[y == cls], cfg.som_config(seed + k))
        book = codebook(grid, cfg.values["som.min_hits"])
        books.append(book.reshape((-1,) + X.shape[1:]))
        labels += [cls] * len(book)
        log.info("class %s: %d tokens -> %d prototypes", cls, int((y == cls).sum()), len(book))
    save_tokens(args.out, np.concatenate(books), labels)


def _load_pair(tokens_path, codebook_path, nfe):
    X, y = load_tokens(tokens_path)
    if X.shape[1] != nfe:
        raise DimensionError(f"{tokens_path}: tokens have {X.shape[1]} frames, config expects Nfe={nfe}")
    if codebook_path:
        P, py = load_tokens(codebook_path)
        if P.shape[1:] != X.shape[1:]:
            raise DimensionError(f"codebook tokens {P.shape[1:]} differ from training tokens {X.shape[1:]}")
    else:
        P, py = X, y
    return X, y, P, py


def cmd_train(args, cfg):
    X, y, P, py = _load_pair(args.tokens, args.codebook, cfg.values["net.nfe"])
    netcfg = cfg.net_config(X.shape[2])
    ens, states = train_ensemble(P, py, X, y, netcfg, cfg.train_config(), n_jobs=_threads(args))
    for key in ("frame.frame_len", "frame.hop", "frame.fft_size", "frame.n_mels", "frame.n_ceps"):
        ens.meta[key] = cfg.values[key]
    ens.meta["dct"] = "type-II orthonormal"
    ens.meta["log_floor"] = 1e-10
    ens.meta["seed"] = _seed(args, cfg)
    save_model(args.model, ens)
    if args.log:
        Path(args.log).write_text(format_training_log(states), encoding="utf-8")
    acc = accuracy(confusion_matrix(ens, X, y))
    log.info("training accuracy %.4f", acc)


def _load_eval(args):
    ens = load_model(args.model)
    X, y = load_tokens(args.tokens)
    if X.shape[1:] != (ens.cfg.nfe, ens.cfg.n):
        raise DimensionError(
            f"token dimension mismatch: model expects {ens.cfg.nfe}x{ens.cfg.n} frames, "
            f"{args.tokens} holds {X.shape[1]}x{X.shape[2]}"
        )
    return ens, X, y


def cmd_eval(args, cfg):
    ens, X, y = _load_eval(args)
    cm = confusion_matrix(ens, X, y)
    _emit(format_report(cm), args.report)
    log.info("accuracy %.4f over %d tokens", accuracy(cm) if cm.total else float("nan"), cm.total)


def cmd_classify(args, cfg):
    ens, X, y = _load_eval(args)
    scores = ens.scores(X) if len(X) else np.zeros((0, len(ens.classes)))
    pred = np.asarray(ens.classes)[np.argmax(scores, axis=1)] if len(X) else []
    lines = ["true\tpredicted\t" + "\t".join(ens.classes)]
    for t, p, s in zip(y, pred, scores):
        lines.append(f"{t}\t{p}\t" + "\t".join(repr(float(v)) for v in s))
    _emit("\n".join(lines) + "\n", args.out)


def cmd_sweep_delay(args, cfg):
    X, y, P, py = _load_pair(args.tokens, args.codebook, cfg.values["net.nfe"])
    Xt, yt = load_tokens(args.test)
    if Xt.shape[1:] != X.shape[1:]:
        raise DimensionError(f"test tokens {Xt.shape[1:]} differ from training tokens {X.shape[1:]}")
    delays = _csv(args.delays, int) if args.delays else cfg.values["sweep.delays"]
    res = delay_sweep(X, y, Xt, yt, cfg.net_config(X.shape[2]), delays, cfg.train_config(), P, py, _threads(args))
    _emit(res.format(), args.out)


def cmd_sweep_noise(args, cfg):
    ens, X, y = _load_eval(args)
    sigmas = _csv(args.sigmas, float) if args.sigmas else cfg.values["sweep.sigmas"]
    res = noise_sweep(ens, X, y, [0.0] + [s for s in sigmas if s != 0.0], seed=_seed(args, cfg))
    _emit(res.format(), args.out)


def cmd_config(args, cfg):
    if args.seed is not None:
        cfg.values["seed"] = args.seed
    _emit(dump_config(cfg))


COMMANDS = {
    "features": cmd_features,
    "synth": cmd_synth,
    "quantize": cmd_quantize,
    "train": cmd_train,
    "eval": cmd_eval,
    "classify": cmd_classify,
    "sweep-delay": cmd_sweep_delay,
    "sweep-noise": cmd_sweep_noise,
    "config": cmd_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        cfg = load_config(args.config)
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TrbfError, ValueError, OSError, IndexError) as exc:
        print(f"trbf: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
