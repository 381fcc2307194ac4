"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .config import RunConfig
from .errors import ConfigError, FormatError
from .features import read_features, synth_features, write_features
from .lm import CountBigramLm
from .metrics import compute_wer
from .model import TransducerModel
from .streaming import StreamSession, bench_segment_costs, lookahead_ms
from .transducer import beam_decode
from .verify import SUITES, run_suites

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
SYNTH_PREFIX = "synth:"


class UsageError(Exception):
    pass


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    text = Path(path).read_text()
    try:
        return RunConfig.from_json(text)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_features(spec: str) -> tuple[str, np.ndarray]:
    """Return ``(utterance id, frames)`` for a FEAT path or ``synth:SEED:LENGTH``."""
    if spec.startswith(SYNTH_PREFIX):
        try:
            seed, length = (int(v) for v in spec[len(SYNTH_PREFIX):].split(":"))
        except ValueError:
            raise UsageError(f"bad synthetic spec {spec!r}; expected synth:SEED:LENGTH")
        if length < 1:
            raise UsageError("synthetic length must be >= 1")
        return f"synth-{seed}-{length}", synth_features(seed, length)
    return Path(spec).stem, read_features(spec)


def load_model(cfg: RunConfig, weights: Optional[str]) -> TransducerModel:
    path = weights or cfg.paths.weights
    if path is None:
        return TransducerModel.initialize(cfg.encoder_config(), cfg.vocab(), cfg.seed)
    model = TransducerModel.load(path)
    if model.vocab != cfg.vocab():
        raise ConfigError(f"{path}: vocab size {model.vocab.size} differs from config")
    # runtime knobs (segmentation, gamma, cap) follow the config, weights follow the file
    enc = cfg.encoder_config()
    runtime = model.config.with_(left=enc.left, center=enc.center, right=enc.right,
                                 gamma=enc.gamma, suppression=enc.suppression,
                                 memory_cap=enc.memory_cap)
    return TransducerModel.from_params(runtime, model.vocab, model.params)


def load_tokens(path: Optional[str]) -> Optional[list[str]]:
    if path is None:
        return None
    return [line.rstrip("\n") for line in Path(path).read_text().splitlines()]


def load_lm(path: str, vocab_size: int, tokens: Optional[list[str]]) -> CountBigramLm:
    """Train a bigram LM from a text corpus: one sentence per line.

    Words are looked up in the token list when one is given, otherwise they
    must be integer ids.
    """
    lines = Path(path).read_text().splitlines()
    if tokens is not None:
        if len(tokens) != vocab_size:
            raise ConfigError(f"token list has {len(tokens)} entries, model vocab is {vocab_size}")
        return CountBigramLm.from_text(lines, {t: i for i, t in enumerate(tokens)})
    try:
        sentences = [[int(w) for w in line.split()] for line in lines]
    except ValueError:
        raise FormatError(f"{path}: LM corpus must hold integer ids without --tokens")
    return CountBigramLm.from_sentences(sentences, vocab_size)


def _stream(model: TransducerModel, frames: np.ndarray) -> np.ndarray:
    session = StreamSession(model.encoder)
    return np.concatenate([session.push_features(frames), session.finalize()], axis=0)


# ------------------------------------------------------------------ commands

def cmd_encode(args) -> int:
    cfg = load_config(args.config)
    model = load_model(cfg, args.weights)
    _, frames = load_features(args.features)
    write_features(args.out, _stream(model, frames))
    return EXIT_OK


def cmd_decode(args) -> int:
    cfg = load_config(args.config)
    model = load_model(cfg, args.weights)
    tokens = load_tokens(args.tokens or cfg.paths.tokens)
    lm_path = args.lm or (cfg.paths.lm if cfg.decode.mode == "fusion" else None)
    lm = load_lm(lm_path, model.vocab.size, tokens) if lm_path else None
    lm_weight = args.lm_weight if args.lm_weight is not None else (
        cfg.decode.lm_weight if lm is not None else 0.0)
    beam = args.beam if args.beam is not None else (
        1 if cfg.decode.mode == "greedy" else cfg.decode.beam)
    if beam < 1 or lm_weight < 0:
        raise UsageError("--beam must be >= 1 and --lambda >= 0")
    for spec in args.features:
        utt, frames = load_features(spec)
        hyps = beam_decode(_stream(model, frames), model.predictor, model.joiner, beam, lm,
                           lm_weight, cfg.decode.max_symbols_per_frame, args.nbest)
        best = hyps[0]
        record = {
            "id": utt,
            "tokens": list(best.tokens),
            "text": _detok(best.tokens, tokens),
            "score": best.total(lm_weight),
            "n_best": [{"tokens": list(h.tokens), "score": h.total(lm_weight),
                        "acoustic": h.acoustic, "lm": h.lm} for h in hyps],
        }
        print(json.dumps(record))
    return EXIT_OK


def _detok(ids: Sequence[int], tokens: Optional[list[str]]) -> str:
    if tokens is None:
        return " ".join(str(i) for i in ids)
    return " ".join(tokens[i] if i < len(tokens) else f"<{i}>" for i in ids)


def cmd_verify(args) -> int:
    names = None if args.suite == "all" else [args.suite]
    reports = run_suites(names)
    ok = all(r.passed for r in reports)
    print(json.dumps({"passed": ok, "suites": [r.to_dict() for r in reports]}, indent=2))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_bench(args) -> int:
    if args.segments < 1:
        raise UsageError("--segments must be >= 1")
    if args.memory_cap is not None and args.memory_cap < 0:
        raise UsageError("--memory-cap must be >= 0")
    cfg = load_config(args.config)
    model = load_model(cfg, args.weights)
    cap = args.memory_cap if args.memory_cap is not None else cfg.memory_cap
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["segment", "key_length", "memory_slots", "wall_ms"])
    for row in bench_segment_costs(model.encoder, args.segments, cap, cfg.seed):
        writer.writerow([row.segment, row.key_length, row.memory_slots, f"{row.wall_ms:.3f}"])
    return EXIT_OK


def cmd_wer(args) -> int:
    refs = Path(args.ref).read_text().splitlines()
    hyps = Path(args.hyp).read_text().splitlines()
    if not refs:
        raise FormatError(f"{args.ref}: no reference lines")
    if len(refs) != len(hyps):
        raise FormatError(f"{len(refs)} reference lines but {len(hyps)} hypothesis lines")
    totals = {"substitutions": 0, "insertions": 0, "deletions": 0, "ref_words": 0}
    for lineno, (ref, hyp) in enumerate(zip(refs, hyps), 1):
        try:
            rep = compute_wer(ref.split(), hyp.split())
        except ValueError as exc:
            raise FormatError(f"{args.ref}:{lineno}: {exc}") from exc
        totals["substitutions"] += rep.substitutions
        totals["insertions"] += rep.insertions
        totals["deletions"] += rep.deletions
        totals["ref_words"] += rep.ref_words
    errors = totals["substitutions"] + totals["insertions"] + totals["deletions"]
    totals["wer"] = errors / totals["ref_words"]
    totals["utterances"] = len(refs)
    print(json.dumps(totals))
    return EXIT_OK


def cmd_lookahead(args) -> int:
    ms = lookahead_ms(load_config(args.config).segmenter_config())
    print(int(ms) if float(ms).is_integer() else ms)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    write_features(args.out, synth_features(args.seed, args.frames))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="augconformer",
                                     description="Streaming augmented-memory transducer toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    feat_help = "FEAT file or synth:SEED:LENGTH"

    p = sub.add_parser("encode", help="run the streaming encoder, write encoder frames")
    p.add_argument("--config")
    p.add_argument("--features", required=True, help=feat_help)
    p.add_argument("--out", required=True)
    p.add_argument("--weights")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode to JSON lines")
    p.add_argument("--config")
    p.add_argument("--features", required=True, action="append", help=feat_help)
    p.add_argument("--lm", help="text corpus for the bigram LM, one sentence per line")
    p.add_argument("--lambda", dest="lm_weight", type=float)
    p.add_argument("--beam", type=int)
    p.add_argument("--nbest", type=int)
    p.add_argument("--tokens", help="token list, one per line (line number = id)")
    p.add_argument("--weights")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES) + ["all"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="per-segment cost table as CSV")
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--memory-cap", type=int)
    p.add_argument("--config")
    p.add_argument("--weights")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("wer", help="word error rate between two line-aligned text files")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("lookahead", help="print the algorithmic lookahead in ms")
    p.add_argument("--config")
    p.set_defaults(func=cmd_lookahead)

    p = sub.add_parser("synth", help="write a seeded synthetic FEAT file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
