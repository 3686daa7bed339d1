"""Command line entry points: train, parse, oracle, eval, pid-train."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .conll import (ConllError, evaluate, load_embeddings, read_conll,
                    render_conll, write_conll)
from .config import ConfigError, apply_config, read_config
from .decoder import DecodeError, marked_predicates, parse_corpus
from .model import Hyper, load_model, save_model
from .oracle import projectivize, to_transitions
from .predicates import PidHyper, identify, train_pid
from .structures import JOINT, SEMANTICS_ONLY, SYNTAX_ONLY
from .trainer import train, train_hybrid
from .transitions import run_sequence

HYBRID = "hybrid"
TRAIN_MODES = (JOINT, SYNTAX_ONLY, SEMANTICS_ONLY, HYBRID)
FORMATS = ("2009", "2008")


class UsageError(ValueError):
    """Bad invocation: missing files, contradictory flags."""


def _load_hyper(defaults, config_path):
    hyper = defaults
    if config_path:
        hyper = apply_config(hyper, read_config(config_path))
    return hyper


def _attach_embeddings(sections, path):
    trained_dims = {s.hyper.pretrained_dim for s in sections}
    trained_dims.discard(0)
    if path:
        table = load_embeddings(path)
        for section in sections:
            if section.hyper.pretrained_dim:
                if section.hyper.pretrained_dim != table.dim:
                    raise UsageError(
                        f"embedding file has {table.dim}-dimensional vectors "
                        f"but the model expects "
                        f"{section.hyper.pretrained_dim}")
                section.pretrained = table
    elif trained_dims:
        print("warning: model was trained with pretrained embeddings; "
              "parsing with zero vectors instead", file=sys.stderr)


def cmd_train(args) -> int:
    train_sents = read_conll(args.train, args.format)
    dev_sents = read_conll(args.dev, args.format)
    hyper = _load_hyper(Hyper(), args.config)
    if args.epochs is not None:
        hyper = dataclasses.replace(hyper, epochs=args.epochs)
    pretrained = load_embeddings(args.embeddings) if args.embeddings else None
    if args.mode == HYBRID:
        syn, sem, history = train_hybrid(train_sents, dev_sents, hyper,
                                         seed=args.seed,
                                         pretrained=pretrained,
                                         log_path=args.log)
        save_model(args.model, "hybrid", [syn, sem])
        records = history["semantics"]
    else:
        model, records = train(train_sents, dev_sents, hyper, mode=args.mode,
                               seed=args.seed, pretrained=pretrained,
                               log_path=args.log)
        save_model(args.model, "parser", [model])
    best = max(records, key=lambda r: r["macro_f1"]) if records else None
    print(f"model={args.model}")
    if best:
        for key in ("epoch", "las", "sem_f1", "macro_f1"):
            value = best[key]
            text = f"{value:.6f}" if isinstance(value, float) else str(value)
            print(f"best_{key}={text}")
    return 0


def _candidate_sets(sentences, fmt, args):
    """Predicate candidates per sentence for a semantics-capable model."""
    if fmt == "2009":
        return [marked_predicates(s) for s in sentences]
    if not args.pid_model:
        raise UsageError("2008-format input does not mark predicates; "
                         "supply --pid-model")
    kind, sections = load_model(args.pid_model)
    if kind != "pid":
        raise UsageError(f"{args.pid_model} is not a predicate "
                         "identification model")
    pid = sections[0]
    _attach_embeddings([pid], args.embeddings)
    return [identify(pid, s) for s in sentences]


def cmd_parse(args) -> int:
    kind, sections = load_model(args.model)
    if kind == "hybrid":
        mode = HYBRID
        syn_model, sem_model = sections
    elif kind == "parser":
        syn_model, sem_model = sections[0], None
        mode = syn_model.mode
    else:
        raise UsageError(f"{args.model} is not a parsing model")
    if args.mode and args.mode != mode:
        raise UsageError(f"model runs in mode {mode!r}, not {args.mode!r}")
    _attach_embeddings(sections, args.embeddings)
    sentences = read_conll(args.input, args.format)
    needs_candidates = mode in (JOINT, SEMANTICS_ONLY, HYBRID)
    candidates = _candidate_sets(sentences, args.format, args) \
        if needs_candidates else None
    parses, traces = parse_corpus(sentences, syn_model, sem_model=sem_model,
                                  candidates_list=candidates,
                                  threads=args.threads, trace=args.trace)
    if traces:
        for lines in traces:
            print("\n".join(lines), file=sys.stderr)
            print(file=sys.stderr)
    if args.output and args.output != "-":
        write_conll(parses, args.output, args.format)
    else:
        sys.stdout.write(render_conll(parses, args.format))
    return 0


def cmd_oracle(args) -> int:
    sentences = read_conll(args.input, args.format)
    first = True
    for sent in sentences:
        work = sent
        if args.mode in (JOINT, SYNTAX_ONLY):
            work, _ = projectivize(sent)
        sequence, exact = to_transitions(work, args.mode)
        if not first:
            print()
        first = False
        if args.keys_only:
            print(" ".join(t.key() for t in sequence))
        else:
            candidates = frozenset(t.index for t in work.tokens
                                   if t.is_predicate)
            _, lines = run_sequence(work, sequence, mode=args.mode,
                                    pred_candidates=candidates, trace=True)
            print("\n".join(lines))
        print(f"exact={'true' if exact else 'false'}")
    return 0


def cmd_eval(args) -> int:
    gold = read_conll(args.gold, args.format)
    predicted = read_conll(args.pred, args.format)
    metrics = evaluate(gold, predicted)
    rows = list(metrics.as_dict().items())
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key.ljust(width)}  {value * 100:6.2f}")
    for key, value in rows:
        print(f"{key}={value:.6f}")
    return 0


def cmd_pid_train(args) -> int:
    train_sents = read_conll(args.train, args.format)
    dev_sents = read_conll(args.dev, args.format)
    hyper = _load_hyper(PidHyper(), args.config)
    if args.epochs is not None:
        hyper = dataclasses.replace(hyper, epochs=args.epochs)
    pretrained = load_embeddings(args.embeddings) if args.embeddings else None
    pid, records = train_pid(train_sents, dev_sents, hyper, seed=args.seed,
                             pretrained=pretrained, log_path=args.log)
    save_model(args.model, "pid", [pid])
    best = max(records, key=lambda r: r["f1"]) if records else None
    print(f"model={args.model}")
    if best:
        print(f"best_epoch={best['epoch']}")
        print(f"best_f1={best['f1']:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointparser",
        description="Transition-based joint syntactic and semantic "
                    "dependency parsing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a parsing model")
    p.add_argument("--train", required=True, help="training corpus")
    p.add_argument("--dev", required=True, help="development corpus")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--mode", choices=TRAIN_MODES, default=JOINT)
    p.add_argument("--format", choices=FORMATS, default="2009")
    p.add_argument("--embeddings", help="pretrained word vectors")
    p.add_argument("--config", help="key=value hyperparameter file")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, help="override the epoch budget")
    p.add_argument("--log", help="write per-epoch JSON lines here")
    p.set_defaults(run=cmd_train)

    p = sub.add_parser("parse", help="parse with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="output file; stdout when omitted")
    p.add_argument("--mode", choices=TRAIN_MODES,
                   help="assert the model's parsing mode")
    p.add_argument("--format", choices=FORMATS, default="2009")
    p.add_argument("--embeddings", help="pretrained word vectors")
    p.add_argument("--pid-model", dest="pid_model",
                   help="predicate identifier for 2008-format input")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trace", action="store_true",
                   help="print transition tables to stderr")
    p.set_defaults(run=cmd_parse)

    p = sub.add_parser("oracle", help="print gold transition traces")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=(JOINT, SYNTAX_ONLY, SEMANTICS_ONLY),
                   default=JOINT)
    p.add_argument("--format", choices=FORMATS, default="2009")
    p.add_argument("--keys-only", action="store_true",
                   help="print one line of transition keys per sentence "
                        "instead of the full tables")
    p.set_defaults(run=cmd_oracle)

    p = sub.add_parser("eval", help="score a prediction file against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--format", choices=FORMATS, default="2009")
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("pid-train", help="train a predicate identifier")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=FORMATS, default="2008")
    p.add_argument("--embeddings", help="pretrained word vectors")
    p.add_argument("--config", help="key=value hyperparameter file")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, help="override the epoch budget")
    p.add_argument("--log", help="write per-epoch JSON lines here")
    p.set_defaults(run=cmd_pid_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConllError, ConfigError, DecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
