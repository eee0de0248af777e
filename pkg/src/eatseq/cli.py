"""Command-line interface: extract, train, decode, generate, eval.

Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import depgraph, eatcore
from .decoding import constrained_decode, load_style_stats
from .errors import EatSeqError
from .evalgen import (
    EvalReport,
    back_transform_eval,
    generate_random_eat,
    pattern_from_label,
    spec_from_pattern,
)
from .seq2seq import (
    ModelConfig,
    Seq2SeqModel,
    TrainConfig,
    Vocabulary,
    greedy_decode,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .synthgrammar import GrammarConfig, make_reparser, synth_corpus
from .transform import TransformSpec
from .vectorizer import EmbeddingStore, load_embeddings, sequence_to_matrix
from .evalgen import build_constraints


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _read_input(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _open_output(path: str | None):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or "=" not in line:
                continue
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _store_for(args, extra: dict) -> EmbeddingStore:
    if getattr(args, "embeddings", None):
        return load_embeddings(args.embeddings)
    policy = extra.get("embed_policy", "hash_pseudorandom")
    dim = int(extra.get("embed_store_dim", 0))
    if dim <= 0:
        raise EatSeqError(
            "checkpoint has no embedding hint; pass --embeddings")
    return EmbeddingStore(dim, oov_policy=policy)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eatseq", description=__doc__)
    parser.add_argument("--config", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="CoNLL-U -> EAT JSON lines")
    p.add_argument("--input", "-i", help="CoNLL-U file (default stdin)")
    p.add_argument("--output", "-o", help="output file (default stdout)")
    p.add_argument("--lf", action="store_true",
                   help="append the logical form after each JSON line")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("train", help="train a model on a corpus")
    p.add_argument("--corpus", help="JSONL with tuples and a target field")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate N synthetic sentences instead of --corpus")
    p.add_argument("--model", required=True, help="checkpoint output path")
    p.add_argument("--embeddings", help="embedding text file")
    p.add_argument("--embed-dim", type=int, default=32,
                   help="pseudorandom embedding size when no file is given")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("decode", help="reconstruct sentences from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", "-i", help="CoNLL-U input (default stdin)")
    p.add_argument("--eat", help="EAT JSONL input instead of CoNLL-U")
    p.add_argument("--output", "-o")
    p.add_argument("--embeddings")
    p.add_argument("--set", action="append", default=[],
                   metavar="KEY=VALUE", help="grammatical transform target")
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--style-source", help="token\\tcount stats file")
    p.add_argument("--style-target", help="token\\tcount stats file")
    p.add_argument("--style-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("generate", help="decode random EAT tuples")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--output", "-o")

    p = sub.add_parser("eval", help="back-transformation evaluation")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--synthetic", type=int, default=100,
                   help="number of synthetic test sentences")
    p.add_argument("--direction", required=True, metavar="SRC:TGT")
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o")
    return parser


def _cmd_extract(args) -> int:
    text = _read_input(args.input)
    graphs = depgraph.parse_conllu(text)

    def work(graph):
        seq = eatcore.extract(graph)
        lines = [seq.to_json()]
        if args.lf:
            lines.append(eatcore.render_lf(seq))
        return "\n".join(lines)

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, graphs))
    else:
        results = [work(g) for g in graphs]
    out = _open_output(args.output)
    try:
        for block in results:
            out.write(block + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _read_training_corpus(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            seq = eatcore.EatSequence.from_dict(data)
            pairs.append((seq, list(data["target"])))
    return pairs


def _cmd_train(args) -> int:
    if args.synthetic > 0:
        sentences = synth_corpus(GrammarConfig(), args.synthetic, seed=args.seed)
        pairs = [(s.gold, s.tokens) for s in sentences]
    elif args.corpus:
        pairs = _read_training_corpus(args.corpus)
    else:
        raise _UsageError("train needs --corpus or --synthetic N")

    if args.embeddings:
        store = load_embeddings(args.embeddings)
        extra = {"embed_policy": "zero", "embed_store_dim": store.dim}
    else:
        store = EmbeddingStore(args.embed_dim, oov_policy="hash_pseudorandom")
        extra = {"embed_policy": "hash_pseudorandom",
                 "embed_store_dim": store.dim}

    vocab = Vocabulary.build([tokens for _, tokens in pairs])
    config = ModelConfig(input_dim=eatcore.N_FEATURES + 3 * store.dim,
                         hidden_units=args.hidden, vocab_size=len(vocab))
    model = Seq2SeqModel(config, vocab, seed=args.seed)
    tc = TrainConfig(batch_size=args.batch_size, epochs=args.epochs,
                     seed=args.seed)
    train(pairs, model, tc, store=store,
          log_fn=lambda entry: print(json.dumps(entry), file=sys.stderr))
    save_checkpoint(model, args.model, extra_config=extra)
    return 0


def _cmd_decode(args) -> int:
    model, extra = load_checkpoint(args.model)
    store = _store_for(args, extra)
    spec = TransformSpec.from_pairs(args.set) if args.set else None

    if args.eat:
        with open(args.eat, encoding="utf-8") as fh:
            sequences = eatcore.read_jsonl(fh)
        graphs = [None] * len(sequences)
    else:
        graphs = depgraph.parse_conllu(_read_input(args.input))
        sequences = [eatcore.extract(g) for g in graphs]

    style = None
    if args.style_source and args.style_target:
        style = (load_style_stats(args.style_source),
                 load_style_stats(args.style_target), args.style_weight)

    reparser = make_reparser()

    def work(item):
        graph, seq = item
        if spec is not None:
            from .transform import transform_grammar
            seq = transform_grammar(seq, spec)
        matrix = sequence_to_matrix(seq, store)
        if args.greedy:
            return " ".join(greedy_decode(model, matrix))
        if graph is not None:
            constraints = build_constraints(graph, seq, beam_width=args.beam)
        else:
            from .decoding import DecodeConstraints
            constraints = DecodeConstraints(beam_width=args.beam,
                                            reference_eat=seq)
        hyp = constrained_decode(model, matrix, constraints,
                                 reparser=reparser, style=style)
        return " ".join(hyp.tokens(model.vocab))

    items = list(zip(graphs, sequences))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(item) for item in items]
    out = _open_output(args.output)
    try:
        for line in results:
            out.write(line + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_generate(args) -> int:
    model, extra = load_checkpoint(args.model)
    store = _store_for(args, extra)
    clause = None
    if args.set:
        spec = TransformSpec.from_pairs(args.set)
        from .evalgen import DEFAULT_GENERATION_CLAUSE
        base = eatcore.EatSequence((eatcore.EatTuple(
            clause=DEFAULT_GENERATION_CLAUSE,
            event=eatcore.WordSlot("see"),
            agent=eatcore.WordSlot("dog"),
            theme=eatcore.WordSlot("cat")),), "seed")
        from .transform import transform_grammar
        clause = transform_grammar(base, spec).tuples[0].clause
    out = _open_output(args.output)
    try:
        for i in range(args.count):
            seq = generate_random_eat(clause=clause, seed=args.seed + i)
            matrix = sequence_to_matrix(seq, store)
            out.write(" ".join(greedy_decode(model, matrix)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_eval(args) -> int:
    model, extra = load_checkpoint(args.model)
    store = _store_for(args, extra)
    if ":" not in args.direction:
        raise _UsageError("--direction must look like declarative:question")
    source_label, target_label = args.direction.split(":", 1)
    pattern_from_label(source_label)
    pattern_from_label(target_label)

    sentences = synth_corpus(GrammarConfig(), args.synthetic, seed=args.seed)
    inputs = [(s.graph, s.gold) for s in sentences]
    reparser = make_reparser()
    report = back_transform_eval(
        model, inputs, (source_label, target_label),
        store=store, reparser=reparser, beam_width=args.beam)
    out = _open_output(args.output)
    try:
        out.write(report.to_json() + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    print(report.table(args.direction), file=sys.stderr)
    return 0


_COMMANDS = {
    "extract": _cmd_extract,
    "train": _cmd_train,
    "decode": _cmd_decode,
    "generate": _cmd_generate,
    "eval": _cmd_eval,
}


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            defaults = _load_config_file(args.config)
            for key, value in defaults.items():
                attr = key.replace("-", "_")
                if hasattr(args, attr) and getattr(args, attr) in (None, [], 0):
                    setattr(args, attr, type(getattr(args, attr))(value)
                            if getattr(args, attr) is not None else value)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (EatSeqError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
