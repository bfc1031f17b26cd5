"""Command line entry points; every subcommand wraps a library operation.

Exit codes: 0 success, 2 argument/validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .corrector import apply_edits, correct_substitutions, null_detect
from .datapipe import (
    MockTranslationClient,
    backtranslate,
    filter_pairs,
    mine_retrieval,
    read_pairs,
    write_pairs,
)
from .decode import DecoderConfig, decode
from .errors import DraftkitError, InvalidArgumentError
from .infill import infill_generate
from .lm import FRAME_PREFIX_SEP, TrainConfig, conditional_format, train
from .metrics import EvalReport, distinct_n, novelty, sentence_prf
from .polish import PolishConfig, SimilarityGraph, build_graph, polish
from .store import load, load_config, save
from .vocab import Vocab


def _read_corpus(path: str) -> list[list[str]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.split() for line in lines if line.strip()]


def _read_embeddings(path: str) -> dict[str, np.ndarray]:
    """Phrase embedding file: one 'phrase<TAB>v1 v2 ... vd' per line."""
    table: dict[str, np.ndarray] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        phrase, _, values = line.partition("\t")
        table[phrase] = np.array([float(v) for v in values.split()])
    return table


def _cmd_train(args) -> int:
    corpus = _read_corpus(args.corpus)
    cfg = TrainConfig(
        objective=args.objective,
        rho=args.rho,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        learning_rate=args.lr,
        d=args.d,
        n_layers=args.layers,
        n_heads=args.heads,
        l_max=args.l_max,
    )
    vocab = Vocab.load(args.vocab) if args.vocab else None
    model = train(corpus, cfg, vocab=vocab)
    save(model, args.out)
    print(json.dumps(model.training_log))
    return 0


def _cmd_decode(args) -> int:
    model = load(args.model)
    cfg = DecoderConfig(
        strategy=args.strategy,
        k=args.k,
        alpha=args.alpha,
        beam_width=args.beam_width,
        nucleus_p=args.nucleus_p,
        max_new_tokens=args.max_new,
        seed=args.seed,
    )
    prefix = model.vocab.encode_text(args.prefix)
    ids, trace = decode(model, prefix, cfg)
    print(model.vocab.decode_text(ids))
    if args.trace:
        Path(args.trace).write_text(json.dumps(trace.to_dict()), encoding="utf-8")
    return 0


def _cmd_correct(args) -> int:
    crf = load(args.model) if args.model else None
    null_model = load(args.null_model) if args.null_model else None
    if crf is None and null_model is None:
        raise InvalidArgumentError("provide --model and/or --null-model")
    sentences = _read_corpus(getattr(args, "in"))
    with open(args.out, "w", encoding="utf-8") as fh:
        for tokens in sentences:
            edits = []
            if crf is not None:
                _, subs = correct_substitutions(crf, tokens)
                edits.extend(subs)
            if null_model is not None:
                edits.extend(null_detect(null_model, tokens))
            corrected = apply_edits(tokens, edits)
            fh.write(
                json.dumps(
                    {
                        "text": " ".join(tokens),
                        "edits": [e.as_dict() for e in edits],
                        "corrected": " ".join(corrected),
                    }
                )
                + "\n"
            )
    return 0


def _cmd_infill(args) -> int:
    model = load(args.model)
    keywords = [kw.strip().split() for kw in args.keywords.split(",") if kw.strip()]
    cfg = DecoderConfig(
        strategy=args.strategy,
        k=args.k,
        alpha=args.alpha,
        nucleus_p=args.nucleus_p,
        max_new_tokens=args.max_new,
        seed=args.seed,
    )
    sentences, report = infill_generate(model, keywords, cfg, n_candidates=args.n)
    for sent in sentences:
        print(" ".join(sent))
    print(json.dumps(report), file=sys.stderr)
    return 0


def _cmd_polish(args) -> int:
    graph = SimilarityGraph.load(args.graph)
    tokens = args.sentence.split()
    start, length = (int(x) for x in args.span.split(","))
    cfg = PolishConfig(lam=args.lam, window=args.window, top_m=args.top_m)
    for cand in polish(tokens, (start, length), graph, cfg):
        print(json.dumps(cand.as_dict()))
    return 0


def _cmd_build_graph(args) -> int:
    emb = _read_embeddings(args.embeddings)
    graph = build_graph(emb, topn=args.topn)
    graph.save(args.out)
    print(f"graph over {len(graph.nodes)} phrases -> {args.out}")
    return 0


def _cmd_expand(args) -> int:
    model = load(args.model)
    framed = conditional_format((args.text.split(),), FRAME_PREFIX_SEP)
    prefix = model.vocab.encode(framed)
    cfg = DecoderConfig(
        strategy=args.strategy,
        k=args.k,
        alpha=args.alpha,
        max_new_tokens=args.max_new,
        seed=args.seed,
    )
    ids, _ = decode(model, prefix, cfg)
    if ids and ids[-1] == model.vocab.cls_id:
        ids = ids[:-1]
    print(model.vocab.decode_text(ids))
    return 0


def _cmd_mine(args) -> int:
    emb = _read_embeddings(args.embeddings)
    pairs = []
    if args.pairs:
        pairs.extend(read_pairs(args.pairs))
    if args.corpus and args.query:
        corpus = _read_corpus(args.corpus)
        pairs.extend(mine_retrieval(corpus, args.query.split(), args.topn, emb))
    if args.backtranslate:
        table = json.loads(Path(args.backtranslate).read_text(encoding="utf-8"))
        client = MockTranslationClient(
            table=table.get("forward", {}), reverse_table=table.get("backward", {})
        )
        for line in _read_corpus(args.corpus or args.pairs):
            pairs.append(backtranslate(client, line, args.pivot))
    kept, report = filter_pairs(pairs, args.min_lex, args.min_wmd, args.min_sem, emb)
    write_pairs(kept, args.out)
    print(json.dumps(report))
    return 0


def _cmd_evaluate(args) -> int:
    report = EvalReport()
    if args.outputs:
        outputs = _read_corpus(args.outputs)
        for n in (1, 2):
            report.distinct[n] = distinct_n(outputs, n)
        if args.keywords:
            kws = args.keywords.split(",")
            flat = [t for kw in kws for t in kw.split()]
            vals = [novelty(flat, out) for out in outputs if out]
            report.novelty = sum(vals) / len(vals) if vals else 0.0
    if args.gold and args.hyp:
        gold_rows = [line.split("\t") for line in Path(args.gold).read_text(encoding="utf-8").splitlines() if line.strip()]
        gold = [(src.split(), tgt.split()) for src, tgt in gold_rows]
        hyp = _read_corpus(args.hyp)
        report.detection, report.correction = sentence_prf(gold, hyp)
    print(json.dumps(report.as_dict(), sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    config = load_config(args.config)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="draftkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a causal LM from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--objective", choices=["mle", "contrastive"], default="mle")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--l-max", type=int, default=128)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="generate a continuation for a prefix")
    p.add_argument("--model", required=True)
    p.add_argument("--prefix", required=True)
    p.add_argument("--strategy", choices=["greedy", "beam", "nucleus", "contrastive"], default="contrastive")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--beam-width", type=int, default=4)
    p.add_argument("--nucleus-p", type=float, default=0.95)
    p.add_argument("--max-new", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("correct", help="propose corrections for each input line")
    p.add_argument("--model")
    p.add_argument("--null-model")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_correct)

    p = sub.add_parser("infill", help="keywords to sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--keywords", required=True, help="comma-separated keywords")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--strategy", choices=["greedy", "beam", "nucleus", "contrastive"], default="contrastive")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--nucleus-p", type=float, default=0.95)
    p.add_argument("--max-new", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_infill)

    p = sub.add_parser("polish", help="rank replacements for a sentence span")
    p.add_argument("--graph", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--span", required=True, help="start,length in tokens")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--top-m", type=int, default=5)
    p.set_defaults(func=_cmd_polish)

    p = sub.add_parser("build-graph", help="build a phrase similarity graph")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--topn", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("expand", help="expand a skeleton sentence")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--strategy", choices=["greedy", "beam", "nucleus", "contrastive"], default="contrastive")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--max-new", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_expand)

    p = sub.add_parser("mine", help="mine and filter paraphrase pairs")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--pairs", help="existing pair jsonl to refilter")
    p.add_argument("--corpus")
    p.add_argument("--query")
    p.add_argument("--topn", type=int, default=5)
    p.add_argument("--backtranslate", help="mock translation table json")
    p.add_argument("--pivot", default="pivot")
    p.add_argument("--min-lex", type=int, default=2)
    p.add_argument("--min-wmd", type=float, default=0.05)
    p.add_argument("--min-sem", type=float, default=0.6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("evaluate", help="emit an evaluation report as JSON")
    p.add_argument("--outputs", help="generated sentences, one per line")
    p.add_argument("--keywords", help="comma-separated keywords for novelty")
    p.add_argument("--gold", help="tab-separated source/target per line")
    p.add_argument("--hyp", help="corrected sentences, one per line")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP suggestion service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (InvalidArgumentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DraftkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
