"""Command-line interface: every pipeline stage as a subcommand.

Settings resolve as flags > config file > defaults. Exit codes: 0 success,
2 validation error, 3 external-service failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import corpus as corpus_mod
from . import degeneration, metrics, reranker
from . import retrieval as retrieval_mod
from .embedding import init_projections, load_table
from .errors import (
    AfspError,
    AllCandidatesEmpty,
    MalformedResponse,
    NetworkFailure,
    RateLimited,
    ScriptMiss,
    StageError,
)
from .llm_client import EndpointTranslator, GenerationConfig, MockClient
from .pipeline import PipelineConfig, TranslationPipeline, load_config
from .prompting import PromptRequest, lang_display_name, render_prompt

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SERVICE = 3

_SERVICE_ERRORS = (NetworkFailure, RateLimited, MalformedResponse, AllCandidatesEmpty, ScriptMiss)


def _parse_alphas(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"--alphas needs three comma-separated values, got {text!r}")
    return float(parts[0]), float(parts[1]), float(parts[2])


def _base_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "index", None):
        cfg.index_path = args.index
    if getattr(args, "embeddings", None):
        cfg.table_path = args.embeddings
    if getattr(args, "reranker", None):
        cfg.reranker_path = args.reranker
    if getattr(args, "seed", None) is not None:
        cfg.projection_seed = args.seed
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if getattr(args, "alphas", None):
        cfg.alpha1, cfg.alpha2, cfg.alpha3 = _parse_alphas(args.alphas)
    if getattr(args, "normalize_scores", False):
        cfg.normalize_scores = True
    gen_overrides = {}
    if getattr(args, "endpoint", None):
        gen_overrides["endpoint"] = args.endpoint
    if getattr(args, "model", None):
        gen_overrides["model"] = args.model
    if getattr(args, "n_candidates", None) is not None:
        gen_overrides["n_candidates"] = args.n_candidates
    if gen_overrides:
        cfg.generation = replace(cfg.generation, **gen_overrides)
    return cfg


def _load_retrieval_stack(cfg: PipelineConfig):
    if not cfg.table_path or not cfg.index_path:
        raise ValueError("need an embedding table and an index (flags or config file)")
    table = load_table(cfg.table_path)
    proj = init_projections(table.dim, cfg.projection_seed)
    index = retrieval_mod.load_index(cfg.index_path)
    return table, proj, index


def cmd_ingest(args) -> int:
    loaded = corpus_mod.ingest(args.input, format=args.format)
    corpus_mod.save(loaded, args.out)
    print(
        json.dumps(
            {
                "pairs": len(loaded),
                "src_lang": loaded.src_lang,
                "tgt_lang": loaded.tgt_lang,
                "out": str(args.out),
            }
        )
    )
    return EXIT_OK


def cmd_index(args) -> int:
    loaded = corpus_mod.load(args.corpus)
    table = load_table(args.embeddings)
    proj = init_projections(table.dim, args.seed)
    index = retrieval_mod.build_index(loaded, table, proj)
    retrieval_mod.save_index(index, args.out)
    print(json.dumps({"entries": len(index), "out": str(args.out)}))
    return EXIT_OK


def cmd_retrieve(args) -> int:
    cfg = _base_config(args)
    table, proj, index = _load_retrieval_stack(cfg)
    scored = retrieval_mod.retrieve_topk(
        args.query, index, table, proj, cfg.weights, cfg.k,
        normalize_scores=cfg.normalize_scores,
    )
    print(
        json.dumps(
            [
                {
                    "id": s.pair.id,
                    "src": s.pair.src_text,
                    "tgt": s.pair.tgt_text,
                    "s_dense": s.s_dense,
                    "s_sparse": s.s_sparse,
                    "s_multi": s.s_multi,
                    "s_rank": s.s_rank,
                }
                for s in scored
            ],
            ensure_ascii=False,
        )
    )
    return EXIT_OK


def cmd_prompt(args) -> int:
    cfg = _base_config(args)
    table, proj, index = _load_retrieval_stack(cfg)
    demos: tuple[tuple[str, str], ...] = ()
    if cfg.k >= 1:
        scored = retrieval_mod.retrieve_topk(
            args.query, index, table, proj, cfg.weights, cfg.k,
            normalize_scores=cfg.normalize_scores,
        )
        demos = tuple((s.pair.src_text, s.pair.tgt_text) for s in scored)
    first = index.entries[0].pair
    prompt = render_prompt(
        PromptRequest(
            src_lang_name=lang_display_name(first.src_lang, cfg.lang_names),
            tgt_lang_name=lang_display_name(first.tgt_lang, cfg.lang_names),
            input_text=args.query,
            demos=demos,
        )
    )
    print(prompt)
    return EXIT_OK


def cmd_degrade(args) -> int:
    if args.max_ops >= 1 and not args.embeddings and not args.synonyms:
        raise ValueError(
            "degrade needs --embeddings (or --synonyms) for the Replace operation"
        )
    loaded = corpus_mod.load(args.corpus)
    table = load_table(args.embeddings) if args.embeddings else None
    synonyms = degeneration.load_synonyms(args.synonyms) if args.synonyms else None
    if args.translator_endpoint:
        translator = EndpointTranslator(
            GenerationConfig(endpoint=args.translator_endpoint, model=args.model or "default")
        )
    else:
        translator = degeneration.MockBackTranslator(args.seed)
    examples = degeneration.generate_dataset(
        loaded,
        max_size=args.max_ops,
        seed=args.seed,
        translator=translator,
        table=table,
        synonyms=synonyms,
    )
    degeneration.save_examples(examples, args.out)
    print(json.dumps({"examples": len(examples), "out": str(args.out)}))
    return EXIT_OK


def cmd_train_reranker(args) -> int:
    dataset = degeneration.load_examples(args.data)
    model, report = reranker.train(
        dataset,
        epochs=args.epochs,
        learning_rate=args.lr,
        seed=args.seed,
        feature_dim=args.feature_dim,
        hash_seed=args.hash_seed,
    )
    reranker.save_model(model, args.out)
    print(
        json.dumps(
            {
                "examples": len(dataset),
                "initial_mse": report.epoch_mse[0],
                "final_mse": report.epoch_mse[-1],
                "fingerprint": report.fingerprint,
                "out": str(args.out),
            }
        )
    )
    return EXIT_OK


def cmd_translate(args) -> int:
    cfg = _base_config(args)
    client = None
    if args.mock_script:
        with open(args.mock_script, encoding="utf-8") as fh:
            client = MockClient(json.load(fh))
    pipeline = TranslationPipeline.from_config(cfg, client=client)
    if args.text is not None:
        result = pipeline.translate(args.text)
        print(result.best)
        if args.audit:
            with open(args.audit, "w", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {
                            "input": args.text,
                            "demos": list(result.demos_used),
                            "candidates": [
                                {"text": t, "score": s} for t, s in result.candidates
                            ],
                            "best": result.best,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        return EXIT_OK
    if not args.input or not args.out:
        raise ValueError("translate needs --text, or both --input and --out")
    summary = pipeline.translate_file(args.input, args.out, audit_path=args.audit)
    print(
        json.dumps(
            {
                "count": summary.count,
                "failures": summary.failures,
                "wall_time": round(summary.wall_time, 3),
                "out": str(args.out),
            }
        )
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with open(args.hyp, encoding="utf-8") as fh:
        hyps = [line.rstrip("\n") for line in fh]
    with open(args.ref, encoding="utf-8") as fh:
        refs = [line.rstrip("\n") for line in fh]
    requested = tuple(m.strip() for m in args.metrics.split(",") if m.strip())
    report = metrics.evaluate(hyps, refs, metrics=requested, tokenize=args.tokenize)
    # ROUGE is computed on [0, 1] and displayed x100 like the other metrics
    display = {
        name: value * 100.0 if name.startswith("rouge") else value
        for name, value in report.corpus.items()
    }
    print(
        json.dumps(
            {
                "sentences": len(hyps),
                "tokenize": report.tokenize_mode,
                "corpus": display,
                "notes": list(report.notes),
            }
        )
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afsp",
        description="Adaptive few-shot translation prompting pipeline",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load and validate a parallel corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="precompute demonstration representations")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--seed", type=int, default=0, help="projection seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_index)

    def add_query_flags(p):
        p.add_argument("--config")
        p.add_argument("--index")
        p.add_argument("--embeddings")
        p.add_argument("--seed", type=int, default=None, help="projection seed")
        p.add_argument("--query", required=True)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--alphas", help="comma-separated fusion weights, e.g. 0.4,0.4,0.2")
        p.add_argument("--normalize-scores", action="store_true")

    p = sub.add_parser("retrieve", help="top-k demonstrations for a query")
    add_query_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("prompt", help="print the rendered prompt for a query")
    add_query_flags(p)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("degrade", help="build the reranker training set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", help="embedding table for token replacement")
    p.add_argument("--max-ops", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--translator-endpoint", help="chat endpoint for real back-translation")
    p.add_argument("--model", help="model name for --translator-endpoint")
    p.add_argument("--synonyms", help="token TAB synonym... TSV overriding Replace")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train-reranker", help="train the quality scorer")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feature-dim", type=int, default=reranker.DEFAULT_FEATURE_DIM)
    p.add_argument("--hash-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_reranker)

    p = sub.add_parser("translate", help="translate a sentence or a file")
    p.add_argument("--config")
    p.add_argument("--text", help="translate one sentence to stdout")
    p.add_argument("--input", help="file with one source sentence per line")
    p.add_argument("--out", help="output file, one translation per line")
    p.add_argument("--audit", help="write per-line audit JSONL here")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--reranker")
    p.add_argument("--seed", type=int, default=None, help="projection seed")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--alphas")
    p.add_argument("--normalize-scores", action="store_true")
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--n-candidates", type=int, default=None)
    p.add_argument("--mock-script", help="JSON {prompt fingerprint: [candidates]}")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score hypotheses against references")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--metrics", default="bleu,chrf,rouge1,rouge2,rougeL")
    p.add_argument("--tokenize", choices=("auto", "word", "char"), default="auto")
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, _SERVICE_ERRORS):
            return EXIT_SERVICE
        return EXIT_VALIDATION
    except _SERVICE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (AfspError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
