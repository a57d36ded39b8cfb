"""End-to-end translation flow: retrieve -> prompt -> generate -> rerank.

A loaded pipeline holds read-only artifacts (retrieval index, embedding
table, projections, reranker model) plus a candidate-generation client, and
translates one sentence or a file of sentences. Configuration comes from a
YAML file with flat per-module sections; CLI flags override file values,
which override defaults.

Stage failures are wrapped in StageError with a stage label (retrieval /
prompt / generation / rerank) so batch runs stay debuggable. With everything
seeded and a mock client, a translation run is fully deterministic.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .embedding import EmbeddingTable, ProjectionSet, init_projections, load_table
from .errors import AfspError, StageError
from .llm_client import ChatCompletionsClient, GenerationConfig
from .prompting import PromptRequest, lang_display_name, render_prompt
from .reranker import NGramRegressor, QualityScorer, load_model, rank
from .retrieval import RetrievalIndex, Weights, load_index, retrieve_topk

logger = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.4, 0.4, 0.2)
DEFAULT_K = 3


@dataclass
class PipelineConfig:
    """Paths plus per-stage settings; defaults follow the standard setup
    (fusion weights 0.4/0.4/0.2, three demonstrations)."""

    corpus_path: str | None = None
    table_path: str | None = None
    index_path: str | None = None
    reranker_path: str | None = None
    alpha1: float = DEFAULT_ALPHAS[0]
    alpha2: float = DEFAULT_ALPHAS[1]
    alpha3: float = DEFAULT_ALPHAS[2]
    k: int = DEFAULT_K
    normalize_scores: bool = False
    projection_seed: int = 0
    degrade_seed: int = 0
    train_seed: int = 0
    lang_names: dict[str, str] = field(default_factory=dict)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    tokenize: str = "auto"

    @property
    def weights(self) -> Weights:
        return Weights(self.alpha1, self.alpha2, self.alpha3)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a YAML config file (sections: paths, retrieval, seeds,
    lang_names, generation, metrics)."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    cfg = PipelineConfig()
    paths = raw.get("paths", {})
    cfg.corpus_path = paths.get("corpus", cfg.corpus_path)
    cfg.table_path = paths.get("table", cfg.table_path)
    cfg.index_path = paths.get("index", cfg.index_path)
    cfg.reranker_path = paths.get("reranker", cfg.reranker_path)
    retrieval = raw.get("retrieval", {})
    alphas = retrieval.get("alphas")
    if alphas is not None:
        if len(alphas) != 3:
            raise ValueError("retrieval.alphas must have exactly 3 entries")
        cfg.alpha1, cfg.alpha2, cfg.alpha3 = (float(a) for a in alphas)
    cfg.k = int(retrieval.get("k", cfg.k))
    cfg.normalize_scores = bool(retrieval.get("normalize_scores", cfg.normalize_scores))
    seeds = raw.get("seeds", {})
    cfg.projection_seed = int(seeds.get("projection", cfg.projection_seed))
    cfg.degrade_seed = int(seeds.get("degrade", cfg.degrade_seed))
    cfg.train_seed = int(seeds.get("train", cfg.train_seed))
    cfg.lang_names = dict(raw.get("lang_names", {}))
    gen = raw.get("generation", {})
    known = {f for f in GenerationConfig.__dataclass_fields__}
    unknown = set(gen) - known
    if unknown:
        raise ValueError(f"unknown generation settings: {sorted(unknown)}")
    cfg.generation = replace(GenerationConfig(), **gen)
    cfg.tokenize = raw.get("metrics", {}).get("tokenize", cfg.tokenize)
    return cfg


@dataclass(frozen=True)
class TranslationResult:
    best: str
    candidates: tuple[tuple[str, float | None], ...]
    demos_used: tuple[str, ...]


@dataclass
class BatchSummary:
    count: int = 0
    failures: int = 0
    wall_time: float = 0.0


class TranslationPipeline:
    """Translate with retrieved demonstrations and reranked candidates."""

    def __init__(
        self,
        index: RetrievalIndex,
        table: EmbeddingTable,
        projections: ProjectionSet,
        config: PipelineConfig,
        client,
        scorer: QualityScorer | None = None,
    ):
        self.index = index
        self.table = table
        self.projections = projections
        self.config = config
        self.client = client
        self.scorer = scorer
        first = index.entries[0].pair
        self.src_lang_name = lang_display_name(first.src_lang, config.lang_names)
        self.tgt_lang_name = lang_display_name(first.tgt_lang, config.lang_names)

    @classmethod
    def from_config(cls, config: PipelineConfig, client=None) -> "TranslationPipeline":
        """Load all artifacts named in the config from disk."""
        if not config.table_path or not config.index_path:
            raise ValueError("config must name an embedding table and an index")
        table = load_table(config.table_path)
        projections = init_projections(table.dim, config.projection_seed)
        index = load_index(config.index_path)
        scorer: NGramRegressor | None = None
        if config.reranker_path:
            scorer = load_model(config.reranker_path)
        return cls(
            index=index,
            table=table,
            projections=projections,
            config=config,
            client=client or ChatCompletionsClient(),
            scorer=scorer,
        )

    def _retrieve(self, text: str) -> tuple[tuple[tuple[str, str], ...], tuple[str, ...]]:
        if self.config.k < 1:
            return (), ()
        try:
            scored = retrieve_topk(
                text,
                self.index,
                self.table,
                self.projections,
                self.config.weights,
                self.config.k,
                normalize_scores=self.config.normalize_scores,
            )
        except AfspError as exc:
            raise StageError("retrieval", exc) from exc
        demos = tuple((s.pair.src_text, s.pair.tgt_text) for s in scored)
        ids = tuple(s.pair.id for s in scored)
        return demos, ids

    def build_prompt(self, text: str) -> str:
        """The exact prompt translate() would send for this input."""
        demos, _ = self._retrieve(text)
        return self._render(text, demos)

    def _render(self, text: str, demos: tuple[tuple[str, str], ...]) -> str:
        try:
            return render_prompt(
                PromptRequest(
                    src_lang_name=self.src_lang_name,
                    tgt_lang_name=self.tgt_lang_name,
                    input_text=text,
                    demos=demos,
                )
            )
        except AfspError as exc:
            raise StageError("prompt", exc) from exc

    def translate(self, text: str) -> TranslationResult:
        """Best candidate plus the full scored list and demo provenance.

        With n_candidates == 1 the reranker is bypassed and the sole
        candidate is returned directly (its score slot is None).
        """
        demos, demo_ids = self._retrieve(text)
        prompt = self._render(text, demos)
        try:
            candidate_set = self.client.generate_candidates(prompt, self.config.generation)
        except AfspError as exc:
            raise StageError("generation", exc) from exc
        candidates = list(candidate_set.candidates)
        if self.config.generation.n_candidates == 1:
            return TranslationResult(
                best=candidates[0],
                candidates=((candidates[0], None),),
                demos_used=demo_ids,
            )
        if self.scorer is None:
            raise StageError(
                "rerank",
                ValueError(
                    "no reranker model configured; set n_candidates=1 to skip reranking"
                ),
            )
        try:
            ranked = rank(self.scorer, candidates)
        except AfspError as exc:
            raise StageError("rerank", exc) from exc
        ordered = tuple((candidates[i], s) for i, s in ranked)
        return TranslationResult(
            best=ordered[0][0], candidates=ordered, demos_used=demo_ids
        )

    def _translate_line(self, line: str):
        try:
            return self.translate(line)
        except StageError as exc:
            return exc

    def translate_file(
        self,
        input_path: str | Path,
        output_path: str | Path,
        audit_path: str | Path | None = None,
    ) -> BatchSummary:
        """One translation per input line, order preserved; failed lines
        produce an empty output line and count as failures."""
        started = time.monotonic()
        with open(input_path, encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh]
        summary = BatchSummary(count=len(lines))
        workers = max(1, self.config.generation.max_in_flight)
        audit_fh = open(audit_path, "w", encoding="utf-8") if audit_path else None
        try:
            with open(output_path, "w", encoding="utf-8") as out_fh:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    for line, result in zip(lines, pool.map(self._translate_line, lines)):
                        if isinstance(result, StageError):
                            summary.failures += 1
                            logger.error("line failed: %s", result)
                            out_fh.write("\n")
                            if audit_fh:
                                audit_fh.write(
                                    json.dumps(
                                        {"input": line, "error": str(result)},
                                        ensure_ascii=False,
                                    )
                                    + "\n"
                                )
                        else:
                            out_fh.write(result.best + "\n")
                            if audit_fh:
                                audit_fh.write(
                                    json.dumps(
                                        {
                                            "input": line,
                                            "demos": list(result.demos_used),
                                            "candidates": [
                                                {"text": t, "score": s}
                                                for t, s in result.candidates
                                            ],
                                            "best": result.best,
                                        },
                                        ensure_ascii=False,
                                    )
                                    + "\n"
                                )
                        out_fh.flush()
                        if audit_fh:
                            audit_fh.flush()
        finally:
            if audit_fh:
                audit_fh.close()
        summary.wall_time = time.monotonic() - started
        return summary


def translate(source_sentence: str, config: PipelineConfig, client=None) -> TranslationResult:
    """Convenience single-sentence entry point; loads artifacts per call.
    Use TranslationPipeline directly for batches."""
    return TranslationPipeline.from_config(config, client=client).translate(source_sentence)
