"""Shared test data builders: seeded synthetic zh->en corpora and tables."""

from __future__ import annotations

import random

from afsp.corpus import Corpus, DemoPair
from afsp.embedding import EmbeddingTable, synthetic_table

# A small recurring phrase inventory: diplomatic-register chunks compose
# into sentences whose n-gram statistics are stable across the corpus, the
# way real domain corpora repeat phrasing.
EN_SUBJECTS = ["the two sides", "the government", "the spokesperson", "both parties"]
EN_VERBS = [
    "agreed to strengthen",
    "will continue to promote",
    "expressed concern about",
    "called for",
]
EN_OBJECTS = [
    "bilateral cooperation",
    "regional peace and stability",
    "dialogue and exchange",
    "mutual trust",
]
EN_TAILS = ["in the coming years", "at the meeting today", "through diplomatic channels", ""]
ZH_SUBJECTS = ["双方", "中方", "外交部发言人", "两国政府"]
ZH_VERBS = ["同意加强", "将继续推动", "对此表示关切", "呼吁各方维护"]
ZH_OBJECTS = ["双边合作", "地区和平与稳定", "对话与交流", "相互信任"]
ZH_TAILS = ["在未来几年", "在今天的会议上", "通过外交渠道", ""]


def en_sentence(rng: random.Random) -> str:
    parts = [rng.choice(EN_SUBJECTS), rng.choice(EN_VERBS), rng.choice(EN_OBJECTS)]
    parts += ["and", rng.choice(EN_VERBS), rng.choice(EN_OBJECTS)]
    tail = rng.choice(EN_TAILS)
    if tail:
        parts.append(tail)
    text = " ".join(parts)
    return text[0].upper() + text[1:] + "."


def zh_sentence(rng: random.Random) -> str:
    parts = [rng.choice(ZH_SUBJECTS), rng.choice(ZH_VERBS), rng.choice(ZH_OBJECTS)]
    parts += ["，并", rng.choice(ZH_VERBS), rng.choice(ZH_OBJECTS)]
    tail = rng.choice(ZH_TAILS)
    if tail:
        parts.append(tail)
    return "".join(parts) + "。"


def synthetic_pairs(
    count: int, seed: int, id_prefix: str = "", unique_src: bool = False
) -> list[DemoPair]:
    rng = random.Random(seed)
    pairs = []
    seen: set[str] = set()
    for i in range(count):
        src = zh_sentence(rng)
        if unique_src:
            attempts = 0
            while src in seen:
                src = zh_sentence(rng)
                attempts += 1
                if attempts > 10000:
                    raise RuntimeError("cannot draw enough distinct source sentences")
            seen.add(src)
        pairs.append(
            DemoPair(
                id=f"{id_prefix}{i:05d}",
                src_text=src,
                tgt_text=en_sentence(rng),
                src_lang="zh",
                tgt_lang="en",
            )
        )
    return pairs


def synthetic_corpus(
    count: int, seed: int, id_prefix: str = "", unique_src: bool = False
) -> Corpus:
    return Corpus(synthetic_pairs(count, seed, id_prefix, unique_src=unique_src))


def corpus_vocab() -> list[str]:
    words = sorted(
        {w for s in EN_SUBJECTS + EN_VERBS + EN_OBJECTS + EN_TAILS for w in s.split()}
    )
    chars = sorted(
        {c for s in ZH_SUBJECTS + ZH_VERBS + ZH_OBJECTS + ZH_TAILS for c in s}
    )
    return words + chars


def corpus_table(dim: int = 64, seed: int = 5, oov_seed: int = 1) -> EmbeddingTable:
    return synthetic_table(corpus_vocab(), dim, seed=seed, oov_seed=oov_seed)


def write_jsonl(path, pairs: list[DemoPair]) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "id": p.id,
                        "src": p.src_text,
                        "tgt": p.tgt_text,
                        "src_lang": p.src_lang,
                        "tgt_lang": p.tgt_lang,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
