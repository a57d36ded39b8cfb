import math
import random

import numpy as np
import pytest

from afsp.corpus import Corpus, DemoPair
from afsp.embedding import (
    DenseVec,
    MultiVec,
    SparseWeights,
    dense_embed,
    embed_tokens,
    init_projections,
    multi_embed,
    sparse_embed,
)
from afsp.errors import (
    DimensionMismatch,
    EmptyQuery,
    EmptyText,
    FingerprintMismatch,
    VersionMismatch,
)
from afsp.retrieval import (
    Weights,
    build_index,
    load_index,
    retrieve_topk,
    save_index,
    score_dense,
    score_hybrid,
    score_multi,
    score_sparse,
    table_fingerprint,
)
from helpers import corpus_table, en_sentence, synthetic_corpus, zh_sentence


def unit(values):
    arr = np.array(values, dtype=np.float32)
    return DenseVec(values=arr / np.linalg.norm(arr))


def unit_rows(rows):
    arr = np.array(rows, dtype=np.float64)
    arr /= np.linalg.norm(arr, axis=1, keepdims=True)
    return MultiVec(rows=arr.astype(np.float32))


def test_score_dense_cases():
    q = unit([0.6, 0.8])
    assert score_dense(q, q) == pytest.approx(1.0, abs=1e-6)
    assert score_dense(unit([1, 0]), unit([0, 1])) == pytest.approx(0.0, abs=1e-7)
    assert score_dense(unit([0.6, 0.8]), unit([0.8, 0.6])) == pytest.approx(0.96, abs=1e-6)


def test_score_dense_symmetric_and_dim_checked():
    a, b = unit([0.3, 0.7]), unit([0.9, 0.1])
    assert score_dense(a, b) == score_dense(b, a)
    with pytest.raises(DimensionMismatch):
        score_dense(unit([1, 0]), unit([1, 0, 0]))


def test_score_sparse_cases():
    assert score_sparse(SparseWeights({1: 1.0}), SparseWeights({2: 1.0})) == 0.0
    assert score_sparse(SparseWeights({5: 0.5}), SparseWeights({5: 0.4})) == pytest.approx(0.2)
    q = SparseWeights({1: 1.0, 2: 2.0})
    p = SparseWeights({2: 3.0, 3: 1.0})
    assert score_sparse(q, p) == pytest.approx(6.0)
    assert score_sparse(p, q) == score_sparse(q, p)


def test_score_sparse_bitwise_symmetric_for_equal_sizes():
    # equal-size maps exercise the canonical summation order; symmetry must
    # hold exactly, not just within tolerance
    rng = random.Random(3)
    for _ in range(50):
        ids = rng.sample(range(1000), 40)
        q = SparseWeights({t: rng.random() for t in ids[:25]})
        p = SparseWeights({t: rng.random() for t in ids[10:35]})
        assert score_sparse(q, p) == score_sparse(p, q)


def test_score_multi_cases():
    q = unit_rows([[1, 0], [0, 1]])
    assert score_multi(q, q) == pytest.approx(1.0, abs=1e-6)

    a = unit_rows([[1.0, 0.0]])
    cos03 = unit_rows([[0.3, math.sqrt(1 - 0.09)]])
    assert score_multi(a, cos03) == pytest.approx(0.3, abs=1e-6)

    u = np.array([1.0, 0.0])
    v = np.array([0.6, 0.8])
    q = unit_rows([u, v])
    p = unit_rows([u])
    assert score_multi(q, p) == pytest.approx((1.0 + float(u @ v)) / 2.0, abs=1e-6)
    # not symmetric: every row of p matches itself in q
    assert score_multi(p, q) == pytest.approx(1.0, abs=1e-6)

    with pytest.raises(DimensionMismatch):
        score_multi(unit_rows([[1, 0]]), unit_rows([[1, 0, 0]]))


def test_score_hybrid_cases():
    w = Weights(0.4, 0.4, 0.2)
    assert score_hybrid(0.9, 2.5, 0.8, w) == 1.52
    assert score_hybrid(0.0, 0.0, 0.0, w) == 0.0
    assert score_hybrid(0.7, 99.0, -5.0, Weights(1, 0, 0)) == 0.7


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(-0.1, 0.5, 0.5)
    with pytest.raises(ValueError):
        Weights(0.0, 0.0, 0.0)
    Weights(0.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def stack():
    corpus = synthetic_corpus(60, seed=21, unique_src=True)
    table = corpus_table(dim=32)
    proj = init_projections(32, seed=13)
    index = build_index(corpus, table, proj)
    return corpus, table, proj, index


def test_build_index_order_and_fingerprint(stack):
    corpus, table, proj, index = stack
    assert len(index) == len(corpus)
    assert [e.pair.id for e in index.entries] == [p.id for p in corpus]
    assert index.fingerprint == table_fingerprint(table, proj)


def test_build_index_reports_offending_pair():
    bad = Corpus(
        [
            DemoPair("ok", "你好", "hello", "zh", "en"),
            DemoPair("bad", "!!!", "hello again", "zh", "en"),
        ]
    )
    table = corpus_table(dim=8)
    proj = init_projections(8, seed=1)
    with pytest.raises(EmptyText, match="bad"):
        build_index(bad, table, proj)


def test_index_round_trip_and_determinism(tmp_path, stack):
    _, table, proj, index = stack
    a, b = tmp_path / "a.idx", tmp_path / "b.idx"
    save_index(index, a)
    save_index(index, b)
    assert a.read_bytes() == b.read_bytes()

    loaded = load_index(a)
    assert loaded.fingerprint == index.fingerprint
    assert len(loaded) == len(index)
    for orig, back in zip(index.entries, loaded.entries):
        assert orig.pair == back.pair
        assert orig.dense.values.tobytes() == back.dense.values.tobytes()
        assert orig.sparse.weights == back.sparse.weights
        assert orig.multi.rows.tobytes() == back.multi.rows.tobytes()


def test_index_bad_magic_and_truncation(tmp_path, stack):
    *_, index = stack
    path = tmp_path / "x.idx"
    save_index(index, path)
    data = path.read_bytes()
    path.write_bytes(b"BADMAGIC" + data[8:])
    with pytest.raises(VersionMismatch):
        load_index(path)
    path.write_bytes(data[: len(data) - 100])
    with pytest.raises(VersionMismatch):
        load_index(path)


def test_retrieve_identical_source_ranks_first(stack):
    corpus, table, proj, index = stack
    w = Weights()
    for pair in list(corpus)[::7]:
        top = retrieve_topk(pair.src_text, index, table, proj, w, k=3)
        assert top[0].pair.id == pair.id


def test_retrieve_k_and_short_corpus(stack):
    corpus, table, proj, index = stack
    w = Weights()
    assert len(retrieve_topk("双方同意加强合作", index, table, proj, w, k=3)) == 3
    assert len(retrieve_topk("双方同意加强合作", index, table, proj, w, k=500)) == len(corpus)
    with pytest.raises(ValueError):
        retrieve_topk("双方", index, table, proj, w, k=0)


def test_retrieve_tie_breaks_by_corpus_order():
    pairs = [
        DemoPair("first", "你好世界", "hello world", "zh", "en"),
        DemoPair("clone", "你好世界", "hello world again", "zh", "en"),
        DemoPair("other", "完全不同的句子内容", "something else", "zh", "en"),
    ]
    table = corpus_table(dim=16)
    proj = init_projections(16, seed=2)
    index = build_index(Corpus(pairs), table, proj)
    top = retrieve_topk("你好世界", index, table, proj, Weights(), k=2)
    assert [s.pair.id for s in top] == ["first", "clone"]
    assert top[0].s_rank == top[1].s_rank


def test_retrieve_fingerprint_mismatch(stack):
    _, table, proj, index = stack
    other = init_projections(32, seed=99)
    with pytest.raises(FingerprintMismatch):
        retrieve_topk("你好", index, table, other, Weights(), k=1)


def test_retrieve_empty_query(stack):
    _, table, proj, index = stack
    with pytest.raises(EmptyQuery):
        retrieve_topk("   ", index, table, proj, Weights(), k=1)


def brute_force(query, index, table, proj, weights, normalize=False):
    """Independent exhaustive scorer built from raw numpy on the entry data."""
    emb = embed_tokens(table, query)
    qd = dense_embed(emb).values.astype(np.float64)
    qs = sparse_embed(emb, proj).weights
    qm = multi_embed(emb, proj).rows.astype(np.float64)
    rows = []
    for pos, entry in enumerate(index.entries):
        sd = float(qd @ entry.dense.values.astype(np.float64))
        ss = 0.0
        for tid, w in qs.items():
            if tid in entry.sparse.weights:
                ss += w * entry.sparse.weights[tid]
        sims = qm @ entry.multi.rows.astype(np.float64).T
        sm = float(np.mean(np.max(sims, axis=1)))
        rows.append([pos, sd, ss, sm])
    if normalize:
        for col in (1, 2, 3):
            vals = [r[col] for r in rows]
            lo, hi = min(vals), max(vals)
            for r in rows:
                r[col] = 0.0 if hi - lo < 1e-12 else (r[col] - lo) / (hi - lo)
    scored = [
        (pos, sd, ss, sm, weights.alpha1 * sd + weights.alpha2 * ss + weights.alpha3 * sm)
        for pos, sd, ss, sm in rows
    ]
    scored.sort(key=lambda r: (-r[4], r[0]))
    return scored


def test_retrieve_matches_brute_force_oracle(stack):
    corpus, table, proj, index = stack
    rng = random.Random(31)
    w = Weights()
    for i in range(20):
        query = zh_sentence(rng) if i % 3 else en_sentence(rng)
        got = retrieve_topk(query, index, table, proj, w, k=5)
        want = brute_force(query, index, table, proj, w)[:5]
        assert [g.pair.id for g in got] == [index.entries[r[0]].pair.id for r in want]
        for g, r in zip(got, want):
            assert g.s_dense == pytest.approx(r[1], abs=1e-6)
            assert g.s_sparse == pytest.approx(r[2], abs=1e-6)
            assert g.s_multi == pytest.approx(r[3], abs=1e-6)
            assert g.s_rank == pytest.approx(r[4], abs=1e-6)


def test_retrieve_normalized_matches_oracle(stack):
    corpus, table, proj, index = stack
    w = Weights()
    query = "双方同意加强双边合作"
    got = retrieve_topk(query, index, table, proj, w, k=4, normalize_scores=True)
    want = brute_force(query, index, table, proj, w, normalize=True)[:4]
    assert [g.pair.id for g in got] == [index.entries[r[0]].pair.id for r in want]
    for g, r in zip(got, want):
        assert g.s_rank == pytest.approx(r[4], abs=1e-6)
        assert g.s_rank == pytest.approx(
            w.alpha1 * g.s_dense + w.alpha2 * g.s_sparse + w.alpha3 * g.s_multi, abs=1e-9
        )


def test_alpha_scaling_preserves_order(stack):
    _, table, proj, index = stack
    rng = random.Random(7)
    query = "中方重申致力于地区和平与稳定"
    base = retrieve_topk(query, index, table, proj, Weights(0.4, 0.4, 0.2), k=10)
    for _ in range(5):
        c = rng.uniform(0.1, 9.0)
        scaled = retrieve_topk(
            query, index, table, proj, Weights(0.4 * c, 0.4 * c, 0.2 * c), k=10
        )
        assert [s.pair.id for s in scaled] == [s.pair.id for s in base]
        for a, b in zip(scaled, base):
            assert a.s_rank == pytest.approx(b.s_rank * c, rel=1e-9)


def test_adding_pair_keeps_relative_order(stack):
    corpus, table, proj, _ = stack
    w = Weights()
    query = "代表团欢迎对话与交流"
    small = build_index(Corpus(list(corpus)[:30]), table, proj)
    extended = build_index(
        Corpus(list(corpus)[:30] + [DemoPair("extra", "新增的一句话", "a new sentence", "zh", "en")]),
        table,
        proj,
    )
    order_small = [s.pair.id for s in retrieve_topk(query, small, table, proj, w, k=30)]
    order_big = [
        s.pair.id
        for s in retrieve_topk(query, extended, table, proj, w, k=31)
        if s.pair.id != "extra"
    ]
    assert order_big == order_small


def test_self_similarity_on_random_texts(stack):
    _, table, proj, _ = stack
    rng = random.Random(41)
    for i in range(10):
        text = en_sentence(rng) if i % 2 else zh_sentence(rng)
        emb = embed_tokens(table, text)
        d = dense_embed(emb)
        m = multi_embed(emb, proj)
        assert score_dense(d, d) == pytest.approx(1.0, abs=1e-6)
        assert score_multi(m, m) == pytest.approx(1.0, abs=1e-6)
