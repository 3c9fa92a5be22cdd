import math
import random
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrag.errors import BuildError, CorpusFormatError, DimensionMismatch, EmbeddingError, IndexFormatError, NormalizationError
from agentrag.retrieval import (
    MAGIC,
    Chunk,
    HashEmbedder,
    LookupEmbedder,
    VectorIndex,
    build_index,
    chunk_corpus,
    embed,
    load_index,
    read_corpus,
    read_header,
    save_index,
    search,
)
from agentrag.testing import case_index, load_case


class ArrayEmbedder:
    """Serves fixed vectors keyed by text; the test's stand-in for a model."""

    def __init__(self, table, ident="array"):
        self.table = table
        self.id = ident
        self.dim = len(next(iter(table.values())))

    def embed_raw(self, texts):
        return np.array([self.table[t] for t in texts], dtype=float)


def oracle(vectors32, ids, q, k):
    q = [float(x) for x in q]
    scored = [(math.fsum(float(a) * b for a, b in zip(row, q)), cid) for row, cid in zip(vectors32, ids)]
    scored.sort(key=lambda t: (-t[0], t[1]))
    return [(cid, r) for r, (_, cid) in enumerate(scored[:k], start=1)]


def random_index(n, dim, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    ids = [f"c{i:05d}" for i in range(n)]
    rng.shuffle(ids)  # id order unrelated to row order
    chunks = [Chunk(cid, "", cid, 1) for cid in ids]
    return VectorIndex(dim, tuple(chunks), v.astype("<f4"), "rand", "0" * 64), rng


# chunking -------------------------------------------------------------------


def doc(n, did="d"):
    return {"id": did, "title": "t", "text": " ".join(f"w{i}" for i in range(n))}


def test_chunk_250_words():
    chunks = list(chunk_corpus([doc(250)], 100, 0))
    assert [c.n_words for c in chunks] == [100, 100, 50]
    assert [c.id for c in chunks] == ["d-0", "d-1", "d-2"]


def test_chunk_exact_fit_roundtrips():
    d = doc(100)
    (c,) = chunk_corpus([d], 100, 0)
    assert c.text == d["text"]


def test_empty_doc_has_no_chunks():
    assert list(chunk_corpus([{"id": "e", "text": "   "}], 100, 0)) == []


def test_bad_window_rejected():
    with pytest.raises(ValueError):
        list(chunk_corpus([doc(5)], 10, 10))


def test_overlap_reconstruction_10k():
    rng = random.Random(7)
    words = [rng.choice(["alpha", "beta", "gamma", "delta", "x", "y"]) + str(rng.randrange(50)) for _ in range(10_000)]
    chunks = list(chunk_corpus([{"id": "big", "text": " ".join(words)}], 100, 20))
    rebuilt = chunks[0].text.split()
    for c in chunks[1:]:
        rebuilt += c.text.split()[20:]
    assert rebuilt == words
    assert all(c.n_words <= 100 for c in chunks)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 400), st.integers(1, 60), st.data())
def test_every_word_covered(n, size, data):
    overlap = data.draw(st.integers(0, size - 1))
    words = doc(n)["text"].split()
    seen = set()
    for c in chunk_corpus([doc(n)], size, overlap):
        seen.update(c.text.split())
    assert seen == set(words)


def test_read_corpus_bad_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "1", "text": "ok"}\n{not json\n')
    with pytest.raises(CorpusFormatError) as exc:
        list(read_corpus(p))
    assert exc.value.lineno == 2


# embedding ------------------------------------------------------------------


def test_hash_embedder_deterministic_and_unit():
    a = embed(["x", "y", "z"], HashEmbedder())
    b = embed(["x", "y", "z"], HashEmbedder())
    assert np.array_equal(a, b)
    assert a.shape == (3, 64)
    assert np.all(np.abs(np.linalg.norm(a, axis=1) - 1) < 1e-6)


def test_batch_order_preserved():
    e = HashEmbedder()
    batch = embed(["a", "b", "c"], e)
    for i, t in enumerate("abc"):
        assert np.array_equal(batch[i], embed([t], e)[0])


def test_engine_normalises_backend_output():
    e = ArrayEmbedder({"a": [3.0, 4.0]})
    np.testing.assert_allclose(embed(["a"], e)[0], [0.6, 0.8])


def test_zero_vector_rejected():
    with pytest.raises(NormalizationError):
        embed(["a"], ArrayEmbedder({"a": [0.0, 0.0]}))


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        embed(["a"], ArrayEmbedder({"a": [1.0, 0.0]}), dim=3)


def test_lookup_strict():
    e = LookupEmbedder({"a": [1.0, 0.0]}, name="t")
    with pytest.raises(EmbeddingError):
        e.embed_raw(["b"])


# index & search ---------------------------------------------------------------


def test_two_chunks():
    idx = build_index([Chunk("a", "", "A", 1), Chunk("b", "", "B", 1)], HashEmbedder())
    assert idx.count == 2


def test_duplicate_ids():
    with pytest.raises(BuildError):
        build_index([Chunk("a", "", "A", 1), Chunk("a", "", "B", 1)], HashEmbedder())


def test_empty_build():
    with pytest.raises(BuildError):
        build_index([], HashEmbedder())


def test_orthonormal_basis():
    table = {f"e{i}": list(np.eye(5)[i]) for i in range(5)}
    table["query"] = list(np.eye(5)[2])
    e = ArrayEmbedder(table)
    idx = build_index([Chunk(str(i + 1), "", f"e{i}", 1) for i in range(5)], e)
    hits = search(idx, "query", 1, e)
    assert hits[0].chunk_id == "3"
    assert abs(hits[0].score - 1.0) < 1e-6


def test_brute_force_1000x100():
    idx, rng = random_index(1000, 32, seed=11)
    for _ in range(100):
        q = rng.standard_normal(32)
        q /= np.linalg.norm(q)
        got = [(h.chunk_id, h.rank) for h in idx.search_vector(q, 5)]
        assert got == oracle(idx.vectors, idx.ids, q, 5)


def test_ties_broken_by_id():
    v = np.zeros((6, 4), dtype="<f4")
    v[:, 0] = 1.0  # all identical
    ids = ["f", "b", "e", "a", "d", "c"]
    idx = VectorIndex(4, tuple(Chunk(i, "", i, 1) for i in ids), v, "dup", "0" * 64)
    first = [h.chunk_id for h in idx.search_vector(np.array([1.0, 0, 0, 0]), 4)]
    assert first == ["a", "b", "c", "d"]
    assert [h.chunk_id for h in idx.search_vector(np.array([1.0, 0, 0, 0]), 4)] == first


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31))
def test_full_ranking_is_sorted_permutation(n, seed):
    idx, rng = random_index(n, 8, seed)
    # duplicate some rows so ties occur
    vecs = idx.vectors.copy()
    vecs[n // 2 :] = vecs[: n - n // 2]
    idx = VectorIndex(8, idx.chunks, vecs, "rand", "0" * 64)
    q = rng.standard_normal(8)
    hits = idx.search_vector(q, n)
    assert sorted(h.chunk_id for h in hits) == sorted(idx.ids)
    assert [(h.chunk_id, h.rank) for h in hits] == oracle(idx.vectors, idx.ids, q, n)
    for k in range(1, n):
        assert idx.search_vector(q, k) == hits[:k]


def test_k_larger_than_corpus():
    idx, _ = random_index(3, 4, 0)
    assert len(idx.search_vector(np.ones(4), 10)) == 3


def test_embedder_mismatch_at_search():
    idx = build_index([Chunk("a", "", "A", 1)], HashEmbedder())
    with pytest.raises(EmbeddingError):
        search(idx, "q", 1, HashEmbedder(32))


def test_save_load_roundtrip(tmp_path):
    chunks = [Chunk(f"p{i}", f"T{i}", f"passage number {i} ünïcode", 4) for i in range(40)]
    e = HashEmbedder()
    idx = build_index(chunks, e, build_time=123.5)
    n = save_index(idx, tmp_path / "i.bin")
    assert n == (tmp_path / "i.bin").stat().st_size
    back = load_index(tmp_path / "i.bin")
    assert back.ids == idx.ids and back.chunks == idx.chunks
    assert back.vectors.tobytes() == idx.vectors.tobytes()
    assert (back.embedder_id, back.corpus_hash, back.build_time) == (idx.embedder_id, idx.corpus_hash, 123.5)
    rng = random.Random(2)
    for _ in range(50):
        q = f"query {rng.random()}"
        assert search(back, q, 5, e) == search(idx, q, 5, e)


def test_header_layout(tmp_path):
    idx = build_index([Chunk("a", "", "A", 1), Chunk("b", "", "B", 1)], HashEmbedder())
    save_index(idx, tmp_path / "i.bin")
    raw = (tmp_path / "i.bin").read_bytes()
    assert raw[:8] == MAGIC
    version, dim, count = struct.unpack_from("<IIQ", raw, 8)
    assert (version, dim, count) == (1, 64, 2)
    h = read_header(tmp_path / "i.bin")
    assert h["embedder_id"] == "hash-sha256-d64" and h["corpus_hash"] == idx.corpus_hash


def test_corrupt_index(tmp_path):
    (tmp_path / "bad.bin").write_bytes(b"NOTANIDX" + b"\0" * 40)
    with pytest.raises(IndexFormatError):
        load_index(tmp_path / "bad.bin")
    idx = build_index([Chunk("a", "", "A", 1)], HashEmbedder())
    save_index(idx, tmp_path / "i.bin")
    (tmp_path / "t.bin").write_bytes((tmp_path / "i.bin").read_bytes()[:-10])
    with pytest.raises(IndexFormatError):
        load_index(tmp_path / "t.bin")


def test_corpus_hash_stable():
    chunks = [Chunk("a", "", "A", 1)]
    assert build_index(chunks, HashEmbedder()).corpus_hash == build_index(chunks, HashEmbedder()).corpus_hash
    assert build_index(chunks, HashEmbedder()).corpus_hash != build_index([Chunk("a", "", "B", 1)], HashEmbedder()).corpus_hash


def test_oxford_fixture_ranking():
    idx, e = case_index("oxford")
    case = load_case("oxford")
    for step in case["steps"]:
        assert [h.chunk_id for h in search(idx, step["task"], 5, e)] == step["doc_ids"]
