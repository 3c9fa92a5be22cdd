"""Chunking, embedding and an exact flat inner-product index."""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Protocol, Sequence

import httpx
import numpy as np

from .errors import BuildError, CorpusFormatError, DimensionMismatch, EmbeddingError, IndexFormatError, NormalizationError

DEFAULT_CHUNK_WORDS = 100
DEFAULT_OVERLAP_WORDS = 0
DEFAULT_K = 5

MAGIC = b"AGRAGIDX"
VERSION = 1


@dataclass(frozen=True)
class Chunk:
    id: str
    title: str
    text: str
    n_words: int


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float
    rank: int


# --------------------------------------------------------------------------
# corpus


def read_corpus(path: str | Path) -> Iterator[dict]:
    """Yield ``{id, title, text}`` records from a JSON Lines corpus."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise CorpusFormatError(path, lineno, f"invalid JSON ({exc})") from None
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise CorpusFormatError(path, lineno, "record needs 'id' and 'text'")
            yield {"id": str(rec["id"]), "title": str(rec.get("title", "")), "text": str(rec["text"])}


def chunk_corpus(
    docs: Iterable[dict],
    chunk_words: int = DEFAULT_CHUNK_WORDS,
    overlap_words: int = DEFAULT_OVERLAP_WORDS,
) -> Iterator[Chunk]:
    """Sliding word windows; window ``j`` of doc ``d`` gets id ``d-j``."""
    if not chunk_words > overlap_words >= 0:
        raise ValueError("need chunk_words > overlap_words >= 0")
    stride = chunk_words - overlap_words
    for doc in docs:
        words = doc["text"].split()
        start, j = 0, 0
        while start < len(words):
            window = words[start : start + chunk_words]
            yield Chunk(f"{doc['id']}-{j}", doc.get("title", ""), " ".join(window), len(window))
            if start + chunk_words >= len(words):
                break
            start += stride
            j += 1


def passages_as_chunks(docs: Iterable[dict]) -> Iterator[Chunk]:
    """Treat each record as an already-chunked passage, keeping its id."""
    for doc in docs:
        if doc["text"].strip():
            yield Chunk(doc["id"], doc.get("title", ""), doc["text"], len(doc["text"].split()))


def corpus_hash(chunks: Sequence[Chunk]) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(json.dumps([c.id, c.title, c.text], ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


# --------------------------------------------------------------------------
# embedders


class Embedder(Protocol):
    id: str

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEmbedder:
    """Model-free embedder: SHA-256 of the text seeds a normal PRNG draw."""

    def __init__(self, dim: int = 64):
        self.dim = dim
        self.id = f"hash-sha256-d{dim}"

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim))
        for i, t in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(t.encode("utf-8")).digest()[:8], "little")
            out[i] = np.random.default_rng(seed).standard_normal(self.dim)
        return out


class LookupEmbedder:
    """Fixed text -> vector table; unknown texts are an error.

    File format: ``{"name": ..., "dim": d, "vectors": {text: [floats]}}``.
    """

    def __init__(self, table: dict[str, Sequence[float]], name: str = "lookup"):
        dims = {len(v) for v in table.values()}
        if len(dims) != 1:
            raise EmbeddingError("lookup table vectors must share one dimension")
        self.dim = dims.pop()
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        digest = hashlib.sha256(
            json.dumps({k: list(map(float, v)) for k, v in sorted(table.items())}).encode("utf-8")
        ).hexdigest()
        self.id = f"lookup-{name}-{digest[:12]}"

    @classmethod
    def from_file(cls, path: str | Path) -> "LookupEmbedder":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(data["vectors"], name=data.get("name", Path(path).stem))

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        try:
            return np.stack([self.table[t] for t in texts])
        except KeyError as exc:
            raise EmbeddingError(f"text not in lookup table: {str(exc)[:80]}") from None


class RemoteEmbedder:
    """OpenAI-compatible ``POST /v1/embeddings``."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, client: httpx.Client | None = None):
        self.url = base_url.rstrip("/") + "/v1/embeddings"
        self.model = model
        self.api_key = api_key
        self.id = f"remote-{model}"
        self._client = client or httpx.Client(timeout=60.0)

    def embed_raw(self, texts: Sequence[str]) -> np.ndarray:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = self._client.post(self.url, json={"model": self.model, "input": list(texts)}, headers=headers)
            resp.raise_for_status()
            rows = sorted(resp.json()["data"], key=lambda r: r["index"])
        except (httpx.HTTPError, ValueError, KeyError) as exc:
            raise EmbeddingError(f"embedding request failed: {exc}") from exc
        if len(rows) != len(texts):
            raise EmbeddingError(f"asked for {len(texts)} embeddings, got {len(rows)}")
        return np.asarray([r["embedding"] for r in rows], dtype=np.float64)


def embed(texts: Sequence[str], embedder: Embedder, dim: int | None = None) -> np.ndarray:
    """Embed and L2-normalise rows, whatever the backend returned."""
    if not texts:
        raise ValueError("nothing to embed")
    raw = np.asarray(embedder.embed_raw(list(texts)), dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] != len(texts):
        raise EmbeddingError(f"embedder returned shape {raw.shape} for {len(texts)} texts")
    if dim is not None and raw.shape[1] != dim:
        raise DimensionMismatch(f"embedder gives dim {raw.shape[1]}, index has dim {dim}")
    norms = np.linalg.norm(raw, axis=1)
    bad = ~np.isfinite(norms) | (norms < 1e-12)
    if bad.any():
        raise NormalizationError(f"cannot normalise embedding(s) at rows {np.flatnonzero(bad).tolist()}")
    return raw / norms[:, None]


# --------------------------------------------------------------------------
# index


@dataclass
class VectorIndex:
    dim: int
    chunks: tuple[Chunk, ...]
    vectors: np.ndarray  # (count, dim) float32
    embedder_id: str
    corpus_hash: str
    build_time: float = 0.0

    def __post_init__(self):
        self.chunks = tuple(self.chunks)
        self.vectors = np.ascontiguousarray(self.vectors, dtype="<f4")
        if self.vectors.shape != (len(self.chunks), self.dim):
            raise BuildError(f"vector block {self.vectors.shape} does not match {len(self.chunks)}x{self.dim}")
        self.ids = tuple(c.id for c in self.chunks)
        if len(set(self.ids)) != len(self.ids):
            raise BuildError("duplicate chunk id in index")
        self._by_id = {c.id: c for c in self.chunks}
        self._v64 = self.vectors.astype(np.float64)
        # position of each id in ascending id order, the tie-break key
        order = sorted(range(len(self.ids)), key=self.ids.__getitem__)
        self._id_rank = np.empty(len(self.ids), dtype=np.int64)
        self._id_rank[order] = np.arange(len(self.ids))

    @property
    def count(self) -> int:
        return len(self.chunks)

    def chunk(self, chunk_id: str) -> Chunk:
        return self._by_id[chunk_id]

    def search_vector(self, query: np.ndarray, k: int) -> list[SearchHit]:
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query, dtype=np.float64).reshape(-1)
        if query.shape[0] != self.dim:
            raise DimensionMismatch(f"query dim {query.shape[0]} != index dim {self.dim}")
        scores = (self._v64 * query).sum(axis=1)
        order = np.lexsort((self._id_rank, -scores))[: min(k, self.count)]
        return [SearchHit(self.ids[i], float(scores[i]), r) for r, i in enumerate(order, start=1)]


def build_index(
    chunks: Iterable[Chunk], embedder: Embedder, batch_size: int = 64, build_time: float | None = None
) -> VectorIndex:
    chunks = list(chunks)
    if not chunks:
        raise BuildError("cannot build an index from zero chunks")
    seen: set[str] = set()
    for c in chunks:
        if c.id in seen:
            raise BuildError(f"duplicate chunk id {c.id!r}")
        seen.add(c.id)
    blocks = [embed([c.text for c in chunks[i : i + batch_size]], embedder) for i in range(0, len(chunks), batch_size)]
    vectors = np.concatenate(blocks)
    return VectorIndex(
        dim=vectors.shape[1],
        chunks=tuple(chunks),
        vectors=vectors,
        embedder_id=embedder.id,
        corpus_hash=corpus_hash(chunks),
        build_time=time.time() if build_time is None else build_time,
    )


def search(index: VectorIndex, query: str, k: int, embedder: Embedder) -> list[SearchHit]:
    if embedder.id != index.embedder_id:
        raise EmbeddingError(f"index built with {index.embedder_id!r}, queried with {embedder.id!r}")
    return index.search_vector(embed([query], embedder, dim=index.dim)[0], k)


def _pack_str(s: str, fmt: str = "<I") -> bytes:
    b = s.encode("utf-8")
    return struct.pack(fmt, len(b)) + b


def index_bytes(index: VectorIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIQ", VERSION, index.dim, index.count))
    buf.write(_pack_str(index.embedder_id, "<H"))
    buf.write(bytes.fromhex(index.corpus_hash))
    buf.write(struct.pack("<d", index.build_time))
    for cid in index.ids:
        buf.write(_pack_str(cid))
    buf.write(index.vectors.astype("<f4").tobytes(order="C"))
    meta = "".join(
        json.dumps({"title": c.title, "text": c.text, "n_words": c.n_words}, ensure_ascii=False) + "\n"
        for c in index.chunks
    )
    buf.write(_pack_str(meta, "<Q"))
    return buf.getvalue()


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_index(index: VectorIndex, path: str | Path) -> int:
    data = index_bytes(index)
    atomic_write(path, data)
    return len(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError("index file truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self, fmt: str = "<I") -> str:
        (n,) = self.unpack(fmt)
        return self.take(n).decode("utf-8")


def read_header(path: str | Path) -> dict:
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise IndexFormatError(f"{path} is not an index file")
    version, dim, count = r.unpack("<IIQ")
    return {
        "version": version,
        "dim": dim,
        "count": count,
        "embedder_id": r.string("<H"),
        "corpus_hash": r.take(32).hex(),
        "build_time": r.unpack("<d")[0],
    }


def load_index(path: str | Path) -> VectorIndex:
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise IndexFormatError(f"{path} is not an index file")
    version, dim, count = r.unpack("<IIQ")
    if version != VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    embedder_id = r.string("<H")
    chash = r.take(32).hex()
    (build_time,) = r.unpack("<d")
    ids = [r.string() for _ in range(count)]
    vectors = np.frombuffer(r.take(4 * dim * count), dtype="<f4").reshape(count, dim)
    meta = r.string("<Q").splitlines()
    if len(meta) != count:
        raise IndexFormatError("chunk table length does not match header count")
    chunks = []
    for cid, line in zip(ids, meta):
        m = json.loads(line)
        chunks.append(Chunk(cid, m["title"], m["text"], m["n_words"]))
    return VectorIndex(dim, tuple(chunks), vectors, embedder_id, chash, build_time)
