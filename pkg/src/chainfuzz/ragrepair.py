"""Knowledge base over library sources with similarity retrieval, plus the
compilation-error repair loop built on it.

The offline embedder is a deterministic hashed bag-of-tokens (blake2b token
hashes folded into a signed 256-dim vector, L2-normalized), so indexes and
retrievals are reproducible with no model dependency; a live embedder can be
plugged in through the same interface.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .build import Diagnostic
from .callgraph import _blank_non_code, _scan_translation_unit
from .errors import DimensionMismatch, EmbedderMismatch, EmptyErrorSet, UnreadableFile
from .gateway import BUILTIN_TEMPLATES, LlmGateway, render
from . import templates as T

__all__ = [
    "Diagnostic",
    "HashedBagOfTokens",
    "IndexBase",
    "KnowledgeChunk",
    "build_index",
    "build_query",
    "chunk_file",
    "chunk_lines",
    "extract_code_block",
    "load_index",
    "repair_harness",
    "retrieve_chunks",
    "save_index",
]

log = logging.getLogger(__name__)

CHUNK_LINES = 40
DEFAULT_SIMILARITY = 0.3
DEFAULT_TOP_K = 5

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+")
_QUOTED = re.compile(r"[`'‘“]([A-Za-z_][A-Za-z0-9_]*)['’”]")


@dataclass(frozen=True)
class KnowledgeChunk:
    id: int
    origin_file: str
    span: tuple[int, int]  # (start_line, end_line), 1-based inclusive
    text: str
    vector: np.ndarray

    def __post_init__(self):
        if self.span[0] > self.span[1]:
            raise ValueError("chunk span start must not exceed end")


class HashedBagOfTokens:
    """Deterministic offline embedder: tokens hashed into a signed bag."""

    dimension = 256
    embedder_id = "hashed-bow-v1-d256"

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float32)
        for tok in _TOKEN.findall(text):
            digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "little")
            idx = h % self.dimension
            sign = 1.0 if (h >> 8) & 1 else -1.0
            vec[idx] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec


@dataclass
class IndexBase:
    chunks: list[KnowledgeChunk]
    dimension: int
    embedder_id: str

    def matrix(self) -> np.ndarray:
        if not self.chunks:
            return np.zeros((0, self.dimension), dtype=np.float32)
        return np.stack([c.vector for c in self.chunks])


def chunk_lines(line_count: int, function_starts: list[int], window: int = CHUNK_LINES) -> list[tuple[int, int]]:
    """Chunk boundaries: fixed windows that snap shut just before a function
    definition starting inside the window, so functions open new chunks."""
    starts = sorted(s for s in function_starts if 1 <= s <= line_count)
    spans = []
    begin = 1
    while begin <= line_count:
        end = min(begin + window - 1, line_count)
        inside = [s for s in starts if begin < s <= end + 1]
        if inside:
            end = max(inside) - 1 if max(inside) - 1 >= begin else end
        spans.append((begin, end))
        begin = end + 1
    return spans


def _function_starts(path: Path, text: str) -> list[int]:
    if path.suffix not in (".c", ".h"):
        return []
    scan = _scan_translation_unit(_blank_non_code(text))
    return [d.line for d in scan.defs]


def chunk_file(path, next_id: int = 0) -> list[tuple[int, str, tuple[int, int], str]]:
    """(id, origin_file, span, text) tuples for one file."""
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8", errors="replace")
    except OSError as exc:
        raise UnreadableFile(path, str(exc)) from exc
    lines = text.splitlines()
    if not lines:
        return []
    out = []
    for span in chunk_lines(len(lines), _function_starts(path, text)):
        body = "\n".join(lines[span[0] - 1 : span[1]])
        out.append((next_id, str(path), span, body))
        next_id += 1
    return out


def build_index(files, embedder=None) -> IndexBase:
    """Chunk and embed every file once; the index is immutable afterwards."""
    files = [Path(f) for f in files]
    if not files:
        raise UnreadableFile("<none>", "build_index requires at least one file")
    embedder = embedder or HashedBagOfTokens()
    chunks = []
    next_id = 0
    for path in files:
        for _id, origin, span, body in chunk_file(path, next_id):
            vec = np.asarray(embedder.embed(body), dtype=np.float32)
            if vec.shape != (embedder.dimension,):
                raise ValueError("embedder returned a vector of the wrong dimension")
            chunks.append(KnowledgeChunk(id=_id, origin_file=origin, span=span, text=body, vector=vec))
            next_id = _id + 1
    return IndexBase(chunks=chunks, dimension=embedder.dimension, embedder_id=embedder.embedder_id)


def build_query(errors) -> str:
    """Deduplicated error messages plus the identifiers they mention."""
    errors = list(errors)
    if not errors:
        raise EmptyErrorSet("cannot build a repair query from zero diagnostics")
    seen = set()
    messages = []
    idents = []
    ident_seen = set()
    for d in errors:
        msg = d.message.strip()
        if msg not in seen:
            seen.add(msg)
            messages.append(msg)
        for name in _QUOTED.findall(d.message):
            if name not in ident_seen:
                ident_seen.add(name)
                idents.append(name)
    query = "\n".join(messages)
    if idents:
        query += "\nidentifiers: " + ", ".join(sorted(idents))
    return query


def retrieve_chunks(query_vec, index: IndexBase, s: float = DEFAULT_SIMILARITY, k: int = DEFAULT_TOP_K):
    """Up to k chunks with cosine similarity >= s, best first, ties by id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dimension,):
        raise DimensionMismatch(index.dimension, q.shape[0] if q.ndim == 1 else q.shape)
    if not index.chunks:
        return []
    sims = index.matrix().astype(np.float64) @ q
    order = sorted(range(len(index.chunks)), key=lambda i: (-sims[i], index.chunks[i].id))
    picked = []
    for i in order:
        if sims[i] >= s:
            picked.append(index.chunks[i])
        if len(picked) == k:
            break
    return picked


def repair_harness(
    errors,
    harness: str,
    index: IndexBase,
    gateway: LlmGateway,
    s: float = DEFAULT_SIMILARITY,
    k: int = DEFAULT_TOP_K,
    embedder=None,
) -> str:
    """One retrieval-grounded repair pass over a failing harness.

    Gather notes from the best chunk, refine them through each remaining
    chunk, then revise the harness with the accumulated notes.  Empty
    retrieval skips straight to revision from the query alone.
    """
    embedder = embedder or HashedBagOfTokens()
    if embedder.embedder_id != index.embedder_id:
        raise EmbedderMismatch(embedder.embedder_id, index.embedder_id)
    query = build_query(errors)
    query_vec = embedder.embed(query)
    chunks = retrieve_chunks(query_vec, index, s=s, k=k)

    template = BUILTIN_TEMPLATES["repair_refinement"]

    def chunk_context(chunk: KnowledgeChunk) -> str:
        return f"// {chunk.origin_file}:{chunk.span[0]}-{chunk.span[1]}\n{chunk.text}"

    if not chunks:
        log.warning("repair retrieval returned no chunks (s=%s, k=%s); revising from the query alone", s, k)
        prompt = render(
            template,
            {
                "phase": "revise",
                "task_instructions": T.REPAIR_PHASE_REVISE,
                "error_query": query,
                "context": "",
                "working_material": harness,
            },
        )
        response = gateway.complete(prompt)
        return extract_code_block(response, "c") or response

    notes = gateway.complete(
        render(
            template,
            {
                "phase": "gather",
                "task_instructions": T.REPAIR_PHASE_GATHER,
                "error_query": query,
                "context": chunk_context(chunks[0]),
                "working_material": "",
            },
        )
    )
    for chunk in chunks[1:]:
        notes = gateway.complete(
            render(
                template,
                {
                    "phase": "refine",
                    "task_instructions": T.REPAIR_PHASE_REFINE,
                    "error_query": query,
                    "context": chunk_context(chunk),
                    "working_material": notes,
                },
            )
        )
    revised = gateway.complete(
        render(
            template,
            {
                "phase": "revise",
                "task_instructions": T.REPAIR_PHASE_REVISE,
                "error_query": query,
                "context": notes,
                "working_material": harness,
            },
        )
    )
    return extract_code_block(revised, "c") or revised


_CODE_FENCE = re.compile(r"```(?P<lang>[A-Za-z0-9_+-]*)\n(?P<body>.*?)```", re.DOTALL)


def extract_code_block(text: str, prefer_lang: str = "") -> str | None:
    """Body of the first fenced code block, preferring a language match."""
    blocks = list(_CODE_FENCE.finditer(text))
    if not blocks:
        return None
    if prefer_lang:
        for m in blocks:
            if m.group("lang").lower() == prefer_lang.lower():
                return m.group("body")
    return blocks[0].group("body")


# --- persistence ------------------------------------------------------------

INDEX_SCHEMA = "chainfuzz-ragindex-v1"


def save_index(index: IndexBase, path) -> None:
    doc = {
        "schema": INDEX_SCHEMA,
        "embedder_id": index.embedder_id,
        "dimension": index.dimension,
        "chunks": [
            {
                "id": c.id,
                "origin_file": c.origin_file,
                "span": list(c.span),
                "text": c.text,
                "vector_b64": base64.b64encode(c.vector.astype(np.float32).tobytes()).decode("ascii"),
            }
            for c in index.chunks
        ],
    }
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def load_index(path, expected_embedder_id: str = HashedBagOfTokens.embedder_id) -> IndexBase:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != INDEX_SCHEMA:
        raise ValueError(f"not a rag index file: {path}")
    if doc["embedder_id"] != expected_embedder_id:
        raise EmbedderMismatch(expected_embedder_id, doc["embedder_id"])
    chunks = [
        KnowledgeChunk(
            id=row["id"],
            origin_file=row["origin_file"],
            span=tuple(row["span"]),
            text=row["text"],
            vector=np.frombuffer(base64.b64decode(row["vector_b64"]), dtype=np.float32).copy(),
        )
        for row in doc["chunks"]
    ]
    return IndexBase(chunks=chunks, dimension=doc["dimension"], embedder_id=doc["embedder_id"])
