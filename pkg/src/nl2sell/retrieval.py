"""Reasoning library and tag retrieval.

Analogical examples are picked by cosine similarity between demand
embeddings; tags are ranked the same way over "name: description" text.
Stores are desk-scale, so retrieval is an exact exhaustive scan — no
approximate index. The embedding backend is pluggable; the hash embedder
exists so every retrieval path runs offline and deterministically.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Union

from .catalog import TagCatalog
from .sell.parser import SellParseError, parse
from .sell.printer import print_sell
from .sell.validation import validate

# The four labeled reasoning steps every library entry must walk through.
REASONING_STEP_LABELS = (
    "Extract keywords",
    "Select tags",
    "Form conditional expressions",
    "Combine",
)


class DimMismatchError(ValueError):
    pass


class ZeroVectorError(ValueError):
    pass


class EmptyLibraryError(ValueError):
    pass


class EmptyCatalogError(ValueError):
    pass


class EmbedderVersionMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple

    @property
    def dim(self) -> int:
        return len(self.values)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimMismatchError(f"dims differ: {a.dim} vs {b.dim}")
    dot = math.fsum(x * y for x, y in zip(a.values, b.values))
    norm_a = math.sqrt(math.fsum(x * x for x in a.values))
    norm_b = math.sqrt(math.fsum(y * y for y in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for zero vectors")
    return dot / (norm_a * norm_b)


class Embedder(Protocol):
    @property
    def version(self) -> str: ...

    def embed(self, text: str) -> EmbeddingVector: ...


@lru_cache(maxsize=65536)
def _gram_feature(gram: str, dim: int) -> tuple:
    digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
    h = int.from_bytes(digest, "big")
    return h % dim, 1.0 if (h >> 63) & 1 == 0 else -1.0


class HashEmbedder:
    """Deterministic character n-gram embedder for offline tests.

    Not a semantic model: similar surface strings get similar vectors,
    which is all exactness tests need.
    """

    def __init__(self, dim: int = 64, ngram: int = 3):
        if dim < 2 or ngram < 1:
            raise ValueError("dim must be >= 2 and ngram >= 1")
        self.dim = dim
        self.ngram = ngram

    @property
    def version(self) -> str:
        return f"hash-ngram{self.ngram}-dim{self.dim}-v1"

    def embed(self, text: str) -> EmbeddingVector:
        padded = f"\x02{text}\x03"
        values = [0.0] * self.dim
        for i in range(max(len(padded) - self.ngram + 1, 1)):
            idx, sign = _gram_feature(padded[i:i + self.ngram], self.dim)
            values[idx] += sign
        if not any(values):
            values[0] = 1.0
        return EmbeddingVector(tuple(values))


class PrecomputedEmbedder:
    """Serves vectors from a text → vector table (e.g. exported real embeddings)."""

    def __init__(self, table: Mapping, version: str):
        self._table = {text: EmbeddingVector(tuple(float(x) for x in vec)) for text, vec in table.items()}
        self._version = version

    @property
    def version(self) -> str:
        return self._version

    def embed(self, text: str) -> EmbeddingVector:
        try:
            return self._table[text]
        except KeyError:
            raise KeyError(f"no precomputed embedding for {text!r}") from None

    @staticmethod
    def from_file(path: Union[str, Path]) -> "PrecomputedEmbedder":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return PrecomputedEmbedder(obj["vectors"], obj["version"])


class RemoteEmbedder:
    """HTTP embedding backend: POST {model, input: [texts]} to the endpoint.

    Accepts either {"vectors": [[...], ...]} or the common
    {"data": [{"embedding": [...]}, ...]} response shape.
    """

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    @property
    def version(self) -> str:
        return f"remote:{self.model}"

    def embed(self, text: str) -> EmbeddingVector:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = requests.post(
            self.endpoint,
            json={"model": self.model, "input": [text]},
            headers=headers,
            timeout=self.timeout,
        )
        resp.raise_for_status()
        payload = resp.json()
        if "vectors" in payload:
            vec = payload["vectors"][0]
        else:
            vec = payload["data"][0]["embedding"]
        return EmbeddingVector(tuple(float(x) for x in vec))


@dataclass(frozen=True)
class ReasoningEntry:
    entry_id: str
    demand: str
    tags: tuple
    reasoning: str
    sell: str
    embedding: EmbeddingVector

    def to_json_obj(self) -> dict:
        return {
            "id": self.entry_id,
            "demand": self.demand,
            "tags": list(self.tags),
            "reasoning": self.reasoning,
            "sell": self.sell,
            "embedding": list(self.embedding.values),
        }


@dataclass(frozen=True)
class ReasoningLibrary:
    entries: tuple
    embedder_version: str

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class RejectedRecord:
    index: int
    demand: str
    reason: str


@dataclass(frozen=True)
class LibraryBuildReport:
    library: ReasoningLibrary
    rejected: tuple


def normalize_demand(text: str) -> str:
    """Duplicate-detection key: NFC, trimmed, inner whitespace collapsed, casefolded."""
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text).strip()).casefold()


def has_reasoning_schema(text: str) -> bool:
    """True when all four step labels appear, in order."""
    pos = 0
    for label in REASONING_STEP_LABELS:
        found = text.find(label, pos)
        if found < 0:
            return False
        pos = found + len(label)
    return True


def _record_fields(record) -> tuple:
    if isinstance(record, Mapping):
        return (
            str(record["demand"]),
            tuple(str(t) for t in record.get("tags", ())),
            str(record["reasoning"]),
            str(record["sell"]),
        )
    demand, tags, reasoning, sell = record
    return str(demand), tuple(str(t) for t in tags), str(reasoning), str(sell)


def build_library(records: Iterable, embedder: Embedder, catalog: TagCatalog) -> LibraryBuildReport:
    """Embed and store (demand, tags, reasoning, sell) records.

    Invalid records are rejected with a per-record reason rather than
    aborting the build; duplicates collapse on normalized demand text.
    Entry ids are sequential, so the same inputs rebuild byte-identically.
    """
    entries = []
    rejected = []
    seen = {}
    counter = 0
    for index, record in enumerate(records):
        demand, tags, reasoning, sell_text = _record_fields(record)
        try:
            expr = parse(sell_text)
        except SellParseError as exc:
            rejected.append(RejectedRecord(index, demand, f"sell does not parse: {exc}"))
            continue
        report = validate(expr, catalog)
        if not report.ok:
            issue = report.issues[0]
            rejected.append(RejectedRecord(index, demand, f"sell invalid at {list(issue.path)}: {issue.code}: {issue.message}"))
            continue
        if not reasoning.strip():
            rejected.append(RejectedRecord(index, demand, "reasoning is empty"))
            continue
        if not has_reasoning_schema(reasoning):
            rejected.append(RejectedRecord(index, demand, "reasoning lacks the four labeled steps"))
            continue
        key = normalize_demand(demand)
        if key in seen:
            rejected.append(RejectedRecord(index, demand, f"duplicate of record {seen[key]}"))
            continue
        seen[key] = index
        counter += 1
        entries.append(ReasoningEntry(
            entry_id=f"rl-{counter:05d}",
            demand=demand,
            tags=tags,
            reasoning=reasoning,
            sell=print_sell(expr),
            embedding=embedder.embed(demand),
        ))
    library = ReasoningLibrary(entries=tuple(entries), embedder_version=embedder.version)
    return LibraryBuildReport(library=library, rejected=tuple(rejected))


def save_library(library: ReasoningLibrary, path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for entry in library.entries:
            obj = entry.to_json_obj()
            obj["embedder_version"] = library.embedder_version
            f.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
            f.write("\n")
    return path


def load_library(path: Union[str, Path]) -> ReasoningLibrary:
    entries = []
    version = None
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            row_version = obj.get("embedder_version")
            if version is None:
                version = row_version
            elif row_version != version:
                raise EmbedderVersionMismatchError(
                    f"{path}:{lineno}: embedder_version {row_version!r} != {version!r}")
            entries.append(ReasoningEntry(
                entry_id=str(obj["id"]),
                demand=str(obj["demand"]),
                tags=tuple(str(t) for t in obj.get("tags", ())),
                reasoning=str(obj["reasoning"]),
                sell=str(obj["sell"]),
                embedding=EmbeddingVector(tuple(float(x) for x in obj["embedding"])),
            ))
    if version is None:
        raise EmptyLibraryError(f"{path}: no entries")
    dims = {e.embedding.dim for e in entries}
    if len(dims) > 1:
        raise DimMismatchError(f"{path}: mixed embedding dims {sorted(dims)}")
    return ReasoningLibrary(entries=tuple(entries), embedder_version=version)


@dataclass(frozen=True)
class ScoredEntry:
    entry: ReasoningEntry
    similarity: float


def top_k_scored(query: str, k: int, library: ReasoningLibrary, embedder: Embedder) -> list:
    """The k most similar entries with their scores, descending, id tie-break."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not library.entries:
        raise EmptyLibraryError("reasoning library is empty")
    if embedder.version != library.embedder_version:
        raise EmbedderVersionMismatchError(
            f"library built with {library.embedder_version!r}, queried with {embedder.version!r}")
    query_vec = embedder.embed(query)
    scored = [ScoredEntry(e, cosine(query_vec, e.embedding)) for e in library.entries]
    scored.sort(key=lambda s: (-s.similarity, s.entry.entry_id))
    return scored[:k]


def top_k_demands(query: str, k: int, library: ReasoningLibrary, embedder: Embedder) -> list:
    return [s.entry for s in top_k_scored(query, k, library, embedder)]


class TagIndex:
    """Catalog tag embeddings, computed once and reused across queries."""

    def __init__(self, catalog: TagCatalog, embedder: Embedder):
        self.catalog = catalog
        self.embedder = embedder
        self.vectors = tuple((tag, embedder.embed(tag_text(tag))) for tag in catalog)


def tag_text(tag) -> str:
    """Embedding input for a tag: name alone, or name + ": " + description."""
    if tag.description:
        return f"{tag.name}: {tag.description}"
    return tag.name


def top_n_tags(query: str, n: int, catalog: TagCatalog, embedder: Embedder,
               index: Optional[TagIndex] = None) -> list:
    """The n most query-similar tag names, descending, name tie-break."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(catalog) == 0:
        raise EmptyCatalogError("tag catalog is empty")
    if index is None or index.catalog is not catalog or index.embedder is not embedder:
        index = TagIndex(catalog, embedder)
    query_vec = embedder.embed(query)
    scored = [(tag.name, cosine(query_vec, vec)) for tag, vec in index.vectors]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [name for name, _ in scored[:n]]
