"""Report ingestion: documents, paragraph-packed chunks, and corpus stats.

Chunking splits a document body on blank lines and then packs adjacent
paragraphs greedily: a chunk keeps absorbing the next paragraph while it
is still under ``min_words``, and a paragraph longer than ``max_words``
is pre-split into word slices.  Joining the chunks of a document in
ordinal order always reproduces the body's word sequence exactly.

Stats count code points, whitespace-delimited words, sentences by a
fixed boundary rule, and numeric tokens (a digit survives after
stripping enclosing punctuation).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError

DEFAULT_MAX_WORDS = 150
DEFAULT_MIN_WORDS = 80

_PARAGRAPH_BREAK_RE = re.compile(r"\n\s*\n")

# Words that end with a period without ending a sentence.  Single-letter
# initials ("J. Smith") are excluded separately.
_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "gen", "col", "sgt", "st", "jr", "sr",
        "inc", "ltd", "co", "corp", "dept", "est", "fig", "figs", "eq", "sec",
        "no", "nos", "vs", "etc", "al", "e.g", "i.e", "cf", "approx", "u.s",
        "u.n", "sq", "km", "m",
    }
)


@dataclass(frozen=True)
class Document:
    """One report: identifier, title, full body text, page count."""

    doc_id: str
    title: str
    body: str
    page_count: int = 0

    def __post_init__(self) -> None:
        if self.page_count < 0:
            raise ValueError("page_count must be >= 0")
        if not self.body.strip() and self.page_count > 0:
            raise ValueError("a document with pages must have a body")


@dataclass(frozen=True)
class Chunk:
    """A contiguous piece of one document, identified by (doc_id, ordinal)."""

    chunk_id: str
    doc_id: str
    ordinal: int
    text: str
    word_count: int

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ValueError("ordinal must be >= 0")
        if self.word_count != len(self.text.split()) or self.word_count == 0:
            raise ValueError("word_count must equal the whitespace token count")


@dataclass(frozen=True)
class CorpusStats:
    """Aggregate counts; addition is element-wise so stats are additive."""

    pages: int = 0
    chars: int = 0
    words: int = 0
    sentences: int = 0
    numerics: int = 0

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            pages=self.pages + other.pages,
            chars=self.chars + other.chars,
            words=self.words + other.words,
            sentences=self.sentences + other.sentences,
            numerics=self.numerics + other.numerics,
        )


# --- chunking ---------------------------------------------------------------

def split_paragraphs(body: str) -> list[str]:
    """Split on blank lines; paragraphs are stripped and never empty."""
    return [p.strip() for p in _PARAGRAPH_BREAK_RE.split(body) if p.strip()]


def chunk_document(
    doc: Document,
    max_words: int = DEFAULT_MAX_WORDS,
    min_words: int = DEFAULT_MIN_WORDS,
) -> list[Chunk]:
    """Pack paragraphs into chunks of at most ``max_words`` words.

    A chunk absorbs following paragraphs only while it is still shorter
    than ``min_words``; oversized paragraphs are pre-split into
    ``max_words``-word slices.  The final chunk of a document may stay
    short when nothing is left to merge.
    """
    if not (1 <= min_words <= max_words):
        raise ValueError("need 1 <= min_words <= max_words")
    units: list[str] = []
    for para in split_paragraphs(doc.body):
        words = para.split()
        if len(words) <= max_words:
            units.append(para)
        else:
            for start in range(0, len(words), max_words):
                units.append(" ".join(words[start : start + max_words]))
    chunks: list[Chunk] = []
    current: list[str] = []
    current_words = 0

    def flush() -> None:
        nonlocal current, current_words
        if current:
            text = "\n\n".join(current)
            chunks.append(
                Chunk(
                    chunk_id=f"{doc.doc_id}:{len(chunks):04d}",
                    doc_id=doc.doc_id,
                    ordinal=len(chunks),
                    text=text,
                    word_count=current_words,
                )
            )
            current = []
            current_words = 0

    for unit in units:
        unit_words = len(unit.split())
        if current and (current_words >= min_words or current_words + unit_words > max_words):
            flush()
        current.append(unit)
        current_words += unit_words
    flush()
    return chunks


# --- statistics -------------------------------------------------------------

def split_sentences(text: str) -> list[str]:
    """Split text into sentences by a fixed boundary rule.

    A boundary is a ``.``, ``!`` or ``?`` (closing quotes and brackets may
    follow) that either ends the text or is followed by whitespace and an
    uppercase letter or digit.  A period does not end a sentence when the
    word before it is a known abbreviation or a single-letter initial.
    Text without any boundary counts as one sentence.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in ".!?":
            if ch == "." and _preceding_word_is_abbreviation(text, i):
                i += 1
                continue
            end = i + 1
            while end < n and text[end] in "\"')]’”":
                end += 1
            rest = text[end:]
            at_text_end = not rest.strip()
            follower = rest.lstrip()[:1]
            next_starts_sentence = (
                bool(rest)
                and rest[0].isspace()
                and bool(follower)
                and (follower.isupper() or follower.isdigit())
            )
            if at_text_end or next_starts_sentence:
                sentence = text[start:end].strip()
                if sentence:
                    sentences.append(sentence)
                start = end
                i = end
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _preceding_word_is_abbreviation(text: str, period_idx: int) -> bool:
    j = period_idx
    while j > 0 and not text[j - 1].isspace():
        j -= 1
    word = text[j:period_idx].lower().lstrip("(\"'[‘“")
    if not word:
        return False
    if len(word) == 1 and word.isalpha():
        return True  # an initial such as "J."
    return word in _ABBREVIATIONS


def _strip_enclosing_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def count_numeric_tokens(text: str) -> int:
    """Count whitespace tokens that keep a digit after stripping enclosing punctuation."""
    count = 0
    for token in text.split():
        if any(ch.isdigit() for ch in _strip_enclosing_punctuation(token)):
            count += 1
    return count


def document_stats(doc: Document) -> CorpusStats:
    return CorpusStats(
        pages=doc.page_count,
        chars=len(doc.body),
        words=len(doc.body.split()),
        sentences=len(split_sentences(doc.body)),
        numerics=count_numeric_tokens(doc.body),
    )


def corpus_stats(corpus: Iterable[Document]) -> CorpusStats:
    """Sum per-document stats; an empty corpus is all zeros."""
    total = CorpusStats()
    for doc in corpus:
        total = total + document_stats(doc)
    return total


# --- persistence ------------------------------------------------------------

def load_corpus(manifest_path: str | Path) -> list[Document]:
    """Load documents listed in a JSON manifest.

    The manifest is a list of objects with ``doc_id``, ``title``,
    ``file`` (path relative to the manifest), and ``page_count``.
    """
    manifest_path = Path(manifest_path)
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read corpus manifest {manifest_path}: {exc}") from exc
    if not isinstance(entries, list):
        raise DataError(f"corpus manifest {manifest_path} must be a JSON list")
    documents = []
    seen: set[str] = set()
    for entry in entries:
        try:
            doc_id = entry["doc_id"]
            body = (manifest_path.parent / entry["file"]).read_text(encoding="utf-8")
            doc = Document(
                doc_id=doc_id,
                title=entry.get("title", doc_id),
                body=body,
                page_count=int(entry.get("page_count", 0)),
            )
        except (KeyError, OSError, ValueError) as exc:
            raise DataError(f"bad corpus manifest entry {entry!r}: {exc}") from exc
        if doc_id in seen:
            raise DataError(f"duplicate doc_id in manifest: {doc_id}")
        seen.add(doc_id)
        documents.append(doc)
    return documents


def write_chunks(chunks: Iterable[Chunk], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(
                json.dumps(
                    {
                        "chunk_id": chunk.chunk_id,
                        "doc_id": chunk.doc_id,
                        "ordinal": chunk.ordinal,
                        "text": chunk.text,
                        "word_count": chunk.word_count,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                chunks.append(
                    Chunk(
                        chunk_id=rec["chunk_id"],
                        doc_id=rec["doc_id"],
                        ordinal=rec["ordinal"],
                        text=rec["text"],
                        word_count=rec["word_count"],
                    )
                )
    return chunks
