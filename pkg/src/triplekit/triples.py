"""Triple grammar, text normalization, and canonical serialization.

A triple is one output line of the form ``relation(subject, object)``.
Model output is parsed line by line: every non-empty line either yields a
triple, is collapsed as a duplicate of an earlier triple, or is recorded
verbatim as nonconforming.  Nothing is silently dropped, so
``len(triples) + len(duplicate_lines) + len(nonconforming_lines)`` always
equals the number of non-empty lines in the raw output.

Normalization (used for triple identity, grounding checks, and metric
inputs) lowercases, strips punctuation except digit-embedded commas and
periods, stems each token with a small fixed suffix-stripper, and joins
with single spaces.  The function is idempotent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

_VOWELS = "aeiou"

_RELATION_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


# --- stemming ---------------------------------------------------------------

def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when it follows a consonant ("dy"), else a consonant.
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem_part: str) -> int:
    """Count vowel-consonant sequences, the m of [C](VC){m}[V]."""
    m = 0
    i = 0
    n = len(stem_part)
    while i < n and _is_consonant(stem_part, i):
        i += 1
    while i < n:
        while i < n and not _is_consonant(stem_part, i):
            i += 1
        if i >= n:
            break
        m += 1
        while i < n and _is_consonant(stem_part, i):
            i += 1
    return m


def _has_vowel(stem_part: str) -> bool:
    return any(not _is_consonant(stem_part, i) for i in range(len(stem_part)))


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _after_strip_fix(word: str) -> str:
    # Repair the stem after -ed / -ing removal.
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "lsz"
    ):
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word


def stem(token: str) -> str:
    """Strip plural, -ed/-ing, and long-stem final-e suffixes.

    Deliberately lighter than a lexicon-based lemmatizer: three rule
    groups, applied once each, so the result is a fixed point (stemming a
    stem changes nothing).  "landmines" -> "landmin", "cleared" ->
    "clear", "meters" -> "meter", while short stems keep their final e
    ("square" stays "square").  Tokens with digits or non-ASCII letters
    pass through unchanged.
    """
    word = token.lower()
    if not word.isascii() or not word.isalpha():
        return token
    if len(word) <= 2:
        return word
    # plurals
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]
    # -eed / -ed / -ing
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    elif word.endswith("ed") and _has_vowel(word[:-2]):
        word = _after_strip_fix(word[:-2])
    elif word.endswith("ing") and _has_vowel(word[:-3]):
        word = _after_strip_fix(word[:-3])
    # final -e on long stems ("landmine" -> "landmin", but "square" stays)
    if word.endswith("e") and _measure(word[:-1]) > 1:
        word = word[:-1]
    return word


# --- normalization ----------------------------------------------------------

def _strip_punctuation(text: str) -> str:
    """Drop non-alphanumeric characters except digit-embedded , and .

    Neighbor checks use the original string, so "2,500,011" keeps its
    commas while "areas)." loses both trailing marks.
    """
    out: list[str] = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch.isalnum() or ch.isspace():
            out.append(ch)
            continue
        if ch in ",." and 0 < i < n - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
            out.append(ch)
    return "".join(out)


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, stem, and single-space join.

    Digit-embedded commas and periods survive, so "2,500,011 square
    meters" normalizes to "2,500,011 square meter".  Idempotent:
    ``normalize_text(normalize_text(s)) == normalize_text(s)``.
    """
    stripped = _strip_punctuation(text.lower())
    return " ".join(stem(tok) for tok in stripped.split())


def token_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    """True when needle occurs as a contiguous run of haystack tokens.

    Token-boundary aware: ["mine"] does not match inside ["landmines"].
    An empty needle matches trivially.
    """
    if not needle:
        return True
    sep = "\x1f"
    return sep + sep.join(needle) + sep in sep + sep.join(haystack) + sep


# --- line grammar -----------------------------------------------------------

def _parse_line_fields(line: str) -> tuple[str, str, str] | None:
    """Grammar core: return (relation, subject, object) or None.

    The argument split happens at the first comma that is at parenthesis
    depth zero and not flanked by digits on both sides.  Commas inside
    "2,500,011" or inside "(QLS)" therefore never split; any later
    depth-zero commas stay inside the object.
    """
    text = line.strip()
    open_idx = text.find("(")
    if open_idx <= 0 or not text.endswith(")"):
        return None
    # The relation name must abut its paren: "rel (a, b)" is prose.
    relation = text[:open_idx]
    if not _RELATION_RE.match(relation):
        return None
    depth = 0
    for i in range(open_idx, len(text)):
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth < 0:
                return None
            if depth == 0 and i != len(text) - 1:
                return None  # text after the closing paren
    if depth != 0:
        return None
    body = text[open_idx + 1 : -1]
    split_at = -1
    depth = 0
    for i, ch in enumerate(body):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            digit_flanked = (
                0 < i < len(body) - 1
                and body[i - 1].isdigit()
                and body[i + 1].isdigit()
            )
            if not digit_flanked:
                split_at = i
                break
    if split_at < 0:
        return None
    subject = body[:split_at].strip()
    obj = body[split_at + 1 :].strip()
    if not subject or not obj:
        return None
    return relation, subject, obj


# --- triple types -----------------------------------------------------------

@dataclass(frozen=True)
class Triple:
    """One extracted fact: relation(subject, object).

    Construction re-parses the rendered form, so any Triple that exists
    round-trips: fields with unbalanced parentheses, or a subject that
    would be split by the comma rule, are rejected up front.
    """

    relation: str
    subject: str
    object: str
    raw_line: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "relation", self.relation.strip())
        object.__setattr__(self, "subject", self.subject.strip())
        object.__setattr__(self, "object", self.object.strip())
        if not (self.relation and self.subject and self.object):
            raise ValueError("triple fields must be non-empty after trimming")
        reparsed = _parse_line_fields(self.render())
        if reparsed != (self.relation, self.subject, self.object):
            raise ValueError(f"triple does not round-trip: {self.render()!r}")
        if not self.raw_line:
            object.__setattr__(self, "raw_line", self.render())

    def render(self) -> str:
        return f"{self.relation}({self.subject}, {self.object})"

    def identity(self) -> tuple[str, str, str]:
        """Normalized identity; relation is compared case-insensitively."""
        return (
            self.relation.casefold(),
            normalize_text(self.subject),
            normalize_text(self.object),
        )


@dataclass(frozen=True)
class TripleSet:
    """Parsed triples for one prompt, plus the lines that did not make it."""

    prompt_id: str
    triples: tuple[Triple, ...] = ()
    nonconforming_lines: tuple[str, ...] = ()
    duplicate_lines: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        identities = [t.identity() for t in self.triples]
        if len(set(identities)) != len(identities):
            raise ValueError("triples must be unique after normalization")

    @property
    def candidate_line_count(self) -> int:
        return len(self.triples) + len(self.nonconforming_lines) + len(self.duplicate_lines)


# --- parsing and serialization ----------------------------------------------

def parse_triple_line(line: str) -> Triple | None:
    """Parse one line as relation(subject, object), or return None."""
    fields = _parse_line_fields(line)
    if fields is None:
        return None
    relation, subject, obj = fields
    return Triple(relation=relation, subject=subject, object=obj, raw_line=line.strip())


def parse_output(raw: str, prompt_id: str = "") -> TripleSet:
    """Parse raw model output into a TripleSet.

    Non-empty lines that fail the grammar are kept as nonconforming;
    well-formed repeats of an already-seen normalized triple are kept as
    duplicates.  First occurrence wins.
    """
    triples: list[Triple] = []
    nonconforming: list[str] = []
    duplicates: list[str] = []
    seen: set[tuple[str, str, str]] = set()
    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        triple = parse_triple_line(stripped)
        if triple is None:
            nonconforming.append(stripped)
        elif triple.identity() in seen:
            duplicates.append(stripped)
        else:
            seen.add(triple.identity())
            triples.append(triple)
    return TripleSet(
        prompt_id=prompt_id,
        triples=tuple(triples),
        nonconforming_lines=tuple(nonconforming),
        duplicate_lines=tuple(duplicates),
    )


def canonical_serialize(triple_set: TripleSet | Iterable[Triple]) -> str:
    """Render triples one per line, sorted lexicographically.

    The canonical form is what metrics and judges consume, so two sets
    holding the same triples always serialize identically regardless of
    extraction order.
    """
    triples = triple_set.triples if isinstance(triple_set, TripleSet) else tuple(triple_set)
    return "\n".join(sorted(t.render() for t in triples))


# --- persistence ------------------------------------------------------------

def triple_set_to_record(ts: TripleSet) -> dict:
    return {
        "prompt_id": ts.prompt_id,
        "triples": [
            {"relation": t.relation, "subject": t.subject, "object": t.object, "raw_line": t.raw_line}
            for t in ts.triples
        ],
        "nonconforming_lines": list(ts.nonconforming_lines),
        "duplicate_lines": list(ts.duplicate_lines),
    }


def triple_set_from_record(record: dict) -> TripleSet:
    return TripleSet(
        prompt_id=record["prompt_id"],
        triples=tuple(
            Triple(
                relation=t["relation"],
                subject=t["subject"],
                object=t["object"],
                raw_line=t.get("raw_line", ""),
            )
            for t in record["triples"]
        ),
        nonconforming_lines=tuple(record.get("nonconforming_lines", ())),
        duplicate_lines=tuple(record.get("duplicate_lines", ())),
    )


def write_triple_sets(sets: Iterable[TripleSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ts in sets:
            fh.write(json.dumps(triple_set_to_record(ts), sort_keys=True, ensure_ascii=False))
            fh.write("\n")


def read_triple_sets(path: str | Path) -> list[TripleSet]:
    sets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                sets.append(triple_set_from_record(json.loads(line)))
    return sets
