"""Ontology loading, merging, and prompt templates.

Ontology files use a small sectioned text format:

    # comment lines start with #
    name: Location Ontology
    entities:
      AdministrativeArea
      Association, Location
    relations:
      hasAdministrativeArea
      hasLocation

Entries may sit one per line or comma-separated; a leading ``-`` bullet
is tolerated.  Names are trimmed and compared case-sensitively when
loading; the hallucination check elsewhere compares relations
case-insensitively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicateName, EmptyInput, EmptyOntology, MalformedFile


@dataclass(frozen=True)
class Ontology:
    """A named pair of entity-type and relation-type sets; immutable."""

    name: str
    entity_types: frozenset[str]
    relation_types: frozenset[str]
    source: str = ""

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise EmptyOntology("ontology name must be non-empty")
        if not self.entity_types or not self.relation_types:
            raise EmptyOntology(f"ontology {self.name!r} has an empty type set")
        for name in self.entity_types | self.relation_types:
            if not name or name != name.strip():
                raise EmptyOntology(f"ontology {self.name!r} has a blank or untrimmed type name")


@dataclass(frozen=True)
class OntologyTemplate:
    """Pairs an instruction text with the ontology it speaks for."""

    template_id: str
    ontology_name: str
    instruction_text: str

    def __post_init__(self) -> None:
        if not self.template_id or not self.instruction_text.strip():
            raise ValueError("template_id and instruction_text must be non-empty")


DEFAULT_INSTRUCTION = (
    "Extract and list only the triples from the following text based on the "
    "specified entity types and relation types. Do not include any explanatory "
    "or intermediate text in your output. In the output, only include the "
    "triples in the given output format: relation(subject, object). Attempt to "
    "extract as many entities and relations as you can."
)


def default_template(ontology: Ontology) -> OntologyTemplate:
    """One extraction template per ontology, named after it."""
    return OntologyTemplate(
        template_id=ontology.name,
        ontology_name=ontology.name,
        instruction_text=DEFAULT_INSTRUCTION,
    )


# --- loading ----------------------------------------------------------------

def _split_entries(text: str) -> list[str]:
    text = text.strip()
    if text.startswith("- "):
        text = text[2:]
    return [part.strip() for part in text.split(",") if part.strip()]


def load_ontology(path: str | Path) -> Ontology:
    """Parse one ontology file; see the module docstring for the format."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MalformedFile(f"cannot read ontology file {path}: {exc}") from exc
    name: str | None = None
    sections: dict[str, list[str]] = {"entities": [], "relations": []}
    current: str | None = None
    for lineno, raw_line in enumerate(lines, start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        lowered = line.lower()
        if lowered.startswith("name:"):
            if name is not None:
                raise MalformedFile(f"{path}:{lineno}: second name header")
            name = line[len("name:") :].strip()
            if not name:
                raise MalformedFile(f"{path}:{lineno}: empty name header")
            continue
        if lowered.startswith(("entities:", "relations:")):
            current = "entities" if lowered.startswith("entities:") else "relations"
            remainder = line.split(":", 1)[1]
            entries = _split_entries(remainder)
        elif current is None:
            raise MalformedFile(f"{path}:{lineno}: entry before any section header")
        else:
            entries = _split_entries(line)
        for entry in entries:
            if entry in sections[current]:
                raise DuplicateName(f"{path}:{lineno}: duplicate name {entry!r} in {current}")
            sections[current].append(entry)
    if name is None:
        raise MalformedFile(f"{path}: missing name header")
    if not sections["entities"] or not sections["relations"]:
        raise EmptyOntology(f"{path}: ontology {name!r} needs at least one entity and one relation")
    return Ontology(
        name=name,
        entity_types=frozenset(sections["entities"]),
        relation_types=frozenset(sections["relations"]),
        source=str(path),
    )


def load_ontology_dir(directory: str | Path, pattern: str = "*.ont") -> list[Ontology]:
    """Load every ontology file in a directory, sorted by file name."""
    directory = Path(directory)
    paths = sorted(directory.glob(pattern))
    if not paths:
        raise EmptyInput(f"no ontology files matching {pattern!r} in {directory}")
    return [load_ontology(p) for p in paths]


# --- merging ----------------------------------------------------------------

def merge_ontologies(parts: Sequence[Ontology]) -> Ontology:
    """Union entity and relation sets across the given ontologies.

    Duplicate parts collapse first, so merging an ontology with itself
    returns an equal ontology.  The merge is commutative and associative
    up to the resulting type sets.
    """
    if not parts:
        raise EmptyInput("merge_ontologies needs at least one ontology")
    distinct: list[Ontology] = []
    for part in parts:
        if part not in distinct:
            distinct.append(part)
    if len(distinct) == 1:
        return replace(distinct[0])
    entity_types: frozenset[str] = frozenset().union(*(p.entity_types for p in distinct))
    relation_types: frozenset[str] = frozenset().union(*(p.relation_types for p in distinct))
    names = [p.name for p in distinct]
    return Ontology(
        name="+".join(names),
        entity_types=entity_types,
        relation_types=relation_types,
        source="merged[" + ", ".join(names) + "]",
    )


# --- export -----------------------------------------------------------------

def ontology_to_json(ontology: Ontology) -> str:
    return json.dumps(
        {
            "name": ontology.name,
            "entity_types": sorted(ontology.entity_types),
            "relation_types": sorted(ontology.relation_types),
            "source": ontology.source,
        },
        sort_keys=True,
        ensure_ascii=False,
        indent=2,
    )


def save_ontology_json(ontology: Ontology, path: str | Path) -> None:
    Path(path).write_text(ontology_to_json(ontology) + "\n", encoding="utf-8")


def ontologies_by_name(parts: Iterable[Ontology]) -> dict[str, Ontology]:
    mapping: dict[str, Ontology] = {}
    for part in parts:
        if part.name in mapping:
            raise DuplicateName(f"two ontologies share the name {part.name!r}")
        mapping[part.name] = part
    return mapping
