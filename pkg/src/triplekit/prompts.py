"""Prompt strategies, demonstration retrieval, and prompt rendering.

Five strategies cover the zero-shot and one-shot variants:

* ``zero_shot`` (zs): instruction, type lists, and context only.
* ``random_sentence`` / ``random_paragraph`` (rs/rp): one demonstration
  drawn uniformly from a different ontology, seeded per prompt.
* ``ontology_sentence`` / ``ontology_paragraph`` (os/op): the shortest
  demonstration of the matching ontology and granularity whose context
  does not leak into the target chunk.

Leakage means either normalized context contains the other as a
contiguous token run.  Shortest-match ties break on lexicographic
context order, so retrieval is fully deterministic.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Chunk, split_sentences
from .errors import NoEligibleDemonstration
from .ontology import Ontology, OntologyTemplate
from .triples import Triple, canonical_serialize, normalize_text, token_subsequence

SENTENCE = "sentence"
PARAGRAPH = "paragraph"


class Strategy(Enum):
    ZERO_SHOT = "zero_shot"
    RANDOM_SENTENCE = "random_sentence"
    RANDOM_PARAGRAPH = "random_paragraph"
    ONTOLOGY_SENTENCE = "ontology_sentence"
    ONTOLOGY_PARAGRAPH = "ontology_paragraph"

    @property
    def granularity(self) -> str | None:
        if self in (Strategy.RANDOM_SENTENCE, Strategy.ONTOLOGY_SENTENCE):
            return SENTENCE
        if self in (Strategy.RANDOM_PARAGRAPH, Strategy.ONTOLOGY_PARAGRAPH):
            return PARAGRAPH
        return None

    @property
    def uses_demonstration(self) -> bool:
        return self is not Strategy.ZERO_SHOT

    @property
    def ontology_matched(self) -> bool:
        return self in (Strategy.ONTOLOGY_SENTENCE, Strategy.ONTOLOGY_PARAGRAPH)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        aliases = {
            "zs": cls.ZERO_SHOT,
            "rs": cls.RANDOM_SENTENCE,
            "rp": cls.RANDOM_PARAGRAPH,
            "os": cls.ONTOLOGY_SENTENCE,
            "op": cls.ONTOLOGY_PARAGRAPH,
        }
        key = text.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown strategy {text!r}") from None


@dataclass(frozen=True)
class Demonstration:
    """A context/answer pair used as a one-shot example.

    ``length`` is the word count of the context plus the canonical
    serialization of the answer; retrieval prefers the shortest.
    """

    context: str
    answer: tuple[Triple, ...]
    ontology_name: str
    granularity: str
    demo_id: str = ""
    length: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if not self.answer:
            raise ValueError("a demonstration needs at least one answer triple")
        if self.granularity not in (SENTENCE, PARAGRAPH):
            raise ValueError(f"granularity must be {SENTENCE!r} or {PARAGRAPH!r}")
        length = len(self.context.split()) + len(canonical_serialize(self.answer).split())
        object.__setattr__(self, "length", length)
        if self.length <= 0:
            raise ValueError("demonstration length must be positive")
        if not self.demo_id:
            digest = hashlib.sha256(
                "\x1e".join(
                    [self.ontology_name, self.granularity, self.context, canonical_serialize(self.answer)]
                ).encode("utf-8")
            ).hexdigest()
            object.__setattr__(self, "demo_id", digest[:12])

    def rendered_answer(self) -> str:
        return canonical_serialize(self.answer)


@dataclass(frozen=True)
class PromptSpec:
    """One rendered extraction prompt, traceable to its sources."""

    prompt_id: str
    chunk_id: str
    template_id: str
    strategy: Strategy
    rendered_text: str
    demonstration_id: str | None = None

    def __post_init__(self) -> None:
        if self.strategy is Strategy.ZERO_SHOT and self.demonstration_id is not None:
            raise ValueError("zero-shot prompts carry no demonstration")


# --- retrieval --------------------------------------------------------------

def contexts_overlap(a: str, b: str) -> bool:
    """Symmetric containment test on normalized token runs."""
    ta = normalize_text(a).split()
    tb = normalize_text(b).split()
    return token_subsequence(ta, tb) or token_subsequence(tb, ta)


def retrieve_demonstration(
    pool: Sequence[Demonstration],
    target_ontology: str,
    target_context: str,
    granularity: str,
) -> Demonstration:
    """Pick the shortest matching demonstration that does not leak.

    Candidates must match the target ontology and granularity.  They are
    visited shortest first (ties by context order, then demo_id) and the
    first one whose context neither contains nor is contained by the
    target context wins.
    """
    matches = [
        d
        for d in pool
        if d.ontology_name == target_ontology and d.granularity == granularity
    ]
    if not matches:
        raise NoEligibleDemonstration(
            f"no demonstration for ontology {target_ontology!r} at {granularity} granularity"
        )
    matches.sort(key=lambda d: (d.length, d.context, d.demo_id))
    for demo in matches:
        if not contexts_overlap(demo.context, target_context):
            return demo
    raise NoEligibleDemonstration(
        f"every {target_ontology!r} demonstration overlaps the target context"
    )


def stable_rng(*parts: object) -> random.Random:
    material = "\x1e".join(str(p) for p in parts).encode("utf-8")
    seed = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
    return random.Random(seed)


def _random_demonstration(
    pool: Sequence[Demonstration],
    exclude_ontology: str,
    granularity: str,
    rng: random.Random,
) -> Demonstration:
    eligible = [
        d
        for d in pool
        if d.ontology_name != exclude_ontology and d.granularity == granularity
    ]
    if not eligible:
        raise NoEligibleDemonstration(
            f"no {granularity} demonstration outside ontology {exclude_ontology!r}"
        )
    eligible.sort(key=lambda d: (d.length, d.context, d.demo_id))
    return rng.choice(eligible)


# --- rendering --------------------------------------------------------------

def _render_prompt(
    instruction: str,
    ontology: Ontology,
    chunk_text: str,
    demonstration: Demonstration | None,
) -> str:
    parts = [
        "Instruction:\n" + instruction,
        "Entity Types:\n" + ", ".join(sorted(ontology.entity_types)),
        "Relation Types:\n" + ", ".join(sorted(ontology.relation_types)),
    ]
    if demonstration is not None:
        label = "Sentence" if demonstration.granularity == SENTENCE else "Paragraph"
        parts.append(
            "Example:\n"
            + f"{label}:\n{demonstration.context}\n"
            + f"Output:\n{demonstration.rendered_answer()}"
        )
    parts.append("Context:\n" + chunk_text)
    return "\n\n".join(parts)


def build_extraction_prompt(
    chunk: Chunk,
    template: OntologyTemplate,
    ontology: Ontology,
    strategy: Strategy,
    pool: Sequence[Demonstration] = (),
    seed: int = 0,
) -> PromptSpec:
    """Render one prompt for a (chunk, template) pair under a strategy.

    The chunk text appears verbatim as the final Context section.  For
    the random strategies the demonstration choice is seeded per prompt,
    so rebuilding with the same inputs and seed is byte-identical.
    """
    if template.ontology_name != ontology.name:
        raise ValueError(
            f"template {template.template_id!r} speaks for {template.ontology_name!r}, "
            f"not {ontology.name!r}"
        )
    demonstration: Demonstration | None = None
    if strategy.ontology_matched:
        demonstration = retrieve_demonstration(
            pool, ontology.name, chunk.text, strategy.granularity or PARAGRAPH
        )
    elif strategy.uses_demonstration:
        rng = stable_rng(seed, chunk.chunk_id, template.template_id)
        demonstration = _random_demonstration(
            pool, ontology.name, strategy.granularity or PARAGRAPH, rng
        )
    rendered = _render_prompt(template.instruction_text, ontology, chunk.text, demonstration)
    return PromptSpec(
        prompt_id=f"{chunk.chunk_id}__{template.template_id}",
        chunk_id=chunk.chunk_id,
        template_id=template.template_id,
        strategy=strategy,
        rendered_text=rendered,
        demonstration_id=demonstration.demo_id if demonstration else None,
    )


def generate_prompt_set(
    chunks: Sequence[Chunk],
    templates: Sequence[OntologyTemplate],
    ontologies: Mapping[str, Ontology],
    strategy: Strategy,
    pool: Sequence[Demonstration] = (),
    seed: int = 0,
) -> list[PromptSpec]:
    """Build the full chunk x template cross product for one strategy.

    Output order is fixed by (doc_id, chunk ordinal, template_id), so the
    set is reproducible independent of input ordering.
    """
    ordered_chunks = sorted(chunks, key=lambda c: (c.doc_id, c.ordinal))
    ordered_templates = sorted(templates, key=lambda t: t.template_id)
    prompts = []
    for chunk in ordered_chunks:
        for template in ordered_templates:
            ontology = ontologies[template.ontology_name]
            prompts.append(
                build_extraction_prompt(chunk, template, ontology, strategy, pool, seed)
            )
    return prompts


# --- demonstration derivation ------------------------------------------------

def derive_demonstrations(
    context: str,
    answer: Sequence[Triple],
    ontology_name: str,
) -> list[Demonstration]:
    """Turn an annotated (context, triples) pair into pool entries.

    Produces one paragraph demonstration for the whole context plus one
    sentence demonstration per sentence that grounds at least one triple
    (both the subject and the object occur in the sentence as normalized
    token runs).
    """
    demos = []
    answer = tuple(answer)
    if answer:
        demos.append(
            Demonstration(
                context=context,
                answer=answer,
                ontology_name=ontology_name,
                granularity=PARAGRAPH,
            )
        )
    for sentence in split_sentences(context):
        sentence_tokens = normalize_text(sentence).split()
        grounded = tuple(
            t
            for t in answer
            if token_subsequence(normalize_text(t.subject).split(), sentence_tokens)
            and token_subsequence(normalize_text(t.object).split(), sentence_tokens)
        )
        if grounded:
            demos.append(
                Demonstration(
                    context=sentence,
                    answer=grounded,
                    ontology_name=ontology_name,
                    granularity=SENTENCE,
                )
            )
    return demos


# --- persistence ------------------------------------------------------------

def write_demonstrations(pool: Iterable[Demonstration], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for demo in pool:
            fh.write(
                json.dumps(
                    {
                        "context": demo.context,
                        "answer": [
                            {"relation": t.relation, "subject": t.subject, "object": t.object}
                            for t in demo.answer
                        ],
                        "ontology_name": demo.ontology_name,
                        "granularity": demo.granularity,
                        "demo_id": demo.demo_id,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_demonstrations(path: str | Path) -> list[Demonstration]:
    pool = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pool.append(
                    Demonstration(
                        context=rec["context"],
                        answer=tuple(
                            Triple(relation=t["relation"], subject=t["subject"], object=t["object"])
                            for t in rec["answer"]
                        ),
                        ontology_name=rec["ontology_name"],
                        granularity=rec["granularity"],
                        demo_id=rec.get("demo_id", ""),
                    )
                )
    return pool


def write_prompts(prompts: Iterable[PromptSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for prompt in prompts:
            fh.write(
                json.dumps(
                    {
                        "prompt_id": prompt.prompt_id,
                        "chunk_id": prompt.chunk_id,
                        "template_id": prompt.template_id,
                        "strategy": prompt.strategy.value,
                        "rendered_text": prompt.rendered_text,
                        "demonstration_id": prompt.demonstration_id,
                    },
                    sort_keys=True,
                    ensure_ascii=False,
                )
            )
            fh.write("\n")


def read_prompts(path: str | Path) -> list[PromptSpec]:
    prompts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                prompts.append(
                    PromptSpec(
                        prompt_id=rec["prompt_id"],
                        chunk_id=rec["chunk_id"],
                        template_id=rec["template_id"],
                        strategy=Strategy(rec["strategy"]),
                        rendered_text=rec["rendered_text"],
                        demonstration_id=rec.get("demonstration_id"),
                    )
                )
    return prompts


def export_prompt_texts(prompts: Iterable[PromptSpec], directory: str | Path) -> None:
    """Write one .txt file per prompt for manual audit."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for prompt in prompts:
        safe = prompt.prompt_id.replace("/", "_").replace(":", "_")
        (directory / f"{safe}.txt").write_text(prompt.rendered_text, encoding="utf-8")
