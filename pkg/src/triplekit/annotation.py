"""Expert annotation: review sessions, reference export, and agreement.

A review session is a queue of extracted triples persisted as an
append-only JSONL log: a header line fixes the queue, then one event
line per decision (or undo).  Reopening a session replays the log, so a
crash mid-review loses nothing and the cursor lands on the first
undecided item.  Rejections carry one of four reason codes.

Agreement between two reviewers' accepted sets uses normalized triple
identity: Jaccard, Dice, and Overlap coefficients, where two empty sets
agree perfectly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import KTooLarge, SessionCorrupt
from .triples import Triple, TripleSet, write_triple_sets

REJECT_REASONS = ("wrong-format", "swapped-order", "hallucinated", "other")

ACCEPT = "accept"
REJECT = "reject"


@dataclass(frozen=True)
class ReviewItem:
    """One triple awaiting a decision, with enough context to judge it."""

    prompt_id: str
    triple: Triple
    source_model: str = ""
    context_excerpt: str = ""


@dataclass(frozen=True)
class AgreementResult:
    """Set agreement coefficients; Overlap >= Dice >= Jaccard always."""

    jaccard: float
    dice: float
    overlap: float


class ReviewSession:
    """Append-only, resumable review of a fixed triple queue."""

    def __init__(self, path: Path, session_id: str, annotator_id: str, items: list[ReviewItem]):
        self.path = path
        self.session_id = session_id
        self.annotator_id = annotator_id
        self.items = items
        self.decisions: list[tuple[str, str | None] | None] = [None] * len(items)
        self._decision_order: list[int] = []

    # -- construction ---------------------------------------------------------

    @classmethod
    def create(
        cls,
        path: str | Path,
        session_id: str,
        annotator_id: str,
        items: Sequence[ReviewItem],
    ) -> "ReviewSession":
        path = Path(path)
        if path.exists():
            raise SessionCorrupt(f"refusing to overwrite existing session {path}")
        session = cls(path, session_id, annotator_id, list(items))
        header = {
            "type": "header",
            "session_id": session_id,
            "annotator_id": annotator_id,
            "items": [
                {
                    "prompt_id": item.prompt_id,
                    "relation": item.triple.relation,
                    "subject": item.triple.subject,
                    "object": item.triple.object,
                    "source_model": item.source_model,
                    "context_excerpt": item.context_excerpt,
                }
                for item in session.items
            ],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
        return session

    @classmethod
    def open(cls, path: str | Path) -> "ReviewSession":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise SessionCorrupt(f"cannot read session {path}: {exc}") from exc
        if not lines:
            raise SessionCorrupt(f"session {path} is empty")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise SessionCorrupt(f"session {path} header is not JSON: {exc}") from exc
        if header.get("type") != "header":
            raise SessionCorrupt(f"session {path} does not start with a header line")
        try:
            items = [
                ReviewItem(
                    prompt_id=rec["prompt_id"],
                    triple=Triple(
                        relation=rec["relation"], subject=rec["subject"], object=rec["object"]
                    ),
                    source_model=rec.get("source_model", ""),
                    context_excerpt=rec.get("context_excerpt", ""),
                )
                for rec in header["items"]
            ]
            session = cls(path, header["session_id"], header["annotator_id"], items)
        except (KeyError, ValueError) as exc:
            raise SessionCorrupt(f"session {path} header is malformed: {exc}") from exc
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                event = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SessionCorrupt(f"{path}:{lineno}: bad event line: {exc}") from exc
            session._apply(event, lineno)
        return session

    # -- event handling -------------------------------------------------------

    def _apply(self, event: dict, lineno: int = 0) -> None:
        kind = event.get("type")
        where = f"{self.path}:{lineno}" if lineno else str(self.path)
        if kind == "decision":
            index = event.get("index")
            decision = event.get("decision")
            reason = event.get("reason")
            if not isinstance(index, int) or not (0 <= index < len(self.items)):
                raise SessionCorrupt(f"{where}: decision index {index!r} out of range")
            if decision not in (ACCEPT, REJECT):
                raise SessionCorrupt(f"{where}: unknown decision {decision!r}")
            if decision == REJECT and reason not in REJECT_REASONS:
                raise SessionCorrupt(f"{where}: reject needs a reason from {REJECT_REASONS}")
            if self.decisions[index] is not None:
                raise SessionCorrupt(f"{where}: item {index} decided twice without undo")
            self.decisions[index] = (decision, reason if decision == REJECT else None)
            self._decision_order.append(index)
        elif kind == "undo":
            if not self._decision_order:
                raise SessionCorrupt(f"{where}: undo with nothing to undo")
            self.decisions[self._decision_order.pop()] = None
        else:
            raise SessionCorrupt(f"{where}: unknown event type {kind!r}")

    def _append_event(self, event: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")

    # -- the public decision API ----------------------------------------------

    @property
    def cursor(self) -> int | None:
        """Index of the first undecided item, or None when done."""
        for index, decision in enumerate(self.decisions):
            if decision is None:
                return index
        return None

    @property
    def decided_count(self) -> int:
        return sum(1 for d in self.decisions if d is not None)

    def decide(self, decision: str, reason: str | None = None) -> None:
        """Record a decision for the item at the cursor and persist it."""
        index = self.cursor
        if index is None:
            raise SessionCorrupt("every item is already decided")
        if decision not in (ACCEPT, REJECT):
            raise ValueError(f"decision must be {ACCEPT!r} or {REJECT!r}")
        if decision == REJECT and reason not in REJECT_REASONS:
            raise ValueError(f"reject needs a reason from {REJECT_REASONS}")
        event = {
            "type": "decision",
            "index": index,
            "decision": decision,
            "reason": reason if decision == REJECT else None,
        }
        self._apply(event)
        self._append_event(event)

    def undo(self) -> None:
        """Revert the most recent decision and persist the undo."""
        event = {"type": "undo"}
        self._apply(event)
        self._append_event(event)

    # -- export ---------------------------------------------------------------

    def accepted_triple_sets(self) -> dict[str, TripleSet]:
        """Accepted triples grouped per prompt, deduplicated, first kept."""
        per_prompt: dict[str, list[Triple]] = {}
        seen: dict[str, set] = {}
        for item, decision in zip(self.items, self.decisions):
            if decision is None or decision[0] != ACCEPT:
                continue
            identity = item.triple.identity()
            if identity in seen.setdefault(item.prompt_id, set()):
                continue
            seen[item.prompt_id].add(identity)
            per_prompt.setdefault(item.prompt_id, []).append(item.triple)
        return {
            prompt_id: TripleSet(prompt_id=prompt_id, triples=tuple(triples))
            for prompt_id, triples in per_prompt.items()
        }

    def export_reference(self, path: str | Path) -> None:
        """Write the accepted sets as reference JSONL, sorted by prompt.

        Re-exporting an unchanged session is byte-identical.
        """
        accepted = self.accepted_triple_sets()
        write_triple_sets((accepted[pid] for pid in sorted(accepted)), path)


# --- sampling ----------------------------------------------------------------

def sample_annotation_prompts(prompts: Sequence, k: int, seed: int) -> list:
    """Uniform sample without replacement, deterministic per seed.

    The result keeps the original relative order of the chosen prompts.
    """
    if k > len(prompts):
        raise KTooLarge(f"cannot sample {k} of {len(prompts)} prompts")
    if k < 0:
        raise ValueError("k must be >= 0")
    chosen = set(random.Random(seed).sample(range(len(prompts)), k))
    return [p for i, p in enumerate(prompts) if i in chosen]


# --- agreement ---------------------------------------------------------------

def agreement_metrics(a: TripleSet, b: TripleSet) -> AgreementResult:
    """Jaccard, Dice, and Overlap of two reviewers' sets for one prompt.

    Sets compare by normalized triple identity.  Two empty sets agree
    perfectly (1, 1, 1); if exactly one is empty, all three are 0.
    """
    if a.prompt_id != b.prompt_id:
        raise ValueError(f"agreement compares one prompt, got {a.prompt_id!r} vs {b.prompt_id!r}")
    set_a = {t.identity() for t in a.triples}
    set_b = {t.identity() for t in b.triples}
    if not set_a and not set_b:
        return AgreementResult(jaccard=1.0, dice=1.0, overlap=1.0)
    intersection = len(set_a & set_b)
    union = len(set_a | set_b)
    smaller = min(len(set_a), len(set_b))
    return AgreementResult(
        jaccard=intersection / union,
        dice=2.0 * intersection / (len(set_a) + len(set_b)),
        overlap=intersection / smaller if smaller else 0.0,
    )


def mean_agreement(results: Sequence[AgreementResult]) -> AgreementResult:
    if not results:
        raise ValueError("cannot average zero agreement results")
    return AgreementResult(
        jaccard=sum(r.jaccard for r in results) / len(results),
        dice=sum(r.dice for r in results) / len(results),
        overlap=sum(r.overlap for r in results) / len(results),
    )


# --- the terminal flow -------------------------------------------------------

_HELP = "  [a]ccept  [r]eject  [u]ndo  [q]uit"
_REASON_MENU = "  reason: " + "  ".join(
    f"[{i}] {reason}" for i, reason in enumerate(REJECT_REASONS, start=1)
)


def review_triples(
    session: ReviewSession,
    read_key: Callable[[str], str] | None = None,
    write: Callable[[str], None] = print,
) -> None:
    """Single-key terminal review loop over the session queue.

    Each decision is persisted immediately, so quitting (or crashing)
    and reopening the session resumes at the cursor.  ``read_key`` and
    ``write`` are injectable for tests.
    """
    if read_key is None:
        # resolve lazily so a patched builtins.input is honoured
        read_key = input
    total = len(session.items)
    while True:
        index = session.cursor
        if index is None:
            write(f"review complete: {total} items decided")
            return
        item = session.items[index]
        write("")
        write(f"[{index + 1}/{total}] prompt {item.prompt_id}" + (f" ({item.source_model})" if item.source_model else ""))
        if item.context_excerpt:
            write(f"  context: {item.context_excerpt}")
        write(f"  triple:  {item.triple.render()}")
        key = read_key(_HELP + " > ").strip().lower()[:1]
        if key == "a":
            session.decide(ACCEPT)
        elif key == "r":
            reason_key = read_key(_REASON_MENU + " > ").strip()
            try:
                reason = REJECT_REASONS[int(reason_key) - 1]
            except (ValueError, IndexError):
                write("  unrecognized reason, item left undecided")
                continue
            session.decide(REJECT, reason)
        elif key == "u":
            try:
                session.undo()
            except SessionCorrupt:
                write("  nothing to undo")
        elif key == "q":
            write(f"stopped at item {index + 1}/{total}; session saved")
            return
        else:
            write("  unrecognized key")


def build_review_queue(
    triple_sets: Iterable[TripleSet],
    contexts: Mapping[str, str] | None = None,
    source_model: str = "",
    excerpt_words: int = 40,
) -> list[ReviewItem]:
    """Flatten triple sets into review items with context excerpts."""
    items = []
    for ts in triple_sets:
        excerpt = ""
        if contexts and ts.prompt_id in contexts:
            words = contexts[ts.prompt_id].split()
            excerpt = " ".join(words[:excerpt_words]) + (" ..." if len(words) > excerpt_words else "")
        for triple in ts.triples:
            items.append(
                ReviewItem(
                    prompt_id=ts.prompt_id,
                    triple=triple,
                    source_model=source_model,
                    context_excerpt=excerpt,
                )
            )
    return items
