"""Discourse ordering and text structuring.

The ordering catalog is one entry per line:

    context_tag: PRED_A > PRED_B > PRED_C
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import CatalogError, MessageTooLarge, MissingTemplate, NoApplicableOrdering
from .lexicalization import ENTITY_TAG, Grammar, fill
from .reg import EntityRegistry
from .selection import IntentMessage, Predicate

logger = logging.getLogger(__name__)

TWEET_LIMIT = 280
# " (10/10)" numbering, one punctuation mark, one space and an emoji of up to 4 code points
SEGMENT_OVERHEAD = 14
JOINER = " "

ENTRY_LINE = re.compile(r"([A-Za-z][\w-]*)\s*:\s*(.+)")


@dataclass(frozen=True)
class CatalogEntry:
    tag: str
    predicates: tuple[Predicate, ...]
    line: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class OrderingCatalog:
    entries: tuple[CatalogEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise CatalogError("ordering catalog is empty")
        for entry in self.entries:
            if len(set(entry.predicates)) != len(entry.predicates):
                raise CatalogError(f"entry {entry.tag} repeats a predicate", line=entry.line)

    def entry(self, tag: str) -> CatalogEntry:
        for entry in self.entries:
            if entry.tag == tag:
                return entry
        raise KeyError(tag)


def lint_catalog(text: str, source: Optional[str] = None) -> tuple[list[CatalogEntry], list[CatalogError]]:
    entries: list[CatalogEntry] = []
    diagnostics: list[CatalogError] = []
    tags: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = ENTRY_LINE.fullmatch(line)
        if not match:
            diagnostics.append(CatalogError(f"expected 'tag: PRED > PRED', got {line!r}", line=lineno, source=source))
            continue
        tag, body = match.groups()
        predicates = []
        bad = False
        for name in (part.strip() for part in body.split(">")):
            predicate = Predicate.lookup(name) if name else None
            if predicate is None:
                diagnostics.append(CatalogError(f"unknown predicate {name!r}", line=lineno, source=source))
                bad = True
            elif predicate in predicates:
                diagnostics.append(CatalogError(f"{predicate.value} listed twice", line=lineno, source=source))
                bad = True
            else:
                predicates.append(predicate)
        if tag in tags:
            diagnostics.append(CatalogError(f"duplicate context tag {tag}", line=lineno, source=source))
            bad = True
        tags.add(tag)
        if not bad:
            entries.append(CatalogEntry(tag, tuple(predicates), lineno))
    if not entries and not diagnostics:
        diagnostics.append(CatalogError("ordering catalog is empty", source=source))
    return entries, diagnostics


def load_catalog(text: str, source: Optional[str] = None) -> OrderingCatalog:
    entries, diagnostics = lint_catalog(text, source)
    if diagnostics:
        raise diagnostics[0]
    return OrderingCatalog(tuple(entries))


def choose_entry(messages: list[IntentMessage], catalog: OrderingCatalog) -> CatalogEntry:
    """Entry sharing the most predicates with the messages; file order breaks ties"""
    present = {m.predicate for m in messages}
    best, best_overlap = None, 0
    for entry in catalog.entries:
        overlap = len(present.intersection(entry.predicates))
        if overlap > best_overlap:
            best, best_overlap = entry, overlap
    if best is None:
        raise NoApplicableOrdering(
            "no ordering covers " + ", ".join(sorted(p.value for p in present))
        )
    return best


def order(messages: list[IntentMessage], catalog: OrderingCatalog) -> list[IntentMessage]:
    if not messages:
        return []
    entry = choose_entry(messages, catalog)
    position = {predicate: i for i, predicate in enumerate(entry.predicates)}
    covered = [m for m in messages if m.predicate in position]
    rest = [m for m in messages if m.predicate not in position]
    covered.sort(key=lambda m: position[m.predicate])
    rest.sort(key=lambda m: (-m.salience, m.predicate.rank))
    logger.debug("Ordered %d messages with catalog entry %s", len(messages), entry.tag)
    return covered + rest


def expand_tags(text: str, entities: Optional[EntityRegistry]) -> str:
    if entities is None:
        return text
    return ENTITY_TAG.sub(lambda m: entities.longest(m.group(1)), text)


def estimate_length(message: IntentMessage, grammar: Grammar, entities: Optional[EntityRegistry] = None) -> int:
    """Upper bound, in code points, on any realization of the message"""
    templates = grammar.templates.get(message.predicate)
    if not templates:
        raise MissingTemplate(f"no template for {message.predicate.value}")
    return max(len(expand_tags(fill(t, message, grammar), entities)) for t in templates)


@dataclass(frozen=True)
class Segment:
    messages: tuple[IntentMessage, ...]
    estimated_length: int


@dataclass(frozen=True)
class DiscoursePlan:
    segments: tuple[Segment, ...]

    def messages(self) -> list[IntentMessage]:
        return [m for segment in self.segments for m in segment.messages]

    def __len__(self) -> int:
        return len(self.segments)


def plan(ordered: list[IntentMessage], grammar: Grammar, entities: Optional[EntityRegistry] = None,
         budget: int = TWEET_LIMIT, overhead: int = SEGMENT_OVERHEAD,
         first_segment_reserve: int = 0) -> DiscoursePlan:
    """Greedy packing of ordered messages into tweet-sized segments"""
    segments: list[Segment] = []
    current: list[IntentMessage] = []
    length = 0

    def limit() -> int:
        return budget - overhead - (first_segment_reserve if not segments else 0)

    for message in ordered:
        estimate = estimate_length(message, grammar, entities)
        if current and length + len(JOINER) + estimate <= limit():
            current.append(message)
            length += len(JOINER) + estimate
            continue
        if current:
            segments.append(Segment(tuple(current), length))
            current, length = [], 0
        if estimate > limit():
            raise MessageTooLarge(
                f"{message.predicate.value} needs {estimate} code points, segment allows {limit()}",
                estimate=estimate, limit=limit(),
            )
        current, length = [message], estimate
    if current:
        segments.append(Segment(tuple(current), length))
    return DiscoursePlan(tuple(segments))
