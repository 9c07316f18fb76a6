"""Referring expression generation.

Registry file format:

    entity SISMO_USP gender=masc number=sing
    full: o Centro de Sismologia da Universidade de São Paulo (USP)
    expr: o Centro de Sismologia da USP
    expr: ele [pronoun]
"""
import logging
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import RegistryError, UnknownEntity

logger = logging.getLogger(__name__)

TAG = re.compile(r"«ENTITY:([A-Za-z][A-Za-z0-9_]*)»")
ENTITY_LINE = re.compile(r"entity\s+([A-Z][A-Z0-9_]*)((?:\s+\w+=\w+)*)\s*")
PRONOUN_FLAG = "[pronoun]"


class Number(str, Enum):
    SING = "sing"
    PLUR = "plur"


@dataclass(frozen=True)
class Expression:
    text: str
    pronoun: bool = False


@dataclass(frozen=True)
class EntityProfile:
    entity_id: str
    full_description: str
    short_expressions: tuple[Expression, ...]
    gender: str = "masc"
    number: Number = Number.SING

    def __post_init__(self):
        if not self.short_expressions:
            raise RegistryError(f"entity {self.entity_id} has no short expressions")
        if any(e.text == self.full_description for e in self.short_expressions):
            raise RegistryError(f"entity {self.entity_id} repeats its full description as an expression")

    def surfaces(self) -> list[str]:
        return [self.full_description] + [e.text for e in self.short_expressions]


class EntityRegistry:
    """Immutable lookup of entity profiles by id"""

    def __init__(self, profiles: list[EntityProfile]):
        self._profiles = {p.entity_id: p for p in profiles}

    def __len__(self) -> int:
        return len(self._profiles)

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._profiles

    def get(self, entity_id: str) -> EntityProfile:
        try:
            return self._profiles[entity_id]
        except KeyError:
            raise UnknownEntity(f"entity {entity_id} is not registered") from None

    def longest(self, entity_id: str) -> str:
        return max(self.get(entity_id).surfaces(), key=len)


@dataclass
class MentionHistory:
    """Entities already mentioned in the current report, and in the current segment"""
    seen: set[str] = field(default_factory=set)
    segment_seen: set[str] = field(default_factory=set)

    def start_segment(self) -> None:
        self.segment_seen = set()

    def mention(self, entity_id: str) -> None:
        self.seen.add(entity_id)
        self.segment_seen.add(entity_id)


def choose_expression(profile: EntityProfile, history: MentionHistory, rng: random.Random) -> str:
    if profile.entity_id not in history.seen:
        return profile.full_description
    in_segment = profile.entity_id in history.segment_seen
    eligible = [e.text for e in profile.short_expressions if in_segment or not e.pronoun]
    if not eligible:
        return profile.full_description
    return rng.choice(eligible)


def resolve(text: str, registry: EntityRegistry, history: MentionHistory, rng: random.Random) -> str:
    """Replace entity tags left to right, updating the mention history"""
    def replace(match: re.Match) -> str:
        profile = registry.get(match.group(1))
        surface = choose_expression(profile, history, rng)
        history.mention(profile.entity_id)
        return surface

    return TAG.sub(replace, text)


def lint_entities(text: str, source: Optional[str] = None) -> tuple[list[EntityProfile], list[RegistryError]]:
    profiles: list[EntityProfile] = []
    diagnostics: list[RegistryError] = []
    current: Optional[dict] = None

    def close():
        if current is None:
            return
        if current["full"] is None:
            diagnostics.append(RegistryError(f"entity {current['id']} has no full description",
                                             line=current["line"], source=source))
            return
        try:
            profiles.append(EntityProfile(current["id"], current["full"], tuple(current["exprs"]),
                                          current["gender"], current["number"]))
        except RegistryError as e:
            diagnostics.append(RegistryError(e.message, line=current["line"], source=source))

    ids: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if match := ENTITY_LINE.fullmatch(line):
            close()
            entity_id, options = match.group(1), dict(o.split("=") for o in match.group(2).split())
            current = None
            if entity_id in ids:
                diagnostics.append(RegistryError(f"duplicate entity {entity_id}", line=lineno, source=source))
                continue
            ids.add(entity_id)
            gender = options.pop("gender", "masc")
            number = options.pop("number", "sing")
            if gender not in ("masc", "fem") or number not in ("sing", "plur") or options:
                diagnostics.append(RegistryError(f"bad options on entity {entity_id}", line=lineno, source=source))
                continue
            current = {"id": entity_id, "full": None, "exprs": [], "gender": gender,
                       "number": Number(number), "line": lineno}
            continue
        key, sep, value = line.partition(":")
        value = value.strip()
        if not sep or key not in ("full", "expr") or not value:
            diagnostics.append(RegistryError(f"unrecognized line: {line}", line=lineno, source=source))
            continue
        if current is None:
            diagnostics.append(RegistryError(f"{key} outside an entity block", line=lineno, source=source))
            continue
        if key == "full":
            current["full"] = value
        else:
            pronoun = value.endswith(PRONOUN_FLAG)
            if pronoun:
                value = value[:-len(PRONOUN_FLAG)].strip()
            current["exprs"].append(Expression(value, pronoun))
    close()
    return profiles, diagnostics


def load_entities(text: str, source: Optional[str] = None) -> EntityRegistry:
    profiles, diagnostics = lint_entities(text, source)
    if diagnostics:
        raise diagnostics[0]
    logger.debug("Loaded %d entities", len(profiles))
    return EntityRegistry(profiles)
