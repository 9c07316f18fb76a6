"""Final surface polish and the safety validation layer."""
import logging
import random
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Optional

from .clock import local
from .errors import ConfigError, OverBudget
from .selection import IntentMessage

logger = logging.getLogger(__name__)

TWEET_LIMIT = 280
MAX_EMOJI_LENGTH = 4
SENTENCE_END = ".!?…"
EMOJI_VALUE_KEYS = ("weather", "condition", "alert_kind")


class GreetingWindow(str, Enum):
    MORNING = "morning"
    AFTERNOON = "afternoon"
    EVENING = "evening"


def window_of(moment: datetime) -> GreetingWindow:
    """Morning 05-12h, afternoon 12-18h, evening 18-05h, local time"""
    hour = local(moment).hour
    if 5 <= hour < 12:
        return GreetingWindow.MORNING
    if 12 <= hour < 18:
        return GreetingWindow.AFTERNOON
    return GreetingWindow.EVENING


@dataclass
class PolishConfig:
    greetings: dict[GreetingWindow, list[str]]
    emoji_map: dict[str, str] = field(default_factory=dict)
    enable_emoji: bool = True

    def __post_init__(self):
        self.greetings = {GreetingWindow(k): list(v) for k, v in self.greetings.items()}
        for window in GreetingWindow:
            if not self.greetings.get(window):
                raise ConfigError(f"no greeting for the {window.value} window")
        for key, emoji in self.emoji_map.items():
            if not emoji or len(emoji) > MAX_EMOJI_LENGTH:
                raise ConfigError(f"emoji for {key} must be 1 to {MAX_EMOJI_LENGTH} code points")

    @classmethod
    def from_dict(cls, data: dict) -> "PolishConfig":
        try:
            return cls(greetings=data["greetings"], emoji_map=data.get("emoji", {}),
                       enable_emoji=bool(data.get("enable_emoji", True)))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad polish config: {e}") from e

    def longest_greeting(self) -> int:
        return max(len(g) for greetings in self.greetings.values() for g in greetings)


def emoji_keys(messages: list[IntentMessage]) -> list[str]:
    """Lookup keys for the segment's dominant (most salient, earliest) message"""
    if not messages:
        return []
    dominant = max(messages, key=lambda m: (m.salience, -messages.index(m)))
    keys = []
    for name in EMOJI_VALUE_KEYS:
        value = dominant.attributes.get(name)
        if value is not None:
            keys.append(f"{dominant.predicate.value}:{value.value}")
    keys.append(dominant.predicate.value)
    return keys


def _capitalize(match: re.Match) -> str:
    char = match.group(2)
    upper = char.upper()
    return match.group(1) + (upper if len(upper) == 1 else char)


def cleanup(text: str) -> str:
    """Collapse whitespace, capitalize sentence starts and close the last sentence"""
    text = " ".join(text.split())
    if not text:
        return text
    text = re.sub(r"(^|[" + SENTENCE_END + r"]\s)(\w)", _capitalize, text)
    last = text.split(" ")[-1]
    if text[-1] not in SENTENCE_END and not last.startswith(("http://", "https://")):
        text += "."
    return text


def polish(segments: list[str], window: GreetingWindow, config: PolishConfig, rng: random.Random,
           keys: Optional[list[list[str]]] = None, limit: int = TWEET_LIMIT) -> list[str]:
    """Turn resolved segment texts into tweet texts.

    When there is more than one segment each tweet leaves room for its
    " (i/n)" numbering suffix.
    """
    if not segments:
        raise ValueError("nothing to polish")
    total = len(segments)
    tweets = []
    for i, segment in enumerate(segments, start=1):
        text = cleanup(segment)
        if i == 1:
            text = f"{rng.choice(config.greetings[window])} {text}"
        room = limit - (len(f" ({i}/{total})") if total > 1 else 0)
        emoji = None
        if config.enable_emoji and keys is not None:
            emoji = next((config.emoji_map[k] for k in keys[i - 1] if k in config.emoji_map), None)
        if emoji and len(text) + 1 + len(emoji) <= room:
            text = f"{text} {emoji}"
        elif emoji:
            logger.debug("Dropping emoji on segment %d to stay within %d", i, room)
        if len(text) > room:
            raise OverBudget(f"segment {i} is {len(text)} code points, limit {room}")
        tweets.append(text)
    return tweets


# Validation

@dataclass(frozen=True)
class Verdict:
    term: Optional[str] = None
    position: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.term is None


PASS = Verdict()


def fold(text: str) -> tuple[str, list[int]]:
    """Casefold and strip diacritics, returning the folded text and, per folded
    character, the index of the original character it came from"""
    out, index = [], []
    for i, char in enumerate(text):
        for piece in unicodedata.normalize("NFD", char.casefold()):
            if not unicodedata.combining(piece):
                out.append(piece)
                index.append(i)
    return "".join(out), index


class Blocklist:
    def __init__(self, terms: list[str]):
        self.terms = sorted({fold(t.strip())[0] for t in terms if t.strip()})
        self.patterns = [(term, re.compile(r"(?<!\w)" + re.escape(term) + r"(?!\w)")) for term in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    @classmethod
    def parse(cls, text: str) -> "Blocklist":
        return cls([line.split("#", 1)[0] for line in text.splitlines()])


def validate(text: str, blocklist: Blocklist) -> Verdict:
    """Earliest whole-word blocklist match, or PASS"""
    folded, index = fold(text)
    best: Optional[Verdict] = None
    for term, pattern in blocklist.patterns:
        match = pattern.search(folded)
        if match and (best is None or index[match.start()] < best.position):
            best = Verdict(term, index[match.start()])
    return best or PASS
