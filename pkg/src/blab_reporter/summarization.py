"""Extractive news summaries and tweet-thread splitting."""
import heapq
import logging
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Optional, Protocol

import httpx
from nltk.probability import FreqDist
from nltk.tokenize import RegexpTokenizer

from .errors import BindingUnavailable, EmptyBody, SummaryInvariantError, UnsplittableToken
from .warehouse import NewsRecord

logger = logging.getLogger(__name__)

TWEET_LIMIT = 280
DEFAULT_MAX_SENTENCES = 3
DEFAULT_ABBREVIATIONS = ("sr.", "sra.", "dr.", "dra.", "etc.", "prof.", "profa.", "av.", "nº.", "p.ex.")
BOUNDARY = re.compile(r"[.!?…]+[\"”’)]*(?=\s+[\"“(]?[A-ZÀ-Ý]|\s*$)")


@dataclass(frozen=True)
class Summary:
    source_url: str
    sentences: tuple[str, ...]
    compression_ratio: Decimal

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


def split_sentences(text: str, abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS) -> list[str]:
    """Sentences as verbatim substrings of `text`, in order"""
    abbreviations = {a.lower() for a in abbreviations}
    sentences, start = [], 0
    for match in BOUNDARY.finditer(text):
        end = match.end()
        word = text[max(text.rfind(c, 0, end) for c in " \n\t") + 1:end].lower()
        if word.rstrip("\"”’)") in abbreviations:
            continue
        sentence = text[start:match.end()].strip()
        if sentence:
            sentences.append(sentence)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


class ExtractiveSummarizer:
    """Term-frequency sentence scoring; the top sentences are kept in source order"""

    def __init__(self, stopwords: Iterable[str] = (), abbreviations: Iterable[str] = DEFAULT_ABBREVIATIONS,
                 max_sentences: int = DEFAULT_MAX_SENTENCES):
        if max_sentences < 1:
            raise ValueError("max_sentences must be positive")
        self.stopwords = {w.strip().lower() for w in stopwords if w.strip()}
        self.abbreviations = tuple(abbreviations)
        self.max_sentences = max_sentences
        self.tokenizer = RegexpTokenizer(r"\w+")

    def content_words(self, sentence: str) -> list[str]:
        return [w for w in self.tokenizer.tokenize(sentence.lower()) if w not in self.stopwords]

    def scores(self, sentences: list[str]) -> list[float]:
        freq = FreqDist(w for s in sentences for w in self.content_words(s))
        top = max(freq.values(), default=0)
        if not top:
            return [0.0] * len(sentences)
        return [sum(freq[w] / top for w in self.content_words(s)) for s in sentences]

    def summarize_extractive(self, article: NewsRecord, max_sentences: Optional[int] = None) -> Summary:
        if max_sentences is None:
            max_sentences = self.max_sentences
        elif max_sentences < 1:
            raise ValueError("max_sentences must be positive")
        sentences = split_sentences(article.body, self.abbreviations)
        if not sentences:
            raise EmptyBody(f"article {article.url} has no sentences")
        scores = self.scores(sentences)
        best = heapq.nsmallest(max_sentences, range(len(sentences)), key=lambda i: (-scores[i], i))
        chosen = tuple(sentences[i] for i in sorted(best))
        return Summary(article.url, chosen, Decimal(len(chosen)) / Decimal(len(sentences)))

    async def summarize(self, article: NewsRecord) -> Summary:
        return self.summarize_extractive(article)


class Summarizer(Protocol):
    async def summarize(self, article: NewsRecord) -> Summary:
        ...


class RemoteSummarizer:
    """Binding to a remote summarization service.

    POSTs the article as JSON and expects `{"sentences": [...]}` back.
    """

    def __init__(self, endpoint: str, max_sentences: int = DEFAULT_MAX_SENTENCES, timeout: float = 30.0):
        self.endpoint = endpoint
        self.max_sentences = max_sentences
        self.timeout = timeout

    async def summarize(self, article: NewsRecord) -> Summary:
        payload = {"url": article.url, "title": article.title, "body": article.body,
                   "max_sentences": self.max_sentences}
        try:
            async with httpx.AsyncClient(timeout=self.timeout) as client:
                response = await client.post(self.endpoint, json=payload)
                response.raise_for_status()
                sentences = response.json()["sentences"]
        except (httpx.HTTPError, ValueError, KeyError, TypeError) as e:
            raise BindingUnavailable(f"summarizer at {self.endpoint} unavailable: {e}") from e
        if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
            raise BindingUnavailable(f"summarizer at {self.endpoint} returned a malformed payload")
        total = max(len(split_sentences(article.body)), len(sentences), 1)
        return Summary(article.url, tuple(sentences), Decimal(len(sentences)) / Decimal(total))


def check_faithful(summary: Summary, article: NewsRecord) -> Summary:
    """Every sentence must appear verbatim in the body, in source order"""
    if not summary.sentences:
        raise SummaryInvariantError(f"empty summary for {article.url}")
    position = 0
    for sentence in summary.sentences:
        found = article.body.find(sentence, position)
        if not sentence.strip() or found < 0:
            raise SummaryInvariantError(f"sentence not found verbatim in source: {sentence[:60]!r}")
        position = found + len(sentence)
    if not Decimal(0) < summary.compression_ratio <= Decimal(1):
        raise SummaryInvariantError(f"compression ratio {summary.compression_ratio} outside (0, 1]")
    return summary


class EnforcedSummarizer:
    """Checks a binding's output and falls back when the binding is unavailable"""

    def __init__(self, binding: Summarizer, fallback: ExtractiveSummarizer):
        self.binding = binding
        self.fallback = fallback

    async def summarize(self, article: NewsRecord) -> Summary:
        try:
            summary = await self.binding.summarize(article)
        except BindingUnavailable as e:
            logger.warning("%s; using the extractive summarizer", e)
            return self.fallback.summarize_extractive(article)
        return check_faithful(summary, article)


async def summarizer_interface(article: NewsRecord, binding: Optional[Summarizer] = None,
                               fallback: Optional[ExtractiveSummarizer] = None) -> Summary:
    fallback = fallback or ExtractiveSummarizer()
    if binding is None:
        return fallback.summarize_extractive(article)
    return await EnforcedSummarizer(binding, fallback).summarize(article)


# Threads

@dataclass(frozen=True)
class ThreadPart:
    text: str
    index: int
    total: int

    @property
    def rendered(self) -> str:
        return self.text if self.total == 1 else f"{self.text} ({self.index}/{self.total})"


@dataclass(frozen=True)
class TweetThread:
    parts: tuple[ThreadPart, ...]

    def __post_init__(self):
        if not self.parts:
            raise ValueError("a thread needs at least one part")
        for i, part in enumerate(self.parts, start=1):
            if part.index != i or part.total != len(self.parts):
                raise ValueError("thread parts must be numbered 1..n")

    @classmethod
    def of(cls, texts: list[str]) -> "TweetThread":
        return cls(tuple(ThreadPart(t, i, len(texts)) for i, t in enumerate(texts, start=1)))

    def rendered(self) -> list[str]:
        return [p.rendered for p in self.parts]

    def __len__(self) -> int:
        return len(self.parts)


def _suffix_room(index: int, digits: int) -> int:
    # " (" + index + "/" + total + ")"
    return 4 + len(str(index)) + digits


def _pack(units: list[str], limit: int, digits: int) -> list[str]:
    parts: list[str] = []
    current = ""
    for unit in units:
        cap = limit - _suffix_room(len(parts) + 1, digits)
        if current and len(current) + 1 + len(unit) <= cap:
            current = f"{current} {unit}"
            continue
        if current:
            parts.append(current)
            cap = limit - _suffix_room(len(parts) + 1, digits)
        if len(unit) > cap:
            raise UnsplittableToken(f"token of {len(unit)} code points exceeds {cap}")
        current = unit
    if current:
        parts.append(current)
    return parts


def _units(text: str, limit: int, digits: int) -> list[str]:
    cap = limit - _suffix_room(10 ** digits - 1, digits)
    units = []
    for sentence in split_sentences(text):
        if len(sentence) <= cap:
            units.append(sentence)
        else:
            units.extend(sentence.split(" "))
    return units


def split_thread(text: str, limit: int = TWEET_LIMIT) -> TweetThread:
    """Split text into numbered parts at sentence boundaries, falling back to words"""
    normalized = " ".join(text.split())
    if not normalized:
        raise EmptyBody("nothing to split")
    if len(normalized) <= limit:
        return TweetThread.of([normalized])
    for digits in (1, 2, 3):
        parts = _pack(_units(normalized, limit, digits), limit, digits)
        if len(parts) < 10 ** digits:
            return TweetThread.of(parts)
    raise UnsplittableToken(f"text needs more than {10 ** 3 - 1} parts")
