#!/usr/bin/env python
"""Tests for news summaries and thread splitting."""

import itertools
import random
import unittest
from decimal import Decimal
from unittest.mock import patch

import httpx

from tests.support import INGESTED

from blab_reporter.errors import BindingUnavailable, EmptyBody, SummaryInvariantError, UnsplittableToken
from blab_reporter.summarization import (
    TWEET_LIMIT,
    EnforcedSummarizer,
    ExtractiveSummarizer,
    RemoteSummarizer,
    Summary,
    check_faithful,
    split_sentences,
    split_thread,
    summarizer_interface,
)
from blab_reporter.warehouse import NewsRecord

VOCABULARY = ["mar", "onda", "costa", "navio", "porto", "sal", "areia", "vento", "peixe", "barco", "maré"]
BODY = ("A Marinha monitora a costa. A Marinha amplia o monitoramento da costa azul. "
        "Chove. O porto abriu.")


def article(body: str = BODY) -> NewsRecord:
    return NewsRecord("https://example.org/n", "Título", body, INGESTED, "Agência Mar")


def sentence(rng: random.Random, target: int) -> str:
    words = [rng.choice(VOCABULARY).capitalize()]
    while len(" ".join(words)) < target:
        words.append(rng.choice(VOCABULARY))
    return " ".join(words) + "."


def fewest_parts(sentences: list[str]) -> int:
    """Exhaustive minimum over every way of cutting the sentence list"""
    text = " ".join(sentences)
    if len(text) <= TWEET_LIMIT:
        return 1
    cap = TWEET_LIMIT - len(" (1/9)")
    best = len(sentences)
    for cuts in itertools.product((False, True), repeat=len(sentences) - 1):
        groups, current = [], [sentences[0]]
        for cut, s in zip(cuts, sentences[1:]):
            if cut:
                groups.append(current)
                current = [s]
            else:
                current.append(s)
        groups.append(current)
        if all(len(" ".join(g)) <= cap for g in groups):
            best = min(best, len(groups))
    return best


class StaticSummarizer:
    def __init__(self, result):
        self.result = result

    async def summarize(self, article):
        if isinstance(self.result, Exception):
            raise self.result
        return self.result


class TestSentences(unittest.TestCase):
    """Sentence boundaries."""

    def test_abbreviations_do_not_end_sentences(self):
        self.assertEqual(split_sentences("O Dr. Silva chegou à Av. Atlântica. Ele falou!"),
                         ["O Dr. Silva chegou à Av. Atlântica.", "Ele falou!"])

    def test_sentences_are_verbatim(self):
        text = 'Ele disse "Vamos." Depois saiu... E voltou'
        sentences = split_sentences(text)
        self.assertEqual(sentences, ['Ele disse "Vamos."', "Depois saiu...", "E voltou"])
        for s in sentences:
            self.assertIn(s, text)

    def test_lowercase_after_period_continues(self):
        self.assertEqual(split_sentences("Mediu 2.5 metros. ok sem ponto"), ["Mediu 2.5 metros. ok sem ponto"])


class TestExtractive(unittest.TestCase):
    """Term-frequency extraction."""

    def setUp(self):
        self.summarizer = ExtractiveSummarizer(stopwords=["a", "o", "da"], max_sentences=2)

    def test_top_sentences_in_source_order(self):
        summary = self.summarizer.summarize_extractive(article())
        self.assertEqual(summary.sentences, ("A Marinha monitora a costa.",
                                             "A Marinha amplia o monitoramento da costa azul."))
        self.assertEqual(summary.compression_ratio, Decimal("0.5"))
        self.assertEqual(check_faithful(summary, article()), summary)

    def test_short_article_is_kept_whole(self):
        summary = self.summarizer.summarize_extractive(article("Uma frase só."))
        self.assertEqual(summary.sentences, ("Uma frase só.",))
        self.assertEqual(summary.compression_ratio, Decimal(1))

    def test_max_sentences_must_be_positive(self):
        with self.assertRaises(ValueError):
            ExtractiveSummarizer(max_sentences=0)
        for bad in (0, -1):
            with self.subTest(max_sentences=bad), self.assertRaises(ValueError):
                self.summarizer.summarize_extractive(article(), max_sentences=bad)
        self.assertEqual(len(self.summarizer.summarize_extractive(article(), max_sentences=1).sentences), 1)


class TestFaithful(unittest.TestCase):
    """Verbatim and ordering checks."""

    def test_sentence_missing_from_source(self):
        summary = Summary("u", ("A Marinha monitora o oceano.",), Decimal("0.25"))
        with self.assertRaises(SummaryInvariantError):
            check_faithful(summary, article())

    def test_sentences_out_of_order(self):
        summary = Summary("u", ("O porto abriu.", "Chove."), Decimal("0.5"))
        with self.assertRaises(SummaryInvariantError):
            check_faithful(summary, article())

    def test_empty_summary(self):
        with self.assertRaises(SummaryInvariantError):
            check_faithful(Summary("u", (), Decimal("0.5")), article())


class TestBindings(unittest.IsolatedAsyncioTestCase):
    """Binding enforcement and fallback."""

    async def test_unavailable_binding_falls_back(self):
        fallback = ExtractiveSummarizer(max_sentences=1)
        summary = await EnforcedSummarizer(StaticSummarizer(BindingUnavailable("down")), fallback).summarize(article())
        self.assertEqual(len(summary.sentences), 1)

    async def test_unfaithful_binding_is_rejected(self):
        bad = Summary("u", ("Uma frase inventada.",), Decimal("0.25"))
        with self.assertRaises(SummaryInvariantError):
            await summarizer_interface(article(), binding=StaticSummarizer(bad))

    async def test_default_is_extractive(self):
        summary = await summarizer_interface(article())
        self.assertEqual(len(summary.sentences), 3)

    async def test_remote_binding(self):
        def handler(request: httpx.Request) -> httpx.Response:
            if request.url.path == "/down":
                return httpx.Response(503)
            return httpx.Response(200, json={"sentences": ["Chove."]})

        real_client = httpx.AsyncClient
        factory = lambda **kwargs: real_client(transport=httpx.MockTransport(handler), **kwargs)  # noqa: E731
        with patch("blab_reporter.summarization.httpx.AsyncClient", factory):
            summary = await RemoteSummarizer("https://summaries.example.org/api").summarize(article())
            self.assertEqual(summary.sentences, ("Chove.",))
            self.assertEqual(summary.compression_ratio, Decimal("0.25"))
            with self.assertRaises(BindingUnavailable):
                await RemoteSummarizer("https://summaries.example.org/down").summarize(article())


class TestSplitThread(unittest.TestCase):
    """Numbered threads."""

    def test_short_text_is_a_single_unnumbered_part(self):
        thread = split_thread("  Uma   frase curta. ")
        self.assertEqual(thread.rendered(), ["Uma frase curta."])

    def test_minimum_number_of_parts(self):
        rng = random.Random(12)
        for trial in range(60):
            sentences = [sentence(rng, rng.randint(20, 120)) for _ in range(rng.randint(1, 12))]
            with self.subTest(trial=trial):
                thread = split_thread(" ".join(sentences))
                self.assertEqual(len(thread), fewest_parts(sentences))

    def test_parts_reconstruct_the_text(self):
        rng = random.Random(99)
        for trial in range(100):
            pieces = [sentence(rng, rng.randint(5, 400)) for _ in range(rng.randint(1, 30))]
            text = " ".join(pieces)
            with self.subTest(trial=trial):
                thread = split_thread(text)
                self.assertEqual(" ".join(p.text for p in thread.parts), text)
                for i, rendered in enumerate(thread.rendered(), start=1):
                    self.assertLessEqual(len(rendered), TWEET_LIMIT)
                    if len(thread) > 1:
                        self.assertTrue(rendered.endswith(f" ({i}/{len(thread)})"))

    def test_unsplittable_token(self):
        with self.assertRaises(UnsplittableToken):
            split_thread("Palavra " + "x" * 300)

    def test_empty_text(self):
        with self.assertRaises(EmptyBody):
            split_thread(" \n ")


if __name__ == '__main__':
    unittest.main()
