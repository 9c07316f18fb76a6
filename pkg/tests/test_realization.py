#!/usr/bin/env python
"""Tests for surface polish and blocklist validation."""

import random
import unittest
from datetime import datetime, timezone
from decimal import Decimal

from tests.support import CONFIG_DIR, polish_config

from blab_reporter.errors import ConfigError, OverBudget
from blab_reporter.realization import (
    PASS,
    Blocklist,
    GreetingWindow,
    PolishConfig,
    cleanup,
    emoji_keys,
    fold,
    polish,
    validate,
    window_of,
)
from blab_reporter.selection import AttrValue, IntentMessage, Predicate

ACCENTS = {"a": "áàâã", "e": "éê", "i": "í", "o": "óôõ", "u": "ú", "c": "ç"}


def at(hour: int, minute: int = 0) -> datetime:
    return datetime(2022, 5, 22, hour, minute, tzinfo=timezone.utc)


def mutate(term: str, rng: random.Random) -> str:
    out = []
    for char in term:
        if char in ACCENTS and rng.random() < 0.3:
            char = rng.choice(ACCENTS[char])
        out.append(char.upper() if rng.random() < 0.5 else char)
    return "".join(out)


class TestWindows(unittest.TestCase):
    """Greeting windows in local time."""

    def test_boundaries(self):
        cases = [
            (at(7, 59), GreetingWindow.EVENING),
            (at(8, 0), GreetingWindow.MORNING),
            (at(14, 59), GreetingWindow.MORNING),
            (at(15, 0), GreetingWindow.AFTERNOON),
            (at(20, 59), GreetingWindow.AFTERNOON),
            (at(21, 0), GreetingWindow.EVENING),
        ]
        for moment, window in cases:
            with self.subTest(moment=moment.isoformat()):
                self.assertEqual(window_of(moment), window)


class TestCleanup(unittest.TestCase):
    """Whitespace, capitalization and closing punctuation."""

    def test_sentences_are_capitalized_and_closed(self):
        self.assertEqual(cleanup("  em  Santos faz sol.  o mar está calmo "), "Em Santos faz sol. O mar está calmo.")

    def test_accented_sentence_start(self):
        self.assertEqual(cleanup("á noite. ótimo"), "Á noite. Ótimo.")

    def test_trailing_url_is_not_closed(self):
        self.assertEqual(cleanup("leia em https://example.org/a"), "Leia em https://example.org/a")

    def test_existing_punctuation_is_kept(self):
        self.assertEqual(cleanup("Você sabia?"), "Você sabia?")
        self.assertEqual(cleanup(""), "")


class TestPolish(unittest.TestCase):
    """Greeting, emoji and budget."""

    def setUp(self):
        self.config = polish_config(single=True)
        self.rng = random.Random(0)

    def test_single_tweet(self):
        tweets = polish(["em Santos faz 25ºC"], GreetingWindow.MORNING, self.config, self.rng,
                        keys=[["CURIOUS_FACT"]])
        self.assertEqual(tweets, ["Bom dia! Em Santos faz 25ºC. 💡"])

    def test_greeting_only_on_the_first_segment(self):
        tweets = polish(["um", "dois"], GreetingWindow.EVENING, self.config, self.rng)
        self.assertEqual(tweets, ["Boa noite! Um.", "Dois."])

    def test_greeting_is_drawn_from_the_window(self):
        config = polish_config()
        greetings = {polish(["x"], GreetingWindow.MORNING, config, random.Random(seed))[0].rsplit(" ", 1)[0]
                     for seed in range(30)}
        self.assertEqual(greetings, {"Bom dia!", "Olá, bom dia!"})

    def test_emoji_is_dropped_when_it_does_not_fit(self):
        tweets = polish(["a" * 269 + "."], GreetingWindow.MORNING, self.config, self.rng, keys=[["CURIOUS_FACT"]])
        self.assertEqual(len(tweets[0]), 279)
        self.assertFalse(tweets[0].endswith("💡"))

    def test_emoji_can_be_disabled(self):
        config = PolishConfig(self.config.greetings, self.config.emoji_map, enable_emoji=False)
        self.assertEqual(polish(["x"], GreetingWindow.MORNING, config, self.rng, keys=[["CURIOUS_FACT"]]),
                         ["Bom dia! X."])

    def test_over_budget(self):
        with self.assertRaises(OverBudget):
            polish(["a" * 275 + "."], GreetingWindow.MORNING, self.config, self.rng)

    def test_thread_leaves_room_for_numbering(self):
        polish(["a" * 264 + ".", "b"], GreetingWindow.MORNING, self.config, self.rng)
        with self.assertRaises(OverBudget):
            polish(["a" * 265 + ".", "b"], GreetingWindow.MORNING, self.config, self.rng)

    def test_nothing_to_polish(self):
        with self.assertRaises(ValueError):
            polish([], GreetingWindow.MORNING, self.config, self.rng)


class TestPolishConfig(unittest.TestCase):
    """Config validation."""

    def test_every_window_needs_a_greeting(self):
        with self.assertRaises(ConfigError):
            PolishConfig({"morning": ["Bom dia!"], "afternoon": ["Boa tarde!"]})

    def test_emoji_length(self):
        with self.assertRaises(ConfigError):
            PolishConfig.from_dict({"greetings": {"morning": ["a"], "afternoon": ["b"], "evening": ["c"]},
                                    "emoji": {"CAUSE": "🌊🌊🌊🌊🌊"}})

    def test_longest_greeting(self):
        self.assertEqual(polish_config().longest_greeting(), len("Olá, boa noite!"))

    def test_emoji_keys_follow_the_dominant_message(self):
        fishing = IntentMessage(Predicate.FISHING_CONDITION, {
            "condition": AttrValue.text("good"), "event": AttrValue.text("sea level is high"),
            "height": AttrValue.number("1.8", "meters"), "days_since_last_peak": AttrValue.number(30),
        })
        cause = IntentMessage(Predicate.CAUSE, {"earthquake": AttrValue.boolean(False),
                                                "moon_calendar": AttrValue.boolean(True)},
                              salience=Decimal("0.4"))
        self.assertEqual(emoji_keys([cause, fishing]), ["FISHING_CONDITION:good", "FISHING_CONDITION"])
        self.assertEqual(emoji_keys([]), [])


class TestValidate(unittest.TestCase):
    """Blocklist matching."""

    def setUp(self):
        self.blocklist = Blocklist.parse((CONFIG_DIR / "blocklist.txt").read_text(encoding="utf-8"))

    def test_clean_text_passes(self):
        verdict = validate("Bom dia! Em Santos faz 25ºC e o tempo está limpo.", self.blocklist)
        self.assertIs(verdict, PASS)
        self.assertTrue(verdict.passed)

    def test_whole_words_only(self):
        self.assertTrue(validate("Os burros de carga.", self.blocklist).passed)
        self.assertFalse(validate("Que burro.", self.blocklist).passed)

    def test_earliest_match_wins(self):
        verdict = validate("Canalha e idiota.", self.blocklist)
        self.assertEqual((verdict.term, verdict.position), ("canalha", 0))

    def test_fold_keeps_original_positions(self):
        folded, index = fold("Ação")
        self.assertEqual(folded, "acao")
        self.assertEqual(index, [0, 1, 2, 3])

    def test_case_and_diacritic_mutations(self):
        rng = random.Random(280)
        base = "o mar está calmo em Santos hoje".split(" ")
        for _ in range(100):
            term = rng.choice(self.blocklist.terms)
            mutated = mutate(term, rng)
            k = rng.randrange(len(base) + 1)
            words = base[:k] + [mutated] + base[k:]
            text = " ".join(words)
            expected = len(" ".join(words[:k])) + (1 if k else 0)
            with self.subTest(text=text):
                verdict = validate(text, self.blocklist)
                self.assertEqual(verdict.term, term)
                self.assertEqual(verdict.position, expected)

    def test_comments_and_blank_lines_are_ignored(self):
        blocklist = Blocklist.parse("# header\n\nFOO  # trailing\n")
        self.assertEqual(blocklist.terms, ["foo"])
        self.assertEqual(len(blocklist), 1)


if __name__ == '__main__':
    unittest.main()
