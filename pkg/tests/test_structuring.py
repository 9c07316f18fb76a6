#!/usr/bin/env python
"""Tests for discourse ordering and segment planning."""

import itertools
import unittest
from datetime import date
from decimal import Decimal

from tests.support import production_catalog, production_entities

from blab_reporter.errors import CatalogError, MessageTooLarge, NoApplicableOrdering
from blab_reporter.lexicalization import load_grammar
from blab_reporter.selection import AttrValue, IntentMessage, Predicate
from blab_reporter.structuring import (
    SEGMENT_OVERHEAD,
    TWEET_LIMIT,
    choose_entry,
    estimate_length,
    lint_catalog,
    load_catalog,
    order,
    plan,
)

DAY = date(2022, 5, 22)


def cause() -> IntentMessage:
    return IntentMessage(Predicate.CAUSE, {"earthquake": AttrValue.boolean(False),
                                           "moon_calendar": AttrValue.boolean(True)}, report_date=DAY)


def alert() -> IntentMessage:
    return IntentMessage(Predicate.WEATHER_ALERT, {"alert_kind": AttrValue.text("storm"),
                                                   "city": AttrValue.text("Santos")}, report_date=DAY)


def days_since(days: int = 12) -> IntentMessage:
    return IntentMessage(Predicate.DAYS_SINCE_LAST_PEAK, {"days": AttrValue.number(days)}, report_date=DAY)


def fact(text: str, salience: str = "0.3") -> IntentMessage:
    return IntentMessage(Predicate.CURIOUS_FACT, {"fact": AttrValue.text(text)}, salience=Decimal(salience),
                         report_date=DAY)


def vessels(count: int = 3) -> IntentMessage:
    return IntentMessage(Predicate.VESSEL_DIGEST, {"vessel_count": AttrValue.number(count),
                                                   "region": AttrValue.text("Santos")}, report_date=DAY)


FACT_GRAMMAR = """
template CURIOUS_FACT
    {fact}
template VESSEL_DIGEST
    {vessel_count} navios em {region}.
"""


class TestOrdering(unittest.TestCase):
    """Catalog selection and ordering."""

    def setUp(self):
        self.catalog = production_catalog()

    def test_alert_cause_days_in_every_permutation(self):
        messages = [cause(), alert(), days_since()]
        for permutation in itertools.permutations(messages):
            with self.subTest(order=[m.predicate.value for m in permutation]):
                ordered = order(list(permutation), self.catalog)
                self.assertEqual([m.predicate for m in ordered],
                                 [Predicate.WEATHER_ALERT, Predicate.CAUSE, Predicate.DAYS_SINCE_LAST_PEAK])

    def test_ties_go_to_the_first_entry(self):
        catalog = load_catalog("first: CAUSE > WEATHER_ALERT\nsecond: WEATHER_ALERT > CAUSE\n")
        self.assertEqual(choose_entry([alert(), cause()], catalog).tag, "first")

    def test_largest_overlap_wins(self):
        catalog = load_catalog("small: CAUSE\nlarge: WEATHER_ALERT > DAYS_SINCE_LAST_PEAK > CAUSE\n")
        self.assertEqual(choose_entry([cause(), alert(), days_since()], catalog).tag, "large")

    def test_uncovered_messages_follow_by_salience(self):
        catalog = load_catalog("alerts: WEATHER_ALERT\n")
        low, high = fact("baixo", "0.2"), fact("alto", "0.8")
        ordered = order([low, vessels(), alert(), high], catalog)
        self.assertEqual(ordered[0].predicate, Predicate.WEATHER_ALERT)
        self.assertEqual([m.attributes.get("fact") for m in ordered[1:]],
                         [AttrValue.text("alto"), None, AttrValue.text("baixo")])

    def test_equal_predicates_keep_their_relative_order(self):
        first, second = vessels(1), vessels(2)
        ordered = order([second, first], load_catalog("digest: VESSEL_DIGEST\n"))
        self.assertEqual(ordered, [second, first])

    def test_no_applicable_ordering(self):
        with self.assertRaises(NoApplicableOrdering):
            order([vessels()], load_catalog("alerts: WEATHER_ALERT\n"))

    def test_empty_input(self):
        self.assertEqual(order([], self.catalog), [])


class TestCatalogFile(unittest.TestCase):
    """Catalog linting."""

    def test_shipped_catalog_is_clean(self):
        from tests.support import GRAMMAR_DIR
        _, diagnostics = lint_catalog((GRAMMAR_DIR / "orderings.txt").read_text(encoding="utf-8"))
        self.assertEqual(diagnostics, [])

    def test_unknown_predicate(self):
        _, diagnostics = lint_catalog("ok: CAUSE\nbad: CAUSE > TSUNAMI\n", source="orderings.txt")
        self.assertEqual(len(diagnostics), 1)
        self.assertEqual(diagnostics[0].render(), "orderings.txt:2: unknown predicate 'TSUNAMI'")

    def test_duplicate_tag_and_repeated_predicate(self):
        _, diagnostics = lint_catalog("a: CAUSE\na: WEATHER_ALERT\nb: CAUSE > CAUSE\n")
        self.assertEqual([d.line for d in diagnostics], [2, 3])

    def test_empty_catalog(self):
        with self.assertRaises(CatalogError):
            load_catalog("# nothing here\n")

    def test_display_names_are_accepted(self):
        catalog = load_catalog("weather: WEATHER ALERT > CAUSE\n")
        self.assertEqual(catalog.entry("weather").predicates, (Predicate.WEATHER_ALERT, Predicate.CAUSE))


class TestPlanning(unittest.TestCase):
    """Length estimates and greedy segmentation."""

    def setUp(self):
        self.grammar = load_grammar(FACT_GRAMMAR, require_coverage=False)

    def test_estimate_of_the_reference_sentence(self):
        grammar = load_grammar("template CURRENT_WEATHER_AND_TEMPERATURE\n    Em {city} faz {temperature}.\n",
                               require_coverage=False)
        message = IntentMessage(Predicate.CURRENT_WEATHER_AND_TEMPERATURE, {
            "weather": AttrValue.text("clear"), "temperature": AttrValue.number(25, "ºC"),
            "city": AttrValue.text("Santos"), "timestamp": AttrValue.timestamp(DAY),
        })
        self.assertEqual(estimate_length(message, grammar), 19)

    def test_estimate_is_the_longest_template(self):
        grammar = load_grammar("template CURIOUS_FACT\n    {fact}\ntemplate CURIOUS_FACT\n    {fact}{fact}\n",
                               require_coverage=False)
        self.assertEqual(estimate_length(fact("x" * 35), grammar), 70)

    def test_estimate_expands_entities_to_their_longest_surface(self):
        grammar = load_grammar("template EARTHQUAKE_REPORT\n    «ENTITY:institute».\n", require_coverage=False)
        entities = production_entities()
        message = IntentMessage(Predicate.EARTHQUAKE_REPORT, {
            "magnitude": AttrValue.number("4.5"), "epicenter_desc": AttrValue.text("x"),
            "institute": AttrValue.entity("SISMO_USP"), "occurred_at": AttrValue.timestamp(DAY),
        })
        expected = len(entities.longest("SISMO_USP")) + 1
        self.assertEqual(estimate_length(message, grammar, entities), expected)

    def test_messages_pack_greedily(self):
        messages = [fact("a" * 100), fact("b" * 100), fact("c" * 100)]
        discourse = plan(messages, self.grammar)
        self.assertEqual([len(s.messages) for s in discourse.segments], [2, 1])
        self.assertEqual(discourse.segments[0].estimated_length, 201)
        self.assertEqual(discourse.messages(), messages)

    def test_every_segment_fits_the_budget(self):
        messages = [fact("x" * n) for n in (50, 120, 90, 200, 10, 60, 150)]
        discourse = plan(messages, self.grammar, first_segment_reserve=20)
        limit = TWEET_LIMIT - SEGMENT_OVERHEAD
        for i, segment in enumerate(discourse.segments):
            self.assertLessEqual(segment.estimated_length, limit - (20 if i == 0 else 0))

    def test_first_segment_reserve(self):
        messages = [fact("a" * 260)]
        self.assertEqual(len(plan(messages, self.grammar)), 1)
        with self.assertRaises(MessageTooLarge) as ctx:
            plan(messages, self.grammar, first_segment_reserve=10)
        self.assertEqual(ctx.exception.estimate, 260)
        self.assertEqual(ctx.exception.limit, TWEET_LIMIT - SEGMENT_OVERHEAD - 10)

    def test_oversized_message(self):
        with self.assertRaises(MessageTooLarge):
            plan([fact("z" * 300)], self.grammar)


if __name__ == '__main__':
    unittest.main()
