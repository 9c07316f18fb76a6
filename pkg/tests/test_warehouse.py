#!/usr/bin/env python
"""Tests for the observation store."""

import json
import random
import tempfile
import unittest
from datetime import datetime, timedelta, timezone
from decimal import Decimal
from pathlib import Path

from tests.support import INGESTED, fixed_clock, observation

from blab_reporter.errors import InvalidRecord
from blab_reporter.warehouse import (
    SCHEMA_VERSION,
    EarthquakeRecord,
    FileStore,
    MemoryStore,
    ObservationKind,
    PutResult,
    TideRecord,
    WeatherRecord,
)

BASE = datetime(2022, 5, 1, 12, 0, tzinfo=timezone.utc)


def weather(hours: int, city: str = "Santos", temperature: str = "20") -> WeatherRecord:
    return WeatherRecord(city, BASE + timedelta(hours=hours), "clear", temperature)


class TestRecords(unittest.TestCase):
    """Field validation on the record types."""

    def test_decimal_comma_is_accepted(self):
        record = WeatherRecord("Santos", "2022-05-22T09:00:00-03:00", "clear", "25,0")
        self.assertEqual(record.temperature_celsius, Decimal("25.00"))
        self.assertEqual(record.observed_at, datetime(2022, 5, 22, 12, 0, tzinfo=timezone.utc))

    def test_temperature_out_of_range(self):
        with self.assertRaises(InvalidRecord):
            WeatherRecord("Santos", BASE, "clear", "75")

    def test_naive_timestamp_is_rejected(self):
        with self.assertRaises(InvalidRecord):
            TideRecord("Santos", "2022-05-22T09:00:00", "1.2")

    def test_coordinates_are_checked(self):
        with self.assertRaises(InvalidRecord):
            EarthquakeRecord("4.5", "-95", "-45", "10", BASE, "SISMO_USP")

    def test_empty_city_is_rejected(self):
        with self.assertRaises(InvalidRecord):
            WeatherRecord("  ", BASE, "clear", "20")

    def test_record_round_trips_through_dict(self):
        record = EarthquakeRecord("4.5", "-25.1", "-45.3", "10", BASE, "SISMO_USP")
        self.assertEqual(EarthquakeRecord.from_dict(record.to_dict()), record)


class TestMemoryStore(unittest.TestCase):
    """Insert, dedup and query behavior."""

    def setUp(self):
        self.store = MemoryStore(clock=fixed_clock())

    def test_put_dedups_on_key(self):
        self.assertEqual(self.store.put(observation(weather(0))), PutResult.INSERTED)
        again = observation(weather(0), ingested_at=INGESTED + timedelta(hours=1), source_id="other")
        self.assertEqual(self.store.put(again), PutResult.DUPLICATE)
        self.assertEqual(self.store.count(ObservationKind.WEATHER), 1)

    def test_put_rejects_future_ingestion(self):
        store = MemoryStore(clock=fixed_clock(INGESTED - timedelta(days=1)))
        with self.assertRaises(InvalidRecord):
            store.put(observation(weather(0)))

    def test_query_is_sorted(self):
        records = [weather(h) for h in range(10)]
        random.Random(7).shuffle(records)
        for record in records:
            self.store.put(observation(record))
        found = self.store.query(ObservationKind.WEATHER, BASE, BASE + timedelta(days=1))
        stamps = [obs.timestamp for obs in found]
        self.assertEqual(len(stamps), 10)
        self.assertEqual(stamps, sorted(stamps))

    def test_query_window_is_closed(self):
        for h in (0, 1, 2):
            self.store.put(observation(weather(h)))
        found = self.store.query(ObservationKind.WEATHER, BASE + timedelta(hours=1), BASE + timedelta(hours=2))
        self.assertEqual([obs.timestamp for obs in found], [BASE + timedelta(hours=1), BASE + timedelta(hours=2)])

    def test_query_filters_by_place(self):
        self.store.put(observation(weather(0, "Santos")))
        self.store.put(observation(weather(0, "Recife")))
        found = self.store.query(ObservationKind.WEATHER, BASE, BASE, "Recife")
        self.assertEqual([obs.place for obs in found], ["Recife"])

    def test_query_rejects_inverted_window(self):
        with self.assertRaises(ValueError):
            self.store.query(ObservationKind.WEATHER, BASE + timedelta(hours=1), BASE)

    def test_days_since_last_peak_uses_latest_earlier_peak(self):
        for days, peak in ((0, True), (10, True), (15, False), (40, True)):
            self.store.put(observation(TideRecord("Santos", BASE + timedelta(days=days), "1.5", peak)))
        as_of = BASE + timedelta(days=30, hours=6)
        self.assertEqual(self.store.days_since_last_tide_peak("Santos", as_of), 20)

    def test_days_since_last_peak_without_peaks(self):
        self.store.put(observation(TideRecord("Santos", BASE, "1.5", False)))
        self.assertIsNone(self.store.days_since_last_tide_peak("Santos", BASE + timedelta(days=1)))
        self.assertIsNone(self.store.days_since_last_tide_peak("Recife", BASE + timedelta(days=1)))

    def test_find_by_key_string(self):
        obs = observation(weather(0))
        self.store.put(obs)
        self.assertEqual(self.store.find(ObservationKind.WEATHER, obs.key_string()), obs)
        self.assertIsNone(self.store.find(ObservationKind.WEATHER, "nope"))


class TestFileStore(unittest.TestCase):
    """Append-only persistence."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.directory = Path(self.tmp.name) / "store"

    def tearDown(self):
        self.tmp.cleanup()

    def test_reopen_keeps_records_and_dedup(self):
        store = FileStore(self.directory, clock=fixed_clock())
        store.put(observation(weather(0)))
        store.put(observation(weather(1)))

        reopened = FileStore(self.directory, clock=fixed_clock())
        self.assertEqual(reopened.count(ObservationKind.WEATHER), 2)
        self.assertEqual(reopened.put(observation(weather(1))), PutResult.DUPLICATE)
        lines = reopened.path_for(ObservationKind.WEATHER).read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(lines), 2)

    def test_torn_last_line_is_skipped(self):
        store = FileStore(self.directory, clock=fixed_clock())
        store.put(observation(weather(0)))
        with open(store.path_for(ObservationKind.WEATHER), "a", encoding="utf-8") as f:
            f.write('{"kind": "weather", "payl')

        reopened = FileStore(self.directory, clock=fixed_clock())
        self.assertEqual(reopened.count(ObservationKind.WEATHER), 1)

    def test_append_after_torn_line_survives_reopen(self):
        store = FileStore(self.directory, clock=fixed_clock())
        store.put(observation(weather(0)))
        with open(store.path_for(ObservationKind.WEATHER), "a", encoding="utf-8") as f:
            f.write('{"kind": "weather", "payl')

        reopened = FileStore(self.directory, clock=fixed_clock())
        self.assertEqual(reopened.put(observation(weather(1))), PutResult.INSERTED)

        again = FileStore(self.directory, clock=fixed_clock())
        self.assertEqual(again.count(ObservationKind.WEATHER), 2)
        lines = again.path_for(ObservationKind.WEATHER).read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(lines), 2)

    def test_unknown_schema_version(self):
        self.directory.mkdir(parents=True)
        (self.directory / "manifest").write_text(json.dumps({"schema_version": SCHEMA_VERSION + 1}))
        with self.assertRaises(InvalidRecord):
            FileStore(self.directory)


if __name__ == '__main__':
    unittest.main()
