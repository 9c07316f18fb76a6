"""Shared fixtures for the test suite."""
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from blab_reporter.config import load_config, load_resources  # noqa: E402
from blab_reporter.ingestion import parse_source  # noqa: E402
from blab_reporter.lexicalization import load_grammar  # noqa: E402
from blab_reporter.realization import PolishConfig  # noqa: E402
from blab_reporter.reg import load_entities  # noqa: E402
from blab_reporter.structuring import load_catalog  # noqa: E402
from blab_reporter.warehouse import MemoryStore, Observation, TideRecord, WeatherRecord  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
GRAMMAR_DIR = ROOT / "grammar"
CONFIG_DIR = ROOT / "config"
CORPUS_DIR = ROOT / "corpus"
GOLDEN_DIR = CORPUS_DIR / "golden"

INGESTED = datetime(2022, 5, 23, 12, 0, tzinfo=timezone.utc)
LATER = datetime(2030, 1, 1, tzinfo=timezone.utc)


def fixed_clock(moment: datetime = LATER):
    return lambda: moment


def observation(record, ingested_at: datetime = INGESTED, source_id: str = "test") -> Observation:
    return Observation.of(record, ingested_at, source_id)


def production_grammar():
    return load_grammar((GRAMMAR_DIR / "blab.grammar").read_text(encoding="utf-8"), source="blab.grammar")


def golden_grammar():
    return load_grammar((GOLDEN_DIR / "golden.grammar").read_text(encoding="utf-8"), source="golden.grammar")


def production_entities():
    return load_entities((GRAMMAR_DIR / "entities.reg").read_text(encoding="utf-8"))


def production_catalog():
    return load_catalog((GRAMMAR_DIR / "orderings.txt").read_text(encoding="utf-8"))


def polish_config(single: bool = False) -> PolishConfig:
    if single:
        greetings = {"morning": ["Bom dia!"], "afternoon": ["Boa tarde!"], "evening": ["Boa noite!"]}
    else:
        greetings = {"morning": ["Bom dia!", "Olá, bom dia!"], "afternoon": ["Boa tarde!"],
                     "evening": ["Boa noite!", "Olá, boa noite!"]}
    return PolishConfig(greetings, {"FISHING_CONDITION:good": "🎣", "EARTHQUAKE_REPORT": "🌎",
                                    "CURIOUS_FACT": "💡"})


def santos_store() -> MemoryStore:
    """Weather and tide records behind the reference Santos report of 2022-05-22"""
    store = MemoryStore(clock=fixed_clock())
    store.put(observation(WeatherRecord("Santos", "2022-05-22T04:30:00-03:00", "partly cloudy", "25,0", "14")))
    store.put(observation(TideRecord("Santos", "2022-04-22T12:00:00-03:00", "2,1", True)))
    store.put(observation(TideRecord("Santos", "2022-05-22T04:00:00-03:00", "1,8")))
    return store


def load_feed(store, parser_id: str, path: Path, source_id: str = "fixture") -> None:
    for obs in parse_source(parser_id, path.read_bytes(), source_id=source_id, ingested_at=INGESTED).observations:
        store.put(obs)


def golden_config(state_dir: Path):
    return load_config(GOLDEN_DIR / "blab.json", env={"BLAB_STATE_DIR": str(state_dir)})


def golden_resources(state_dir: Path):
    config = golden_config(state_dir)
    return config, load_resources(config, env={})
