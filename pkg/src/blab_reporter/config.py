"""Configuration loading.

Settings come from `config/blab.json` (or `--config` / `BLAB_CONFIG`), with
environment overrides read after `load_dotenv()`. Credentials are only ever
taken from the environment.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

from .errors import BlabError, ConfigError, LocatedError
from .ingestion import URGENT_MAGNITUDE, SourceConfig, load_source_configs
from .lexicalization import Grammar, lint_grammar, load_grammar
from .publisher import SchedulePolicy
from .realization import Blocklist, PolishConfig
from .reg import EntityRegistry, lint_entities, load_entities
from .rng import SEED_MASK
from .selection import REQUIRED_ATTRIBUTES
from .structuring import OrderingCatalog, lint_catalog, load_catalog

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path("config/blab.json")
TRUTHY = {"1", "true", "yes", "on"}

PATH_KEYS = ("grammar", "entities", "catalog", "blocklist", "sources", "stopwords", "abbreviations",
             "curious_facts", "store", "journal", "dry_run_journal")
STATE_PATHS = {"store": "store", "journal": "publish.journal", "dry_run_journal": "dry-run.journal"}


@dataclass
class Paths:
    grammar: Path
    entities: Path
    catalog: Path
    blocklist: Path
    sources: Path
    stopwords: Path
    abbreviations: Path
    curious_facts: Path
    store: Path
    journal: Path
    dry_run_journal: Path


@dataclass
class AppConfig:
    path: Path
    paths: Paths
    polish: PolishConfig
    schedule: SchedulePolicy
    place: str = "Santos"
    seed: Optional[int] = None
    dry_run: bool = False
    log_level: str = "INFO"
    max_sentences: int = 3
    remote_summarizer: Optional[str] = None
    tick_seconds: float = 60.0
    urgent_magnitude: Decimal = URGENT_MAGNITUDE
    twitter_token: Optional[str] = field(default=None, repr=False)


def _state_dir(paths: dict[str, Path], state_dir: Path) -> None:
    for key, name in STATE_PATHS.items():
        paths[key] = state_dir / name


def load_config(path: Optional[Union[str, Path]] = None, env: Optional[Mapping[str, str]] = None) -> AppConfig:
    env = os.environ if env is None else env
    path = Path(path or env.get("BLAB_CONFIG") or DEFAULT_CONFIG)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")

    base = path.parent
    raw_paths = data.get("paths", {})
    paths: dict[str, Path] = {}
    for key in PATH_KEYS:
        if key not in raw_paths:
            raise ConfigError(f"config {path} lacks paths.{key}")
        paths[key] = base / raw_paths[key]
    if env.get("BLAB_STATE_DIR"):
        _state_dir(paths, Path(env["BLAB_STATE_DIR"]))

    seed = data.get("seed")
    if seed is not None and (not isinstance(seed, int) or not 0 <= seed <= SEED_MASK):
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    summarization = data.get("summarization", {})
    try:
        urgent = Decimal(str(data.get("urgent_magnitude", URGENT_MAGNITUDE)))
        max_sentences = int(summarization.get("max_sentences", 3))
        tick_seconds = float(data.get("tick_seconds", 60))
    except (InvalidOperation, ValueError, TypeError) as e:
        raise ConfigError(f"bad numeric setting in {path}: {e}") from e
    if max_sentences < 1:
        raise ConfigError("summarization.max_sentences must be positive")

    return AppConfig(
        path=path,
        paths=Paths(**paths),
        polish=PolishConfig.from_dict(data.get("polish", {})),
        schedule=SchedulePolicy.from_dict(data.get("schedule", {})),
        place=str(data.get("place", "Santos")),
        seed=seed,
        dry_run=bool(data.get("dry_run", False)) or env.get("BLAB_DRY_RUN", "").lower() in TRUTHY,
        log_level=env.get("BLAB_LOG_LEVEL") or str(data.get("log_level", "INFO")),
        max_sentences=max_sentences,
        remote_summarizer=summarization.get("remote_endpoint") or None,
        tick_seconds=tick_seconds,
        urgent_magnitude=urgent,
        twitter_token=env.get("BLAB_TWITTER_TOKEN") or None,
    )


def read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e


def read_list(path: Path) -> list[str]:
    """One entry per line; blank lines and `#` comments are ignored"""
    return [line.split("#", 1)[0].strip() for line in read_text(path).splitlines()
            if line.split("#", 1)[0].strip()]


@dataclass
class Resources:
    grammar: Grammar
    entities: EntityRegistry
    catalog: OrderingCatalog
    blocklist: Blocklist
    stopwords: list[str]
    abbreviations: list[str]
    curious_facts: list[str]
    sources: list[SourceConfig]


def _load(loader: Callable, path: Path):
    try:
        return loader(read_text(path), source=str(path))
    except LocatedError as e:
        raise ConfigError(e.render()) from e
    except BlabError as e:
        raise ConfigError(f"{path}: {e}") from e


def load_resources(config: AppConfig, env: Optional[Mapping[str, str]] = None) -> Resources:
    """Load every artifact the pipeline needs; any failure is a ConfigError"""
    paths = config.paths
    sources = load_source_configs(paths.sources, env)
    resources = Resources(
        grammar=_load(load_grammar, paths.grammar),
        entities=_load(load_entities, paths.entities),
        catalog=_load(load_catalog, paths.catalog),
        blocklist=Blocklist(read_list(paths.blocklist)),
        stopwords=read_list(paths.stopwords),
        abbreviations=read_list(paths.abbreviations),
        curious_facts=read_list(paths.curious_facts),
        sources=sources,
    )
    logger.debug("Loaded resources from %s", config.path)
    return resources


def check_artifacts(paths: Paths) -> list[str]:
    """Diagnostics for the grammar, entity registry and ordering catalog, one per line"""
    diagnostics: list[str] = []
    texts = {}
    for name in ("grammar", "entities", "catalog"):
        path = getattr(paths, name)
        try:
            texts[name] = path.read_text(encoding="utf-8")
        except OSError as e:
            diagnostics.append(f"{path}: cannot read: {e}")
    if "grammar" in texts:
        loaded = lint_grammar(texts["grammar"], source=str(paths.grammar))
        diagnostics.extend(d.render() for d in loaded.diagnostics)
    if "entities" in texts:
        profiles, problems = lint_entities(texts["entities"], source=str(paths.entities))
        diagnostics.extend(d.render() for d in problems)
        if "grammar" in texts:
            known = {p.entity_id for p in profiles}
            diagnostics.extend(_entity_gaps(loaded.grammar, known, str(paths.grammar)))
    if "catalog" in texts:
        _, problems = lint_catalog(texts["catalog"], source=str(paths.catalog))
        diagnostics.extend(d.render() for d in problems)
    return diagnostics


def _entity_gaps(grammar: Grammar, known: set[str], source: str) -> list[str]:
    gaps = []
    for templates in grammar.templates.values():
        for template in templates:
            for token in template.tokens:
                if token.kind == "entity" and token.slot not in REQUIRED_ATTRIBUTES[template.predicate] \
                        and token.slot not in known:
                    gaps.append(f"{source}:{template.line}: unknown entity {token.slot}")
    return gaps
