"""Source connectors: fetch public documents, parse them into observations,
feed the warehouse.

Adding a source takes a parser registration plus a config row; nothing in
the pipeline changes.
"""
import asyncio
import json
import logging
import os
import re
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Protocol, Union
from urllib.parse import urlparse

import httpx

from .clock import SimulatedClock, utcnow
from .errors import ConfigError, InvalidRecord, ParseError, SourceFetchError, UnknownParser
from .warehouse import (
    EarthquakeRecord, NewsRecord, Observation, ObservationKind, ObservationStore, PutResult, Record,
    TideRecord, VesselRecord, WeatherCondition, WeatherRecord,
)

logger = logging.getLogger(__name__)

URGENT_MAGNITUDE = Decimal("4.0")


@dataclass
class ParseResult:
    observations: list[Observation] = field(default_factory=list)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.observations)


RecordParser = Callable[[str], tuple[list[Record], int]]

PARSERS: dict[str, RecordParser] = {}


def register_parser(parser_id: str):
    """Register a parser under a string id"""
    def decorator(func: RecordParser) -> RecordParser:
        PARSERS[parser_id] = func
        return func
    return decorator


def _rows(text: str):
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


CONDITION_WORDS = {
    "clear": WeatherCondition.CLEAR,
    "céu limpo": WeatherCondition.CLEAR,
    "ensolarado": WeatherCondition.CLEAR,
    "partly cloudy": WeatherCondition.PARTLY_CLOUDY,
    "parcialmente nublado": WeatherCondition.PARTLY_CLOUDY,
    "cloudy": WeatherCondition.CLOUDY,
    "nublado": WeatherCondition.CLOUDY,
    "rain": WeatherCondition.RAIN,
    "chuva": WeatherCondition.RAIN,
    "storm": WeatherCondition.STORM,
    "tempestade": WeatherCondition.STORM,
}

TRUTHY = {"1", "true", "yes", "sim", "peak", "pico"}
FALSY = {"", "0", "false", "no", "não", "nao"}


@register_parser("weather-csv")
def parse_weather_rows(text: str) -> tuple[list[Record], int]:
    """`city;observed_at;condition;temperature[;wind_kmh]`"""
    records, skipped = [], 0
    for row in _rows(text):
        fields = [f.strip() for f in row.split(";")]
        try:
            if len(fields) not in (4, 5):
                raise InvalidRecord(f"expected 4 or 5 fields, got {len(fields)}")
            condition = CONDITION_WORDS.get(fields[2].lower())
            if condition is None:
                raise InvalidRecord(f"unknown condition {fields[2]!r}")
            wind = fields[4] if len(fields) == 5 and fields[4] else None
            records.append(WeatherRecord(fields[0], fields[1], condition, fields[3], wind))
        except InvalidRecord as e:
            logger.debug("Skipping weather row %r: %s", row, e)
            skipped += 1
    return records, skipped


@register_parser("tide-csv")
def parse_tide_rows(text: str) -> tuple[list[Record], int]:
    """`station;observed_at;height_m[;peak]`"""
    records, skipped = [], 0
    for row in _rows(text):
        fields = [f.strip() for f in row.split(";")]
        try:
            if len(fields) not in (3, 4):
                raise InvalidRecord(f"expected 3 or 4 fields, got {len(fields)}")
            flag = fields[3].lower() if len(fields) == 4 else ""
            if flag not in TRUTHY | FALSY:
                raise InvalidRecord(f"bad peak flag {fields[3]!r}")
            records.append(TideRecord(fields[0], fields[1], fields[2], flag in TRUTHY))
        except InvalidRecord as e:
            logger.debug("Skipping tide row %r: %s", row, e)
            skipped += 1
    return records, skipped


@register_parser("vessel-csv")
def parse_vessel_rows(text: str) -> tuple[list[Record], int]:
    """`vessel_id;vessel_type;lat;lon;observed_at`"""
    records, skipped = [], 0
    for row in _rows(text):
        fields = [f.strip() for f in row.split(";")]
        try:
            if len(fields) != 5:
                raise InvalidRecord(f"expected 5 fields, got {len(fields)}")
            records.append(VesselRecord(*fields))
        except InvalidRecord as e:
            logger.debug("Skipping vessel row %r: %s", row, e)
            skipped += 1
    return records, skipped


@register_parser("earthquake-json")
def parse_earthquake_document(text: str) -> tuple[list[Record], int]:
    """`{"events": [{"magnitude", "lat", "lon", "depth_km", "occurred_at", "institute"}]}`"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"earthquake document is not valid JSON: {e}") from e
    events = document.get("events") if isinstance(document, dict) else document
    if not isinstance(events, list):
        raise ParseError("earthquake document has no event list")
    records, skipped = [], 0
    for event in events:
        try:
            if not isinstance(event, dict):
                raise InvalidRecord("event is not an object")
            records.append(EarthquakeRecord(
                event["magnitude"], event["lat"], event["lon"], event["depth_km"],
                event["occurred_at"], event["institute"],
            ))
        except (InvalidRecord, KeyError) as e:
            logger.debug("Skipping earthquake event %r: %s", event, e)
            skipped += 1
    return records, skipped


NEWS_SEPARATOR = re.compile(r"^={3,}\s*$", re.MULTILINE)
NEWS_HEADERS = {"url": "url", "data": "published_at", "fonte": "source_name"}


@register_parser("news-text")
def parse_news_documents(text: str) -> tuple[list[Record], int]:
    """Articles separated by `===` lines: title line, `URL:`/`Data:`/`Fonte:` headers, blank line, body"""
    records, skipped = [], 0
    for chunk in NEWS_SEPARATOR.split(text):
        lines = chunk.strip().splitlines()
        if not lines:
            continue
        try:
            title, headers = lines[0].strip(), {}
            rest = iter(lines[1:])
            for line in rest:
                if not line.strip():
                    break
                name, sep, value = line.partition(":")
                key = NEWS_HEADERS.get(name.strip().lower())
                if not sep or key is None:
                    raise InvalidRecord(f"unexpected header line {line!r}")
                headers[key] = value.strip()
            body_lines = [line.strip() for line in rest]
            body = "\n".join(body_lines).strip()
            records.append(NewsRecord(headers.get("url", ""), title, body, headers.get("published_at", ""),
                                      headers.get("source_name", "")))
        except InvalidRecord as e:
            logger.debug("Skipping news article %r: %s", lines[0], e)
            skipped += 1
    return records, skipped


def parse_source(parser_id: str, raw: bytes, *, source_id: str = "adhoc",
                 ingested_at: Optional[datetime] = None) -> ParseResult:
    """Parse one fetched document into valid observations.

    Malformed entries are skipped and counted; an input with no recoverable
    record raises ParseError (reason "empty" for empty input).
    """
    parser = PARSERS.get(parser_id)
    if parser is None:
        raise UnknownParser(f"no parser registered as {parser_id!r}")
    if not raw or not raw.strip():
        raise ParseError("empty input", reason="empty")
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"input is not UTF-8: {e}") from e

    records, skipped = parser(text)
    if not records:
        raise ParseError(f"no valid record among {skipped} entries")
    ingested_at = ingested_at or utcnow()
    observations = [Observation.of(record, ingested_at, source_id) for record in records]
    return ParseResult(observations=observations, skipped=skipped)


@dataclass(frozen=True)
class SourceConfig:
    source_id: str
    kind: ObservationKind
    endpoint: str
    parser_id: str
    fetch_interval_minutes: int = 60
    enabled: bool = True

    def __post_init__(self):
        if not self.source_id or not re.fullmatch(r"[A-Za-z0-9_\-]+", self.source_id):
            raise ConfigError(f"invalid source_id {self.source_id!r}")
        try:
            object.__setattr__(self, "kind", ObservationKind(self.kind))
        except ValueError as e:
            raise ConfigError(f"{self.source_id}: unknown kind {self.kind!r}") from e
        if not isinstance(self.fetch_interval_minutes, int) or self.fetch_interval_minutes < 1:
            raise ConfigError(f"{self.source_id}: fetch_interval_minutes must be >= 1")
        if self.parser_id not in PARSERS:
            raise ConfigError(f"{self.source_id}: unknown parser {self.parser_id!r}")


def endpoint_env_var(source_id: str) -> str:
    return "BLAB_SOURCE_" + re.sub(r"[^A-Za-z0-9]", "_", source_id).upper() + "_ENDPOINT"


def _resolve_endpoint(endpoint: str, base: Path) -> str:
    if urlparse(endpoint).scheme or Path(endpoint).is_absolute():
        return endpoint
    return str(base / endpoint)


def load_source_configs(path: Union[str, Path], env: Optional[dict] = None) -> list[SourceConfig]:
    """Read the source config file; `BLAB_SOURCE_<ID>_ENDPOINT` overrides endpoints.

    Relative file endpoints resolve against the directory holding the file.
    """
    env = os.environ if env is None else env
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read source config {path}: {e}") from e
    rows = document.get("sources", []) if isinstance(document, dict) else document
    configs, seen = [], set()
    for row in rows:
        try:
            config = SourceConfig(
                source_id=row["source_id"],
                kind=row["kind"],
                endpoint=env.get(endpoint_env_var(row["source_id"]), _resolve_endpoint(row["endpoint"], path.parent)),
                parser_id=row["parser_id"],
                fetch_interval_minutes=row.get("fetch_interval_minutes", 60),
                enabled=row.get("enabled", True),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"{path}: incomplete source row {row!r}") from e
        if config.source_id in seen:
            raise ConfigError(f"{path}: duplicate source_id {config.source_id!r}")
        seen.add(config.source_id)
        configs.append(config)
    return configs


class FetchStatus(str, Enum):
    OK = "Ok"
    NETWORK_ERROR = "NetworkError"
    PARSE_ERROR = "ParseError"
    EMPTY = "Empty"


@dataclass(frozen=True)
class FetchOutcome:
    source_id: str
    fetched_at: datetime
    status: FetchStatus
    inserted: int = 0
    duplicates: int = 0
    error_detail: Optional[str] = None
    skipped: int = 0
    new_records: tuple[Observation, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.status != FetchStatus.OK and self.inserted + self.duplicates:
            raise ValueError("only Ok outcomes carry insert counts")


class Fetcher(Protocol):
    """Transport abstraction: bytes for a URL or SourceFetchError"""

    async def fetch(self, url: str) -> bytes:
        ...


class HttpFetcher:
    """httpx-backed transport with a pooled async client"""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout
        self._client: Optional[httpx.AsyncClient] = None

    @asynccontextmanager
    async def client(self):
        if self._client is None:
            limits = httpx.Limits(max_keepalive_connections=5, max_connections=10)
            timeout = httpx.Timeout(connect=5.0, read=self.timeout, write=self.timeout, pool=self.timeout)
            self._client = httpx.AsyncClient(limits=limits, timeout=timeout, follow_redirects=True)
        try:
            yield self._client
        except (httpx.ConnectError, httpx.ReadError, httpx.WriteError, httpx.PoolTimeout):
            # Reset the pool after a broken connection
            await self.aclose()
            raise

    async def fetch(self, url: str) -> bytes:
        try:
            async with self.client() as client:
                response = await client.get(url)
                response.raise_for_status()
                return response.content
        except httpx.HTTPStatusError as e:
            raise SourceFetchError(f"HTTP {e.response.status_code} from {url}") from e
        except httpx.HTTPError as e:
            raise SourceFetchError(f"{type(e).__name__} fetching {url}: {e}") from e

    async def aclose(self) -> None:
        if self._client is not None:
            await self._client.aclose()
            self._client = None


class FileFetcher:
    """Reads `file://` URLs and bare paths"""

    async def fetch(self, url: str) -> bytes:
        parsed = urlparse(url)
        path = Path(parsed.path if parsed.scheme == "file" else url)
        try:
            return path.read_bytes()
        except OSError as e:
            raise SourceFetchError(f"cannot read {path}: {e}") from e


class ScriptedFetcher:
    """Serves `sim://<source_id>` from the simulated clock's current tick"""

    def __init__(self, clock: SimulatedClock):
        self.clock = clock

    async def fetch(self, url: str) -> bytes:
        parsed = urlparse(url)
        if parsed.scheme != "sim":
            raise SourceFetchError(f"simulation cannot fetch {url}")
        tick = self.clock.current
        path = tick.feeds.get(parsed.netloc) if tick is not None else None
        if path is None:
            return b""
        try:
            return Path(path).read_bytes()
        except OSError as e:
            raise SourceFetchError(f"cannot read fixture {path}: {e}") from e


class SchemeFetcher:
    """Routes by URL scheme: file paths locally, everything else over HTTP"""

    def __init__(self, http: Optional[HttpFetcher] = None):
        self.http = http or HttpFetcher()
        self.files = FileFetcher()

    async def fetch(self, url: str) -> bytes:
        scheme = urlparse(url).scheme
        if scheme in ("http", "https"):
            return await self.http.fetch(url)
        return await self.files.fetch(url)

    async def aclose(self) -> None:
        await self.http.aclose()


async def _fetch(config: SourceConfig, fetcher: Fetcher) -> Union[bytes, Exception]:
    try:
        return await fetcher.fetch(config.endpoint)
    except Exception as e:  # any transport failure stays with its source
        return e


def _ingest(config: SourceConfig, body: Union[bytes, Exception], store: ObservationStore,
            fetched_at: datetime) -> FetchOutcome:
    if isinstance(body, Exception):
        logger.warning("Source %s failed to fetch: %s", config.source_id, body)
        return FetchOutcome(config.source_id, fetched_at, FetchStatus.NETWORK_ERROR,
                            error_detail=f"{type(body).__name__}: {body}")
    if not body or not body.strip():
        return FetchOutcome(config.source_id, fetched_at, FetchStatus.EMPTY)
    try:
        parsed = parse_source(config.parser_id, body, source_id=config.source_id, ingested_at=fetched_at)
    except ParseError as e:
        logger.warning("Source %s returned unparseable content: %s", config.source_id, e)
        return FetchOutcome(config.source_id, fetched_at, FetchStatus.PARSE_ERROR, error_detail=str(e))

    try:
        for obs in parsed.observations:
            store.check(obs)
    except InvalidRecord as e:
        logger.warning("Source %s produced a record the store refuses: %s", config.source_id, e)
        return FetchOutcome(config.source_id, fetched_at, FetchStatus.PARSE_ERROR, error_detail=str(e))

    inserted, duplicates, fresh = 0, 0, []
    for obs in parsed.observations:
        if obs.kind != config.kind:
            logger.warning("Source %s produced a %s record; expected %s", config.source_id, obs.kind.value,
                           config.kind.value)
        try:
            result = store.put(obs)
        except Exception as e:
            # records already written stay written; new_records keeps them visible to urgent detection
            logger.error("Source %s failed while storing after %d inserted: %s", config.source_id, inserted, e)
            return FetchOutcome(config.source_id, fetched_at, FetchStatus.PARSE_ERROR,
                                error_detail=f"{type(e).__name__}: {e} (after {inserted} inserted)",
                                new_records=tuple(fresh))
        if result == PutResult.INSERTED:
            inserted += 1
            fresh.append(obs)
        else:
            duplicates += 1
    logger.info("Source %s: %d inserted, %d duplicates, %d skipped", config.source_id, inserted, duplicates,
                parsed.skipped)
    return FetchOutcome(config.source_id, fetched_at, FetchStatus.OK, inserted, duplicates,
                        skipped=parsed.skipped, new_records=tuple(fresh))


async def run_cycle(configs: list[SourceConfig], fetcher: Fetcher, store: ObservationStore,
                    clock: Callable[[], datetime] = utcnow) -> list[FetchOutcome]:
    """Fetch every enabled source concurrently, then store in config order.

    A failing source becomes a failed outcome and never stops the others.
    """
    enabled = [config for config in configs if config.enabled]
    fetched_at = clock()
    bodies = await asyncio.gather(*(_fetch(config, fetcher) for config in enabled))
    outcomes = []
    for config, body in zip(enabled, bodies):
        try:
            outcomes.append(_ingest(config, body, store, fetched_at))
        except Exception as e:
            logger.error("Source %s failed while storing: %s", config.source_id, e)
            outcomes.append(FetchOutcome(config.source_id, fetched_at, FetchStatus.PARSE_ERROR,
                                         error_detail=f"{type(e).__name__}: {e}"))
    return outcomes


def detect_urgent(new_records: list[Observation], threshold: Decimal = URGENT_MAGNITUDE) -> list[Observation]:
    """Observations that bypass scheduling: earthquakes at or above the threshold"""
    return [
        obs for obs in new_records
        if obs.kind == ObservationKind.EARTHQUAKE and obs.payload.magnitude >= threshold
    ]


def new_records(outcomes: list[FetchOutcome]) -> list[Observation]:
    return [obs for outcome in outcomes for obs in outcome.new_records]
