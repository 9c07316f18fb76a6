"""Typed observation storage with deduplication and time/type/place queries.

The default backend keeps one append-only, line-delimited JSON file per
observation kind plus a `manifest` holding the schema version. The key index
lives in memory and is rebuilt when the store is opened.
"""
import json
import logging
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Union

from .clock import to_utc, utcnow
from .errors import InvalidRecord

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CENTS = Decimal("0.01")


class ObservationKind(str, Enum):
    WEATHER = "weather"
    TIDE = "tide"
    VESSEL = "vessel"
    EARTHQUAKE = "earthquake"
    NEWS = "news"


class PutResult(str, Enum):
    INSERTED = "inserted"
    DUPLICATE = "duplicate"


class WeatherCondition(str, Enum):
    CLEAR = "clear"
    PARTLY_CLOUDY = "partly cloudy"
    CLOUDY = "cloudy"
    RAIN = "rain"
    STORM = "storm"


def fixed(value: Any, field_name: str) -> Decimal:
    """Fixed-point decimal with two fractional digits"""
    try:
        number = value if isinstance(value, Decimal) else Decimal(str(value).strip().replace(",", "."))
        if not number.is_finite():
            raise InvalidOperation
        return number.quantize(CENTS, rounding=ROUND_HALF_EVEN)
    except (InvalidOperation, ValueError) as e:
        raise InvalidRecord(f"{field_name}: not a number: {value!r}") from e


def utc_field(value: Any, field_name: str) -> datetime:
    try:
        if isinstance(value, str):
            value = datetime.fromisoformat(value)
        if not isinstance(value, datetime):
            raise ValueError(f"expected a timestamp, got {value!r}")
        return to_utc(value)
    except ValueError as e:
        raise InvalidRecord(f"{field_name}: {e}") from e


def _check_range(value: Decimal, low: int, high: int, field_name: str) -> None:
    if not low <= value <= high:
        raise InvalidRecord(f"{field_name} {value} outside [{low}, {high}]")


def _check_coordinates(lat: Decimal, lon: Decimal) -> None:
    _check_range(lat, -90, 90, "lat")
    _check_range(lon, -180, 180, "lon")


def _require_text(value: Any, field_name: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise InvalidRecord(f"{field_name} must be non-empty text")
    return value.strip()


def _set(obj: object, name: str, value: Any) -> None:
    object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class WeatherRecord:
    city: str
    observed_at: datetime
    condition: WeatherCondition
    temperature_celsius: Decimal
    wind_speed_kmh: Optional[Decimal] = None

    def __post_init__(self):
        _set(self, "city", _require_text(self.city, "city"))
        _set(self, "observed_at", utc_field(self.observed_at, "observed_at"))
        try:
            _set(self, "condition", WeatherCondition(self.condition))
        except ValueError as e:
            raise InvalidRecord(f"unknown weather condition {self.condition!r}") from e
        _set(self, "temperature_celsius", fixed(self.temperature_celsius, "temperature_celsius"))
        _check_range(self.temperature_celsius, -20, 60, "temperature_celsius")
        if self.wind_speed_kmh is not None:
            _set(self, "wind_speed_kmh", fixed(self.wind_speed_kmh, "wind_speed_kmh"))
            if self.wind_speed_kmh < 0:
                raise InvalidRecord("wind_speed_kmh must be >= 0")

    @property
    def timestamp(self) -> datetime:
        return self.observed_at

    @property
    def place(self) -> Optional[str]:
        return self.city

    def dedup_key(self) -> tuple[str, ...]:
        return (self.city, self.observed_at.isoformat())

    def to_dict(self) -> dict:
        return {
            "city": self.city,
            "observed_at": self.observed_at.isoformat(),
            "condition": self.condition.value,
            "temperature_celsius": str(self.temperature_celsius),
            "wind_speed_kmh": None if self.wind_speed_kmh is None else str(self.wind_speed_kmh),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeatherRecord":
        return cls(data["city"], data["observed_at"], data["condition"], data["temperature_celsius"],
                   data.get("wind_speed_kmh"))


@dataclass(frozen=True)
class TideRecord:
    station: str
    observed_at: datetime
    height_meters: Decimal
    is_peak: bool = False

    def __post_init__(self):
        _set(self, "station", _require_text(self.station, "station"))
        _set(self, "observed_at", utc_field(self.observed_at, "observed_at"))
        _set(self, "height_meters", fixed(self.height_meters, "height_meters"))
        _check_range(self.height_meters, -5, 15, "height_meters")
        if not isinstance(self.is_peak, bool):
            raise InvalidRecord("is_peak must be a boolean")

    @property
    def timestamp(self) -> datetime:
        return self.observed_at

    @property
    def place(self) -> Optional[str]:
        return self.station

    def dedup_key(self) -> tuple[str, ...]:
        return (self.station, self.observed_at.isoformat())

    def to_dict(self) -> dict:
        return {
            "station": self.station,
            "observed_at": self.observed_at.isoformat(),
            "height_meters": str(self.height_meters),
            "is_peak": self.is_peak,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TideRecord":
        return cls(data["station"], data["observed_at"], data["height_meters"], data["is_peak"])


@dataclass(frozen=True)
class EarthquakeRecord:
    magnitude: Decimal
    lat: Decimal
    lon: Decimal
    depth_km: Decimal
    occurred_at: datetime
    institute: str

    def __post_init__(self):
        _set(self, "magnitude", fixed(self.magnitude, "magnitude"))
        _check_range(self.magnitude, 0, 10, "magnitude")
        _set(self, "lat", fixed(self.lat, "lat"))
        _set(self, "lon", fixed(self.lon, "lon"))
        _check_coordinates(self.lat, self.lon)
        _set(self, "depth_km", fixed(self.depth_km, "depth_km"))
        if self.depth_km < 0:
            raise InvalidRecord("depth_km must be >= 0")
        _set(self, "occurred_at", utc_field(self.occurred_at, "occurred_at"))
        _set(self, "institute", _require_text(self.institute, "institute"))

    @property
    def timestamp(self) -> datetime:
        return self.occurred_at

    @property
    def place(self) -> Optional[str]:
        return None

    def dedup_key(self) -> tuple[str, ...]:
        return (self.institute, self.occurred_at.isoformat(), str(self.lat), str(self.lon))

    def to_dict(self) -> dict:
        return {
            "magnitude": str(self.magnitude),
            "lat": str(self.lat),
            "lon": str(self.lon),
            "depth_km": str(self.depth_km),
            "occurred_at": self.occurred_at.isoformat(),
            "institute": self.institute,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EarthquakeRecord":
        return cls(data["magnitude"], data["lat"], data["lon"], data["depth_km"], data["occurred_at"],
                   data["institute"])


@dataclass(frozen=True)
class VesselRecord:
    vessel_id: str
    vessel_type: str
    lat: Decimal
    lon: Decimal
    observed_at: datetime

    def __post_init__(self):
        _set(self, "vessel_id", _require_text(self.vessel_id, "vessel_id"))
        _set(self, "vessel_type", _require_text(self.vessel_type, "vessel_type"))
        _set(self, "lat", fixed(self.lat, "lat"))
        _set(self, "lon", fixed(self.lon, "lon"))
        _check_coordinates(self.lat, self.lon)
        _set(self, "observed_at", utc_field(self.observed_at, "observed_at"))

    @property
    def timestamp(self) -> datetime:
        return self.observed_at

    @property
    def place(self) -> Optional[str]:
        return None

    def dedup_key(self) -> tuple[str, ...]:
        return (self.vessel_id, self.observed_at.isoformat())

    def to_dict(self) -> dict:
        return {
            "vessel_id": self.vessel_id,
            "vessel_type": self.vessel_type,
            "lat": str(self.lat),
            "lon": str(self.lon),
            "observed_at": self.observed_at.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VesselRecord":
        return cls(data["vessel_id"], data["vessel_type"], data["lat"], data["lon"], data["observed_at"])


@dataclass(frozen=True)
class NewsRecord:
    url: str
    title: str
    body: str
    published_at: datetime
    source_name: str

    def __post_init__(self):
        _set(self, "url", _require_text(self.url, "url"))
        _set(self, "title", _require_text(self.title, "title"))
        _set(self, "body", _require_text(self.body, "body"))
        _set(self, "published_at", utc_field(self.published_at, "published_at"))
        _set(self, "source_name", _require_text(self.source_name, "source_name"))

    @property
    def timestamp(self) -> datetime:
        return self.published_at

    @property
    def place(self) -> Optional[str]:
        return None

    def dedup_key(self) -> tuple[str, ...]:
        return (self.url,)

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "title": self.title,
            "body": self.body,
            "published_at": self.published_at.isoformat(),
            "source_name": self.source_name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NewsRecord":
        return cls(data["url"], data["title"], data["body"], data["published_at"], data["source_name"])


Record = Union[WeatherRecord, TideRecord, EarthquakeRecord, VesselRecord, NewsRecord]

RECORD_TYPES: dict[ObservationKind, type] = {
    ObservationKind.WEATHER: WeatherRecord,
    ObservationKind.TIDE: TideRecord,
    ObservationKind.VESSEL: VesselRecord,
    ObservationKind.EARTHQUAKE: EarthquakeRecord,
    ObservationKind.NEWS: NewsRecord,
}


@dataclass(frozen=True)
class Observation:
    kind: ObservationKind
    payload: Record
    ingested_at: datetime
    source_id: str

    def __post_init__(self):
        try:
            _set(self, "kind", ObservationKind(self.kind))
        except ValueError as e:
            raise InvalidRecord(f"unknown observation kind {self.kind!r}") from e
        if not isinstance(self.payload, RECORD_TYPES[self.kind]):
            raise InvalidRecord(f"payload {type(self.payload).__name__} does not match kind {self.kind.value}")
        _set(self, "ingested_at", utc_field(self.ingested_at, "ingested_at"))
        _set(self, "source_id", _require_text(self.source_id, "source_id"))

    @classmethod
    def of(cls, payload: Record, ingested_at: datetime, source_id: str) -> "Observation":
        for kind, record_type in RECORD_TYPES.items():
            if isinstance(payload, record_type):
                return cls(kind, payload, ingested_at, source_id)
        raise InvalidRecord(f"not an observation payload: {payload!r}")

    @property
    def timestamp(self) -> datetime:
        return self.payload.timestamp

    @property
    def place(self) -> Optional[str]:
        return self.payload.place

    def dedup_key(self) -> tuple[str, ...]:
        return self.payload.dedup_key()

    def key_string(self) -> str:
        return "|".join(self.dedup_key())

    def sort_key(self) -> tuple:
        return (self.timestamp, self.source_id, self.key_string())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "source_id": self.source_id,
            "ingested_at": self.ingested_at.isoformat(),
            "payload": self.payload.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Observation":
        kind = ObservationKind(data["kind"])
        payload = RECORD_TYPES[kind].from_dict(data["payload"])
        return cls(kind, payload, data["ingested_at"], data["source_id"])

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


class ObservationStore(Protocol):
    """Storage contract; any document backend can stand behind it"""

    def check(self, obs: Observation) -> None:
        ...

    def put(self, obs: Observation) -> PutResult:
        ...

    def query(self, kind: ObservationKind, start: datetime, end: datetime,
              place: Optional[str] = None) -> list[Observation]:
        ...

    def count(self, kind: Optional[ObservationKind] = None) -> int:
        ...

    def days_since_last_tide_peak(self, station: str, as_of: datetime) -> Optional[int]:
        ...


class MemoryStore:
    """In-memory store; the base of the file-backed default"""

    def __init__(self, clock: Callable[[], datetime] = utcnow):
        self.clock = clock
        self._index: dict[ObservationKind, dict[tuple[str, ...], Observation]] = {
            kind: {} for kind in ObservationKind
        }
        self._lock = threading.RLock()

    def check(self, obs: Observation) -> None:
        """Raise InvalidRecord for anything `put` would refuse"""
        if not isinstance(obs, Observation):
            raise InvalidRecord(f"not an observation: {obs!r}")
        if obs.ingested_at > to_utc(self.clock()):
            raise InvalidRecord(f"ingested_at {obs.ingested_at.isoformat()} is in the future")

    def put(self, obs: Observation) -> PutResult:
        """Insert an observation unless its dedup key is already stored"""
        self.check(obs)
        key = obs.dedup_key()
        with self._lock:
            bucket = self._index[obs.kind]
            if key in bucket:
                return PutResult.DUPLICATE
            self._persist(obs)
            bucket[key] = obs
        return PutResult.INSERTED

    def _persist(self, obs: Observation) -> None:
        pass

    def query(self, kind: ObservationKind, start: datetime, end: datetime,
              place: Optional[str] = None) -> list[Observation]:
        """All records of `kind` with timestamp in [start, end], optionally at `place`"""
        start, end = to_utc(start), to_utc(end)
        if start > end:
            raise ValueError("window start is after window end")
        with self._lock:
            candidates = list(self._index[ObservationKind(kind)].values())
        hits = [
            obs for obs in candidates
            if start <= obs.timestamp <= end and (place is None or obs.place == place)
        ]
        return sorted(hits, key=Observation.sort_key)

    def count(self, kind: Optional[ObservationKind] = None) -> int:
        with self._lock:
            if kind is not None:
                return len(self._index[ObservationKind(kind)])
            return sum(len(bucket) for bucket in self._index.values())

    def all(self, kind: ObservationKind) -> list[Observation]:
        with self._lock:
            return sorted(self._index[ObservationKind(kind)].values(), key=Observation.sort_key)

    def find(self, kind: ObservationKind, key: str) -> Optional[Observation]:
        """Look up a record by its joined dedup key (used for traceability audits)"""
        with self._lock:
            for obs in self._index[ObservationKind(kind)].values():
                if obs.key_string() == key:
                    return obs
        return None

    def days_since_last_tide_peak(self, station: str, as_of: datetime) -> Optional[int]:
        """Whole days between `as_of` and the latest peak at `station` strictly before it"""
        as_of = to_utc(as_of)
        with self._lock:
            tides = list(self._index[ObservationKind.TIDE].values())
        peaks = [
            obs.payload.observed_at for obs in tides
            if obs.payload.is_peak and obs.payload.station == station and obs.payload.observed_at < as_of
        ]
        if not peaks:
            return None
        return (as_of - max(peaks)) // timedelta(days=1)


class FileStore(MemoryStore):
    """Append-only `<kind>.ndjsonl` files with an in-memory key index"""

    def __init__(self, directory: Union[str, Path], clock: Callable[[], datetime] = utcnow):
        super().__init__(clock=clock)
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._check_manifest()
        self._load()

    def _check_manifest(self) -> None:
        manifest = self.directory / "manifest"
        if not manifest.exists():
            manifest.write_text(json.dumps({"schema_version": SCHEMA_VERSION}) + "\n", encoding="utf-8")
            return
        version = json.loads(manifest.read_text(encoding="utf-8")).get("schema_version")
        if version != SCHEMA_VERSION:
            raise InvalidRecord(f"unsupported store schema version {version} in {manifest}")

    def path_for(self, kind: ObservationKind) -> Path:
        return self.directory / f"{ObservationKind(kind).value}.ndjsonl"

    def _load(self) -> None:
        for kind in ObservationKind:
            path = self.path_for(kind)
            if not path.exists():
                continue
            self._drop_torn_tail(path)
            with open(path, "r", encoding="utf-8") as f:
                for lineno, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        obs = Observation.from_dict(json.loads(line))
                    except (ValueError, KeyError, InvalidRecord) as e:
                        # torn or corrupt lines are skipped
                        logger.warning("Skipping unreadable record %s:%d: %s", path, lineno, e)
                        continue
                    self._index[kind].setdefault(obs.dedup_key(), obs)
        logger.debug("Opened store %s with %d records", self.directory, self.count())

    @staticmethod
    def _drop_torn_tail(path: Path) -> None:
        """Cut an unterminated last line so the next append starts on a fresh line"""
        with open(path, "rb+") as f:
            data = f.read()
            if not data or data.endswith(b"\n"):
                return
            keep = data.rfind(b"\n") + 1
            logger.warning("Dropping torn tail of %s (%d bytes)", path, len(data) - keep)
            f.truncate(keep)

    def _persist(self, obs: Observation) -> None:
        with open(self.path_for(obs.kind), "a", encoding="utf-8") as f:
            f.write(obs.to_line() + "\n")
