"""Rule-based content selection and the textual intent notation.

Intent messages are the pipeline's interchange unit. Their textual form is

    CURRENT WEATHER AND TEMPERATURE (weather="partly cloudy",temperature="25ºC",...);

and is used for the annotated corpus under `corpus/intents/`.
"""
import logging
import re
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from decimal import Decimal
from enum import Enum
from typing import Any, Optional, Union

from .clock import local, to_utc
from .errors import InvalidIntent, NotationError
from .ingestion import URGENT_MAGNITUDE
from .warehouse import NewsRecord, Observation, ObservationKind, ObservationStore, WeatherCondition

logger = logging.getLogger(__name__)


class Predicate(str, Enum):
    CURRENT_WEATHER_AND_TEMPERATURE = "CURRENT_WEATHER_AND_TEMPERATURE"
    WEATHER_ALERT = "WEATHER_ALERT"
    FISHING_CONDITION = "FISHING_CONDITION"
    CAUSE = "CAUSE"
    DAYS_SINCE_LAST_PEAK = "DAYS_SINCE_LAST_PEAK"
    EARTHQUAKE_REPORT = "EARTHQUAKE_REPORT"
    VESSEL_DIGEST = "VESSEL_DIGEST"
    CURIOUS_FACT = "CURIOUS_FACT"
    NEWS_SUMMARY_REF = "NEWS_SUMMARY_REF"
    RECORD_EXTREME = "RECORD_EXTREME"

    @property
    def display(self) -> str:
        return self.value.replace("_", " ")

    @property
    def rank(self) -> int:
        return PREDICATE_ORDER.index(self)

    @classmethod
    def lookup(cls, name: str) -> Optional["Predicate"]:
        key = re.sub(r"[\s_]+", "_", name.strip().upper())
        return cls.__members__.get(key)


PREDICATE_ORDER = list(Predicate)

REQUIRED_ATTRIBUTES: dict[Predicate, tuple[str, ...]] = {
    Predicate.CURRENT_WEATHER_AND_TEMPERATURE: ("weather", "temperature", "city", "timestamp"),
    Predicate.WEATHER_ALERT: ("alert_kind", "city"),
    Predicate.FISHING_CONDITION: ("condition", "event", "height", "days_since_last_peak"),
    Predicate.CAUSE: ("earthquake", "moon_calendar"),
    Predicate.DAYS_SINCE_LAST_PEAK: ("days",),
    Predicate.EARTHQUAKE_REPORT: ("magnitude", "epicenter_desc", "institute", "occurred_at"),
    Predicate.VESSEL_DIGEST: ("vessel_count", "region"),
    Predicate.CURIOUS_FACT: ("fact",),
    Predicate.NEWS_SUMMARY_REF: ("title", "source", "url"),
    Predicate.RECORD_EXTREME: ("metric", "city", "days"),
}

DEFAULT_SALIENCE: dict[Predicate, Decimal] = {
    Predicate.EARTHQUAKE_REPORT: Decimal("1.0"),
    Predicate.WEATHER_ALERT: Decimal("0.9"),
    Predicate.FISHING_CONDITION: Decimal("0.6"),
    Predicate.CURRENT_WEATHER_AND_TEMPERATURE: Decimal("0.5"),
    Predicate.RECORD_EXTREME: Decimal("0.4"),
}
OTHER_SALIENCE = Decimal("0.3")

# Selection rule constants
GOOD_TIDE_METERS = Decimal("1.5")
FAIR_TIDE_METERS = Decimal("0.8")
GALE_KMH = Decimal("60")
CAUSE_LOOKBACK = timedelta(hours=48)
RECORD_LOOKBACK_DAYS = 7

ATTRIBUTE_NAME = re.compile(r"[a-z][a-z0-9_]*")
NO_SPACE_UNITS = {"ºC", "°C", "%"}


class AttrKind(str, Enum):
    TEXT = "text"
    NUMBER = "number"
    BOOLEAN = "boolean"
    ENTITY = "entity"
    TIMESTAMP = "timestamp"


@dataclass(frozen=True)
class AttrValue:
    kind: AttrKind
    value: Any
    unit: str = ""

    def __post_init__(self):
        if self.kind == AttrKind.NUMBER:
            if not isinstance(self.value, Decimal):
                object.__setattr__(self, "value", Decimal(str(self.value)))
            if self.unit and not re.fullmatch(r"[^\d\s\"\\](.*\S)?", self.unit):
                raise InvalidIntent(f"bad unit {self.unit!r}")
        elif self.unit:
            raise InvalidIntent("only numbers carry a unit")
        if self.kind == AttrKind.ENTITY and not re.fullmatch(r"[A-Z][A-Z0-9_]*", str(self.value)):
            raise InvalidIntent(f"bad entity id {self.value!r}")
        if self.kind == AttrKind.BOOLEAN and not isinstance(self.value, bool):
            raise InvalidIntent(f"not a boolean: {self.value!r}")
        if self.kind == AttrKind.TIMESTAMP:
            if isinstance(self.value, datetime):
                object.__setattr__(self, "value", to_utc(self.value))
            elif not isinstance(self.value, date):
                raise InvalidIntent(f"not a timestamp: {self.value!r}")
        if self.kind == AttrKind.TEXT and not isinstance(self.value, str):
            raise InvalidIntent(f"not text: {self.value!r}")

    @classmethod
    def text(cls, value: str) -> "AttrValue":
        return cls(AttrKind.TEXT, value)

    @classmethod
    def number(cls, value: Union[Decimal, int, str], unit: str = "") -> "AttrValue":
        return cls(AttrKind.NUMBER, Decimal(str(value)), unit)

    @classmethod
    def boolean(cls, value: bool) -> "AttrValue":
        return cls(AttrKind.BOOLEAN, value)

    @classmethod
    def entity(cls, entity_id: str) -> "AttrValue":
        return cls(AttrKind.ENTITY, entity_id)

    @classmethod
    def timestamp(cls, value: Union[date, datetime]) -> "AttrValue":
        return cls(AttrKind.TIMESTAMP, value)


@dataclass(frozen=True)
class IntentMessage:
    """One fact to verbalize.

    Equality covers predicate and attributes only; salience, report date and
    provenance are bookkeeping that the notation does not carry.
    """
    predicate: Predicate
    attributes: dict[str, AttrValue]
    salience: Decimal = field(default=None, compare=False)
    report_date: Optional[date] = field(default=None, compare=False)
    provenance: dict[str, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "predicate", Predicate(self.predicate))
        object.__setattr__(self, "attributes", dict(self.attributes))
        if self.salience is None:
            object.__setattr__(self, "salience", DEFAULT_SALIENCE.get(self.predicate, OTHER_SALIENCE))
        if not Decimal(0) <= Decimal(self.salience) <= Decimal(1):
            raise InvalidIntent(f"salience {self.salience} outside [0, 1]")
        for name, value in self.attributes.items():
            if not ATTRIBUTE_NAME.fullmatch(name):
                raise InvalidIntent(f"bad attribute name {name!r}")
            if not isinstance(value, AttrValue):
                raise InvalidIntent(f"attribute {name} is not an AttrValue")
        missing = [a for a in REQUIRED_ATTRIBUTES[self.predicate] if a not in self.attributes]
        if missing:
            raise InvalidIntent(f"{self.predicate.display} lacks {', '.join(missing)}")

    def __hash__(self):
        return hash((self.predicate, tuple(self.attributes)))


def trace(message: IntentMessage, attribute: str) -> Optional[str]:
    """Dedup key of the stored record an attribute value was drawn from"""
    return message.provenance.get(attribute)


def _intent(predicate: Predicate, attributes: dict[str, AttrValue], report_date: date,
            source: Optional[Observation] = None) -> IntentMessage:
    provenance = {name: source.key_string() for name in attributes} if source is not None else {}
    return IntentMessage(predicate, attributes, report_date=report_date, provenance=provenance)


def fishing_condition(height: Decimal) -> tuple[str, str]:
    if height >= GOOD_TIDE_METERS:
        return "good", "sea level is high"
    if height >= FAIR_TIDE_METERS:
        return "fair", "sea level is moderate"
    return "poor", "sea level is low"


def format_coordinates(lat: Decimal, lon: Decimal) -> str:
    def part(value: Decimal, positive: str, negative: str) -> str:
        return f"{abs(value):.2f}".replace(".", ",") + "° " + (positive if value >= 0 else negative)
    return f"{part(lat, 'N', 'S')}, {part(lon, 'L', 'O')}"


def earthquake_intent(obs: Observation, report_date: Optional[date] = None) -> IntentMessage:
    quake = obs.payload
    report_date = report_date or local(quake.occurred_at).date()
    return _intent(Predicate.EARTHQUAKE_REPORT, {
        "magnitude": AttrValue.number(quake.magnitude),
        "epicenter_desc": AttrValue.text(format_coordinates(quake.lat, quake.lon)),
        "institute": AttrValue.entity(quake.institute),
        "occurred_at": AttrValue.timestamp(quake.occurred_at),
    }, report_date, obs)


def _record_extremes(latest: Observation, place: str, store: ObservationStore,
                     report_date: date) -> list[IntentMessage]:
    reading = latest.payload
    earlier = [
        obs.payload for obs in store.query(ObservationKind.WEATHER,
                                           reading.observed_at - timedelta(days=RECORD_LOOKBACK_DAYS),
                                           reading.observed_at, place)
        if obs.payload.observed_at < reading.observed_at
    ]
    messages = []
    days = AttrValue.number(RECORD_LOOKBACK_DAYS)
    if earlier and reading.temperature_celsius > max(r.temperature_celsius for r in earlier):
        messages.append(_intent(Predicate.RECORD_EXTREME, {
            "metric": AttrValue.text("temperatura"), "city": AttrValue.text(place), "days": days,
        }, report_date, latest))
    winds = [r.wind_speed_kmh for r in earlier if r.wind_speed_kmh is not None]
    if winds and reading.wind_speed_kmh is not None and reading.wind_speed_kmh > max(winds):
        messages.append(_intent(Predicate.RECORD_EXTREME, {
            "metric": AttrValue.text("vento"), "city": AttrValue.text(place), "days": days,
        }, report_date, latest))
    return messages


def select(window: tuple[datetime, datetime], place: str, store: ObservationStore,
           urgent_threshold: Decimal = URGENT_MAGNITUDE) -> list[IntentMessage]:
    """Decide which facts in the window become intent messages.

    A pure function of (window, place, store snapshot).
    """
    start, end = to_utc(window[0]), to_utc(window[1])
    if start >= end:
        raise ValueError("selection window is empty")
    report_date = local(end).date()
    messages: list[IntentMessage] = []
    alerted = False

    weather = store.query(ObservationKind.WEATHER, start, end, place)
    if weather:
        latest = weather[-1]
        reading = latest.payload
        messages.append(_intent(Predicate.CURRENT_WEATHER_AND_TEMPERATURE, {
            "weather": AttrValue.text(reading.condition.value),
            "temperature": AttrValue.number(reading.temperature_celsius, "ºC"),
            "city": AttrValue.text(reading.city),
            "timestamp": AttrValue.timestamp(local(reading.observed_at).date()),
        }, report_date, latest))
        alert_kind = None
        if reading.condition == WeatherCondition.STORM:
            alert_kind = "storm"
        elif reading.wind_speed_kmh is not None and reading.wind_speed_kmh >= GALE_KMH:
            alert_kind = "gale"
        if alert_kind:
            alerted = True
            messages.append(_intent(Predicate.WEATHER_ALERT, {
                "alert_kind": AttrValue.text(alert_kind), "city": AttrValue.text(reading.city),
            }, report_date, latest))
        messages.extend(_record_extremes(latest, place, store, report_date))

    quakes = store.query(ObservationKind.EARTHQUAKE, min(start, end - CAUSE_LOOKBACK), end)
    urgent = [obs for obs in quakes if obs.payload.magnitude >= urgent_threshold]

    tides = store.query(ObservationKind.TIDE, start, end, place)
    days = store.days_since_last_tide_peak(place, end) if tides else None
    if tides and days is not None:
        latest = tides[-1]
        condition, event = fishing_condition(latest.payload.height_meters)
        messages.append(_intent(Predicate.FISHING_CONDITION, {
            "condition": AttrValue.text(condition),
            "event": AttrValue.text(event),
            "height": AttrValue.number(latest.payload.height_meters, "meters"),
            "days_since_last_peak": AttrValue.number(days),
        }, report_date, latest))
        recent_quake = any(obs.payload.occurred_at >= end - CAUSE_LOOKBACK for obs in urgent)
        messages.append(_intent(Predicate.CAUSE, {
            "earthquake": AttrValue.boolean(recent_quake),
            "moon_calendar": AttrValue.boolean(not recent_quake),
        }, report_date, urgent[-1] if recent_quake else latest))
        if alerted:
            messages.append(_intent(Predicate.DAYS_SINCE_LAST_PEAK, {
                "days": AttrValue.number(days),
            }, report_date, latest))
    elif tides:
        logger.debug("No tide peak known at %s; skipping tide messages", place)

    for obs in urgent:
        if start <= obs.payload.occurred_at <= end:
            messages.append(earthquake_intent(obs, report_date))

    vessels = store.query(ObservationKind.VESSEL, start, end)
    if vessels:
        distinct = {obs.payload.vessel_id for obs in vessels}
        messages.append(_intent(Predicate.VESSEL_DIGEST, {
            "vessel_count": AttrValue.number(len(distinct)),
            "region": AttrValue.text(place),
        }, report_date, vessels[-1]))

    logger.debug("Selected %d messages for %s", len(messages), place)
    return messages


def curious_fact_intent(fact: str, report_date: date) -> IntentMessage:
    return IntentMessage(Predicate.CURIOUS_FACT, {"fact": AttrValue.text(fact)}, report_date=report_date)


def news_ref_intent(article: NewsRecord, report_date: Optional[date] = None) -> IntentMessage:
    return IntentMessage(Predicate.NEWS_SUMMARY_REF, {
        "title": AttrValue.text(article.title),
        "source": AttrValue.text(article.source_name),
        "url": AttrValue.text(article.url),
    }, report_date=report_date or local(article.published_at).date(), provenance={
        "title": article.url, "source": article.url, "url": article.url,
    })


# Notation

MONTHS = ("January", "February", "March", "April", "May", "June", "July", "August", "September",
          "October", "November", "December")
KEY_ALIASES = {"height": "height of the sea"}
ALIAS_KEYS = {alias: key for key, alias in KEY_ALIASES.items()}

BOOLEAN_RE = re.compile(r"(yes|no)")
ENTITY_RE = re.compile(r"@([A-Z][A-Z0-9_]*)")
TIMESTAMP_RE = re.compile(r"(" + "|".join(MONTHS) + r") (\d{1,2}), (\d{4})(?: (\d{2}):(\d{2})(?::(\d{2}))? UTC)?")
NUMBER_RE = re.compile(r"(-?\d+(?:\.\d+)?)(?: ?([^\d\s,.].*))?")
PREDICATE_RE = re.compile(r"[A-Za-z][A-Za-z_ ]*")
KEY_RE = re.compile(r"[A-Za-z][A-Za-z0-9_ ]*")


def render_number(value: Decimal) -> str:
    text = format(value.normalize(), "f")
    return "0" if text == "-0" else text


def render_timestamp(value: Union[date, datetime]) -> str:
    text = f"{MONTHS[value.month - 1]} {value.day}, {value.year}"
    if isinstance(value, datetime):
        clock = f"{value.hour:02d}:{value.minute:02d}"
        if value.second:
            clock += f":{value.second:02d}"
        text += f" {clock} UTC"
    return text


def _classify(raw: str) -> AttrValue:
    if BOOLEAN_RE.fullmatch(raw):
        return AttrValue.boolean(raw == "yes")
    if match := ENTITY_RE.fullmatch(raw):
        return AttrValue.entity(match.group(1))
    if match := TIMESTAMP_RE.fullmatch(raw):
        month, day, year = MONTHS.index(match.group(1)) + 1, int(match.group(2)), int(match.group(3))
        if match.group(4) is None:
            return AttrValue.timestamp(date(year, month, day))
        return AttrValue.timestamp(datetime(year, month, day, int(match.group(4)), int(match.group(5)),
                                            int(match.group(6) or 0), tzinfo=timezone.utc))
    if match := NUMBER_RE.fullmatch(raw):
        return AttrValue.number(Decimal(match.group(1)), match.group(2) or "")
    return AttrValue.text(raw)


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def render_value(value: AttrValue) -> str:
    """Quoted notation form of an attribute value (without the quotes)"""
    if value.kind == AttrKind.BOOLEAN:
        return "yes" if value.value else "no"
    if value.kind == AttrKind.ENTITY:
        return f"@{value.value}"
    if value.kind == AttrKind.TIMESTAMP:
        return render_timestamp(value.value)
    if value.kind == AttrKind.NUMBER:
        number = render_number(value.value)
        if not value.unit:
            return number
        return number + ("" if value.unit in NO_SPACE_UNITS else " ") + value.unit
    escaped = _escape(value.value)
    if value.value and _classify(value.value).kind != AttrKind.TEXT:
        # A leading escape forces the text reading of a value that looks typed
        escaped = "\\" + escaped
    return escaped


def render_key(name: str) -> str:
    return KEY_ALIASES.get(name, name.replace("_", " "))


def serialize_intents(messages: list[IntentMessage]) -> str:
    """Render messages in the intent notation, one `PREDICATE (k="v",...);` per message"""
    rendered = []
    for message in messages:
        attributes = ",".join(f'{render_key(name)}="{render_value(value)}"'
                              for name, value in message.attributes.items())
        rendered.append(f"{message.predicate.display} ({attributes});")
    return " ".join(rendered)


class _Cursor:
    def __init__(self, text: str, source: Optional[str]):
        self.text = text
        self.pos = 0
        self.source = source

    def error(self, message: str, pos: Optional[int] = None) -> NotationError:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        column = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return NotationError(message, line=line, column=column, source=self.source)

    def skip(self) -> None:
        while self.pos < len(self.text):
            char = self.text[self.pos]
            if char.isspace():
                self.pos += 1
            elif char == "#":
                end = self.text.find("\n", self.pos)
                self.pos = len(self.text) if end < 0 else end
            else:
                break

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, chars: str, what: str) -> str:
        self.skip()
        char = self.peek()
        if not char or char not in chars:
            raise self.error(f"expected {what}, found {char or 'end of input'!r}")
        self.pos += 1
        return char

    def match(self, pattern: re.Pattern) -> Optional[re.Match]:
        self.skip()
        found = pattern.match(self.text, self.pos)
        if found:
            self.pos = found.end()
        return found

    def quoted(self) -> tuple[str, bool]:
        self.expect('"', "opening quote")
        start = self.pos
        chars, forced = [], self.peek() == "\\"
        while self.pos < len(self.text):
            char = self.text[self.pos]
            if char == "\\" and self.pos + 1 < len(self.text):
                chars.append(self.text[self.pos + 1])
                self.pos += 2
            elif char == '"':
                self.pos += 1
                return "".join(chars), forced
            else:
                chars.append(char)
                self.pos += 1
        raise self.error("unterminated value", start - 1)


def parse_intents(text: str, report_date: Optional[date] = None, source: Optional[str] = None) -> list[IntentMessage]:
    """Inverse of serialize_intents; also accepts `:` for `=` and `;` between attributes"""
    cursor = _Cursor(text, source)
    messages = []
    cursor.skip()
    while cursor.pos < len(text):
        at = cursor.pos
        name = cursor.match(PREDICATE_RE)
        if not name:
            raise cursor.error("expected a predicate name")
        predicate = Predicate.lookup(name.group())
        if predicate is None:
            raise cursor.error(f"unknown predicate {name.group().strip()!r}", at)
        cursor.expect("(", "'('")
        attributes: dict[str, AttrValue] = {}
        cursor.skip()
        if cursor.peek() == ")":
            cursor.pos += 1
        else:
            while True:
                key_at = cursor.pos
                key = cursor.match(KEY_RE)
                if not key:
                    raise cursor.error("expected an attribute name")
                label = key.group().strip()
                attr = ALIAS_KEYS.get(label, label.replace(" ", "_"))
                if attr in attributes:
                    raise cursor.error(f"duplicate attribute {label!r}", key_at)
                cursor.expect("=:", "'=' or ':'")
                raw, forced = cursor.quoted()
                try:
                    attributes[attr] = AttrValue.text(raw) if forced else _classify(raw)
                except (InvalidIntent, ValueError) as e:
                    raise cursor.error(f"bad value for {label!r}: {e}", key_at) from e
                if cursor.expect(",;)", "',' or ')'") == ")":
                    break
        cursor.skip()
        if cursor.peek() == ";":
            cursor.pos += 1
        try:
            messages.append(IntentMessage(predicate, attributes, report_date=report_date))
        except InvalidIntent as e:
            raise cursor.error(str(e), at) from e
        cursor.skip()
    return messages
