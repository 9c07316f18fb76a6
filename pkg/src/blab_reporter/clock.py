"""Time sources and timezone helpers.

All stored timestamps are UTC; anything shown to readers or used for
publishing windows is computed in America/Sao_Paulo.
"""
import asyncio
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from typing import Iterator, Optional, Protocol
from zoneinfo import ZoneInfo

from .errors import ConfigError

DISPLAY_TZ = ZoneInfo("America/Sao_Paulo")


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def to_utc(value: datetime) -> datetime:
    """Normalize an aware datetime to UTC; naive datetimes are rejected"""
    if value.tzinfo is None or value.utcoffset() is None:
        raise ValueError(f"timestamp without zone: {value.isoformat()}")
    return value.astimezone(timezone.utc)


def local(value: datetime) -> datetime:
    return value.astimezone(DISPLAY_TZ)


def local_day_window(day: date) -> tuple[datetime, datetime]:
    """Closed UTC interval covering one calendar day in the display timezone"""
    start = datetime.combine(day, time(0, 0), tzinfo=DISPLAY_TZ)
    end = datetime.combine(day + timedelta(days=1), time(0, 0), tzinfo=DISPLAY_TZ)
    return to_utc(start), to_utc(end) - timedelta(microseconds=1)


class Clock(Protocol):
    """Time source driving the service loop"""

    def ticks(self) -> Iterator[datetime]:
        ...

    async def wait(self) -> None:
        ...


class RealClock:
    """Wall clock ticking every `interval` seconds, forever"""

    def __init__(self, interval: float = 60.0):
        self.interval = interval

    def ticks(self) -> Iterator[datetime]:
        while True:
            yield utcnow()

    async def wait(self) -> None:
        await asyncio.sleep(self.interval)


@dataclass
class ScriptedTick:
    at: datetime
    feeds: dict[str, Path] = field(default_factory=dict)


class SimulatedClock:
    """Replays a clock script: one tick per line, `<ISO timestamp> [source_id=path ...]`.

    Blank lines and `#` comments are ignored; fixture paths resolve against the
    script's directory.
    """

    def __init__(self, ticks: list[ScriptedTick]):
        self.script = ticks
        self.current: Optional[ScriptedTick] = None

    @classmethod
    def from_file(cls, path: Path) -> "SimulatedClock":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"clock script not found: {path}")
        return cls.parse(path.read_text(encoding="utf-8"), base=path.parent)

    @classmethod
    def parse(cls, text: str, base: Path = Path(".")) -> "SimulatedClock":
        ticks = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            stamp, *feeds = line.split()
            try:
                at = to_utc(datetime.fromisoformat(stamp))
            except ValueError as e:
                raise ConfigError(f"clock script line {lineno}: {e}") from e
            tick = ScriptedTick(at=at)
            for feed in feeds:
                source_id, sep, rel = feed.partition("=")
                if not sep or not source_id or not rel:
                    raise ConfigError(f"clock script line {lineno}: bad feed {feed!r}")
                tick.feeds[source_id] = base / rel
            if ticks and tick.at < ticks[-1].at:
                raise ConfigError(f"clock script line {lineno}: time goes backwards")
            ticks.append(tick)
        return cls(ticks)

    def ticks(self) -> Iterator[datetime]:
        for tick in self.script:
            self.current = tick
            yield tick.at
        self.current = None

    async def wait(self) -> None:
        return None
