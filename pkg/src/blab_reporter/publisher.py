"""Publishing windows, dispatch with retries, the publish journal and the service loop."""
import asyncio
import json
import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Awaitable, Callable, Optional, Protocol, Union

import httpx

from .clock import DISPLAY_TZ, Clock, local, to_utc, utcnow
from .errors import (
    BlabError,
    ClientAuthError,
    ClientError,
    ClientNetworkError,
    ClientRateLimitError,
    ClientRejectedError,
    ConfigError,
)
from .ingestion import Fetcher, SourceConfig, detect_urgent, new_records, run_cycle
from .realization import Blocklist, validate
from .summarization import TweetThread
from .warehouse import ObservationStore

logger = logging.getLogger(__name__)

API_BASE_URL = "https://api.twitter.com/2"
RETRY_DELAYS = (30.0, 120.0)
DEFAULT_MAX_POSTS = 12


class ContentKind(str, Enum):
    WEATHER_REPORT = "weather_report"
    NEWS_SUMMARY = "news_summary"
    CURIOUS_FACT = "curious_fact"
    EARTHQUAKE_ALERT = "earthquake_alert"


class PublishWindow(str, Enum):
    MORNING = "morning"
    EVENING = "evening"
    IMMEDIATE = "immediate"


# Local start and end hours; the evening window runs past midnight
WINDOW_HOURS = {PublishWindow.MORNING: (5, 12), PublishWindow.EVENING: (18, 5)}


class PublishStatus(str, Enum):
    QUEUED = "queued"
    SENT = "sent"
    FAILED = "failed"
    SUPPRESSED = "suppressed"


@dataclass(frozen=True)
class SchedulePolicy:
    rules: dict[ContentKind, PublishWindow]
    max_posts_per_day: int = DEFAULT_MAX_POSTS

    def __post_init__(self):
        missing = [kind.value for kind in ContentKind if kind not in self.rules]
        if missing:
            raise ConfigError(f"no schedule rule for {', '.join(missing)}")
        if self.rules[ContentKind.EARTHQUAKE_ALERT] != PublishWindow.IMMEDIATE:
            raise ConfigError("earthquake alerts must be published immediately")
        if self.max_posts_per_day < 1:
            raise ConfigError("max_posts_per_day must be positive")

    @classmethod
    def default(cls) -> "SchedulePolicy":
        return cls({
            ContentKind.WEATHER_REPORT: PublishWindow.MORNING,
            ContentKind.NEWS_SUMMARY: PublishWindow.EVENING,
            ContentKind.CURIOUS_FACT: PublishWindow.EVENING,
            ContentKind.EARTHQUAKE_ALERT: PublishWindow.IMMEDIATE,
        })

    @classmethod
    def from_dict(cls, data: dict) -> "SchedulePolicy":
        rules: dict[ContentKind, PublishWindow] = {}
        try:
            for rule in data.get("rules", []):
                kind = ContentKind(rule["content_kind"])
                if kind in rules:
                    raise ConfigError(f"duplicate schedule rule for {kind.value}")
                rules[kind] = PublishWindow(rule["window"])
            return cls(rules, int(data.get("max_posts_per_day", DEFAULT_MAX_POSTS)))
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"bad schedule config: {e}") from e

    def window_for(self, kind: ContentKind) -> PublishWindow:
        return self.rules[kind]


def window_bounds(window: PublishWindow, day: date) -> tuple[datetime, datetime]:
    """Local start and end of the window instance that opens on `day`"""
    start_hour, end_hour = WINDOW_HOURS[window]
    start = datetime.combine(day, time(start_hour), tzinfo=DISPLAY_TZ)
    end_day = day if end_hour > start_hour else day + timedelta(days=1)
    return start, datetime.combine(end_day, time(end_hour), tzinfo=DISPLAY_TZ)


def active_window_date(window: PublishWindow, now: datetime) -> Optional[date]:
    """Opening date of the window instance containing `now`, if any"""
    if window == PublishWindow.IMMEDIATE:
        return local(now).date()
    today = local(now).date()
    for day in (today, today - timedelta(days=1)):
        start, end = window_bounds(window, day)
        if start <= now < end:
            return day
    return None


def schedule(thread: TweetThread, kind: ContentKind, now: datetime, policy: SchedulePolicy) -> datetime:
    """When a thread of the given kind should go out"""
    window = policy.window_for(kind)
    if window == PublishWindow.IMMEDIATE or active_window_date(window, now) is not None:
        return now
    day = local(now).date()
    start, _ = window_bounds(window, day)
    if start <= now:
        start, _ = window_bounds(window, day + timedelta(days=1))
    logger.debug("Scheduling %s (%d parts) for %s", kind.value, len(thread), start.isoformat())
    return to_utc(start)


@dataclass(frozen=True)
class PublishRecord:
    thread: TweetThread
    kind: ContentKind
    decided_at: datetime
    window: str
    window_date: date
    status: PublishStatus = PublishStatus.QUEUED
    dispatched_at: Optional[datetime] = None
    failure_detail: Optional[str] = None
    post_ids: tuple[str, ...] = ()
    failed_index: Optional[int] = None

    def __post_init__(self):
        dispatched = self.status in (PublishStatus.SENT, PublishStatus.FAILED)
        if dispatched != (self.dispatched_at is not None):
            raise ValueError(f"{self.status.value} record must {'' if dispatched else 'not '}have dispatched_at")

    @property
    def key(self) -> tuple[str, str, str]:
        return self.kind.value, self.window, self.window_date.isoformat()

    def to_dict(self) -> dict[str, Any]:
        return {
            "event": "publish",
            "kind": self.kind.value,
            "window": self.window,
            "window_date": self.window_date.isoformat(),
            "decided_at": self.decided_at.isoformat(),
            "dispatched_at": self.dispatched_at.isoformat() if self.dispatched_at else None,
            "status": self.status.value,
            "failure_detail": self.failure_detail,
            "failed_index": self.failed_index,
            "post_ids": list(self.post_ids),
            "parts": self.thread.rendered(),
        }


class PublishJournal:
    """Append-only JSON-lines log of every publishing decision"""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._decided: set[tuple[str, str, str]] = set()
        self._noted: set[tuple[str, ...]] = set()
        self._sent_per_day: dict[str, int] = {}
        for entry in self.entries():
            self._index(entry)

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        entries = []
        with self.path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    logger.warning("Skipping corrupt journal line %d in %s", lineno, self.path)
        return entries

    def _index(self, entry: dict) -> None:
        key = (entry.get("kind"), entry.get("window"), entry.get("window_date"))
        if entry.get("event") == "publish":
            self._decided.add(key)
            if entry.get("status") in (PublishStatus.SENT.value, PublishStatus.FAILED.value):
                day = local(datetime.fromisoformat(entry["dispatched_at"])).date().isoformat()
                self._sent_per_day[day] = self._sent_per_day.get(day, 0) + 1
        else:
            self._noted.add((entry.get("event"),) + key)

    def append(self, entry: dict) -> None:
        line = json.dumps(entry, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
            self._index(entry)

    def record(self, record: PublishRecord) -> None:
        self.append(record.to_dict())

    def note(self, event: str, kind: ContentKind, window: str, window_date: date, at: datetime,
             detail: Optional[str] = None) -> None:
        """Journal a non-publishing outcome once per (event, kind, window, date)"""
        key = (event, kind.value, window, window_date.isoformat())
        if key in self._noted:
            return
        entry = {"event": event, "kind": kind.value, "window": window, "window_date": window_date.isoformat(),
                 "at": at.isoformat()}
        if detail:
            entry["detail"] = detail
        self.append(entry)

    def decided(self, kind: ContentKind, window: str, window_date: date) -> bool:
        return (kind.value, window, window_date.isoformat()) in self._decided

    def posts_on(self, day: date) -> int:
        return self._sent_per_day.get(day.isoformat(), 0)


# Clients

class PublishingClient(Protocol):
    async def post(self, text: str, reply_to: Optional[str] = None) -> str:
        """Publish one post and return its id"""
        ...


class DryRunClient:
    """Records would-be posts instead of publishing them"""

    def __init__(self, journal_path: Optional[Union[str, Path]] = None):
        self.journal_path = Path(journal_path) if journal_path else None
        self.posts: list[dict[str, Optional[str]]] = []

    async def post(self, text: str, reply_to: Optional[str] = None) -> str:
        post_id = f"dry-{len(self.posts) + 1}"
        entry = {"id": post_id, "reply_to": reply_to, "text": text}
        self.posts.append(entry)
        if self.journal_path is not None:
            self.journal_path.parent.mkdir(parents=True, exist_ok=True)
            with self.journal_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
        logger.info("Dry run post %s: %s", post_id, text)
        return post_id


class TwitterClient:
    """Live binding for the v2 posts endpoint; the token comes from the environment"""

    def __init__(self, token: str, base_url: str = API_BASE_URL, timeout: float = 30.0):
        if not token:
            raise ConfigError("a bearer token is required for live publishing")
        self.token = token
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._client: Optional[httpx.AsyncClient] = None

    @asynccontextmanager
    async def client(self):
        if self._client is None:
            limits = httpx.Limits(max_keepalive_connections=2, max_connections=4)
            timeout = httpx.Timeout(connect=5.0, read=self.timeout, write=self.timeout, pool=self.timeout)
            self._client = httpx.AsyncClient(limits=limits, timeout=timeout)
        try:
            yield self._client
        except (httpx.ConnectError, httpx.ReadError, httpx.WriteError, httpx.PoolTimeout):
            await self.aclose()
            raise

    async def post(self, text: str, reply_to: Optional[str] = None) -> str:
        payload: dict[str, Any] = {"text": text}
        if reply_to:
            payload["reply"] = {"in_reply_to_tweet_id": reply_to}
        headers = {"Authorization": f"Bearer {self.token}", "Content-Type": "application/json"}
        try:
            async with self.client() as client:
                response = await client.post(f"{self.base_url}/tweets", json=payload, headers=headers)
                response.raise_for_status()
                return str(response.json()["data"]["id"])
        except httpx.HTTPStatusError as e:
            status_code = e.response.status_code
            if status_code in (401, 403):
                raise ClientAuthError(f"Authentication failed: {status_code}") from e
            if status_code == 429:
                raise ClientRateLimitError("Rate limit exceeded") from e
            if 500 <= status_code < 600:
                raise ClientNetworkError(f"Server error {status_code}") from e
            raise ClientRejectedError(f"Post rejected with status {status_code}: {e.response.text[:200]}") from e
        except httpx.RequestError as e:
            raise ClientNetworkError(f"Connection error: {e}") from e
        except (KeyError, ValueError, TypeError) as e:
            raise ClientRejectedError(f"Unexpected response payload: {e}") from e

    async def aclose(self) -> None:
        if self._client is not None:
            await self._client.aclose()
            self._client = None


def make_client(dry_run: bool, token: Optional[str], dry_run_journal: Optional[Path] = None) -> PublishingClient:
    if dry_run:
        return DryRunClient(dry_run_journal)
    if not token:
        raise ConfigError("BLAB_TWITTER_TOKEN is not set; export it or run with --dry-run")
    return TwitterClient(token)


# Dispatch

Sleep = Callable[[float], Awaitable[None]]


async def _send_with_retry(client: PublishingClient, text: str, reply_to: Optional[str], sleep: Sleep) -> str:
    for attempt in range(len(RETRY_DELAYS) + 1):
        try:
            return await client.post(text, reply_to)
        except (ClientNetworkError, ClientRateLimitError) as e:
            if attempt == len(RETRY_DELAYS):
                raise
            delay = RETRY_DELAYS[attempt]
            logger.warning("%s; retrying in %.0f seconds (attempt %d/%d)", e, delay, attempt + 1, len(RETRY_DELAYS))
            await sleep(delay)
    raise AssertionError("unreachable")


async def dispatch(record: PublishRecord, client: PublishingClient, blocklist: Optional[Blocklist] = None,
                   posts_today: int = 0, max_posts: int = DEFAULT_MAX_POSTS, sleep: Sleep = asyncio.sleep,
                   now: Callable[[], datetime] = utcnow) -> PublishRecord:
    """Send a queued thread part by part, each replying to the previous one"""
    if record.status != PublishStatus.QUEUED:
        raise ValueError(f"cannot dispatch a {record.status.value} record")
    if blocklist is not None:
        for part in record.thread.parts:
            verdict = validate(part.rendered, blocklist)
            if not verdict.passed:
                logger.error("Suppressing %s: part %d contains a blocked term", record.kind.value, part.index)
                return replace(record, status=PublishStatus.SUPPRESSED,
                               failure_detail=f"blocked term in part {part.index} at {verdict.position}")
    if posts_today >= max_posts:
        logger.warning("Daily cap of %d posts reached; suppressing %s", max_posts, record.kind.value)
        return replace(record, status=PublishStatus.SUPPRESSED, failure_detail="daily cap reached")

    post_ids: list[str] = []
    for part in record.thread.parts:
        try:
            post_ids.append(await _send_with_retry(client, part.rendered, post_ids[-1] if post_ids else None, sleep))
        except ClientError as e:
            logger.error("Publishing %s failed at part %d: %s", record.kind.value, part.index, e)
            return replace(record, status=PublishStatus.FAILED, dispatched_at=now(), post_ids=tuple(post_ids),
                           failed_index=part.index, failure_detail=f"{e.kind}: {e}")
    logger.info("Published %s as %d posts", record.kind.value, len(post_ids))
    return replace(record, status=PublishStatus.SENT, dispatched_at=now(), post_ids=tuple(post_ids))


# Service loop

@dataclass
class Publisher:
    """Everything the service loop needs besides the clock"""
    store: ObservationStore
    pipeline: Any
    policy: SchedulePolicy
    client: PublishingClient
    journal: PublishJournal
    sources: list[SourceConfig] = field(default_factory=list)
    fetcher: Optional[Fetcher] = None
    sleep: Sleep = asyncio.sleep

    async def publish(self, thread: TweetThread, kind: ContentKind, window: str, window_date: date,
                      now: datetime) -> PublishRecord:
        record = PublishRecord(thread, kind, now, window, window_date)
        record = await dispatch(record, self.client, self.pipeline.blocklist,
                                posts_today=self.journal.posts_on(local(now).date()),
                                max_posts=self.policy.max_posts_per_day, sleep=self.sleep, now=lambda: now)
        self.journal.record(record)
        return record

    async def _urgent(self, outcomes, now: datetime) -> None:
        for obs in detect_urgent(new_records(outcomes), self.pipeline.urgent_threshold):
            window = f"{PublishWindow.IMMEDIATE.value}/{obs.key_string()}"
            day = local(obs.timestamp).date()
            if self.journal.decided(ContentKind.EARTHQUAKE_ALERT, window, day):
                continue
            try:
                report = self.pipeline.earthquake_alert(obs, now)
                await self.publish(report.thread, ContentKind.EARTHQUAKE_ALERT, window, day, now)
            except BlabError as e:
                logger.error("Earthquake alert failed: %s", e)
                self.journal.note("error", ContentKind.EARTHQUAKE_ALERT, window, day, now, str(e))

    async def _generate(self, kind: ContentKind, day: date, now: datetime):
        if kind == ContentKind.WEATHER_REPORT:
            return self.pipeline.weather_report(day, now)
        if kind == ContentKind.CURIOUS_FACT:
            return self.pipeline.curious_fact(day, now)
        if kind == ContentKind.NEWS_SUMMARY:
            return await self.pipeline.news_summary(now)
        return None

    async def _scheduled(self, now: datetime) -> None:
        for kind, window in self.policy.rules.items():
            if window == PublishWindow.IMMEDIATE:
                continue
            day = active_window_date(window, now)
            if day is None or self.journal.decided(kind, window.value, day):
                continue
            try:
                report = await self._generate(kind, day, now)
            except BlabError as e:
                logger.error("Generating %s failed: %s", kind.value, e)
                self.journal.note("error", kind, window.value, day, now, str(e))
                continue
            if report is None:
                self.journal.note("empty", kind, window.value, day, now)
                continue
            await self.publish(report.thread, kind, window.value, day, now)

    async def tick(self, now: datetime) -> None:
        outcomes = []
        if self.sources and self.fetcher is not None:
            outcomes = await run_cycle(self.sources, self.fetcher, self.store, clock=lambda: now)
        await self._urgent(outcomes, now)
        await self._scheduled(now)


async def run_loop(clock: Clock, publisher: Publisher) -> None:
    """Drive the publisher from a clock; returns only when the clock runs out of ticks"""
    for now in clock.ticks():
        try:
            await publisher.tick(now)
        except Exception as e:  # the loop outlives any single tick
            logger.exception("Tick at %s failed: %s", now.isoformat(), e)
        await clock.wait()
