"""End-to-end report generation: select, order, plan, fill, resolve, polish, validate."""
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from decimal import Decimal
from typing import Optional

from .clock import local, local_day_window
from .config import AppConfig, Resources
from .errors import ValidationFailed
from .ingestion import URGENT_MAGNITUDE
from .lexicalization import choose_template, fill
from .realization import Blocklist, GreetingWindow, PolishConfig, cleanup, emoji_keys, polish, validate, window_of
from .reg import MentionHistory, resolve
from .rng import SeedStream, derive_seed
from .selection import (
    IntentMessage,
    curious_fact_intent,
    earthquake_intent,
    news_ref_intent,
    select,
)
from .structuring import DiscoursePlan, order, plan
from .summarization import (
    EnforcedSummarizer,
    ExtractiveSummarizer,
    RemoteSummarizer,
    Summarizer,
    TweetThread,
    split_thread,
)
from .warehouse import Observation, ObservationKind, ObservationStore

logger = logging.getLogger(__name__)

NEWS_LOOKBACK = timedelta(hours=24)


@dataclass(frozen=True)
class Report:
    messages: tuple[IntentMessage, ...]
    thread: TweetThread
    seed: int
    plan: Optional[DiscoursePlan] = None

    def text(self) -> str:
        return "\n---\n".join(self.thread.rendered())


class ReportPipeline:
    """Owns the loaded artifacts and turns stored observations into validated threads.

    Text that fails blocklist validation is never returned; ValidationFailed is
    raised instead.
    """

    def __init__(self, store: ObservationStore, resources: Resources, polish_config: PolishConfig,
                 place: str = "Santos", summarizer: Optional[Summarizer] = None, seed: Optional[int] = None,
                 urgent_threshold: Decimal = URGENT_MAGNITUDE):
        self.store = store
        self.resources = resources
        self.polish_config = polish_config
        self.place = place
        self.seed = seed
        self.urgent_threshold = urgent_threshold
        self.summarizer = summarizer or ExtractiveSummarizer(resources.stopwords, resources.abbreviations)

    @classmethod
    def from_config(cls, config: AppConfig, store: ObservationStore, resources: Resources) -> "ReportPipeline":
        extractive = ExtractiveSummarizer(resources.stopwords, resources.abbreviations, config.max_sentences)
        summarizer: Summarizer = extractive
        if config.remote_summarizer:
            summarizer = EnforcedSummarizer(RemoteSummarizer(config.remote_summarizer, config.max_sentences),
                                            extractive)
        return cls(store, resources, config.polish, config.place, summarizer, config.seed, config.urgent_magnitude)

    @property
    def blocklist(self) -> Blocklist:
        return self.resources.blocklist

    def _seed(self, seed: Optional[int], *parts: object) -> int:
        if seed is not None:
            return seed
        if self.seed is not None:
            return derive_seed(self.seed, *parts)
        return derive_seed(*parts)

    def check(self, thread: TweetThread) -> TweetThread:
        for part in thread.parts:
            verdict = validate(part.rendered, self.blocklist)
            if not verdict.passed:
                raise ValidationFailed(verdict.term, verdict.position, part.rendered)
        return thread

    def realize(self, messages: list[IntentMessage], greeting: GreetingWindow, seed: int) -> Report:
        """Messages to a validated thread, drawing each stage from its own substream"""
        grammar, entities = self.resources.grammar, self.resources.entities
        streams = SeedStream(seed)
        lexical, referring, surface = streams.stream("lexicalization"), streams.stream("reg"), streams.stream("polish")

        discourse = plan(order(messages, self.resources.catalog), grammar, entities,
                         first_segment_reserve=self.polish_config.longest_greeting() + 1)
        history = MentionHistory()
        texts, keys = [], []
        for segment in discourse.segments:
            history.start_segment()
            sentences = [fill(choose_template(grammar, m.predicate, lexical), m, grammar) for m in segment.messages]
            texts.append(resolve(" ".join(sentences), entities, history, referring))
            keys.append(emoji_keys(list(segment.messages)))
        tweets = polish(texts, greeting, self.polish_config, surface, keys)
        thread = self.check(TweetThread.of(tweets))
        return Report(tuple(discourse.messages()), thread, seed, discourse)

    def intents(self, day: date, place: Optional[str] = None) -> list[IntentMessage]:
        return select(local_day_window(day), place or self.place, self.store, self.urgent_threshold)

    def report(self, day: date, place: Optional[str] = None, seed: Optional[int] = None,
               greeting: GreetingWindow = GreetingWindow.MORNING) -> Optional[Report]:
        """Daily weather and sea report for a place; None when nothing was selected"""
        place = place or self.place
        messages = self.intents(day, place)
        if not messages:
            logger.info("Nothing to report for %s on %s", place, day.isoformat())
            return None
        return self.realize(messages, greeting, self._seed(seed, day.isoformat(), place))

    def weather_report(self, day: date, now: Optional[datetime] = None, seed: Optional[int] = None) -> Optional[Report]:
        greeting = window_of(now) if now else GreetingWindow.MORNING
        return self.report(day, seed=seed, greeting=greeting)

    def earthquake_alert(self, obs: Observation, now: datetime, seed: Optional[int] = None) -> Report:
        message = earthquake_intent(obs, local(now).date())
        return self.realize([message], window_of(now), self._seed(seed, obs.key_string(), "earthquake_alert"))

    def curious_fact(self, day: date, now: Optional[datetime] = None, seed: Optional[int] = None) -> Optional[Report]:
        facts = self.resources.curious_facts
        if not facts:
            return None
        message = curious_fact_intent(facts[day.toordinal() % len(facts)], day)
        greeting = window_of(now) if now else GreetingWindow.EVENING
        return self.realize([message], greeting, self._seed(seed, day.isoformat(), self.place, "curious_fact"))

    def latest_article(self, now: datetime) -> Optional[Observation]:
        articles = self.store.query(ObservationKind.NEWS, now - NEWS_LOOKBACK, now)
        return articles[-1] if articles else None

    async def news_summary(self, now: datetime, seed: Optional[int] = None) -> Optional[Report]:
        """Thread with a header sentence followed by the article's summary"""
        latest = self.latest_article(now)
        if latest is None:
            return None
        article = latest.payload
        summary = await self.summarizer.summarize(article)
        seed = self._seed(seed, article.url, "news_summary")
        streams = SeedStream(seed)
        grammar, entities = self.resources.grammar, self.resources.entities
        header_message = news_ref_intent(article, local(now).date())
        template = choose_template(grammar, header_message.predicate, streams.stream("lexicalization"))
        header = resolve(fill(template, header_message, grammar), entities, MentionHistory(),
                         streams.stream("reg"))
        greeting = streams.stream("polish").choice(self.polish_config.greetings[window_of(now)])
        thread = split_thread(f"{greeting} {cleanup(header)} {summary.text}")
        return Report((header_message,), self.check(thread), seed)

