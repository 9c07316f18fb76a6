#!/usr/bin/env python
"""CLI interface for blab-reporter."""

import argparse
import asyncio
import importlib.metadata
import logging
import sys
from dataclasses import replace
from datetime import date
from typing import Optional

from dotenv import load_dotenv

from . import server
from .clock import RealClock, SimulatedClock
from .config import AppConfig, check_artifacts, load_config, load_resources
from .errors import (
    BlabError,
    ConfigError,
    MessageTooLarge,
    MissingAttribute,
    MissingLexiconEntry,
    MissingTemplate,
    NoApplicableOrdering,
    OverBudget,
    UnknownEntity,
    ValidationFailed,
)
from .ingestion import FetchStatus, ScriptedFetcher, SchemeFetcher, run_cycle
from .log import setup_logging
from .pipeline import ReportPipeline
from .publisher import Publisher, PublishJournal, make_client, run_loop
from .rng import SEED_MASK
from .warehouse import FileStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_GENERATION = 4
EXIT_GRAMMAR = 5

GENERATION_ERRORS = (NoApplicableOrdering, MissingTemplate, MissingAttribute, MissingLexiconEntry, MessageTooLarge,
                     OverBudget, UnknownEntity)


def get_version():
    """Get the current version of the package."""
    try:
        return importlib.metadata.version("blab-reporter")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def seed_type(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed <= SEED_MASK:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer: {value}")
    return seed


def _configure(args) -> AppConfig:
    config = load_config(args.config)
    setup_logging(args.log_level or config.log_level)
    return config


def cmd_ingest(args) -> int:
    config = _configure(args)
    resources = load_resources(config)
    sources = resources.sources
    if args.only:
        sources = [s for s in sources if s.source_id == args.only]
        if not sources:
            raise ConfigError(f"unknown source_id {args.only!r}")
    store = FileStore(config.paths.store)

    async def cycle():
        fetcher = SchemeFetcher()
        try:
            return await run_cycle(sources, fetcher, store)
        finally:
            await fetcher.aclose()

    outcomes = asyncio.run(cycle())
    print(f"{'source_id':<24} {'status':<13} {'inserted':>8} {'duplicates':>10}")
    for outcome in outcomes:
        print(f"{outcome.source_id:<24} {outcome.status.value:<13} {outcome.inserted:>8} {outcome.duplicates:>10}")
    failed = [o for o in outcomes if o.status in (FetchStatus.NETWORK_ERROR, FetchStatus.PARSE_ERROR)]
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(args) -> int:
    config = _configure(args)
    resources = load_resources(config)
    store = FileStore(config.paths.store)
    pipeline = ReportPipeline.from_config(config, store, resources)
    try:
        report = pipeline.report(args.date, args.place, args.seed)
    except ValidationFailed as e:
        print(f"validation failed: {e}; text withheld", file=sys.stderr)
        return EXIT_VALIDATION
    except GENERATION_ERRORS as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return EXIT_GENERATION
    if report is None:
        print("nothing to report", file=sys.stderr)
        return EXIT_OK
    print(report.text())
    return EXIT_OK


def cmd_check_grammar(args) -> int:
    config = _configure(args)
    diagnostics = check_artifacts(config.paths)
    for diagnostic in diagnostics:
        print(diagnostic)
    return EXIT_GRAMMAR if diagnostics else EXIT_OK


async def _serve(config: AppConfig, args) -> None:
    resources = load_resources(config)
    store = FileStore(config.paths.store)
    pipeline = ReportPipeline.from_config(config, store, resources)
    journal = PublishJournal(config.paths.journal)
    dry_run = config.dry_run or args.dry_run or bool(args.simulate)
    client = make_client(dry_run, config.twitter_token, config.paths.dry_run_journal)

    if args.simulate:
        clock = SimulatedClock.from_file(args.simulate)
        fetcher = ScriptedFetcher(clock)
        sources = [replace(s, endpoint=f"sim://{s.source_id}") for s in resources.sources]

        async def no_wait(_: float) -> None:
            return None

        publisher = Publisher(store, pipeline, config.schedule, client, journal, sources, fetcher, sleep=no_wait)
        await run_loop(clock, publisher)
        return

    fetcher = SchemeFetcher()
    publisher = Publisher(store, pipeline, config.schedule, client, journal, resources.sources, fetcher)
    logger.info("Serving %s every %.0f seconds (dry run: %s)", config.place, config.tick_seconds, dry_run)
    try:
        await run_loop(RealClock(config.tick_seconds), publisher)
    finally:
        await fetcher.aclose()
        if hasattr(client, "aclose"):
            await client.aclose()


def cmd_serve(args) -> int:
    config = _configure(args)
    asyncio.run(_serve(config, args))
    return EXIT_OK


def cmd_start(args) -> int:
    config_path = args.config
    setup_logging(args.log_level or "WARNING")
    asyncio.run(server.main(config_path))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="BLAB Reporter - data-to-text reports about the Blue Amazon"
    )
    parser.add_argument("--version", action="store_true", help="Show the version and exit")
    parser.add_argument("--config", help="Path to blab.json (or set BLAB_CONFIG)")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR (or set BLAB_LOG_LEVEL)")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    ingest_parser = subparsers.add_parser("ingest", help="Run one ingestion cycle")
    ingest_parser.add_argument("--only", help="Fetch a single source_id")

    report_parser = subparsers.add_parser("report", help="Print the report thread for a place and date")
    report_parser.add_argument("--place", help="City or tide station (default: configured place)")
    report_parser.add_argument("--date", required=True, type=date.fromisoformat, help="Local date, YYYY-MM-DD")
    report_parser.add_argument("--seed", type=seed_type, help="Unsigned 64-bit seed")

    subparsers.add_parser("check-grammar", help="Lint the grammar, entity registry and ordering catalog")

    serve_parser = subparsers.add_parser("serve", help="Run the publishing service")
    serve_parser.add_argument("--simulate", help="Replay a clock script and exit")
    serve_parser.add_argument("--dry-run", action="store_true", help="Journal posts instead of publishing")

    subparsers.add_parser("start", help="Start the MCP server")
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "report": cmd_report,
    "check-grammar": cmd_check_grammar,
    "serve": cmd_serve,
    "start": cmd_start,
}


def main(argv: Optional[list[str]] = None):
    """Main entry point for the CLI."""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(f"blab-reporter version {get_version()}")
        sys.exit(EXIT_OK)

    command = COMMANDS.get(args.command)
    if command is None:
        parser.print_help()
        sys.exit(EXIT_PARTIAL)

    try:
        code = command(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        code = EXIT_CONFIG
    except BlabError as e:
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_GENERATION
    except KeyboardInterrupt:
        code = EXIT_OK
    sys.exit(code)


if __name__ == "__main__":
    main()
