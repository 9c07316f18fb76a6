"""MCP stdio server exposing the reporter to assistant clients."""
import asyncio
import logging
from datetime import date
from typing import Optional

import mcp.server.stdio
import mcp.types as types
from mcp.server import NotificationOptions, Server
from mcp.server.models import InitializationOptions

from .config import AppConfig, check_artifacts, load_config, load_resources
from .errors import (
    BlabError,
    ConfigError,
    GrammarError,
    MessageTooLarge,
    MissingTemplate,
    NoApplicableOrdering,
    UnsplittableToken,
    ValidationFailed,
)
from .ingestion import SchemeFetcher, run_cycle
from .pipeline import ReportPipeline
from .selection import serialize_intents
from .summarization import split_thread
from .warehouse import FileStore

logger = logging.getLogger(__name__)

SERVER_NAME = "blab-reporter"
SERVER_VERSION = "0.1.0"


class BlabServer:
    """Holds the MCP server and the lazily loaded pipeline state"""

    def __init__(self, name: str, config_path: Optional[str] = None):
        self.server = Server(name)
        self.config_path = config_path
        self.config: Optional[AppConfig] = None
        self.pipeline: Optional[ReportPipeline] = None

    def load(self) -> ReportPipeline:
        if self.pipeline is None:
            self.config = load_config(self.config_path)
            resources = load_resources(self.config)
            store = FileStore(self.config.paths.store)
            self.pipeline = ReportPipeline.from_config(self.config, store, resources)
        return self.pipeline



blab_server = BlabServer(SERVER_NAME)


def _text(text: str) -> list[types.TextContent]:
    return [types.TextContent(type="text", text=text)]


def _day(arguments: dict) -> date:
    try:
        return date.fromisoformat(arguments["date"])
    except KeyError:
        raise ValueError("date is required (YYYY-MM-DD)") from None


@blab_server.server.list_tools()
async def handle_list_tools() -> list[types.Tool]:
    """List available tools"""
    day_schema = {"type": "string", "description": "Local (America/Sao_Paulo) date, YYYY-MM-DD"}
    place_schema = {"type": "string", "description": "City or tide station; defaults to the configured place"}
    return [
        types.Tool(
            name="generate-report",
            description="Generate the weather and sea report thread for a place and date",
            inputSchema={
                "type": "object",
                "properties": {
                    "date": day_schema,
                    "place": place_schema,
                    "seed": {"type": "integer", "description": "Unsigned 64-bit seed for reproducible wording"},
                },
                "required": ["date"],
            },
        ),
        types.Tool(
            name="serialize-intents",
            description="Show the intent messages content selection produces for a place and date",
            inputSchema={
                "type": "object",
                "properties": {"date": day_schema, "place": place_schema},
                "required": ["date"],
            },
        ),
        types.Tool(
            name="ingest",
            description="Run one ingestion cycle over the configured sources",
            inputSchema={
                "type": "object",
                "properties": {"only": {"type": "string", "description": "Restrict the cycle to one source_id"}},
            },
        ),
        types.Tool(
            name="check-grammar",
            description="Lint the grammar, entity registry and ordering catalog",
            inputSchema={"type": "object", "properties": {}},
        ),
        types.Tool(
            name="split-thread",
            description="Split text into numbered posts that fit the character limit",
            inputSchema={
                "type": "object",
                "properties": {
                    "text": {"type": "string"},
                    "limit": {"type": "integer", "description": "Maximum code points per post (default 280)"},
                },
                "required": ["text"],
            },
        ),
    ]


@blab_server.server.call_tool()
async def handle_call_tool(
    name: str,
    arguments: dict | None
) -> list[types.TextContent | types.ImageContent | types.EmbeddedResource]:
    """Handle tool execution requests"""
    if arguments is None:
        arguments = {}

    async def execute_with_timeout(timeout=60.0):
        try:
            return await asyncio.wait_for(_handle_tool_implementation(name, arguments), timeout=timeout)
        except asyncio.TimeoutError:
            return _text(f"⏱️ The operation timed out after {timeout} seconds.")
        except ConfigError as e:
            return _text(f"⚙️ Configuration error: {e}")
        except ValidationFailed as e:
            return _text(f"🚫 Generated text was withheld: {e}")
        except (NoApplicableOrdering, MissingTemplate, MessageTooLarge, GrammarError) as e:
            return _text(f"❌ Generation failed: {e}")
        except UnsplittableToken as e:
            return _text(f"✂️ Cannot split text: {e}")
        except BlabError as e:
            return _text(f"❌ Reporter error: {e}")
        except ValueError as e:
            return _text(f"❌ Invalid arguments: {e}")
        except Exception as e:
            logger.exception("Unexpected error in %s: %s", name, e)
            return _text("An unexpected error occurred. Please try again or simplify your request.")

    timeout = 120.0 if name == "ingest" else 45.0
    return await execute_with_timeout(timeout)


async def _handle_tool_implementation(
    name: str,
    arguments: dict
) -> list[types.TextContent | types.ImageContent | types.EmbeddedResource]:
    """Actual implementation of tool handling logic"""
    if name == "split-thread":
        thread = split_thread(arguments.get("text", ""), int(arguments.get("limit", 280)))
        return _text("\n---\n".join(thread.rendered()))

    if name == "check-grammar":
        config = blab_server.config or load_config(blab_server.config_path)
        diagnostics = check_artifacts(config.paths)
        return _text("\n".join(diagnostics) if diagnostics else "✅ Grammar, entities and catalog are clean.")

    pipeline = blab_server.load()

    if name == "generate-report":
        seed = arguments.get("seed")
        report = pipeline.report(_day(arguments), arguments.get("place"), int(seed) if seed is not None else None)
        if report is None:
            return _text("Nothing to report for that date.")
        return _text(report.text())

    if name == "serialize-intents":
        messages = pipeline.intents(_day(arguments), arguments.get("place"))
        return _text(serialize_intents(messages) if messages else "No intent messages selected.")

    if name == "ingest":
        sources = pipeline.resources.sources
        only = arguments.get("only")
        if only:
            sources = [s for s in sources if s.source_id == only]
            if not sources:
                return _text(f"Unknown source_id: {only}")
        fetcher = SchemeFetcher()
        try:
            outcomes = await run_cycle(sources, fetcher, pipeline.store)
        finally:
            await fetcher.aclose()
        lines = [f"{o.source_id}: {o.status.value}, {o.inserted} inserted, {o.duplicates} duplicates"
                 + (f" ({o.error_detail})" if o.error_detail else "") for o in outcomes]
        return _text("\n".join(lines) or "No enabled sources.")

    return _text(f"Unknown tool: {name}")


async def main(config_path: Optional[str] = None):
    """Run the server using stdin/stdout streams"""
    blab_server.config_path = config_path
    try:
        blab_server.load()
    except BlabError as e:
        logger.warning("Starting without a loaded pipeline: %s", e)

    async with mcp.server.stdio.stdio_server() as (read_stream, write_stream):
        await blab_server.server.run(
            read_stream,
            write_stream,
            InitializationOptions(
                server_name=SERVER_NAME,
                server_version=SERVER_VERSION,
                capabilities=blab_server.server.get_capabilities(
                    notification_options=NotificationOptions(),
                    experimental_capabilities={},
                ),
            ),
        )


if __name__ == "__main__":
    asyncio.run(main())
