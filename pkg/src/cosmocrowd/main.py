"""Ingest daemon application.

Builds the FastAPI app around an event store replayed from the data
directory; started by the ``ingestd`` subcommand.
"""

import logging
from collections.abc import AsyncIterator
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI

from cosmocrowd import __version__
from cosmocrowd.api import init_store, register_error_handlers, router
from cosmocrowd.config.settings import Settings, settings
from cosmocrowd.storage import EventStore, create_store
from cosmocrowd.utils.logger import get_logger


class HealthCheckFilter(logging.Filter):
    """Filter out successful health check requests from access logs.

    Reason: Health checks run every few seconds under docker-compose, creating
    noise in logs. Only log health check failures for debugging.
    """

    def filter(self, record: logging.LogRecord) -> bool:
        message = record.getMessage()
        if "/v1/healthz" in message and "200 OK" in message:
            return False
        return True


def create_app(app_settings: Settings = settings, store: EventStore | None = None) -> FastAPI:
    """Create FastAPI application.

    Args:
        app_settings: Settings used to open the store and load the activity model.
        store: Pre-built store; when None the lifespan replays ``data_dir``.
    """

    @asynccontextmanager
    async def lifespan(app: FastAPI) -> AsyncIterator[None]:
        logger = get_logger("lifespan")
        logger.info("Starting cosmocrowd ingest daemon", data_dir=str(app_settings.data_dir))

        active = store if store is not None else create_store(app_settings)
        init_store(active, app_settings)
        app.state.store = active

        yield

        active.close()
        logger.info(
            "cosmocrowd ingest daemon stopped",
            accepted=active.accepted_total,
            rejected=active.rejected_total,
        )

    app = FastAPI(
        title="cosmocrowd API",
        description="Crowd-sensed flash, track and motion records with shower-candidate queries",
        version=__version__,
        lifespan=lifespan,
    )
    app.include_router(router)
    register_error_handlers(app)
    return app


def serve(app_settings: Settings = settings) -> None:
    """Run the ingest daemon until interrupted."""
    # Reason: Suppress noisy health check logs
    logging.getLogger("uvicorn.access").addFilter(HealthCheckFilter())

    uvicorn.run(
        create_app(app_settings),
        host=app_settings.api_host,
        port=app_settings.api_port,
        log_level=app_settings.log_level.lower(),
    )
