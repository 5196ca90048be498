# app/main.py

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.api.v1 import api_router
from app.core.config import configure_logging, settings

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """
    Manages application startup and shutdown events.
    """
    configure_logging()
    logger.info(f"{settings.PROJECT_NAME} API starting (solver: {settings.SOLVER})")

    yield  # --- The application runs here ---

    logger.info("API shutting down.")


# --- App Initialization ---
app = FastAPI(
    title=f"{settings.PROJECT_NAME} API",
    openapi_url=f"{settings.API_V1_STR}/openapi.json",
    description="Checking, inference and evaluation for the amortized calculus.",
    version="0.1.0",
    lifespan=lifespan,
)


# --- Routers ---
app.include_router(api_router, prefix=settings.API_V1_STR)


# A simple root endpoint for health checks
@app.get("/", tags=["Health Check"])
def read_root():
    """A simple health check endpoint."""
    return {"status": "ok", "project": settings.PROJECT_NAME}
