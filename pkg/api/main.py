"""
FastAPI Application for heavy-tailed chain analysis.

Classification, special constants and drift certificates over HTTP.
Monte Carlo campaigns are CLI-only: they run for minutes.
"""

import os
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from src import __version__
from src.config import configure_logging

from .routes import router

configure_logging()
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifecycle handler."""
    logger.info("Starting Heavytail API...")
    yield
    logger.info("Shutting down API...")


app = FastAPI(
    title="Heavytail API",
    description="""
## Sublinear-drift chains with heavy-tailed innovations

The chain is x -> (x - x^gamma + alpha)^+ (down drift) or
x -> (x + x^gamma + alpha)^+ (up drift) with Pareto-tailed alpha.

### Endpoints
- **Classify**: regime (recurrent, critical, transient, undecided) and the
  moment threshold q* of the passage time
- **Constants**: K(delta, theta), L(delta, theta) and the critical roots delta0
- **Drift**: Foster-Lyapunov criteria checked on a grid of states

Drift reports are numerical certificates on the listed grid only.
    """,
    version=__version__,
    license_info={
        "name": "MIT License",
        "url": "https://opensource.org/licenses/MIT",
    },
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=os.getenv("CORS_ORIGINS", "*").split(","),
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Unhandled exception: {type(exc).__name__}: {exc}")
    return JSONResponse(
        status_code=500,
        content={
            "error": "Internal server error",
            "detail": "An unexpected error occurred. Please try again.",
            "status_code": 500
        }
    )


app.include_router(router, prefix="/api/v1", tags=["Heavytail"])


@app.get("/", include_in_schema=False)
async def root():
    return {
        "name": "Heavytail API",
        "version": __version__,
        "docs": "/docs",
        "health": "/api/v1/health"
    }


if __name__ == "__main__":
    import uvicorn

    port = int(os.getenv("PORT", 8000))
    uvicorn.run(
        "api.main:app",
        host="0.0.0.0",
        port=port,
        reload=os.getenv("ENVIRONMENT", "development") == "development"
    )
