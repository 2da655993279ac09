"""
civ HTTP API
Main FastAPI application
"""
import logging
import sys
import time
from datetime import datetime

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .config import get_settings
from .routers import analysis
from .utils.errors import CivError

logging.basicConfig(
    level=getattr(logging, get_settings().log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stdout)
    ]
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

app = FastAPI(
    title="civ API",
    description="Conditional instrumental sets in acyclic directed mixed graphs",
    version=VERSION
)

app.state.start_time = time.time()

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(analysis.router, prefix="/api/v1", tags=["analysis"])


@app.on_event("startup")
async def startup_event():
    settings = get_settings()
    if settings.api_key:
        logger.info("API key is configured")
    else:
        logger.warning("API key is not configured, running in development mode")
    logger.info(f"civ API started with {len(app.routes)} routes")


@app.exception_handler(CivError)
async def civ_error_handler(request: Request, exc: CivError):
    logger.info(f"Rejected {request.url.path}: {exc.code}: {exc.detail}")
    return JSONResponse(status_code=422, content=exc.to_dict())


@app.get("/health")
async def health_check():
    """Health check endpoint that doesn't require authentication"""
    return {
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
        "version": VERSION,
        "uptime": time.time() - app.state.start_time,
    }


@app.get("/")
async def root():
    return {
        "message": "civ API",
        "docs_url": "/docs",
        "health_check": "/health"
    }
