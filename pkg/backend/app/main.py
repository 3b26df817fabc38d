import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.config import configure_logging
from app.errors import RSPError
from app.routes import covariance, health, inference, oracle, simulation, spectrum

configure_logging()
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="RSP Toolkit API",
    description="Simulation and inference for interacting reinforced stochastic processes on networks",
    version="0.1.0",
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=[
        "http://localhost:3010",
        "http://localhost:5173",
        "http://localhost:3000",
    ],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.exception_handler(RSPError)
async def rsp_error_handler(request: Request, exc: RSPError):
    logger.info("%s %s rejected: %s: %s", request.method, request.url.path, type(exc).__name__, exc)
    return JSONResponse(status_code=400, content={"error": type(exc).__name__, "detail": str(exc)})


# Include routers
app.include_router(health.router)
app.include_router(spectrum.router)
app.include_router(covariance.router)
app.include_router(inference.router)
app.include_router(simulation.router)
app.include_router(oracle.router)


@app.get("/")
async def root():
    return {
        "message": "RSP Toolkit API",
        "version": "0.1.0",
        "status": "operational"
    }
