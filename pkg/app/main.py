"""
FastAPI service for the NEEP engine
- Benchmark catalog
- Gene decoding
- Background experiment runs with per-generation progress logs
"""

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
import json
import uvicorn
from datetime import datetime
from typing import List, Optional

from app import __version__
from app.config import get_settings
from app.models.schemas import (
    BenchmarkInfo, DecodeRequest, DecodeResponse, RunRequest, RunStatus, SystemStatus
)
from app.services.benchmarks import BENCHMARKS, list_benchmarks
from app.services.kexpression import alphabet_for_gene_text, decode, effective_length, parse_gene
from app.services.run_manager import RunManager
from app.utils.errors import NeepError
from app.utils.logger import get_progress_logger, set_log_level, setup_logger

# Setup logging
logger = setup_logger(__name__)
progress_logger = get_progress_logger()

# Global services
run_manager: Optional[RunManager] = None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Lifespan context manager for startup and shutdown"""
    global run_manager

    settings = get_settings()
    set_log_level(settings.log_level)
    logger.info("🚀 Starting NEEP service...")

    run_manager = RunManager(
        workers=settings.workers, data_dir=settings.data_dir, max_finished_runs=settings.max_finished_runs
    )
    logger.info(f"✓ Benchmark registry loaded ({len(BENCHMARKS)} problems)")
    logger.info(f"✓ Run Manager initialized (workers={settings.workers})")
    logger.info("=" * 80)
    logger.info(f"Service ready on http://{settings.host}:{settings.port}")
    logger.info("=" * 80)

    yield

    logger.info(f"Shutting down ({run_manager.get_active_run_count()} run(s) still active)")


# Create FastAPI app
app = FastAPI(
    title="NEEP API",
    description="Neuro-encoded expression programming: symbolic regression experiments",
    version=__version__,
    lifespan=lifespan
)

# Configure CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _json(payload) -> Response:
    """JSON response that keeps non-finite errors as Infinity/NaN"""
    if hasattr(payload, "model_dump_json"):
        content = payload.model_dump_json()
    else:
        content = json.dumps(payload)
    return Response(content=content, media_type="application/json")


# ============================================================================
# REST API ENDPOINTS
# ============================================================================

@app.get("/", tags=["System"])
async def root():
    """Root endpoint with API information"""
    return {
        "service": "NEEP API",
        "version": __version__,
        "status": "operational",
        "features": [
            "GA-NEEP, PSO-NEEP and CMAES-NEEP",
            "GEP baseline",
            "Benchmark catalog",
            "Rank-sum comparison tables"
        ],
        "endpoints": {
            "docs": "/docs",
            "health": "/api/v1/health",
            "benchmarks": "/api/v1/benchmarks",
            "decode": "/api/v1/decode",
            "runs": "/api/v1/runs",
            "progress": "/api/v1/logs/progress"
        }
    }


@app.get("/api/v1/health", tags=["System"], response_model=SystemStatus)
async def health_check():
    """Health check endpoint"""
    return SystemStatus(
        status="healthy",
        timestamp=datetime.now(),
        version=__version__,
        benchmarks=len(BENCHMARKS),
        active_runs=run_manager.get_active_run_count() if run_manager else 0
    )


@app.get("/api/v1/benchmarks", tags=["Benchmarks"], response_model=List[BenchmarkInfo])
async def get_benchmarks(name_filter: Optional[str] = None):
    """Benchmark registry, optionally filtered by a case-insensitive name substring"""
    return [spec.info() for spec in list_benchmarks(name_filter)]


@app.post("/api/v1/decode", tags=["Genes"], response_model=DecodeResponse)
async def decode_gene(request: DecodeRequest):
    """Decode a gene string into its infix expression"""
    try:
        alphabet = alphabet_for_gene_text(request.gene, request.function_set, request.terminals)
        gene = parse_gene(request.gene, alphabet, request.head_len)
        return DecodeResponse(
            expression=str(decode(gene)),
            effective_length=effective_length(gene),
            head_len=gene.head_len,
            length=len(gene)
        )
    except NeepError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"❌ Decode error: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/v1/runs", tags=["Runs"], response_model=RunStatus, status_code=202)
async def create_run(request: RunRequest):
    """Start an experiment suite in the background"""
    try:
        run = await run_manager.create_run(request)
        logger.info(f"📊 New run created: {run.run_id}")
        return run
    except NeepError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"❌ Run creation error: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/api/v1/runs/{run_id}", tags=["Runs"], response_model=RunStatus)
async def get_run(run_id: str):
    """Get run status and, once finished, its summary table"""
    run = await run_manager.get_run(run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return _json(run)


@app.get("/api/v1/logs/progress", tags=["Logs"])
async def get_progress_logs(limit: int = 100):
    """
    Get recent per-generation progress records
    One record per generation per trial: best and mean fitness, CMA-ES sigma
    """
    try:
        records = progress_logger.get_recent(limit)
        return _json({
            "total": len(records),
            "records": [record.model_dump() for record in records]
        })
    except Exception as e:
        logger.error(f"❌ Log retrieval error: {str(e)}")
        raise HTTPException(status_code=500, detail=str(e))


# ============================================================================
# RUN SERVER
# ============================================================================

if __name__ == "__main__":
    settings = get_settings()
    uvicorn.run(
        "app.main:app",
        host=settings.host,
        port=settings.port,
        reload=False,
        log_level="info"
    )
