import logging
from datetime import datetime

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.cache import get_cache_health
from app.config import settings
from app.routes.api import router as api_router
from app.runner import REGISTRY, stats

# Configure logging
logging.basicConfig(
    level=settings.log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="ideal-lab API",
    description="Membership oracles, detectors, measures and witness constructions for ideals on ω",
    version="1.0.0",
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(api_router, prefix="/api/v1", tags=["Ideals"])


@app.get("/health")
async def health_check():
    """Health check endpoint with cache and witness run information"""
    try:
        return {
            "status": "healthy",
            "timestamp": datetime.now().isoformat(),
            "settings": settings.as_dict(),
            "cache": get_cache_health(),
            "witnesses": {
                "available": list(REGISTRY),
                "statistics": stats.get_stats(),
            },
        }
    except Exception as e:
        logger.error(f"Health check failed: {e}")
        return JSONResponse(
            status_code=500,
            content={
                "status": "unhealthy",
                "error": str(e),
                "timestamp": datetime.now().isoformat()
            }
        )


# Cache management endpoints
@app.get("/api/v1/cache/stats")
async def get_cache_stats():
    """Get cache statistics"""
    try:
        return get_cache_health()
    except Exception as e:
        logger.error(f"Error getting cache stats: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/")
async def root():
    """Root endpoint with API information"""
    return {
        "message": "ideal-lab API",
        "version": "1.0.0",
        "endpoints": {
            "health": "/health",
            "member": "/api/v1/member",
            "detect": "/api/v1/detect/{detector}",
            "density": "/api/v1/density",
            "witness": "/api/v1/witness/{name}",
            "witnesses": "/api/v1/witnesses",
            "cache_stats": "/api/v1/cache/stats",
        },
    }


# Run the application
if __name__ == "__main__":
    logger.info("🚀 Starting the ideal-lab API server...")
    uvicorn.run(
        "app.main:app",
        host="0.0.0.0",
        port=8000,
        reload=True,
        log_level="info"
    )
