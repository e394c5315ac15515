import logging
from datetime import datetime, timezone

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from sqlalchemy import text

# Import our modules
from database.database import get_db, init_db
from errors import ContractViolation
from routes import runs
from settings import configure_logging, get_settings

# Configure logging
configure_logging(get_settings().log_level)
logger = logging.getLogger(__name__)

# Create FastAPI app
app = FastAPI(
    title="Object Saliency Noise Reports",
    description="Read-only access to registered study runs and their localization reports",
    version="1.0.0"
)

# Read-only API, any origin may query it
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=False,
    allow_methods=["GET", "OPTIONS"],
    allow_headers=["*"],
)

# Create database tables (only if database is available)
try:
    init_db()
    logger.info("Database tables created successfully")
except Exception as e:
    logger.warning(f"Could not create database tables: {e}")

# Include routers
app.include_router(runs.router, prefix="/api/runs", tags=["runs"])


@app.exception_handler(ContractViolation)
async def contract_violation_handler(request: Request, exc: ContractViolation):
    return JSONResponse(status_code=400, content={"detail": str(exc)})


@app.get("/")
async def root():
    """Service banner"""
    return {
        "message": "Object Saliency Noise report API is running",
        "version": app.version,
        "timestamp": datetime.now(timezone.utc).isoformat()
    }


@app.get("/health")
async def health_check():
    """Detailed health check"""
    try:
        # Test database connection
        db = next(get_db())
        try:
            db.execute(text("SELECT 1"))
        finally:
            db.close()
        db_status = "healthy"
    except Exception as e:
        logger.error(f"Database health check failed: {e}")
        db_status = "unhealthy"

    return {
        "status": "healthy" if db_status == "healthy" else "unhealthy",
        "database": db_status,
        "timestamp": datetime.now(timezone.utc).isoformat()
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
