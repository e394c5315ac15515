from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

from settings import get_settings


# Create SQLAlchemy engine lazily
def get_engine():
    """Get database engine, creating it if necessary"""
    url = get_settings().database_url
    engine = getattr(get_engine, "_engine", None)
    if engine is None or str(getattr(get_engine, "_url", "")) != url:
        if url.startswith("postgresql"):
            # PostgreSQL configuration
            engine = create_engine(url, pool_pre_ping=True, pool_recycle=300, echo=False)
        else:
            # SQLite, also used by the CLI and tests
            engine = create_engine(url, connect_args={"check_same_thread": False}, echo=False)
        get_engine._engine = engine
        get_engine._url = url
    return engine


def reset_engine() -> None:
    """Dispose of the cached engine (tests point OSN_DATABASE_URL elsewhere)"""
    engine = getattr(get_engine, "_engine", None)
    if engine is not None:
        engine.dispose()
        del get_engine._engine


def get_session_local():
    """Get SessionLocal class"""
    return sessionmaker(autocommit=False, autoflush=False, bind=get_engine())


# Create Base class
Base = declarative_base()


def init_db() -> None:
    from database import models  # noqa: F401 - registers the tables

    Base.metadata.create_all(bind=get_engine())


def get_db():
    """Dependency to get database session"""
    SessionLocal = get_session_local()
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
