"""
Database models and connection setup for the benchmark results store.
"""

import uuid
from datetime import datetime

from sqlalchemy import (
    JSON,
    Boolean,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    String,
    Text,
    Uuid,
    create_engine,
)
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from .config import get_database_url

# Database configuration
DATABASE_URL = get_database_url()

# Create engine and session
engine = create_engine(DATABASE_URL)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()


class ExperimentRun(Base):
    """One Monte-Carlo benchmark: an algorithm on a dataset under one configuration."""
    __tablename__ = "experiment_runs"

    id = Column(Uuid(as_uuid=True), primary_key=True, default=uuid.uuid4)
    created_at = Column(DateTime, default=datetime.utcnow)
    algorithm = Column(String(20))
    dataset = Column(String(500))
    config_hash = Column(String(64), index=True)
    config = Column(JSON)
    runs = Column(Integer)
    failures = Column(Integer, default=0)
    acc_mean = Column(Float)
    acc_std = Column(Float)
    nmi_mean = Column(Float)
    nmi_std = Column(Float)
    mi_mean = Column(Float)
    mi_std = Column(Float)
    purity_mean = Column(Float)
    purity_std = Column(Float)
    wall_clock_s = Column(Float)
    notes = Column(Text, nullable=True)

    # Relationships
    seed_results = relationship("SeedResult", back_populates="experiment_run", cascade="all, delete-orphan")


class SeedResult(Base):
    """Scores (or the failure) of a single seed within an experiment run."""
    __tablename__ = "seed_results"

    id = Column(Uuid(as_uuid=True), primary_key=True, default=uuid.uuid4)
    experiment_run_id = Column(Uuid(as_uuid=True), ForeignKey("experiment_runs.id"))
    seed = Column(Integer)
    acc = Column(Float, nullable=True)
    nmi = Column(Float, nullable=True)
    mi = Column(Float, nullable=True)
    mi_raw = Column(Float, nullable=True)  # nats
    purity = Column(Float, nullable=True)
    iterations = Column(Integer, nullable=True)
    converged = Column(Boolean, nullable=True)
    final_objective = Column(Float, nullable=True)
    failed = Column(Boolean, default=False)
    error = Column(Text, nullable=True)
    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    experiment_run = relationship("ExperimentRun", back_populates="seed_results")


def get_db():
    """Get database session."""
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def create_tables():
    """Create all database tables."""
    Base.metadata.create_all(bind=engine)


def drop_tables():
    """Drop all database tables."""
    Base.metadata.drop_all(bind=engine)
