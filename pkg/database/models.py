import uuid

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func

from database.database import Base


def new_id() -> str:
    return str(uuid.uuid4())


class Run(Base):
    __tablename__ = "runs"

    id = Column(String(36), primary_key=True, default=new_id)
    command = Column(String(50), nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    config_json = Column(Text, nullable=False)
    out_dir = Column(Text, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    # Relationships
    reports = relationship("ReportRow", back_populates="run", cascade="all, delete-orphan",
                           order_by="ReportRow.position")
    records = relationship("RecordRow", back_populates="run", cascade="all, delete-orphan",
                           order_by="RecordRow.position")


class ReportRow(Base):
    __tablename__ = "report_rows"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(36), ForeignKey("runs.id"), nullable=False, index=True)
    position = Column(Integer, nullable=False)
    label = Column(String(100), nullable=False)
    method = Column(String(100), nullable=False)
    count = Column(Integer, nullable=False)
    median_iou = Column(Float, nullable=True)
    iqr_iou = Column(Float, nullable=True)
    median_centroid_offset = Column(Float, nullable=True)
    baseline_median_iou = Column(Float, nullable=True)
    sign_positive = Column(Integer, nullable=False, default=0)
    sign_negative = Column(Integer, nullable=False, default=0)
    sign_ties = Column(Integer, nullable=False, default=0)
    p_value = Column(Float, nullable=True)

    run = relationship("Run", back_populates="reports")


class RecordRow(Base):
    __tablename__ = "record_rows"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String(36), ForeignKey("runs.id"), nullable=False, index=True)
    position = Column(Integer, nullable=False)
    label = Column(String(100), nullable=False, index=True)
    method = Column(String(100), nullable=False)
    role = Column(String(20), nullable=False, default="study")
    source_id = Column(String(100), nullable=False)
    seed = Column(Integer, nullable=False)
    target_class = Column(Integer, nullable=False)
    steps_k = Column(Integer, nullable=False, default=0)
    iou = Column(Float, nullable=True)
    centroid_offset = Column(Float, nullable=True)
    blank = Column(Boolean, default=False)

    run = relationship("Run", back_populates="records")
