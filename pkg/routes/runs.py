from datetime import datetime
from typing import List, Optional

from fastapi import APIRouter, Depends, HTTPException, Query
from pydantic import BaseModel
from sqlalchemy.orm import Session

from database.database import get_db
from database.models import RecordRow, ReportRow, Run

router = APIRouter()


class RunResponse(BaseModel):
    id: str
    command: str
    seed: int
    out_dir: str
    created_at: Optional[datetime]

    class Config:
        from_attributes = True


class RunDetailResponse(RunResponse):
    config_json: str
    report_count: int = 0
    record_count: int = 0


class ReportRowResponse(BaseModel):
    label: str
    method: str
    count: int
    median_iou: Optional[float]
    iqr_iou: Optional[float]
    median_centroid_offset: Optional[float]
    baseline_median_iou: Optional[float]
    sign_positive: int
    sign_negative: int
    sign_ties: int
    p_value: Optional[float]

    class Config:
        from_attributes = True


class RecordRowResponse(BaseModel):
    label: str
    method: str
    role: str
    source_id: str
    seed: int
    target_class: int
    steps_k: int
    iou: Optional[float]
    centroid_offset: Optional[float]
    blank: bool

    class Config:
        from_attributes = True


def get_run_or_404(db: Session, run_id: str) -> Run:
    run = db.query(Run).filter(Run.id == run_id).first()
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@router.get("/", response_model=List[RunResponse])
async def get_runs(
    command: Optional[str] = Query(None),
    skip: int = Query(0, ge=0),
    limit: int = Query(100, ge=1, le=1000),
    db: Session = Depends(get_db)
):
    """Get registered runs, newest first, with optional command filter"""
    query = db.query(Run)
    if command:
        query = query.filter(Run.command == command)
    runs = query.order_by(Run.created_at.desc(), Run.id).offset(skip).limit(limit).all()
    return [RunResponse.model_validate(run) for run in runs]


@router.get("/{run_id}", response_model=RunDetailResponse)
async def get_run(run_id: str, db: Session = Depends(get_db)):
    """Get a specific run by ID"""
    run = get_run_or_404(db, run_id)
    detail = RunDetailResponse.model_validate(run)
    detail.report_count = db.query(ReportRow).filter(ReportRow.run_id == run.id).count()
    detail.record_count = db.query(RecordRow).filter(RecordRow.run_id == run.id).count()
    return detail


@router.get("/{run_id}/reports", response_model=List[ReportRowResponse])
async def get_run_reports(run_id: str, db: Session = Depends(get_db)):
    """Get the summary rows of a run in report order"""
    run = get_run_or_404(db, run_id)
    rows = db.query(ReportRow).filter(ReportRow.run_id == run.id).order_by(ReportRow.position).all()
    return [ReportRowResponse.model_validate(row) for row in rows]


@router.get("/{run_id}/records", response_model=List[RecordRowResponse])
async def get_run_records(
    run_id: str,
    label: Optional[str] = Query(None),
    skip: int = Query(0, ge=0),
    limit: int = Query(1000, ge=1, le=10000),
    db: Session = Depends(get_db)
):
    """Get per-record metrics of a run with optional label filter"""
    run = get_run_or_404(db, run_id)
    query = db.query(RecordRow).filter(RecordRow.run_id == run.id)
    if label:
        query = query.filter(RecordRow.label == label)
    rows = query.order_by(RecordRow.position).offset(skip).limit(limit).all()
    return [RecordRowResponse.model_validate(row) for row in rows]
