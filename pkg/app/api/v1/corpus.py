# app/api/v1/corpus.py

from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import get_checker_session
from app.schemas.report import ReportResponse
from app.services.internal import commands, report_service

router = APIRouter()


@router.get("/corpus", response_model=ReportResponse, summary="Run the shipped golden suite")
def run_corpus(base: Settings = Depends(get_checker_session)):
    report = commands.corpus(cfg=base)
    return ReportResponse(report=report, exit_code=report.exit_code, text=report_service.render(report))
