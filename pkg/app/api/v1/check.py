# app/api/v1/check.py

from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import get_checker_session, settings_for
from app.schemas.report import ReportResponse
from app.schemas.requests import SourceRequest
from app.services.internal import commands, report_service

router = APIRouter()


@router.post("/check", response_model=ReportResponse, summary="Check declarations against their annotations")
def check_program(request: SourceRequest, base: Settings = Depends(get_checker_session)):
    """
    Checks every `def` of the program against its `@requires` / `@ensures`
    annotation. The report carries one item per declaration.
    """
    report = commands.check_source(request.source, settings_for(base, request), request.name)
    return ReportResponse(report=report, exit_code=report.exit_code, text=report_service.render(report))


@router.post("/infer", response_model=ReportResponse, summary="Infer minimal judgements")
def infer_program(request: SourceRequest, base: Settings = Depends(get_checker_session)):
    report = commands.infer_source(request.source, settings_for(base, request), request.name)
    return ReportResponse(report=report, exit_code=report.exit_code, text=report_service.render(report))
