# app/api/v1/evaluate.py

from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import as_http_error, get_checker_session, settings_for
from app.core.errors import ParseError
from app.schemas.report import ReportResponse
from app.schemas.requests import EvalRequest
from app.services.internal import commands, report_service

router = APIRouter()


@router.post("/eval", response_model=ReportResponse, summary="Run a program under a budget")
def eval_program(request: EvalRequest, base: Settings = Depends(get_checker_session)):
    try:
        commands.parse_budget(request.budget)
    except ParseError as e:
        raise as_http_error(e)
    report = commands.eval_source(
        request.source,
        request.budget,
        request.fuel,
        request.ledger,
        settings_for(base, request),
        request.name,
    )
    return ReportResponse(report=report, exit_code=report.exit_code, text=report_service.render(report))
