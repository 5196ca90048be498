# app/api/v1/embed.py

import json

from fastapi import APIRouter, Depends

from app.core.config import Settings
from app.core.dependencies import get_checker_session, settings_for
from app.schemas.report import ReportResponse
from app.schemas.requests import EmbedRequest
from app.services.internal import commands, report_service

router = APIRouter()


@router.post("/embed", response_model=ReportResponse, summary="Re-check AARA judgements through the typer")
def embed_fixtures(request: EmbedRequest, base: Settings = Depends(get_checker_session)):
    cfg = settings_for(base, request)
    models = [request.cost_model] if request.cost_model else None
    report = commands.embed_source(json.dumps(request.fixtures), models, cfg)
    return ReportResponse(report=report, exit_code=report.exit_code, text=report_service.render(report))
