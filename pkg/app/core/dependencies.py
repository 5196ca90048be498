# app/core/dependencies.py

from fastapi import HTTPException, status

from app.core.config import Settings, settings
from app.core.errors import AmornaError
from app.schemas.requests import CheckerFlags
from app.services.internal.syntax import new_session


def get_checker_session() -> Settings:
    """
    Dependency giving each request its own naming session.

    Returns the process settings; routers layer the request's flags on top
    with `settings_for`.
    """
    new_session()
    return settings


def settings_for(base: Settings, flags: CheckerFlags) -> Settings:
    return base.with_overrides(**flags.overrides())


def as_http_error(e: AmornaError) -> HTTPException:
    """Checker failures that stop a request before a report exists."""
    return HTTPException(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        detail={"code": e.code, "detail": e.detail},
    )
