# app/services/internal/report_service.py

import logging
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.schemas.report import Report

logger = logging.getLogger(__name__)

# --- Initialization ---

template_loader = FileSystemLoader(searchpath=str(Path(__file__).resolve().parents[2] / "templates" / "reports"))
template_env = Environment(
    loader=template_loader,
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


# --- Rendering ---


def render_text(report: Report) -> str:
    """The human-readable structured-text form of a report."""
    template = template_env.get_template("report.txt")
    return template.render(report=report, exit_code=report.exit_code)


def render_json(report: Report) -> str:
    return report.model_dump_json(indent=2) + "\n"


def render(report: Report, as_json: bool = False) -> str:
    if as_json:
        return render_json(report)
    try:
        return render_text(report)
    except Exception as e:
        # The JSON form has no template to go wrong.
        logger.error(f"REPORT-FAIL: could not render the text report: {e}", exc_info=True)
        return render_json(report)
