# app/schemas/report.py

from typing import Literal

from pydantic import BaseModel, Field

REPORT_SCHEMA_VERSION = "1"

Status = Literal[
    "success",
    "error",
    "parse-error",
    "type-error",
    "constraint-unknown",
    "stuck",
    "fuel",
]

# Exit code for every status; 0 iff success.
EXIT_CODES: dict[str, int] = {
    "success": 0,
    "error": 1,
    "parse-error": 2,
    "type-error": 3,
    "constraint-unknown": 4,
    "stuck": 5,
    "fuel": 6,
}


class TickRow(BaseModel):
    step: int
    amount: str
    budget_after: str


class RunSummary(BaseModel):
    """What one evaluation did with its budget. Rationals are printed as `p/q`."""

    outcome: str
    value: str | None = None
    residual: str | None = None
    stuck_at: str | None = None
    budget: str
    ticks_consumed: str
    ticks_released: str
    peak_usage: str
    steps: int
    ledger: list[TickRow] = []


class ReportItem(BaseModel):
    name: str
    status: Status
    judgement: str | None = None
    wanted: str | None = None
    rules: list[str] = []
    derivation_nodes: int | None = None
    run: RunSummary | None = None
    diagnostics: list[str] = []


class Report(BaseModel):
    """The structured result of one command; field names are stable across releases."""

    schema_version: str = REPORT_SCHEMA_VERSION
    command: str
    source: str | None = None
    status: Status = "success"
    items: list[ReportItem] = []
    diagnostics: list[str] = []
    passed: int = 0
    failed: int = 0

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def add(self, item: ReportItem) -> ReportItem:
        self.items.append(item)
        if item.status == "success":
            self.passed += 1
        else:
            self.failed += 1
            if self.status == "success":
                self.status = item.status
        return item


class ReportResponse(BaseModel):
    report: Report
    exit_code: int = Field(..., ge=0)
    text: str
