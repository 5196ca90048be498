# app/schemas/requests.py

from typing import Literal

from pydantic import BaseModel, Field


class CheckerFlags(BaseModel):
    """Per-request counterparts of the command-line flags."""

    assume_constraints: bool | None = None
    solver: Literal["builtin", "external"] | None = None
    max_enum: int | None = Field(None, gt=0)

    def overrides(self) -> dict:
        return {
            "ASSUME_CONSTRAINTS": self.assume_constraints,
            "SOLVER": self.solver,
            "MAX_ENUM": self.max_enum,
        }


class SourceRequest(CheckerFlags):
    """A .amor program (or, for infer and eval, a single term)."""

    source: str
    name: str = "<request>"


class EvalRequest(SourceRequest):
    budget: str = Field("0", description="Initial budget as an integer or `p/q` rational.")
    fuel: int | None = Field(None, gt=0)
    ledger: bool = False


class EmbedRequest(CheckerFlags):
    """One or more AARA fixtures, each in the shape of a corpus/aara/*.json entry."""

    fixtures: list[dict]
    cost_model: Literal["zero", "unit"] | None = None
