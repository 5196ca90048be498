# app/services/internal/external_solver.py

"""
Client for an external arithmetic solver.

One query per request: a JSON body {relation, omega, gamma, lhs, rhs} with
every field rendered in the surface syntax (potentials in simplified normal
form). The response body's first line is `proven` or `unknown <reason>`.
Anything else, including transport failures, counts as Unknown.
"""

import logging

import httpx

from app.core.config import Settings, settings as default_settings
from app.services.internal.potential import simplify
from app.services.internal.render import show_ctx, show_pot
from app.services.internal.solver import EntailmentQuery, Proven, Unknown, Relation
from app.services.internal.syntax import Sub

logger = logging.getLogger(__name__)


def build_payload(q: EntailmentQuery) -> dict:
    return {
        "relation": q.relation.value,
        "omega": show_ctx(q.omega),
        "gamma": show_ctx(q.gamma),
        "lhs": show_pot(simplify(q.lhs)),
        "rhs": show_pot(simplify(q.rhs)),
    }


def parse_verdict(body: str, q: EntailmentQuery) -> Proven | Unknown:
    line = body.strip().splitlines()[0].strip() if body.strip() else ""
    if line == "proven":
        if q.relation is Relation.NONNEG:
            witness = simplify(q.lhs)
        elif q.relation is Relation.GE:
            witness = simplify(Sub(q.lhs, q.rhs))
        else:
            witness = simplify(Sub(q.rhs, q.lhs))
        return Proven(witness)
    if line.startswith("unknown"):
        reason = line[len("unknown") :].strip() or "external solver gave no reason"
        return Unknown(reason)
    return Unknown(f"unrecognized verdict {line!r}")


def solve(q: EntailmentQuery, cfg: Settings | None = None, client: httpx.Client | None = None) -> Proven | Unknown:
    """Posts the query to EXTERNAL_SOLVER_URL and reads the one-line verdict; `client` defaults to a one-off request."""
    cfg = cfg or default_settings
    if cfg.EXTERNAL_SOLVER_URL is None:
        return Unknown("EXTERNAL_SOLVER_URL is not configured")
    try:
        post = client.post if client is not None else httpx.post
        response = post(
            str(cfg.EXTERNAL_SOLVER_URL),
            json=build_payload(q),
            timeout=cfg.EXTERNAL_SOLVER_TIMEOUT,
        )
        response.raise_for_status()
    except httpx.RequestError as e:
        logger.error(f"SOLVER-EXT-FAIL: network error: {e}")
        return Unknown(f"external solver unreachable: {e}")
    except httpx.HTTPStatusError as e:
        logger.error(f"SOLVER-EXT-FAIL: status {e.response.status_code}")
        return Unknown(f"external solver answered {e.response.status_code}")
    return parse_verdict(response.text, q)
