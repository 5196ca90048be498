# app/api/v1/__init__.py

from fastapi import APIRouter
from app.api.v1 import check, corpus, embed, evaluate

api_router = APIRouter()

# --- Checker Endpoints ---
api_router.include_router(check.router, tags=["Typing"])
api_router.include_router(evaluate.router, tags=["Evaluation"])
api_router.include_router(embed.router, tags=["AARA"])

# --- Golden Suite ---
api_router.include_router(corpus.router, tags=["Corpus"])
