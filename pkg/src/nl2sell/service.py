"""HTTP service backing the targeting panel.

Stateless JSON endpoints: the card under edit lives in the client, the
server only translates, parses, prints, validates, ranks tags, selects
users and evaluates. Error statuses: 400 for validation problems, 422 for
SELL parse failures, 502 for model/embedding backend failures.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import __version__
from .config import AppConfig, make_backend, make_embedder
from .gateway import CompletionRequest, GatewayError
from .metrics import LengthMismatchError, evaluate_items
from .prompts import build_predict_prompt, load_instructions
from .retrieval import (
    EmptyCatalogError,
    EmptyLibraryError,
    TagIndex,
    load_library,
    top_n_tags,
)
from .catalog import load_catalog
from .sell.cards import CardError, CardNode, from_card, to_card
from .sell.parser import SellParseError, find_sell, parse
from .sell.printer import extract_structure, print_sell
from .sell.validation import validate
from .targeting import (
    SegmentValidationError,
    TypeMismatchError,
    load_user_db,
    render_segment,
    select_users,
)


class DemandBody(BaseModel):
    demand: str


class SellBody(BaseModel):
    sell: str


class CardBody(BaseModel):
    card: dict


class ExportBody(BaseModel):
    sell: str
    format: str = "csv"


class EvaluateBody(BaseModel):
    predictions: list
    references: list
    demands: Optional[list] = None
    ids: Optional[list] = None


def _error(status: int, code: str, message: str, path=None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "path": path},
    )


def create_app(config: AppConfig) -> FastAPI:
    catalog = load_catalog(config.paths.catalog) if config.paths.catalog else None
    if catalog is None:
        raise ValueError("service requires paths.catalog")
    library = load_library(config.paths.library) if config.paths.library else None
    user_db = load_user_db(config.paths.user_db, catalog) if config.paths.user_db else None
    embedder = make_embedder(config)
    backend = make_backend(config)
    instructions = load_instructions(config.paths.templates)
    tag_index = TagIndex(catalog, embedder)

    app = FastAPI(title="nl2sell", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(SellParseError)
    async def _parse_error(request: Request, exc: SellParseError):
        return _error(422, type(exc).__name__, str(exc), path=getattr(exc, "position", None))

    @app.exception_handler(CardError)
    async def _card_error(request: Request, exc: CardError):
        return _error(400, "CardError", str(exc))

    @app.exception_handler(SegmentValidationError)
    async def _segment_error(request: Request, exc: SegmentValidationError):
        return _error(400, "ValidationFailed", str(exc),
                      path=[i.to_json_obj() for i in exc.report.issues])

    @app.exception_handler(TypeMismatchError)
    async def _type_error(request: Request, exc: TypeMismatchError):
        return _error(400, "TypeMismatch", str(exc))

    @app.exception_handler(LengthMismatchError)
    async def _length_error(request: Request, exc: LengthMismatchError):
        return _error(400, "LengthMismatch", str(exc))

    @app.exception_handler(GatewayError)
    async def _gateway_error(request: Request, exc: GatewayError):
        return _error(502, type(exc).__name__, str(exc))

    @app.exception_handler(EmptyLibraryError)
    async def _library_error(request: Request, exc: EmptyLibraryError):
        return _error(400, "EmptyLibrary", str(exc))

    @app.exception_handler(EmptyCatalogError)
    async def _catalog_error(request: Request, exc: EmptyCatalogError):
        return _error(400, "EmptyCatalog", str(exc))

    @app.post("/v1/translate")
    def translate(body: DemandBody):
        if library is None:
            return _error(400, "NoLibrary", "service has no reasoning library configured")
        bundle = build_predict_prompt(
            body.demand, library, catalog, embedder, instructions,
            k=config.retrieval.k, n=config.retrieval.n, tag_index=tag_index)
        result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=config.llm.model))
        expr = find_sell(result.text)
        if expr is None:
            return _error(422, "CompletionUnparseable",
                          f"model completion contains no SELL expression: {result.text[:120]!r}")
        report = validate(expr, catalog)
        return {
            "sell": print_sell(expr),
            "card": to_card(expr).to_json_obj(),
            "validation": report.to_json_obj(),
            "prompt_provenance": bundle.provenance,
        }

    @app.post("/v1/parse")
    def parse_sell(body: SellBody):
        expr = parse(body.sell)
        return {"card": to_card(expr).to_json_obj()}

    @app.post("/v1/print")
    def print_card(body: CardBody):
        expr = from_card(CardNode.from_json_obj(body.card))
        return {"sell": print_sell(expr)}

    @app.post("/v1/validate")
    def validate_sell(body: SellBody):
        expr = parse(body.sell)
        return validate(expr, catalog).to_json_obj()

    @app.post("/v1/structure")
    def structure(body: SellBody):
        return {"skeleton": extract_structure(body.sell)}

    @app.get("/v1/tags/search")
    def tags_search(q: str = Query(default=""), n: Optional[int] = Query(default=None)):
        obj = catalog.to_json_obj()
        by_name = {t["name"]: t for t in obj}
        if not q.strip():
            tags = obj if n is None else obj[:n]
        else:
            limit = n if n is not None else config.retrieval.n
            names = top_n_tags(q, limit, catalog, embedder, index=tag_index)
            tags = [by_name[name] for name in names]
        return {"tags": tags}

    @app.post("/v1/select-users")
    def select(body: SellBody):
        if user_db is None:
            return _error(400, "NoUserDb", "service has no user database configured")
        expr = parse(body.sell)
        ids = select_users(expr, user_db)
        return {"user_ids": ids, "count": len(ids)}

    @app.post("/v1/export")
    def export(body: ExportBody):
        if user_db is None:
            return _error(400, "NoUserDb", "service has no user database configured")
        if body.format not in ("csv", "json"):
            return _error(400, "BadFormat", f"unknown export format {body.format!r}")
        expr = parse(body.sell)
        ids = select_users(expr, user_db)
        content = render_segment(ids, body.format)
        media = "text/csv" if body.format == "csv" else "application/json"
        return Response(
            content=content,
            media_type=media,
            headers={"Content-Disposition": f"attachment; filename=segment.{body.format}"},
        )

    @app.post("/v1/evaluate")
    def evaluate(body: EvaluateBody):
        if len(body.predictions) != len(body.references):
            raise LengthMismatchError(
                f"{len(body.predictions)} predictions vs {len(body.references)} references")
        if not body.predictions:
            return _error(400, "EmptyEvaluation", "nothing to evaluate")
        count = len(body.predictions)
        ids = body.ids if body.ids is not None else [f"item-{i + 1}" for i in range(count)]
        demands = body.demands if body.demands is not None else [""] * count
        if len(ids) != count or len(demands) != count:
            return _error(400, "LengthMismatch", "ids/demands length differs from predictions")
        report = evaluate_items(list(zip(ids, demands, body.predictions, body.references)))
        return report.to_json_obj()

    @app.get("/v1/health")
    def health():
        return {
            "ok": True,
            "version": __version__,
            "backends": {
                "llm": backend.backend_id,
                "embedder": embedder.version,
                "library_entries": len(library) if library is not None else 0,
                "users": len(user_db) if user_db is not None else 0,
                "tags": len(catalog),
            },
        }

    return app
