"""HTTP facade over the triage decision stream.

One session per process; decisions are applied strictly in request order
behind a lock (head-of-queue protocol: a POST must name the currently
presented prototype). The journal is the source of truth, so a restarted
service replays it and resumes at the identical queue position. Page
previews are sanitized server-side and served under a deny-all CSP.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse, Response
from pydantic import BaseModel

from .cleaning import DecisionJournal, TriageEngine, build_engine
from .config import PipelineConfig
from .corpus import Corpus
from .htmltools import extract_title, load_keywords, sanitize_html

_CSP = ("default-src 'none'; img-src data:; style-src 'unsafe-inline'; "
        "form-action 'none'; base-uri 'none'")


class DecisionBody(BaseModel):
    prototype_sha256: str
    verdict: str
    annotator: str = "ui"


class TriageSession:
    """Engine + journal + lock; replays the journal on construction."""

    def __init__(self, corpus: Corpus, engine: TriageEngine, journal: DecisionJournal):
        self.corpus = corpus
        self.engine = engine
        self.journal = journal
        self.lock = threading.Lock()
        for decision in journal.load():
            ctx = engine.next()
            if ctx is None:
                break
            if ctx.record.sha256 != decision.prototype_id:
                raise ValueError(
                    f"journal out of sync: expected {ctx.record.sha256}, "
                    f"journal has {decision.prototype_id}")
            engine.apply(decision.verdict, decision.annotator, decision.timestamp)

    @classmethod
    def from_config(cls, corpus: Corpus, config: PipelineConfig,
                    journal_path: str) -> "TriageSession":
        keywords = (load_keywords(config.cleaning["keywords_file"])
                    if config.cleaning.get("keywords_file") else None)
        engine, _, _ = build_engine(
            corpus,
            {"lsh": config.cleaning["budget_lsh"],
             "title": config.cleaning["budget_title"]},
            propagate_sim=config.cleaning["propagate_sim"],
            n_bits=config.cleaning["n_bits"], seed=config.seed, keywords=keywords)
        return cls(engine.corpus, engine, DecisionJournal(journal_path))


def create_app(session: TriageSession, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="triage console api")
    app.state.session = session

    @app.get("/api/queue/next")
    def queue_next():
        with session.lock:
            ctx = session.engine.next()
            if ctx is None:
                return Response(status_code=204)
            record = ctx.record
            return {
                "prototype": {
                    "sha256": record.sha256,
                    "url": record.url,
                    "title": extract_title(record.html),
                    "group_scheme": ctx.scheme,
                    "group_size": ctx.group_size,
                    "neighbor_count": len(ctx.neighbor_ids),
                },
                "budget_remaining": ctx.budget_remaining,
            }

    @app.post("/api/decision")
    def decide(body: DecisionBody):
        if body.verdict not in ("keep", "remove"):
            return JSONResponse(status_code=422, content={
                "error": f"verdict must be 'keep' or 'remove', got {body.verdict!r}"})
        with session.lock:
            ctx = session.engine.next()
            if ctx is None:
                return JSONResponse(status_code=409,
                                    content={"error": "no pending prototype"})
            if ctx.record.sha256 != body.prototype_sha256:
                return JSONResponse(status_code=409, content={
                    "error": "stale prototype",
                    "expected": ctx.record.sha256})
            newly = session.engine.apply(body.verdict, annotator=body.annotator)
            session.journal.append(session.engine.report.decisions[-1])
            remaining = session.engine.budget_remaining()
            return {"removed_count": len(newly),
                    "budget_remaining": remaining[ctx.scheme]}

    @app.get("/api/page/{sha256}")
    def page(sha256: str):
        if sha256 not in session.corpus:
            return JSONResponse(status_code=404, content={"error": "unknown page"})
        sanitized = sanitize_html(session.corpus.get(sha256).html)
        return HTMLResponse(content=sanitized,
                            headers={"Content-Security-Policy": _CSP,
                                     "X-Content-Type-Options": "nosniff"})

    @app.get("/api/progress")
    def progress():
        with session.lock:
            report = session.engine.report
            inspected = sum(report.inspected.values())
            removed = len(report.removed_ids)
            total = len(session.corpus) or 1
            return {
                "inspected": inspected,
                "inspected_by_scheme": dict(report.inspected),
                "removed_total": removed,
                "budget_per_scheme": dict(session.engine.budgets),
                "budget_remaining": session.engine.budget_remaining(),
                "rejection_rate_so_far": removed / total,
                "auto_removed": dict(report.auto_removed),
                "done": session.engine.next() is None,
            }

    if static_dir and Path(static_dir).is_dir():
        static_root = Path(static_dir)

        @app.get("/")
        def index():
            return FileResponse(static_root / "index.html")

        @app.get("/assets/{name}")
        def asset(name: str):
            target = (static_root / "assets" / name).resolve()
            if not str(target).startswith(str((static_root / "assets").resolve())) \
                    or not target.is_file():
                return JSONResponse(status_code=404, content={"error": "not found"})
            return FileResponse(target)

    return app


def default_static_dir() -> Path | None:
    """Built triage console assets, when the frontend has been compiled."""
    root = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return root if root.is_dir() else None


def serve_cleaning(corpus: Corpus, config: PipelineConfig, port: int = 8400,
                   journal_path: str = "journal.jsonl") -> None:
    """Blocking server for an interactive cleaning session."""
    import uvicorn

    session = TriageSession.from_config(corpus, config, journal_path)
    app = create_app(session, static_dir=default_static_dir())
    print(f"triage console on http://127.0.0.1:{port}/ "
          f"(journal: {journal_path})")
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
