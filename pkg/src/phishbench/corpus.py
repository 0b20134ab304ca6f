"""Canonical data model and JSONL I/O for labeled web-page records.

One record per line, keys: sha256, url, label, target, date, lang,
lang_score, html. Unknown keys are preserved on round-trip; optional keys
may be absent.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyCorpusError

LABELS = ("phishing", "benign")

_KNOWN_KEYS = ("sha256", "url", "label", "target", "date", "lang", "lang_score", "html")
_HEX64 = re.compile(r"^[0-9a-f]{64}$")


@dataclass
class PageRecord:
    """One labeled web page."""

    sha256: str
    url: str
    label: str
    date: str  # ISO-8601 calendar date, e.g. "2025-03-02"
    html: str
    target: str | None = None
    lang: str | None = None
    lang_score: float | None = None
    extra: dict = field(default_factory=dict)

    def date_value(self) -> _dt.date:
        return _dt.date.fromisoformat(self.date)

    def to_dict(self) -> dict:
        out = {"sha256": self.sha256, "url": self.url, "label": self.label}
        if self.target is not None:
            out["target"] = self.target
        out["date"] = self.date
        if self.lang is not None:
            out["lang"] = self.lang
        if self.lang_score is not None:
            out["lang_score"] = self.lang_score
        out["html"] = self.html
        for k in sorted(self.extra):
            out[k] = self.extra[k]
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "PageRecord":
        extra = {k: v for k, v in obj.items() if k not in _KNOWN_KEYS}
        return cls(
            sha256=obj["sha256"],
            url=obj["url"],
            label=obj["label"],
            date=obj["date"],
            html=obj.get("html", ""),
            target=obj.get("target"),
            lang=obj.get("lang"),
            lang_score=obj.get("lang_score"),
            extra=extra,
        )


@dataclass(frozen=True)
class Violation:
    """A named invariant breach on a single record."""

    field: str
    rule: str
    message: str
    sha256: str | None = None
    line: int | None = None


def content_hash(html: str) -> str:
    return hashlib.sha256(html.encode("utf-8")).hexdigest()


def validate_record(record: PageRecord) -> list[Violation]:
    """Check every record invariant; empty list iff all hold.

    Deterministic and side-effect-free.
    """
    out: list[Violation] = []
    sha = record.sha256
    if not isinstance(sha, str) or not _HEX64.match(sha or ""):
        out.append(Violation("sha256", "hash-format", "sha256 is not a 64-char lowercase hex string", sha))
    elif sha != content_hash(record.html):
        out.append(Violation("sha256", "hash-mismatch", "sha256 does not match hash of html", sha))
    if not record.url:
        out.append(Violation("url", "url-empty", "url is empty", sha))
    if record.label not in LABELS:
        out.append(Violation("label", "label-domain", f"label {record.label!r} not in {LABELS}", sha))
    try:
        record.date_value()
    except (ValueError, TypeError):
        out.append(Violation("date", "date-parse", f"date {record.date!r} is not an ISO-8601 date", sha))
    if not record.html:
        out.append(Violation("html", "html-empty", "html is empty", sha))
    if record.lang_score is not None and not (0.0 <= record.lang_score <= 1.0):
        out.append(Violation("lang_score", "lang_score-range", "lang_score outside [0, 1]", sha))
    return out


def _structurally_loadable(obj: dict) -> Violation | None:
    """Gate applied at ingest.

    Records missing required keys, with an out-of-domain label, or with an
    unparseable date cannot move through the pipeline and are dropped.
    Content-hash problems and empty html are reported by validate_record /
    removed by the stage-1 auto filter, not here: published datasets ship
    truncated or recomputed hashes, and html-missing rows are a counted
    cleaning category.
    """
    for key in ("sha256", "url", "label", "date"):
        if not isinstance(obj.get(key), str) or not obj.get(key):
            return Violation(key, f"{key}-missing", f"required key {key!r} missing or empty")
    if "html" not in obj:
        return Violation("html", "html-missing", "required key 'html' missing")
    if obj["label"] not in LABELS:
        return Violation("label", "label-domain", f"label {obj['label']!r} not in {LABELS}", obj["sha256"])
    try:
        _dt.date.fromisoformat(obj["date"])
    except ValueError:
        return Violation("date", "date-parse", f"date {obj['date']!r} is not an ISO-8601 date", obj["sha256"])
    return None


class Corpus:
    """Ordered, immutable-after-load collection of PageRecords.

    Record identity for pipeline bookkeeping is the sha256 content hash;
    distinct URLs serving byte-identical HTML share an id and move through
    splits together.
    """

    def __init__(self, records: Iterable[PageRecord], source: str | None = None):
        self.records: list[PageRecord] = list(records)
        self.source = source
        self.violations: list[Violation] = []
        self._by_id: dict[str, PageRecord] | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PageRecord]:
        return iter(self.records)

    def _index(self) -> dict[str, PageRecord]:
        if self._by_id is None:
            by_id: dict[str, PageRecord] = {}
            for rec in self.records:
                by_id.setdefault(rec.sha256, rec)
            self._by_id = by_id
        return self._by_id

    def ids(self) -> list[str]:
        seen = set()
        out = []
        for rec in self.records:
            if rec.sha256 not in seen:
                seen.add(rec.sha256)
                out.append(rec.sha256)
        return out

    def get(self, sha256: str) -> PageRecord:
        return self._index()[sha256]

    def __contains__(self, sha256: str) -> bool:
        return sha256 in self._index()

    def labels(self) -> dict[str, str]:
        return {sha: rec.label for sha, rec in self._index().items()}

    def subset(self, ids: Iterable[str]) -> "Corpus":
        wanted = set(ids)
        return Corpus([r for r in self.records if r.sha256 in wanted], source=self.source)


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a JSONL corpus; per-record violations are collected on the result.

    Raises EmptyCorpusError when no record survives the structural gate.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    path = Path(path)
    records: list[PageRecord] = []
    violations: list[Violation] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                violations.append(Violation("", "json-parse", f"line {lineno}: {exc}", line=lineno))
                continue
            if not isinstance(obj, dict):
                violations.append(Violation("", "json-shape", f"line {lineno}: not an object", line=lineno))
                continue
            gate = _structurally_loadable(obj)
            if gate is not None:
                violations.append(Violation(gate.field, gate.rule, f"line {lineno}: {gate.message}",
                                            gate.sha256, lineno))
                continue
            rec = PageRecord.from_dict(obj)
            violations.extend(v for v in validate_record(rec)
                              if v.rule in ("hash-format", "hash-mismatch", "lang_score-range"))
            records.append(rec)
    if not records:
        raise EmptyCorpusError(f"no valid records in {path}")
    corpus = Corpus(records, source=str(path))
    corpus.violations = violations
    return corpus


def write_corpus(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    """Write records one JSON object per line; load(write(c)) == c record-wise."""
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in corpus:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False))
            fh.write("\n")
