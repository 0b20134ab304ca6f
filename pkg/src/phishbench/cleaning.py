"""Budget-constrained corpus cleaning.

Stage 1 removes URL duplicates, records without HTML, and bad-title pages
automatically. Stage 2 groups the survivors two ways (coarse LSH bins over
word-level TF-IDF vectors, then exact title strings), presents one
prototype per group to a decision provider, largest groups first, and
propagates each remove verdict to the cosine-similar group members.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .corpus import Corpus, PageRecord
from .errors import ProviderError
from .htmltools import extract_sections, extract_title, is_bad_title
from .lsh import SignLsh, build_index
from .text_vectors import SparseVector, TfidfEncoder, cosine_similarity
from .urltools import dedup_split

SCHEMES = ("lsh", "title")


@dataclass
class Group:
    scheme: str  # "lsh" or "title"
    key: str
    member_ids: list[str]

    @property
    def size(self) -> int:
        return len(self.member_ids)


@dataclass
class Decision:
    prototype_id: str
    verdict: str  # "keep" | "remove"
    annotator: str = "scripted"
    timestamp: str = ""

    def to_dict(self) -> dict:
        return {"prototype_sha256": self.prototype_id, "verdict": self.verdict,
                "annotator": self.annotator, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, obj: dict) -> "Decision":
        return cls(prototype_id=obj["prototype_sha256"], verdict=obj["verdict"],
                   annotator=obj.get("annotator", ""), timestamp=obj.get("timestamp", ""))


@dataclass
class PrototypeContext:
    """What the annotator sees for one decision."""

    scheme: str
    group_key: str
    group_size: int
    record: PageRecord
    neighbor_ids: list[str]  # members a remove verdict would also drop
    budget_remaining: int

    @property
    def title(self) -> str | None:
        return extract_title(self.record.html)


@dataclass
class CleanReport:
    removed_ids: set = field(default_factory=set)
    inspected: dict = field(default_factory=lambda: {s: 0 for s in SCHEMES})
    auto_removed: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    decisions: list = field(default_factory=list)
    removed_by_scheme: dict = field(default_factory=lambda: {s: set() for s in SCHEMES})
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "removed_ids": sorted(self.removed_ids),
            "inspected": dict(self.inspected),
            "auto_removed": dict(self.auto_removed),
            "budget": dict(self.budget),
            "complete": self.complete,
            "decisions": [d.to_dict() for d in self.decisions],
        }


def cleaning_text(record: PageRecord) -> str:
    """Document fed to the cleaning-stage vectorizer: visible text plus title."""
    sections = extract_sections(record.html)
    title = extract_title(record.html) or ""
    return (sections.visible_text + " " + title).strip()


def auto_filter(corpus: Corpus, keywords: Iterable[str] | None = None) -> tuple[Corpus, dict]:
    """Stage-1 automated filtering.

    Reason counts are taken over the full input, so a record failing several
    filters appears in several counts.
    """
    keywords = tuple(keywords) if keywords is not None else None
    _, dup_removed = dedup_split(corpus)
    dup_positions = {id(rec) for rec in dup_removed}
    reasons = {"url_dup": len(dup_removed), "html_missing": 0, "bad_title": 0}
    kept = []
    for rec in corpus:
        bad = id(rec) in dup_positions
        if not rec.html:
            reasons["html_missing"] += 1
            bad = True
        else:
            title = extract_title(rec.html)
            if title is not None and is_bad_title(title, keywords):
                reasons["bad_title"] += 1
                bad = True
        if not bad:
            kept.append(rec)
    return Corpus(kept, source=corpus.source), reasons


def group_by_lsh(corpus: Corpus, index: SignLsh) -> list[Group]:
    """Groups from the first signature table, largest first."""
    groups = [Group("lsh", format(sig, "x"), sorted(set(members)))
              for sig, members in index.table_groups(0).items()]
    groups.sort(key=lambda g: (-g.size, g.key))
    return groups


def group_by_title(corpus: Corpus) -> list[Group]:
    """Groups keyed on the exact extracted title; untitled records form none."""
    by_title: dict[str, list[str]] = {}
    for sha in corpus.ids():
        title = extract_title(corpus.get(sha).html)
        if title is not None and title != "":
            by_title.setdefault(title, []).append(sha)
    groups = [Group("title", title, sorted(set(members)))
              for title, members in by_title.items()]
    groups.sort(key=lambda g: (-g.size, g.key))
    return groups


def select_prototype(group: Group, vectors: dict[str, SparseVector]) -> str:
    """The medoid: member with the highest mean cosine similarity to the
    group, ties broken by smallest sha256."""
    if not group.member_ids:
        raise ValueError("empty group")
    if group.size == 1:
        return group.member_ids[0]
    best_id, best_score = None, None
    for sha in sorted(group.member_ids):
        vec = vectors[sha]
        score = sum(cosine_similarity(vec, vectors[other])
                    for other in group.member_ids if other != sha) / (group.size - 1)
        if best_score is None or score > best_score + 1e-12:
            best_id, best_score = sha, score
    return best_id


class DecisionJournal:
    """Append-only JSONL log of decisions; the source of truth for resume."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, decision: Decision) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision.to_dict(), ensure_ascii=False) + "\n")

    def load(self) -> list[Decision]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                out.append(Decision.from_dict(json.loads(line)))
        return out

    def __len__(self) -> int:
        return len(self.load())


class TriageEngine:
    """Single-pass triage over both grouping schemes with per-scheme budgets.

    One logical decision stream: prototypes are presented one at a time in a
    fixed order (scheme, then group size descending), and each verdict is
    applied before the next prototype is computed. Groups whose members were
    all removed by earlier decisions are skipped without spending budget.
    """

    def __init__(self, corpus: Corpus, vectors: dict[str, SparseVector],
                 groups: dict[str, list[Group]], budgets: dict[str, int],
                 propagate_sim: float = 0.90):
        self.corpus = corpus
        self.vectors = vectors
        self.groups = groups
        self.budgets = dict(budgets)
        self.propagate_sim = propagate_sim
        self.removed: set[str] = set()
        self.report = CleanReport(budget=dict(budgets))
        self._cursor = {scheme: 0 for scheme in SCHEMES}
        self._pending: PrototypeContext | None = None

    def _neighbors(self, group: Group, prototype: str) -> list[str]:
        proto_vec = self.vectors[prototype]
        out = []
        for sha in group.member_ids:
            if sha == prototype:
                continue
            if cosine_similarity(proto_vec, self.vectors[sha]) >= self.propagate_sim:
                out.append(sha)
        return out

    def next(self) -> PrototypeContext | None:
        """The head-of-queue prototype, or None when every budget is spent."""
        if self._pending is not None:
            return self._pending
        for scheme in SCHEMES:
            budget_left = self.budgets[scheme] - self.report.inspected[scheme]
            while budget_left > 0 and self._cursor[scheme] < len(self.groups[scheme]):
                group = self.groups[scheme][self._cursor[scheme]]
                live = [sha for sha in group.member_ids if sha not in self.removed]
                if not live:
                    self._cursor[scheme] += 1
                    continue
                live_group = Group(group.scheme, group.key, live)
                prototype = select_prototype(live_group, self.vectors)
                self._pending = PrototypeContext(
                    scheme=scheme,
                    group_key=group.key,
                    group_size=len(live),
                    record=self.corpus.get(prototype),
                    neighbor_ids=self._neighbors(live_group, prototype),
                    budget_remaining=budget_left,
                )
                return self._pending
        return None

    def apply(self, verdict: str, annotator: str = "scripted", timestamp: str = "") -> set:
        """Record the verdict for the pending prototype; returns newly removed ids."""
        if self._pending is None:
            raise RuntimeError("no pending prototype")
        if verdict not in ("keep", "remove"):
            raise ValueError(f"verdict must be 'keep' or 'remove', got {verdict!r}")
        ctx = self._pending
        self._pending = None
        self._cursor[ctx.scheme] += 1
        self.report.inspected[ctx.scheme] += 1
        decision = Decision(ctx.record.sha256, verdict, annotator, timestamp)
        self.report.decisions.append(decision)
        newly: set[str] = set()
        if verdict == "remove":
            newly = ({ctx.record.sha256} | set(ctx.neighbor_ids)) - self.removed
            self.removed.update(newly)
            self.report.removed_by_scheme[ctx.scheme].update(newly)
            self.report.removed_ids.update(newly)
        return newly

    def budget_remaining(self) -> dict[str, int]:
        return {s: self.budgets[s] - self.report.inspected[s] for s in SCHEMES}

    def finish(self) -> CleanReport:
        return self.report


def build_engine(corpus: Corpus, budgets: dict[str, int], propagate_sim: float = 0.90,
                 n_bits: int = 16, seed: int = 0,
                 keywords: Iterable[str] | None = None) -> tuple[TriageEngine, Corpus, dict]:
    """Run stage 1, vectorize, group both ways, and return a ready engine."""
    filtered, auto_counts = auto_filter(corpus, keywords)
    ids = filtered.ids()
    docs = [cleaning_text(filtered.get(sha)) for sha in ids]
    if ids and any(docs):
        encoder = TfidfEncoder(tokenization="words").fit(docs)
        vectors = {sha: encoder.transform_one(doc) for sha, doc in zip(ids, docs)}
        index = build_index([vectors[sha] for sha in ids], n_bits=n_bits,
                            n_tables=1, seed=seed, ids=ids)
        lsh_groups = group_by_lsh(filtered, index)
    else:
        vectors = {sha: SparseVector({}, 1) for sha in ids}
        lsh_groups = []
    groups = {"lsh": lsh_groups, "title": group_by_title(filtered)}
    engine = TriageEngine(filtered, vectors, groups, budgets, propagate_sim)
    engine.report.auto_removed = auto_counts
    return engine, filtered, auto_counts


def run_cleaning(corpus: Corpus, budget: int,
                 decisions: Callable[[PrototypeContext], str],
                 propagate_sim: float = 0.90, *,
                 budget_lsh: int | None = None, budget_title: int | None = None,
                 n_bits: int = 16, seed: int = 0,
                 keywords: Iterable[str] | None = None,
                 journal: DecisionJournal | None = None) -> tuple[Corpus, CleanReport]:
    """Full cleaning pass: stage-1 auto filter, then budgeted triage.

    ``decisions`` maps a PrototypeContext to "keep" or "remove"; a scripted
    callable makes the run deterministic. Provider failure aborts with a
    partial report flagged incomplete.
    """
    budgets = {"lsh": budget if budget_lsh is None else budget_lsh,
               "title": budget if budget_title is None else budget_title}
    engine, filtered, _ = build_engine(corpus, budgets, propagate_sim,
                                       n_bits=n_bits, seed=seed, keywords=keywords)
    replay = {d.prototype_id: d for d in journal.load()} if journal is not None else {}
    while True:
        ctx = engine.next()
        if ctx is None:
            break
        past = replay.get(ctx.record.sha256)
        if past is not None:
            engine.apply(past.verdict, past.annotator, past.timestamp)
            continue
        try:
            verdict = decisions(ctx)
        except Exception as exc:
            engine.report.complete = False
            err = ProviderError(f"decision provider failed on {ctx.record.sha256}: {exc}")
            err.partial_report = engine.finish()
            raise err from exc
        engine.apply(verdict)
        if journal is not None:
            journal.append(engine.report.decisions[-1])
    report = engine.finish()
    cleaned = Corpus([r for r in filtered if r.sha256 not in report.removed_ids],
                     source=corpus.source)
    return cleaned, report


# --- quality audit ----------------------------------------------------------

_CLASSES = ("phishing", "benign")


@dataclass
class QualityReport:
    """Per-class, per-stage removal accounting with remaining-size bounds."""

    initial: dict
    stage1: dict           # reason -> per-class counts
    after_stage1: dict
    stage2: dict           # scheme -> per-class counts
    after_stage2: dict
    total_removed: dict
    rejection_rate: dict   # removed / initial, per class
    lower_bound: dict      # after_stage2 * (1 - rejection_rate)
    upper_bound: dict      # after_stage2

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "stage1": self.stage1,
            "after_stage1": self.after_stage1,
            "stage2": self.stage2,
            "after_stage2": self.after_stage2,
            "total_removed": self.total_removed,
            "rejection_rate": self.rejection_rate,
            "estimated_lower_bound": self.lower_bound,
            "estimated_upper_bound": self.upper_bound,
        }

    def to_table(self) -> str:
        def row(step, counts, pct=False):
            if pct:
                cells = [f"{counts.get(c, 0) * 100:.2f}%" for c in _CLASSES + ("total",)]
            else:
                cells = [f"{counts.get(c, 0):,}" for c in _CLASSES + ("total",)]
            return f"{step:<28}" + "".join(f"{cell:>14}" for cell in cells)

        lines = [
            f"{'Step':<28}{'Phish':>14}{'Benign':>14}{'Total':>14}",
            "Stage 0: Initial Size",
            row("Initial Size", self.initial),
            "Stage 1: Automated Filtering",
            row("URL Duplicates", self.stage1["url_dup"]),
            row("HTML Missing", self.stage1["html_missing"]),
            row("Bad Title", self.stage1["bad_title"]),
            row("After Stage 1", self.after_stage1),
            "Stage 2: Manual Inspection",
            row("LSH Rejections", self.stage2["lsh"]),
            row("Title Rejections", self.stage2["title"]),
            row("After Stage 2", self.after_stage2),
            row("Total Removed", self.total_removed),
            row("Rejection Rate (%)", self.rejection_rate, pct=True),
            row("Est. Remaining (upper)", self.upper_bound),
            row("Est. Remaining (lower)", self.lower_bound),
        ]
        return "\n".join(lines)


def _by_class(records: Iterable[PageRecord]) -> dict:
    counts = {c: 0 for c in _CLASSES}
    for rec in records:
        if rec.label in counts:
            counts[rec.label] += 1
    counts["total"] = sum(counts[c] for c in _CLASSES)
    return counts


def _ids_by_class(corpus: Corpus, ids: Iterable[str]) -> dict:
    labels = corpus.labels()
    counts = {c: 0 for c in _CLASSES}
    for sha in ids:
        label = labels.get(sha)
        if label in counts:
            counts[label] += 1
    counts["total"] = sum(counts[c] for c in _CLASSES)
    return counts


def audit_rejection_rate(corpus: Corpus, budget_lsh: int, budget_title: int,
                         decisions: Callable[[PrototypeContext], str],
                         propagate_sim: float = 0.90, n_bits: int = 16, seed: int = 0,
                         keywords: Iterable[str] | None = None) -> QualityReport:
    """Two-stage pipeline audit using rejection rates as the quality proxy.

    The upper remaining-size bound assumes the uninspected remainder is
    clean; the lower bound scales it by the observed rejection rate.
    """
    initial = _by_class(corpus)

    # stage-1 per-reason, per-class counts (overlaps allowed, as in auto_filter)
    kw = tuple(keywords) if keywords is not None else None
    _, dup_removed = dedup_split(corpus)
    bad_titled = []
    for rec in corpus:
        if rec.html:
            title = extract_title(rec.html)
            if title is not None and is_bad_title(title, kw):
                bad_titled.append(rec)
    stage1 = {"url_dup": _by_class(dup_removed),
              "html_missing": _by_class([r for r in corpus if not r.html]),
              "bad_title": _by_class(bad_titled)}

    cleaned, report = run_cleaning(corpus, 0, decisions, propagate_sim,
                                   budget_lsh=budget_lsh, budget_title=budget_title,
                                   n_bits=n_bits, seed=seed, keywords=keywords)
    filtered, _ = auto_filter(corpus, keywords)
    after_stage1 = _by_class(filtered)
    stage2 = {scheme: _ids_by_class(corpus, report.removed_by_scheme[scheme])
              for scheme in SCHEMES}
    after_stage2 = _by_class(cleaned)

    total_removed = {c: initial[c] - after_stage2[c] for c in _CLASSES}
    total_removed["total"] = sum(total_removed[c] for c in _CLASSES)
    rate = {c: (total_removed[c] / initial[c]) if initial[c] else 0.0 for c in _CLASSES}
    rate["total"] = (total_removed["total"] / initial["total"]) if initial["total"] else 0.0
    lower = {c: int(round(after_stage2[c] * (1 - rate[c]))) for c in _CLASSES}
    lower["total"] = sum(lower[c] for c in _CLASSES)

    return QualityReport(
        initial=initial,
        stage1=stage1,
        after_stage1=after_stage1,
        stage2=stage2,
        after_stage2=after_stage2,
        total_removed=total_removed,
        rejection_rate=rate,
        lower_bound=lower,
        upper_bound=dict(after_stage2),
    )
