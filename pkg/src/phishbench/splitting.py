"""Stratified temporal train/test partition with near-duplicate leakage filtering.

Per class, records are ordered by (date, sha256) and the earliest
floor((1-p)*n) go to train, so the test slice is strictly later in time;
the temporal boundary may differ between classes. Test candidates whose
word-level TF-IDF vector lies within cosine distance tau of any LSH-retrieved
train candidate are dropped. The no-leakage guarantee is relative to LSH
recall; exact mode performs a full scan instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cleaning import cleaning_text
from .corpus import Corpus
from .errors import PhishbenchError
from .lsh import SignLsh, build_index
from .text_vectors import SparseVector, TfidfEncoder, cosine_distance


class SplitError(PhishbenchError, ValueError):
    pass


@dataclass
class SplitResult:
    train_ids: set
    test_ids: set
    dropped_for_leakage: set
    params: dict = field(default_factory=dict)


def temporal_split(corpus: Corpus, p: float) -> tuple[set, set]:
    """Per class: sort by (date, sha256); first floor((1-p)*n) ids -> train,
    rest -> test candidates. p is the test fraction."""
    if not (0 < p < 1):
        raise SplitError(f"p must be in (0, 1), got {p}")
    labels = corpus.labels()
    for sha, rec in ((s, corpus.get(s)) for s in corpus.ids()):
        try:
            rec.date_value()
        except ValueError as exc:
            raise SplitError(f"record {sha} has unparseable date {rec.date!r}") from exc
    train: set = set()
    test: set = set()
    for cls in sorted(set(labels.values())):
        ordered = sorted((sha for sha, lab in labels.items() if lab == cls),
                         key=lambda sha: (corpus.get(sha).date, sha))
        n_train = int((1 - p) * len(ordered))
        if n_train == 0:
            raise SplitError(f"train slice for class {cls!r} is empty "
                             f"(n={len(ordered)}, p={p})")
        train.update(ordered[:n_train])
        test.update(ordered[n_train:])
    return train, test


def leakage_filter(train_ids: set, test_candidate_ids: set, tau: float,
                   index: SignLsh, vectors: dict[str, SparseVector],
                   exact: bool = False) -> tuple[set, set]:
    """Keep a test candidate iff every retrieved train candidate is at cosine
    distance >= tau; candidates come from the index (or a full scan in exact
    mode). A point with no candidates is kept."""
    if not (0 <= tau <= 2):
        raise SplitError(f"tau must be in [0, 2], got {tau}")
    kept: set = set()
    dropped: set = set()
    train_list = sorted(train_ids)
    for sha in sorted(test_candidate_ids):
        vec = vectors[sha]
        candidates = train_list if exact else (index.query(vec) & train_ids)
        leaky = any(cosine_distance(vec, vectors[c]) < tau for c in candidates)
        (dropped if leaky else kept).add(sha)
    return kept, dropped


def make_split(corpus: Corpus, p: float = 0.7, tau: float = 0.2,
               n_bits: int = 16, n_tables: int = 8, seed: int = 0,
               exact: bool = False) -> SplitResult:
    """Temporal split followed by leakage filtering; deterministic given
    (corpus, p, tau, seed)."""
    train_ids, candidates = temporal_split(corpus, p)
    ids = corpus.ids()
    encoder = TfidfEncoder(tokenization="words").fit(
        cleaning_text(corpus.get(sha)) for sha in ids)
    vectors = {sha: encoder.transform_one(cleaning_text(corpus.get(sha))) for sha in ids}
    index = build_index([vectors[sha] for sha in sorted(train_ids)],
                        n_bits=n_bits, n_tables=n_tables, seed=seed,
                        ids=sorted(train_ids))
    test_ids, dropped = leakage_filter(train_ids, candidates, tau, index, vectors,
                                       exact=exact)
    return SplitResult(
        train_ids=train_ids,
        test_ids=test_ids,
        dropped_for_leakage=dropped,
        params={"p": p, "tau": tau, "n_bits": n_bits, "n_tables": n_tables,
                "seed": seed, "exact": exact},
    )


def write_split_manifest(result: SplitResult, path: str | Path,
                         config: dict | None = None) -> None:
    """JSONL manifest: a params header line, then {sha256, split} rows in a
    fixed order so reruns are byte-identical."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"params": result.params}
        if config is not None:
            header["config"] = config
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for split, ids in (("train", result.train_ids), ("test", result.test_ids),
                           ("dropped_leakage", result.dropped_for_leakage)):
            for sha in sorted(ids):
                fh.write(json.dumps({"sha256": sha, "split": split}) + "\n")


def load_split_manifest(path: str | Path) -> SplitResult:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    result = SplitResult(set(), set(), set(), params=header.get("params", {}))
    buckets = {"train": result.train_ids, "test": result.test_ids,
               "dropped_leakage": result.dropped_for_leakage}
    for line in lines[1:]:
        if line.strip():
            row = json.loads(line)
            buckets[row["split"]].add(row["sha256"])
    return result
