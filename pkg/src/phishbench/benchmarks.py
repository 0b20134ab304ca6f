"""Benchmark suite construction: diversity enhancement, difficulty filtering,
base-rate adjustment, and instance-count estimation.

For a base rate b (percent) the phish count per instance is
floor(b * n_benign / (100 - b)); the benign pool is fixed and shared, and
the m phish samples per rate are pairwise disjoint (one seeded shuffle,
then chunking), so every available point is covered before any repeats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .errors import PoolExhaustedError
from .lsh import build_index
from .metrics import average_precision
from .text_vectors import SparseVector, cosine_distance
from .urltools import canonical_key
from .validation import check_range

DEFAULT_RATES = (0.05, 0.1, 0.5, 1.0, 5.0)
DEFAULT_M = {0.05: 241, 0.1: 124, 0.5: 25, 1.0: 12, 5.0: 2}
SUITE_FORMAT_VERSION = 1


@dataclass
class BenchmarkInstance:
    base_rate_percent: float
    instance_index: int
    phish_ids: set
    benign_ids: frozenset  # shared across instances

    def all_ids(self) -> set:
        return self.phish_ids | set(self.benign_ids)


@dataclass
class BenchmarkSuite:
    instances: list
    params: dict = field(default_factory=dict)

    def at_rate(self, rate: float) -> list:
        return [inst for inst in self.instances if inst.base_rate_percent == rate]


@dataclass(frozen=True)
class InstanceEstimate:
    variance: float
    margin: float
    confidence: float
    z: float
    m: int


def augment_benign(corpus: Corpus, test_ids: set, extras: Corpus) -> tuple[Corpus, set]:
    """Add validated benign records to the test pool.

    Extras whose canonical URL key already appears in the corpus are ignored;
    a non-benign extra is an error.
    """
    for rec in extras:
        if rec.label != "benign":
            raise ValueError(f"extra record {rec.sha256} is labeled {rec.label!r}, "
                             "benign required")
    existing_keys = {canonical_key(rec.url) for rec in corpus}
    new_records = []
    seen = set(existing_keys)
    for rec in extras:
        key = canonical_key(rec.url)
        if key in seen:
            continue
        seen.add(key)
        new_records.append(rec)
    merged = Corpus(list(corpus.records) + new_records, source=corpus.source)
    return merged, set(test_ids) | {rec.sha256 for rec in new_records}


def prune_similar_phish(test_ids: set, labels: Mapping[str, str],
                        html_vectors: Mapping[str, SparseVector], tau_html: float,
                        *, exact_below: int = 2000, n_bits: int = 16,
                        n_tables: int = 8, seed: int = 0) -> set:
    """Drop phishing points with near-identical HTML.

    Greedy pass in sha256 order: a phishing point within cosine distance
    tau_html (HTML vectors only) of an already-retained phishing point is
    dropped. Above ``exact_below`` phish the pairwise scan is prefiltered
    with a multi-table LSH index, so results are modulo LSH recall.
    """
    check_range("tau_html", tau_html, 0.0, 2.0)
    phish = sorted(sha for sha in test_ids if labels[sha] == "phishing")
    index = None
    if len(phish) > exact_below:
        index = build_index([html_vectors[sha] for sha in phish],
                            n_bits=n_bits, n_tables=n_tables, seed=seed, ids=phish)
    retained: list[str] = []
    retained_set: set = set()
    dropped: set = set()
    for sha in phish:
        vec = html_vectors[sha]
        candidates = retained if index is None else (index.query(vec) & retained_set)
        if any(cosine_distance(vec, html_vectors[other]) < tau_html
               for other in candidates):
            dropped.add(sha)
        else:
            retained.append(sha)
            retained_set.add(sha)
    return set(test_ids) - dropped


def difficulty_filter(test_ids: set, labels: Mapping[str, str],
                      scores: Mapping[str, float], delta: float = 0.15,
                      k_percent: float = 10.0, seed: int = 0,
                      phish_only: bool = False) -> set:
    """Drop a seeded uniform sample of "easy" points.

    Easy: phishing scored above 1 - delta, plus (unless phish_only) benign
    scored below delta. The drop count is min(floor(k% of the test set),
    number of easy points).
    """
    check_range("delta", delta, 0.0, 0.5, lo_open=True, hi_open=True)
    check_range("k_percent", k_percent, 0.0, 100.0)
    missing = [sha for sha in test_ids if sha not in scores]
    if missing:
        raise KeyError(f"scores missing for {len(missing)} test ids "
                       f"(e.g. {sorted(missing)[:3]})")
    easy = []
    for sha in sorted(test_ids):
        if labels[sha] == "phishing" and scores[sha] > 1 - delta:
            easy.append(sha)
        elif not phish_only and labels[sha] == "benign" and scores[sha] < delta:
            easy.append(sha)
    n_drop = min(int(len(test_ids) * k_percent / 100.0), len(easy))
    if n_drop == 0:
        return set(test_ids)
    rng = np.random.default_rng(seed)
    dropped = set(rng.choice(np.array(easy, dtype=object), size=n_drop, replace=False))
    return set(test_ids) - dropped


def num_phish(b_percent: float, n_benign: int) -> int:
    """floor(b * n_benign / (100 - b)); the achieved rate never exceeds b%.

    Exact rational arithmetic so boundary cases floor correctly.
    """
    if not (0 < b_percent < 100):
        raise ValueError(f"base rate must be in (0, 100) percent, got {b_percent}")
    if n_benign < 1:
        raise ValueError("n_benign must be >= 1")
    b = Fraction(str(b_percent))
    count = int(b * n_benign / (100 - b))
    if count == 0:
        raise PoolExhaustedError(
            f"base rate {b_percent}% with {n_benign} benign points yields an "
            "empty instance")
    return count


def estimate_instances(variance: float, margin: float, confidence: float) -> InstanceEstimate:
    """Instances needed for the error estimate to sit within ``margin`` at the
    given confidence: m = ceil(z^2 * variance / margin^2), minimum 1."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    check_range("margin", margin, 0.0, None, lo_open=True)
    check_range("confidence", confidence, 0.5, 1.0, lo_open=True, hi_open=True)
    z = NormalDist().inv_cdf((1 + confidence) / 2)
    m = max(1, math.ceil(z * z * variance / (margin * margin)))
    return InstanceEstimate(variance=variance, margin=margin, confidence=confidence,
                            z=z, m=m)


def instance_error(scores: Mapping[str, float], labels: Mapping[str, str],
                   ids) -> float:
    """Fixed model-error metric for pilot variance: 1 - average precision on
    the instance. Fewer phish per instance means a noisier estimate, which is
    exactly what the pilot is sizing."""
    member_scores = []
    member_labels = []
    for sha in ids:
        member_scores.append(scores[sha])
        member_labels.append(1 if labels[sha] == "phishing" else 0)
    return 1.0 - average_precision(member_scores, member_labels)


def estimate_variance_pilot(test_ids: set, labels: Mapping[str, str],
                            scores: Mapping[str, float], b_percent: float,
                            pilot_count: int, seed: int = 0,
                            error_metric=None) -> float:
    """Empirical variance of the per-instance model error over ``pilot_count``
    disjoint pilot instances sampled at rate b."""
    if pilot_count < 2:
        raise ValueError("pilot_count must be >= 2")
    metric = instance_error if error_metric is None else error_metric
    benign = sorted(sha for sha in test_ids if labels[sha] == "benign")
    phish = sorted(sha for sha in test_ids if labels[sha] == "phishing")
    k = num_phish(b_percent, len(benign))
    if pilot_count * k > len(phish):
        raise PoolExhaustedError(
            f"pilot needs {pilot_count * k} phish at rate {b_percent}%, "
            f"pool has {len(phish)}")
    rng = np.random.default_rng(seed)
    perm = list(rng.permutation(np.array(phish, dtype=object)))
    errors = []
    for i in range(pilot_count):
        chunk = perm[i * k:(i + 1) * k]
        errors.append(metric(scores, labels, list(chunk) + benign))
    mean = sum(errors) / len(errors)
    return sum((e - mean) ** 2 for e in errors) / (len(errors) - 1)


def sample_benchmarks(test_ids: set, labels: Mapping[str, str],
                      rates: Sequence[float] = DEFAULT_RATES,
                      m_map: Mapping[float, int] | None = None,
                      seed: int = 0) -> BenchmarkSuite:
    """Materialize the suite: for each rate, m disjoint phish samples against
    the shared benign pool. Deterministic given seed."""
    m_map = dict(DEFAULT_M if m_map is None else m_map)
    benign = frozenset(sha for sha in test_ids if labels[sha] == "benign")
    phish = sorted(sha for sha in test_ids if labels[sha] == "phishing")
    if not benign:
        raise PoolExhaustedError("no benign points in the test pool")
    rng = np.random.default_rng(seed)
    instances = []
    for rate in rates:
        m = m_map[rate]
        k = num_phish(rate, len(benign))
        if m * k > len(phish):
            raise PoolExhaustedError(
                f"rate {rate}%: {m} instances x {k} phish = {m * k} needed, "
                f"pool has {len(phish)}")
        perm = list(rng.permutation(np.array(phish, dtype=object)))
        for i in range(m):
            instances.append(BenchmarkInstance(
                base_rate_percent=rate,
                instance_index=i,
                phish_ids=set(perm[i * k:(i + 1) * k]),
                benign_ids=benign,
            ))
    return BenchmarkSuite(
        instances=instances,
        params={"rates": list(rates), "m_map": {str(r): m_map[r] for r in rates},
                "seed": seed},
    )


def write_suite(suite: BenchmarkSuite, dirpath: str | Path,
                config: dict | None = None) -> None:
    """One JSONL manifest per instance plus the shared benign pool.

    The benign pool is identical for every instance, so it is written once
    (benign.jsonl) and each instance manifest carries its phish rows and a
    header pointing at the pool.
    """
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    params = dict(suite.params)
    params["format_version"] = SUITE_FORMAT_VERSION
    if config is not None:
        params["config"] = config
    (dirpath / "suite.json").write_text(json.dumps(params, sort_keys=True, indent=2) + "\n",
                                        encoding="utf-8")
    benign = suite.instances[0].benign_ids if suite.instances else frozenset()
    with (dirpath / "benign.jsonl").open("w", encoding="utf-8") as fh:
        for sha in sorted(benign):
            fh.write(json.dumps({"sha256": sha, "label": "benign"}) + "\n")
    for inst in suite.instances:
        name = f"rate{inst.base_rate_percent:g}_inst{inst.instance_index:03d}.jsonl"
        with (dirpath / name).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"base_rate_percent": inst.base_rate_percent,
                                 "instance_index": inst.instance_index,
                                 "benign_ref": "benign.jsonl",
                                 "n_phish": len(inst.phish_ids),
                                 "n_benign": len(inst.benign_ids)},
                                sort_keys=True) + "\n")
            for sha in sorted(inst.phish_ids):
                fh.write(json.dumps({"sha256": sha, "label": "phishing"}) + "\n")


def load_suite(dirpath: str | Path) -> BenchmarkSuite:
    dirpath = Path(dirpath)
    params = json.loads((dirpath / "suite.json").read_text(encoding="utf-8"))
    benign = frozenset(
        json.loads(line)["sha256"]
        for line in (dirpath / "benign.jsonl").read_text(encoding="utf-8").splitlines()
        if line.strip())
    instances = []
    for path in sorted(dirpath.glob("rate*_inst*.jsonl")):
        lines = path.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        phish = {json.loads(line)["sha256"] for line in lines[1:] if line.strip()}
        instances.append(BenchmarkInstance(
            base_rate_percent=header["base_rate_percent"],
            instance_index=header["instance_index"],
            phish_ids=phish,
            benign_ids=benign,
        ))
    instances.sort(key=lambda i: (i.base_rate_percent, i.instance_index))
    return BenchmarkSuite(instances=instances, params=params)
