"""Sparse linear classifier over binary n-gram features plus hand-crafted
URL/DOM statistics.

The objective is the L2-regularized mean squared hinge loss,
  L(W, b) = (1/N) sum_i w_i * max(0, 1 - y_i (W.x_i + b))^2 + (lambda/2) ||W||^2,
minimized by full-batch gradient descent with backtracking line search.
Margins are mapped to probabilities with a sigmoid fitted on a held-out
slice, so downstream consumers get scores in (0, 1).
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from .corpus import PageRecord
from .errors import MalformedUrlError
from .htmltools import extract_sections, html_features, xpath_ngrams
from .text_vectors import SparseVector, char_ngrams, select_top_features
from .urltools import url_features

HAND_FEATURES = ("url_length", "domain_length", "path_length", "subdomain_length",
                 "html_length", "head_length_sum", "img_length_sum",
                 "script_length_sum", "dom_nodes", "dom_edges")
N_HAND = len(HAND_FEATURES)

MODEL_FORMAT_VERSION = 1


def hand_feature_values(record: PageRecord) -> np.ndarray:
    try:
        uf = url_features(record.url)
        url_vals = [uf.url_length, uf.domain_length, uf.path_length, uf.subdomain_length]
    except MalformedUrlError:
        url_vals = [len(record.url), 0, 0, 0]
    hf = html_features(record.html)
    return np.array(url_vals + [hf.html_length, hf.head_length_sum, hf.img_length_sum,
                                hf.script_length_sum, hf.dom_nodes, hf.dom_edges],
                    dtype=float)


def ngram_terms(record: PageRecord, char_sizes=(2, 3, 4), xpath_sizes=(2, 3, 4)) -> Counter:
    """Namespaced n-gram multiset: character n-grams over the URL and each
    HTML section, plus tag-level path n-grams."""
    sections = extract_sections(record.html)
    sources = {
        "url": record.url,
        "text": sections.visible_text,
        "tags": " ".join(sections.tags),
        "script": sections.scripts,
        "link": " ".join(sections.links),
        "imgsrc": " ".join(sections.image_sources),
        "imgdata": " ".join(sections.embedded_image_data),
    }
    terms: Counter = Counter()
    for prefix, text in sources.items():
        if text:
            for gram, count in char_ngrams(text, char_sizes).items():
                terms[f"{prefix}:{gram}"] += count
    for n in xpath_sizes:
        for gram, count in xpath_ngrams(record.html, n).items():
            terms[f"xpath:{gram}"] += count
    return terms


@dataclass
class FeatureSpec:
    """Fitted vocabulary and hand-feature standardization statistics.

    Hand-crafted features occupy the reserved ids [0, N_HAND); n-gram ids
    follow. Deterministic given the corpus and parameters.
    """

    vocab: dict                      # term -> id (already offset by N_HAND)
    hand_mean: np.ndarray
    hand_std: np.ndarray
    k_top: int
    char_sizes: tuple = (2, 3, 4)
    xpath_sizes: tuple = (2, 3, 4)

    @property
    def dim(self) -> int:
        return N_HAND + len(self.vocab)

    def to_json(self) -> str:
        terms = sorted(self.vocab, key=self.vocab.get)
        return json.dumps({
            "format_version": MODEL_FORMAT_VERSION,
            "terms": terms,
            "hand_mean": self.hand_mean.tolist(),
            "hand_std": self.hand_std.tolist(),
            "k_top": self.k_top,
            "char_sizes": list(self.char_sizes),
            "xpath_sizes": list(self.xpath_sizes),
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, payload: str) -> "FeatureSpec":
        obj = json.loads(payload)
        return cls(vocab={t: N_HAND + i for i, t in enumerate(obj["terms"])},
                   hand_mean=np.array(obj["hand_mean"]),
                   hand_std=np.array(obj["hand_std"]),
                   k_top=obj["k_top"],
                   char_sizes=tuple(obj["char_sizes"]),
                   xpath_sizes=tuple(obj["xpath_sizes"]))

    def vocab_hash(self) -> str:
        terms = sorted(self.vocab, key=self.vocab.get)
        return hashlib.sha256("\n".join(terms).encode("utf-8")).hexdigest()


def fit_feature_spec(records: Iterable[PageRecord], k_top: int = 300_000,
                     char_sizes=(2, 3, 4), xpath_sizes=(2, 3, 4)) -> FeatureSpec:
    """Document-frequency counting plus top-k selection over the train set."""
    df: Counter = Counter()
    hand_rows = []
    for rec in records:
        df.update(set(ngram_terms(rec, char_sizes, xpath_sizes)))
        hand_rows.append(hand_feature_values(rec))
    if not hand_rows:
        raise ValueError("at least one record required")
    selected = select_top_features(df, min(k_top, len(df))) if df else {}
    hand = np.vstack(hand_rows)
    std = hand.std(axis=0)
    std[std == 0] = 1.0
    return FeatureSpec(vocab={t: N_HAND + i for t, i in selected.items()},
                       hand_mean=hand.mean(axis=0), hand_std=std,
                       k_top=k_top, char_sizes=tuple(char_sizes),
                       xpath_sizes=tuple(xpath_sizes))


def extract_features(record: PageRecord, spec: FeatureSpec) -> SparseVector:
    """Binary indicators for in-vocabulary n-grams plus z-scored hand features."""
    entries: dict[int, float] = {}
    z = (hand_feature_values(record) - spec.hand_mean) / spec.hand_std
    for i, value in enumerate(z):
        if value != 0.0:
            entries[i] = float(value)
    for term in ngram_terms(record, spec.char_sizes, spec.xpath_sizes):
        idx = spec.vocab.get(term)
        if idx is not None:
            entries[idx] = 1.0
    return SparseVector(entries, spec.dim)


def to_csr(vectors: Sequence[SparseVector]) -> sp.csr_matrix:
    if not vectors:
        raise ValueError("no vectors")
    dim = vectors[0].dim
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for vec in vectors:
        if vec.dim != dim:
            raise ValueError("mixed vector dims")
        for idx in sorted(vec.entries):
            indices.append(idx)
            data.append(vec.entries[idx])
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data), np.array(indices), np.array(indptr)),
                         shape=(len(vectors), dim))


def objective_and_gradient(X: sp.csr_matrix, y: np.ndarray, sample_weight: np.ndarray,
                           lam: float, W: np.ndarray, b: float):
    """Value and analytic gradient of the weighted squared-hinge objective."""
    n = X.shape[0]
    margins = X @ W + b
    hinge = np.maximum(0.0, 1.0 - y * margins)
    obj = float(sample_weight @ (hinge ** 2)) / n + 0.5 * lam * float(W @ W)
    coef = (-2.0 / n) * sample_weight * hinge * y
    grad_w = X.T @ coef + lam * W
    grad_b = float(coef.sum())
    return obj, np.asarray(grad_w).ravel(), grad_b


def _fit_sigmoid(margins: np.ndarray, targets01: np.ndarray, max_iter: int = 100):
    """Damped Newton fit of p = sigmoid(A*m + B) with smoothed targets.

    Starts at A=0 so saturated margins cannot blow up the first Hessian; each
    step backtracks until the cross-entropy decreases. A is kept positive so
    calibrated scores preserve the margin ranking.
    """
    n_pos = float(targets01.sum())
    n_neg = float(len(targets01) - n_pos)
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(targets01 == 1, hi, lo)

    def loss(a, b):
        z = np.clip(a * margins + b, -35, 35)
        p = 1.0 / (1.0 + np.exp(-z))
        return float(-(t * np.log(p) + (1 - t) * np.log(1 - p)).sum())

    A, B = 0.0, math.log((n_pos + 1.0) / (n_neg + 1.0))
    current = loss(A, B)
    for _ in range(max_iter):
        z = np.clip(A * margins + B, -35, 35)
        p = 1.0 / (1.0 + np.exp(-z))
        gA = float((p - t) @ margins)
        gB = float((p - t).sum())
        w = p * (1 - p)
        h11 = float((w * margins * margins).sum()) + 1e-10
        h12 = float((w * margins).sum())
        h22 = float(w.sum()) + 1e-10
        det = h11 * h22 - h12 * h12
        if abs(det) < 1e-18 or (abs(gA) < 1e-10 and abs(gB) < 1e-10):
            break
        dA = (h22 * gA - h12 * gB) / det
        dB = (h11 * gB - h12 * gA) / det
        step = 1.0
        improved = False
        for _ in range(30):
            candidate = loss(A - step * dA, B - step * dB)
            if candidate < current - 1e-12:
                A, B = A - step * dA, B - step * dB
                current = candidate
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return max(A, 1e-6), B


class LinearHingeClassifier(BaseEstimator):
    """Squared-hinge linear model with balanced class weighting and sigmoid
    score calibration.

    Attributes after fit: W_, b_, A_, B_, class_weights_, history_ (objective
    per accepted step, nonincreasing).
    """

    def __init__(self, lam: float = 1e-4, tolerance: float = 1e-3,
                 class_weight: str | dict = "balanced", max_iter: int = 500,
                 calibration_fraction: float = 0.1, seed: int = 0):
        self.lam = lam
        self.tolerance = tolerance
        self.class_weight = class_weight
        self.max_iter = max_iter
        self.calibration_fraction = calibration_fraction
        self.seed = seed

    def _sample_weights(self, y: np.ndarray) -> np.ndarray:
        n = len(y)
        counts = {1: int((y == 1).sum()), -1: int((y == -1).sum())}
        if counts[1] == 0 or counts[-1] == 0:
            raise ValueError("both classes are required for training")
        if self.class_weight == "balanced":
            per_class = {cls: n / (2.0 * cnt) for cls, cnt in counts.items()}
        elif self.class_weight in (None, "none"):
            per_class = {1: 1.0, -1: 1.0}
        else:
            per_class = {1: float(self.class_weight[1]), -1: float(self.class_weight[-1])}
        self.class_weights_ = per_class
        return np.where(y == 1, per_class[1], per_class[-1])

    @staticmethod
    def _as_pm1(labels) -> np.ndarray:
        y = np.asarray(labels, dtype=float)
        uniq = set(np.unique(y).tolist())
        if uniq <= {0.0, 1.0}:
            y = 2 * y - 1
        elif not uniq <= {-1.0, 1.0}:
            raise ValueError(f"labels must be 0/1 or -1/+1, got {sorted(uniq)}")
        return y

    def _optimize(self, X: sp.csr_matrix, y: np.ndarray, weights: np.ndarray):
        W = np.zeros(X.shape[1])
        b = 0.0
        obj, grad_w, grad_b = objective_and_gradient(X, y, weights, self.lam, W, b)
        history = [obj]
        step = 1.0
        for _ in range(self.max_iter):
            g_norm2 = float(grad_w @ grad_w) + grad_b * grad_b
            if g_norm2 == 0.0:
                break
            step = min(step * 2.0, 1e6)  # allow growth after conservative steps
            accepted = False
            for _ in range(60):
                W_new = W - step * grad_w
                b_new = b - step * grad_b
                obj_new, grad_w_new, grad_b_new = objective_and_gradient(
                    X, y, weights, self.lam, W_new, b_new)
                if np.isfinite(obj_new) and obj_new <= obj - 1e-4 * step * g_norm2:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            rel_change = (obj - obj_new) / max(abs(obj), 1e-12)
            W, b, obj = W_new, b_new, obj_new
            grad_w, grad_b = grad_w_new, grad_b_new
            history.append(obj)
            if not np.isfinite(obj):
                raise FloatingPointError("objective diverged")
            if rel_change < self.tolerance:
                break
        return W, b, history

    def fit(self, X, labels):
        if not sp.issparse(X):
            X = to_csr(X)
        X = X.tocsr()
        y = self._as_pm1(labels)
        weights = self._sample_weights(y)

        # stratified held-out slice for calibration
        rng = np.random.default_rng(self.seed)
        holdout = np.zeros(len(y), dtype=bool)
        for cls in (1.0, -1.0):
            idx = np.where(y == cls)[0]
            if len(idx) >= 2:
                n_hold = max(1, int(math.ceil(self.calibration_fraction * len(idx))))
                n_hold = min(n_hold, len(idx) - 1)
                holdout[rng.permutation(idx)[:n_hold]] = True
        train_mask = ~holdout
        if holdout.any() and train_mask.sum() >= 2 and len(set(y[train_mask])) == 2:
            W, b, history = self._optimize(X[train_mask], y[train_mask],
                                           self._sample_weights(y[train_mask]))
            hold_margins = X[holdout] @ W + b
            self.A_, self.B_ = _fit_sigmoid(hold_margins, (y[holdout] == 1).astype(int))
        else:
            W, b, history = self._optimize(X, y, weights)
            self.A_, self.B_ = 1.0, 0.0
        self.W_ = W
        self.b_ = b
        self.history_ = history
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X) -> np.ndarray:
        if not sp.issparse(X):
            X = to_csr(X)
        if X.shape[1] != len(self.W_):
            raise ValueError(f"feature dim {X.shape[1]} != model dim {len(self.W_)}")
        return np.asarray(X @ self.W_).ravel() + self.b_

    def predict_score(self, X) -> np.ndarray:
        """Calibrated score in (0, 1), strictly increasing in the margin."""
        z = np.clip(self.A_ * self.decision_function(X) + self.B_, -500, 500)
        return 1.0 / (1.0 + np.exp(-z))

    def predict_proba(self, X) -> np.ndarray:
        p = self.predict_score(X)
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= 0.5).astype(int)

    def save(self, path: str | Path, spec: FeatureSpec | None = None) -> None:
        obj = {"format_version": MODEL_FORMAT_VERSION,
               "W": self.W_.tolist(), "b": self.b_,
               "A": self.A_, "B": self.B_, "lam": self.lam,
               "class_weights": {str(k): v for k, v in self.class_weights_.items()}}
        if spec is not None:
            obj["vocab_hash"] = spec.vocab_hash()
        Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearHingeClassifier":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {obj.get('format_version')!r}")
        model = cls(lam=obj["lam"])
        model.W_ = np.array(obj["W"])
        model.b_ = obj["b"]
        model.A_ = obj["A"]
        model.B_ = obj["B"]
        model.class_weights_ = {int(k): v for k, v in obj["class_weights"].items()}
        model.history_ = []
        model.n_features_in_ = len(model.W_)
        return model


def train_linear(features: Sequence[SparseVector], labels, lam: float = 1e-4,
                 tolerance: float = 1e-3, class_weighting: str | dict = "balanced",
                 seed: int = 0) -> LinearHingeClassifier:
    return LinearHingeClassifier(lam=lam, tolerance=tolerance,
                                 class_weight=class_weighting, seed=seed).fit(features, labels)


def predict(model: LinearHingeClassifier, features: SparseVector) -> float:
    return float(model.predict_score([features])[0])
