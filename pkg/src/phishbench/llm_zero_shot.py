"""Zero-shot prompt construction and verdict parsing behind a pluggable
client boundary.

The system prompt template ships as a data file and must reach the client
byte-identical; the page HTML is simplified to fit the token budget. No
network code lives here: a client implements ``complete`` and the test
suite uses a canned fake.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import PageRecord
from .htmltools import simplify_html

HTML_TOKEN_LIMIT = 2500
TEMPLATE_TOKEN_LIMIT = 500


@lru_cache(maxsize=1)
def default_template() -> str:
    return resources.files("phishbench.data").joinpath("llm_prompt_template.txt").read_text("utf-8")


def load_template(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    user_payload: dict  # {"url": ..., "html": simplified html}
    token_budgets: dict


@dataclass(frozen=True)
class LlmVerdict:
    phishing: bool
    score: int           # 1..10
    normalized: float    # (score-1)/9 plus seeded Gaussian noise, clamped to [0,1]
    noise_sigma: float


def build_prompt(record: PageRecord, template: str | None = None,
                 html_token_limit: int = HTML_TOKEN_LIMIT) -> PromptBundle:
    """Deterministic bundle; the template goes through byte-for-byte."""
    system_prompt = template if template is not None else default_template()
    if len(system_prompt.split()) > TEMPLATE_TOKEN_LIMIT:
        raise ValueError(f"template exceeds the {TEMPLATE_TOKEN_LIMIT}-token budget")
    return PromptBundle(
        system_prompt=system_prompt,
        user_payload={"url": record.url,
                      "html": simplify_html(record.html, html_token_limit)},
        token_budgets={"html": html_token_limit, "template": TEMPLATE_TOKEN_LIMIT,
                       "url": None},
    )


def parse_verdict(raw_json: str, noise_sigma: float = 0.01, seed: int = 0) -> LlmVerdict:
    """Parse {"phishing": bool, "score": 1..10}; the score is normalized to
    [0, 1] and perturbed with seeded Gaussian noise so tied ratings spread
    into a smooth curve."""
    try:
        obj = json.loads(raw_json)
    except json.JSONDecodeError as exc:
        raise ValueError(f"verdict is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("verdict must be a JSON object")
    phishing = obj.get("phishing")
    score = obj.get("score")
    if not isinstance(phishing, bool):
        raise ValueError(f"'phishing' must be a boolean, got {phishing!r}")
    if isinstance(score, bool) or not isinstance(score, int) or not (1 <= score <= 10):
        raise ValueError(f"'score' must be an integer in [1, 10], got {score!r}")
    normalized = (score - 1) / 9.0
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        normalized = float(np.clip(normalized + rng.normal(0.0, noise_sigma), 0.0, 1.0))
    return LlmVerdict(phishing=phishing, score=score, normalized=normalized,
                      noise_sigma=noise_sigma)


class LlmClient(ABC):
    """Request/response boundary; implementations own batching and transport."""

    @abstractmethod
    def complete(self, system_prompt: str, user_payload: dict) -> str:
        """Return the model's raw JSON verdict string."""


class FakeLlmClient(LlmClient):
    """Canned responses keyed by URL, with a constant fallback. Test double."""

    def __init__(self, responses: dict | None = None,
                 fallback: str = '{"phishing": false, "score": 1}'):
        self.responses = responses or {}
        self.fallback = fallback
        self.calls: list[dict] = []

    def complete(self, system_prompt: str, user_payload: dict) -> str:
        self.calls.append({"system_prompt": system_prompt, "user_payload": user_payload})
        return self.responses.get(user_payload["url"], self.fallback)


def run_zero_shot(records: Iterable[PageRecord], client: LlmClient,
                  noise_sigma: float = 0.01, seed: int = 0,
                  template: str | None = None) -> list[tuple[str, LlmVerdict]]:
    """Score records through the client; one derived seed per record keeps
    the noise reproducible regardless of batch order."""
    out = []
    for i, record in enumerate(records):
        bundle = build_prompt(record, template=template)
        raw = client.complete(bundle.system_prompt, bundle.user_payload)
        verdict = parse_verdict(raw, noise_sigma=noise_sigma, seed=seed + i)
        out.append((record.sha256, verdict))
    return out


def write_verdicts(verdicts: list[tuple[str, LlmVerdict]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for sha, verdict in verdicts:
            fh.write(json.dumps({"sha256": sha, "phishing": verdict.phishing,
                                 "score": verdict.score,
                                 "normalized": verdict.normalized}) + "\n")
