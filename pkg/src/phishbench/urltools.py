"""URL parsing, canonicalization, query stripping, dedup, and lexical features.

Registrable-domain extraction uses a bundled public-suffix snapshot so
results are deterministic and offline; see data/public_suffix_list.txt.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from urllib.parse import urlsplit, urlunsplit

from .corpus import Corpus
from .errors import MalformedUrlError


@dataclass(frozen=True)
class UrlParts:
    scheme: str
    host: str
    subdomain: str
    registrable_domain: str
    path: str
    query: str | None


@dataclass(frozen=True)
class UrlFeatures:
    url_length: int
    domain_length: int
    path_length: int
    subdomain_length: int


@lru_cache(maxsize=1)
def _default_suffixes() -> frozenset[str]:
    text = resources.files("phishbench.data").joinpath("public_suffix_list.txt").read_text("utf-8")
    return frozenset(_parse_suffix_lines(text.splitlines()))


def _parse_suffix_lines(lines) -> set[str]:
    out = set()
    for line in lines:
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.add(line)
    return out


def load_suffixes(path: str | Path) -> frozenset[str]:
    """Load a public-suffix snapshot file (one suffix per line)."""
    return frozenset(_parse_suffix_lines(Path(path).read_text("utf-8").splitlines()))


def _split_host(host: str, suffixes: frozenset[str]) -> tuple[str, str]:
    """Return (subdomain, registrable_domain); case of the input is preserved."""
    labels = host.split(".")
    lower = host.lower().split(".")
    # longest listed suffix wins; the registrable domain is one label wider
    for i in range(1, len(lower)):
        if ".".join(lower[i:]) in suffixes:
            cut = i - 1
            return ".".join(labels[:cut]), ".".join(labels[cut:])
    if len(labels) == 1:
        return "", host
    if ".".join(lower) in suffixes:  # the host itself is a public suffix
        return "", host
    return ".".join(labels[:-2]), ".".join(labels[-2:])


def parse_url(raw: str, suffixes: frozenset[str] | None = None) -> UrlParts:
    """Decompose an absolute URL; raises MalformedUrlError, never truncates."""
    if not raw or not raw.strip():
        raise MalformedUrlError("empty URL")
    try:
        parts = urlsplit(raw.strip())
    except ValueError as exc:
        raise MalformedUrlError(f"cannot parse {raw!r}: {exc}") from exc
    if not parts.scheme or not parts.netloc:
        raise MalformedUrlError(f"not an absolute URL: {raw!r}")
    host = parts.netloc
    if "@" in host:
        host = host.rsplit("@", 1)[1]
    if ":" in host:
        host = host.rsplit(":", 1)[0]
    if not host:
        raise MalformedUrlError(f"no host in {raw!r}")
    sub, reg = _split_host(host, suffixes or _default_suffixes())
    return UrlParts(
        scheme=parts.scheme,
        host=host,
        subdomain=sub,
        registrable_domain=reg,
        path=parts.path,
        query=parts.query or None,
    )


def canonical_key(raw: str) -> str:
    """Dedup key: lowercased URL with trailing slashes removed.

    Used only for deduplication; the original case-sensitive URL stays on
    the record. Idempotent.
    """
    parse_url(raw)  # reject malformed input
    return raw.strip().lower().rstrip("/")


def strip_query(raw: str) -> str:
    """Remove the query string and fragment (PII scrubbing for benign URLs)."""
    parse_url(raw)
    parts = urlsplit(raw.strip())
    return urlunsplit((parts.scheme, parts.netloc, parts.path, "", ""))


def dedup(corpus: Corpus) -> tuple[Corpus, int]:
    """One record per canonical URL key; keeps the earliest-dated record,
    ties broken by sha256."""
    kept, removed = dedup_split(corpus)
    return Corpus(kept, source=corpus.source), len(removed)


def dedup_split(corpus: Corpus):
    """Partition records into (kept, removed) under canonical-key dedup."""
    best: dict[str, tuple[str, str, int]] = {}  # key -> (date, sha256, position)
    for pos, rec in enumerate(corpus):
        key = canonical_key(rec.url)
        cand = (rec.date, rec.sha256, pos)
        if key not in best or cand[:2] < best[key][:2]:
            best[key] = cand
    keep_positions = {pos for _, _, pos in best.values()}
    kept = [rec for pos, rec in enumerate(corpus) if pos in keep_positions]
    removed = [rec for pos, rec in enumerate(corpus) if pos not in keep_positions]
    return kept, removed


def url_features(raw: str, suffixes: frozenset[str] | None = None) -> UrlFeatures:
    """Character counts of the URL and its parts."""
    parts = parse_url(raw, suffixes)
    return UrlFeatures(
        url_length=len(raw.strip()),
        domain_length=len(parts.registrable_domain),
        path_length=len(parts.path),
        subdomain_length=len(parts.subdomain),
    )
