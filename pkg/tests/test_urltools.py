import random

import pytest

from phishbench.corpus import Corpus
from phishbench.errors import MalformedUrlError
from phishbench.urltools import (canonical_key, dedup, parse_url, strip_query,
                                 url_features)

from conftest import make_record


def test_parse_url_decomposition():
    parts = parse_url("https://a.b.example.com/p?q=1")
    assert parts.scheme == "https"
    assert parts.subdomain == "a.b"
    assert parts.registrable_domain == "example.com"
    assert parts.path == "/p"
    assert parts.query == "q=1"


def test_parse_url_minimal():
    parts = parse_url("https://example.com")
    assert parts.subdomain == ""
    assert parts.path == ""
    assert parts.query is None


def test_parse_url_rejects_garbage():
    with pytest.raises(MalformedUrlError):
        parse_url("not a url")


def test_parse_url_multi_part_suffix():
    parts = parse_url("http://shop.example.co.uk/cart")
    assert parts.registrable_domain == "example.co.uk"
    assert parts.subdomain == "shop"


def test_canonical_key_lowercases_and_strips_slash():
    assert canonical_key("HTTPS://Example.com/Path/") == "https://example.com/path"


def test_canonical_key_idempotent():
    key = canonical_key("https://example.com/path")
    assert key == "https://example.com/path"
    assert canonical_key(key) == key


def test_canonical_key_idempotent_randomized():
    rng = random.Random(7)
    for _ in range(200):
        host = f"{'ABCdef'[rng.randrange(6)]}{rng.randrange(100)}.example.com"
        path = "/".join(str(rng.randrange(50)) for _ in range(rng.randrange(4)))
        url = f"HtTp://{host}/{path}" + "/" * rng.randrange(3)
        key = canonical_key(url)
        assert canonical_key(key) == key


def test_canonical_key_case_equivalence():
    assert canonical_key("https://A.com/") == canonical_key("https://a.com")


def test_strip_query_and_fragment():
    assert strip_query("https://e.com/a?user=42#x") == "https://e.com/a"


def test_strip_query_no_query_unchanged():
    assert strip_query("https://e.com/a") == "https://e.com/a"


def test_strip_query_root_path():
    assert strip_query("https://e.com/?a=1&b=2") == "https://e.com/"


def test_dedup_url_case_variants():
    a = make_record(html="<p>same</p>", url="https://Dup.example.com/Login", date="2025-01-02")
    b = make_record(html="<p>same2</p>", url="https://dup.example.com/login", date="2025-01-01")
    kept, removed = dedup(Corpus([a, b]))
    assert removed == 1
    assert len(kept) == 1
    assert kept.records[0].date == "2025-01-01"  # earliest wins


def test_dedup_empty():
    kept, removed = dedup(Corpus([]))
    assert removed == 0 and len(kept) == 0


def test_dedup_two_pairs_of_five():
    records = [
        make_record(html="<p>1</p>", url="https://one.example.com/a", date="2025-01-01"),
        make_record(html="<p>2</p>", url="https://one.example.com/A", date="2025-01-02"),
        make_record(html="<p>3</p>", url="https://two.example.com/b/", date="2025-01-03"),
        make_record(html="<p>4</p>", url="https://two.example.com/b", date="2025-01-04"),
        make_record(html="<p>5</p>", url="https://three.example.com/c", date="2025-01-05"),
    ]
    # oracle: brute-force grouping by the canonical key
    groups = {}
    for rec in records:
        groups.setdefault(canonical_key(rec.url), []).append(rec)
    expected_kept = {min(g, key=lambda r: (r.date, r.sha256)).sha256 for g in groups.values()}

    kept, removed = dedup(Corpus(records))
    assert removed == 2
    assert {r.sha256 for r in kept} == expected_kept


def test_dedup_idempotent(small_corpus):
    once, removed1 = dedup(small_corpus)
    twice, removed2 = dedup(once)
    assert removed2 == 0
    assert [r.sha256 for r in once] == [r.sha256 for r in twice]


def test_url_features_minimal():
    feats = url_features("http://a.b/")
    assert feats.url_length == 11


def test_url_features_empty_subdomain():
    feats = url_features("https://example.com/x")
    assert feats.subdomain_length == 0


def test_url_features_long_url():
    raw = "https://evil.example.com/" + "a" * (2544 - len("https://evil.example.com/"))
    assert len(raw) == 2544  # the observed phishing maximum
    assert url_features(raw).url_length == 2544


def test_url_features_sum_consistency():
    rng = random.Random(3)
    for _ in range(100)[:]:
        sub = ".".join(f"s{rng.randrange(10)}" for _ in range(rng.randrange(3)))
        host = (sub + "." if sub else "") + f"dom{rng.randrange(100)}.com"
        url = f"https://{host}/p{rng.randrange(1000)}"
        feats = url_features(url)
        assert feats.domain_length + feats.subdomain_length <= feats.url_length
        assert min(feats.url_length, feats.domain_length, feats.path_length,
                   feats.subdomain_length) >= 0
