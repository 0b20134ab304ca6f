import random

import pytest

from phishbench.corpus import Corpus, PageRecord, content_hash


def make_record(html="<html><body>hello</body></html>", url="https://example.com/p",
                label="benign", date="2025-01-01", **kw):
    return PageRecord(sha256=content_hash(html), url=url, label=label, date=date,
                      html=html, **kw)


@pytest.fixture
def small_corpus():
    records = [
        make_record(html=f"<html><body>page {i}</body></html>",
                    url=f"https://site{i}.example.com/home",
                    label="phishing" if i % 2 else "benign",
                    date=f"2025-01-{i + 1:02d}")
        for i in range(10)
    ]
    return Corpus(records)


def random_words(rng: random.Random, n_words: int, vocab_size: int = 5000, prefix="w"):
    return " ".join(f"{prefix}{rng.randrange(vocab_size)}" for _ in range(n_words))
