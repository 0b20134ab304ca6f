"""Seeded synthetic corpora for tests, demos, and benchmarks at desk scale.

Pages are bags of vocabulary tokens wrapped in minimal HTML. Phishing and
benign records draw from partially overlapping token pools; the overlap and
the flip fraction control how separable the classes are, so a trained
baseline lands at a tunable, imperfect accuracy.
"""

from __future__ import annotations

import datetime as _dt
import random

from .corpus import Corpus, PageRecord, content_hash


def make_page(text: str, url: str, label: str, date: str, title: str | None = None,
              target: str | None = None) -> PageRecord:
    title_markup = f"<title>{title}</title>" if title is not None else ""
    html = (f"<html><head>{title_markup}</head>"
            f"<body><p>{text}</p></body></html>")
    return PageRecord(sha256=content_hash(html), url=url, label=label, date=date,
                      html=html, target=target)


def _date_for(index: int, total: int, start: str, days: int) -> str:
    origin = _dt.date.fromisoformat(start)
    offset = int(index / max(1, total) * days)
    return (origin + _dt.timedelta(days=offset)).isoformat()


def token_doc(rng: random.Random, n_words: int, pools: list[tuple[str, int]]) -> str:
    """Draw n_words tokens; pools are (prefix, pool_size) weighted equally."""
    words = []
    for _ in range(n_words):
        prefix, size = pools[rng.randrange(len(pools))]
        words.append(f"{prefix}{rng.randrange(size)}")
    return " ".join(words)


def synth_corpus(n_benign: int, n_phish: int, seed: int = 0,
                 start: str = "2024-07-01", days: int = 240,
                 doc_words: int = 40, shared_pool: int = 600,
                 class_pool: int = 250, flip_fraction: float = 0.1,
                 title_fraction: float = 0.5) -> Corpus:
    """Labeled corpus with class-correlated content.

    A flipped record keeps its label but draws content from the other
    class's pools, bounding any model's achievable separation.
    """
    rng = random.Random(seed)
    shared = [("com", shared_pool)]
    pools = {"benign": shared + [("bn", class_pool)],
             "phishing": shared + [("ph", class_pool)]}
    records = []
    plan = [("benign", i, n_benign) for i in range(n_benign)] + \
           [("phishing", i, n_phish) for i in range(n_phish)]
    rng.shuffle(plan)  # decorrelate the global uid from the label
    for uid, (label, i, total) in enumerate(plan):
        flipped = rng.random() < flip_fraction
        content_label = {"benign": "phishing", "phishing": "benign"}[label] if flipped else label
        text = token_doc(rng, doc_words, pools[content_label]) + f" uid{uid}"
        # class-neutral URLs: the only label signal is the page content, so a
        # trained model's error rate tracks flip_fraction
        url = f"https://host{uid}.example.net/page/{uid}"
        target = f"brand{i % 37}" if label == "phishing" else None
        title = f"Page {uid}" if rng.random() < title_fraction else None
        records.append(make_page(text, url, label,
                                 _date_for(i, total, start, days), title, target))
    records.sort(key=lambda r: (r.date, r.sha256))
    return Corpus(records)


CLUSTER_TEMPLATES = [
    # scrape-failure modes that dodge the title keyword filter
    ("Domain Parked", "this domain has been parked the owner registered it recently "
                      "premium names available contact the broker to make an offer"),
    ("Redirect Notice", "you are being redirected to the requested resource please wait "
                        "while we send you to the destination do not close this window"),
    ("Security Check Required", "our systems need to review your connection before "
                                "continuing complete the check below to proceed to the site"),
    ("Site Under Maintenance", "we are performing scheduled maintenance the page you "
                               "requested will be back shortly thank you for your patience"),
    ("Account Verification Center", "to continue please confirm your information our team "
                                    "reviews every submission within one business day"),
]


def plant_template_clusters(seed: int = 0, n_good: int = 2500, cluster_size: int = 40,
                            doc_words: int = 60) -> tuple[Corpus, set]:
    """Diverse good pages plus 5 near-identical bad template clusters.

    Returns (corpus, planted_bad_ids). Cluster members share a title and a
    template body with one varying token, so both grouping schemes see them
    while good pages stay fragmented.
    """
    rng = random.Random(seed)
    records = []
    planted: set[str] = set()
    for i in range(n_good):
        text = token_doc(rng, doc_words, [("good", 20000)]) + f" guid{i}"
        title = f"Unique Site {i}" if rng.random() < 0.4 else None
        label = "phishing" if i % 3 == 0 else "benign"
        records.append(make_page(text, f"https://good{i}.example.org/x", label,
                                 _date_for(i, n_good, "2024-07-01", 200), title))
    for c, (title, template) in enumerate(CLUSTER_TEMPLATES):
        for j in range(cluster_size):
            # body repeated so the per-member ref token stays a small
            # perturbation (clusters are near-identical, like real templates)
            text = f"{template} {template} ref {c * 1000 + j}"
            rec = make_page(text, f"https://bad{c}-{j}.example.net/landing",
                            "phishing" if j % 2 else "benign",
                            _date_for(j, cluster_size, "2024-09-01", 30), title)
            planted.add(rec.sha256)
            records.append(rec)
    rng.shuffle(records)
    return Corpus(records), planted


def synth_docs(seed: int, n: int, doc_words: int = 100, vocab: int = 8000,
               prefix: str = "t") -> list[str]:
    rng = random.Random(seed)
    return [token_doc(rng, doc_words, [(prefix, vocab)]) for _ in range(n)]


def perturb_doc(doc: str, seed: int, n_swaps: int = 1, vocab: int = 8000,
                prefix: str = "t") -> str:
    """Near-duplicate: swap n_swaps tokens for fresh ones."""
    rng = random.Random(seed)
    words = doc.split()
    for _ in range(n_swaps):
        words[rng.randrange(len(words))] = f"{prefix}{rng.randrange(vocab)}"
    return " ".join(words)
