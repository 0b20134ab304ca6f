import pytest

from phishbench.cleaning import (CleanReport, Decision, DecisionJournal, Group,
                                 audit_rejection_rate, auto_filter, build_engine,
                                 cleaning_text, group_by_lsh, group_by_title,
                                 run_cleaning, select_prototype)
from phishbench.corpus import Corpus
from phishbench.errors import ProviderError
from phishbench.lsh import build_index
from phishbench.synth import CLUSTER_TEMPLATES, plant_template_clusters
from phishbench.text_vectors import SparseVector, TfidfEncoder, cosine_similarity

from conftest import make_record


def reject_all(ctx):
    return "remove"


def keep_all(ctx):
    return "keep"


def titled(html_text, title, url, date="2025-01-01", label="benign"):
    return make_record(
        html=f"<html><head><title>{title}</title></head><body><p>{html_text}</p></body></html>",
        url=url, date=date, label=label)


def test_auto_filter_bad_titles():
    corpus = Corpus([
        titled("page body", "404 Not Found", "https://a.example.com/x"),
        titled("real content here", "My Shop", "https://b.example.com/x"),
    ])
    kept, reasons = auto_filter(corpus)
    assert reasons["bad_title"] == 1
    assert len(kept) == 1
    assert "Shop" in kept.records[0].html


def test_auto_filter_clean_corpus_untouched(small_corpus):
    kept, reasons = auto_filter(small_corpus)
    assert len(kept) == len(small_corpus)
    assert reasons == {"url_dup": 0, "html_missing": 0, "bad_title": 0}


def test_auto_filter_hand_enumerated_fixture():
    records = [
        titled("one", "Alpha", "https://one.example.com/a", "2025-01-01"),       # kept
        titled("one again", "Alpha2", "https://ONE.example.com/a", "2025-01-02"),  # url dup
        titled("two", "Beta", "https://two.example.com/b", "2025-01-01"),        # kept
        titled("two again", "Beta2", "https://two.example.com/b/", "2025-01-02"),  # url dup
        make_record(html="", url="https://empty.example.com/e"),                 # html missing
        titled("oops", "Sorry, an error occurred", "https://err.example.com/x"),  # bad title
        titled("c1", "Gamma", "https://g1.example.com/x"),
        titled("c2", "Delta", "https://g2.example.com/x"),
        titled("c3", "Epsilon", "https://g3.example.com/x"),
        titled("c4", "Zeta", "https://g4.example.com/x"),
    ]
    kept, reasons = auto_filter(Corpus(records))
    assert reasons == {"url_dup": 2, "html_missing": 1, "bad_title": 1}
    assert {r.sha256 for r in kept} == {records[i].sha256 for i in (0, 2, 6, 7, 8, 9)}


def test_auto_filter_counts_may_overlap():
    # one record is both a URL duplicate and badly titled
    records = [
        titled("base", "Fine Title", "https://dup.example.com/p", "2025-01-01"),
        titled("clone", "Account Suspended", "https://DUP.example.com/p", "2025-01-02"),
    ]
    kept, reasons = auto_filter(Corpus(records))
    assert reasons["url_dup"] == 1 and reasons["bad_title"] == 1
    assert len(kept) == 1


def vectorize(corpus):
    ids = corpus.ids()
    docs = [cleaning_text(corpus.get(sha)) for sha in ids]
    enc = TfidfEncoder(tokenization="words").fit(docs)
    return ids, {sha: enc.transform_one(doc) for sha, doc in zip(ids, docs)}


def test_group_by_lsh_identical_content():
    # same token content, different bytes: one bin of three
    records = [
        titled("template words here!", "T", "https://a.example.com/1"),
        titled("template, words here", "T", "https://a.example.com/2"),
        titled("template; words here", "T", "https://a.example.com/3"),
        titled("totally different thing entirely", "U", "https://a.example.com/4"),
    ]
    corpus = Corpus(records)
    ids, vectors = vectorize(corpus)
    index = build_index([vectors[s] for s in ids], n_bits=16, n_tables=1, seed=0, ids=ids)
    groups = group_by_lsh(corpus, index)
    assert groups[0].size == 3
    assert groups[0].scheme == "lsh"


def test_group_by_title_ordering():
    records = [
        titled("x1", "A", "https://t.example.com/1"),
        titled("x2", "A", "https://t.example.com/2"),
        titled("x3", "B", "https://t.example.com/3"),
        make_record(html="<html><body>no title</body></html>", url="https://t.example.com/4"),
    ]
    groups = group_by_title(Corpus(records))
    assert [(g.key, g.size) for g in groups] == [("A", 2), ("B", 1)]


def test_select_prototype_singleton():
    group = Group("title", "k", ["only"])
    assert select_prototype(group, {"only": SparseVector({0: 1.0}, 2)}) == "only"


def test_select_prototype_tie_breaks_smallest_sha():
    vec = SparseVector({0: 1.0}, 2)
    group = Group("title", "k", ["bbb", "aaa", "ccc"])
    assert select_prototype(group, {m: vec for m in group.member_ids}) == "aaa"


def test_select_prototype_is_medoid():
    vectors = {
        "left": SparseVector({0: 1.0}, 3),
        "mid": SparseVector({0: 1.0, 1: 1.0}, 3),
        "right": SparseVector({1: 1.0}, 3),
    }
    group = Group("lsh", "k", sorted(vectors))
    # brute-force medoid
    def mean_sim(m):
        return sum(cosine_similarity(vectors[m], vectors[o])
                   for o in vectors if o != m) / 2
    expected = max(sorted(vectors), key=mean_sim)
    assert expected == "mid"
    assert select_prototype(group, vectors) == "mid"


def test_run_cleaning_budget_zero():
    corpus = Corpus([
        titled("a", "404 Not Found", "https://a.example.com/x"),
        titled("b", "Fine", "https://b.example.com/x"),
    ])
    cleaned, report = run_cleaning(corpus, 0, reject_all)
    assert report.inspected == {"lsh": 0, "title": 0}
    assert report.auto_removed["bad_title"] == 1
    assert len(cleaned) == 1


def test_run_cleaning_budget_respected():
    corpus, _ = plant_template_clusters(seed=1, n_good=60, cluster_size=8)
    _, report = run_cleaning(corpus, 3, reject_all, seed=5)
    assert report.inspected["lsh"] <= 3
    assert report.inspected["title"] <= 3
    assert report.budget == {"lsh": 3, "title": 3}


def test_keep_verdicts_remove_nothing():
    corpus, _ = plant_template_clusters(seed=2, n_good=40, cluster_size=6)
    cleaned, report = run_cleaning(corpus, 5, keep_all, seed=5)
    assert report.removed_ids == set()
    assert len(cleaned) + report.auto_removed["url_dup"] == len(corpus)


def test_reject_all_removes_planted_clusters():
    corpus, planted = plant_template_clusters(seed=3, n_good=300, cluster_size=20)
    cleaned, report = run_cleaning(corpus, 10, reject_all, seed=7)
    removed_planted = planted & report.removed_ids
    assert len(removed_planted) / len(planted) >= 0.95


def test_propagation_soundness():
    corpus, _ = plant_template_clusters(seed=4, n_good=150, cluster_size=10)
    engine, filtered, _ = build_engine(corpus, {"lsh": 6, "title": 6},
                                       propagate_sim=0.9, seed=11)
    rejected_prototypes = []
    while True:
        ctx = engine.next()
        if ctx is None:
            break
        rejected_prototypes.append(ctx.record.sha256)
        engine.apply("remove")
    report = engine.finish()
    vectors = engine.vectors
    for sha in report.removed_ids:
        if sha in rejected_prototypes:
            continue
        assert any(cosine_similarity(vectors[sha], vectors[p]) >= 0.9 - 1e-9
                   for p in rejected_prototypes)


def test_run_cleaning_deterministic():
    corpus, _ = plant_template_clusters(seed=5, n_good=120, cluster_size=10)
    _, r1 = run_cleaning(corpus, 5, reject_all, seed=3)
    _, r2 = run_cleaning(corpus, 5, reject_all, seed=3)
    assert r1.removed_ids == r2.removed_ids
    assert [d.prototype_id for d in r1.decisions] == [d.prototype_id for d in r2.decisions]


def test_provider_failure_flags_incomplete():
    corpus, _ = plant_template_clusters(seed=6, n_good=80, cluster_size=8)
    calls = {"n": 0}

    def flaky(ctx):
        calls["n"] += 1
        if calls["n"] >= 3:
            raise RuntimeError("annotator walked away")
        return "keep"

    with pytest.raises(ProviderError) as info:
        run_cleaning(corpus, 10, flaky, seed=2)
    assert info.value.partial_report.complete is False
    assert sum(info.value.partial_report.inspected.values()) == 2


def test_journal_resume(tmp_path):
    corpus, _ = plant_template_clusters(seed=7, n_good=100, cluster_size=8)
    journal = DecisionJournal(tmp_path / "journal.jsonl")
    budget = 4

    calls = {"n": 0}

    def two_then_fail(ctx):
        calls["n"] += 1
        if calls["n"] > 2:
            raise RuntimeError("interrupted")
        return "remove"

    with pytest.raises(ProviderError):
        run_cleaning(corpus, budget, two_then_fail, seed=9, journal=journal)
    assert len(journal) == 2
    journaled_before_resume = {d.prototype_id for d in journal.load()}

    # resume: journal replays, provider handles only the remainder
    seen = []

    def resume_provider(ctx):
        seen.append(ctx.record.sha256)
        return "keep"

    cleaned, report = run_cleaning(corpus, budget, resume_provider, seed=9, journal=journal)
    assert not (set(seen) & journaled_before_resume)
    assert report.inspected["lsh"] + report.inspected["title"] == 2 * budget


def test_decision_round_trip():
    d = Decision("abc", "remove", "alice", "2025-05-05T10:00:00Z")
    assert Decision.from_dict(d.to_dict()) == d


def test_audit_clean_fixture_low_rate():
    corpus, _ = plant_template_clusters(seed=8, n_good=400, cluster_size=0)
    report = audit_rejection_rate(corpus, 5, 5, keep_all, seed=1)
    assert report.rejection_rate["total"] < 0.01


def test_audit_fully_bad_fixture():
    records = []
    for c, (title, template) in enumerate(CLUSTER_TEMPLATES):
        for j in range(10):
            records.append(titled(f"{template} ref {j}", title,
                                  f"https://bad{c}-{j}.example.net/x",
                                  label="phishing" if j % 2 else "benign"))
    report = audit_rejection_rate(Corpus(records), 10, 10, reject_all, seed=4)
    assert report.rejection_rate["total"] >= 0.95


def test_audit_half_bad_fixture():
    corpus, planted = plant_template_clusters(seed=9, n_good=200, cluster_size=40)
    assert abs(len(planted) / len(corpus) - 0.5) < 0.01

    def reject_templates(ctx):
        title = ctx.title or ""
        return "remove" if title in {t for t, _ in CLUSTER_TEMPLATES} else "keep"

    report = audit_rejection_rate(corpus, 10, 10, reject_templates, seed=4)
    assert 0.40 <= report.rejection_rate["total"] <= 0.55


def test_audit_table_layout():
    corpus, _ = plant_template_clusters(seed=10, n_good=60, cluster_size=6)
    report = audit_rejection_rate(corpus, 3, 3, reject_all, seed=4)
    table = report.to_table()
    for line in ("Initial Size", "URL Duplicates", "HTML Missing", "Bad Title",
                 "After Stage 1", "LSH Rejections", "Title Rejections",
                 "After Stage 2", "Total Removed", "Rejection Rate"):
        assert line in table
    header = table.splitlines()[0]
    assert "Phish" in header and "Benign" in header and "Total" in header


def test_audit_bounds_formula():
    corpus, _ = plant_template_clusters(seed=11, n_good=150, cluster_size=15)
    report = audit_rejection_rate(corpus, 8, 8, reject_all, seed=4)
    for cls in ("phishing", "benign"):
        expected_lower = int(round(report.after_stage2[cls] * (1 - report.rejection_rate[cls])))
        assert report.lower_bound[cls] == expected_lower
        assert report.upper_bound[cls] == report.after_stage2[cls]
