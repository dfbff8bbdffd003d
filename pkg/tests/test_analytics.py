import math
import random

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from corpusprep.analytics import (
    CorrelationResult,
    DegenerateInput,
    LanguageRemoval,
    RemovalStats,
    StageTiming,
    compute_removal_stats,
    correlation_p_value,
    disparity_index,
    emit_report,
    filtering_disparity,
    linear_regression,
    pearson,
    regularized_incomplete_beta,
    rounded_shares,
    stage_share,
)

# two-tailed p for r=0.530, n=25 from scipy.integrate.quad over a t density built from lgamma
P_ORACLE = 0.0064294055199027485


def test_removal_examples():
    assert LanguageRemoval("bg", 100, 3, 3).r_filter == pytest.approx(97.0)
    assert LanguageRemoval("bg", 200, 100, 33).r_dedup == pytest.approx(67.0)
    row = LanguageRemoval("en", 10, 10, 10)
    assert row.r_filter == 0 and row.r_dedup == 0
    with pytest.raises(ValueError):
        LanguageRemoval("en", 10, 11, 3)


def test_compute_removal_stats_counts_from_docids():
    logs = [
        {"docid": "c/en/0/1", "stage": "prefilter", "reason": "too_short"},
        {"docid": "c/en/0/2", "stage": "dedup", "reason": "duplicate_of:c/en/0/0"},
        {"docid": "c/de/0/3", "stage": "harmful", "reason": "low_perplexity"},
    ]
    stats = compute_removal_stats(logs, {"en": 4, "de": 2, "fr": 0})
    assert [r.language for r in stats] == ["de", "en"]
    assert stats["en"] == LanguageRemoval("en", 4, 3, 2)
    assert stats["de"].r_filter == pytest.approx(50.0)
    with pytest.raises(ValueError):
        compute_removal_stats([{"docid": "c/en/0/1", "stage": "cleanup"}], {"en": 1})


def test_disparity_example():
    rep = disparity_index({"a": (0.1, 1), "b": (0.2, 1), "c": (0.3, 1)})
    assert rep.scores["a"] == pytest.approx(-1.2247, abs=1e-4)
    assert rep.scores["b"] == pytest.approx(0.0, abs=1e-12)
    assert rep.scores["c"] == pytest.approx(1.2247, abs=1e-4)
    assert rep.ranked()[0][0] == "c"


def test_disparity_degenerate():
    with pytest.raises(DegenerateInput):
        disparity_index({"a": (5.0, 10), "b": (5.0, 10)})
    with pytest.raises(DegenerateInput):
        disparity_index({"a": (5.0, 10)})
    with pytest.raises(DegenerateInput):
        disparity_index({"a": (5.0, 0), "b": (1.0, 3)})
    with pytest.raises(ValueError):
        disparity_index({"a": (5.0, 1), "b": (1.0, 3)}, mode="other")


def test_disparity_modes_differ():
    stats = RemovalStats((LanguageRemoval("a", 10, 5, 5), LanguageRemoval("b", 1000, 900, 900),
                          LanguageRemoval("c", 100, 20, 20)))
    formula = filtering_disparity(stats)
    ratio = filtering_disparity(stats, mode="ratio")
    assert formula.ratios["a"] == pytest.approx(50.0 / 10)
    assert ratio.ratios["a"] == pytest.approx(0.5)
    assert formula.ranked()[0][0] == "a" and ratio.ranked()[0][0] == "c"


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]).r == 1.0
    assert pearson([1, 2, 3], [6, 4, 2]).r == -1.0
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])


def test_p_value_against_frozen_oracle():
    res = correlation_p_value(0.530, 25)
    assert res.p_two_tailed == pytest.approx(P_ORACLE, abs=1e-6)
    assert 0.006 <= res.p_two_tailed <= 0.008
    assert correlation_p_value(0.0, 10).p_two_tailed == pytest.approx(1.0)
    assert correlation_p_value(1.0, 10).p_two_tailed == 0.0


def test_incomplete_beta_matches_scipy():
    special = pytest.importorskip("scipy.special")
    rng = random.Random(3)
    for _ in range(300):
        a, b, x = rng.uniform(0.2, 60), rng.uniform(0.2, 60), rng.random()
        want = float(special.betainc(a, b, x))
        got = regularized_incomplete_beta(a, b, x)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-300)
    assert regularized_incomplete_beta(2, 3, 0.0) == 0.0
    assert regularized_incomplete_beta(2, 3, 1.0) == 1.0


def test_p_value_matches_scipy_t():
    stats = pytest.importorskip("scipy.stats")
    for r, n in [(0.1, 5), (0.530, 25), (-0.8, 12), (0.3, 200)]:
        res = correlation_p_value(r, n)
        assert res.p_two_tailed == pytest.approx(2 * stats.t.sf(abs(res.t), n - 2), rel=1e-9)


def test_regression():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 10, 200)
    y = 2.5 * x - 1 + rng.normal(0, 1, 200)
    reg = linear_regression(x, y)
    assert abs(float(reg.residuals.sum())) < 1e-8
    assert abs(reg.slope - 2.5) < 3 * reg.slope_stderr


def test_stage_share_examples():
    shares = stage_share([StageTiming("conversion", 6912), StageTiming("filtering", 45810),
                          StageTiming("deduplication", 221230)])
    assert rounded_shares(shares) == {"conversion": 2.5, "filtering": 16.7, "deduplication": 80.8}
    assert stage_share([StageTiming("only", 3.0)]) == {"only": 100.0}
    assert stage_share([StageTiming("a", 1), StageTiming("b", 1)]) == {"a": 50.0, "b": 50.0}
    with pytest.raises(ValueError):
        stage_share([StageTiming("a", 0)])
    with pytest.raises(ValueError):
        stage_share([StageTiming("a", 1), StageTiming("a", 2)])
    with pytest.raises(ValueError):
        StageTiming("a", -1)


def _fixture_stats():
    return RemovalStats((LanguageRemoval("de", 50, 20, 15), LanguageRemoval("en", 400, 300, 200),
                         LanguageRemoval("fr", 30, 3, 3)))


def _emit(tmp):
    stats = _fixture_stats()
    disp = {"filtering": filtering_disparity(stats), "dedup": None}
    corr = {"size": correlation_p_value(0.53, 25), "none": None}
    timings = [StageTiming("conversion", 1.0), StageTiming("filtering", 2.0), StageTiming("deduplication", 5.0)]
    return emit_report(stats, disp, corr, timings, tmp)


def test_emit_report(tmp_path):
    paths = _emit(tmp_path / "a")
    names = [p.name for p in paths]
    assert names == ["report.json", "removal_by_language.csv", "disparity.csv", "stage_share.csv"]
    removal = (tmp_path / "a" / "removal_by_language.csv").read_bytes()
    assert removal.startswith(b"language,r_filter,r_dedup\n") and b"\r" not in removal
    _emit(tmp_path / "b")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = (tmp_path / "a" / "disparity.csv").read_text().splitlines()[1:]
    di = [float(r.split(",")[3]) for r in rows]
    assert di == sorted(di, reverse=True)
    share = (tmp_path / "a" / "stage_share.csv").read_text().splitlines()
    assert share[0] == "stage,cpu_seconds,percent" and share[3].endswith(",62.5")


_ratios = st.dictionaries(st.sampled_from(["bg", "cs", "de", "en", "fr", "hu", "pl", "sk"]),
                          st.floats(0.0, 100.0), min_size=2)


@given(_ratios)
def test_di_identities(values):
    arr = np.array(list(values.values()))
    assume(arr.std() > 1e-6)
    rep = disparity_index({k: (v, 1) for k, v in values.items()})
    s = np.array(list(rep.scores.values()))
    assert abs(s.mean()) < 1e-9
    assert abs(np.sqrt(np.mean(s ** 2)) - 1) < 1e-9


@given(_ratios, st.floats(0.01, 100), st.floats(-50, 50))
def test_di_affine_invariance(values, a, b):
    arr = np.array(list(values.values()))
    assume(arr.std() > 1e-3)
    base = disparity_index({k: (v, 1) for k, v in values.items()})
    moved = disparity_index({k: (a * v + b, 1) for k, v in values.items()})
    for k in values:
        assert moved.scores[k] == pytest.approx(base.scores[k], abs=1e-6)


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40, unique=True),
       st.floats(0.01, 100), st.floats(-100, 100), st.booleans())
def test_pearson_exact_on_lines(xs, a, b, negative):
    assume(np.ptp(xs) > 1e-3)
    slope = -a if negative else a
    r = pearson(xs, [slope * x + b for x in xs]).r
    assert r == pytest.approx(-1.0 if negative else 1.0, abs=1e-12)


@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=10))
def test_shares_sum_to_100(secs):
    assume(sum(secs) > 0)
    shares = stage_share([StageTiming(f"s{i}", s) for i, s in enumerate(secs)])
    assert math.fsum(shares.values()) == pytest.approx(100.0, abs=1e-9)


def test_correlation_result_fields():
    res = correlation_p_value(0.5, 10)
    assert isinstance(res, CorrelationResult) and res.n == 10
    assert res.t == pytest.approx(0.5 * math.sqrt(8 / 0.75))
