import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dictcsc.data import CscSample, load_corpus
from dictcsc.encoders import CscModel
from dictcsc.evaluation import (
    AlignmentError,
    Prediction,
    evaluate,
    load_predictions,
    predict_many,
    render_report,
    save_predictions,
    sighan13_filter,
    write_report,
)

from conftest import tiny_encoder
from oracles import brute_force_scores


def test_three_sentence_suite(data_dir):
    gold = load_corpus(data_dir / "three_suite_gold.tsv")
    preds = load_predictions(data_dir / "three_suite_pred.tsv")
    report = evaluate(preds, gold)
    for level in (report.detection, report.correction):
        assert level.precision == pytest.approx(1 / 3, abs=1e-12)
        assert level.recall == pytest.approx(1 / 2, abs=1e-12)
        assert level.f1 == pytest.approx(0.4, abs=1e-12)
    assert (report.gold_positive, report.predicted_positive, report.det_tp, report.cor_tp) == (2, 3, 1, 1)


def test_gold_as_prediction_scores_one(data_dir):
    gold = load_corpus(data_dir / "three_suite_gold.tsv")
    report = evaluate([Prediction(g.id, g.source, g.target) for g in gold], gold)
    assert report.detection.f1 == report.correction.f1 == 1.0


def test_detected_but_miscorrected():
    gold = [CscSample("a", "天起好", "天气好")]
    report = evaluate([Prediction("a", "天起好", "天汽好")], gold)
    assert report.detection.f1 == 1.0
    assert report.correction.f1 == 0.0


def test_no_changes_anywhere():
    gold = [CscSample("a", "好", "好")]
    report = evaluate([Prediction("a", "好", "好")], gold)
    assert report.detection.f1 == 0.0 and report.detection.precision == 0.0


def test_sighan13_filter(data_dir):
    gold = load_corpus(data_dir / "sighan13_gold.tsv")
    # model leaves 的 alone but fixes the real error
    preds = [Prediction("a1", "他跑的很快", "他跑的很快"), Prediction("a2", "那时天起非常好", "那时天气非常好")]
    strict = evaluate(preds, gold)
    relaxed = evaluate(preds, gold, sighan13_mode=True)
    assert strict.correction.recall == 0.5
    assert relaxed.correction.recall == 1.0 and relaxed.gold_positive == 1
    # a change into an auxiliary char is ignored as well
    p, g = sighan13_filter(Prediction("x", "他跑得快", "他跑地快"), CscSample("x", "他跑得快", "他跑得快"))
    assert p.output == "他跑得快" and g.target == "他跑得快"


def test_alignment_errors():
    gold = [CscSample("a", "好", "好")]
    with pytest.raises(AlignmentError, match="no prediction"):
        evaluate([], gold)
    with pytest.raises(AlignmentError, match="without gold"):
        evaluate([Prediction("a", "好", "好"), Prediction("b", "好", "好")], gold)
    with pytest.raises(AlignmentError, match="duplicate"):
        evaluate([Prediction("a", "好", "好"), Prediction("a", "好", "好")], gold)
    with pytest.raises(AlignmentError, match="source"):
        evaluate([Prediction("a", "水", "水")], gold)
    with pytest.raises(AlignmentError):
        Prediction("a", "好", "好好")


def test_prediction_io_and_report(tmp_path, data_dir):
    preds = load_predictions(data_dir / "three_suite_pred.tsv")
    save_predictions(preds, tmp_path / "p.tsv")
    assert load_predictions(tmp_path / "p.tsv") == preds
    report = evaluate(preds, load_corpus(data_dir / "three_suite_gold.tsv"))
    write_report(report, tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text(encoding="utf-8"))
    assert data["correction"]["f1"] == pytest.approx(0.4)
    assert data["counts"]["sentences"] == 3
    assert "correction" in (tmp_path / "r.txt").read_text(encoding="utf-8")
    assert render_report(report).count("\n") == 4


def test_predict_many_keeps_shape():
    model = CscModel(tiny_encoder("天气好起"))
    out = predict_many(model, ["天起好", "好"], ["x", "y"])
    assert [p.id for p in out] == ["x", "y"]
    assert [len(p.output) for p in out] == [3, 1]
    # characters outside the vocabulary are never produced from a reserved id
    assert all(c != "[" for p in out for c in p.output)


alphabet = "甲乙丙丁"


@st.composite
def triples(draw):
    n = draw(st.integers(1, 6))
    source = draw(st.text(alphabet=alphabet, min_size=n, max_size=n))
    target = "".join(draw(st.sampled_from([c, c, *alphabet])) for c in source)
    output = "".join(draw(st.sampled_from([s, t, *alphabet])) for s, t in zip(source, target))
    return source, output, target


def _run(rows):
    gold = [CscSample(str(i), s, t) for i, (s, _, t) in enumerate(rows)]
    preds = [Prediction(str(i), s, o) for i, (s, o, _) in enumerate(rows)]
    return evaluate(preds, gold)


@settings(max_examples=150, deadline=None)
@given(st.lists(triples(), min_size=1, max_size=50))
def test_matches_brute_force(rows):
    report = _run(rows)
    expected = brute_force_scores(rows)
    for level, key in ((report.detection, "det"), (report.correction, "cor")):
        p, r, f = expected[key]
        assert level.precision == pytest.approx(float(p), abs=1e-12)
        assert level.recall == pytest.approx(float(r), abs=1e-12)
        assert level.f1 == pytest.approx(float(f), abs=1e-12)


@given(st.lists(triples(), min_size=1, max_size=50))
def test_correction_never_beats_detection(rows):
    report = _run(rows)
    assert report.cor_tp <= report.det_tp
    assert report.correction.precision <= report.detection.precision
    assert report.correction.recall <= report.detection.recall
    assert report.correction.f1 <= report.detection.f1


def test_f1_is_exact_harmonic_mean():
    rows = [("甲乙", "甲甲", "甲甲")] * 2 + [("甲乙", "乙乙", "甲甲")] + [("丙丙", "丙丙", "丁丙")] * 4
    report = _run(rows)
    p, r, f = brute_force_scores(rows)["det"]
    assert f == Fraction(4, 10)
    assert report.detection.f1 == pytest.approx(0.4, abs=1e-15)
