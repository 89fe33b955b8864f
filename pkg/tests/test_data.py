import json

import pytest
from hypothesis import given, strategies as st

from dictcsc.data import (
    CorpusFormatError,
    CscSample,
    SampleValidationError,
    convert_charset,
    corpus_stats,
    load_charmap,
    load_corpus,
    save_corpus,
)

hanzi = st.characters(min_codepoint=0x4E00, max_codepoint=0x4E80)


def test_error_positions_are_derived():
    s = CscSample("a", "那时天起非常好", "那时天气非常好")
    assert s.error_positions == (3,)
    assert s.has_errors


def test_clean_sample_has_no_errors():
    s = CscSample("b", "我们在街上跑", "我们在街上跑")
    assert s.error_positions == ()
    assert not s.has_errors


def test_length_mismatch_rejected():
    with pytest.raises(SampleValidationError, match="length"):
        CscSample("c", "那时天起", "那时天气好")


def test_load_tsv_and_jsonl_agree(tmp_path, data_dir):
    tsv = load_corpus(data_dir / "train_small.tsv")
    path = tmp_path / "c.jsonl"
    save_corpus(tsv, path)
    again = load_corpus(path)
    assert again == tsv
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert set(first) >= {"id", "source", "target"}


def test_blank_lines_skipped(tmp_path):
    p = tmp_path / "c.tsv"
    p.write_text("x\t好\t好\n\n\ny\t水\t水\n", encoding="utf-8")
    assert [s.id for s in load_corpus(p)] == ["x", "y"]


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("x\t好\t好\ny\t只有两列\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError) as err:
        load_corpus(p)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_mismatched_lengths_in_file(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("x\t好好\t好\n", encoding="utf-8")
    with pytest.raises((SampleValidationError, CorpusFormatError)):
        load_corpus(p)


def test_charmap_conversion(data_dir):
    mapping = load_charmap(data_dir / "charmap.tsv")
    s = CscSample("t", "那時天起", "那時天氣")
    out = convert_charset(s, mapping)
    assert out.source == "那时天起"
    # 氣 is not in the table, so it passes through untouched
    assert out.target == "那时天氣"


def test_conflicting_charmap_rejected(tmp_path):
    p = tmp_path / "m.tsv"
    p.write_text("會\t会\n會\t汇\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_charmap(p)


def test_stats_on_small_corpus(data_dir):
    stats = corpus_stats(load_corpus(data_dir / "train_small.tsv"))
    assert stats.sentence_count == 6
    assert stats.error_count == 4
    assert stats.avg_length == pytest.approx((7 + 6 + 9 + 6 + 6 + 7) / 6)


def test_stats_empty():
    stats = corpus_stats([])
    assert (stats.sentence_count, stats.avg_length, stats.error_count) == (0, 0.0, 0)


@given(st.lists(st.tuples(hanzi, hanzi), min_size=1, max_size=30))
def test_error_positions_match_character_differences(pairs):
    src = "".join(a for a, _ in pairs)
    tgt = "".join(b for _, b in pairs)
    s = CscSample("h", src, tgt)
    assert s.error_positions == tuple(i for i, (a, b) in enumerate(pairs) if a != b)
    assert all(s.source[i] != s.target[i] for i in s.error_positions)


@given(st.dictionaries(hanzi, hanzi, max_size=10), st.text(alphabet=hanzi, max_size=20))
def test_conversion_preserves_length_and_is_per_character(mapping, text):
    out = convert_charset(CscSample("h", text, text), mapping)
    assert len(out.source) == len(text)
    assert out.source == "".join(mapping.get(c, c) for c in text)
    assert out.error_positions == ()


@given(st.lists(st.tuples(st.text(alphabet=hanzi, min_size=1, max_size=12), st.data()), max_size=8))
def test_tsv_round_trip(tmp_path_factory, rows):
    samples = []
    for i, (src, data) in enumerate(rows):
        tgt = "".join(data.draw(st.sampled_from([c, "好"])) for c in src)
        samples.append(CscSample(f"r{i}", src, tgt))
    path = tmp_path_factory.mktemp("rt") / "c.tsv"
    save_corpus(samples, path)
    assert load_corpus(path) == samples
