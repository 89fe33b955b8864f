import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dictcsc.encoders import (
    CheckpointError,
    CscModel,
    EncoderConfig,
    EncoderLengthError,
    FrozenEncoder,
    LookupEncoder,
    TransformerEncoder,
    Vocab,
    freeze,
    load_checkpoint,
    load_model,
    read_array,
    save_checkpoint,
    write_array,
)

from conftest import tiny_encoder
from oracles import directional_difference, relative_error

CHARS = "那时天起气非常好街上正在晒洒水"


def test_encode_shape():
    enc = tiny_encoder(CHARS, hidden=16)
    rep = enc.encode("那时天气好")
    assert rep.valid_length == 5
    assert rep.values.shape == (5, 16)
    assert np.all(np.isfinite(rep.values))


def test_lookup_row_equals_table_row():
    cfg = EncoderConfig(vocab=tuple("ABC"), hidden_size=4, kind="lookup")
    enc = LookupEncoder(cfg)
    idx = enc.vocab.id_of("B")
    assert idx == 3
    np.testing.assert_array_equal(enc.encode("B").values[0], enc.params["tok_emb"][3])


def test_encode_is_deterministic():
    enc = tiny_encoder(CHARS)
    a, b = enc.encode("那时天气"), enc.encode("那时天气")
    assert np.array_equal(a.values, b.values)


def test_unknown_char_maps_to_unk():
    enc = tiny_encoder(CHARS)
    assert enc.vocab.id_of("龘") == Vocab.UNK
    np.testing.assert_array_equal(enc.encode("龘").values, enc.encode("鱻").values)


def test_too_long_sentence():
    enc = tiny_encoder(CHARS, max_length=4)
    with pytest.raises(EncoderLengthError):
        enc.encode("那时天气好")
    assert enc.encode("那时天气好", truncate=True).valid_length == 4


def test_heads_must_divide_hidden():
    with pytest.raises(ValueError):
        EncoderConfig(vocab=("a",), hidden_size=10, heads=3)


def test_padding_does_not_leak():
    enc = tiny_encoder(CHARS, hidden=8, layers=2)
    alone = enc.encode("天气")
    batch, lengths = enc.encode_batch(["天气", "那时天气非常好"])
    np.testing.assert_allclose(batch[0, :2], alone.values, atol=1e-12)


def _encoder_grad_check(enc, sentences, rng, n_dirs=3):
    ids, lengths = enc.batch_ids(sentences)
    out, _ = enc.forward(ids, lengths)
    weight = rng.normal(size=out.shape)

    def f():
        o, _ = enc.forward(ids, lengths)
        return float((o * weight).sum())

    _, cache = enc.forward(ids, lengths)
    grads = enc.backward(weight, cache)
    worst = 0.0
    for _ in range(n_dirs):
        d = {k: rng.normal(size=v.shape) for k, v in enc.params.items()}
        analytic = sum(float((grads[k] * d[k]).sum()) for k in d)
        numeric = directional_difference(f, enc.params, d)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


@pytest.mark.parametrize("layers,heads", [(1, 1), (1, 2), (2, 2), (2, 4)])
def test_transformer_gradients(layers, heads, rng):
    enc = tiny_encoder(CHARS, hidden=8, layers=layers, heads=heads)
    assert _encoder_grad_check(enc, ["那时天起非常好", "街上晒水"], rng) < 1e-3


def test_gradient_per_coordinate(rng):
    """A handful of single coordinates, one per parameter tensor."""
    enc = tiny_encoder(CHARS, hidden=8, layers=1, heads=2)
    ids, lengths = enc.batch_ids(["那时天起", "好"])
    out, cache = enc.forward(ids, lengths)
    weight = rng.normal(size=out.shape)
    grads = enc.backward(weight, cache)
    for name, p in enc.params.items():
        idx = tuple(rng.integers(s) for s in p.shape)
        if name == "tok_emb":
            idx = (ids[0, 1],) + idx[1:]
        if name == "pos_emb":
            idx = (0,) + idx[1:]
        old = p[idx]
        p[idx] = old + 1e-4
        up = float((enc.forward(ids, lengths)[0] * weight).sum())
        p[idx] = old - 1e-4
        down = float((enc.forward(ids, lengths)[0] * weight).sum())
        p[idx] = old
        numeric = (up - down) / 2e-4
        assert abs(grads[name][idx] - numeric) <= 1e-3 * max(abs(numeric), 1e-3), name


def test_freeze_contract():
    enc = tiny_encoder(CHARS)
    before = enc.encode("那时天气").values.copy()
    frozen = freeze(enc)
    np.testing.assert_array_equal(frozen.encode("那时天气").values, before)
    for arr in frozen.params.values():
        with pytest.raises(ValueError):
            arr += 1.0
    # later edits to the source encoder do not reach the snapshot
    enc.params["tok_emb"] += 1.0
    np.testing.assert_array_equal(frozen.encode("那时天气").values, before)
    grads = frozen.backward(None, None)
    assert all(not np.any(g) for g in grads.values())
    assert isinstance(frozen, FrozenEncoder) and frozen.copy() is frozen


def test_frozen_encode_many_matches_single():
    frozen = freeze(tiny_encoder(CHARS))
    many = frozen.encode_many(["天气", "那时天气非常好", "天气"])
    single = frozen.encode("那时天气非常好")
    np.testing.assert_allclose(many[1].values, single.values, atol=1e-12)
    assert many[0].valid_length == 2


def test_head_probabilities_sum_to_one():
    model = CscModel(tiny_encoder(CHARS))
    probs = model.probabilities("那时天气好")
    np.testing.assert_allclose(probs.sum(-1), 1.0, atol=1e-6)


def test_checkpoint_round_trip(tmp_path):
    enc = tiny_encoder(CHARS, dtype="float32", seed=3)
    path = save_checkpoint(enc, tmp_path / "ck", step=7)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["step"] == 7 and manifest["seed"] == 3
    again = load_checkpoint(path)
    probe = ["那时天气非常好", "街上"]
    a, _ = enc.encode_batch(probe)
    b, _ = again.encode_batch(probe)
    assert np.array_equal(a, b)


def test_model_round_trip(tmp_path):
    model = CscModel(tiny_encoder(CHARS, dtype="float32"))
    save_checkpoint(model, tmp_path / "m")
    again = load_model(tmp_path / "m")
    _, la, _ = model.forward(["天气好"])
    _, lb, _ = again.forward(["天气好"])
    assert np.array_equal(la, lb)
    # a model checkpoint also loads as its bare encoder
    assert isinstance(load_checkpoint(tmp_path / "m"), TransformerEncoder)
    with pytest.raises(CheckpointError):
        load_model(save_checkpoint(model.encoder, tmp_path / "e"))


def test_missing_array_named(tmp_path):
    path = save_checkpoint(tiny_encoder(CHARS, dtype="float32"), tmp_path / "ck")
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    victim = next(e for e in manifest["parameters"] if e["name"] == "emb_ln.g")
    (path / victim["file"]).unlink()
    with pytest.raises(CheckpointError, match="emb_ln.g"):
        load_checkpoint(path)


def test_hidden_size_mismatch(tmp_path):
    enc = tiny_encoder(CHARS, hidden=8, dtype="float32")
    path = save_checkpoint(enc, tmp_path / "ck")
    bigger = EncoderConfig(**{**enc.config.to_dict(), "hidden_size": 16, "ffn_size": 0})
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(path, bigger)


def test_version_mismatch(tmp_path):
    path = save_checkpoint(tiny_encoder(CHARS, dtype="float32"), tmp_path / "ck")
    m = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    m["version"] = 99
    (path / "manifest.json").write_text(json.dumps(m), encoding="utf-8")
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_corrupt_array_named(tmp_path):
    path = save_checkpoint(tiny_encoder(CHARS, dtype="float32"), tmp_path / "ck")
    m = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    entry = next(e for e in m["parameters"] if e["name"] == "tok_emb")
    f = path / entry["file"]
    f.write_bytes(f.read_bytes()[:-4])
    with pytest.raises(CheckpointError, match="tok_emb"):
        load_checkpoint(path)


def test_failed_save_leaves_nothing(tmp_path, monkeypatch):
    import dictcsc.encoders as E

    def boom(path, arr):
        raise OSError("disk full")

    monkeypatch.setattr(E, "write_array", boom)
    with pytest.raises(OSError):
        save_checkpoint(tiny_encoder(CHARS), tmp_path / "ck")
    assert list(tmp_path.iterdir()) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 5), max_size=3), st.integers(0, 2**31))
def test_array_file_round_trip(tmp_path_factory, dims, seed):
    arr = np.random.default_rng(seed).normal(size=dims).astype(np.float32)
    path = tmp_path_factory.mktemp("a") / "x.f32"
    write_array(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == b"F32A"
    back = read_array(path)
    assert back.shape == arr.shape and np.array_equal(back, arr)


@settings(max_examples=25, deadline=None)
@given(st.text(alphabet=CHARS, min_size=1, max_size=10))
def test_output_shape_property(sentence):
    enc = tiny_encoder(CHARS, hidden=8, max_length=10)
    rep = enc.encode(sentence)
    assert rep.values.shape == (len(sentence), 8)
    assert np.all(np.isfinite(rep.values))
