import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmdnlu.corpus import Dataset, TaggedSentence, generate_dataset, load_schema, validate_tags
from cmdnlu.embed import build_vocab, onehot_embedding
from cmdnlu.errors import ConfigurationError, TrainingError, ValidationError
from cmdnlu.net import SequenceModelConfig
from cmdnlu.slots import (IobTag, Span, decode_frames, load_slot_model, post_filter,
                          predict_tags, save_slot_model, select_slot_model, train_slot_model)

GPSR = load_schema("gpsr")


def encode(n_tokens, spans):
    """Reference IOB encoder: spans are (start, end, slot) with end exclusive."""
    tags = ["O"] * n_tokens
    for start, end, slot in spans:
        tags[start] = f"B-{slot}"
        for i in range(start + 1, end):
            tags[i] = f"I-{slot}"
    return tags


@st.composite
def spans_strategy(draw):
    n = draw(st.integers(1, 12))
    cuts = sorted(draw(st.sets(st.integers(0, n), max_size=8)))
    spans = []
    for a, b in zip(cuts, cuts[1:]):
        if draw(st.booleans()):
            spans.append((a, b, draw(st.sampled_from(GPSR.slot_types))))
    return n, spans


@given(spans_strategy())
def test_iob_round_trip(case):
    n, spans = case
    tokens = [f"w{i}" for i in range(n)]
    tags = encode(n, spans)
    validate_tags(tags)
    frame = decode_frames(tokens, tags)
    got = sorted((s.start, s.end, slot) for slot, ss in frame.spans.items() for s in ss)
    assert got == sorted(spans)
    back = encode(n, got)
    assert back == tags


def test_decode_examples():
    f = decode_frames(["go", "living", "room"], ["O", "B-destination", "I-destination"])
    assert f.values() == {"destination": ["living room"]}
    assert f.spans["destination"] == [Span(1, 3, "living room")]
    assert not decode_frames(["go", "home"], ["O", "O"])
    assert decode_frames(["coke"], ["I-object"]).values() == {"object": ["coke"]}
    f = decode_frames(["a", "b"], ["B-object", "I-person"])
    assert f.values() == {"object": ["a"], "person": ["b"]}
    with pytest.raises(ValidationError):
        decode_frames(["a"], ["O", "O"])


def test_iob_tag_parse():
    assert str(IobTag.parse("B-object")) == "B-object"
    assert IobTag.parse("O") == IobTag("O")
    for bad in ("X-object", "B", "B-"):
        with pytest.raises(ValidationError):
            IobTag.parse(bad)


def test_post_filter_example():
    tags = post_filter("motion", ["O", "O", "O", "B-what_to_tell"], GPSR)
    assert tags == ["O", "O", "O", "O"]
    allowed = ["O", "B-destination", "I-destination"]
    assert post_filter("motion", allowed, GPSR) == allowed


all_tags = st.sampled_from(GPSR.tag_set())


@given(st.sampled_from(GPSR.action_names), st.lists(all_tags, max_size=15))
def test_post_filter_closure_and_idempotence(action, tags):
    out = post_filter(action, tags, GPSR)
    assert len(out) == len(tags)
    assert {t[2:] for t in out if t != "O"} <= GPSR.allowed_slots(action)
    assert post_filter(action, out, GPSR) == out
    assert out.count("O") >= tags.count("O")
    for before, after in zip(tags, out):
        assert after == before or after == "O"
        if before == "O" or before[2:] in GPSR.allowed_slots(action):
            assert after == before


def test_select_slot_model():
    models = {a: object() for a in GPSR.action_names}
    assert select_slot_model(models, "motion") is models["motion"]
    assert select_slot_model(models, "Other") is None
    del models["follow"]
    with pytest.raises(ConfigurationError):
        select_slot_model(models, "follow")


@pytest.fixture(scope="module")
def trained():
    data = generate_dataset(GPSR, 300, seed=1)
    emb = onehot_embedding(build_vocab([r.tokens for r in data.records], 500))
    c = SequenceModelConfig("lstm", 1, 24, False, emb.dim, len(GPSR.tag_set()),
                            "per_step", seed=0)
    model, hist = train_slot_model(data, c, emb, epochs=4)
    return data, emb, model, hist


def test_trained_model_tags_a_motion_command(trained):
    _, _, model, hist = trained
    assert hist.train_loss[-1] < hist.train_loss[0]
    tags = predict_tags(model, ["go", "to", "the", "kitchen"])
    assert tags == ["O", "O", "O", "B-destination"]
    assert predict_tags(model, ["go", "to", "the", "kitchen"]) == tags
    with pytest.raises(ValueError):
        predict_tags(model, [])


def test_per_action_model_uses_its_tag_set(trained):
    data, emb, _, _ = trained
    labels = GPSR.tag_set("motion")
    c = SequenceModelConfig("lstm", 1, 8, False, emb.dim, len(labels), "per_step", seed=0)
    model, _ = train_slot_model(data, c, emb, action="motion", epochs=1)
    assert model.labels == ["O", "B-destination", "I-destination"]
    assert model.action == "motion"


def test_train_slot_model_errors(trained):
    data, emb, _, _ = trained
    c = SequenceModelConfig("lstm", 1, 8, False, emb.dim, len(GPSR.tag_set()), "per_step")
    with pytest.raises(TrainingError):
        train_slot_model(Dataset("gpsr", "train", []), c, emb, epochs=1)
    bad = Dataset("gpsr", "train", [TaggedSentence(["go", "x"], ["O", "I-object"], "motion")])
    with pytest.raises(ValidationError):
        train_slot_model(bad, c, emb, epochs=1)
    last = SequenceModelConfig("lstm", 1, 8, False, emb.dim, len(GPSR.tag_set()))
    with pytest.raises(ValidationError):
        train_slot_model(data, last, emb, epochs=1)


def test_slot_checkpoint_round_trip(tmp_path, trained):
    data, emb, model, _ = trained
    path = tmp_path / "s.json"
    save_slot_model(path, model)
    back = load_slot_model(path, emb)
    assert back.labels == model.labels
    for rec in data.records[:20]:
        assert predict_tags(back, rec.tokens) == predict_tags(model, rec.tokens)
    with pytest.raises(ConfigurationError):
        load_slot_model(path, onehot_embedding(build_vocab(["a"], 5)))
