import json
import os
import random
import tempfile

import pytest
from hypothesis import given, strategies as st

from cmdnlu.corpus import (ARTICLE_DROP_RATE, ARTICLES, OTHER, PREFIX_RATE, Dataset,
                           TaggedSentence, generate_command, generate_dataset,
                           generate_instruction, generate_other_commands, load_schema,
                           other_vocabulary, placeholder_slot, read_dataset, tokenize,
                           validate_tags, write_dataset)
from cmdnlu.errors import ParseError, SchemaError, ValidationError
from cmdnlu.slots import decode_frames


@pytest.fixture(scope="module")
def gpsr():
    return load_schema("gpsr")


@pytest.fixture(scope="module")
def fbm3():
    return load_schema("fbm3")


# -- tokenize ----------------------------------------------------------------

@pytest.mark.parametrize("text,expected", [
    ("Go to the Kitchen, please!", ["go", "to", "the", "kitchen", "please"]),
    ("", []),
    ("bring 2 cokes", ["bring", "cokes"]),
    ("don't stop", ["do", "stop"]),
    ("it's the robot's arm", ["it", "the", "robot", "arm"]),
    ("room_12 now", ["room", "now"]),
])
def test_tokenize_examples(text, expected):
    assert tokenize(text) == expected


@given(st.text())
def test_tokenize_output_is_lowercase_alpha_and_idempotent(text):
    toks = tokenize(text)
    assert all(t.isalpha() and t == t.lower() for t in toks)
    assert tokenize(" ".join(toks)) == toks


# -- schemas -----------------------------------------------------------------

def test_schema_inventories(gpsr, fbm3):
    assert gpsr.action_names == ["motion", "meet", "grasp", "place", "take", "tell",
                                 "answer", "find", "guide", "follow"]
    assert fbm3.action_names == ["motion", "searching", "taking", "placing", "bringing"]
    assert gpsr.allowed_slots("motion") == {"destination"}
    assert fbm3.allowed_slots("bringing") == {"beneficiary", "destination", "object", "source"}
    for schema in (gpsr, fbm3):
        for spec in schema.actions:
            assert len(spec.templates) >= 3
            used = {placeholder_slot(t) for tpl in spec.templates for t in tpl} - {None}
            assert used <= spec.allowed_slots


def test_unknown_action_is_schema_error(gpsr):
    with pytest.raises(SchemaError):
        gpsr.action("dance")
    with pytest.raises(SchemaError):
        generate_command(gpsr, "dance", seed=0)


def test_tag_set(gpsr):
    assert gpsr.tag_set("motion") == ["O", "B-destination", "I-destination"]
    assert len(gpsr.tag_set()) == 1 + 2 * len(gpsr.slot_types)


def test_without_values(gpsr):
    small = gpsr.without_values(["kitchen", "coke"])
    assert "kitchen" not in small.slot_lexicon["destination"]
    assert "coke" not in small.slot_lexicon["object"]
    assert small.action_names == gpsr.action_names
    with pytest.raises(SchemaError):
        gpsr.without_values(gpsr.slot_lexicon["person"])


# -- generator ---------------------------------------------------------------

def _hand_expand(schema, action, seed):
    """Replay the generator's documented draw order with a fresh stdlib RNG."""
    rng = random.Random(seed)
    spec = schema.action(action)
    template = rng.choice(spec.templates)
    tokens, tags = [], []
    if rng.random() < PREFIX_RATE:
        tokens = rng.choice(schema.prefixes).split()
        tags = ["O"] * len(tokens)
    terse = rng.random() < ARTICLE_DROP_RATE
    for tok in template:
        slot = placeholder_slot(tok)
        if slot is None:
            if not (terse and tok in ARTICLES):
                tokens.append(tok)
                tags.append("O")
        else:
            words = rng.choice(schema.slot_lexicon[slot]).split()
            tokens += words
            tags += [f"B-{slot}"] + [f"I-{slot}"] * (len(words) - 1)
    return tokens, tags


def test_generate_command_seed_examples(gpsr, fbm3):
    rec = generate_command(gpsr, "motion", seed=7)
    assert (rec.tokens, rec.tags) == _hand_expand(gpsr, "motion", 7)
    assert rec.tokens == ["navigate", "to", "the", "bedroom"]
    assert rec.tags == ["O", "O", "O", "B-destination"]
    assert rec.action == "motion"

    rec = generate_command(fbm3, "bringing", seed=3)
    assert (rec.tokens, rec.tags) == _hand_expand(fbm3, "bringing", 3)
    assert rec.action == "bringing" and "B-object" in rec.tags


def test_generate_command_tell_uses_allowed_slots(gpsr):
    for seed in range(50):
        rec = generate_command(gpsr, "tell", seed=seed)
        assert rec.slot_types() <= gpsr.allowed_slots("tell")


@pytest.mark.parametrize("name", ["gpsr", "fbm3"])
def test_generator_invariants_over_10k_seeds(name):
    schema = load_schema(name)
    values = {slot: set(v) for slot, v in schema.slot_lexicon.items()}
    for seed in range(10_000):
        rec = generate_command(schema, seed=seed)
        assert len(rec.tokens) == len(rec.tags)
        validate_tags(rec.tags)
        assert rec.action in schema.action_names
        assert rec.slot_types() <= schema.allowed_slots(rec.action)
        assert all(t.isalpha() for t in rec.tokens)
        for slot, spans in decode_frames(rec.tokens, rec.tags).values().items():
            assert set(spans) <= values[slot]


def test_generator_determinism(gpsr):
    a = generate_dataset(gpsr, 200, seed=11, other_fraction=0.1)
    b = generate_dataset(gpsr, 200, seed=11, other_fraction=0.1)
    assert a == b
    assert generate_dataset(gpsr, 200, seed=12) != generate_dataset(gpsr, 200, seed=11)


def test_generate_instruction(gpsr):
    one = generate_instruction(gpsr, 1, seed=5)
    assert one.joiners == [] and one.text == " ".join(one.gold_commands[0].tokens)
    two = generate_instruction(gpsr, 2, seed=1)
    assert two.text == "grasp the bowl on the living room and search for the orange"
    assert [c.action for c in two.gold_commands] == ["grasp", "find"]
    three = generate_instruction(gpsr, 3, seed=4)
    assert len(three.joiners) == 2 and len(three.gold_commands) == 3
    with pytest.raises(ValueError):
        generate_instruction(gpsr, 0)


def test_other_commands(gpsr, fbm3):
    assert generate_other_commands(1, seed=2)[0].tokens == ["call", "a", "taxi"]
    recs = generate_other_commands(500, seed=0)
    in_set_verbs = {tpl[0] for s in (gpsr, fbm3) for a in s.actions for tpl in a.templates}
    for rec in recs:
        assert rec.action == OTHER
        assert set(rec.tags) == {"O"}
        assert not set(rec.tokens) & in_set_verbs
    with pytest.raises(ValueError):
        generate_other_commands(0)


def test_other_vocabulary(gpsr):
    words = other_vocabulary()
    values = {w for vals in gpsr.slot_lexicon.values() for v in vals for w in v.split()}
    assert "sing" in words
    assert not {"coke", "kitchen", "john"} & words
    assert words - values


# -- dataset I/O -------------------------------------------------------------

def test_dataset_round_trip(tmp_path, gpsr):
    data = generate_dataset(gpsr, 100, seed=3, split="test", other_fraction=0.1)
    path = tmp_path / "d.jsonl"
    write_dataset(data, path)
    back = read_dataset(path)
    assert back == data


@given(st.integers(0, 2**31 - 1))
def test_dataset_round_trip_property(seed):
    data = generate_dataset(load_schema("fbm3"), 5, seed=seed)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.jsonl")
        write_dataset(data, path)
        assert read_dataset(path) == data


def _write_rows(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def test_read_dataset_errors(tmp_path):
    p = tmp_path / "bad.jsonl"
    _write_rows(p, [{"tokens": ["go", "home"], "tags": ["O"], "action": "motion"}])
    with pytest.raises(ValidationError):
        read_dataset(p)
    for tags in (["I-destination", "O"], ["O", "I-destination"], ["B-object", "I-person"],
                 ["X-object", "O"]):
        _write_rows(p, [{"tokens": ["go", "home"], "tags": tags, "action": "motion"}])
        with pytest.raises(ValidationError):
            read_dataset(p)
    p.write_text('{"tokens": ["go"], "tags": ["O"], "action": "motion"}\n{not json\n')
    with pytest.raises(ParseError, match="line 2"):
        read_dataset(p)
    _write_rows(p, [{"tokens": ["go"], "action": "motion"}])
    with pytest.raises(ParseError, match="line 1"):
        read_dataset(p)
    _write_rows(p, [{"tokens": ["go"], "tags": ["O"], "action": "fly"}])
    with pytest.raises(ValidationError):
        read_dataset(p)


def test_dataset_validate_split_and_slots(gpsr):
    rec = TaggedSentence(["go", "kitchen"], ["O", "B-beneficiary"], "motion")
    with pytest.raises(ValidationError):
        Dataset("gpsr", "train", [rec]).validate()
    with pytest.raises(ValidationError):
        Dataset("gpsr", "dev", []).validate()
