"""IOB slot tagging, decoding to frames, and action-aware model selection."""

from dataclasses import dataclass, field

import numpy as np

from .corpus import OTHER, load_schema
from .embed import embed_sentence
from .errors import ConfigurationError, TrainingError, ValidationError
from .net import forward, init_params, load_checkpoint, save_checkpoint, train


@dataclass(frozen=True)
class IobTag:
    kind: str
    slot_type: str = None

    def __post_init__(self):
        if self.kind not in ("O", "B", "I"):
            raise ValidationError(f"bad IOB kind {self.kind!r}")
        if (self.kind == "O") != (self.slot_type is None):
            raise ValidationError("O tags carry no slot type; B/I tags need one")

    def __str__(self):
        return "O" if self.kind == "O" else f"{self.kind}-{self.slot_type}"

    @classmethod
    def parse(cls, text):
        if text == "O":
            return cls("O")
        kind, sep, slot = text.partition("-")
        if not sep or not slot:
            raise ValidationError(f"bad IOB tag {text!r}")
        return cls(kind, slot)


@dataclass
class SlotModel:
    config: object
    params: dict
    labels: list
    embedding: object
    action: str = None

    def predict(self, tokens):
        return predict_tags(self, tokens)


def train_slot_model(dataset, config, embedding, action=None, labels=None, epochs=30,
                     lr=0.01, seed=0, val_dataset=None, target_loss=None):
    """Train a per-step tagger; with ``action`` only that action's records are used.

    Returns ``(model, history)``.
    """
    if labels is None:
        schema = load_schema(dataset.schema_name)
        labels = schema.tag_set(action)
    if config.output_mode != "per_step" or config.output_dim != len(labels):
        raise ValidationError("slot model needs per_step output over the tag set")
    if config.input_dim != embedding.dim:
        raise ValidationError("model input_dim does not match embedding dimension")
    records = [r for r in dataset.records if action is None or r.action == action]
    if not records:
        raise TrainingError(f"no training records for slot model (action={action!r})")
    index = {t: i for i, t in enumerate(labels)}

    def encode(recs):
        out = []
        for i, rec in enumerate(recs):
            rec.validate()
            unknown = [t for t in rec.tags if t not in index]
            if unknown:
                raise ValidationError(f"record {i}: tags {unknown} outside the tag set")
            out.append((embed_sentence(rec.tokens, embedding),
                        np.array([index[t] for t in rec.tags])))
        return out

    examples = encode(records)
    val = None
    if val_dataset is not None:
        val = encode([r for r in val_dataset.records if action is None or r.action == action])
    params = init_params(config)
    history = train(config, params, examples, epochs, lr=lr, seed=seed,
                    val_examples=val or None, target_loss=target_loss)
    return SlotModel(config, params, list(labels), embedding, action), history


def predict_tags(model, tokens):
    """One tag string per token (argmax, ties to the lowest label index)."""
    if not tokens:
        raise ValueError("cannot tag an empty command")
    scores = forward(model.config, model.params, embed_sentence(tokens, model.embedding)).scores
    return [model.labels[i] for i in np.argmax(scores, axis=1)]


def post_filter(action, tags, schema):
    """Replace tags whose slot type the action does not take with ``O``."""
    allowed = schema.allowed_slots(action)
    out = []
    for tag in tags:
        if tag != "O" and tag[2:] not in allowed:
            tag = "O"
        out.append(tag)
    return out


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    text: str


@dataclass
class SlotFrame:
    spans: dict = field(default_factory=dict)

    def values(self):
        return {slot: [s.text for s in spans] for slot, spans in self.spans.items()}

    def __bool__(self):
        return bool(self.spans)


def decode_frames(tokens, tags):
    """Group B-then-I runs of one slot type into spans.

    An orphan I- tag opens a new span, and an I- tag of a different type
    closes the open span before opening its own.
    """
    if len(tokens) != len(tags):
        raise ValidationError("tokens and tags are not aligned")
    frame = SlotFrame()
    open_slot, start = None, 0

    def close(end):
        if open_slot is not None:
            text = " ".join(tokens[start:end])
            frame.spans.setdefault(open_slot, []).append(Span(start, end, text))

    for i, tag in enumerate(tags):
        kind, slot = (tag, None) if tag == "O" else (tag[0], tag[2:])
        if kind == "I" and slot == open_slot:
            continue
        close(i)
        open_slot, start = (slot, i) if kind in ("B", "I") else (None, i)
    close(len(tokens))
    return frame


def select_slot_model(models, action):
    """Approach-2 lookup; ``Other`` has no slot model and returns None."""
    if action == OTHER:
        return None
    try:
        return models[action]
    except KeyError:
        raise ConfigurationError(f"no slot model for action {action!r}") from None


def save_slot_model(path, model):
    save_checkpoint(path, model.config, model.params, model.embedding.vocab.fingerprint(),
                    kind="slots", labels=model.labels, action=model.action)


def load_slot_model(path, embedding):
    config, params, payload = load_checkpoint(path)
    if payload.get("kind") != "slots":
        raise ConfigurationError(f"{path} is not a slot checkpoint")
    if payload["vocab_fingerprint"] != embedding.vocab.fingerprint():
        raise ConfigurationError(f"{path} was trained with a different vocabulary")
    if config.input_dim != embedding.dim:
        raise ConfigurationError(f"{path} expects {config.input_dim}-dim word vectors")
    for tag in payload["labels"]:
        IobTag.parse(tag)
    return SlotModel(config, params, list(payload["labels"]), embedding, payload.get("action"))


